//! Command-line surface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use surge_core::evaluation::{parse_gauge_csv, sample_at_gauges, scatter_csv, storm_weighted_rmse, GaugeSampling};
use surge_core::gridding::{FeatureConfig, GridSpec, TimeWindow, DEFAULT_EXTENT_DEG, DEFAULT_RESOLUTION};
use surge_core::oracle::{synth_tracks, SurgeOracleParams};
use surge_core::tracks::{pack_runs, write_track_csv, Basin, FilterCriteria};
use surge_nn::{Architecture, CnnConfig, ModelCheckpoint, TrainConfig, UNetConfig};

use crate::dataset::{
    build_dataset, read_features, read_field, read_tracks, toy_world, write_field, BuildConfig, BuildSource,
    DatasetManifest, SplitTag,
};
use crate::error::PipelineError;
use crate::experiment::{compare_local_global, evaluate_checkpoint, predict_field, train_on_manifest};

pub const THREADS_ENV: &str = "SURGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "surge", version, about = "Peak storm-surge surrogate pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic tracks for the toy world as CSV.
    MakeToyTracks(MakeToyTracksArgs),
    /// Pack storms into simulation runs, at most one per basin.
    PackRuns(PackRunsArgs),
    /// Build feature and target tensors plus a dataset manifest.
    BuildDataset(BuildDatasetArgs),
    /// Train a model on a dataset manifest.
    Train(TrainArgs),
    /// Per-basin RMSE of a checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Basin-specific checkpoints against a global one.
    CompareLocalGlobal(CompareArgs),
    /// Predict one surge field from a feature tensor.
    Predict(PredictArgs),
    /// Sample a surge field at tide gauges.
    Gauges(GaugesArgs),
}

#[derive(Debug, Args)]
pub struct MakeToyTracksArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub count: usize,
    /// Comma-separated basin codes.
    #[arg(long, default_value = "NA,EP")]
    pub basins: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PackRunsArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Track CSV; synthesized from the toy seed when omitted in toy mode.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    /// fort.14 mesh (requires --maxele).
    #[arg(long, conflicts_with = "toy_seed")]
    pub mesh: Option<PathBuf>,
    /// Directory of `<storm_id>.txt` nodal maximum-elevation files.
    #[arg(long, requires = "mesh")]
    pub maxele: Option<PathBuf>,
    #[arg(long)]
    pub toy_seed: Option<u64>,
    /// Number of synthetic storms in toy mode.
    #[arg(long, default_value_t = 32)]
    pub count: usize,
    #[arg(long, default_value = "NA,EP")]
    pub basins: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EXTENT_DEG)]
    pub extent: f64,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub res: usize,
    #[arg(long, default_value = "-24:12:3", allow_hyphen_values = true)]
    pub window: String,
    /// Seed of the train/val/test split; defaults to the toy seed or 0.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long, default_value_t = 33.0)]
    pub min_vmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchKind {
    Unet,
    Cnn,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "unet")]
    pub arch: ArchKind,
    #[arg(long, default_value_t = 5)]
    pub depth: usize,
    #[arg(long, default_value_t = 64)]
    pub base_width: usize,
    /// Convolution blocks of the CNN baseline.
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = surge_nn::trainer::DESK_SCALE_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lr_min: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub clip_norm: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train a local model on one basin only.
    #[arg(long)]
    pub basin: Option<String>,
    /// Checkpoint directory; defaults to `<manifest dir>/checkpoints/<arch>[-<basin>]`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub basin: Option<String>,
    /// Per-storm squared-error records.
    #[arg(long)]
    pub storms_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub global_ckpt: PathBuf,
    /// Directory holding one checkpoint per basin code, e.g. `NA/`.
    #[arg(long)]
    pub local_ckpt_dir: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GaugesArgs {
    #[arg(long)]
    pub field: PathBuf,
    /// JSON grid spec: `{"center_lat":..,"center_lon":..,"extent":..,"resolution":..}`.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub gauges: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "model")]
    pub model: String,
    /// Nearest-cell sampling instead of bilinear.
    #[arg(long)]
    pub nearest: bool,
}

pub fn parse_basins(s: &str) -> Result<Vec<Basin>, PipelineError> {
    let basins = s
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| c.parse::<Basin>().map_err(|_| PipelineError::Usage(format!("unknown basin {c:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if basins.is_empty() {
        return Err(PipelineError::Usage("at least one basin is required".into()));
    }
    Ok(basins)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

fn usage(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Usage(e.to_string())
}

pub fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::MakeToyTracks(a) => make_toy_tracks(a),
        Command::PackRuns(a) => pack(a),
        Command::BuildDataset(a) => build(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::CompareLocalGlobal(a) => compare(a),
        Command::Predict(a) => predict(a),
        Command::Gauges(a) => gauges(a),
    }
}

fn make_toy_tracks(a: MakeToyTracksArgs) -> Result<(), PipelineError> {
    let basins = parse_basins(&a.basins)?;
    let storms = synth_tracks(&toy_world(a.seed), a.seed, a.count, &basins);
    emit(a.out.as_deref(), &write_track_csv(&storms))
}

fn pack(a: PackRunsArgs) -> Result<(), PipelineError> {
    let runs = pack_runs(&read_tracks(&a.tracks)?);
    let mut out = String::from("run_id,basin,storm_id\n");
    for run in &runs {
        for (basin, id) in &run.storms {
            out.push_str(&format!("{},{},{}\n", run.run_id, basin, id));
        }
    }
    emit(a.out.as_deref(), &out)?;
    eprintln!("{} storms packed into {} runs", runs.iter().map(|r| r.storms.len()).sum::<usize>(), runs.len());
    Ok(())
}

fn build(a: BuildDatasetArgs) -> Result<(), PipelineError> {
    let window = TimeWindow::parse(&a.window).map_err(usage)?;
    GridSpec::new(0.0, 0.0, a.extent, a.res).map_err(usage)?;
    let tracks = a.tracks.as_deref().map(read_tracks).transpose()?;
    let source = match (a.toy_seed, a.mesh, a.maxele) {
        (Some(seed), None, _) => BuildSource::Toy {
            seed,
            tracks,
            count: a.count,
            basins: parse_basins(&a.basins)?,
            oracle: SurgeOracleParams::default(),
        },
        (None, Some(mesh_path), Some(maxele_dir)) => BuildSource::Mesh {
            tracks: tracks.ok_or_else(|| usage("--mesh requires --tracks"))?,
            mesh_path,
            maxele_dir,
        },
        (None, Some(_), None) => return Err(usage("--mesh requires --maxele")),
        _ => return Err(usage("either --toy-seed or --mesh/--maxele is required")),
    };
    let cfg = BuildConfig {
        split_seed: a.split_seed.or(a.toy_seed).unwrap_or(0),
        source,
        out_dir: a.out,
        extent: a.extent,
        resolution: a.res,
        features: FeatureConfig { window, ..FeatureConfig::default() },
        filter: FilterCriteria { min_vmax: a.min_vmax, ..FilterCriteria::default() },
        ..BuildConfig::toy(0, 0, vec![], PathBuf::new())
    };
    let out = build_dataset(&cfg)?;
    let count = |t| out.manifest.storms.iter().filter(|e| e.split == t).count();
    println!(
        "built {} storms ({} train, {} val, {} test), skipped {}; manifest {}",
        out.manifest.storms.len(),
        count(SplitTag::Train),
        count(SplitTag::Val),
        count(SplitTag::Test),
        out.skipped.len(),
        out.manifest_path.display()
    );
    Ok(())
}

fn architecture(a: &TrainArgs, in_channels: usize) -> Result<Architecture, PipelineError> {
    let arch = match a.arch {
        ArchKind::Unet => Architecture::Unet(UNetConfig::new(a.depth, a.base_width, in_channels, 1)),
        ArchKind::Cnn => Architecture::Cnn(CnnConfig::new(a.layers, a.base_width, in_channels, 1)),
    };
    arch.validate().map_err(usage)?;
    Ok(arch)
}

fn train(a: TrainArgs) -> Result<(), PipelineError> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let arch = architecture(&a, manifest.channels)?;
    let m = arch.spatial_multiple();
    if manifest.resolution % m != 0 {
        return Err(usage(format!(
            "grid resolution {} is not divisible by {m} required by depth {}",
            manifest.resolution, a.depth
        )));
    }
    if let Some(b) = &a.basin {
        b.parse::<Basin>().map_err(|_| usage(format!("unknown basin {b:?}")))?;
    }
    let cfg = TrainConfig {
        lr_max: a.lr,
        lr_min: a.lr_min,
        weight_decay: a.weight_decay,
        clip_norm: a.clip_norm,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        fractions: manifest.fractions,
        basin: a.basin.clone(),
    };
    cfg.validate().map_err(usage)?;
    let out = a.out.clone().unwrap_or_else(|| {
        let root = a.manifest.parent().unwrap_or(Path::new("."));
        let name = match &a.basin {
            Some(b) => format!("{}-{b}", arch.name()),
            None => arch.name().to_string(),
        };
        root.join("checkpoints").join(name)
    });
    println!("{}: {} parameters", arch.name(), arch.parameter_count());
    println!("epoch,step,lr,train_loss,val_loss");
    let (_, outcome) = train_on_manifest(&a.manifest, arch, &cfg, &out, |r| {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        println!("{},{},{:e},{},{}", r.epoch, r.step, r.lr, r.train_loss, val);
    })?;
    println!("best epoch {}; checkpoint {}", outcome.best_epoch, out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), PipelineError> {
    let split: SplitTag = a.split.parse()?;
    let basin = a
        .basin
        .as_deref()
        .map(|b| b.parse::<Basin>().map_err(|_| usage(format!("unknown basin {b:?}"))))
        .transpose()?;
    let report = evaluate_checkpoint(&a.manifest, &a.ckpt, split, basin)?;
    emit(a.report.as_deref(), &report.to_csv())?;
    if let Some(p) = &a.storms_out {
        write_text(p, &report.storms_csv())?;
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), PipelineError> {
    let report = compare_local_global(&a.manifest, &a.global_ckpt, &a.local_ckpt_dir)?;
    emit(a.out.as_deref(), &report.to_csv())
}

fn predict(a: PredictArgs) -> Result<(), PipelineError> {
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let features = read_features(&a.features, None)?;
    let field = predict_field(&ckpt, &features)?;
    if !field.data.iter().all(|v| v.is_finite()) {
        return Err(PipelineError::Nn(surge_nn::NnError::NonFinite {
            epoch: 0,
            step: 0,
            lr: 0.0,
            loss: f64::NAN,
        }));
    }
    write_field(&a.out, &field)
}

fn gauges(a: GaugesArgs) -> Result<(), PipelineError> {
    let field = read_field(&a.field)?;
    let grid_text = fs::read_to_string(&a.grid).map_err(|e| PipelineError::io(&a.grid, e))?;
    let grid: GridSpec = serde_json::from_str(&grid_text)?;
    let grid = GridSpec::new(grid.center_lat, grid.center_lon, grid.extent, grid.resolution)?;
    if (field.height, field.width) != grid.shape() {
        return Err(PipelineError::Data(format!(
            "field is {}x{} but grid is {:?}",
            field.height,
            field.width,
            grid.shape()
        )));
    }
    let gauge_text = fs::read_to_string(&a.gauges).map_err(|e| PipelineError::io(&a.gauges, e))?;
    let gauges = parse_gauge_csv(&gauge_text)?;
    let mode = if a.nearest { GaugeSampling::Nearest } else { GaugeSampling::Bilinear };
    let samples = sample_at_gauges(&field, &grid, &gauges, mode);
    write_text(&a.out, &scatter_csv(&samples.records, &a.model))?;
    match storm_weighted_rmse(&samples.records) {
        Ok((pooled, equal)) => println!(
            "{} gauges sampled, {} outside the grid; rmse pooled {pooled:.4} m, per-storm equal {equal:.4} m",
            samples.records.len(),
            samples.excluded.len()
        ),
        Err(_) => println!("no gauge inside the grid ({} excluded)", samples.excluded.len()),
    }
    Ok(())
}
