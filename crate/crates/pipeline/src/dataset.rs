//! Dataset build: per-storm landfall, grid, features and target tensors on
//! disk, plus a JSON manifest with split tags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use surge_core::gridding::{
    assemble_with_layers, build_grid, grid_target, parse_nodal_field, static_layers,
    FeatureConfig, FeatureTensor, GridSpec, Mesh, NormStats, TimeWindow, TriangleIndex, DEFAULT_EXTENT_DEG,
    DEFAULT_RESOLUTION,
};
use surge_core::oracle::{synth_surge, synth_tracks, synth_world, DomainBounds, SurgeOracleParams, ToyWorld};
use surge_core::tensor_file::{read_tensor, write_tensor, RawTensor};
use surge_core::tracks::{
    detect_landfall, parse_track_file, Basin, FilterCriteria, LandRaster, LandfallEvent, Storm,
};
use surge_core::SurgeField;
use surge_nn::{split_dataset, SplitFractions};

use crate::error::PipelineError;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SKIP_REPORT_FILE: &str = "skipped.csv";
/// Land raster cell for landfall detection, degrees.
pub const LAND_RASTER_CELL_DEG: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        })
    }
}

impl std::str::FromStr for SplitTag {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            _ => Err(PipelineError::Usage(format!("unknown split {s:?}, expected train, val or test"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Toy { seed: u64 },
    Mesh { mesh: String, maxele_dir: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub basin: Basin,
    pub landfall: LandfallEvent,
    pub grid: GridSpec,
    /// Paths relative to the manifest directory.
    pub features: String,
    pub target: String,
    pub split: SplitTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub source: DataSource,
    pub extent: f64,
    pub resolution: usize,
    pub window: TimeWindow,
    pub channels: usize,
    pub norm: NormStats,
    pub split_seed: u64,
    pub fractions: SplitFractions,
    pub storms: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.version != MANIFEST_VERSION {
            return Err(PipelineError::Data(format!("unsupported manifest version {}", m.version)));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, self.to_json()?).map_err(|e| PipelineError::io(path, e))
    }

    pub fn entries(&self, split: SplitTag, basin: Option<Basin>) -> impl Iterator<Item = &ManifestEntry> {
        self.storms
            .iter()
            .filter(move |e| e.split == split && basin.is_none_or(|b| e.basin == b))
    }

    /// Storm ids per split as produced by the seeded split of all built storms.
    pub fn recompute_split(&self) -> Result<Vec<SplitTag>, PipelineError> {
        let ids: Vec<usize> = (0..self.storms.len()).collect();
        let split = split_dataset(&ids, self.split_seed, self.fractions)?;
        let mut tags = vec![SplitTag::Train; ids.len()];
        for &i in &split.val {
            tags[i] = SplitTag::Val;
        }
        for &i in &split.test {
            tags[i] = SplitTag::Test;
        }
        Ok(tags)
    }
}

pub fn read_features(path: &Path, expected: Option<(usize, usize, usize)>) -> Result<FeatureTensor, PipelineError> {
    let raw = read_tensor(path)?;
    let [c, h, w] = raw.dims[..] else {
        return Err(PipelineError::Data(format!("{}: expected 3 dims, got {:?}", path.display(), raw.dims)));
    };
    if let Some(e) = expected {
        if (c, h, w) != e {
            return Err(PipelineError::Data(format!(
                "{}: shape {:?} does not match manifest {e:?}",
                path.display(),
                raw.dims
            )));
        }
    }
    Ok(FeatureTensor::from_raw(c, h, w, raw.data)?)
}

pub fn write_features(path: &Path, t: &FeatureTensor) -> Result<(), PipelineError> {
    let raw = RawTensor::new(vec![t.channels(), t.height, t.width], t.data.clone());
    Ok(write_tensor(path, &raw)?)
}

pub fn read_field(path: &Path) -> Result<SurgeField, PipelineError> {
    let raw = read_tensor(path)?;
    match raw.dims[..] {
        [h, w] | [1, h, w] => Ok(SurgeField::from_vec(h, w, raw.data)),
        _ => Err(PipelineError::Data(format!(
            "{}: expected an HxW field, got dims {:?}",
            path.display(),
            raw.dims
        ))),
    }
}

pub fn write_field(path: &Path, f: &SurgeField) -> Result<(), PipelineError> {
    Ok(write_tensor(path, &RawTensor::new(vec![f.height, f.width], f.data.clone()))?)
}

/// Where tracks, mesh and targets come from.
#[derive(Debug, Clone)]
pub enum BuildSource {
    /// Seeded toy world with oracle targets. Tracks are synthesized unless given.
    Toy {
        seed: u64,
        tracks: Option<Vec<Storm>>,
        count: usize,
        basins: Vec<Basin>,
        oracle: SurgeOracleParams,
    },
    /// fort.14 mesh with per-storm maximum-elevation files `<maxele_dir>/<storm_id>.txt`.
    Mesh {
        tracks: Vec<Storm>,
        mesh_path: PathBuf,
        maxele_dir: PathBuf,
    },
}

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub source: BuildSource,
    pub out_dir: PathBuf,
    pub extent: f64,
    pub resolution: usize,
    pub features: FeatureConfig,
    pub filter: FilterCriteria,
    pub norm: NormStats,
    pub split_seed: u64,
    pub fractions: SplitFractions,
}

impl BuildConfig {
    pub fn toy(seed: u64, count: usize, basins: Vec<Basin>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            source: BuildSource::Toy {
                seed,
                tracks: None,
                count,
                basins,
                oracle: SurgeOracleParams::default(),
            },
            out_dir: out_dir.into(),
            extent: DEFAULT_EXTENT_DEG,
            resolution: DEFAULT_RESOLUTION,
            features: FeatureConfig::default(),
            filter: FilterCriteria::default(),
            norm: NormStats::default(),
            split_seed: seed,
            fractions: SplitFractions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skip {
    pub storm_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub skipped: Vec<Skip>,
}

/// The default toy world used by the CLI and tests.
pub fn toy_world(seed: u64) -> ToyWorld {
    synth_world(seed, DomainBounds::default())
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Land raster over the mesh bounding box: land where the mesh is absent or dry.
pub fn mesh_land_raster(mesh: &Mesh, index: &TriangleIndex, cell: f64) -> LandRaster {
    let (mut s, mut w, mut n, mut e) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for node in &mesh.nodes {
        s = s.min(node.lat);
        n = n.max(node.lat);
        w = w.min(node.lon);
        e = e.max(node.lon);
    }
    let rows = ((n - s) / cell).ceil().max(1.0) as usize;
    let cols = ((e - w) / cell).ceil().max(1.0) as usize;
    let depths = mesh.depths();
    LandRaster::from_fn(s, w, cell, rows, cols, |lat, lon| match index.locate(mesh, lon, lat) {
        Some((t, wts)) => {
            let tri = mesh.triangles[t];
            let d: f64 = (0..3).map(|k| wts[k] * depths[tri[k]]).sum();
            d <= 0.0
        }
        None => true,
    })
}

enum Targets<'a> {
    Oracle(SurgeOracleParams),
    Files(&'a Path),
}

struct StormOutcome {
    entry: Option<ManifestEntry>,
    skip: Option<Skip>,
}

fn build_one(
    storm: &Storm,
    mesh: &Mesh,
    index: &TriangleIndex,
    land: &LandRaster,
    targets: &Targets<'_>,
    cfg: &BuildConfig,
) -> Result<ManifestEntry, String> {
    if storm.peak_vmax() < cfg.filter.min_vmax {
        return Err(format!(
            "peak wind {:.1} m/s below threshold {:.1}",
            storm.peak_vmax(),
            cfg.filter.min_vmax
        ));
    }
    let landfall = detect_landfall(storm, land, cfg.filter.substep).ok_or("no landfall detected")?;
    let grid = build_grid(&landfall, cfg.extent, cfg.resolution).map_err(|e| e.to_string())?;
    let layers = static_layers(mesh, index, &grid).map_err(|e| e.to_string())?;
    let features = assemble_with_layers(storm, &landfall, &layers, &grid, &cfg.features).map_err(|e| e.to_string())?;
    if !features.is_finite() {
        return Err("non-finite forcing".into());
    }
    let target = match targets {
        Targets::Oracle(params) => synth_surge(&features, &grid, params),
        Targets::Files(dir) => {
            let path = dir.join(format!("{}.txt", storm.id));
            let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let values = parse_nodal_field(&text, mesh.nodes.len()).map_err(|e| e.to_string())?;
            grid_target(mesh, index, &values, &grid, &layers.land).map_err(|e| e.to_string())?
        }
    };
    let stem = file_stem(&storm.id);
    let features_rel = format!("features/{stem}.srgt");
    let target_rel = format!("targets/{stem}.srgt");
    write_features(&cfg.out_dir.join(&features_rel), &features).map_err(|e| e.to_string())?;
    write_field(&cfg.out_dir.join(&target_rel), &target).map_err(|e| e.to_string())?;
    Ok(ManifestEntry {
        id: storm.id.clone(),
        basin: storm.basin,
        landfall,
        grid,
        features: features_rel,
        target: target_rel,
        split: SplitTag::Train,
    })
}

/// Builds all storms (in parallel on the current rayon pool), writes tensors,
/// the skip report and the manifest.
pub fn build_dataset(cfg: &BuildConfig) -> Result<BuildOutput, PipelineError> {
    GridSpec::new(0.0, 0.0, cfg.extent, cfg.resolution)?;
    cfg.fractions.validate()?;
    for sub in ["features", "targets"] {
        let d = cfg.out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| PipelineError::io(&d, e))?;
    }

    let world;
    let loaded_mesh;
    let (storms, mesh, toy_land, targets, source) = match &cfg.source {
        BuildSource::Toy { seed, tracks, count, basins, oracle } => {
            world = toy_world(*seed);
            let storms = match tracks {
                Some(t) => t.clone(),
                None => synth_tracks(&world, *seed, *count, basins),
            };
            let land = world.land_raster(1.0, LAND_RASTER_CELL_DEG);
            (storms, &world.mesh, Some(land), Targets::Oracle(*oracle), DataSource::Toy { seed: *seed })
        }
        BuildSource::Mesh { tracks, mesh_path, maxele_dir } => {
            loaded_mesh = Mesh::read_fort14(mesh_path)?;
            let source = DataSource::Mesh {
                mesh: mesh_path.display().to_string(),
                maxele_dir: maxele_dir.display().to_string(),
            };
            (tracks.clone(), &loaded_mesh, None, Targets::Files(maxele_dir), source)
        }
    };
    let index = TriangleIndex::build(mesh);
    let land = toy_land.unwrap_or_else(|| mesh_land_raster(mesh, &index, LAND_RASTER_CELL_DEG));

    let outcomes: Vec<StormOutcome> = storms
        .par_iter()
        .map(|s| match build_one(s, mesh, &index, &land, &targets, cfg) {
            Ok(entry) => StormOutcome { entry: Some(entry), skip: None },
            Err(reason) => StormOutcome {
                entry: None,
                skip: Some(Skip { storm_id: s.id.clone(), reason }),
            },
        })
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        entries.extend(o.entry);
        skipped.extend(o.skip);
    }
    write_skip_report(&cfg.out_dir.join(SKIP_REPORT_FILE), &skipped)?;
    if entries.is_empty() {
        return Err(PipelineError::Data(format!(
            "no storm could be built ({} skipped, see {SKIP_REPORT_FILE})",
            skipped.len()
        )));
    }

    let mut manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        source,
        extent: cfg.extent,
        resolution: cfg.resolution,
        window: cfg.features.window,
        channels: 3 * cfg.features.window.n_times() + 2,
        norm: cfg.norm,
        split_seed: cfg.split_seed,
        fractions: cfg.fractions,
        storms: entries,
    };
    let tags = manifest.recompute_split()?;
    for (entry, tag) in manifest.storms.iter_mut().zip(tags) {
        entry.split = tag;
    }
    let manifest_path = cfg.out_dir.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    Ok(BuildOutput { manifest, manifest_path, skipped })
}

fn write_skip_report(path: &Path, skipped: &[Skip]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["storm_id", "reason"])?;
    for s in skipped {
        w.write_record([&s.storm_id, &s.reason])?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))?;
    Ok(())
}

pub fn read_skip_report(path: &Path) -> Result<Vec<Skip>, PipelineError> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(Skip {
                storm_id: rec.get(0).unwrap_or_default().to_string(),
                reason: rec.get(1).unwrap_or_default().to_string(),
            })
        })
        .collect()
}

pub fn read_tracks(path: &Path) -> Result<Vec<Storm>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(parse_track_file(&text)?)
}
