//! Training, evaluation and local-versus-global comparison over a dataset manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use surge_core::evaluation::{EvalReport, LocalGlobalReport, StormScore};
use surge_core::gridding::{dilate_mask, normalize_features, FeatureTensor, NormStats, COASTAL_DILATION_PIXELS};
use surge_core::tracks::Basin;
use surge_core::{Mask, SurgeField};
use surge_nn::trainer::history_csv;
use surge_nn::{
    train_with, Architecture, HistoryRow, ModelCheckpoint, ModelParameters, Sample, Tensor4, TrainConfig,
    TrainOutcome,
};

use crate::dataset::{read_features, read_field, DatasetManifest, ManifestEntry, SplitTag};
use crate::error::PipelineError;

pub const HISTORY_FILE: &str = "history.csv";
const PREDICT_BATCH: usize = 8;

/// A storm's normalized input, target and land mask, ready for the model.
#[derive(Debug, Clone)]
pub struct LoadedStorm {
    pub entry: ManifestEntry,
    pub input: Tensor4<f32>,
    pub target: Tensor4<f32>,
    pub land: Mask,
}

impl LoadedStorm {
    pub fn target_field(&self) -> SurgeField {
        SurgeField::from_vec(self.target.h(), self.target.w(), self.target.data.clone())
    }

    pub fn coastal_mask(&self) -> Mask {
        dilate_mask(&self.land, COASTAL_DILATION_PIXELS)
    }
}

fn manifest_root(manifest_path: &Path) -> &Path {
    manifest_path.parent().unwrap_or(Path::new("."))
}

pub fn feature_input(features: &FeatureTensor, norm: &NormStats) -> Tensor4<f32> {
    let n = normalize_features(features, norm);
    Tensor4::from_vec([1, n.channels(), n.height, n.width], n.data).expect("feature tensor shape")
}

pub fn load_storm(manifest: &DatasetManifest, root: &Path, entry: &ManifestEntry) -> Result<LoadedStorm, PipelineError> {
    let (c, r) = (manifest.channels, manifest.resolution);
    let features = read_features(&root.join(&entry.features), Some((c, r, r)))?;
    let target = read_field(&root.join(&entry.target))?;
    if (target.height, target.width) != (r, r) {
        return Err(PipelineError::Data(format!(
            "{}: target is {}x{}, manifest resolution is {r}",
            entry.target, target.height, target.width
        )));
    }
    Ok(LoadedStorm {
        entry: entry.clone(),
        input: feature_input(&features, &manifest.norm),
        target: Tensor4::from_vec([1, 1, r, r], target.data).expect("target shape"),
        land: features.land_mask(),
    })
}

pub fn load_split(
    manifest: &DatasetManifest,
    root: &Path,
    split: SplitTag,
    basin: Option<Basin>,
) -> Result<Vec<LoadedStorm>, PipelineError> {
    manifest
        .entries(split, basin)
        .map(|e| load_storm(manifest, root, e))
        .collect()
}

pub fn as_samples(storms: &[LoadedStorm]) -> Vec<Sample<'_>> {
    storms
        .iter()
        .map(|s| Sample { input: &s.input, target: &s.target })
        .collect()
}

fn parse_basin(code: Option<&str>) -> Result<Option<Basin>, PipelineError> {
    code.map(|c| c.parse::<Basin>().map_err(|_| PipelineError::Usage(format!("unknown basin {c:?}"))))
        .transpose()
}

/// Trains on the manifest's train split (optionally one basin), selects the
/// best epoch on the val split, and writes the checkpoint plus history to `out_dir`.
pub fn train_on_manifest(
    manifest_path: &Path,
    architecture: Architecture,
    cfg: &TrainConfig,
    out_dir: &Path,
    observe: impl FnMut(&HistoryRow),
) -> Result<(ModelCheckpoint, TrainOutcome), PipelineError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_root(manifest_path);
    let basin = parse_basin(cfg.basin.as_deref())?;
    let train = load_split(&manifest, root, SplitTag::Train, basin)?;
    if train.is_empty() {
        return Err(PipelineError::Data(match basin {
            Some(b) => format!("no training storms in basin {b}"),
            None => "no training storms in manifest".into(),
        }));
    }
    let val = load_split(&manifest, root, SplitTag::Val, basin)?;
    let init = ModelParameters::init(architecture, cfg.seed)?;
    let outcome = train_with(cfg, init, &as_samples(&train), &as_samples(&val), observe)?;
    let ckpt = ModelCheckpoint {
        params: outcome.best.clone(),
        seed: cfg.seed,
        train_config: Some(cfg.clone()),
        best_epoch: Some(outcome.best_epoch),
        norm: Some(manifest.norm),
    };
    ckpt.save(out_dir)?;
    let history_path = out_dir.join(HISTORY_FILE);
    fs::write(&history_path, history_csv(&outcome.history)).map_err(|e| PipelineError::io(&history_path, e))?;
    Ok((ckpt, outcome))
}

/// Predicted fields for `storms`, batched.
pub fn predict_storms(params: &ModelParameters<f32>, storms: &[LoadedStorm]) -> Result<Vec<SurgeField>, PipelineError> {
    let mut out = Vec::with_capacity(storms.len());
    for chunk in storms.chunks(PREDICT_BATCH) {
        let inputs: Vec<&Tensor4<f32>> = chunk.iter().map(|s| &s.input).collect();
        let pred = params.predict(&Tensor4::stack(&inputs)?)?;
        for i in 0..chunk.len() {
            let item = pred.item(i);
            out.push(SurgeField::from_vec(item.h(), item.w(), item.data));
        }
    }
    Ok(out)
}

pub fn score_predictions(
    model: &str,
    storms: &[LoadedStorm],
    predictions: &[SurgeField],
) -> Result<EvalReport, PipelineError> {
    let scores = storms
        .iter()
        .zip(predictions)
        .map(|(s, p)| StormScore::compute(&s.entry.id, s.entry.basin, p, &s.target_field(), &s.coastal_mask()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_scores(model, scores)?)
}

pub fn evaluate_storms(model: &str, params: &ModelParameters<f32>, storms: &[LoadedStorm]) -> Result<EvalReport, PipelineError> {
    score_predictions(model, storms, &predict_storms(params, storms)?)
}

/// Scores of the constant-zero prediction.
pub fn zero_baseline(storms: &[LoadedStorm]) -> Result<EvalReport, PipelineError> {
    let zeros: Vec<SurgeField> = storms
        .iter()
        .map(|s| SurgeField::filled(s.target.h(), s.target.w(), 0.0))
        .collect();
    score_predictions("zero", storms, &zeros)
}

fn model_name(ckpt: &ModelCheckpoint) -> String {
    let arch = ckpt.architecture();
    match ckpt.train_config.as_ref().and_then(|c| c.basin.clone()) {
        Some(b) => format!("{}-{b}", arch.name()),
        None => arch.name().to_string(),
    }
}

pub fn evaluate_checkpoint(
    manifest_path: &Path,
    ckpt_dir: &Path,
    split: SplitTag,
    basin: Option<Basin>,
) -> Result<EvalReport, PipelineError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let ckpt = ModelCheckpoint::load(ckpt_dir)?;
    let storms = load_split(&manifest, manifest_root(manifest_path), split, basin)?;
    if storms.is_empty() {
        return Err(PipelineError::Data(format!("no {split} storms to evaluate")));
    }
    evaluate_storms(&model_name(&ckpt), &ckpt.params, &storms)
}

/// Per-basin comparison of basin-specific checkpoints (`<local_dir>/<BASIN>/`)
/// against one global checkpoint on the test split.
pub fn compare_local_global(
    manifest_path: &Path,
    global_dir: &Path,
    local_dir: &Path,
) -> Result<LocalGlobalReport, PipelineError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_root(manifest_path);
    let storms = load_split(&manifest, root, SplitTag::Test, None)?;
    if storms.is_empty() {
        return Err(PipelineError::Data("no test storms to compare on".into()));
    }
    let global = ModelCheckpoint::load(global_dir)?;
    let global_report = evaluate_storms("global", &global.params, &storms)?;
    let mut local = BTreeMap::new();
    for basin in Basin::ALL {
        let dir = local_dir.join(basin.code());
        if !dir.join(surge_nn::checkpoint::MANIFEST_FILE).exists() {
            continue;
        }
        let in_basin: Vec<LoadedStorm> = storms.iter().filter(|s| s.entry.basin == basin).cloned().collect();
        if in_basin.is_empty() {
            continue;
        }
        let ckpt = ModelCheckpoint::load(&dir)?;
        local.insert(basin, evaluate_storms("local", &ckpt.params, &in_basin)?);
    }
    Ok(LocalGlobalReport::from_reports(&local, &global_report))
}

/// Prediction for one raw (unnormalized) feature tensor.
pub fn predict_field(ckpt: &ModelCheckpoint, features: &FeatureTensor) -> Result<SurgeField, PipelineError> {
    let input = feature_input(features, &ckpt.norm.unwrap_or_default());
    let pred = ckpt.params.predict(&input)?;
    Ok(SurgeField::from_vec(pred.h(), pred.w(), pred.data))
}
