//! RMSE metrics, per-basin reports and tide-gauge point validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::field::{Mask, SurgeField};
use crate::gridding::GridSpec;
use crate::tracks::{lon_delta, Basin};

/// Running sum of squared errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SqErr {
    pub sum: f64,
    pub count: usize,
}

impl SqErr {
    pub fn add(&mut self, other: SqErr) {
        self.sum += other.sum;
        self.count += other.count;
    }

    pub fn mse(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    pub fn rmse(&self) -> Option<f64> {
        self.mse().map(f64::sqrt)
    }
}

pub fn squared_error(pred: &SurgeField, target: &SurgeField, mask: Option<&Mask>) -> Result<SqErr, MetricError> {
    if !pred.same_shape(target) {
        return Err(MetricError::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            pred.height, pred.width, target.height, target.width
        )));
    }
    if let Some(m) = mask {
        if !m.same_shape(pred) {
            return Err(MetricError::Shape("mask does not match fields".into()));
        }
    }
    let mut acc = SqErr::default();
    for (i, (&p, &t)) in pred.data.iter().zip(&target.data).enumerate() {
        if mask.is_none_or(|m| m.data[i]) {
            let e = p as f64 - t as f64;
            acc.sum += e * e;
            acc.count += 1;
        }
    }
    Ok(acc)
}

/// Root mean squared error over the masked cells (all cells without a mask).
pub fn rmse(pred: &SurgeField, target: &SurgeField, mask: Option<&Mask>) -> Result<f64, MetricError> {
    squared_error(pred, target, mask)?
        .rmse()
        .ok_or_else(|| MetricError::Undefined("empty mask".into()))
}

/// Squared errors of one test storm over the coastal band and the full window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormScore {
    pub storm_id: String,
    pub basin: Basin,
    pub coastal: SqErr,
    pub all: SqErr,
}

impl StormScore {
    pub fn compute(
        storm_id: impl Into<String>,
        basin: Basin,
        pred: &SurgeField,
        target: &SurgeField,
        coastal_mask: &Mask,
    ) -> Result<Self, MetricError> {
        Ok(Self {
            storm_id: storm_id.into(),
            basin,
            coastal: squared_error(pred, target, Some(coastal_mask))?,
            all: squared_error(pred, target, None)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `None` for the overall row.
    pub basin: Option<Basin>,
    pub rmse_near_coast: Option<f64>,
    pub rmse_all: Option<f64>,
    pub n_storms: usize,
}

fn pooled_row(basin: Option<Basin>, scores: &[&StormScore]) -> ReportRow {
    let mut coastal = SqErr::default();
    let mut all = SqErr::default();
    for s in scores {
        coastal.add(s.coastal);
        all.add(s.all);
    }
    ReportRow {
        basin,
        rmse_near_coast: coastal.rmse(),
        rmse_all: all.rmse(),
        n_storms: scores.len(),
    }
}

/// Per-basin and overall RMSE, pooling squared errors across storms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Basins with at least one storm, in `Basin::ALL` order.
    pub rows: Vec<ReportRow>,
    pub overall: ReportRow,
    pub storms: Vec<StormScore>,
}

impl EvalReport {
    pub fn from_scores(model: impl Into<String>, storms: Vec<StormScore>) -> Result<Self, MetricError> {
        if storms.is_empty() {
            return Err(MetricError::Undefined("no storms to evaluate".into()));
        }
        let rows = Basin::ALL
            .into_iter()
            .filter_map(|b| {
                let in_basin: Vec<&StormScore> = storms.iter().filter(|s| s.basin == b).collect();
                (!in_basin.is_empty()).then(|| pooled_row(Some(b), &in_basin))
            })
            .collect();
        let overall = pooled_row(None, &storms.iter().collect::<Vec<_>>());
        Ok(Self {
            model: model.into(),
            rows,
            overall,
            storms,
        })
    }

    pub fn row(&self, basin: Basin) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.basin == Some(basin))
    }

    /// CSV in the column order `model,basin,n_storms,rmse_near_land_m,rmse_all_points_m`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,basin,n_storms,rmse_near_land_m,rmse_all_points_m\n");
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            let basin = row.basin.map(|b| b.code()).unwrap_or("ALL");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.model,
                basin,
                row.n_storms,
                fmt_opt(row.rmse_near_coast),
                fmt_opt(row.rmse_all)
            );
        }
        out
    }

    /// Per-storm squared-error records, enough to recompute any aggregation.
    pub fn storms_csv(&self) -> String {
        let mut out = String::from("storm_id,basin,coastal_sq_sum,coastal_cells,all_sq_sum,all_cells\n");
        for s in &self.storms {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.storm_id, s.basin, s.coastal.sum, s.coastal.count, s.all.sum, s.all.count
            );
        }
        out
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub local_near_coast: Option<f64>,
    pub local_all: Option<f64>,
    pub global_near_coast: Option<f64>,
    pub global_all: Option<f64>,
}

/// Basin x {local coast, local all, global coast, global all}. Basins without
/// test storms (or without a local model) carry `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalGlobalReport {
    pub rows: Vec<(Basin, usize, Option<PairedRow>)>,
}

impl LocalGlobalReport {
    pub fn from_reports(local: &BTreeMap<Basin, EvalReport>, global: &EvalReport) -> Self {
        let rows = Basin::ALL
            .into_iter()
            .map(|b| {
                let Some(g) = global.row(b) else {
                    return (b, 0, None);
                };
                let l = local.get(&b).and_then(|r| r.row(b));
                let paired = PairedRow {
                    local_near_coast: l.and_then(|r| r.rmse_near_coast),
                    local_all: l.and_then(|r| r.rmse_all),
                    global_near_coast: g.rmse_near_coast,
                    global_all: g.rmse_all,
                };
                (b, g.n_storms, Some(paired))
            })
            .collect();
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "basin,n_storms,local_near_coast_m,local_all_points_m,global_near_coast_m,global_all_points_m\n",
        );
        for (b, n, row) in &self.rows {
            let cells = match row {
                Some(r) => [r.local_near_coast, r.local_all, r.global_near_coast, r.global_all].map(fmt_opt),
                None => Default::default(),
            };
            let _ = writeln!(out, "{b},{n},{}", cells.join(","));
        }
        out
    }
}

/// A tide gauge observation for one storm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub gauge_id: String,
    pub lat: f64,
    pub lon: f64,
    pub storm_id: String,
    pub observed_max_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeRecord {
    pub gauge_id: String,
    pub lat: f64,
    pub lon: f64,
    pub storm_id: String,
    pub observed_max: f64,
    pub predicted_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeSampling {
    #[default]
    Bilinear,
    Nearest,
}

/// Parses `gauge_id,lat,lon,storm_id,observed_max_m`.
pub fn parse_gauge_csv(text: &str) -> Result<Vec<Gauge>, csv::Error> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

/// Value of `field` at a point; `None` outside the window.
pub fn sample_field(field: &SurgeField, grid: &GridSpec, lat: f64, lon: f64, mode: GaugeSampling) -> Option<f64> {
    let half = 0.5 * grid.extent;
    let dlat = lat - grid.center_lat;
    let dlon = lon_delta(grid.center_lon, lon);
    if !(dlat.abs() <= half && dlon.abs() <= half) {
        return None;
    }
    let n = grid.resolution;
    let last = (n - 1) as f64;
    let fr = ((dlat + half) / grid.cell_size() - 0.5).clamp(0.0, last);
    let fc = ((dlon + half) / grid.cell_size() - 0.5).clamp(0.0, last);
    let at = |r: usize, c: usize| *field.get(r, c) as f64;
    match mode {
        GaugeSampling::Nearest => Some(at(fr.round() as usize, fc.round() as usize)),
        GaugeSampling::Bilinear => {
            let (r0, c0) = (fr.floor() as usize, fc.floor() as usize);
            let (r1, c1) = ((r0 + 1).min(n - 1), (c0 + 1).min(n - 1));
            let (tr, tc) = (fr - r0 as f64, fc - c0 as f64);
            let south = (1.0 - tc) * at(r0, c0) + tc * at(r0, c1);
            let north = (1.0 - tc) * at(r1, c0) + tc * at(r1, c1);
            Some((1.0 - tr) * south + tr * north)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaugeSamples {
    pub records: Vec<GaugeRecord>,
    /// Gauge ids outside the window.
    pub excluded: Vec<String>,
}

pub fn sample_at_gauges(field: &SurgeField, grid: &GridSpec, gauges: &[Gauge], mode: GaugeSampling) -> GaugeSamples {
    let mut out = GaugeSamples::default();
    for g in gauges {
        match sample_field(field, grid, g.lat, g.lon, mode) {
            Some(predicted_max) => out.records.push(GaugeRecord {
                gauge_id: g.gauge_id.clone(),
                lat: g.lat,
                lon: g.lon,
                storm_id: g.storm_id.clone(),
                observed_max: g.observed_max_m,
                predicted_max,
            }),
            None => out.excluded.push(g.gauge_id.clone()),
        }
    }
    out
}

/// `(pooled, per_storm_equal)`: RMSE over all records, and the square root of
/// the mean over storms of each storm's mean squared error.
pub fn storm_weighted_rmse(records: &[GaugeRecord]) -> Result<(f64, f64), MetricError> {
    if records.is_empty() {
        return Err(MetricError::Undefined("no gauge records".into()));
    }
    let mut pooled = SqErr::default();
    let mut per_storm: BTreeMap<&str, SqErr> = BTreeMap::new();
    for r in records {
        let e = r.predicted_max - r.observed_max;
        let one = SqErr { sum: e * e, count: 1 };
        pooled.add(one);
        per_storm.entry(r.storm_id.as_str()).or_default().add(one);
    }
    let mean_of_mse =
        per_storm.values().map(|s| s.mse().expect("non-empty storm")).sum::<f64>() / per_storm.len() as f64;
    Ok((pooled.rmse().expect("non-empty"), mean_of_mse.sqrt()))
}

/// Scatter rows `observed,predicted,model,storm_id`.
pub fn scatter_csv(records: &[GaugeRecord], model: &str) -> String {
    let mut out = String::from("observed,predicted,model,storm_id\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.observed_max, r.predicted_max, model, r.storm_id);
    }
    out
}
