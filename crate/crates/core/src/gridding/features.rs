//! Multi-channel model inputs on a landfall-centered grid.
//!
//! Channel layout for `n` forcing times: `[0, n)` pressure (hPa), `[n, 2n)`
//! eastward wind, `[2n, 3n)` northward wind (m/s), then bathymetry (m, 0 on
//! land) and the land mask (1 land, 0 water).

use serde::{Deserialize, Serialize};

use crate::error::GridError;
use crate::field::{Field2, Mask};
use crate::tracks::{interpolate_track, LandfallEvent, Storm};
use crate::windfields::{field_snapshot, WindConfig};

use super::grid::GridSpec;
use super::index::TriangleIndex;
use super::interp::{interpolate_to_grid, land_mask};
use super::mesh::Mesh;

/// Forcing sample times relative to landfall, hours: `start, start + step, ..., end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self {
            start: -24.0,
            end: 12.0,
            step: 3.0,
        }
    }
}

impl TimeWindow {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self, GridError> {
        if !(step > 0.0 && end >= start && start.is_finite() && end.is_finite()) {
            return Err(GridError::Config(format!("invalid time window {start}:{end}:{step}")));
        }
        Ok(Self { start, end, step })
    }

    /// Parses `start:end:step`, e.g. `-24:12:3`.
    pub fn parse(s: &str) -> Result<Self, GridError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || GridError::Config(format!("time window must be start:end:step, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        Self::new(nums[0], nums[1], nums[2])
    }

    pub fn n_times(&self) -> usize {
        ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.n_times()).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureConfig {
    pub window: TimeWindow,
    pub wind: WindConfig,
    /// Clamp forcing times to the track span instead of failing on short storms.
    pub pad_to_track: bool,
}

/// C x H x W input tensor, C = 3 * n_times + 2.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub n_times: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureTensor {
    pub fn zeros(n_times: usize, height: usize, width: usize) -> Self {
        Self {
            n_times,
            height,
            width,
            data: vec![0.0; (3 * n_times + 2) * height * width],
        }
    }

    /// Wraps raw C x H x W data; C must be of the form 3n + 2.
    pub fn from_raw(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self, GridError> {
        if channels < 5 || (channels - 2) % 3 != 0 {
            return Err(GridError::Shape(format!("{channels} channels is not 3n + 2")));
        }
        if data.len() != channels * height * width {
            return Err(GridError::Shape(format!(
                "{} values for {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            n_times: (channels - 2) / 3,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        3 * self.n_times + 2
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn pressure_channel(&self, k: usize) -> usize {
        k
    }

    pub fn u_channel(&self, k: usize) -> usize {
        self.n_times + k
    }

    pub fn v_channel(&self, k: usize) -> usize {
        2 * self.n_times + k
    }

    pub fn bathymetry_channel(&self) -> usize {
        3 * self.n_times
    }

    pub fn land_channel(&self) -> usize {
        3 * self.n_times + 1
    }

    pub fn land_mask(&self) -> Mask {
        Field2::from_vec(
            self.height,
            self.width,
            self.channel(self.land_channel()).iter().map(|&v| v >= 0.5).collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Static layers of a grid window: interpolated depth and the land mask.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLayers {
    /// Depth on water cells, 0 on land.
    pub bathymetry: Field2<f64>,
    pub land: Mask,
}

pub fn static_layers(mesh: &Mesh, index: &TriangleIndex, grid: &GridSpec) -> Result<StaticLayers, GridError> {
    let depth = interpolate_to_grid(mesh, index, &mesh.depths(), grid)?;
    let land = land_mask(&depth);
    let bathymetry = Field2::from_vec(
        grid.resolution,
        grid.resolution,
        depth
            .values
            .data
            .iter()
            .zip(&land.data)
            .map(|(&d, &is_land)| if is_land { 0.0 } else { d })
            .collect(),
    );
    Ok(StaticLayers { bathymetry, land })
}

/// Absolute forcing times for a storm, validated (or clamped) against its track.
pub fn forcing_times(storm: &Storm, landfall: &LandfallEvent, cfg: &FeatureConfig) -> Result<Vec<f64>, GridError> {
    let (first, last) = (storm.t_first(), storm.t_last());
    let times: Vec<f64> = cfg.window.offsets().iter().map(|dt| landfall.t_landfall + dt).collect();
    let (start, end) = (times[0], times[times.len() - 1]);
    if start >= first && end <= last {
        return Ok(times);
    }
    if !cfg.pad_to_track {
        return Err(GridError::WindowCoverage {
            storm_id: storm.id.clone(),
            start,
            end,
            first,
            last,
        });
    }
    Ok(times.into_iter().map(|t| t.clamp(first, last)).collect())
}

pub fn assemble_features(
    storm: &Storm,
    landfall: &LandfallEvent,
    mesh: &Mesh,
    index: &TriangleIndex,
    grid: &GridSpec,
    cfg: &FeatureConfig,
) -> Result<FeatureTensor, GridError> {
    let layers = static_layers(mesh, index, grid)?;
    assemble_with_layers(storm, landfall, &layers, grid, cfg)
}

pub fn assemble_with_layers(
    storm: &Storm,
    landfall: &LandfallEvent,
    layers: &StaticLayers,
    grid: &GridSpec,
    cfg: &FeatureConfig,
) -> Result<FeatureTensor, GridError> {
    let times = forcing_times(storm, landfall, cfg)?;
    let n = grid.resolution;
    let mut tensor = FeatureTensor::zeros(times.len(), n, n);
    for (k, &t) in times.iter().enumerate() {
        let tp = interpolate_track(storm, t).expect("forcing time inside track");
        let snap = field_snapshot(&tp, grid, &cfg.wind)?;
        for (dst, src) in [
            (tensor.pressure_channel(k), &snap.pressure),
            (tensor.u_channel(k), &snap.u),
            (tensor.v_channel(k), &snap.v),
        ] {
            for (o, &v) in tensor.channel_mut(dst).iter_mut().zip(&src.data) {
                *o = v as f32;
            }
        }
    }
    let bathy = tensor.bathymetry_channel();
    for (o, &d) in tensor.channel_mut(bathy).iter_mut().zip(&layers.bathymetry.data) {
        *o = d as f32;
    }
    let land = tensor.land_channel();
    for (o, &l) in tensor.channel_mut(land).iter_mut().zip(&layers.land.data) {
        *o = if l { 1.0 } else { 0.0 };
    }
    Ok(tensor)
}

/// Fixed affine/log scalings that bring every channel to O(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub pressure_ref: f64,
    pub pressure_scale: f64,
    pub wind_scale: f64,
    pub depth_log_ref: f64,
}

impl Default for NormStats {
    fn default() -> Self {
        Self {
            pressure_ref: 1013.25,
            pressure_scale: 50.0,
            wind_scale: 50.0,
            depth_log_ref: 10000.0,
        }
    }
}

impl NormStats {
    pub fn is_valid(&self) -> bool {
        [self.pressure_ref, self.pressure_scale, self.wind_scale, self.depth_log_ref]
            .iter()
            .all(|v| v.is_finite())
            && self.pressure_scale > 0.0
            && self.wind_scale > 0.0
            && self.depth_log_ref > 0.0
    }

    pub fn depth_forward(&self, d: f64) -> f64 {
        d.signum() * d.abs().ln_1p() / self.depth_log_ref.ln_1p()
    }

    pub fn depth_inverse(&self, x: f64) -> f64 {
        x.signum() * (x.abs() * self.depth_log_ref.ln_1p()).exp_m1()
    }
}

fn map_channels(t: &FeatureTensor, stats: &NormStats, forward: bool) -> FeatureTensor {
    assert!(stats.is_valid(), "normalization scales must be finite and positive");
    let mut out = t.clone();
    let n = t.n_times;
    for c in 0..t.channels() {
        let f: Box<dyn Fn(f64) -> f64> = if c < n {
            if forward {
                Box::new(|p| (p - stats.pressure_ref) / stats.pressure_scale)
            } else {
                Box::new(|x| x * stats.pressure_scale + stats.pressure_ref)
            }
        } else if c < 3 * n {
            if forward {
                Box::new(|w| w / stats.wind_scale)
            } else {
                Box::new(|x| x * stats.wind_scale)
            }
        } else if c == 3 * n {
            if forward {
                Box::new(|d| stats.depth_forward(d))
            } else {
                Box::new(|x| stats.depth_inverse(x))
            }
        } else {
            continue;
        };
        for v in out.channel_mut(c) {
            *v = f(*v as f64) as f32;
        }
    }
    out
}

pub fn normalize_features(t: &FeatureTensor, stats: &NormStats) -> FeatureTensor {
    map_channels(t, stats, true)
}

pub fn denormalize_features(t: &FeatureTensor, stats: &NormStats) -> FeatureTensor {
    map_channels(t, stats, false)
}
