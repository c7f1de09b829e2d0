use serde::{Deserialize, Serialize};

use crate::error::GridError;
use crate::tracks::{normalize_lon, LandfallEvent};

pub const DEFAULT_EXTENT_DEG: f64 = 2.5;
pub const DEFAULT_RESOLUTION: usize = 128;
pub const MIN_RESOLUTION: usize = 8;

/// Square lat-lon window of `resolution` x `resolution` cells centered on a point.
///
/// Cell centers sit at `center + extent * ((i + 0.5) / resolution - 0.5)`; row
/// `i` grows northward and column `j` eastward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center_lat: f64,
    pub center_lon: f64,
    pub extent: f64,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(center_lat: f64, center_lon: f64, extent: f64, resolution: usize) -> Result<Self, GridError> {
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(GridError::Config(format!("extent must be positive, got {extent}")));
        }
        if resolution < MIN_RESOLUTION || !resolution.is_power_of_two() {
            return Err(GridError::Config(format!(
                "resolution must be a power of two >= {MIN_RESOLUTION}, got {resolution}"
            )));
        }
        if !(center_lat.is_finite() && center_lon.is_finite()) {
            return Err(GridError::Config("non-finite grid center".into()));
        }
        Ok(Self {
            center_lat,
            center_lon: normalize_lon(center_lon),
            extent,
            resolution,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.extent / self.resolution as f64
    }

    /// Offset of cell center `i` from the window center, degrees.
    pub fn center_offset(&self, i: usize) -> f64 {
        self.extent * ((i as f64 + 0.5) / self.resolution as f64 - 0.5)
    }

    pub fn cell_lat(&self, row: usize) -> f64 {
        self.center_lat + self.center_offset(row)
    }

    pub fn cell_lon(&self, col: usize) -> f64 {
        normalize_lon(self.center_lon + self.center_offset(col))
    }

    pub fn south(&self) -> f64 {
        self.center_lat - 0.5 * self.extent
    }

    pub fn west(&self) -> f64 {
        self.center_lon - 0.5 * self.extent
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.resolution, self.resolution)
    }
}

/// Window centered exactly on the landfall point.
pub fn build_grid(landfall: &LandfallEvent, extent: f64, resolution: usize) -> Result<GridSpec, GridError> {
    GridSpec::new(landfall.lat, landfall.lon, extent, resolution)
}
