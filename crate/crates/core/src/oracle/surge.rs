//! Deterministic surge labels from a physical-unit feature tensor.
//!
//! For a water cell `x` within `reach` of land, with `n` the unit vector toward
//! the nearest land cell:
//!
//! ```text
//! zeta(x) = kappa * max_t( |W|^2 * max(0, W . n) ) / (depth(x) + d0)
//! ```
//!
//! and zero elsewhere.

use crate::field::{Field2, SurgeField};
use crate::gridding::{FeatureTensor, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurgeOracleParams {
    /// s^2/m.
    pub kappa: f64,
    /// Depth offset, m.
    pub depth_offset: f64,
    /// Coastal reach, degrees.
    pub reach_deg: f64,
}

impl Default for SurgeOracleParams {
    fn default() -> Self {
        Self {
            kappa: 2.5e-4,
            depth_offset: 5.0,
            reach_deg: 0.5,
        }
    }
}

/// Offsets `(d_row, d_col)` within `radius` cells, nearest first; ties broken
/// by row offset then column offset.
fn search_offsets(radius: f64) -> Vec<(isize, isize)> {
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    let mut offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dr| (-r..=r).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| ((dr * dr + dc * dc) as f64) <= r2)
        .collect();
    offsets.sort_by_key(|&(dr, dc)| (dr * dr + dc * dc, dr, dc));
    offsets
}

/// Unit vector (east, north) from each cell toward its nearest land cell
/// within `radius` cells; `None` for land cells and cells out of reach.
pub fn shoreward_normals(land: &Field2<bool>, radius: f64) -> Field2<Option<(f64, f64)>> {
    let offsets = search_offsets(radius);
    let (h, w) = (land.height as isize, land.width as isize);
    let mut out = Field2::filled(land.height, land.width, None);
    for row in 0..h {
        for col in 0..w {
            if *land.get(row as usize, col as usize) {
                continue;
            }
            let hit = offsets.iter().find(|&&(dr, dc)| {
                let (r, c) = (row + dr, col + dc);
                r >= 0 && c >= 0 && r < h && c < w && *land.get(r as usize, c as usize)
            });
            if let Some(&(dr, dc)) = hit {
                let norm = ((dr * dr + dc * dc) as f64).sqrt();
                out.set(row as usize, col as usize, Some((dc as f64 / norm, dr as f64 / norm)));
            }
        }
    }
    out
}

/// Surge label for one storm. `features` must be in physical units.
pub fn synth_surge(features: &FeatureTensor, grid: &GridSpec, params: &SurgeOracleParams) -> SurgeField {
    assert_eq!(
        (features.height, features.width),
        grid.shape(),
        "feature tensor does not match grid"
    );
    let land = features.land_mask();
    let radius = params.reach_deg / grid.cell_size();
    let normals = shoreward_normals(&land, radius);
    let depth = features.channel(features.bathymetry_channel());
    let n = features.n_times;

    let data = (0..features.plane_len())
        .map(|i| {
            let Some((nx, ny)) = normals.data[i] else {
                return 0.0;
            };
            let mut forcing = 0.0f64;
            for k in 0..n {
                let u = features.channel(features.u_channel(k))[i] as f64;
                let v = features.channel(features.v_channel(k))[i] as f64;
                let onshore = (u * nx + v * ny).max(0.0);
                forcing = forcing.max((u * u + v * v) * onshore);
            }
            let d = (depth[i] as f64).max(0.0);
            (params.kappa * forcing / (d + params.depth_offset)) as f32
        })
        .collect();
    Field2::from_vec(features.height, features.width, data)
}
