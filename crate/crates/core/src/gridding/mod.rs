//! Landfall-centered windows: grid geometry, mesh-to-grid interpolation,
//! land/coastal masks and feature-tensor assembly.

mod dilation;
mod features;
mod grid;
mod index;
mod interp;
mod mesh;

pub use dilation::dilate_mask;
pub use features::{
    assemble_features, assemble_with_layers, denormalize_features, forcing_times, normalize_features,
    static_layers, FeatureConfig, FeatureTensor, NormStats, StaticLayers, TimeWindow,
};
pub use grid::{build_grid, GridSpec, DEFAULT_EXTENT_DEG, DEFAULT_RESOLUTION, MIN_RESOLUTION};
pub use index::{barycentric, TriangleIndex};
pub use interp::{grid_target, interpolate_to_grid, land_mask, GriddedField};
pub use mesh::{parse_nodal_field, signed_area, Mesh, MeshNode, MIN_TRIANGLE_AREA};

/// Coastal band width used for near-land RMSE, pixels.
pub const COASTAL_DILATION_PIXELS: usize = 3;
