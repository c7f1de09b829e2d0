//! Synthetic worlds, storms and surge labels that stand in for a high-fidelity
//! circulation model when training and evaluating at desk scale.

mod surge;
mod toy_tracks;
mod world;

pub use surge::{shoreward_normals, synth_surge, SurgeOracleParams};
pub use toy_tracks::{basin_band, synth_tracks};
pub use world::{synth_world, synth_world_with, DomainBounds, ShelfProfile, ToyWorld, WorldConfig};
