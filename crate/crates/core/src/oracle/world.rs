//! Procedural coastal worlds: a meandering north-south shoreline with ocean to
//! the west, a sloping continental shelf, and a thin meshed strip of land.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gridding::{Mesh, MeshNode};
use crate::tracks::LandRaster;
use crate::windfields::EARTH_RADIUS_KM;

const KM_PER_DEG: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBounds {
    pub south: f64,
    pub north: f64,
    pub west: f64,
    pub east: f64,
}

impl Default for DomainBounds {
    fn default() -> Self {
        Self {
            south: -30.0,
            north: 30.0,
            west: 100.0,
            east: 110.0,
        }
    }
}

impl DomainBounds {
    pub fn mid_lon(&self) -> f64 {
        0.5 * (self.west + self.east)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    /// Mesh node spacing, degrees.
    pub node_spacing: f64,
    /// Width of the meshed land strip behind the shoreline, degrees.
    pub land_strip: f64,
    /// Shoreline vertex spacing in latitude, degrees.
    pub vertex_spacing: f64,
    /// Largest shoreline excursion from the domain's mid longitude, degrees.
    pub meander: f64,
    /// Largest change in shoreline longitude between neighboring vertices, degrees.
    pub max_step: f64,
    pub shelf_slope_range: (f64, f64),
    pub shelf_width_range: (f64, f64),
    /// Slope beyond the shelf break, m per km.
    pub slope_beyond_shelf: f64,
    pub max_depth: f64,
    /// Land elevation gain, m per km inland.
    pub land_rise: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            node_spacing: 0.1,
            land_strip: 0.5,
            vertex_spacing: 0.5,
            meander: 1.0,
            max_step: 0.35,
            shelf_slope_range: (0.3, 2.0),
            shelf_width_range: (40.0, 200.0),
            slope_beyond_shelf: 15.0,
            max_depth: 5000.0,
            land_rise: 2.0,
        }
    }
}

/// Depth profile as a function of offshore distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShelfProfile {
    /// m per km.
    pub slope: f64,
    /// km.
    pub width: f64,
    pub slope_beyond: f64,
    pub max_depth: f64,
    pub land_rise: f64,
}

impl ShelfProfile {
    /// Depth (positive down) at signed offshore distance `d_km` (negative inland).
    pub fn depth(&self, d_km: f64) -> f64 {
        if d_km <= 0.0 {
            return self.land_rise * d_km;
        }
        let beyond = (d_km - self.width).max(0.0);
        (self.slope * d_km + self.slope_beyond * beyond).min(self.max_depth)
    }
}

#[derive(Debug, Clone)]
pub struct ToyWorld {
    pub seed: u64,
    pub bounds: DomainBounds,
    /// Shoreline vertices `(lon, lat)` with strictly increasing latitude.
    pub shoreline: Vec<(f64, f64)>,
    pub shelf: ShelfProfile,
    pub mesh: Mesh,
}

impl ToyWorld {
    /// Shoreline longitude at `lat`; constant beyond the end vertices.
    pub fn coast_lon(&self, lat: f64) -> f64 {
        let v = &self.shoreline;
        if lat <= v[0].1 {
            return v[0].0;
        }
        if lat >= v[v.len() - 1].1 {
            return v[v.len() - 1].0;
        }
        let i = v.partition_point(|p| p.1 <= lat);
        let (a, b) = (v[i - 1], v[i]);
        let s = (lat - a.1) / (b.1 - a.1);
        a.0 + s * (b.0 - a.0)
    }

    pub fn is_land(&self, lat: f64, lon: f64) -> bool {
        lon >= self.coast_lon(lat)
    }

    /// Distance to the shoreline in km, positive offshore.
    pub fn signed_distance_km(&self, lat: f64, lon: f64) -> f64 {
        let d = shoreline_distance_km(&self.shoreline, lat, lon);
        if self.is_land(lat, lon) {
            -d
        } else {
            d
        }
    }

    pub fn depth_at(&self, lat: f64, lon: f64) -> f64 {
        self.shelf.depth(self.signed_distance_km(lat, lon))
    }

    /// Land raster covering the domain plus `margin` degrees, cells of `cell` degrees.
    pub fn land_raster(&self, margin: f64, cell: f64) -> LandRaster {
        let south = self.bounds.south - margin;
        let west = self.bounds.west - margin;
        let rows = ((self.bounds.north - self.bounds.south + 2.0 * margin) / cell).ceil() as usize;
        let cols = ((self.bounds.east - self.bounds.west + 2.0 * margin) / cell).ceil() as usize;
        LandRaster::from_fn(south, west, cell, rows, cols, |lat, lon| self.is_land(lat, lon))
    }
}

fn shoreline_distance_km(shoreline: &[(f64, f64)], lat: f64, lon: f64) -> f64 {
    let kx = KM_PER_DEG * lat.to_radians().cos();
    let ky = KM_PER_DEG;
    let p = (lon * kx, lat * ky);
    let mut best = f64::INFINITY;
    for seg in shoreline.windows(2) {
        let a = (seg[0].0 * kx, seg[0].1 * ky);
        let b = (seg[1].0 * kx, seg[1].1 * ky);
        let (abx, aby) = (b.0 - a.0, b.1 - a.1);
        let t = (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / (abx * abx + aby * aby)).clamp(0.0, 1.0);
        let d = (p.0 - a.0 - t * abx).hypot(p.1 - a.1 - t * aby);
        best = best.min(d);
    }
    best
}

/// Seeded coastal world over `bounds`.
pub fn synth_world(seed: u64, bounds: DomainBounds) -> ToyWorld {
    synth_world_with(seed, bounds, &WorldConfig::default())
}

pub fn synth_world_with(seed: u64, bounds: DomainBounds, cfg: &WorldConfig) -> ToyWorld {
    assert!(bounds.north > bounds.south && bounds.east > bounds.west, "empty domain");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = bounds.mid_lon();
    let meander = cfg.meander.min(0.5 * (bounds.east - bounds.west) - cfg.land_strip).max(0.0);

    // Shoreline extends one vertex past each latitude bound.
    let n_vertices = ((bounds.north - bounds.south) / cfg.vertex_spacing).ceil() as usize + 3;
    let mut shoreline = Vec::with_capacity(n_vertices);
    let mut offset: f64 = rng.gen_range(-0.5..0.5) * meander;
    for i in 0..n_vertices {
        let lat = bounds.south + (i as f64 - 1.0) * cfg.vertex_spacing;
        offset = (offset + rng.gen_range(-cfg.max_step..cfg.max_step)).clamp(-meander, meander);
        shoreline.push((mid + offset, lat));
    }

    let shelf = ShelfProfile {
        slope: rng.gen_range(cfg.shelf_slope_range.0..cfg.shelf_slope_range.1),
        width: rng.gen_range(cfg.shelf_width_range.0..cfg.shelf_width_range.1),
        slope_beyond: cfg.slope_beyond_shelf,
        max_depth: cfg.max_depth,
        land_rise: cfg.land_rise,
    };

    let mut world = ToyWorld {
        seed,
        bounds,
        shoreline,
        shelf,
        mesh: Mesh {
            nodes: Vec::new(),
            triangles: Vec::new(),
        },
    };
    world.mesh = mesh_world(&world, cfg);
    world
}

fn mesh_world(world: &ToyWorld, cfg: &WorldConfig) -> Mesh {
    let b = &world.bounds;
    let nx = ((b.east - b.west) / cfg.node_spacing).round() as usize + 1;
    let ny = ((b.north - b.south) / cfg.node_spacing).round() as usize + 1;
    let lon_at = |i: usize| b.west + i as f64 * cfg.node_spacing;
    let lat_at = |j: usize| b.south + j as f64 * cfg.node_spacing;
    let inland = |j: usize, i: usize| lon_at(i) - world.coast_lon(lat_at(j)) > cfg.land_strip;

    let mut node_id = vec![usize::MAX; nx * ny];
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    let mut id = |j: usize, i: usize, nodes: &mut Vec<MeshNode>| -> usize {
        let k = j * nx + i;
        if node_id[k] == usize::MAX {
            let (lat, lon) = (lat_at(j), lon_at(i));
            node_id[k] = nodes.len();
            nodes.push(MeshNode {
                lon,
                lat,
                depth: world.depth_at(lat, lon),
            });
        }
        node_id[k]
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let corners = [(j, i), (j, i + 1), (j + 1, i + 1), (j + 1, i)];
            let tris = if (i + j) % 2 == 0 {
                [[0, 1, 2], [0, 2, 3]]
            } else {
                [[0, 1, 3], [1, 2, 3]]
            };
            for tri in tris {
                if tri.iter().all(|&c| inland(corners[c].0, corners[c].1)) {
                    continue;
                }
                let t = tri.map(|c| id(corners[c].0, corners[c].1, &mut nodes));
                triangles.push(t);
            }
        }
    }
    Mesh { nodes, triangles }
}
