use crate::error::GridError;
use crate::field::{Field2, Mask, SurgeField};

use super::grid::GridSpec;
use super::index::TriangleIndex;
use super::mesh::Mesh;

/// Nodal field sampled at grid cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    /// Interpolated values; 0 where not covered.
    pub values: Field2<f64>,
    pub coverage: Mask,
}

fn locate_wrapped(index: &TriangleIndex, mesh: &Mesh, lon: f64, lat: f64) -> Option<(usize, [f64; 3])> {
    index
        .locate(mesh, lon, lat)
        .or_else(|| index.locate(mesh, lon + 360.0, lat))
        .or_else(|| index.locate(mesh, lon - 360.0, lat))
}

/// Barycentric interpolation of `nodal_values` at every cell center.
pub fn interpolate_to_grid(
    mesh: &Mesh,
    index: &TriangleIndex,
    nodal_values: &[f64],
    grid: &GridSpec,
) -> Result<GriddedField, GridError> {
    if nodal_values.len() != mesh.nodes.len() {
        return Err(GridError::Shape(format!(
            "{} nodal values for {} nodes",
            nodal_values.len(),
            mesh.nodes.len()
        )));
    }
    let n = grid.resolution;
    let mut values = Field2::filled(n, n, 0.0);
    let mut coverage = Field2::filled(n, n, false);
    for row in 0..n {
        let lat = grid.cell_lat(row);
        for col in 0..n {
            let lon = grid.cell_lon(col);
            if let Some((t, w)) = locate_wrapped(index, mesh, lon, lat) {
                let [a, b, c] = mesh.triangles[t];
                let v = w[0] * nodal_values[a] + w[1] * nodal_values[b] + w[2] * nodal_values[c];
                values.set(row, col, v);
                coverage.set(row, col, true);
            }
        }
    }
    Ok(GriddedField { values, coverage })
}

/// Cell is land when the mesh does not cover it or the interpolated depth is <= 0.
pub fn land_mask(depth: &GriddedField) -> Mask {
    Field2 {
        height: depth.values.height,
        width: depth.values.width,
        data: depth
            .coverage
            .data
            .iter()
            .zip(&depth.values.data)
            .map(|(&covered, &d)| !covered || !(d > 0.0))
            .collect(),
    }
}

/// Regression target: interpolated maximum elevation, 0 on land, uncovered or dry cells.
pub fn grid_target(
    mesh: &Mesh,
    index: &TriangleIndex,
    max_elevation: &[f64],
    grid: &GridSpec,
    land: &Mask,
) -> Result<SurgeField, GridError> {
    let gridded = interpolate_to_grid(mesh, index, max_elevation, grid)?;
    if !land.same_shape(&gridded.values) {
        return Err(GridError::Shape("land mask does not match grid".into()));
    }
    let data = gridded
        .values
        .data
        .iter()
        .zip(&gridded.coverage.data)
        .zip(&land.data)
        .map(|((&v, &covered), &is_land)| {
            if covered && !is_land && v.is_finite() {
                v as f32
            } else {
                0.0
            }
        })
        .collect();
    Ok(Field2::from_vec(grid.resolution, grid.resolution, data))
}

#[cfg(test)]
mod tests {
    use super::super::mesh::MeshNode;
    use super::*;

    /// Two triangles covering [0, 1] x [0, 1].
    fn square(depth: f64) -> Mesh {
        let nodes = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .iter()
            .map(|&(lon, lat)| MeshNode { lon, lat, depth })
            .collect();
        Mesh::new(nodes, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn constant_and_linear_fields() {
        let mesh = square(10.0);
        let idx = TriangleIndex::build(&mesh);
        let grid = GridSpec::new(0.5, 0.5, 2.0, 8).unwrap();

        let g = interpolate_to_grid(&mesh, &idx, &[3.0; 4], &grid).unwrap();
        assert!(g.coverage.count() > 0 && g.coverage.count() < 64);
        for (v, &c) in g.values.data.iter().zip(&g.coverage.data) {
            if c {
                assert!((v - 3.0).abs() < 1e-12);
            } else {
                assert_eq!(*v, 0.0);
            }
        }

        let lin: Vec<f64> = mesh.nodes.iter().map(|n| 2.0 * n.lon - 0.5 * n.lat + 1.0).collect();
        let g = interpolate_to_grid(&mesh, &idx, &lin, &grid).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                if *g.coverage.get(row, col) {
                    let exact = 2.0 * grid.cell_lon(col) - 0.5 * grid.cell_lat(row) + 1.0;
                    assert!((g.values.get(row, col) - exact).abs() <= 1e-6 * exact.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn target_fill_rules() {
        let mesh = square(10.0);
        let idx = TriangleIndex::build(&mesh);
        let inside = GridSpec::new(0.5, 0.5, 0.5, 8).unwrap();
        let depth = interpolate_to_grid(&mesh, &idx, &mesh.depths(), &inside).unwrap();
        let land = land_mask(&depth);
        assert_eq!(land.count(), 0);
        let t = grid_target(&mesh, &idx, &[1.0; 4], &inside, &land).unwrap();
        assert!(t.data.iter().all(|&v| v == 1.0));

        let outside = GridSpec::new(40.0, 40.0, 0.5, 8).unwrap();
        let depth = interpolate_to_grid(&mesh, &idx, &mesh.depths(), &outside).unwrap();
        let land = land_mask(&depth);
        assert_eq!(land.count(), 64);
        let t = grid_target(&mesh, &idx, &[1.0; 4], &outside, &land).unwrap();
        assert!(t.data.iter().all(|&v| v == 0.0));

        // Dry nodes propagate NaN and are zero-filled.
        let t = grid_target(&mesh, &idx, &[f64::NAN, 1.0, 1.0, 1.0], &inside, &Field2::filled(8, 8, false)).unwrap();
        assert!(t.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn antimeridian_mesh_in_0_360_convention() {
        let nodes = [(179.0, 0.0), (181.0, 0.0), (181.0, 2.0), (179.0, 2.0)]
            .iter()
            .map(|&(lon, lat)| MeshNode { lon, lat, depth: 5.0 })
            .collect();
        let mesh = Mesh::new(nodes, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let idx = TriangleIndex::build(&mesh);
        let grid = GridSpec::new(1.0, 180.0, 1.0, 8).unwrap();
        let g = interpolate_to_grid(&mesh, &idx, &mesh.depths(), &grid).unwrap();
        assert_eq!(g.coverage.count(), 64);
    }
}
