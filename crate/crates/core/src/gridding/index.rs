//! Uniform bucket grid over triangle bounding boxes for point location.

use super::mesh::Mesh;

/// Points within this barycentric slack of an edge count as inside.
const EDGE_TOLERANCE: f64 = 1e-12;

/// Barycentric coordinates of `(x, y)` in triangle `tri`, or `None` when the
/// point lies outside. Weights are clamped non-negative and sum to one.
pub fn barycentric(mesh: &Mesh, tri: usize, x: f64, y: f64) -> Option<[f64; 3]> {
    let [a, b, c] = mesh.triangles[tri];
    let (p1, p2, p3) = (&mesh.nodes[a], &mesh.nodes[b], &mesh.nodes[c]);
    let det = (p2.lat - p3.lat) * (p1.lon - p3.lon) + (p3.lon - p2.lon) * (p1.lat - p3.lat);
    let l1 = ((p2.lat - p3.lat) * (x - p3.lon) + (p3.lon - p2.lon) * (y - p3.lat)) / det;
    let l2 = ((p3.lat - p1.lat) * (x - p3.lon) + (p1.lon - p3.lon) * (y - p3.lat)) / det;
    let l3 = 1.0 - l1 - l2;
    if l1 < -EDGE_TOLERANCE || l2 < -EDGE_TOLERANCE || l3 < -EDGE_TOLERANCE {
        return None;
    }
    if l1 >= 0.0 && l2 >= 0.0 && l3 >= 0.0 {
        return Some([l1, l2, l3]);
    }
    let (l1, l2, l3) = (l1.max(0.0), l2.max(0.0), l3.max(0.0));
    let s = l1 + l2 + l3;
    Some([l1 / s, l2 / s, l3 / s])
}

#[derive(Debug, Clone)]
pub struct TriangleIndex {
    west: f64,
    south: f64,
    bucket: f64,
    nx: usize,
    ny: usize,
    /// CSR layout: bucket `k` holds `ids[offsets[k]..offsets[k + 1]]`, ascending.
    offsets: Vec<usize>,
    ids: Vec<u32>,
    bboxes: Vec<[f64; 4]>,
}

impl TriangleIndex {
    /// Bucket edge is twice the median triangle bounding-box diagonal.
    pub fn build(mesh: &Mesh) -> Self {
        let bboxes: Vec<[f64; 4]> = mesh
            .triangles
            .iter()
            .map(|t| {
                let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
                for &i in t {
                    let n = &mesh.nodes[i];
                    bb[0] = bb[0].min(n.lon);
                    bb[1] = bb[1].min(n.lat);
                    bb[2] = bb[2].max(n.lon);
                    bb[3] = bb[3].max(n.lat);
                }
                bb
            })
            .collect();
        if bboxes.is_empty() {
            return Self {
                west: 0.0,
                south: 0.0,
                bucket: 1.0,
                nx: 0,
                ny: 0,
                offsets: vec![0],
                ids: Vec::new(),
                bboxes,
            };
        }

        let mut diagonals: Vec<f64> = bboxes.iter().map(|b| (b[2] - b[0]).hypot(b[3] - b[1])).collect();
        let mid = diagonals.len() / 2;
        let median = *diagonals.select_nth_unstable_by(mid, f64::total_cmp).1;

        let west = bboxes.iter().map(|b| b[0]).fold(f64::INFINITY, f64::min);
        let south = bboxes.iter().map(|b| b[1]).fold(f64::INFINITY, f64::min);
        let east = bboxes.iter().map(|b| b[2]).fold(f64::NEG_INFINITY, f64::max);
        let north = bboxes.iter().map(|b| b[3]).fold(f64::NEG_INFINITY, f64::max);

        let mut bucket = 2.0 * median;
        // Keep the bucket count within a small multiple of the triangle count.
        let max_buckets = (4 * bboxes.len()).max(16) as f64;
        let span = ((east - west) * (north - south)).max(f64::MIN_POSITIVE);
        if span / (bucket * bucket) > max_buckets || bucket <= 0.0 {
            bucket = (span / max_buckets).sqrt();
        }
        let nx = (((east - west) / bucket).floor() as usize + 1).max(1);
        let ny = (((north - south) / bucket).floor() as usize + 1).max(1);

        let mut index = Self {
            west,
            south,
            bucket,
            nx,
            ny,
            offsets: Vec::new(),
            ids: Vec::new(),
            bboxes,
        };

        let mut counts = vec![0usize; nx * ny + 1];
        for bb in &index.bboxes {
            let (x0, y0, x1, y1) = index.bucket_range(bb);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    counts[by * nx + bx + 1] += 1;
                }
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut cursor = counts.clone();
        let mut ids = vec![0u32; counts[nx * ny]];
        for (t, bb) in index.bboxes.iter().enumerate() {
            let (x0, y0, x1, y1) = index.bucket_range(bb);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    let k = by * nx + bx;
                    ids[cursor[k]] = t as u32;
                    cursor[k] += 1;
                }
            }
        }
        index.offsets = counts;
        index.ids = ids;
        index
    }

    fn coord(&self, v: f64, origin: f64, n: usize) -> usize {
        (((v - origin) / self.bucket).floor().max(0.0) as usize).min(n - 1)
    }

    fn bucket_range(&self, bb: &[f64; 4]) -> (usize, usize, usize, usize) {
        (
            self.coord(bb[0], self.west, self.nx),
            self.coord(bb[1], self.south, self.ny),
            self.coord(bb[2], self.west, self.nx),
            self.coord(bb[3], self.south, self.ny),
        )
    }

    pub fn bucket_size(&self) -> f64 {
        self.bucket
    }

    pub fn triangle_count(&self) -> usize {
        self.bboxes.len()
    }

    /// Triangles whose bounding box contains the point, ascending by id.
    pub fn candidates(&self, lon: f64, lat: f64) -> Vec<usize> {
        self.candidate_iter(lon, lat).collect()
    }

    fn candidate_iter(&self, lon: f64, lat: f64) -> impl Iterator<Item = usize> + '_ {
        let slice: &[u32] = if self.bboxes.is_empty() || !(lon.is_finite() && lat.is_finite()) {
            &[]
        } else {
            let fx = (lon - self.west) / self.bucket;
            let fy = (lat - self.south) / self.bucket;
            if fx < 0.0 || fy < 0.0 {
                &[]
            } else {
                let (bx, by) = ((fx.floor() as usize).min(self.nx - 1), (fy.floor() as usize).min(self.ny - 1));
                let k = by * self.nx + bx;
                &self.ids[self.offsets[k]..self.offsets[k + 1]]
            }
        };
        slice.iter().map(|&t| t as usize).filter(move |&t| {
            let bb = &self.bboxes[t];
            lon >= bb[0] && lon <= bb[2] && lat >= bb[1] && lat <= bb[3]
        })
    }

    /// First triangle (by id) containing the point, with its barycentric weights.
    pub fn locate(&self, mesh: &Mesh, lon: f64, lat: f64) -> Option<(usize, [f64; 3])> {
        self.candidate_iter(lon, lat)
            .find_map(|t| barycentric(mesh, t, lon, lat).map(|w| (t, w)))
    }
}
