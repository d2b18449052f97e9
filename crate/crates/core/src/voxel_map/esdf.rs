//! Exact Euclidean signed distance field over voxel centers.
//!
//! Squared distances are computed in voxel units with the separable lower
//! envelope transform (one 1D pass per axis). All intermediate values are
//! small integers held in `f64`, so the result is exact.

use super::{GridGeometry, VoxelGrid, VoxelIndex};

/// Per-voxel signed distance `D(c)` in meters.
///
/// Non-occupied voxels hold the distance from their center to the nearest
/// occupied center; occupied voxels hold minus the distance to the nearest
/// non-occupied center. Values saturate at `±truncation`.
#[derive(Debug, Clone, PartialEq)]
pub struct EsdfField {
    geometry: GridGeometry,
    truncation: f64,
    distance: Vec<f64>,
}

impl EsdfField {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// Distance at `c`; out-of-grid voxels read as `+truncation`.
    #[inline]
    pub fn distance(&self, c: VoxelIndex) -> f64 {
        if self.geometry.contains(c) {
            self.distance[self.geometry.linear(c)]
        } else {
            self.truncation
        }
    }

    #[inline]
    pub fn distance_at(&self, linear: usize) -> f64 {
        self.distance[linear]
    }

    pub fn values(&self) -> &[f64] {
        &self.distance
    }
}

/// Signed distance field of the occupied voxels in `grid`. Unseen voxels count
/// as non-occupied.
pub fn compute_esdf(grid: &VoxelGrid, truncation: f64) -> EsdfField {
    let mask: Vec<bool> = grid
        .classes()
        .into_iter()
        .map(|c| c == super::VoxelClass::Occupied)
        .collect();
    compute_esdf_from_mask(grid.geometry(), &mask, truncation)
}

/// Signed distance field for an explicit occupied mask in storage order.
pub fn compute_esdf_from_mask(
    geometry: &GridGeometry,
    occupied: &[bool],
    truncation: f64,
) -> EsdfField {
    assert_eq!(occupied.len(), geometry.len(), "mask size mismatch");
    let s = geometry.voxel_size();
    let to_occupied = squared_distance_transform(geometry.dims(), occupied);
    let free_mask: Vec<bool> = occupied.iter().map(|o| !o).collect();
    let to_free = squared_distance_transform(geometry.dims(), &free_mask);

    let distance = occupied
        .iter()
        .enumerate()
        .map(|(i, &occ)| {
            if occ {
                -(to_free[i].sqrt() * s).min(truncation)
            } else {
                (to_occupied[i].sqrt() * s).min(truncation)
            }
        })
        .collect();
    EsdfField {
        geometry: geometry.clone(),
        truncation,
        distance,
    }
}

/// Squared Euclidean distance (voxel units) from every voxel to the nearest
/// source voxel; `f64::INFINITY` when there are no sources.
pub fn squared_distance_transform(dims: [usize; 3], sources: &[bool]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let mut field: Vec<f64> = sources
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();

    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut scratch = Envelope::with_capacity(longest);

    let stride = [1, nx, nx * ny];
    let lens = [nx, ny, nz];
    for axis in 0..3 {
        let n = lens[axis];
        let (o1, o2) = match axis {
            0 => ((ny, stride[1]), (nz, stride[2])),
            1 => ((nx, stride[0]), (nz, stride[2])),
            _ => ((nx, stride[0]), (ny, stride[1])),
        };
        for b in 0..o2.0 {
            for a in 0..o1.0 {
                let base = a * o1.1 + b * o2.1;
                for q in 0..n {
                    line[q] = field[base + q * stride[axis]];
                }
                scratch.transform(&line[..n], &mut out[..n]);
                for q in 0..n {
                    field[base + q * stride[axis]] = out[q];
                }
            }
        }
    }
    field
}

/// Lower envelope of parabolas `(q - v)^2 + f(v)` for one grid line.
struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            v: Vec::with_capacity(n),
            z: Vec::with_capacity(n + 1),
        }
    }

    fn transform(&mut self, f: &[f64], d: &mut [f64]) {
        self.v.clear();
        self.z.clear();
        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            loop {
                let Some(&p) = self.v.last() else {
                    self.v.push(q);
                    self.z.push(f64::NEG_INFINITY);
                    break;
                };
                let fp = f[p] + (p * p) as f64;
                let s = (fq - fp) / (2.0 * (q - p) as f64);
                if s <= *self.z.last().unwrap() {
                    self.v.pop();
                    self.z.pop();
                } else {
                    self.v.push(q);
                    self.z.push(s);
                    break;
                }
            }
        }
        if self.v.is_empty() {
            d.fill(f64::INFINITY);
            return;
        }
        self.z.push(f64::INFINITY);
        let mut k = 0;
        for (q, dq) in d.iter_mut().enumerate() {
            while self.z[k + 1] < q as f64 {
                k += 1;
            }
            let dv = q as f64 - self.v[k] as f64;
            *dq = dv * dv + f[self.v[k]];
        }
    }
}
