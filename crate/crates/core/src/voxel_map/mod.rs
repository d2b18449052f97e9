//! Dense voxel occupancy map.
//!
//! A [`VoxelGrid`] stores one log-odds occupancy value per voxel over a fixed
//! box of space. Voxel `c` sits at `p(c) = c * voxel_size + datum`, and a
//! world position maps back to the nearest voxel by rounding. Voxels are
//! classified as unseen, free or occupied from their occupancy probability,
//! and [`compute_esdf`] turns the occupied set into a signed distance field.

mod dump;
mod esdf;
mod traversal;

use thiserror::Error;

use crate::Vec3;

pub use dump::{read_voxel_dump, write_voxel_dump, DumpError};
pub use esdf::{compute_esdf, compute_esdf_from_mask, squared_distance_transform, EsdfField};
pub use traversal::trace_voxels;

/// Offsets of the 26 voxels sharing a face, edge or corner with the origin.
pub const NEIGHBORS_26: [[i32; 3]; 26] = {
    let mut out = [[0i32; 3]; 26];
    let mut n = 0;
    let mut k = -1;
    while k <= 1 {
        let mut j = -1;
        while j <= 1 {
            let mut i = -1;
            while i <= 1 {
                if !(i == 0 && j == 0 && k == 0) {
                    out[n] = [i, j, k];
                    n += 1;
                }
                i += 1;
            }
            j += 1;
        }
        k += 1;
    }
    out
};

/// Offsets of the 6 face neighbors.
pub const NEIGHBORS_6: [[i32; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VoxelMapError {
    #[error("voxel index component {axis} = {index} outside [0, {max}]")]
    OutOfBounds { axis: usize, index: i64, max: i64 },
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),
}

/// Integer voxel coordinate. May lie outside a grid; use
/// [`GridGeometry::contains`] before indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VoxelIndex {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl VoxelIndex {
    pub const fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }

    pub fn offset(self, d: [i32; 3]) -> Self {
        Self::new(self.i + d[0], self.j + d[1], self.k + d[2])
    }

    pub fn as_array(self) -> [i32; 3] {
        [self.i, self.j, self.k]
    }

    /// Squared center distance in voxel units.
    pub fn dist2(self, other: Self) -> i64 {
        let di = (self.i - other.i) as i64;
        let dj = (self.j - other.j) as i64;
        let dk = (self.k - other.k) as i64;
        di * di + dj * dj + dk * dk
    }
}

/// Shape and placement of a voxel lattice, shared by every per-voxel field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    dims: [usize; 3],
    voxel_size: f64,
    datum: Vec3,
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], voxel_size: f64, datum: Vec3) -> Result<Self, VoxelMapError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VoxelMapError::InvalidGeometry(format!(
                "dims must be positive, got {dims:?}"
            )));
        }
        if dims.iter().any(|&d| d > i32::MAX as usize / 2) {
            return Err(VoxelMapError::InvalidGeometry("dims too large".into()));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(VoxelMapError::InvalidGeometry(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        if !datum.iter().all(|v| v.is_finite()) {
            return Err(VoxelMapError::InvalidGeometry("datum must be finite".into()));
        }
        Ok(Self {
            dims,
            voxel_size,
            datum,
        })
    }

    /// Smallest lattice with voxel centers covering the box `[min, max]`.
    pub fn covering(min: Vec3, max: Vec3, voxel_size: f64) -> Result<Self, VoxelMapError> {
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let span = max[a] - min[a];
            if !(span >= 0.0) {
                return Err(VoxelMapError::InvalidGeometry(format!(
                    "inverted bounds on axis {a}"
                )));
            }
            dims[a] = (span / voxel_size - 1e-9).ceil().max(0.0) as usize + 1;
        }
        Self::new(dims, voxel_size, min)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn datum(&self) -> Vec3 {
        self.datum
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest valid index per axis (`c_max`).
    pub fn max_index(&self) -> [i64; 3] {
        [
            self.dims[0] as i64 - 1,
            self.dims[1] as i64 - 1,
            self.dims[2] as i64 - 1,
        ]
    }

    pub fn contains(&self, c: VoxelIndex) -> bool {
        c.i >= 0
            && c.j >= 0
            && c.k >= 0
            && (c.i as usize) < self.dims[0]
            && (c.j as usize) < self.dims[1]
            && (c.k as usize) < self.dims[2]
    }

    fn check(&self, c: VoxelIndex) -> Result<(), VoxelMapError> {
        let max = self.max_index();
        for (axis, v) in c.as_array().into_iter().enumerate() {
            if v < 0 || v as i64 > max[axis] {
                return Err(VoxelMapError::OutOfBounds {
                    axis,
                    index: v as i64,
                    max: max[axis],
                });
            }
        }
        Ok(())
    }

    /// Linear storage offset; x varies fastest. Caller guarantees bounds.
    #[inline]
    pub fn linear(&self, c: VoxelIndex) -> usize {
        debug_assert!(self.contains(c));
        c.i as usize + self.dims[0] * (c.j as usize + self.dims[1] * c.k as usize)
    }

    #[inline]
    pub fn index_of(&self, linear: usize) -> VoxelIndex {
        let nx = self.dims[0];
        let ny = self.dims[1];
        VoxelIndex::new(
            (linear % nx) as i32,
            ((linear / nx) % ny) as i32,
            (linear / (nx * ny)) as i32,
        )
    }

    /// Continuous voxel coordinate `(r - d_m) / s_c`.
    #[inline]
    pub fn to_lattice(&self, r: &Vec3) -> Vec3 {
        (r - self.datum) / self.voxel_size
    }

    /// Nearest voxel without a bounds check.
    pub fn nearest_voxel(&self, r: &Vec3) -> VoxelIndex {
        let u = self.to_lattice(r);
        let cv = |v: f64| {
            let v = v.round();
            if v.is_nan() {
                i32::MIN
            } else {
                v.clamp(i32::MIN as f64, i32::MAX as f64) as i32
            }
        };
        VoxelIndex::new(cv(u.x), cv(u.y), cv(u.z))
    }

    /// `c(r) = round((r - d_m) / s_c)`, rejected when outside the grid.
    pub fn world_to_voxel(&self, r: &Vec3) -> Result<VoxelIndex, VoxelMapError> {
        let u = self.to_lattice(r);
        let max = self.max_index();
        for axis in 0..3 {
            let v = u[axis].round();
            if !(v >= 0.0 && v <= max[axis] as f64) {
                let index = if v.is_nan() {
                    i64::MIN
                } else {
                    v.clamp(i64::MIN as f64, i64::MAX as f64) as i64
                };
                return Err(VoxelMapError::OutOfBounds { axis, index, max: max[axis] });
            }
        }
        Ok(self.nearest_voxel(r))
    }

    /// `p(c) = c * s_c + d_m`.
    pub fn voxel_to_world(&self, c: VoxelIndex) -> Result<Vec3, VoxelMapError> {
        self.check(c)?;
        Ok(self.center(c))
    }

    /// Voxel center without a bounds check.
    #[inline]
    pub fn center(&self, c: VoxelIndex) -> Vec3 {
        Vec3::new(c.i as f64, c.j as f64, c.k as f64) * self.voxel_size + self.datum
    }

    /// Upper corner of the box spanned by the voxel centers.
    pub fn extent_max(&self) -> Vec3 {
        self.center(VoxelIndex::new(
            self.dims[0] as i32 - 1,
            self.dims[1] as i32 - 1,
            self.dims[2] as i32 - 1,
        ))
    }

    /// In-bounds neighbors of `c` for the given offset table.
    pub fn neighbors<'a>(
        &'a self,
        c: VoxelIndex,
        offsets: &'a [[i32; 3]],
    ) -> impl Iterator<Item = VoxelIndex> + 'a {
        offsets
            .iter()
            .map(move |&d| c.offset(d))
            .filter(move |n| self.contains(*n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VoxelClass {
    Unseen,
    Free,
    Occupied,
}

/// Log-odds evidence model and classification thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyModel {
    pub log_odds_hit: f64,
    pub log_odds_miss: f64,
    pub log_odds_min: f64,
    pub log_odds_max: f64,
    pub occ_thresh: f64,
    pub free_thresh: f64,
}

impl Default for OccupancyModel {
    fn default() -> Self {
        // One hit reaches p = 0.70, two misses reach p = 0.31.
        Self {
            log_odds_hit: 0.85,
            log_odds_miss: -0.4,
            log_odds_min: -2.0,
            log_odds_max: 20.0,
            occ_thresh: 0.65,
            free_thresh: 0.35,
        }
    }
}

impl OccupancyModel {
    pub fn validate(&self) -> Result<(), VoxelMapError> {
        let ok = self.occ_thresh > self.free_thresh
            && (0.0..=1.0).contains(&self.occ_thresh)
            && (0.0..=1.0).contains(&self.free_thresh)
            && self.log_odds_hit > 0.0
            && self.log_odds_miss < 0.0
            && self.log_odds_min < 0.0
            && self.log_odds_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(VoxelMapError::InvalidGeometry(format!(
                "invalid occupancy model {self:?}"
            )))
        }
    }

    /// Pure threshold classification of an occupancy probability.
    pub fn classify(&self, occupancy: f64) -> VoxelClass {
        if occupancy >= self.occ_thresh {
            VoxelClass::Occupied
        } else if occupancy <= self.free_thresh {
            VoxelClass::Free
        } else {
            VoxelClass::Unseen
        }
    }
}

#[inline]
fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

#[inline]
fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Dense occupancy grid. Never-updated voxels read exactly 0.5.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    geometry: GridGeometry,
    model: OccupancyModel,
    log_odds: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(geometry: GridGeometry, model: OccupancyModel) -> Result<Self, VoxelMapError> {
        model.validate()?;
        let n = geometry.len();
        Ok(Self {
            geometry,
            model,
            log_odds: vec![0.0; n],
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn model(&self) -> &OccupancyModel {
        &self.model
    }

    pub fn world_to_voxel(&self, r: &Vec3) -> Result<VoxelIndex, VoxelMapError> {
        self.geometry.world_to_voxel(r)
    }

    pub fn voxel_to_world(&self, c: VoxelIndex) -> Result<Vec3, VoxelMapError> {
        self.geometry.voxel_to_world(c)
    }

    pub fn occupancy(&self, c: VoxelIndex) -> Result<f64, VoxelMapError> {
        self.geometry.check(c)?;
        Ok(probability(self.log_odds[self.geometry.linear(c)]))
    }

    #[inline]
    pub fn occupancy_at(&self, linear: usize) -> f64 {
        probability(self.log_odds[linear])
    }

    /// Overwrite a voxel's occupancy probability (clamped to `[0, 1]`).
    pub fn set_occupancy(&mut self, c: VoxelIndex, p: f64) -> Result<(), VoxelMapError> {
        self.geometry.check(c)?;
        let idx = self.geometry.linear(c);
        self.log_odds[idx] = log_odds(p.clamp(0.0, 1.0));
        Ok(())
    }

    pub fn classify(&self, c: VoxelIndex) -> Result<VoxelClass, VoxelMapError> {
        Ok(self.model.classify(self.occupancy(c)?))
    }

    #[inline]
    pub fn class_at(&self, linear: usize) -> VoxelClass {
        self.model.classify(self.occupancy_at(linear))
    }

    /// Classification of every voxel in storage order.
    pub fn classes(&self) -> Vec<VoxelClass> {
        (0..self.log_odds.len()).map(|i| self.class_at(i)).collect()
    }

    fn apply(&mut self, linear: usize, delta: f64) {
        let l = &mut self.log_odds[linear];
        *l = (*l + delta).clamp(self.model.log_odds_min, self.model.log_odds_max);
    }

    /// Add one hit (occupied) observation to `c`.
    pub fn record_hit(&mut self, c: VoxelIndex) -> Result<(), VoxelMapError> {
        self.geometry.check(c)?;
        let idx = self.geometry.linear(c);
        self.apply(idx, self.model.log_odds_hit);
        Ok(())
    }

    /// Add one miss (free) observation to `c`.
    pub fn record_miss(&mut self, c: VoxelIndex) -> Result<(), VoxelMapError> {
        self.geometry.check(c)?;
        let idx = self.geometry.linear(c);
        self.apply(idx, self.model.log_odds_miss);
        Ok(())
    }

    /// Integrate one sensor ray.
    ///
    /// Every voxel the segment passes through before the endpoint voxel gets a
    /// miss. The endpoint voxel gets a hit when `hit` is set, a miss otherwise.
    /// A ray leaving the grid is truncated at the boundary and never marks a hit.
    pub fn integrate_ray(
        &mut self,
        origin: &Vec3,
        endpoint: &Vec3,
        hit: bool,
    ) -> Result<(), VoxelMapError> {
        self.geometry.world_to_voxel(origin)?;
        let end_voxel = self.geometry.nearest_voxel(endpoint);
        let (hit_delta, miss_delta) = (self.model.log_odds_hit, self.model.log_odds_miss);
        let geometry = self.geometry.clone();
        trace_voxels(&geometry, origin, endpoint, |v| {
            if !geometry.contains(v) {
                return false;
            }
            let idx = geometry.linear(v);
            if v == end_voxel && hit {
                self.apply(idx, hit_delta);
            } else {
                self.apply(idx, miss_delta);
            }
            true
        });
        Ok(())
    }

    /// Integrate a whole scan of `(origin, endpoint, hit)` rays.
    ///
    /// Each voxel is updated at most once: a hit if any ray of the scan ends
    /// in it, otherwise a miss if any ray passes through it. A surface voxel
    /// that is only partly solid then keeps its hit even when neighboring
    /// rays graze its free part.
    pub fn integrate_scan<'a, I>(&mut self, rays: I) -> Result<(), VoxelMapError>
    where
        I: IntoIterator<Item = (&'a Vec3, &'a Vec3, bool)>,
    {
        // 0 untouched, 1 miss, 2 hit
        let mut mark = vec![0u8; self.geometry.len()];
        let mut touched = Vec::new();
        let geometry = self.geometry.clone();
        for (origin, endpoint, hit) in rays {
            geometry.world_to_voxel(origin)?;
            let end_voxel = geometry.nearest_voxel(endpoint);
            trace_voxels(&geometry, origin, endpoint, |v| {
                if !geometry.contains(v) {
                    return false;
                }
                let idx = geometry.linear(v);
                let m = if v == end_voxel && hit { 2 } else { 1 };
                if mark[idx] == 0 {
                    touched.push(idx);
                }
                mark[idx] = mark[idx].max(m);
                true
            });
        }
        let (hit_delta, miss_delta) = (self.model.log_odds_hit, self.model.log_odds_miss);
        for idx in touched {
            self.apply(idx, if mark[idx] == 2 { hit_delta } else { miss_delta });
        }
        Ok(())
    }

    /// Copy of the current map with precomputed classes and signed distances.
    pub fn snapshot(&self, id: u64, truncation: f64) -> MapSnapshot {
        let classes = self.classes();
        let esdf = compute_esdf_from_mask(
            &self.geometry,
            &classes
                .iter()
                .map(|c| *c == VoxelClass::Occupied)
                .collect::<Vec<_>>(),
            truncation,
        );
        MapSnapshot {
            id,
            grid: self.clone(),
            classes,
            esdf,
        }
    }
}

/// Immutable view of the map taken at replan time.
#[derive(Debug, Clone)]
pub struct MapSnapshot {
    pub id: u64,
    pub grid: VoxelGrid,
    pub classes: Vec<VoxelClass>,
    pub esdf: EsdfField,
}

impl MapSnapshot {
    pub fn geometry(&self) -> &GridGeometry {
        self.grid.geometry()
    }

    /// Class of `c`; out-of-grid voxels read as unseen.
    #[inline]
    pub fn class(&self, c: VoxelIndex) -> VoxelClass {
        let g = self.grid.geometry();
        if g.contains(c) {
            self.classes[g.linear(c)]
        } else {
            VoxelClass::Unseen
        }
    }

    pub fn safe_set(&self, d_safe: f64) -> SafeSet<'_> {
        SafeSet {
            esdf: &self.esdf,
            d_safe,
        }
    }
}

/// Positions whose voxel is in the grid and at least `d_safe` from the
/// nearest occupied voxel.
#[derive(Debug, Clone, Copy)]
pub struct SafeSet<'a> {
    esdf: &'a EsdfField,
    d_safe: f64,
}

impl<'a> SafeSet<'a> {
    pub fn new(esdf: &'a EsdfField, d_safe: f64) -> Self {
        Self { esdf, d_safe }
    }

    pub fn contains(&self, r: &Vec3) -> bool {
        match self.esdf.geometry().world_to_voxel(r) {
            Ok(c) => self.esdf.distance(c) >= self.d_safe,
            Err(_) => false,
        }
    }
}
