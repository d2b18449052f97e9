//! Ground-truth scene made of axis-aligned boxes and vertical cylinders.

use std::fmt::Write as _;

use thiserror::Error;

use crate::voxel_map::{GridGeometry, VoxelMapError};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Axis-aligned box given by center and full side lengths.
    Box { center: Vec3, size: Vec3 },
    /// Vertical cylinder standing on `z = 0`, `height` tall.
    Cylinder { cx: f64, cy: f64, radius: f64, height: f64 },
}

impl Primitive {
    /// Axis-aligned bounds `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        match *self {
            Primitive::Box { center, size } => (center - size / 2.0, center + size / 2.0),
            Primitive::Cylinder { cx, cy, radius, height } => (
                Vec3::new(cx - radius, cy - radius, 0.0),
                Vec3::new(cx + radius, cy + radius, height),
            ),
        }
    }

    /// Distance from `p` to the solid (0 inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        match *self {
            Primitive::Box { .. } => {
                let (lo, hi) = self.aabb();
                let d = Vec3::new(
                    (lo.x - p.x).max(p.x - hi.x).max(0.0),
                    (lo.y - p.y).max(p.y - hi.y).max(0.0),
                    (lo.z - p.z).max(p.z - hi.z).max(0.0),
                );
                d.norm()
            }
            Primitive::Cylinder { cx, cy, radius, height } => {
                let dr = ((p.x - cx).hypot(p.y - cy) - radius).max(0.0);
                let dz = (-p.z).max(p.z - height).max(0.0);
                dr.hypot(dz)
            }
        }
    }

    /// Smallest `t` in `[0, t_max]` with `origin + t * dir` on the solid.
    pub fn ray_cast(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<f64> {
        match *self {
            Primitive::Box { .. } => {
                let (lo, hi) = self.aabb();
                let mut t0 = 0.0f64;
                let mut t1 = t_max;
                for a in 0..3 {
                    if dir[a] == 0.0 {
                        if origin[a] < lo[a] || origin[a] > hi[a] {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / dir[a];
                    let (mut ta, mut tb) = ((lo[a] - origin[a]) * inv, (hi[a] - origin[a]) * inv);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    t0 = t0.max(ta);
                    t1 = t1.min(tb);
                    if t0 > t1 {
                        return None;
                    }
                }
                Some(t0)
            }
            Primitive::Cylinder { cx, cy, radius, height } => {
                let z_at = |t: f64| origin.z + t * dir.z;
                let inside_z = |t: f64| {
                    let z = z_at(t);
                    (0.0..=height).contains(&z)
                };
                let ox = origin.x - cx;
                let oy = origin.y - cy;
                let mut best: Option<f64> = None;
                let mut consider = |t: f64| {
                    if t >= 0.0 && t <= t_max && best.map_or(true, |b| t < b) {
                        best = Some(t);
                    }
                };
                if ox.hypot(oy) <= radius && inside_z(0.0) {
                    return Some(0.0);
                }
                let a = dir.x * dir.x + dir.y * dir.y;
                if a > 0.0 {
                    let b = 2.0 * (ox * dir.x + oy * dir.y);
                    let c = ox * ox + oy * oy - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                            if inside_z(t) {
                                consider(t);
                            }
                        }
                    }
                }
                if dir.z != 0.0 {
                    for zc in [0.0, height] {
                        let t = (zc - origin.z) / dir.z;
                        let x = ox + t * dir.x;
                        let y = oy + t * dir.y;
                        if x.hypot(y) <= radius {
                            consider(t);
                        }
                    }
                }
                best
            }
        }
    }

    /// Whether the solid shares positive volume with the box `[lo, hi]`.
    /// Overlaps thinner than `OVERLAP_EPS` count as touching, so rounding
    /// in voxel corners does not claim a neighbor across a shared face.
    pub fn overlaps_box(&self, lo: &Vec3, hi: &Vec3) -> bool {
        let e = OVERLAP_EPS;
        match *self {
            Primitive::Box { .. } => {
                let (a, b) = self.aabb();
                (0..3).all(|k| hi[k] > a[k] + e && lo[k] < b[k] - e)
            }
            Primitive::Cylinder { cx, cy, radius, height } => {
                if !(hi.z > e && lo.z < height - e) {
                    return false;
                }
                let nx = cx.clamp(lo.x, hi.x);
                let ny = cy.clamp(lo.y, hi.y);
                (nx - cx).hypot(ny - cy) < radius - e
            }
        }
    }
}

/// Overlap depth below which a primitive and a voxel are only touching.
pub const OVERLAP_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scene: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bounds_min: Vec3,
    pub bounds_max: Vec3,
    pub primitives: Vec<Primitive>,
}

impl Scene {
    pub fn new(bounds_min: Vec3, bounds_max: Vec3, primitives: Vec<Primitive>) -> Result<Self, SceneError> {
        let scene = Self {
            bounds_min,
            bounds_max,
            primitives,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(0..3).all(|a| self.bounds_min[a] < self.bounds_max[a]) {
            return Err(SceneError::Invalid("bounds are empty or inverted".into()));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            let ok_dims = match *p {
                Primitive::Box { size, .. } => size.iter().all(|&s| s > 0.0),
                Primitive::Cylinder { radius, height, .. } => radius > 0.0 && height > 0.0,
            };
            if !ok_dims {
                return Err(SceneError::Invalid(format!("primitive {i} has non-positive size")));
            }
            let (lo, hi) = p.aabb();
            let tol = 1e-9;
            if (0..3).any(|a| lo[a] < self.bounds_min[a] - tol || hi[a] > self.bounds_max[a] + tol) {
                return Err(SceneError::Invalid(format!("primitive {i} leaves the world bounds")));
            }
        }
        Ok(())
    }

    /// Parse the text format: a `bounds` header then `box` and `cyl` lines.
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let mut bounds: Option<(Vec3, Vec3)> = None;
        let mut primitives = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut toks = body.split_whitespace();
            let kind = toks.next().unwrap();
            let nums: Vec<f64> = toks
                .map(|t| {
                    t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| SceneError::Parse {
                        line,
                        msg: format!("bad number `{t}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let expect = |k: usize| {
                if nums.len() == k {
                    Ok(())
                } else {
                    Err(SceneError::Parse {
                        line,
                        msg: format!("`{kind}` takes {k} numbers, got {}", nums.len()),
                    })
                }
            };
            match kind {
                "bounds" => {
                    expect(6)?;
                    if bounds.is_some() {
                        return Err(SceneError::Parse { line, msg: "duplicate bounds".into() });
                    }
                    bounds = Some((
                        Vec3::new(nums[0], nums[1], nums[2]),
                        Vec3::new(nums[3], nums[4], nums[5]),
                    ));
                }
                "box" => {
                    expect(6)?;
                    primitives.push(Primitive::Box {
                        center: Vec3::new(nums[0], nums[1], nums[2]),
                        size: Vec3::new(nums[3], nums[4], nums[5]),
                    });
                }
                "cyl" => {
                    expect(4)?;
                    primitives.push(Primitive::Cylinder {
                        cx: nums[0],
                        cy: nums[1],
                        radius: nums[2],
                        height: nums[3],
                    });
                }
                other => {
                    return Err(SceneError::Parse {
                        line,
                        msg: format!("unknown primitive `{other}`"),
                    })
                }
            }
        }
        let (lo, hi) = bounds.ok_or(SceneError::Parse {
            line: 0,
            msg: "missing bounds line".into(),
        })?;
        Self::new(lo, hi, primitives)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (a, b) = (self.bounds_min, self.bounds_max);
        writeln!(s, "bounds {} {} {} {} {} {}", a.x, a.y, a.z, b.x, b.y, b.z).unwrap();
        for p in &self.primitives {
            match *p {
                Primitive::Box { center: c, size: z } => {
                    writeln!(s, "box {} {} {} {} {} {}", c.x, c.y, c.z, z.x, z.y, z.z).unwrap()
                }
                Primitive::Cylinder { cx, cy, radius, height } => {
                    writeln!(s, "cyl {cx} {cy} {radius} {height}").unwrap()
                }
            }
        }
        s
    }

    /// Distance from `p` to the nearest primitive (infinite for an empty scene).
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.primitives
            .iter()
            .map(|q| q.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest hit parameter along `origin + t * dir`, `t <= t_max`.
    pub fn ray_cast(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<f64> {
        cast_subset(&self.primitives, self.primitives.iter().map(|_| true), origin, dir, t_max)
    }

    /// Indices of primitives within `radius` of `p`, for per-tick culling.
    pub fn nearby(&self, p: &Vec3, radius: f64) -> Vec<usize> {
        self.primitives
            .iter()
            .enumerate()
            .filter(|(_, q)| q.distance(p) <= radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// Grid geometry covering the world bounds.
    pub fn grid_geometry(&self, voxel_size: f64) -> Result<GridGeometry, VoxelMapError> {
        GridGeometry::covering(self.bounds_min, self.bounds_max, voxel_size)
    }

    /// Conservative voxelization: a voxel is occupied iff its cube shares
    /// volume with a primitive.
    pub fn voxelize(&self, geometry: &GridGeometry) -> Vec<bool> {
        let half = Vec3::repeat(geometry.voxel_size() / 2.0);
        let mut occ = vec![false; geometry.len()];
        for p in &self.primitives {
            let (lo, hi) = p.aabb();
            let a = geometry.nearest_voxel(&(lo - half));
            let b = geometry.nearest_voxel(&(hi + half));
            let dims = geometry.dims();
            let clampi = |v: i32, n: usize| v.clamp(0, n as i32 - 1);
            for k in clampi(a.k, dims[2])..=clampi(b.k, dims[2]) {
                for j in clampi(a.j, dims[1])..=clampi(b.j, dims[1]) {
                    for i in clampi(a.i, dims[0])..=clampi(b.i, dims[0]) {
                        let c = crate::voxel_map::VoxelIndex::new(i, j, k);
                        let center = geometry.center(c);
                        if p.overlaps_box(&(center - half), &(center + half)) {
                            occ[geometry.linear(c)] = true;
                        }
                    }
                }
            }
        }
        occ
    }
}

/// Ray cast against the primitives selected by `mask`.
pub(crate) fn cast_subset<I: Iterator<Item = bool>>(
    prims: &[Primitive],
    mask: I,
    origin: &Vec3,
    dir: &Vec3,
    t_max: f64,
) -> Option<f64> {
    let mut best = t_max;
    let mut hit = false;
    for (p, use_it) in prims.iter().zip(mask) {
        if !use_it {
            continue;
        }
        if let Some(t) = p.ray_cast(origin, dir, best) {
            if t <= best {
                best = t;
                hit = true;
            }
        }
    }
    hit.then_some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box() -> Primitive {
        Primitive::Box {
            center: Vec3::new(2.0, 0.0, 0.0),
            size: Vec3::new(1.0, 2.0, 2.0),
        }
    }

    #[test]
    fn box_ray_and_distance() {
        let b = unit_box();
        let t = b.ray_cast(&Vec3::zeros(), &Vec3::x(), 10.0).unwrap();
        assert_eq!(t, 1.5);
        assert!(b.ray_cast(&Vec3::zeros(), &-Vec3::x(), 10.0).is_none());
        assert!(b.ray_cast(&Vec3::zeros(), &Vec3::x(), 1.0).is_none());
        assert_eq!(b.distance(&Vec3::zeros()), 1.5);
        assert_eq!(b.distance(&Vec3::new(2.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn cylinder_ray_and_distance() {
        let c = Primitive::Cylinder { cx: 3.0, cy: 0.0, radius: 0.5, height: 2.0 };
        let t = c.ray_cast(&Vec3::new(0.0, 0.0, 1.0), &Vec3::x(), 10.0).unwrap();
        assert!((t - 2.5).abs() < 1e-12);
        assert!(c.ray_cast(&Vec3::new(0.0, 0.0, 2.5), &Vec3::x(), 10.0).is_none());
        // Down onto the top cap.
        let t = c.ray_cast(&Vec3::new(3.1, 0.0, 5.0), &-Vec3::z(), 10.0).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        assert!((c.distance(&Vec3::new(0.0, 0.0, 1.0)) - 2.5).abs() < 1e-12);
        assert!((c.distance(&Vec3::new(3.0, 0.0, 3.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "# demo\nbounds 0 0 0 10 10 3\nbox 5 5 1 1 1 2\ncyl 2 2 0.3 2.5\n";
        let s = Scene::parse(text).unwrap();
        assert_eq!(s.primitives.len(), 2);
        assert_eq!(Scene::parse(&s.to_text()).unwrap(), s);
        assert!(matches!(Scene::parse("box 1 1 1 1 1 1\n"), Err(SceneError::Parse { .. })));
        assert!(matches!(
            Scene::parse("bounds 0 0 0 1 1 1\nbox 1 1\n"),
            Err(SceneError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Scene::parse("bounds 0 0 0 1 1 1\nbox 5 5 5 1 1 1\n"),
            Err(SceneError::Invalid(_))
        ));
        assert!(matches!(
            Scene::parse("bounds 0 0 0 1 1 1\nsphere 1 1 1\n"),
            Err(SceneError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn voxelization_is_conservative() {
        let scene = Scene::new(
            Vec3::zeros(),
            Vec3::new(4.0, 4.0, 2.0),
            vec![
                Primitive::Box { center: Vec3::new(1.0, 1.0, 1.0), size: Vec3::new(0.4, 0.4, 0.4) },
                Primitive::Cylinder { cx: 3.0, cy: 3.0, radius: 0.05, height: 1.0 },
            ],
        )
        .unwrap();
        let g = scene.grid_geometry(0.2).unwrap();
        let occ = scene.voxelize(&g);
        // Faces on voxel-center planes: 3 voxels per axis.
        let box_count = (0..g.len())
            .filter(|&i| occ[i] && (g.center(g.index_of(i)) - Vec3::new(1.0, 1.0, 1.0)).norm() < 1.0)
            .count();
        assert_eq!(box_count, 27);
        // The thin pole is still represented.
        let c = g.world_to_voxel(&Vec3::new(3.0, 3.0, 0.5)).unwrap();
        assert!(occ[g.linear(c)]);
    }

    proptest! {
        #[test]
        fn ray_hit_point_is_on_surface(ox in -5.0f64..5.0, oy in -5.0f64..5.0, oz in -1.0f64..4.0,
                                       dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0) {
            let prims = [
                Primitive::Box { center: Vec3::new(1.0, -1.0, 1.5), size: Vec3::new(1.0, 2.0, 3.0) },
                Primitive::Cylinder { cx: -1.0, cy: 2.0, radius: 0.7, height: 2.0 },
            ];
            let o = Vec3::new(ox, oy, oz);
            let d = Vec3::new(dx, dy, dz);
            prop_assume!(d.norm() > 1e-3);
            for p in &prims {
                if let Some(t) = p.ray_cast(&o, &d, 50.0) {
                    let q = o + t * d;
                    prop_assert!(p.distance(&q) < 1e-9);
                    if t > 0.0 {
                        // Strictly before the hit the ray is outside.
                        let before = o + (t * 0.999) * d;
                        prop_assert!(p.distance(&before) >= 0.0);
                        prop_assert!(p.distance(&o) > 0.0);
                    }
                } else {
                    for n in 0..=50 {
                        let q = o + d * (50.0 * n as f64 / 50.0);
                        prop_assert!(p.distance(&q) > 0.0 || (q - o).norm() > 50.0 * d.norm());
                    }
                }
            }
        }
    }
}
