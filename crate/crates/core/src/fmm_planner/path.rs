//! Gradient-descent path extraction on an arrival-time field.

use crate::voxel_map::{VoxelIndex, NEIGHBORS_26};
use crate::Vec3;

use super::fmm::ArrivalTimeField;
use super::PlanError;

/// Geometric path from the robot voxel to the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadPath {
    pub points: Vec<Vec3>,
}

impl LookaheadPath {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total polyline length.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Cumulative arc length at each point.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            if i > 0 {
                acc += (p - self.points[i - 1]).norm();
            }
            out.push(acc);
        }
        out
    }
}

/// Arrival times sampled continuously: voxels the wavefront never froze
/// read as `1.05 * max frozen T`.
pub struct TimeSampler<'a> {
    field: &'a ArrivalTimeField,
    unreached: f64,
}

impl<'a> TimeSampler<'a> {
    pub fn new(field: &'a ArrivalTimeField) -> Self {
        let unreached = field.max_time().max(field.geometry().voxel_size()) * 1.05;
        Self { field, unreached }
    }

    fn voxel(&self, c: VoxelIndex) -> f64 {
        if self.field.is_frozen(c) {
            self.field.time(c)
        } else {
            self.unreached
        }
    }

    /// Trilinear interpolation at a world position.
    pub fn at(&self, p: &Vec3) -> f64 {
        let u = self.field.geometry().to_lattice(p);
        let base = [u.x.floor(), u.y.floor(), u.z.floor()];
        let f = [u.x - base[0], u.y - base[1], u.z - base[2]];
        let b = VoxelIndex::new(base[0] as i32, base[1] as i32, base[2] as i32);
        let mut acc = 0.0;
        for dk in 0..2 {
            for dj in 0..2 {
                for di in 0..2 {
                    let w = if di == 1 { f[0] } else { 1.0 - f[0] }
                        * if dj == 1 { f[1] } else { 1.0 - f[1] }
                        * if dk == 1 { f[2] } else { 1.0 - f[2] };
                    if w != 0.0 {
                        acc += w * self.voxel(b.offset([di, dj, dk]));
                    }
                }
            }
        }
        acc
    }

    /// Sobel 3x3x3 gradient estimate (difference along one axis, [1 2 1]
    /// smoothing along the other two) at one-voxel offsets.
    pub fn sobel_gradient(&self, p: &Vec3) -> Vec3 {
        let s = self.field.geometry().voxel_size();
        let smooth = [1.0, 2.0, 1.0];
        let mut g = Vec3::zeros();
        for (k, wk) in smooth.iter().enumerate() {
            for (j, wj) in smooth.iter().enumerate() {
                for (i, wi) in smooth.iter().enumerate() {
                    let o = Vec3::new(i as f64 - 1.0, j as f64 - 1.0, k as f64 - 1.0);
                    let t = self.at(&(p + o * s));
                    g.x += o.x * wj * wk * t;
                    g.y += o.y * wi * wk * t;
                    g.z += o.z * wi * wj * t;
                }
            }
        }
        g / (32.0 * s)
    }
}

/// Descend from the goal position to the source voxel.
///
/// Each iteration tries a half-voxel step against the Sobel gradient and
/// keeps it only when the interpolated time strictly drops and the new
/// position lies in a frozen voxel. Otherwise the path jumps to the lowest
/// frozen voxel center within `sqrt(3)` voxels whose time is below the
/// current one. The result runs source center to `goal`.
pub fn extract_path(field: &ArrivalTimeField, goal: &Vec3) -> Result<LookaheadPath, PlanError> {
    let g = field.geometry();
    let s = g.voxel_size();
    let source = field.source();
    let src_pos = g.center(source);
    let goal_voxel = g.nearest_voxel(goal);
    if !field.is_frozen(goal_voxel) {
        return Err(PlanError::GoalNotReached);
    }
    if goal_voxel == source {
        return Ok(LookaheadPath::new(vec![src_pos, *goal]));
    }
    let sampler = TimeSampler::new(field);
    let t_goal = field.time(goal_voxel);
    // Speeds never exceed 1, so the descent length is at most T and this
    // many half-voxel steps cover it with a wide margin.
    let cap = 10 * ((t_goal / (s / 2.0)).ceil() as usize) + 10;
    let reach = 3f64.sqrt() * s + 1e-9;

    let mut points = vec![*goal];
    let mut x = *goal;
    let mut tx = sampler.at(&x);
    let mut iterations = 0;
    while (x - src_pos).norm() > s + 1e-9 {
        iterations += 1;
        if iterations > cap {
            return Err(PlanError::DescentStalled);
        }
        let grad = sampler.sobel_gradient(&x);
        let mut advanced = false;
        if grad.norm() > 0.0 && grad.iter().all(|v| v.is_finite()) {
            let cand = x - grad.normalize() * (s / 2.0);
            let tc = sampler.at(&cand);
            if tc < tx && field.is_frozen(g.nearest_voxel(&cand)) {
                x = cand;
                tx = tc;
                advanced = true;
            }
        }
        if !advanced {
            let c = g.nearest_voxel(&x);
            let mut best: Option<(f64, VoxelIndex)> = None;
            for n in std::iter::once(c).chain(NEIGHBORS_26.iter().map(|&d| c.offset(d))) {
                if !field.is_frozen(n) || (g.center(n) - x).norm() > reach {
                    continue;
                }
                let tn = field.time(n);
                if tn < tx && best.map_or(true, |(bt, _)| tn < bt) {
                    best = Some((tn, n));
                }
            }
            let Some((tn, n)) = best else {
                return Err(PlanError::DescentStalled);
            };
            x = g.center(n);
            tx = tn;
        }
        points.push(x);
    }
    if (x - src_pos).norm() > 1e-12 {
        points.push(src_pos);
    }
    points.reverse();
    Ok(LookaheadPath::new(points))
}

#[cfg(test)]
mod tests {
    use super::super::fmm::{fmm_full, SpeedField};
    use super::*;
    use crate::voxel_map::{compute_esdf_from_mask, GridGeometry};

    fn geom(n: [usize; 3]) -> GridGeometry {
        GridGeometry::new(n, 0.2, Vec3::zeros()).unwrap()
    }

    #[test]
    fn straight_corridor_is_nearly_straight() {
        let g = geom([40, 7, 7]);
        let mut mask = vec![false; g.len()];
        for i in 0..40 {
            for j in 1..6 {
                for k in 1..6 {
                    mask[g.linear(VoxelIndex::new(i, j, k))] = true;
                }
            }
        }
        let src = VoxelIndex::new(1, 3, 3);
        let f = fmm_full(&g, &mask, &SpeedField::uniform(&g, 1.0), src);
        let goal = g.center(VoxelIndex::new(38, 3, 3));
        let path = extract_path(&f, &goal).unwrap();
        let straight = (goal - g.center(src)).norm();
        assert!(path.length() <= 1.15 * straight, "{} vs {straight}", path.length());
        assert_eq!(path.points[0], g.center(src));
        assert_eq!(*path.points.last().unwrap(), goal);
        let sampler = TimeSampler::new(&f);
        for w in path.points.windows(2) {
            assert!((w[1] - w[0]).norm() <= 3f64.sqrt() * 0.2 + 1e-9);
            assert!(sampler.at(&w[1]) > sampler.at(&w[0]));
        }
    }

    #[test]
    fn adjacent_goal_gives_two_points() {
        let g = geom([5, 5, 5]);
        let mask = vec![true; g.len()];
        let src = VoxelIndex::new(2, 2, 2);
        let f = fmm_full(&g, &mask, &SpeedField::uniform(&g, 1.0), src);
        let goal = g.center(VoxelIndex::new(3, 2, 2));
        let path = extract_path(&f, &goal).unwrap();
        assert_eq!(path.points, vec![g.center(src), goal]);
    }

    #[test]
    fn unfrozen_goal_is_rejected() {
        let g = geom([5, 1, 1]);
        let mut mask = vec![true; g.len()];
        mask[2] = false;
        let f = fmm_full(&g, &mask, &SpeedField::uniform(&g, 1.0), VoxelIndex::new(0, 0, 0));
        assert_eq!(
            extract_path(&f, &g.center(VoxelIndex::new(4, 0, 0))),
            Err(PlanError::GoalNotReached)
        );
    }

    #[test]
    fn bent_corridor_keeps_clearance() {
        // L-shaped corridor 5 voxels wide; ESDF-based speed.
        let g = geom([30, 30, 5]);
        let mut occ = vec![true; g.len()];
        for idx in 0..g.len() {
            let c = g.index_of(idx);
            let leg1 = (1..=25).contains(&c.i) && (1..=5).contains(&c.j);
            let leg2 = (21..=25).contains(&c.i) && (1..=25).contains(&c.j);
            if (leg1 || leg2) && (1..=3).contains(&c.k) {
                occ[idx] = false;
            }
        }
        let esdf = compute_esdf_from_mask(&g, &occ, 4.0);
        let speed = super::super::fmm::compute_speed(&esdf, 0.2);
        let mask: Vec<bool> = occ.iter().map(|o| !o).collect();
        let src = VoxelIndex::new(2, 3, 2);
        let f = fmm_full(&g, &mask, &speed, src);
        let goal_v = VoxelIndex::new(23, 24, 2);
        let path = extract_path(&f, &g.center(goal_v)).unwrap();

        // Oracle: discrete steepest descent over frozen 26-neighbors.
        let mut c = goal_v;
        let mut min_d = esdf.distance(c);
        while c != src {
            let next = NEIGHBORS_26
                .iter()
                .map(|&d| c.offset(d))
                .filter(|n| f.is_frozen(*n))
                .min_by(|a, b| f.time(*a).total_cmp(&f.time(*b)))
                .unwrap();
            assert!(f.time(next) < f.time(c));
            c = next;
            min_d = min_d.min(esdf.distance(c));
        }
        for p in &path.points {
            let v = g.nearest_voxel(p);
            assert!(f.is_frozen(v));
            assert!(esdf.distance(v) >= min_d - 0.2, "{p:?}");
        }
    }
}
