//! First-order upwind fast marching over a traversable voxel mask.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::voxel_map::{EsdfField, GridGeometry, VoxelIndex, NEIGHBORS_6};

/// Lower bound on arrival times used when computing utilities.
pub const T_EPSILON: f64 = 1e-6;

/// Wave propagation speed per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    pub e: f64,
    pub speed: Vec<f64>,
}

impl SpeedField {
    /// Constant speed everywhere; used for testing against distance oracles.
    pub fn uniform(geometry: &GridGeometry, value: f64) -> Self {
        Self {
            e: 0.0,
            speed: vec![value; geometry.len()],
        }
    }
}

/// `S = (tanh(D - e) + 1) / 2` per voxel.
pub fn speed_from_distance(d: f64, e: f64) -> f64 {
    0.5 * ((d - e).tanh() + 1.0)
}

pub fn compute_speed(esdf: &EsdfField, e: f64) -> SpeedField {
    SpeedField {
        e,
        speed: esdf
            .values()
            .iter()
            .map(|&d| speed_from_distance(d, e))
            .collect(),
    }
}

/// Arrival times from one source voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTimeField {
    geometry: GridGeometry,
    source: VoxelIndex,
    /// `+inf` where not frozen.
    time: Vec<f64>,
    frozen: Vec<bool>,
    /// Linear indices in the order they were frozen.
    freeze_order: Vec<usize>,
}

impl ArrivalTimeField {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn source(&self) -> VoxelIndex {
        self.source
    }

    /// Frozen arrival time, `+inf` for voxels the wavefront never fixed.
    pub fn time(&self, c: VoxelIndex) -> f64 {
        if self.geometry.contains(c) {
            self.time[self.geometry.linear(c)]
        } else {
            f64::INFINITY
        }
    }

    pub fn is_frozen(&self, c: VoxelIndex) -> bool {
        self.geometry.contains(c) && self.frozen[self.geometry.linear(c)]
    }

    pub fn freeze_order(&self) -> &[usize] {
        &self.freeze_order
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    /// Largest frozen arrival time (0 when only the source froze).
    pub fn max_time(&self) -> f64 {
        self.freeze_order
            .last()
            .map(|&i| self.time[i])
            .unwrap_or(0.0)
    }

    /// Frozen voxels with their times, in freeze order.
    pub fn frozen_entries(&self) -> impl Iterator<Item = (VoxelIndex, f64)> + '_ {
        self.freeze_order
            .iter()
            .map(|&i| (self.geometry.index_of(i), self.time[i]))
    }
}

/// A goal as seen by the wavefront: its voxel and its gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalTarget {
    pub voxel: VoxelIndex,
    pub gain: f64,
}

/// One goal reached by the wavefront.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalEvaluation {
    pub goal: usize,
    pub arrival_time: f64,
    pub utility: f64,
    /// Position of the goal voxel in the freeze order.
    pub freeze_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmmOutcome {
    pub field: ArrivalTimeField,
    /// Goals evaluated before the expansion stopped, in freeze order.
    pub evaluated: Vec<GoalEvaluation>,
    /// Index of the best goal, `None` when no goal voxel froze.
    pub best: Option<usize>,
}

#[derive(Clone, Copy, PartialEq)]
struct Trial {
    time: f64,
    index: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on time, then on linear index.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solve the upwind quadratic `sum_i (T - a_i)^2 = (h / S)^2` using the
/// smallest per-axis neighbor values.
fn upwind_update(mut a: [f64; 3], h_over_s: f64) -> f64 {
    a.sort_by(|x, y| x.total_cmp(y));
    let mut t = a[0] + h_over_s;
    if t > a[1] {
        let diff = a[0] - a[1];
        t = 0.5 * (a[0] + a[1] + (2.0 * h_over_s * h_over_s - diff * diff).sqrt());
        if t > a[2] {
            let sum = a[0] + a[1] + a[2];
            let sum_sq = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
            let disc = sum * sum - 3.0 * (sum_sq - h_over_s * h_over_s);
            t = (sum + disc.sqrt()) / 3.0;
        }
    }
    t
}

struct Marcher<'a> {
    geometry: &'a GridGeometry,
    traversable: &'a [bool],
    speed: &'a [f64],
    time: Vec<f64>,
    frozen: Vec<bool>,
    freeze_order: Vec<usize>,
    heap: BinaryHeap<Trial>,
}

impl<'a> Marcher<'a> {
    fn new(
        geometry: &'a GridGeometry,
        traversable: &'a [bool],
        speed: &'a SpeedField,
        source: VoxelIndex,
    ) -> Self {
        assert_eq!(traversable.len(), geometry.len(), "mask size mismatch");
        assert_eq!(speed.speed.len(), geometry.len(), "speed size mismatch");
        assert!(
            geometry.contains(source) && traversable[geometry.linear(source)],
            "source must be a traversable voxel"
        );
        let n = geometry.len();
        let mut m = Self {
            geometry,
            traversable,
            speed: &speed.speed,
            time: vec![f64::INFINITY; n],
            frozen: vec![false; n],
            freeze_order: Vec::new(),
            heap: BinaryHeap::new(),
        };
        let s = geometry.linear(source);
        m.time[s] = 0.0;
        m.heap.push(Trial { time: 0.0, index: s });
        m
    }

    /// Freeze the next voxel and update its neighbors.
    fn step(&mut self) -> Option<(usize, f64)> {
        let Trial { time, index } = loop {
            let t = self.heap.pop()?;
            if !self.frozen[t.index] && t.time == self.time[t.index] {
                break t;
            }
        };
        self.frozen[index] = true;
        self.freeze_order.push(index);
        let c = self.geometry.index_of(index);
        let h = self.geometry.voxel_size();
        for d in NEIGHBORS_6 {
            let n = c.offset(d);
            if !self.geometry.contains(n) {
                continue;
            }
            let ni = self.geometry.linear(n);
            if self.frozen[ni] || !self.traversable[ni] {
                continue;
            }
            let mut a = [f64::INFINITY; 3];
            for (axis, slot) in a.iter_mut().enumerate() {
                for sign in [-1, 1] {
                    let mut o = [0; 3];
                    o[axis] = sign;
                    let m = n.offset(o);
                    if self.geometry.contains(m) {
                        let mi = self.geometry.linear(m);
                        if self.frozen[mi] {
                            *slot = slot.min(self.time[mi]);
                        }
                    }
                }
            }
            let candidate = upwind_update(a, h / self.speed[ni]).max(time);
            if candidate < self.time[ni] {
                self.time[ni] = candidate;
                self.heap.push(Trial {
                    time: candidate,
                    index: ni,
                });
            }
        }
        Some((index, time))
    }

    fn finish(self, source: VoxelIndex) -> ArrivalTimeField {
        let Marcher {
            geometry,
            mut time,
            frozen,
            freeze_order,
            ..
        } = self;
        for (t, f) in time.iter_mut().zip(&frozen) {
            if !f {
                *t = f64::INFINITY;
            }
        }
        ArrivalTimeField {
            geometry: geometry.clone(),
            source,
            time,
            frozen,
            freeze_order,
        }
    }
}

/// Run the wavefront until every reachable traversable voxel is frozen.
pub fn fmm_full(
    geometry: &GridGeometry,
    traversable: &[bool],
    speed: &SpeedField,
    source: VoxelIndex,
) -> ArrivalTimeField {
    let mut m = Marcher::new(geometry, traversable, speed, source);
    while m.step().is_some() {}
    m.finish(source)
}

fn pick_best(evaluated: &[GoalEvaluation]) -> Option<usize> {
    // Evaluations arrive in freeze order and, within one voxel, in goal
    // order, so keeping the first strict maximum applies both tie rules.
    let mut best: Option<&GoalEvaluation> = None;
    for ev in evaluated {
        if best.map_or(true, |b| ev.utility > b.utility) {
            best = Some(ev);
        }
    }
    best.map(|b| b.goal)
}

fn evaluate_voxel(
    goals: &[GoalTarget],
    by_voxel: &std::collections::HashMap<usize, Vec<usize>>,
    index: usize,
    time: f64,
    rank: usize,
    done: &mut [bool],
    evaluated: &mut Vec<GoalEvaluation>,
) {
    if let Some(ids) = by_voxel.get(&index) {
        for &g in ids {
            done[g] = true;
            let t = time.max(T_EPSILON);
            evaluated.push(GoalEvaluation {
                goal: g,
                arrival_time: t,
                utility: goals[g].gain / t,
                freeze_rank: rank,
            });
        }
    }
}

fn goal_lookup(
    geometry: &GridGeometry,
    goals: &[GoalTarget],
) -> std::collections::HashMap<usize, Vec<usize>> {
    let mut by_voxel: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    for (i, g) in goals.iter().enumerate() {
        if geometry.contains(g.voxel) {
            by_voxel.entry(geometry.linear(g.voxel)).or_default().push(i);
        }
    }
    by_voxel
}

/// Expand from `source`, evaluating `U = G / T` as goal voxels freeze, and
/// stop once the best evaluated utility reaches the bound
/// `max unevaluated gain / current arrival time`.
pub fn fmm_expand(
    geometry: &GridGeometry,
    traversable: &[bool],
    speed: &SpeedField,
    source: VoxelIndex,
    goals: &[GoalTarget],
) -> FmmOutcome {
    let by_voxel = goal_lookup(geometry, goals);
    let mut done = vec![false; goals.len()];
    let mut evaluated = Vec::new();
    let mut best_u = f64::NEG_INFINITY;
    let mut m = Marcher::new(geometry, traversable, speed, source);
    while let Some((index, time)) = m.step() {
        let before = evaluated.len();
        let rank = m.freeze_order.len() - 1;
        evaluate_voxel(goals, &by_voxel, index, time, rank, &mut done, &mut evaluated);
        for ev in &evaluated[before..] {
            best_u = best_u.max(ev.utility);
        }
        if evaluated.is_empty() {
            continue;
        }
        let pending_gain = goals
            .iter()
            .zip(&done)
            .filter(|(_, d)| !**d)
            .map(|(g, _)| g.gain)
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
        let Some(pending_gain) = pending_gain else {
            break;
        };
        let bound = if pending_gain <= 0.0 {
            0.0
        } else {
            pending_gain / time.max(T_EPSILON)
        };
        if best_u >= bound {
            break;
        }
    }
    let best = pick_best(&evaluated);
    FmmOutcome {
        field: m.finish(source),
        evaluated,
        best,
    }
}

/// Exhaustive variant: expand everything, then evaluate every reached goal.
pub fn fmm_exhaustive(
    geometry: &GridGeometry,
    traversable: &[bool],
    speed: &SpeedField,
    source: VoxelIndex,
    goals: &[GoalTarget],
) -> FmmOutcome {
    let field = fmm_full(geometry, traversable, speed, source);
    let by_voxel = goal_lookup(geometry, goals);
    let mut done = vec![false; goals.len()];
    let mut evaluated = Vec::new();
    for (rank, &index) in field.freeze_order.iter().enumerate() {
        evaluate_voxel(
            goals,
            &by_voxel,
            index,
            field.time[index],
            rank,
            &mut done,
            &mut evaluated,
        );
    }
    let best = pick_best(&evaluated);
    FmmOutcome {
        field,
        evaluated,
        best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn geom(n: [usize; 3]) -> GridGeometry {
        GridGeometry::new(n, 0.2, Vec3::zeros()).unwrap()
    }

    #[test]
    fn speed_examples() {
        assert_eq!(speed_from_distance(0.6, 0.6), 0.5);
        // (tanh(x) + 1) / 2 = 1 / (1 + exp(-2x))
        let logistic = |x: f64| 1.0 / (1.0 + (-2.0 * x).exp());
        assert!((speed_from_distance(4.6, 0.6) - logistic(4.0)).abs() < 1e-12);
        assert!((speed_from_distance(-3.4, 0.6) - logistic(-4.0)).abs() < 1e-12);
        assert!((logistic(4.0) - 0.999665).abs() < 1e-6);
        for d in [-5.0, -0.3, 0.0, 0.6, 2.0, 4.0] {
            let s = speed_from_distance(d, 0.6);
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn upwind_update_cases() {
        let inf = f64::INFINITY;
        assert_eq!(upwind_update([0.0, inf, inf], 1.0), 1.0);
        let two = upwind_update([1.0, 1.0, inf], 1.0);
        assert!((two - (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
        let three = upwind_update([1.0, 1.0, 1.0], 1.0);
        assert!((three - (1.0 + 1.0 / 3f64.sqrt())).abs() < 1e-12);
        // Far-apart neighbors fall back to the single-term update.
        assert_eq!(upwind_update([0.0, 5.0, 7.0], 1.0), 1.0);
    }

    #[test]
    fn corridor_arrival_time() {
        let g = geom([30, 3, 3]);
        let mut mask = vec![false; g.len()];
        for i in 0..30 {
            mask[g.linear(VoxelIndex::new(i, 1, 1))] = true;
        }
        let speed = SpeedField::uniform(&g, 1.0);
        let f = fmm_full(&g, &mask, &speed, VoxelIndex::new(0, 1, 1));
        let l = 29.0 * 0.2;
        let t = f.time(VoxelIndex::new(29, 1, 1));
        assert!((t - l).abs() <= 0.1 * l);
        assert!(f.time(VoxelIndex::new(5, 0, 1)).is_infinite());
    }

    #[test]
    fn goal_on_source_is_clamped() {
        let g = geom([4, 4, 4]);
        let mask = vec![true; g.len()];
        let speed = SpeedField::uniform(&g, 1.0);
        let src = VoxelIndex::new(1, 1, 1);
        let out = fmm_expand(&g, &mask, &speed, src, &[GoalTarget { voxel: src, gain: 3.0 }]);
        assert_eq!(out.best, Some(0));
        assert_eq!(out.evaluated[0].arrival_time, T_EPSILON);
        assert!(out.evaluated[0].utility.is_finite());
    }

    #[test]
    fn unreachable_goals_give_no_best() {
        let g = geom([6, 1, 1]);
        let mut mask = vec![true; g.len()];
        mask[3] = false;
        let speed = SpeedField::uniform(&g, 1.0);
        let out = fmm_expand(
            &g,
            &mask,
            &speed,
            VoxelIndex::new(0, 0, 0),
            &[GoalTarget { voxel: VoxelIndex::new(5, 0, 0), gain: 1.0 }],
        );
        assert_eq!(out.best, None);
    }

    #[test]
    fn larger_gain_wins_at_equal_time() {
        let g = geom([21, 1, 1]);
        let mask = vec![true; g.len()];
        let speed = SpeedField::uniform(&g, 1.0);
        let goals = [
            GoalTarget { voxel: VoxelIndex::new(5, 0, 0), gain: 2.0 },
            GoalTarget { voxel: VoxelIndex::new(15, 0, 0), gain: 20.0 },
        ];
        let out = fmm_expand(&g, &mask, &speed, VoxelIndex::new(10, 0, 0), &goals);
        assert_eq!(out.best, Some(1));
    }

    /// Six-connected Dijkstra path length over the mask.
    fn dijkstra(g: &GridGeometry, mask: &[bool], src: VoxelIndex) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; g.len()];
        let mut heap = BinaryHeap::new();
        dist[g.linear(src)] = 0.0;
        heap.push(Trial { time: 0.0, index: g.linear(src) });
        while let Some(Trial { time, index }) = heap.pop() {
            if time > dist[index] {
                continue;
            }
            for n in g.neighbors(g.index_of(index), &NEIGHBORS_6) {
                let ni = g.linear(n);
                if mask[ni] && time + g.voxel_size() < dist[ni] {
                    dist[ni] = time + g.voxel_size();
                    heap.push(Trial { time: dist[ni], index: ni });
                }
            }
        }
        dist
    }

    proptest! {
        #[test]
        fn arrival_times_are_sandwiched(seed in 0u64..10_000) {
            let mut rng = crate::MissionRng::seed_from_u64(seed);
            let g = geom([9, 8, 7]);
            let mut mask: Vec<bool> = (0..g.len()).map(|_| rng.gen_bool(0.75)).collect();
            let src = VoxelIndex::new(4, 4, 3);
            mask[g.linear(src)] = true;
            let speed = SpeedField::uniform(&g, 1.0);
            let f = fmm_full(&g, &mask, &speed, src);
            let dj = dijkstra(&g, &mask, src);
            let mut last = 0.0;
            for &i in f.freeze_order() {
                let t = f.times()[i];
                prop_assert!(t >= last);
                last = t;
                let eu = (g.center(g.index_of(i)) - g.center(src)).norm();
                prop_assert!(t >= eu - 1e-9 && t <= dj[i] + 1e-9);
            }
            // Everything Dijkstra reaches, the wavefront reaches.
            for i in 0..g.len() {
                prop_assert_eq!(dj[i].is_finite(), f.times()[i].is_finite());
            }
        }

        #[test]
        fn early_stop_matches_exhaustive(seed in 0u64..10_000) {
            let mut rng = crate::MissionRng::seed_from_u64(seed);
            let g = geom([8, 8, 6]);
            let mut mask: Vec<bool> = (0..g.len()).map(|_| rng.gen_bool(0.8)).collect();
            let src = VoxelIndex::new(1, 1, 1);
            mask[g.linear(src)] = true;
            let speed = SpeedField {
                e: 0.0,
                speed: (0..g.len()).map(|_| rng.gen_range(0.05..1.0)).collect(),
            };
            let goals: Vec<GoalTarget> = (0..rng.gen_range(1..10))
                .map(|_| GoalTarget {
                    voxel: VoxelIndex::new(rng.gen_range(0..8), rng.gen_range(0..8), rng.gen_range(0..6)),
                    gain: rng.gen_range(0..40) as f64,
                })
                .collect();
            let a = fmm_expand(&g, &mask, &speed, src, &goals);
            let b = fmm_exhaustive(&g, &mask, &speed, src, &goals);
            prop_assert_eq!(a.best, b.best);
        }
    }
}
