use super::{GridGeometry, VoxelIndex};
use crate::Vec3;

/// Visit every voxel the segment `from -> to` passes through, in order.
///
/// Voxel `c` owns the half-open lattice box `[c - 0.5, c + 0.5)` on each axis,
/// so the first voxel is `round(from)` and the last is `round(to)`. Exactly one
/// axis is stepped at a time; when the segment crosses several faces at the
/// same parameter the lowest axis (x, then y, then z) is stepped first, which
/// keeps the traversal face-connected and deterministic.
///
/// Indices are not bounds-checked. `visit` returns `false` to stop early; the
/// return value is `true` when the whole segment was visited.
pub fn trace_voxels<F>(geometry: &GridGeometry, from: &Vec3, to: &Vec3, mut visit: F) -> bool
where
    F: FnMut(VoxelIndex) -> bool,
{
    let u0 = geometry.to_lattice(from);
    let u1 = geometry.to_lattice(to);
    let start = geometry.nearest_voxel(from);
    let end = geometry.nearest_voxel(to);

    let mut cur = start.as_array();
    let end = end.as_array();
    let mut remaining = [0i64; 3];
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];

    for a in 0..3 {
        let diff = end[a] as i64 - cur[a] as i64;
        remaining[a] = diff.abs();
        let du = u1[a] - u0[a];
        if diff > 0 {
            step[a] = 1;
            if du > 0.0 {
                t_max[a] = (cur[a] as f64 + 0.5 - u0[a]) / du;
                t_delta[a] = 1.0 / du;
            }
        } else if diff < 0 {
            step[a] = -1;
            if du < 0.0 {
                t_max[a] = (u0[a] - (cur[a] as f64 - 0.5)) / -du;
                t_delta[a] = 1.0 / -du;
            }
        }
    }

    if !visit(VoxelIndex::new(cur[0], cur[1], cur[2])) {
        return false;
    }
    let mut left: i64 = remaining.iter().sum();
    while left > 0 {
        let mut axis = usize::MAX;
        let mut best = f64::INFINITY;
        for a in 0..3 {
            if remaining[a] == 0 {
                continue;
            }
            // Strict comparison keeps the lowest axis on ties.
            if axis == usize::MAX || t_max[a] < best {
                axis = a;
                best = t_max[a];
            }
        }
        cur[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        remaining[axis] -= 1;
        left -= 1;
        if !visit(VoxelIndex::new(cur[0], cur[1], cur[2])) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> GridGeometry {
        GridGeometry::new([40, 40, 40], 0.25, Vec3::new(-1.0, -1.0, -1.0)).unwrap()
    }

    fn collect(g: &GridGeometry, a: Vec3, b: Vec3) -> Vec<VoxelIndex> {
        let mut out = Vec::new();
        trace_voxels(g, &a, &b, |v| {
            out.push(v);
            true
        });
        out
    }

    #[test]
    fn axis_aligned_ray() {
        let g = GridGeometry::new([10, 10, 10], 1.0, Vec3::zeros()).unwrap();
        let v = collect(&g, Vec3::new(1.0, 2.0, 3.0), Vec3::new(5.0, 2.0, 3.0));
        let xs: Vec<i32> = v.iter().map(|c| c.i).collect();
        assert_eq!(xs, vec![1, 2, 3, 4, 5]);
        assert!(v.iter().all(|c| c.j == 2 && c.k == 3));
    }

    #[test]
    fn exact_corner_crossing_steps_lowest_axis_first() {
        let g = GridGeometry::new([10, 10, 10], 1.0, Vec3::zeros()).unwrap();
        let v = collect(&g, Vec3::new(1.0, 1.0, 0.0), Vec3::new(2.0, 2.0, 0.0));
        assert_eq!(
            v,
            vec![
                VoxelIndex::new(1, 1, 0),
                VoxelIndex::new(2, 1, 0),
                VoxelIndex::new(2, 2, 0)
            ]
        );
    }

    #[test]
    fn early_stop() {
        let g = GridGeometry::new([10, 10, 10], 1.0, Vec3::zeros()).unwrap();
        let mut n = 0;
        let done = trace_voxels(&g, &Vec3::zeros(), &Vec3::new(8.0, 0.0, 0.0), |_| {
            n += 1;
            n < 3
        });
        assert!(!done);
        assert_eq!(n, 3);
    }

    proptest! {
        #[test]
        fn traversal_is_face_connected_and_covers_samples(
            ax in -0.9f64..8.5, ay in -0.9f64..8.5, az in -0.9f64..8.5,
            bx in -0.9f64..8.5, by in -0.9f64..8.5, bz in -0.9f64..8.5,
        ) {
            let g = geom();
            let a = Vec3::new(ax, ay, az);
            let b = Vec3::new(bx, by, bz);
            let v = collect(&g, a, b);
            prop_assert_eq!(v[0], g.nearest_voxel(&a));
            prop_assert_eq!(*v.last().unwrap(), g.nearest_voxel(&b));
            for w in v.windows(2) {
                prop_assert_eq!(w[0].dist2(w[1]), 1);
            }
            // Points sampled along the segment land in visited voxels,
            // except within rounding distance of a voxel face.
            let set: std::collections::HashSet<_> = v.iter().copied().collect();
            for n in 0..=200 {
                let p = a + (b - a) * (n as f64 / 200.0);
                let u = g.to_lattice(&p);
                let near_face = (0..3).any(|k| ((u[k] - u[k].floor()) - 0.5).abs() < 1e-6);
                if !near_face {
                    prop_assert!(set.contains(&g.nearest_voxel(&p)));
                }
            }
        }
    }
}
