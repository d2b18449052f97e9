//! Frontier detection, contiguous clustering and greedy grouping.
//!
//! A frontier voxel is a free voxel with at least one unseen voxel among its
//! 26 neighbors. Voxels outside the grid count as unseen, so free space that
//! touches the map edge stays attractive.

use std::collections::{HashMap, VecDeque};

use rand::Rng;

use crate::voxel_map::{GridGeometry, MapSnapshot, VoxelClass, VoxelIndex, NEIGHBORS_26};
use crate::Vec3;

/// Two frontier voxels are contiguous when their centers are at most this
/// many voxel sizes apart.
pub const CONTIGUITY_RADIUS: f64 = 1.75;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierSet {
    /// Id of the snapshot the set was computed from.
    pub snapshot_id: u64,
    pub voxels: Vec<VoxelIndex>,
}

impl FrontierSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCluster {
    pub members: Vec<VoxelIndex>,
}

impl FrontierCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierGroup {
    pub seed: VoxelIndex,
    pub members: Vec<VoxelIndex>,
    /// Mean of the member voxel centers.
    pub centroid: Vec3,
}

/// All free voxels with an unseen 26-neighbor, in storage order.
pub fn find_frontier(snapshot: &MapSnapshot) -> FrontierSet {
    let g = snapshot.geometry();
    let voxels = (0..g.len())
        .filter(|&idx| snapshot.classes[idx] == VoxelClass::Free)
        .map(|idx| g.index_of(idx))
        .filter(|&c| {
            NEIGHBORS_26
                .iter()
                .any(|&d| snapshot.class(c.offset(d)) == VoxelClass::Unseen)
        })
        .collect();
    FrontierSet {
        snapshot_id: snapshot.id,
        voxels,
    }
}

/// Lattice offsets whose center distance is within the contiguity radius.
pub fn contiguity_offsets() -> Vec<[i32; 3]> {
    let r = CONTIGUITY_RADIUS.floor() as i32 + 1;
    let mut out = Vec::new();
    for k in -r..=r {
        for j in -r..=r {
            for i in -r..=r {
                let d2 = (i * i + j * j + k * k) as f64;
                if d2 > 0.0 && d2 <= CONTIGUITY_RADIUS * CONTIGUITY_RADIUS {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Connected components of the frontier under the contiguity relation.
/// Clusters appear in order of their first member in `frontier`.
pub fn cluster_contiguous(frontier: &FrontierSet) -> Vec<FrontierCluster> {
    let offsets = contiguity_offsets();
    let lookup: HashMap<VoxelIndex, usize> = frontier
        .voxels
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let mut seen = vec![false; frontier.voxels.len()];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..frontier.voxels.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            let c = frontier.voxels[i];
            members.push(c);
            for d in &offsets {
                if let Some(&j) = lookup.get(&c.offset(*d)) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        clusters.push(FrontierCluster { members });
    }
    clusters
}

/// Union of the clusters with at least `min_size` members, sorted in storage
/// order (z, then y, then x).
pub fn filter_clusters(
    clusters: &[FrontierCluster],
    min_size: usize,
    snapshot_id: u64,
) -> FrontierSet {
    let mut voxels: Vec<VoxelIndex> = clusters
        .iter()
        .filter(|c| c.size() >= min_size)
        .flat_map(|c| c.members.iter().copied())
        .collect();
    voxels.sort_by_key(|c| (c.k, c.j, c.i));
    FrontierSet {
        snapshot_id,
        voxels,
    }
}

/// Greedy radius grouping.
///
/// Repeatedly draws an ungrouped voxel uniformly at random as the seed and
/// moves every ungrouped voxel within `radius` meters of the seed center into
/// a new group. Exactly one RNG draw is made per group.
pub fn group_greedy<R: Rng + ?Sized>(
    filtered: &FrontierSet,
    geometry: &GridGeometry,
    radius: f64,
    rng: &mut R,
) -> Vec<FrontierGroup> {
    assert!(radius > 0.0, "group radius must be positive");
    let mut remaining = filtered.voxels.clone();
    let mut groups = Vec::new();
    while !remaining.is_empty() {
        let seed = remaining[rng.gen_range(0..remaining.len())];
        let seed_pos = geometry.center(seed);
        let (members, rest): (Vec<_>, Vec<_>) = remaining
            .into_iter()
            .partition(|&c| (geometry.center(c) - seed_pos).norm() <= radius);
        remaining = rest;
        let centroid = members
            .iter()
            .fold(Vec3::zeros(), |acc, &c| acc + geometry.center(c))
            / members.len() as f64;
        groups.push(FrontierGroup {
            seed,
            members,
            centroid,
        });
    }
    groups
}
