//! Ring and group decomposition of a dataset around a reference solution `A*`.
//!
//! Each cluster `P_i` is cut into rings by the ratio `d^z(p, A*) / Δ_i`:
//! ring `(i, j)` holds the points with `2^j Δ_i ≤ d^z(p, A*) < 2^{j+1} Δ_i`.
//! Rings with `j ≤ z·log2(ε/z)` are *inner*, rings with
//! `j ≥ 2z·log2(z/ε)` are merged per cluster into the *outer* ring, and the
//! rest are *main* rings.
//!
//! Main rings on the same level `j` are bucketed by their share of the level
//! cost, `b = ⌊log2(cost(R_ij) / cost(R(j)))⌋`, and each nonempty
//! `(j, b)` bucket with `z·log2(ε/4z) − log2 k < b ≤ 0` becomes a main group.
//! Outer rings are bucketed the same way against the total outer cost.
//! Everything else (inner rings, light rings below the `b` range) is
//! leftover and gets represented by the centers of `A*`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::geometry::{pow_from_sq, ClusteringParams, WeightedPointSet};
use crate::seeding::ApproxSolution;
use crate::geometry::{assign_clusters, dist_sq_slice};
use crate::error::Result;

/// Slack applied toward main-ring membership at the inner/outer thresholds.
pub const THRESHOLD_SLACK: f64 = 1e-12;

/// Constant in the group-count bound `c_g · z² · log2(k/ε) · log2(z/ε)`.
///
/// Each level holds at most `min(k, #b)` groups, so the count is bounded by
/// `(#levels + 1) · min(k, #b)`; that ratio stays below 6.1 for every
/// `k ≥ 2`, `z ∈ [1, 3]`, `ε ≤ 0.5`.
pub const GROUP_COUNT_CONST: f64 = 8.0;

pub fn group_count_bound(k: usize, z: f64, eps: f64) -> f64 {
    GROUP_COUNT_CONST * z * z * (k as f64 / eps).log2() * (z / eps).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RingIndex {
    pub cluster: usize,
    pub level: i32,
}

#[inline]
fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// `⌊log2(ratio)⌋`, corrected so that `2^j·scale ≤ value < 2^{j+1}·scale` holds
/// exactly in floating point.
pub fn bucket_exponent(value: f64, scale: f64) -> i32 {
    debug_assert!(value > 0.0 && scale > 0.0);
    let mut j = (value / scale).log2().floor() as i32;
    while pow2(j) * scale > value {
        j -= 1;
    }
    while pow2(j + 1) * scale <= value {
        j += 1;
    }
    j
}

#[derive(Debug, Clone, Serialize)]
pub struct RingPartition {
    pub k: usize,
    pub z: f64,
    pub eps: f64,
    /// Cluster of every point under `A*` (lowest index on ties).
    pub assignment: Vec<usize>,
    /// `d^z(p, A*)` for every point.
    pub dist_z: Vec<f64>,
    /// Ring level of every point; `None` when `d = 0` or `Δ_i = 0`.
    pub levels: Vec<Option<i32>>,
    pub deltas: Vec<f64>,
    pub cluster_sizes: Vec<f64>,
    /// Main rings only.
    pub rings: BTreeMap<RingIndex, Vec<usize>>,
    pub ring_costs: BTreeMap<RingIndex, f64>,
    pub inner: Vec<Vec<usize>>,
    pub outer: Vec<Vec<usize>>,
    pub outer_costs: Vec<f64>,
    /// Largest level classified inner.
    pub inner_max_level: i32,
    /// Smallest level classified outer.
    pub outer_min_level: i32,
}

/// Level thresholds `(inner_max, outer_min)`; main levels lie strictly between.
pub fn level_thresholds(z: f64, eps: f64) -> (i32, i32) {
    let inner = (z * (eps / z).log2() - THRESHOLD_SLACK).floor() as i32;
    let outer = (2.0 * z * (z / eps).log2() + THRESHOLD_SLACK).ceil() as i32;
    (inner, outer)
}

/// Smallest retained group exponent: the least integer `b > z·log2(ε/4z) − log2 k`.
pub fn min_group_exponent(k: usize, z: f64, eps: f64) -> i32 {
    let bound = z * (eps / (4.0 * z)).log2() - (k as f64).log2();
    bound.floor() as i32 + 1
}

pub fn build_rings(p: &WeightedPointSet, sol: &ApproxSolution, params: &ClusteringParams) -> Result<RingPartition> {
    let z = params.z;
    let k = sol.k();
    let assignment = assign_clusters(p, &sol.centers)?;
    let dist_z: Vec<f64> = p
        .points()
        .iter()
        .zip(&assignment)
        .map(|(x, &a)| pow_from_sq(dist_sq_slice(x.coords(), sol.centers.center(a).coords()), z))
        .collect();

    let (inner_max_level, outer_min_level) = level_thresholds(z, params.eps);
    let mut levels = Vec::with_capacity(p.len());
    let mut rings: BTreeMap<RingIndex, Vec<usize>> = BTreeMap::new();
    let mut ring_costs: BTreeMap<RingIndex, f64> = BTreeMap::new();
    let mut inner = vec![Vec::new(); k];
    let mut outer = vec![Vec::new(); k];
    let mut outer_costs = vec![0.0; k];

    for (idx, (&a, &dz)) in assignment.iter().zip(&dist_z).enumerate() {
        let delta = sol.deltas[a];
        let level = (dz > 0.0 && delta > 0.0).then(|| bucket_exponent(dz, delta));
        levels.push(level);
        let w = p.weight(idx);
        match level {
            None => inner[a].push(idx),
            Some(j) if j <= inner_max_level => inner[a].push(idx),
            Some(j) if j >= outer_min_level => {
                outer[a].push(idx);
                outer_costs[a] += w * dz;
            }
            Some(j) => {
                let key = RingIndex { cluster: a, level: j };
                rings.entry(key).or_default().push(idx);
                *ring_costs.entry(key).or_default() += w * dz;
            }
        }
    }

    Ok(RingPartition {
        k,
        z,
        eps: params.eps,
        assignment,
        dist_z,
        levels,
        deltas: sol.deltas.clone(),
        cluster_sizes: sol.cluster_sizes.clone(),
        rings,
        ring_costs,
        inner,
        outer,
        outer_costs,
        inner_max_level,
        outer_min_level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Main { level: i32, b: i32 },
    Outer { b: i32 },
}

#[derive(Debug, Clone, Serialize)]
pub struct Group {
    pub kind: GroupKind,
    /// Point indices, ascending.
    pub members: Vec<usize>,
    pub cost_to_astar: f64,
    pub touched_clusters: BTreeSet<usize>,
}

impl Group {
    pub fn weight(&self, p: &WeightedPointSet) -> f64 {
        self.members.iter().map(|&i| p.weight(i)).sum()
    }
}

/// A ring that fell below the retained `b` range.
#[derive(Debug, Clone, Serialize)]
pub struct DroppedRing {
    pub cluster: usize,
    /// `None` for an outer ring.
    pub level: Option<i32>,
    pub cost: f64,
    /// Cost of the level (or of all outer rings) it was compared against.
    pub reference_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupStructure {
    pub groups: Vec<Group>,
    /// Weight of `P_i` outside every group.
    pub leftover: Vec<f64>,
    pub leftover_members: Vec<Vec<usize>>,
    pub dropped: Vec<DroppedRing>,
    pub min_b: i32,
    #[serde(skip)]
    pub ring_partition: RingPartition,
}

pub fn build_groups(rp: RingPartition, p: &WeightedPointSet) -> GroupStructure {
    let k = rp.k;
    let min_b = min_group_exponent(k, rp.z, rp.eps);

    let mut level_cost: BTreeMap<i32, f64> = BTreeMap::new();
    for (key, &c) in &rp.ring_costs {
        *level_cost.entry(key.level).or_default() += c;
    }
    let outer_total: f64 = rp.outer_costs.iter().sum();

    let mut main: BTreeMap<(i32, i32), Vec<usize>> = BTreeMap::new();
    let mut outer: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    let mut leftover_members: Vec<Vec<usize>> = rp.inner.clone();
    let mut dropped = Vec::new();

    for (key, members) in &rp.rings {
        let cost = rp.ring_costs[key];
        let total = level_cost[&key.level];
        let b = (cost > 0.0).then(|| bucket_exponent(cost, total));
        match b {
            Some(b) if b >= min_b => main.entry((key.level, b)).or_default().extend(members),
            _ => {
                leftover_members[key.cluster].extend(members);
                dropped.push(DroppedRing {
                    cluster: key.cluster,
                    level: Some(key.level),
                    cost,
                    reference_cost: total,
                });
            }
        }
    }
    for (i, members) in rp.outer.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let cost = rp.outer_costs[i];
        let b = (cost > 0.0).then(|| bucket_exponent(cost, outer_total));
        match b {
            Some(b) if b >= min_b => outer.entry(b).or_default().extend(members),
            _ => {
                leftover_members[i].extend(members);
                dropped.push(DroppedRing {
                    cluster: i,
                    level: None,
                    cost,
                    reference_cost: outer_total,
                });
            }
        }
    }

    let make = |kind: GroupKind, mut members: Vec<usize>| {
        members.sort_unstable();
        let cost_to_astar = members.iter().map(|&m| p.weight(m) * rp.dist_z[m]).sum();
        let touched_clusters = members.iter().map(|&m| rp.assignment[m]).collect();
        Group {
            kind,
            members,
            cost_to_astar,
            touched_clusters,
        }
    };
    let mut groups: Vec<Group> = main
        .into_iter()
        .map(|((level, b), m)| make(GroupKind::Main { level, b }, m))
        .collect();
    groups.extend(outer.into_iter().map(|(b, m)| make(GroupKind::Outer { b }, m)));

    for m in &mut leftover_members {
        m.sort_unstable();
    }
    let leftover = leftover_members
        .iter()
        .map(|m| m.iter().map(|&i| p.weight(i)).sum())
        .collect();
    debug_assert_eq!(leftover_members.len(), k);

    GroupStructure {
        groups,
        leftover,
        leftover_members,
        dropped,
        min_b,
        ring_partition: rp,
    }
}

/// Rings then groups in one call.
pub fn decompose(p: &WeightedPointSet, sol: &ApproxSolution, params: &ClusteringParams) -> Result<GroupStructure> {
    Ok(build_groups(build_rings(p, sol, params)?, p))
}

/// Summary row used by `--dump-groups`.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub id: usize,
    pub kind: &'static str,
    pub level: Option<i32>,
    pub b: i32,
    pub size: usize,
    pub weight: f64,
    pub cost: f64,
    pub clusters: Vec<usize>,
}

impl GroupStructure {
    pub fn summaries(&self, p: &WeightedPointSet) -> Vec<GroupSummary> {
        self.groups
            .iter()
            .enumerate()
            .map(|(id, g)| {
                let (kind, level, b) = match g.kind {
                    GroupKind::Main { level, b } => ("main", Some(level), b),
                    GroupKind::Outer { b } => ("outer", None, b),
                };
                GroupSummary {
                    id,
                    kind,
                    level,
                    b,
                    size: g.members.len(),
                    weight: g.weight(p),
                    cost: g.cost_to_astar,
                    clusters: g.touched_clusters.iter().copied().collect(),
                }
            })
            .collect()
    }

    /// Independent re-check of every ring and group invariant.
    ///
    /// Distances, cluster assignment and `Δ_i` are recomputed from scratch by
    /// brute force; the returned list is empty when everything holds.
    pub fn violations(&self, p: &WeightedPointSet, sol: &ApproxSolution) -> Vec<String> {
        let rp = &self.ring_partition;
        let z = rp.z;
        let k = sol.k();
        let mut out = Vec::new();

        // Brute-force nearest center, distances and Δ_i.
        let mut assign = Vec::with_capacity(p.len());
        let mut dz = Vec::with_capacity(p.len());
        for x in p.points() {
            let mut best = (0, f64::INFINITY);
            for (i, c) in sol.centers.centers().iter().enumerate() {
                let d: f64 = x.coords().iter().zip(c.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
            assign.push(best.0);
            dz.push(pow_from_sq(best.1, z));
        }
        let mut size = vec![0.0; k];
        let mut cost = vec![0.0; k];
        for (i, (&a, &d)) in assign.iter().zip(&dz).enumerate() {
            size[a] += p.weight(i);
            cost[a] += p.weight(i) * d;
        }
        let delta: Vec<f64> = size.iter().zip(&cost).map(|(&s, &c)| if s > 0.0 { c / s } else { 0.0 }).collect();

        let mut seen = vec![0u32; p.len()];
        for (key, members) in &rp.rings {
            if !(rp.inner_max_level < key.level && key.level < rp.outer_min_level) {
                out.push(format!("ring {key:?} is not a main level"));
            }
            for &m in members {
                seen[m] += 1;
                let lo = pow2(key.level) * delta[key.cluster];
                let hi = pow2(key.level + 1) * delta[key.cluster];
                if assign[m] != key.cluster || !(lo <= dz[m] && dz[m] < hi) {
                    out.push(format!("point {m} violates ring predicate for {key:?}"));
                }
            }
        }
        for (i, members) in rp.inner.iter().enumerate() {
            for &m in members {
                seen[m] += 1;
                let ok = assign[m] == i
                    && (dz[m] == 0.0 || delta[i] == 0.0 || dz[m] < pow2(rp.inner_max_level + 1) * delta[i]);
                if !ok {
                    out.push(format!("point {m} is not an inner point of cluster {i}"));
                }
            }
        }
        for (i, members) in rp.outer.iter().enumerate() {
            for &m in members {
                seen[m] += 1;
                if assign[m] != i || dz[m] < pow2(rp.outer_min_level) * delta[i] || dz[m].is_nan() {
                    out.push(format!("point {m} is not an outer point of cluster {i}"));
                }
            }
        }
        if let Some(m) = seen.iter().position(|&c| c != 1) {
            out.push(format!("ring partition covers point {m} {} times", seen[m]));
        }

        // Groups: disjoint, complete with leftover, bucket and cost conditions.
        let mut in_group = vec![0u32; p.len()];
        let mut level_cost: BTreeMap<i32, f64> = BTreeMap::new();
        for (key, &c) in &rp.ring_costs {
            *level_cost.entry(key.level).or_default() += c;
        }
        let outer_total: f64 = rp.outer_costs.iter().sum();
        for (gid, g) in self.groups.iter().enumerate() {
            let mut per_cluster: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
            for &m in &g.members {
                in_group[m] += 1;
                let e = per_cluster.entry(assign[m]).or_default();
                e.0 += p.weight(m);
                e.1 += p.weight(m) * dz[m];
            }
            let g_cost: f64 = per_cluster.values().map(|v| v.1).sum();
            let (b, reference) = match g.kind {
                GroupKind::Main { level, b } => (b, level_cost.get(&level).copied().unwrap_or(0.0)),
                GroupKind::Outer { b } => (b, outer_total),
            };
            if b > 0 || b < self.min_b {
                out.push(format!("group {gid} has b={b} outside [{}, 0]", self.min_b));
            }
            for (&i, &(_, c)) in &per_cluster {
                let lo = pow2(b) * reference;
                let hi = pow2(b + 1) * reference;
                if !(lo <= c * (1.0 + 1e-12) && c < hi * (1.0 + 1e-12)) {
                    out.push(format!("group {gid}: cluster {i} cost {c} outside [{lo}, {hi})"));
                }
            }
            if let GroupKind::Main { .. } = g.kind {
                for &m in &g.members {
                    let (wi, ci) = per_cluster[&assign[m]];
                    let tol = 1.0 + 1e-9;
                    if g_cost > 2.0 * k as f64 * ci * tol {
                        out.push(format!("group {gid}: cost(G) > 2k·cost(P_i∩G) for point {m}"));
                    }
                    if ci > 2.0 * wi * dz[m] * tol {
                        out.push(format!("group {gid}: cost(P_i∩G) > 2|P_i∩G|·d^z(p) for point {m}"));
                    }
                    if g_cost > 4.0 * k as f64 * wi * dz[m] * tol {
                        out.push(format!("group {gid}: cost(G) > 4k|P_i∩G|·d^z(p) for point {m}"));
                    }
                }
            }
        }
        for (i, members) in self.leftover_members.iter().enumerate() {
            for &m in members {
                in_group[m] += 1;
                if assign[m] != i {
                    out.push(format!("leftover point {m} listed under cluster {i}"));
                }
            }
        }
        if let Some(m) = in_group.iter().position(|&c| c != 1) {
            out.push(format!("groups and leftover cover point {m} {} times", in_group[m]));
        }
        for d in &self.dropped {
            if d.cost > 0.0 && d.cost >= pow2(self.min_b) * d.reference_cost {
                out.push(format!("dropped ring {d:?} is not light"));
            }
        }
        out
    }
}
