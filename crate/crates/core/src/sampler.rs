//! Importance sampling per group.
//!
//! Each group `G` receives `Γ_G` i.i.d. draws with `Pr[p] = w(p)·d^z(p, A*) / cost_z(G, A*)`.
//! A draw of `p` is weighted `cost_z(G, A*) / (Γ_G · d^z(p, A*))`, which makes
//! `Σ_draws weight · d^z(p, C)` an unbiased estimate of `cost_z(G, C)` for any
//! `C`. The centers of `A*` carry the weight of every point outside the groups.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::{decompose, Group, GroupStructure, RingPartition};
use crate::error::{Error, Result};
use crate::geometry::{ClusteringParams, Point, WeightedPointSet};
use crate::rng;
use crate::seeding::{dz_seed, local_search_refine, ApproxSolution};

/// Default multiplier in front of the per-group sample count.
pub const DEFAULT_GAMMA_CONST: f64 = 0.05;

/// Exponent of `k` in the per-group sample count, `(2z + 2) / (z + 2)`.
pub fn k_exponent(z: f64) -> f64 {
    (2.0 * z + 2.0) / (z + 2.0)
}

/// Uncapped `Γ` as a real number, before rounding.
pub fn gamma_real(params: &ClusteringParams, gamma_const: f64) -> f64 {
    let k = params.k as f64;
    let eps = params.eps;
    let lk = (k / eps).ln();
    let le = (1.0 / eps).ln();
    gamma_const * k.powf(k_exponent(params.z)) * eps.powi(-2) * lk * le.powi(4)
}

/// Samples per group:
/// `⌈c · k^{(2z+2)/(z+2)} · ε^{-2} · ln(k/ε) · ln^4(1/ε)⌉`, floored at
/// `max(1, ⌈c · k · ε^{-2} · ln(k/ε)⌉)`.
pub fn gamma_for_group(params: &ClusteringParams, gamma_const: f64) -> Result<u64> {
    if !(gamma_const > 0.0 && gamma_const.is_finite()) {
        return Err(Error::InvalidParam(format!("gamma_const must be > 0, got {gamma_const}")));
    }
    let k = params.k as f64;
    let floor = (gamma_const * k * params.eps.powi(-2) * (k / params.eps).ln()).ceil().max(1.0);
    let g = gamma_real(params, gamma_const).ceil().max(floor);
    // Beyond 2^53 the count is no longer exact; cap is applied by callers anyway.
    Ok(g.min(9_007_199_254_740_992.0) as u64)
}

/// Where a coreset point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    /// Center `i` of `A*`, weighted by the leftover mass of its cluster.
    Center { cluster: usize },
    /// A sampled input point.
    Sample { group: usize, index: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupGamma {
    pub group: usize,
    pub size: usize,
    pub formula: u64,
    pub used: u64,
    pub capped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Coreset {
    pub points: WeightedPointSet,
    pub provenance: Vec<Provenance>,
    pub gamma: Vec<GroupGamma>,
    pub seed: u64,
    /// `k + Σ_G Γ_G` with caps, before duplicate draws are merged.
    pub presample_size: u64,
}

impl Coreset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Input indices of the sampled points (centers excluded).
    pub fn sampled_indices(&self) -> Vec<usize> {
        self.provenance
            .iter()
            .filter_map(|p| match p {
                Provenance::Sample { index, .. } => Some(*index),
                Provenance::Center { .. } => None,
            })
            .collect()
    }
}

/// Cumulative mass table for one group.
struct GroupSampler<'a> {
    members: &'a [usize],
    cum: Vec<f64>,
}

impl<'a> GroupSampler<'a> {
    fn new(group: &'a Group, p: &WeightedPointSet, rp: &RingPartition) -> Self {
        let mut acc = 0.0;
        let cum = group
            .members
            .iter()
            .map(|&m| {
                acc += p.weight(m) * rp.dist_z[m];
                acc
            })
            .collect();
        Self {
            members: &group.members,
            cum,
        }
    }

    fn draw(&self, rng: &mut rng::Rng) -> usize {
        let total = *self.cum.last().expect("nonempty group");
        let u = rng.random::<f64>() * total;
        let pos = self.cum.partition_point(|&c| c <= u);
        // Zero-mass members share their predecessor's cumulative value and are never hit;
        // the clamp only catches `u` rounding up to the total.
        let pos = pos.min(self.members.len() - 1);
        self.members[pos]
    }
}

/// Raw i.i.d. draws (input indices) for one group, in draw order.
pub fn draw_group(
    group: &Group,
    p: &WeightedPointSet,
    rp: &RingPartition,
    gamma: u64,
    rng: &mut rng::Rng,
) -> Result<Vec<usize>> {
    if gamma == 0 {
        return Err(Error::InvalidParam("gamma must be >= 1".into()));
    }
    if group.cost_to_astar.is_nan() || group.cost_to_astar <= 0.0 {
        return Err(Error::InvalidParam("group has zero cost to A*".into()));
    }
    let s = GroupSampler::new(group, p, rp);
    Ok((0..gamma).map(|_| s.draw(rng)).collect())
}

/// Weight carried by one draw of input point `index`.
#[inline]
pub fn draw_weight(group: &Group, rp: &RingPartition, gamma: u64, index: usize) -> f64 {
    group.cost_to_astar / (gamma as f64 * rp.dist_z[index])
}

/// Sample one group and merge duplicate draws; sorted by input index.
pub fn sample_group(
    group: &Group,
    p: &WeightedPointSet,
    rp: &RingPartition,
    gamma: u64,
    rng: &mut rng::Rng,
) -> Result<Vec<(usize, f64)>> {
    let mut draws = draw_group(group, p, rp, gamma, rng)?;
    draws.sort_unstable();
    let mut out: Vec<(usize, f64)> = Vec::new();
    for idx in draws {
        let w = draw_weight(group, rp, gamma, idx);
        match out.last_mut() {
            Some(last) if last.0 == idx => last.1 += w,
            _ => out.push((idx, w)),
        }
    }
    Ok(out)
}

/// `A*` with leftover weights plus the merged samples of every group.
pub fn build_coreset(
    p: &WeightedPointSet,
    sol: &ApproxSolution,
    gs: &GroupStructure,
    params: &ClusteringParams,
    gamma_const: f64,
    seed: u64,
) -> Result<Coreset> {
    let formula = gamma_for_group(params, gamma_const)?;
    let rp = &gs.ring_partition;

    let per_group: Vec<(GroupGamma, Vec<(usize, f64)>)> = gs
        .groups
        .par_iter()
        .enumerate()
        .map(|(gid, g)| {
            let size = g.members.len();
            let used = formula.min(size as u64);
            let mut rng = rng::stream(seed, &format!("sampler/group/{gid}"));
            let samples = sample_group(g, p, rp, used, &mut rng)?;
            let gg = GroupGamma {
                group: gid,
                size,
                formula,
                used,
                capped: used < formula,
            };
            Ok((gg, samples))
        })
        .collect::<Result<_>>()?;

    let k = sol.k();
    let mut points: Vec<Point> = sol.centers.centers().to_vec();
    let mut weights: Vec<f64> = gs.leftover.clone();
    let mut provenance: Vec<Provenance> = (0..k).map(|cluster| Provenance::Center { cluster }).collect();
    let mut gamma = Vec::with_capacity(per_group.len());
    let mut presample_size = k as u64;
    for (gg, samples) in per_group {
        presample_size += gg.used;
        for (index, w) in samples {
            points.push(p.point(index).clone());
            weights.push(w);
            provenance.push(Provenance::Sample { group: gg.group, index });
        }
        gamma.push(gg);
    }
    Ok(Coreset {
        points: WeightedPointSet::new(p.dim(), points, weights)?,
        provenance,
        gamma,
        seed,
        presample_size,
    })
}

/// Knobs for the full pipeline.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoresetConfig {
    pub gamma_const: f64,
    pub seed: u64,
    /// Local-search passes applied to the D^z seeding (0 disables).
    pub local_search: usize,
}

impl Default for CoresetConfig {
    fn default() -> Self {
        Self {
            gamma_const: DEFAULT_GAMMA_CONST,
            seed: 0,
            local_search: 0,
        }
    }
}

/// Everything produced by one run of the pipeline.
#[derive(Debug, Clone)]
pub struct CoresetRun {
    pub solution: ApproxSolution,
    pub groups: GroupStructure,
    pub coreset: Coreset,
}

/// Seed `A*`, decompose, and sample. Sub-seeds are derived from `cfg.seed`.
pub fn construct(p: &WeightedPointSet, params: &ClusteringParams, cfg: &CoresetConfig) -> Result<CoresetRun> {
    let sol = dz_seed(p, params, rng::derive(cfg.seed, "pipeline/astar"))?;
    let sol = local_search_refine(p, &sol, params, cfg.local_search, rng::derive(cfg.seed, "pipeline/local-search"))?;
    let groups = decompose(p, &sol, params)?;
    let coreset = build_coreset(p, &sol, &groups, params, cfg.gamma_const, rng::derive(cfg.seed, "pipeline/sample"))?;
    Ok(CoresetRun {
        solution: sol,
        groups,
        coreset,
    })
}
