//! Cost distortion of a weighted summary against families of center sets.

use std::collections::HashMap;

use itertools::Itertools;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{cost_z, CenterSet, ClusteringParams, Point, WeightedPointSet};
use crate::lowerbound::{adversarial_center_set, missing_copy_centers, LbInstance};
use crate::rng;
use crate::seeding::{dz_seed, local_search_refine, ApproxSolution};

/// Jitter scales, as multiples of `(mean Δ)^{1/z}`.
pub const PERTURB_SCALES: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
/// Largest number of k-subsets the exhaustive oracle will enumerate.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;
const BASE_LOCAL_SEARCH: usize = 10;

/// `|est − full| / full`, infinite when `full = 0 < est`, zero when both vanish.
pub fn rel_error_from(full: f64, est: f64) -> f64 {
    if full == 0.0 {
        if est == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (est - full).abs() / full
    }
}

pub fn rel_error(p: &WeightedPointSet, s: &WeightedPointSet, c: &CenterSet, z: f64) -> Result<f64> {
    Ok(rel_error_from(cost_z(p, c, z)?, cost_z(s, c, z)?))
}

/// Which center sets to try.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FamilySpec {
    pub random: usize,
    pub perturbed: usize,
    pub adversarial: bool,
    #[serde(skip)]
    pub explicit: Vec<CenterSet>,
}

impl std::str::FromStr for FamilySpec {
    type Err = Error;

    /// `random:N,perturbed:N,adversarial` in any order; empty means none.
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = FamilySpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, count) = match part.split_once(':') {
                Some((n, c)) => (
                    n,
                    Some(c.parse::<usize>().map_err(|_| {
                        Error::InvalidParam(format!("bad count in family {part:?}"))
                    })?),
                ),
                None => (part, None),
            };
            match (name, count) {
                ("random", Some(c)) => spec.random = c,
                ("perturbed", Some(c)) => spec.perturbed = c,
                ("adversarial", None) => spec.adversarial = true,
                _ => return Err(Error::InvalidParam(format!("unknown family {part:?}"))),
            }
        }
        Ok(spec)
    }
}

/// Optional inputs some families need.
#[derive(Debug, Clone, Default)]
pub struct EvalContext<'a> {
    /// Base solutions for the perturbed family; seeded from `P` when empty.
    pub bases: Vec<CenterSet>,
    /// Lower-bound instance that `P` was generated from.
    pub instance: Option<&'a LbInstance>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyStats {
    pub family: String,
    pub count: usize,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    /// Position of the worst set within the family.
    pub worst_index: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub max_rel_error: f64,
    pub families: Vec<FamilyStats>,
    pub num_center_sets: usize,
    pub worst_family: Option<String>,
    pub worst_center_set: Option<CenterSet>,
    pub eps: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl DistortionReport {
    pub fn family(&self, name: &str) -> Option<&FamilyStats> {
        self.families.iter().find(|f| f.family == name)
    }
}

/// Evaluate named families in order; ties keep the earliest set.
fn evaluate_families(
    p: &WeightedPointSet,
    s: &WeightedPointSet,
    z: f64,
    eps: f64,
    families: Vec<(String, Vec<CenterSet>)>,
    notes: Vec<String>,
) -> Result<DistortionReport> {
    let mut stats = Vec::with_capacity(families.len());
    let mut worst: Option<(f64, usize, usize)> = None;
    for (fi, (name, sets)) in families.iter().enumerate() {
        let errs: Vec<f64> = sets
            .par_iter()
            .map(|c| rel_error(p, s, c, z))
            .collect::<Result<_>>()?;
        let mut fmax = 0.0;
        let mut widx = None;
        for (i, &e) in errs.iter().enumerate() {
            if widx.is_none() || e > fmax {
                fmax = e;
                widx = Some(i);
            }
        }
        let mean = if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        };
        if let Some(i) = widx {
            if worst.is_none_or(|(m, _, _)| fmax > m) {
                worst = Some((fmax, fi, i));
            }
        }
        stats.push(FamilyStats {
            family: name.clone(),
            count: sets.len(),
            max_rel_error: fmax,
            mean_rel_error: mean,
            worst_index: widx,
        });
    }
    let max_rel_error = worst.map_or(0.0, |w| w.0);
    Ok(DistortionReport {
        max_rel_error,
        num_center_sets: stats.iter().map(|f| f.count).sum(),
        worst_family: worst.map(|(_, fi, _)| families[fi].0.clone()),
        worst_center_set: worst.map(|(_, fi, i)| families[fi].1[i].clone()),
        families: stats,
        eps,
        pass: max_rel_error <= eps,
        notes,
    })
}

/// `k` centers uniform in the bounding box of `P`.
pub fn random_center_sets(p: &WeightedPointSet, k: usize, count: usize, seed: u64) -> Result<Vec<CenterSet>> {
    let Some((lo, hi)) = p.bounding_box() else {
        return Ok(Vec::new());
    };
    (0..count)
        .map(|m| {
            let mut r = rng::stream(seed, &format!("eval/random/{m}"));
            let rows = (0..k)
                .map(|_| {
                    lo.iter()
                        .zip(&hi)
                        .map(|(&a, &b)| if b > a { r.random_range(a..=b) } else { a })
                        .collect()
                })
                .collect();
            CenterSet::from_rows(rows)
        })
        .collect()
}

/// Gaussian jitter around base solutions, cycling through bases then scales.
pub fn perturbed_center_sets(
    p: &WeightedPointSet,
    bases: &[CenterSet],
    z: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<CenterSet>> {
    if bases.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    let sigmas = bases
        .iter()
        .map(|b| Ok(ApproxSolution::from_centers(p, b.clone(), z)?.mean_delta().powf(1.0 / z)))
        .collect::<Result<Vec<f64>>>()?;
    (0..count)
        .map(|m| {
            let bi = m % bases.len();
            let scale = PERTURB_SCALES[(m / bases.len()) % PERTURB_SCALES.len()];
            let sigma = scale * sigmas[bi];
            let mut r = rng::stream(seed, &format!("eval/perturbed/{m}"));
            let centers = bases[bi]
                .centers()
                .iter()
                .map(|c| {
                    let coords = if sigma > 0.0 {
                        let n = Normal::new(0.0, sigma).expect("positive sigma");
                        c.coords().iter().map(|&x| x + n.sample(&mut r)).collect()
                    } else {
                        c.coords().to_vec()
                    };
                    Point::new(coords)
                })
                .collect::<Result<Vec<_>>>()?;
            CenterSet::new(centers)
        })
        .collect()
}

/// Instance indices of the summary's points, matched by exact coordinates.
pub fn match_support(inst: &LbInstance, s: &WeightedPointSet) -> Vec<usize> {
    let key = |p: &Point| p.coords().iter().map(|c| c.to_bits()).collect::<Vec<u64>>();
    let index: HashMap<Vec<u64>, usize> = inst
        .points
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (key(p), i))
        .collect();
    let mut out: Vec<usize> = s.points().iter().filter_map(|p| index.get(&key(p)).copied()).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Adversarial and missing-copy center sets for every copy of the instance.
pub fn adversarial_center_sets(inst: &LbInstance, s: &WeightedPointSet) -> (Vec<CenterSet>, Vec<String>) {
    let support = match_support(inst, s);
    let mut sets = Vec::new();
    let mut notes = Vec::new();
    for l in 0..inst.meta.copies {
        match adversarial_center_set(inst, &support, l) {
            Ok(a) => sets.push(a.centers),
            Err(e) => notes.push(format!("adversarial centers for copy {l} skipped: {e}")),
        }
        match missing_copy_centers(inst, l) {
            Ok(c) => sets.push(c),
            Err(e) => notes.push(format!("missing-copy centers for copy {l} skipped: {e}")),
        }
    }
    (sets, notes)
}

/// Relative error over the requested families.
///
/// Random sets are uniform in the bounding box of `P`. Perturbed sets jitter
/// the context's base solutions (or a seeded and locally refined solution of
/// `P`) at [`PERTURB_SCALES`]. Adversarial sets need a lower-bound instance.
pub fn distortion_over_centers(
    p: &WeightedPointSet,
    s: &WeightedPointSet,
    params: &ClusteringParams,
    families: &FamilySpec,
    ctx: &EvalContext<'_>,
    seed: u64,
) -> Result<DistortionReport> {
    let z = params.z;
    let mut fams = Vec::new();
    let mut notes = Vec::new();
    if families.random > 0 {
        fams.push(("random".to_string(), random_center_sets(p, params.k, families.random, seed)?));
    }
    if families.perturbed > 0 {
        let bases = if ctx.bases.is_empty() && p.len() >= params.k {
            let a = dz_seed(p, params, rng::derive(seed, "eval/base"))?;
            let ls = local_search_refine(p, &a, params, BASE_LOCAL_SEARCH, rng::derive(seed, "eval/base-ls"))?;
            vec![a.centers, ls.centers]
        } else {
            ctx.bases.clone()
        };
        fams.push((
            "perturbed".to_string(),
            perturbed_center_sets(p, &bases, z, families.perturbed, seed)?,
        ));
    }
    if families.adversarial {
        match ctx.instance {
            Some(inst) => {
                let (sets, n) = adversarial_center_sets(inst, s);
                notes.extend(n);
                fams.push(("adversarial".to_string(), sets));
            }
            None => notes.push("adversarial family requested without instance metadata".into()),
        }
    }
    if !families.explicit.is_empty() {
        fams.push(("explicit".to_string(), families.explicit.clone()));
    }
    evaluate_families(p, s, z, params.eps, fams, notes)
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All k-subsets of `candidates` in lexicographic index order.
pub fn candidate_subsets(candidates: &[Point], k: usize) -> Result<Vec<CenterSet>> {
    let total = binomial(candidates.len(), k);
    if total > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManySubsets {
            n: candidates.len(),
            k,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    (0..candidates.len())
        .combinations(k)
        .map(|idx| CenterSet::new(idx.into_iter().map(|i| candidates[i].clone()).collect()))
        .collect()
}

/// Maximum relative error over every k-subset of `candidates`.
pub fn exhaustive_distortion(
    p: &WeightedPointSet,
    s: &WeightedPointSet,
    params: &ClusteringParams,
    candidates: &[Point],
) -> Result<DistortionReport> {
    let sets = candidate_subsets(candidates, params.k)?;
    evaluate_families(p, s, params.z, params.eps, vec![("exhaustive".to_string(), sets)], Vec::new())
}
