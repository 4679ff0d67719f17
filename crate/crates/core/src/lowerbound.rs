//! Hard instances for coreset size and their adversarial center sets.
//!
//! Each copy `X_l` lives in `R^B` around an origin `o_l`. A family of `k/2`
//! index sets `B_i ⊆ [B]` of even size `s` is split into halves `B_i^+`,
//! `B_i^-`, and every pair `(i, j ∈ B_i^+)` yields the point
//!
//! ```text
//! p = o_l + t·e_j + (1/t)·(e_{B_i^+} − e_{B_i^-}),   t = sqrt(s)
//! ```
//!
//! so `‖p − o_l‖² = t² + 3` and `‖p − o_l − t·e_j‖² = 1`. Copies share the
//! first `B` coordinates and are separated along one extra coordinate.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_sq_slice, nearest_sq, pow_from_sq, CenterSet, Point, WeightedPointSet};
use crate::rng;

/// Redraws allowed per subset in sampled mode.
pub const SUBSET_RETRIES: usize = 10_000;
/// Hard cap on emitted points.
pub const MAX_POINTS: usize = 5_000_000;
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFamily {
    pub ground_size: usize,
    pub subset_size: usize,
    /// Sorted members of each `B_i`.
    pub subsets: Vec<Vec<usize>>,
    pub plus_half: Vec<Vec<usize>>,
    pub minus_half: Vec<Vec<usize>>,
    pub max_pair_intersection: usize,
    pub disjoint: bool,
}

impl SubsetFamily {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Largest intersection allowed between two members: `⌊0.1·s⌋`.
    pub fn intersection_bound(&self) -> usize {
        intersection_bound(self.subset_size)
    }

    /// Exhaustive recheck of sizes, halves and pairwise intersections.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let half = self.subset_size / 2;
        for (i, s) in self.subsets.iter().enumerate() {
            if s.len() != self.subset_size || s.iter().any(|&j| j >= self.ground_size) {
                out.push(format!("subset {i}: bad size or member out of range"));
            }
            if self.plus_half[i].len() != half || self.minus_half[i].len() != half {
                out.push(format!("subset {i}: halves are not of size {half}"));
            }
            let mut both: Vec<usize> = self.plus_half[i].iter().chain(&self.minus_half[i]).copied().collect();
            both.sort_unstable();
            if &both != s {
                out.push(format!("subset {i}: halves do not partition the subset"));
            }
        }
        let bound = self.intersection_bound();
        let mut worst = 0;
        for i in 0..self.subsets.len() {
            for i2 in (i + 1)..self.subsets.len() {
                let c = sorted_intersection(&self.subsets[i], &self.subsets[i2]);
                worst = worst.max(c);
                if c > bound {
                    out.push(format!("subsets {i} and {i2} share {c} > {bound} indices"));
                }
            }
        }
        if worst != self.max_pair_intersection {
            out.push(format!(
                "recorded max intersection {} but found {worst}",
                self.max_pair_intersection
            ));
        }
        out
    }
}

fn intersection_bound(subset_size: usize) -> usize {
    subset_size / 10
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// `k/2` subsets of `[B]`, each of size `subset_size`, with pairwise
/// intersections at most `⌊0.1·subset_size⌋`.
///
/// Consecutive disjoint blocks when `(k/2)·subset_size ≤ B`; otherwise each
/// subset is drawn uniformly and redrawn until it meets the bound against
/// all earlier ones.
pub fn build_subset_family(k: usize, subset_size: usize, ground_size: usize, seed: u64) -> Result<SubsetFamily> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("k must be even and ≥ 2, got {k}")));
    }
    if subset_size < 2 || !subset_size.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("subset size must be even and ≥ 2, got {subset_size}")));
    }
    if ground_size < subset_size {
        return Err(Error::Infeasible(format!(
            "ground size {ground_size} smaller than subset size {subset_size}"
        )));
    }
    let m = k / 2;
    let disjoint = m * subset_size <= ground_size;
    let subsets: Vec<Vec<usize>> = if disjoint {
        (0..m).map(|i| (i * subset_size..(i + 1) * subset_size).collect()).collect()
    } else {
        let bound = intersection_bound(subset_size);
        let mut r = rng::stream(seed, "lowerbound/family");
        let mut out: Vec<Vec<usize>> = Vec::with_capacity(m);
        for i in 0..m {
            let mut accepted = None;
            for _ in 0..SUBSET_RETRIES {
                let mut cand = sample(&mut r, ground_size, subset_size).into_vec();
                cand.sort_unstable();
                if out.iter().all(|prev| sorted_intersection(prev, &cand) <= bound) {
                    accepted = Some(cand);
                    break;
                }
            }
            match accepted {
                Some(c) => out.push(c),
                None => {
                    return Err(Error::RetriesExhausted(
                        SUBSET_RETRIES,
                        format!("subset {i} of {m}: no draw with intersections ≤ {bound} in [{ground_size}]"),
                    ))
                }
            }
        }
        out
    };
    let half = subset_size / 2;
    let plus_half = subsets.iter().map(|s| s[..half].to_vec()).collect();
    let minus_half = subsets.iter().map(|s| s[half..].to_vec()).collect();
    let mut max_pair_intersection = 0;
    for i in 0..subsets.len() {
        for i2 in (i + 1)..subsets.len() {
            max_pair_intersection = max_pair_intersection.max(sorted_intersection(&subsets[i], &subsets[i2]));
        }
    }
    let fam = SubsetFamily {
        ground_size,
        subset_size,
        subsets,
        plus_half,
        minus_half,
        max_pair_intersection,
        disjoint,
    };
    debug_assert!(fam.violations().is_empty());
    Ok(fam)
}

/// Instance parameters. `eps = None` selects `t ≈ k^{1/4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbConfig {
    pub k: usize,
    pub z: f64,
    pub eps: Option<f64>,
    pub seed: u64,
    pub copy_separation: Option<f64>,
    /// Overrides `B = ⌊100k / t^z⌋`.
    pub ground_size: Option<usize>,
    /// Overrides `copies = max(1, round(k / 2B))`.
    pub copies: Option<usize>,
}

impl LbConfig {
    pub fn new(k: usize, z: f64, eps: Option<f64>, seed: u64) -> Self {
        Self {
            k,
            z,
            eps,
            seed,
            copy_separation: None,
            ground_size: None,
            copies: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointTag {
    pub copy: usize,
    pub subset: usize,
    pub basis: usize,
}

/// Everything needed to rebuild an instance bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbMeta {
    pub k: usize,
    pub z: f64,
    /// `1/t`, or `0.01·t^{-1}` when no ε was given.
    pub eps: f64,
    pub eps_given: Option<f64>,
    pub t: f64,
    pub subset_size: usize,
    pub ground_size: usize,
    /// Formula value of the ground size before any override.
    pub formula_ground_size: usize,
    pub copies: usize,
    pub formula_copies: f64,
    pub copy_separation: f64,
    pub dim: usize,
    pub seed: u64,
    pub family: SubsetFamily,
    /// Origin of each copy: zero except coordinate `B` equal to `l · separation`.
    pub origins: Vec<Vec<f64>>,
    pub num_points: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LbInstance {
    pub meta: LbMeta,
    pub points: WeightedPointSet,
    pub point_tags: Vec<PointTag>,
}

fn nearest_even(x: f64) -> usize {
    let e = 2.0 * (x / 2.0).round();
    (e.max(2.0)) as usize
}

/// Build the instance described by `cfg`.
pub fn build_instance(cfg: &LbConfig) -> Result<LbInstance> {
    let LbConfig { k, z, eps, seed, .. } = *cfg;
    if k < 2 || !k.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("k must be even and ≥ 2, got {k}")));
    }
    if !(z >= 1.0 && z.is_finite()) {
        return Err(Error::InvalidParam(format!("z must be ≥ 1, got {z}")));
    }
    let mut notes = Vec::new();
    let subset_size = match eps {
        Some(e) => {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidParam(format!("eps must lie in (0, 1), got {e}")));
            }
            nearest_even(e.powi(-2))
        }
        None => nearest_even((k as f64).sqrt()),
    };
    let t = (subset_size as f64).sqrt();
    let eps_eff = match eps {
        Some(_) => 1.0 / t,
        None => 0.01 / t,
    };
    if let Some(e) = eps {
        if (e.powi(-2) - subset_size as f64).abs() > 1e-9 {
            notes.push(format!("subset size {subset_size} is the nearest even integer to eps^-2 = {}", e.powi(-2)));
        }
    }
    let formula_ground_size = (100.0 * k as f64 / t.powf(z)).floor() as usize;
    let ground_size = cfg.ground_size.unwrap_or(formula_ground_size);
    if cfg.ground_size.is_some() {
        notes.push(format!("ground size overridden: {ground_size} (formula {formula_ground_size})"));
    }
    if ground_size < subset_size {
        return Err(Error::Infeasible(format!(
            "ground size {ground_size} < subset size {subset_size}"
        )));
    }
    let formula_copies = k as f64 / (2.0 * ground_size as f64);
    let copies = cfg.copies.unwrap_or_else(|| (formula_copies.round() as usize).max(1));
    if copies == 0 {
        return Err(Error::InvalidParam("copies must be ≥ 1".into()));
    }
    if (copies as f64 - formula_copies).abs() > 1e-12 {
        notes.push(format!("copies = {copies} (k/2B = {formula_copies})"));
    }
    let copy_separation = cfg.copy_separation.unwrap_or(1e4 * k as f64 * t / eps_eff);
    if !(copy_separation > 0.0 && copy_separation.is_finite()) {
        return Err(Error::InvalidParam(format!("copy separation must be > 0, got {copy_separation}")));
    }
    let per_copy = (k / 2) * (subset_size / 2);
    if per_copy.saturating_mul(copies) > MAX_POINTS {
        return Err(Error::Infeasible(format!(
            "{} points exceed the cap of {MAX_POINTS}",
            per_copy.saturating_mul(copies)
        )));
    }
    let family = build_subset_family(k, subset_size, ground_size, seed)?;
    let dim = ground_size + 1;
    let origins = (0..copies)
        .map(|l| {
            let mut o = vec![0.0; dim];
            o[ground_size] = l as f64 * copy_separation;
            o
        })
        .collect();
    let meta = LbMeta {
        k,
        z,
        eps: eps_eff,
        eps_given: eps,
        t,
        subset_size,
        ground_size,
        formula_ground_size,
        copies,
        formula_copies,
        copy_separation,
        dim,
        seed,
        family,
        origins,
        num_points: per_copy * copies,
        notes,
    };
    LbInstance::from_meta(meta)
}

impl LbInstance {
    /// Regenerate points and tags from metadata.
    pub fn from_meta(meta: LbMeta) -> Result<Self> {
        let fam = &meta.family;
        if fam.ground_size + 1 != meta.dim || meta.origins.len() != meta.copies {
            return Err(Error::InvalidParam("metadata dimensions are inconsistent".into()));
        }
        let bad = fam.violations();
        if !bad.is_empty() {
            return Err(Error::InvalidParam(format!("subset family: {}", bad.join("; "))));
        }
        let t = meta.t;
        let mut pts = Vec::with_capacity(meta.num_points);
        let mut tags = Vec::with_capacity(meta.num_points);
        for (l, origin) in meta.origins.iter().enumerate() {
            for i in 0..fam.len() {
                for &j in &fam.plus_half[i] {
                    let mut c = origin.clone();
                    for &b in &fam.plus_half[i] {
                        c[b] += 1.0 / t;
                    }
                    for &b in &fam.minus_half[i] {
                        c[b] -= 1.0 / t;
                    }
                    c[j] += t;
                    pts.push(Point::new(c)?);
                    tags.push(PointTag { copy: l, subset: i, basis: j });
                }
            }
        }
        if pts.len() != meta.num_points {
            return Err(Error::InvalidParam(format!(
                "metadata lists {} points, family yields {}",
                meta.num_points,
                pts.len()
            )));
        }
        let points = WeightedPointSet::unweighted(meta.dim, pts)?;
        Ok(Self {
            meta,
            points,
            point_tags: tags,
        })
    }

    pub fn t(&self) -> f64 {
        self.meta.t
    }

    pub fn copy_points(&self, l: usize) -> Vec<usize> {
        (0..self.point_tags.len()).filter(|&p| self.point_tags[p].copy == l).collect()
    }

    fn origin(&self, l: usize) -> &[f64] {
        &self.meta.origins[l]
    }

    /// Scaled basis vector `o_l + t·e_j`.
    pub fn basis_center(&self, l: usize, j: usize) -> Point {
        let mut c = self.origin(l).to_vec();
        c[j] += self.meta.t;
        Point::new(c).expect("finite")
    }

    /// Exhaustive check of the per-point identities and copy separation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.meta.family.violations();
        let t = self.meta.t;
        let norm_target = t * t + 3.0;
        for (idx, (p, tag)) in self.points.points().iter().zip(&self.point_tags).enumerate() {
            let o = self.origin(tag.copy);
            let n = dist_sq_slice(p.coords(), o);
            if !rel_eq(n, norm_target) {
                out.push(format!("point {idx}: |p - o|^2 = {n}, expected {norm_target}"));
            }
            let a = self.basis_center(tag.copy, tag.basis);
            let d = dist_sq_slice(p.coords(), a.coords());
            if !rel_eq(d, 1.0) {
                out.push(format!("point {idx}: |p - o - t e_j|^2 = {d}, expected 1"));
            }
        }
        // Every point of copy l has last coordinate exactly l·sep, which
        // lower-bounds cross-copy distances.
        let b = self.meta.ground_size;
        for (idx, (p, tag)) in self.points.points().iter().zip(&self.point_tags).enumerate() {
            if p.coords()[b] != self.origin(tag.copy)[b] {
                out.push(format!("point {idx}: separating coordinate differs from its origin"));
            }
        }
        for l in 1..self.meta.copies {
            let gap = self.origin(l)[b] - self.origin(l - 1)[b];
            if gap < self.meta.copy_separation * (1.0 - REL_TOL) {
                out.push(format!("copies {} and {l} closer than the separation", l - 1));
            }
        }
        out
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * b.abs().max(1.0)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversarialCenters {
    pub centers: CenterSet,
    pub target_copy: usize,
    /// Per subset, the basis indices `j ∈ B_i^+` covered by the support.
    pub covered: Vec<BTreeSet<usize>>,
    /// Positions of the `k/2` in-copy centers inside `centers`.
    pub in_copy: Vec<usize>,
    pub num_fillers: usize,
    pub far_center_distance: f64,
}

fn check_copy(inst: &LbInstance, l: usize) -> Result<()> {
    if l >= inst.meta.copies {
        return Err(Error::InvalidParam(format!(
            "target copy {l} out of range (copies = {})",
            inst.meta.copies
        )));
    }
    Ok(())
}

fn fill_count(inst: &LbInstance) -> Result<usize> {
    let used = (inst.meta.copies - 1) * inst.meta.ground_size + inst.meta.k / 2;
    inst.meta.k.checked_sub(used).ok_or_else(|| {
        Error::Infeasible(format!(
            "{} centers needed for the other copies exceed k = {}",
            used, inst.meta.k
        ))
    })
}

/// Centers separating covered from uncovered points of copy `target_copy`.
///
/// Other copies get a center at every scaled basis vector, the target copy
/// gets one center per subset (coordinates in `{0, ±0.8, ±1}`), and the
/// remaining centers sit far away along the separating axis.
pub fn adversarial_center_set(inst: &LbInstance, support: &[usize], target_copy: usize) -> Result<AdversarialCenters> {
    check_copy(inst, target_copy)?;
    let fam = &inst.meta.family;
    let mut covered = vec![BTreeSet::new(); fam.len()];
    for &s in support {
        let tag = inst
            .point_tags
            .get(s)
            .ok_or_else(|| Error::InvalidParam(format!("support index {s} out of range")))?;
        if tag.copy == target_copy {
            covered[tag.subset].insert(tag.basis);
        }
    }
    let b = inst.meta.ground_size;
    let mut centers = Vec::with_capacity(inst.meta.k);
    for l in (0..inst.meta.copies).filter(|&l| l != target_copy) {
        for j in 0..b {
            centers.push(inst.basis_center(l, j));
        }
    }
    let origin = inst.origin(target_copy);
    let mut in_copy = Vec::with_capacity(fam.len());
    for (i, cov) in covered.iter().enumerate() {
        let mut c = origin.to_vec();
        let mut uncovered = 0;
        for &j in &fam.plus_half[i] {
            if cov.contains(&j) {
                c[j] += 0.8;
            } else {
                c[j] += 1.0;
                uncovered += 1;
            }
        }
        for (n, &j) in fam.minus_half[i].iter().enumerate() {
            c[j] -= if n < uncovered { 0.8 } else { 1.0 };
        }
        in_copy.push(centers.len());
        centers.push(Point::new(c)?);
    }
    let num_fillers = fill_count(inst)?;
    let far = inst.meta.copy_separation;
    let mut filler = vec![0.0; inst.meta.dim];
    filler[b] = -far;
    for _ in 0..num_fillers {
        centers.push(Point::new(filler.clone())?);
    }
    assert_eq!(centers.len(), inst.meta.k);
    Ok(AdversarialCenters {
        centers: CenterSet::new(centers)?,
        target_copy,
        covered,
        in_copy,
        num_fillers,
        far_center_distance: far,
    })
}

/// Centers at every scaled basis vector of every copy except `target_copy`,
/// with all remaining centers at one remote point `100·k·t/ε` from `o_l`.
pub fn missing_copy_centers(inst: &LbInstance, target_copy: usize) -> Result<CenterSet> {
    check_copy(inst, target_copy)?;
    let b = inst.meta.ground_size;
    let mut centers = Vec::with_capacity(inst.meta.k);
    for l in (0..inst.meta.copies).filter(|&l| l != target_copy) {
        for j in 0..b {
            centers.push(inst.basis_center(l, j));
        }
    }
    if centers.len() >= inst.meta.k {
        return Err(Error::Infeasible("no center left for the remote probe".into()));
    }
    let mut remote = inst.origin(target_copy).to_vec();
    remote[b] -= remote_distance(inst);
    while centers.len() < inst.meta.k {
        centers.push(Point::new(remote.clone())?);
    }
    CenterSet::new(centers)
}

pub fn remote_distance(inst: &LbInstance) -> f64 {
    100.0 * inst.meta.k as f64 * inst.meta.t / inst.meta.eps
}

/// Closed-form squared distance from a point to its in-copy center.
pub fn covered_sq(t: f64) -> f64 {
    1.82 * t * t - 3.4 * t + 3.0
}

pub fn uncovered_sq(t: f64) -> f64 {
    1.82 * t * t - 3.8 * t + 3.0
}

#[derive(Debug, Clone, Serialize)]
pub struct ClaimReport {
    pub t: f64,
    pub z: f64,
    pub target_copy: usize,
    pub points_checked: usize,
    pub covered_points: usize,
    pub uncovered_points: usize,
    pub center_norm_max_rel_error: f64,
    pub closed_form_max_rel_error: f64,
    pub power_form_max_rel_error: f64,
    /// Largest `⟨p − o_l, c_{i'} − o_l⟩ / t` over foreign in-copy centers.
    pub max_foreign_inner_over_t: f64,
    pub expected_gap: f64,
    /// Extreme observed covered-minus-uncovered gaps; `None` when one side is empty.
    pub observed_gap_range: Option<(f64, f64)>,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Exhaustive check of the center identities on the target copy.
pub fn verify_claims(inst: &LbInstance, support: &[usize], adv: &AdversarialCenters) -> Result<ClaimReport> {
    let t = inst.meta.t;
    let z = inst.meta.z;
    let l = adv.target_copy;
    check_copy(inst, l)?;
    let mut violations = inst.violations();
    let origin = inst.origin(l);

    let mut center_norm_max_rel_error: f64 = 0.0;
    for (i, &ci) in adv.in_copy.iter().enumerate() {
        let n = dist_sq_slice(adv.centers.center(ci).coords(), origin);
        let e = rel_err(n, 0.82 * t * t);
        center_norm_max_rel_error = center_norm_max_rel_error.max(e);
        if e > REL_TOL {
            violations.push(format!("center {i}: |c - o|^2 = {n}, expected {}", 0.82 * t * t));
        }
    }

    // Recompute coverage from the support independently of `adv.covered`.
    let support: BTreeSet<usize> = support.iter().copied().collect();
    let (cov_target, unc_target) = (covered_sq(t), uncovered_sq(t));
    let mut closed_form_max_rel_error: f64 = 0.0;
    let mut power_form_max_rel_error: f64 = 0.0;
    let mut max_foreign: f64 = f64::NEG_INFINITY;
    let (mut cov_lo, mut cov_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut unc_lo, mut unc_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_cov, mut n_unc, mut checked) = (0, 0, 0);
    for idx in inst.copy_points(l) {
        checked += 1;
        let tag = inst.point_tags[idx];
        let p = inst.points.point(idx).coords();
        let is_cov = support.contains(&idx);
        let own = adv.in_copy[tag.subset];
        let (nearest, d2) = nearest_sq(p, &adv.centers);
        let own_d2 = dist_sq_slice(p, adv.centers.center(own).coords());
        if nearest != own && d2 < own_d2 {
            violations.push(format!(
                "point {idx}: nearest center {nearest} at {d2} beats its own center {own} at {own_d2}"
            ));
        }
        let target = if is_cov { cov_target } else { unc_target };
        let e = rel_err(d2, target);
        closed_form_max_rel_error = closed_form_max_rel_error.max(e);
        if e > REL_TOL {
            violations.push(format!(
                "point {idx} ({}): d^2 = {d2}, expected {target}",
                if is_cov { "covered" } else { "uncovered" }
            ));
        }
        let dz = pow_from_sq(d2, z);
        let ez = rel_err(dz, target.powf(z / 2.0));
        power_form_max_rel_error = power_form_max_rel_error.max(ez);
        if ez > REL_TOL {
            violations.push(format!("point {idx}: d^z = {dz}, expected {}", target.powf(z / 2.0)));
        }
        for (i2, &c2) in adv.in_copy.iter().enumerate() {
            if i2 == tag.subset {
                continue;
            }
            let c = adv.centers.center(c2).coords();
            let ip: f64 = p.iter().zip(c).zip(origin).map(|((a, b), o)| (a - o) * (b - o)).sum();
            max_foreign = max_foreign.max(ip / t);
            if ip > 1.1 * t * (1.0 + REL_TOL) {
                violations.push(format!("point {idx}: inner product {ip} with center {c2} exceeds 1.1t"));
            }
        }
        if is_cov {
            n_cov += 1;
            cov_lo = cov_lo.min(d2);
            cov_hi = cov_hi.max(d2);
        } else {
            n_unc += 1;
            unc_lo = unc_lo.min(d2);
            unc_hi = unc_hi.max(d2);
        }
    }
    let expected_gap = 0.4 * t;
    let observed_gap_range = (n_cov > 0 && n_unc > 0).then_some((cov_lo - unc_hi, cov_hi - unc_lo));
    if let Some((lo, hi)) = observed_gap_range {
        for g in [lo, hi] {
            if rel_err(g, expected_gap) > REL_TOL {
                violations.push(format!("cost gap {g}, expected {expected_gap}"));
            }
        }
    }
    Ok(ClaimReport {
        t,
        z,
        target_copy: l,
        points_checked: checked,
        covered_points: n_cov,
        uncovered_points: n_unc,
        center_norm_max_rel_error,
        closed_form_max_rel_error,
        power_form_max_rel_error,
        max_foreign_inner_over_t: if max_foreign.is_finite() { max_foreign } else { 0.0 },
        expected_gap,
        observed_gap_range,
        pass: violations.is_empty(),
        violations,
    })
}
