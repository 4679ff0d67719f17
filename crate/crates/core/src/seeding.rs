//! Constant-factor reference solutions.
//!
//! Centers are picked from the input by D^z sampling (each new center drawn
//! with probability proportional to `w(x)·d(x, chosen)^z`), then optionally
//! tightened by single-swap local search over input points.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    assign_clusters, cost_terms, dist_sq_slice, pow_from_sq, CenterSet, ClusteringParams,
    WeightedPointSet,
};
use crate::rng;

/// Candidates examined per local-search pass when the input is larger.
pub const LOCAL_SEARCH_POOL: usize = 64;

/// A reference solution `A*` with its per-cluster statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSolution {
    pub centers: CenterSet,
    /// Total weight of each cluster `P_i`.
    pub cluster_sizes: Vec<f64>,
    /// Average cost `Δ_i = cost_z(P_i, A*) / |P_i|`; zero for empty clusters.
    pub deltas: Vec<f64>,
    pub total_cost: f64,
    pub z: f64,
}

impl ApproxSolution {
    /// Statistics of `P` against a given center set.
    pub fn from_centers(p: &WeightedPointSet, centers: CenterSet, z: f64) -> Result<Self> {
        let assign = assign_clusters(p, &centers)?;
        let terms = cost_terms(p, &centers, z)?;
        let k = centers.k();
        let mut sizes = vec![0.0; k];
        let mut costs = vec![0.0; k];
        for ((&a, &t), &w) in assign.iter().zip(&terms).zip(p.weights()) {
            sizes[a] += w;
            costs[a] += t;
        }
        let deltas = sizes
            .iter()
            .zip(&costs)
            .map(|(&s, &c)| if s > 0.0 { c / s } else { 0.0 })
            .collect();
        Ok(Self {
            centers,
            cluster_sizes: sizes,
            deltas,
            total_cost: terms.iter().sum(),
            z,
        })
    }

    pub fn k(&self) -> usize {
        self.centers.k()
    }

    /// Average of `Δ_i` over nonempty clusters.
    pub fn mean_delta(&self) -> f64 {
        let (s, n) = self
            .deltas
            .iter()
            .zip(&self.cluster_sizes)
            .filter(|(_, &w)| w > 0.0)
            .fold((0.0, 0usize), |(s, n), (&d, _)| (s + d, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }
}

/// Draw an index with probability proportional to `mass`; uniform when all mass is zero.
fn draw(mass: &[f64], rng: &mut rng::Rng) -> usize {
    let total: f64 = mass.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return rng.random_range(0..mass.len());
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &m) in mass.iter().enumerate() {
        acc += m;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` at the very top; return the last index with mass.
    mass.iter().rposition(|&m| m > 0.0).unwrap_or(mass.len() - 1)
}

/// Indices chosen by D^z sampling.
pub fn dz_seed_indices(p: &WeightedPointSet, k: usize, z: f64, seed: u64) -> Result<Vec<usize>> {
    let n = p.len();
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::TooFewPoints { n, k });
    }
    let mut rng = rng::stream(seed, "seeding/dz");
    let mut chosen = Vec::with_capacity(k);
    chosen.push(draw(p.weights(), &mut rng));

    let mut nearest_sq: Vec<f64> = p
        .points()
        .iter()
        .map(|x| dist_sq_slice(x.coords(), p.point(chosen[0]).coords()))
        .collect();
    while chosen.len() < k {
        let mass: Vec<f64> = nearest_sq
            .iter()
            .zip(p.weights())
            .map(|(&d, &w)| w * pow_from_sq(d, z))
            .collect();
        let next = draw(&mass, &mut rng);
        chosen.push(next);
        let c = p.point(next).coords();
        nearest_sq
            .par_iter_mut()
            .zip(p.points().par_iter())
            .for_each(|(d, x)| *d = d.min(dist_sq_slice(x.coords(), c)));
    }
    Ok(chosen)
}

/// D^z seeding: an `O(2^{2z} log k)`-approximation in expectation, `O(nk)` time.
pub fn dz_seed(p: &WeightedPointSet, params: &ClusteringParams, seed: u64) -> Result<ApproxSolution> {
    let idx = dz_seed_indices(p, params.k, params.z, seed)?;
    let centers = CenterSet::new(idx.iter().map(|&i| p.point(i).clone()).collect())?;
    ApproxSolution::from_centers(p, centers, params.z)
}

/// Single-swap hill climbing over centers drawn from `P`.
///
/// Each pass evaluates every (center slot, candidate) swap and applies the
/// best strictly improving one. Stops after `max_swaps` passes or at the
/// first pass without an improving swap. Candidates are all of `P` when
/// `n ≤ LOCAL_SEARCH_POOL`, otherwise a D^z sample of that size per pass.
pub fn local_search_refine(
    p: &WeightedPointSet,
    sol: &ApproxSolution,
    params: &ClusteringParams,
    max_swaps: usize,
    seed: u64,
) -> Result<ApproxSolution> {
    if max_swaps == 0 || p.is_empty() {
        return Ok(sol.clone());
    }
    let z = params.z;
    let k = sol.k();
    let n = p.len();
    let mut centers: Vec<Vec<f64>> = sol.centers.centers().iter().map(|c| c.coords().to_vec()).collect();
    // Squared distances point x center, row-major by point.
    let mut dmat: Vec<f64> = p
        .points()
        .par_iter()
        .flat_map_iter(|x| {
            let x = x.coords();
            centers.iter().map(move |c| dist_sq_slice(x, c)).collect::<Vec<_>>()
        })
        .collect();
    let row_cost = |row: &[f64], w: f64| w * pow_from_sq(row.iter().cloned().fold(f64::INFINITY, f64::min), z);
    let mut current: f64 = dmat.chunks(k).zip(p.weights()).map(|(r, &w)| row_cost(r, w)).sum();
    let mut rng = rng::stream(seed, "seeding/local-search");

    for _ in 0..max_swaps {
        let pool: Vec<usize> = if n <= LOCAL_SEARCH_POOL {
            (0..n).collect()
        } else {
            let mass: Vec<f64> = dmat.chunks(k).zip(p.weights()).map(|(r, &w)| row_cost(r, w)).collect();
            (0..LOCAL_SEARCH_POOL).map(|_| draw(&mass, &mut rng)).collect()
        };
        let evals: Vec<(usize, usize, f64)> = pool
            .par_iter()
            .flat_map_iter(|&cand| {
                let cq = p.point(cand).coords();
                let to_cand: Vec<f64> = p.points().iter().map(|x| dist_sq_slice(x.coords(), cq)).collect();
                let dmat = &dmat;
                (0..k).map(move |slot| {
                    let mut total = 0.0;
                    for (i, &w) in p.weights().iter().enumerate() {
                        let row = &dmat[i * k..(i + 1) * k];
                        let mut best = to_cand[i];
                        for (j, &d) in row.iter().enumerate() {
                            if j != slot && d < best {
                                best = d;
                            }
                        }
                        total += w * pow_from_sq(best, z);
                    }
                    (cand, slot, total)
                })
            })
            .collect();
        let best = evals
            .iter()
            .fold(None::<(usize, usize, f64)>, |acc, &e| match acc {
                Some(a) if a.2 <= e.2 => Some(a),
                _ => Some(e),
            });
        match best {
            Some((cand, slot, cost)) if cost < current * (1.0 - 1e-12) => {
                centers[slot] = p.point(cand).coords().to_vec();
                let c = &centers[slot];
                for (i, x) in p.points().iter().enumerate() {
                    dmat[i * k + slot] = dist_sq_slice(x.coords(), c);
                }
                current = cost;
            }
            _ => break,
        }
    }
    let centers = CenterSet::from_rows(centers)?;
    ApproxSolution::from_centers(p, centers, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cost_z, Point};
    use itertools::Itertools;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn two_blobs(seed: u64) -> WeightedPointSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        for &cx in &[0.0, 100.0] {
            for _ in 0..50 {
                rows.push(vec![cx + nd.sample(&mut rng), nd.sample(&mut rng)]);
            }
        }
        WeightedPointSet::from_rows(rows).unwrap()
    }

    #[test]
    fn exact_cover_when_n_equals_k() {
        let p = WeightedPointSet::from_rows(vec![vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let params = ClusteringParams::new(3, 2.0, 0.1).unwrap();
        let sol = dz_seed(&p, &params, 1).unwrap();
        assert_eq!(sol.total_cost, 0.0);
        let mut got: Vec<f64> = sol.centers.centers().iter().map(|c| c.coords()[0]).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.0, 1.0, 5.0]);
    }

    #[test]
    fn singleton() {
        let p = WeightedPointSet::from_rows(vec![vec![2.0, 2.0]]).unwrap();
        let params = ClusteringParams::new(1, 1.0, 0.1).unwrap();
        let sol = dz_seed(&p, &params, 0).unwrap();
        assert_eq!(sol.centers.center(0).coords(), &[2.0, 2.0]);
        assert_eq!(sol.deltas, vec![0.0]);
    }

    #[test]
    fn too_few_points() {
        let p = WeightedPointSet::from_rows(vec![vec![0.0]]).unwrap();
        let params = ClusteringParams::new(2, 2.0, 0.1).unwrap();
        assert!(matches!(dz_seed(&p, &params, 0), Err(Error::TooFewPoints { n: 1, k: 2 })));
    }

    #[test]
    fn identical_points_allow_duplicate_centers() {
        let p = WeightedPointSet::from_rows(vec![vec![1.0, 1.0]; 4]).unwrap();
        let params = ClusteringParams::new(3, 2.0, 0.1).unwrap();
        let sol = dz_seed(&p, &params, 4).unwrap();
        assert_eq!(sol.k(), 3);
        assert_eq!(sol.total_cost, 0.0);
        assert!(sol.deltas.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn two_blobs_within_five_of_discrete_optimum() {
        let p = two_blobs(8);
        let params = ClusteringParams::new(2, 2.0, 0.1).unwrap();
        // Brute force over every 2-subset of P.
        let opt = (0..p.len())
            .tuple_combinations()
            .map(|(a, b)| {
                let c = CenterSet::new(vec![p.point(a).clone(), p.point(b).clone()]).unwrap();
                cost_z(&p, &c, 2.0).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        for seed in 0..5 {
            let sol = dz_seed(&p, &params, seed).unwrap();
            assert!(sol.total_cost <= 5.0 * opt, "seed {seed}: {} vs {}", sol.total_cost, opt);
        }
    }

    #[test]
    fn deterministic_and_consistent() {
        let p = two_blobs(2);
        let params = ClusteringParams::new(4, 1.0, 0.1).unwrap();
        let a = dz_seed(&p, &params, 17).unwrap();
        let b = dz_seed(&p, &params, 17).unwrap();
        assert_eq!(a, b);
        let recomputed = cost_z(&p, &a.centers, 1.0).unwrap();
        assert!((recomputed - a.total_cost).abs() <= 1e-9 * recomputed);
        let via_deltas: f64 = a.cluster_sizes.iter().zip(&a.deltas).map(|(s, d)| s * d).sum();
        assert!((via_deltas - a.total_cost).abs() <= 1e-9 * a.total_cost);
        assert_eq!(a.cluster_sizes.iter().sum::<f64>(), 100.0);
    }

    #[test]
    fn local_search_zero_budget_is_identity() {
        let p = two_blobs(3);
        let params = ClusteringParams::new(2, 2.0, 0.1).unwrap();
        let sol = dz_seed(&p, &params, 0).unwrap();
        assert_eq!(local_search_refine(&p, &sol, &params, 0, 0).unwrap(), sol);
    }

    #[test]
    fn local_search_fixes_misplaced_center() {
        let p = two_blobs(4);
        let params = ClusteringParams::new(2, 2.0, 0.1).unwrap();
        // Both centers in the left blob.
        let bad = CenterSet::new(vec![p.point(0).clone(), p.point(1).clone()]).unwrap();
        let sol = ApproxSolution::from_centers(&p, bad, 2.0).unwrap();
        let better = local_search_refine(&p, &sol, &params, 10, 0).unwrap();
        assert!(better.total_cost < sol.total_cost);
        assert_eq!(better.total_cost, cost_z(&p, &better.centers, 2.0).unwrap());
        // One center must now sit in the right blob.
        assert!(better.centers.centers().iter().any(|c| c.coords()[0] > 50.0));
    }

    #[test]
    fn local_optimum_is_fixed_point() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![11.0], vec![12.0]];
        let p = WeightedPointSet::from_rows(rows).unwrap();
        let params = ClusteringParams::new(2, 2.0, 0.1).unwrap();
        let c = CenterSet::new(vec![Point::new(vec![1.0]).unwrap(), Point::new(vec![11.0]).unwrap()]).unwrap();
        let sol = ApproxSolution::from_centers(&p, c, 2.0).unwrap();
        assert_eq!(local_search_refine(&p, &sol, &params, 5, 0).unwrap(), sol);
    }

    #[test]
    fn local_search_never_increases_cost_per_pass() {
        let p = two_blobs(6);
        let params = ClusteringParams::new(3, 1.0, 0.1).unwrap();
        let mut sol = dz_seed(&p, &params, 9).unwrap();
        for pass in 0..6 {
            let next = local_search_refine(&p, &sol, &params, 1, pass).unwrap();
            assert!(next.total_cost <= sol.total_cost);
            sol = next;
        }
    }
}
