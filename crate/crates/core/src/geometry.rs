//! Points, weighted point sets, center sets and the (k, z)-clustering cost.
//!
//! The cost of a weighted set `P` against centers `C` is
//!
//! ```text
//! cost_z(P, C) = Σ_x w(x) · min_{c ∈ C} ‖x − c‖^z
//! ```
//!
//! Sums run in stored point order so results are bit-reproducible. For
//! `z = 2` the squared distance is used directly, without a square root.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-point work above which cost evaluation fans out over rayon. The final
/// reduction is always sequential, so the result does not depend on threads.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Points with nonnegative weights; an unweighted input is the all-ones case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPointSet {
    dim: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    pub fn new(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        for &w in &weights {
            if !w.is_finite() {
                return Err(Error::NonFinite);
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight(w));
            }
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    pub fn unweighted(dim: usize, points: Vec<Point>) -> Result<Self> {
        let weights = vec![1.0; points.len()];
        Self::new(dim, points, weights)
    }

    /// Unit weights from raw rows; the dimension is taken from the first row.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let points = rows.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
        Self::unweighted(dim, points)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Sub-multiset by index, keeping the original weights.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            dim: self.dim,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Axis-aligned bounding box as `(min, max)` per coordinate.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let first = self.points.first()?;
        let mut lo = first.coords().to_vec();
        let mut hi = lo.clone();
        for p in &self.points[1..] {
            for (d, &c) in p.coords().iter().enumerate() {
                lo[d] = lo[d].min(c);
                hi[d] = hi[d].max(c);
            }
        }
        Some((lo, hi))
    }
}

/// A list of `k ≥ 1` centers of uniform dimension. Duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    centers: Vec<Point>,
}

impl CenterSet {
    pub fn new(centers: Vec<Point>) -> Result<Self> {
        let first = centers.first().ok_or(Error::EmptyCenters)?;
        let dim = first.dim();
        for c in &centers {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        Ok(Self { centers })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Point::new).collect::<Result<_>>()?)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.centers[0].dim()
    }

    #[inline]
    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    #[inline]
    pub fn center(&self, i: usize) -> &Point {
        &self.centers[i]
    }

    pub fn into_points(self) -> Vec<Point> {
        self.centers
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    pub k: usize,
    pub z: f64,
    pub eps: f64,
}

impl ClusteringParams {
    pub fn new(k: usize, z: f64, eps: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if !(z >= 1.0 && z.is_finite()) {
            return Err(Error::InvalidParam(format!("z must be >= 1, got {z}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParam(format!("eps must lie in (0, 1), got {eps}")));
        }
        Ok(Self { k, z, eps })
    }
}

/// How [`cost_z_with`] accumulates the per-point terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Summation {
    /// Plain left-to-right sum in stored order.
    #[default]
    Naive,
    /// Neumaier-compensated sum, for very large inputs.
    Compensated,
}

#[inline]
pub fn dist_sq_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `t^(z/2)` for a squared distance `t`, exact for z = 1 and z = 2.
#[inline]
pub fn pow_from_sq(sq: f64, z: f64) -> f64 {
    if z == 2.0 {
        sq
    } else if z == 1.0 {
        sq.sqrt()
    } else {
        sq.powf(0.5 * z)
    }
}

fn check_same_dim(p: &Point, q: &Point) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

pub fn dist_sq(p: &Point, q: &Point) -> Result<f64> {
    check_same_dim(p, q)?;
    Ok(dist_sq_slice(p.coords(), q.coords()))
}

/// Euclidean distance.
pub fn dist(p: &Point, q: &Point) -> Result<f64> {
    dist_sq(p, q).map(f64::sqrt)
}

/// Index and squared distance of the nearest center; ties go to the lowest index.
#[inline]
pub fn nearest_sq(x: &[f64], centers: &CenterSet) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.centers().iter().enumerate() {
        let d = dist_sq_slice(x, c.coords());
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// `d(x, C)^z` for a single point.
pub fn dist_z_to_set(x: &Point, centers: &CenterSet, z: f64) -> Result<f64> {
    centers.check_dim(x.dim())?;
    Ok(pow_from_sq(nearest_sq(x.coords(), centers).1, z))
}

/// Weighted per-point contributions `w(x) · d(x, C)^z`, in stored order.
pub fn cost_terms(p: &WeightedPointSet, centers: &CenterSet, z: f64) -> Result<Vec<f64>> {
    if !p.is_empty() {
        centers.check_dim(p.dim())?;
    }
    let term = |(x, w): (&Point, &f64)| w * pow_from_sq(nearest_sq(x.coords(), centers).1, z);
    let terms = if p.len() * centers.k() >= PAR_THRESHOLD {
        p.points.par_iter().zip(p.weights.par_iter()).map(term).collect()
    } else {
        p.points.iter().zip(p.weights.iter()).map(term).collect()
    };
    Ok(terms)
}

/// The (k, z)-clustering cost with the reference (naive, ordered) summation.
pub fn cost_z(p: &WeightedPointSet, centers: &CenterSet, z: f64) -> Result<f64> {
    cost_z_with(p, centers, z, Summation::Naive)
}

pub fn cost_z_with(
    p: &WeightedPointSet,
    centers: &CenterSet,
    z: f64,
    summation: Summation,
) -> Result<f64> {
    let terms = cost_terms(p, centers, z)?;
    Ok(match summation {
        Summation::Naive => terms.iter().sum(),
        Summation::Compensated => neumaier_sum(&terms),
    })
}

fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Nearest-center index for every point (lowest index on ties).
pub fn assign_clusters(p: &WeightedPointSet, centers: &CenterSet) -> Result<Vec<usize>> {
    if !p.is_empty() {
        centers.check_dim(p.dim())?;
    }
    let assign = |x: &Point| nearest_sq(x.coords(), centers).0;
    Ok(if p.len() * centers.k() >= PAR_THRESHOLD {
        p.points.par_iter().map(assign).collect()
    } else {
        p.points.iter().map(assign).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dist_identity_and_pythagoras() {
        let p = pt(&[1.5, -2.0, 7.0]);
        assert_eq!(dist(&p, &p).unwrap(), 0.0);
        assert_eq!(dist(&pt(&[3.0, 0.0]), &pt(&[0.0, 4.0])).unwrap(), 5.0);
    }

    #[test]
    fn dist_dimension_mismatch() {
        assert!(matches!(
            dist(&pt(&[1.0]), &pt(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_and_negative() {
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(matches!(
            WeightedPointSet::new(1, vec![pt(&[0.0])], vec![-1.0]),
            Err(Error::NegativeWeight(_))
        ));
        assert!(CenterSet::new(vec![]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ClusteringParams::new(0, 2.0, 0.1).is_err());
        assert!(ClusteringParams::new(1, 0.5, 0.1).is_err());
        assert!(ClusteringParams::new(1, 2.0, 1.0).is_err());
        assert!(ClusteringParams::new(1, 2.0, 0.0).is_err());
        assert!(ClusteringParams::new(3, 1.0, 0.5).is_ok());
    }

    #[test]
    fn cost_of_self_is_zero() {
        let p = WeightedPointSet::from_rows(vec![vec![2.0, 3.0]]).unwrap();
        let c = CenterSet::from_rows(vec![vec![2.0, 3.0]]).unwrap();
        assert_eq!(cost_z(&p, &c, 1.0).unwrap(), 0.0);
        assert_eq!(cost_z(&p, &c, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn cost_matches_scalar_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let crow: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let p = WeightedPointSet::from_rows(rows.clone()).unwrap();
        let c = CenterSet::from_rows(crow.clone()).unwrap();
        let mut oracle = 0.0;
        for x in &rows {
            let mut best = f64::INFINITY;
            for cc in &crow {
                let mut s = 0.0;
                for d in 0..3 {
                    s += (x[d] - cc[d]) * (x[d] - cc[d]);
                }
                best = best.min(s.sqrt());
            }
            oracle += best;
        }
        let got = cost_z(&p, &c, 1.0).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn kmeans_cost_equals_naive_double_loop_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let crow: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let mut oracle = 0.0;
        for x in &rows {
            let mut best = f64::INFINITY;
            for c in &crow {
                let mut s = 0.0;
                for d in 0..4 {
                    s += (x[d] - c[d]) * (x[d] - c[d]);
                }
                if s < best {
                    best = s;
                }
            }
            oracle += best;
        }
        let p = WeightedPointSet::from_rows(rows).unwrap();
        let c = CenterSet::from_rows(crow).unwrap();
        assert_eq!(cost_z(&p, &c, 2.0).unwrap(), oracle);
    }

    #[test]
    fn compensated_sum_agrees() {
        let p = WeightedPointSet::from_rows((0..1000).map(|i| vec![i as f64 * 0.1]).collect()).unwrap();
        let c = CenterSet::from_rows(vec![vec![0.0]]).unwrap();
        let a = cost_z_with(&p, &c, 2.0, Summation::Naive).unwrap();
        let b = cost_z_with(&p, &c, 2.0, Summation::Compensated).unwrap();
        assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn assignment_ties_go_low() {
        let p = WeightedPointSet::from_rows(vec![vec![0.0, 0.0]]).unwrap();
        let c = CenterSet::from_rows(vec![vec![5.0, 0.0], vec![1.0, 0.0], vec![0.0, 3.0], vec![-1.0, 0.0]])
            .unwrap();
        assert_eq!(assign_clusters(&p, &c).unwrap(), vec![1]);
    }

    #[test]
    fn assignment_matches_exhaustive_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let crow: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let expected: Vec<usize> = rows
            .iter()
            .map(|x| {
                let d: Vec<f64> = crow
                    .iter()
                    .map(|c| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))
                    .collect();
                let m = d.iter().cloned().fold(f64::INFINITY, f64::min);
                d.iter().position(|&v| v == m).unwrap()
            })
            .collect();
        let p = WeightedPointSet::from_rows(rows).unwrap();
        let c = CenterSet::from_rows(crow).unwrap();
        let a = assign_clusters(&p, &c).unwrap();
        assert_eq!(a, expected);
        assert_eq!(a, assign_clusters(&p, &c).unwrap());
    }

    fn coords(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n)
    }

    proptest! {
        #[test]
        fn cost_invariant_under_rigid_motion(
            pts in coords(12, 2),
            cs in coords(3, 2),
            theta in 0.0f64..std::f64::consts::TAU,
            shift in prop::collection::vec(-50.0f64..50.0, 2),
            z in 1.0f64..3.0,
        ) {
            let (s, c) = theta.sin_cos();
            let mv = |v: &Vec<f64>| vec![c * v[0] - s * v[1] + shift[0], s * v[0] + c * v[1] + shift[1]];
            let p = WeightedPointSet::from_rows(pts.clone()).unwrap();
            let cc = CenterSet::from_rows(cs.clone()).unwrap();
            let p2 = WeightedPointSet::from_rows(pts.iter().map(mv).collect()).unwrap();
            let c2 = CenterSet::from_rows(cs.iter().map(mv).collect()).unwrap();
            let a = cost_z(&p, &cc, z).unwrap();
            let b = cost_z(&p2, &c2, z).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300) + 1e-9);
        }

        #[test]
        fn more_centers_never_cost_more(
            pts in coords(15, 3),
            cs in coords(2, 3),
            extra in coords(2, 3),
            z in 1.0f64..3.0,
        ) {
            let p = WeightedPointSet::from_rows(pts).unwrap();
            let small = CenterSet::from_rows(cs.clone()).unwrap();
            let mut all = cs;
            all.extend(extra);
            let big = CenterSet::from_rows(all).unwrap();
            prop_assert!(cost_z(&p, &big, z).unwrap() <= cost_z(&p, &small, z).unwrap());
        }
    }
}
