//! Johnson–Lindenstrauss maps extended to terminal embeddings.
//!
//! Anchors `X` are mapped by a Gaussian JL matrix `g` into `R^{m-1}` and
//! padded with a zero: `f(p) = (g(p), 0)`. A query `q` is mapped around a
//! center anchor `x0` (the nearest anchor, or the origin for far queries in
//! additive mode) by finding `u ∈ R^{m-1}` with `‖u‖ ≤ ‖q − x0‖` whose inner
//! products with the anchor images track those of `q`:
//!
//! ```text
//! minimize_u  max_p | ⟨g(p) − g(x0), u⟩ − ⟨p − x0, q − x0⟩ |
//! f(q) = (g(x0) + u, sqrt(‖q − x0‖² − ‖u‖²))
//! ```
//!
//! The last coordinate makes `‖f(q) − f(x0)‖ = ‖q − x0‖` exactly. The
//! min-max problem is convex and solved by projected subgradient descent;
//! the achieved residual is reported as a certificate.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_sq_slice, Point};
use crate::rng;

/// Default constant in `m = ⌈c_m · α^{-2} · ln |X|⌉ + 1`.
pub const DEFAULT_CM: f64 = 4.0;
/// Gaussian redraws allowed before giving up on the anchor distortion test.
pub const MAX_RETRIES: usize = 50;
/// Subgradient steps per anchor.
pub const STEPS_PER_ANCHOR: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Multiplicative terminal embedding; every query is mapped around its nearest anchor.
    Terminal,
    /// Additive terminal embedding over a ball `B(0, r)` containing the anchors.
    Additive,
}

impl std::str::FromStr for EmbeddingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "terminal" => Ok(Self::Terminal),
            "additive" => Ok(Self::Additive),
            _ => Err(Error::InvalidParam(format!("unknown embedding mode {s:?}"))),
        }
    }
}

/// Gaussian JL map `R^d → R^{m-1}`, entries `N(0, 1) / sqrt(m − 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct JlMap {
    /// `(m − 1) × d`, row-major.
    pub matrix: Vec<Vec<f64>>,
    pub source_dim: usize,
    pub target_dim: usize,
    pub alpha: f64,
}

impl JlMap {
    pub fn sample(source_dim: usize, target_dim: usize, alpha: f64, rng: &mut rng::Rng) -> Self {
        assert!(target_dim >= 2);
        let rows = target_dim - 1;
        let scale = 1.0 / (rows as f64).sqrt();
        let matrix = (0..rows)
            .map(|_| {
                (0..source_dim)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(rng);
                        v * scale
                    })
                    .collect()
            })
            .collect();
        Self {
            matrix,
            source_dim,
            target_dim,
            alpha,
        }
    }

    /// `g(x)` in `R^{m-1}`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|row| dot(row, x)).collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Target dimension for `n` anchors: `max(2, ⌈c_m α^{-2} ln n⌉ + 1)`.
pub fn target_dim(n: usize, alpha: f64, c_m: f64) -> usize {
    let base = (c_m * alpha.powi(-2) * (n.max(1) as f64).ln()).ceil() as usize;
    (base + 1).max(2)
}

/// Worst pairwise ratio `max(ρ, 1/ρ)` with `ρ = ‖g(p) − g(q)‖ / ‖p − q‖`.
pub fn anchor_distortion(anchors: &[Point], images: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 1.0;
    for i in 0..anchors.len() {
        for j in (i + 1)..anchors.len() {
            let d = dist_sq_slice(anchors[i].coords(), anchors[j].coords()).sqrt();
            if d == 0.0 {
                continue;
            }
            let e = dist_sq_slice(&images[i], &images[j]).sqrt();
            let r = e / d;
            worst = worst.max(r).max(1.0 / r);
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct TerminalEmbedding {
    pub jl: JlMap,
    pub anchors: Vec<Point>,
    /// `(g(p), 0)` for every anchor.
    pub anchor_images: Vec<Vec<f64>>,
    pub mode: EmbeddingMode,
    /// Ball radius, additive mode only.
    pub radius: Option<f64>,
    /// Index of the origin among the anchors, additive mode only.
    pub origin: Option<usize>,
    pub c_m: f64,
    /// Gaussian draws rejected before acceptance.
    pub retries: usize,
    pub anchor_distortion: f64,
    pub seed: u64,
}

/// Build an embedding, redrawing the JL matrix until every anchor pair is
/// distorted by at most `1 + α`. In additive mode the origin is appended
/// when absent and `r` is the largest anchor norm.
pub fn make_embedding(
    anchors: Vec<Point>,
    alpha: f64,
    mode: EmbeddingMode,
    seed: u64,
    c_m: f64,
) -> Result<TerminalEmbedding> {
    if anchors.is_empty() {
        return Err(Error::InvalidParam("need at least one anchor".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if c_m.is_nan() || c_m <= 0.0 {
        return Err(Error::InvalidParam(format!("c_m must be > 0, got {c_m}")));
    }
    let d = anchors[0].dim();
    if let Some(bad) = anchors.iter().find(|a| a.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.dim() });
    }
    let mut anchors = anchors;
    let (radius, origin) = match mode {
        EmbeddingMode::Terminal => (None, None),
        EmbeddingMode::Additive => {
            let origin = match anchors.iter().position(|a| a.coords().iter().all(|&c| c == 0.0)) {
                Some(i) => i,
                None => {
                    anchors.push(Point::zeros(d));
                    anchors.len() - 1
                }
            };
            let r = anchors.iter().map(Point::norm).fold(0.0, f64::max);
            (Some(r), Some(origin))
        }
    };

    let m = target_dim(anchors.len(), alpha, c_m);
    for attempt in 0..=MAX_RETRIES {
        let mut r = rng::stream(seed, &format!("embedding/jl/{attempt}"));
        let jl = JlMap::sample(d, m, alpha, &mut r);
        let images: Vec<Vec<f64>> = anchors.iter().map(|a| jl.apply(a.coords())).collect();
        let distortion = anchor_distortion(&anchors, &images);
        if distortion <= 1.0 + alpha {
            let anchor_images = images
                .into_iter()
                .map(|mut v| {
                    v.push(0.0);
                    v
                })
                .collect();
            return Ok(TerminalEmbedding {
                jl,
                anchors,
                anchor_images,
                mode,
                radius,
                origin,
                c_m,
                retries: attempt,
                anchor_distortion: distortion,
                seed,
            });
        }
    }
    Err(Error::RetriesExhausted(
        MAX_RETRIES + 1,
        format!("anchor distortion above 1 + {alpha} at m = {m}; increase c_m"),
    ))
}

/// Result of [`minimize_max_residual`].
#[derive(Debug, Clone)]
pub struct SubgradientResult {
    pub u: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Projected subgradient descent for `min_{‖u‖ ≤ R} max_p |⟨a_p, u⟩ − b_p|`.
///
/// Normalized steps of length `R / sqrt(t)`; the best iterate is kept. Stops
/// after `budget` steps or as soon as the residual drops to `target`.
pub fn minimize_max_residual(
    rows: &[Vec<f64>],
    b: &[f64],
    radius: f64,
    init: Vec<f64>,
    budget: usize,
    target: f64,
) -> SubgradientResult {
    let eval = |u: &[f64]| -> (f64, usize, f64) {
        let mut worst = (0.0, 0, 0.0);
        for (p, (row, &bp)) in rows.iter().zip(b).enumerate() {
            let r = dot(row, u) - bp;
            if r.abs() > worst.0 {
                worst = (r.abs(), p, r.signum());
            }
        }
        worst
    };
    let project = |u: &mut Vec<f64>| {
        let n = norm(u);
        if n > radius && n > 0.0 {
            let s = radius / n;
            u.iter_mut().for_each(|x| *x *= s);
        }
    };

    let mut u = init;
    project(&mut u);
    let (mut res, mut arg, mut sign) = eval(&u);
    let mut best = SubgradientResult {
        u: u.clone(),
        residual: res,
        iterations: 0,
    };
    for t in 1..=budget {
        if best.residual <= target || rows.is_empty() {
            break;
        }
        let g = &rows[arg];
        let gn = norm(g);
        if gn == 0.0 {
            break;
        }
        let step = radius / (t as f64).sqrt() / gn * sign;
        for (x, gi) in u.iter_mut().zip(g) {
            *x -= step * gi;
        }
        project(&mut u);
        (res, arg, sign) = eval(&u);
        if res < best.residual {
            best = SubgradientResult {
                u: u.clone(),
                residual: res,
                iterations: t,
            };
        } else {
            best.iterations = t;
        }
    }
    best
}

/// Image of a query together with its certificate.
#[derive(Debug, Clone, Serialize)]
pub struct QueryImage {
    pub image: Vec<f64>,
    /// Anchor the extension was built around.
    pub center: usize,
    /// Handled by the origin-centred (far) branch of additive mode.
    pub far: bool,
    pub residual: f64,
    pub bound: f64,
    pub certified: bool,
    pub iterations: usize,
}

impl TerminalEmbedding {
    pub fn target_dim(&self) -> usize {
        self.jl.target_dim
    }

    pub fn alpha(&self) -> f64 {
        self.jl.alpha
    }

    fn nearest_anchor(&self, q: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, a) in self.anchors.iter().enumerate() {
            let d = dist_sq_slice(a.coords(), q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Map a query point.
    ///
    /// Terminal mode, and additive-mode queries with `‖q‖ ≤ 2r`, extend
    /// around the nearest anchor with per-anchor normalized residuals (bound
    /// `α‖q − x0‖`). Far additive queries extend around the origin with
    /// bound `α·r·‖q‖`. `certified` is false when the budget ran out above
    /// the bound.
    pub fn extend_query(&self, q: &Point) -> Result<QueryImage> {
        if q.dim() != self.jl.source_dim {
            return Err(Error::DimensionMismatch { expected: self.jl.source_dim, got: q.dim() });
        }
        let alpha = self.alpha();
        let far = match (self.mode, self.radius) {
            (EmbeddingMode::Additive, Some(r)) => q.norm() > 2.0 * r,
            _ => false,
        };
        let center = if far {
            self.origin.expect("additive embedding has an origin")
        } else {
            self.nearest_anchor(q.coords())
        };
        let x0 = self.anchors[center].coords();
        let v: Vec<f64> = q.coords().iter().zip(x0).map(|(a, b)| a - b).collect();
        let vn = norm(&v);
        let g0 = &self.anchor_images[center][..self.jl.target_dim - 1];
        if vn == 0.0 {
            return Ok(QueryImage {
                image: self.anchor_images[center].clone(),
                center,
                far,
                residual: 0.0,
                bound: 0.0,
                certified: true,
                iterations: 0,
            });
        }

        let mut rows = Vec::with_capacity(self.anchors.len());
        let mut b = Vec::with_capacity(self.anchors.len());
        let mut spread: f64 = 0.0;
        for (p, img) in self.anchors.iter().zip(&self.anchor_images) {
            let diff: Vec<f64> = p.coords().iter().zip(x0).map(|(a, c)| a - c).collect();
            let dn = norm(&diff);
            if dn == 0.0 {
                continue;
            }
            spread = spread.max(dn);
            let a: Vec<f64> = img.iter().zip(g0).map(|(x, y)| x - y).collect();
            let bp = dot(&diff, &v);
            if far {
                rows.push(a);
                b.push(bp);
            } else {
                rows.push(a.into_iter().map(|x| x / dn).collect());
                b.push(bp / dn);
            }
        }
        let bound = if far {
            alpha * self.radius.unwrap_or(spread) * vn
        } else {
            alpha * vn
        };
        let init = self.jl.apply(&v);
        let budget = STEPS_PER_ANCHOR * self.anchors.len();
        let sol = minimize_max_residual(&rows, &b, vn, init, budget, bound);

        let un = norm(&sol.u);
        let last = (vn * vn - un * un).max(0.0).sqrt();
        let mut image: Vec<f64> = sol.u.iter().zip(g0).map(|(u, g)| u + g).collect();
        image.push(last);
        Ok(QueryImage {
            image,
            center,
            far,
            residual: sol.residual,
            bound,
            certified: sol.residual <= bound,
            iterations: sol.iterations,
        })
    }

    /// Exhaustive anchor × query error table.
    pub fn verify_distortion(&self, queries: &[Point]) -> Result<DistortionReport> {
        let mut report = DistortionReport {
            num_anchors: self.anchors.len(),
            num_queries: queries.len(),
            target_dim: self.target_dim(),
            alpha: self.alpha(),
            radius: self.radius,
            max_additive_error: 0.0,
            max_ratio: 1.0,
            min_ratio: 1.0,
            per_query: Vec::with_capacity(queries.len()),
            certificate_failures: 0,
            within_8_alpha_r: 0,
        };
        for q in queries {
            let img = self.extend_query(q)?;
            let mut add: f64 = 0.0;
            let (mut lo, mut hi): (f64, f64) = (1.0, 1.0);
            for (p, pimg) in self.anchors.iter().zip(&self.anchor_images) {
                let d = dist_sq_slice(p.coords(), q.coords()).sqrt();
                let e = dist_sq_slice(pimg, &img.image).sqrt();
                add = add.max((d - e).abs());
                if d > 0.0 {
                    lo = lo.min(e / d);
                    hi = hi.max(e / d);
                } else if e > 0.0 {
                    hi = f64::INFINITY;
                }
            }
            if !img.certified {
                report.certificate_failures += 1;
            }
            if let Some(r) = self.radius {
                if add <= 8.0 * self.alpha() * r {
                    report.within_8_alpha_r += 1;
                }
            }
            report.max_additive_error = report.max_additive_error.max(add);
            report.max_ratio = report.max_ratio.max(hi);
            report.min_ratio = report.min_ratio.min(lo);
            report.per_query.push(QueryError {
                max_additive_error: add,
                min_ratio: lo,
                max_ratio: hi,
                far: img.far,
                certified: img.certified,
                residual: img.residual,
                norm_error: (norm(&img.image) - q.norm()).abs(),
            });
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryError {
    pub max_additive_error: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub far: bool,
    pub certified: bool,
    pub residual: f64,
    /// `| ‖f(q)‖ − ‖q‖ |`; zero up to rounding for far additive queries.
    pub norm_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub num_anchors: usize,
    pub num_queries: usize,
    pub target_dim: usize,
    pub alpha: f64,
    pub radius: Option<f64>,
    pub max_additive_error: f64,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub per_query: Vec<QueryError>,
    pub certificate_failures: usize,
    /// Queries whose worst additive error is at most `8·α·r` (additive mode).
    pub within_8_alpha_r: usize,
}
