//! Dataset generators and parameter sweeps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{distortion_over_centers, EvalContext, FamilySpec};
use crate::geometry::{ClusteringParams, Point, WeightedPointSet};
use crate::io::parse_pointset;
use crate::lowerbound::{build_instance, LbConfig, LbInstance};
use crate::rng;
use crate::sampler::{construct, CoresetConfig, DEFAULT_GAMMA_CONST};

/// Points round-robin over `components` Gaussians whose means are uniform in `[-10, 10]^d`.
pub fn gaussian_mixture(n: usize, d: usize, components: usize, spread: f64, seed: u64) -> Result<WeightedPointSet> {
    if components == 0 || d == 0 {
        return Err(Error::InvalidParam("gaussian mixture needs components ≥ 1 and d ≥ 1".into()));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidParam(format!("spread must be > 0, got {spread}")));
    }
    let mut means_rng = rng::stream(seed, "dataset/gmm/means");
    let means: Vec<Vec<f64>> = (0..components)
        .map(|_| (0..d).map(|_| means_rng.random_range(-10.0..10.0)).collect())
        .collect();
    let noise = Normal::new(0.0, spread).expect("positive spread");
    let mut r = rng::stream(seed, "dataset/gmm/points");
    let points = (0..n)
        .map(|i| Point::new(means[i % components].iter().map(|m| m + noise.sample(&mut r)).collect()))
        .collect::<Result<Vec<_>>>()?;
    WeightedPointSet::unweighted(d, points)
}

/// Points uniform in `[0, side]^d`.
pub fn uniform_cube(n: usize, d: usize, side: f64, seed: u64) -> Result<WeightedPointSet> {
    if d == 0 || !(side > 0.0 && side.is_finite()) {
        return Err(Error::InvalidParam("uniform cube needs d ≥ 1 and side > 0".into()));
    }
    let mut r = rng::stream(seed, "dataset/cube");
    let points = (0..n)
        .map(|_| Point::new((0..d).map(|_| r.random_range(0.0..side)).collect()))
        .collect::<Result<Vec<_>>>()?;
    WeightedPointSet::unweighted(d, points)
}

/// Input of a sweep. Lower-bound instances take `k` and `eps` from the grid
/// cell unless fixed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    File {
        path: PathBuf,
    },
    GaussianMixture {
        n: usize,
        d: usize,
        components: usize,
        spread: f64,
        seed: u64,
    },
    UniformCube {
        n: usize,
        d: usize,
        #[serde(default = "unit_side")]
        side: f64,
        seed: u64,
    },
    LbInstance {
        k: Option<usize>,
        eps: Option<f64>,
        seed: u64,
        ground_size: Option<usize>,
        copies: Option<usize>,
    },
}

fn unit_side() -> f64 {
    1.0
}

impl DatasetSpec {
    fn depends_on_cell(&self) -> bool {
        matches!(self, DatasetSpec::LbInstance { .. })
    }

    /// Materialize; relative file paths resolve against `base`.
    pub fn generate(&self, base: &Path, k: usize, z: f64, eps: f64) -> Result<(WeightedPointSet, Option<LbInstance>)> {
        match self {
            DatasetSpec::File { path } => Ok((parse_pointset(base.join(path))?, None)),
            DatasetSpec::GaussianMixture { n, d, components, spread, seed } => {
                Ok((gaussian_mixture(*n, *d, *components, *spread, *seed)?, None))
            }
            DatasetSpec::UniformCube { n, d, side, seed } => Ok((uniform_cube(*n, *d, *side, *seed)?, None)),
            DatasetSpec::LbInstance { k: lk, eps: le, seed, ground_size, copies } => {
                let mut cfg = LbConfig::new(lk.unwrap_or(k), z, Some(le.unwrap_or(eps)), *seed);
                cfg.ground_size = *ground_size;
                cfg.copies = *copies;
                let inst = build_instance(&cfg)?;
                Ok((inst.points.clone(), Some(inst)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub k: Vec<usize>,
    pub z: Vec<f64>,
    pub eps: Vec<f64>,
    #[serde(default = "default_gamma_grid")]
    pub gamma_const: Vec<f64>,
    pub seed: Vec<u64>,
}

fn default_gamma_grid() -> Vec<f64> {
    vec![DEFAULT_GAMMA_CONST]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    /// Same syntax as the `--families` flag.
    #[serde(default)]
    pub families: String,
    #[serde(default)]
    pub local_search: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub grid: Grid,
    #[serde(default)]
    pub eval: EvalSettings,
    pub output: Option<OutputPaths>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        for (name, len) in [
            ("k", g.k.len()),
            ("z", g.z.len()),
            ("eps", g.eps.len()),
            ("gamma_const", g.gamma_const.len()),
            ("seed", g.seed.len()),
        ] {
            if len == 0 {
                return Err(Error::Config(format!("grid.{name} must not be empty")));
            }
        }
        self.eval.families.parse::<FamilySpec>()?;
        Ok(())
    }

    /// Grid cells in row-major order over (k, z, eps, gamma_const, seed).
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &k in &g.k {
            for &z in &g.z {
                for &eps in &g.eps {
                    for &gamma_const in &g.gamma_const {
                        for &seed in &g.seed {
                            out.push(Cell { k, z, eps, gamma_const, seed });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub k: usize,
    pub z: f64,
    pub eps: f64,
    pub gamma_const: f64,
    pub seed: u64,
}

/// One CSV row. Column order is the field order below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub z: f64,
    pub eps: f64,
    pub gamma_const: f64,
    pub seed: u64,
    pub n: Option<usize>,
    pub num_groups: Option<usize>,
    pub presample_size: Option<u64>,
    pub coreset_size: Option<usize>,
    pub max_rel_error: Option<f64>,
    pub random_max_rel_error: Option<f64>,
    pub perturbed_max_rel_error: Option<f64>,
    pub adversarial_max_rel_error: Option<f64>,
    pub runtime_ms: Option<u64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(cell: Cell, e: impl std::fmt::Display) -> Self {
        Self {
            k: cell.k,
            z: cell.z,
            eps: cell.eps,
            gamma_const: cell.gamma_const,
            seed: cell.seed,
            n: None,
            num_groups: None,
            presample_size: None,
            coreset_size: None,
            max_rel_error: None,
            random_max_rel_error: None,
            perturbed_max_rel_error: None,
            adversarial_max_rel_error: None,
            runtime_ms: None,
            error: Some(e.to_string()),
        }
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    base: &Path,
    shared: Option<&(WeightedPointSet, Option<LbInstance>)>,
    families: &FamilySpec,
    cell: Cell,
    timed: bool,
) -> Result<SweepRow> {
    let start = Instant::now();
    let owned;
    let (p, inst) = match shared {
        Some(d) => (&d.0, d.1.as_ref()),
        None => {
            owned = cfg.dataset.generate(base, cell.k, cell.z, cell.eps)?;
            (&owned.0, owned.1.as_ref())
        }
    };
    let params = ClusteringParams::new(cell.k, cell.z, cell.eps)?;
    let run = construct(
        p,
        &params,
        &CoresetConfig {
            gamma_const: cell.gamma_const,
            seed: cell.seed,
            local_search: cfg.eval.local_search,
        },
    )?;
    let ctx = EvalContext { bases: Vec::new(), instance: inst };
    let has_families = families.random + families.perturbed > 0 || families.adversarial;
    let report = if has_families {
        Some(distortion_over_centers(
            p,
            &run.coreset.points,
            &params,
            families,
            &ctx,
            rng::derive(cell.seed, "sweep/eval"),
        )?)
    } else {
        None
    };
    let fam = |name: &str| report.as_ref().and_then(|r| r.family(name)).map(|f| f.max_rel_error);
    Ok(SweepRow {
        k: cell.k,
        z: cell.z,
        eps: cell.eps,
        gamma_const: cell.gamma_const,
        seed: cell.seed,
        n: Some(p.len()),
        num_groups: Some(run.groups.groups.len()),
        presample_size: Some(run.coreset.presample_size),
        coreset_size: Some(run.coreset.len()),
        max_rel_error: report.as_ref().map(|r| r.max_rel_error),
        random_max_rel_error: fam("random"),
        perturbed_max_rel_error: fam("perturbed"),
        adversarial_max_rel_error: fam("adversarial"),
        runtime_ms: Some(if timed { start.elapsed().as_millis() as u64 } else { 0 }),
        error: None,
    })
}

/// Run every grid cell; failures become rows with the `error` column set.
///
/// Rows come back in grid order. With `timed = false` the runtime column is
/// zero so repeated runs are byte-identical.
pub fn run_sweep(cfg: &ExperimentConfig, base: &Path, timed: bool) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let families: FamilySpec = cfg.eval.families.parse()?;
    let shared = if cfg.dataset.depends_on_cell() {
        None
    } else {
        let g = &cfg.grid;
        Some(cfg.dataset.generate(base, g.k[0], g.z[0], g.eps[0])?)
    };
    Ok(cfg
        .cells()
        .into_par_iter()
        .map(|cell| {
            run_cell(cfg, base, shared.as_ref(), &families, cell, timed).unwrap_or_else(|e| SweepRow::failed(cell, e))
        })
        .collect())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Metadata written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunInfo<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng_version: &'static str,
    pub config: T,
}

impl<T: Serialize> RunInfo<T> {
    pub fn new(config: T) -> Self {
        Self {
            tool: "kzcoreset",
            version: env!("CARGO_PKG_VERSION"),
            rng_version: rng::RNG_VERSION,
            config,
        }
    }
}
