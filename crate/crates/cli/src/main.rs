use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use kzcoreset::embeddings::{make_embedding, EmbeddingMode, DEFAULT_CM};
use kzcoreset::evaluator::{distortion_over_centers, exhaustive_distortion, EvalContext, FamilySpec};
use kzcoreset::harness::{rows_to_csv, run_sweep, ExperimentConfig, RunInfo};
use kzcoreset::io::{parse_index_list, parse_pointset, write_json, write_pointset};
use kzcoreset::lowerbound::{adversarial_center_set, build_instance, verify_claims, LbConfig, LbInstance, LbMeta};
use kzcoreset::rng;
use kzcoreset::sampler::{construct, CoresetConfig, DEFAULT_GAMMA_CONST};
use kzcoreset::{ClusteringParams, WeightedPointSet};

/// Exit status for runs that completed but found failures.
const EXIT_FAILED_CHECK: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "kzc", version, about = "Coresets for Euclidean (k, z)-clustering")]
struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit wall-clock timings so reruns are byte-identical.
    #[arg(long, global = true)]
    reproducible: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a coreset of a point set.
    Coreset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        z: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_GAMMA_CONST)]
        gamma_const: f64,
        /// Local-search passes after seeding.
        #[arg(long, default_value_t = 0)]
        local_search: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write ring and group summaries as JSON.
        #[arg(long)]
        dump_groups: Option<PathBuf>,
    },
    /// Generate a lower-bound instance.
    GenLb {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        z: f64,
        /// Omit for t close to k^{1/4}.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        ground_size: Option<usize>,
        #[arg(long)]
        copies: Option<usize>,
        #[arg(long)]
        copy_separation: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        meta: PathBuf,
    },
    /// Check the adversarial-center identities for a candidate support.
    VerifyLb {
        #[arg(long)]
        meta: PathBuf,
        /// Instance point indices, one per line.
        #[arg(long)]
        coreset_support: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        target_copy: usize,
        #[arg(long)]
        report: PathBuf,
    },
    /// Measure coreset distortion.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        coreset: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        z: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "random:1000,perturbed:100")]
        families: String,
        /// Lower-bound metadata enabling the adversarial family.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Enumerate every k-subset of the candidates instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        /// Candidate centers for the exhaustive oracle (defaults to the input).
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Embed anchors and map queries through a terminal embedding.
    Embed {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "additive")]
        mode: String,
        #[arg(long, default_value_t = DEFAULT_CM)]
        c_m: f64,
        /// Query images, one per row.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a parameter sweep described by a TOML file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `output.report`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED_CHECK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path) -> Result<WeightedPointSet> {
    parse_pointset(path).with_context(|| format!("reading {}", path.display()))
}

fn load_meta(path: &Path) -> Result<LbInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let meta: LbMeta = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(LbInstance::from_meta(meta)?)
}

fn with_timing(mut v: Value, start: Instant, cli: &Cli) -> Value {
    if !cli.reproducible {
        v["runtime_ms"] = json!(start.elapsed().as_millis() as u64);
    }
    v
}

fn info(cli: &Cli, config: Value) -> Value {
    let mut c = config;
    c["seed"] = json!(cli.seed);
    c["reproducible"] = json!(cli.reproducible);
    serde_json::to_value(RunInfo::new(c)).expect("serializable")
}

/// Returns `Ok(false)` when the command ran but a check failed.
fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    match &cli.cmd {
        Command::Coreset { input, k, z, eps, gamma_const, local_search, out, report, dump_groups } => {
            let p = load(input)?;
            let params = ClusteringParams::new(*k, *z, *eps)?;
            let cfg = CoresetConfig { gamma_const: *gamma_const, seed: cli.seed, local_search: *local_search };
            let run = construct(&p, &params, &cfg)?;
            write_pointset(out, &run.coreset.points, true)?;
            if let Some(path) = dump_groups {
                write_json(
                    path,
                    &json!({
                        "min_b": run.groups.min_b,
                        "inner_max_level": run.groups.ring_partition.inner_max_level,
                        "outer_min_level": run.groups.ring_partition.outer_min_level,
                        "groups": run.groups.summaries(&p),
                        "dropped": run.groups.dropped,
                        "leftover": run.groups.leftover,
                    }),
                )?;
            }
            if let Some(path) = report {
                let v = json!({
                    "run": info(cli, json!({
                        "command": "coreset",
                        "input": input,
                        "k": k, "z": z, "eps": eps,
                        "gamma_const": gamma_const,
                        "local_search": local_search,
                        "derived_seeds": {
                            "astar": rng::derive(cli.seed, "pipeline/astar"),
                            "local_search": rng::derive(cli.seed, "pipeline/local-search"),
                            "sample": rng::derive(cli.seed, "pipeline/sample"),
                        },
                    })),
                    "n": p.len(),
                    "coreset_size": run.coreset.len(),
                    "presample_size": run.coreset.presample_size,
                    "num_groups": run.groups.groups.len(),
                    "astar_cost": run.solution.total_cost,
                    "gamma": run.coreset.gamma,
                });
                write_json(path, &with_timing(v, start, cli))?;
            }
            Ok(true)
        }
        Command::GenLb { k, z, eps, ground_size, copies, copy_separation, out, meta } => {
            let mut cfg = LbConfig::new(*k, *z, *eps, cli.seed);
            cfg.ground_size = *ground_size;
            cfg.copies = *copies;
            cfg.copy_separation = *copy_separation;
            let inst = build_instance(&cfg)?;
            write_pointset(out, &inst.points, false)?;
            write_json(meta, &inst.meta)?;
            Ok(true)
        }
        Command::VerifyLb { meta, coreset_support, target_copy, report } => {
            let inst = load_meta(meta)?;
            let support = match coreset_support {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    parse_index_list(&text).map_err(kzcoreset::Error::from)?
                }
                None => Vec::new(),
            };
            let adv = adversarial_center_set(&inst, &support, *target_copy)?;
            let claims = verify_claims(&inst, &support, &adv)?;
            let ok = claims.pass;
            let v = json!({
                "run": info(cli, json!({
                    "command": "verify-lb",
                    "meta": meta,
                    "coreset_support": coreset_support,
                    "target_copy": target_copy,
                    "support_size": support.len(),
                })),
                "claims": claims,
            });
            write_json(report, &with_timing(v, start, cli))?;
            Ok(ok)
        }
        Command::Evaluate { input, coreset, k, z, eps, families, meta, exhaustive, candidates, report } => {
            let p = load(input)?;
            let s = load(coreset)?;
            let params = ClusteringParams::new(*k, *z, *eps)?;
            let eval = if *exhaustive {
                let cand = match candidates {
                    Some(path) => load(path)?,
                    None => p.clone(),
                };
                exhaustive_distortion(&p, &s, &params, cand.points())?
            } else {
                let spec: FamilySpec = families.parse()?;
                let inst = meta.as_deref().map(load_meta).transpose()?;
                if spec.adversarial && inst.is_none() {
                    bail!("the adversarial family needs --meta");
                }
                let ctx = EvalContext { bases: Vec::new(), instance: inst.as_ref() };
                distortion_over_centers(&p, &s, &params, &spec, &ctx, rng::derive(cli.seed, "evaluate"))?
            };
            let v = json!({
                "run": info(cli, json!({
                    "command": "evaluate",
                    "input": input, "coreset": coreset,
                    "k": k, "z": z, "eps": eps,
                    "families": if *exhaustive { "exhaustive".to_string() } else { families.clone() },
                    "meta": meta, "candidates": candidates,
                    "derived_seeds": { "evaluate": rng::derive(cli.seed, "evaluate") },
                })),
                "report": eval,
            });
            write_json(report, &with_timing(v, start, cli))?;
            Ok(true)
        }
        Command::Embed { anchors, queries, alpha, mode, c_m, out, report } => {
            let a = load(anchors)?;
            let mode: EmbeddingMode = mode.parse()?;
            let emb = make_embedding(a.points().to_vec(), *alpha, mode, cli.seed, *c_m)?;
            let q = match queries {
                Some(path) => load(path)?.points().to_vec(),
                None => Vec::new(),
            };
            let dist = emb.verify_distortion(&q)?;
            if let Some(path) = out {
                let images = q
                    .iter()
                    .map(|x| Ok(emb.extend_query(x)?.image))
                    .collect::<kzcoreset::Result<Vec<_>>>()?;
                let set = if images.is_empty() {
                    WeightedPointSet::empty(emb.target_dim())
                } else {
                    WeightedPointSet::from_rows(images)?
                };
                write_pointset(path, &set, false)?;
            }
            let v = json!({
                "run": info(cli, json!({
                    "command": "embed",
                    "anchors": anchors, "queries": queries,
                    "alpha": alpha, "mode": emb.mode, "c_m": c_m,
                })),
                "target_dim": emb.target_dim(),
                "retries": emb.retries,
                "anchor_distortion": emb.anchor_distortion,
                "radius": emb.radius,
                "report": dist,
            });
            write_json(report, &with_timing(v, start, cli))?;
            Ok(true)
        }
        Command::Sweep { config, out, report } => {
            let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::from_toml(&text)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let csv_path = out
                .clone()
                .or_else(|| cfg.output.as_ref().map(|o| base.join(&o.csv)))
                .context("no CSV path: pass --out or set output.csv")?;
            let report_path = report
                .clone()
                .or_else(|| cfg.output.as_ref().and_then(|o| o.report.as_ref().map(|r| base.join(r))));
            let rows = run_sweep(&cfg, base, !cli.reproducible)?;
            std::fs::write(&csv_path, rows_to_csv(&rows)?).with_context(|| format!("writing {}", csv_path.display()))?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if let Some(path) = report_path {
                let v = json!({
                    "run": info(cli, serde_json::to_value(&cfg)?),
                    "rows": rows.len(),
                    "failed_rows": failed,
                });
                write_json(path, &with_timing(v, start, cli))?;
            }
            Ok(failed == 0)
        }
    }
}
