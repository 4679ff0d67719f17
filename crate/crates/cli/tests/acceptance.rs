//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use kzcoreset::decomposition::{decompose, group_count_bound};
use kzcoreset::embeddings::{anchor_distortion, make_embedding, EmbeddingMode, DEFAULT_CM};
use kzcoreset::evaluator::{
    candidate_subsets, distortion_over_centers, exhaustive_distortion, rel_error, EvalContext, FamilySpec,
};
use kzcoreset::geometry::{cost_z, dist_sq_slice, pow_from_sq};
use kzcoreset::harness::{gaussian_mixture, uniform_cube};
use kzcoreset::lowerbound::{
    adversarial_center_set, build_instance, covered_sq, uncovered_sq, verify_claims, LbConfig, LbInstance,
};
use kzcoreset::rng;
use kzcoreset::sampler::{construct, draw_group, draw_weight, gamma_for_group, CoresetConfig, DEFAULT_GAMMA_CONST};
use kzcoreset::seeding::{dz_seed, ApproxSolution};
use kzcoreset::{CenterSet, ClusteringParams, Point, WeightedPointSet};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id} [{name}]: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Deterministic uniform in [0, 1) keyed by a label.
fn unit(seed: u64, label: &str) -> f64 {
    (rng::derive(seed, label) >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn criterion_1_closed_forms() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for k in [16usize, 64] {
        for eps in [None, Some(0.5)] {
            let inst = build_instance(&LbConfig::new(k, 2.0, eps, 11)).unwrap();
            let t = inst.t();
            for (idx, (p, tag)) in inst.points.points().iter().zip(&inst.point_tags).enumerate() {
                let o = &inst.meta.origins[tag.copy];
                let e1 = rel(dist_sq_slice(p.coords(), o), t * t + 3.0);
                let e2 = rel(dist_sq_slice(p.coords(), inst.basis_center(tag.copy, tag.basis).coords()), 1.0);
                worst = worst.max(e1).max(e2);
                if e1 > 1e-9 || e2 > 1e-9 {
                    failures.push(format!("k={k} point {idx}"));
                }
            }
            // Every third point covered, so both branches occur.
            let support: Vec<usize> = (0..inst.points.len()).step_by(3).collect();
            let adv = adversarial_center_set(&inst, &support, 0).unwrap();
            for &ci in &adv.in_copy {
                let e = rel(dist_sq_slice(adv.centers.center(ci).coords(), &inst.meta.origins[0]), 0.82 * t * t);
                worst = worst.max(e);
                if e > 1e-9 {
                    failures.push(format!("k={k} center {ci}"));
                }
            }
            for idx in inst.copy_points(0) {
                let p = inst.points.point(idx);
                let d2 = kzcoreset::geometry::nearest_sq(p.coords(), &adv.centers).1;
                let target = if support.contains(&idx) { covered_sq(t) } else { uncovered_sq(t) };
                let e = rel(d2, target);
                worst = worst.max(e);
                if e > 1e-9 {
                    failures.push(format!("k={k} distance of point {idx}"));
                }
            }
            let claims = verify_claims(&inst, &support, &adv).unwrap();
            if !claims.pass {
                failures.extend(claims.violations);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "closed-form exactness",
        failures.is_empty() && secs < 5.0,
        &format!("max rel error {worst:.2e}, {} failures, {secs:.2}s", failures.len()),
    );
}

/// Half of each subset's points, weight 2, plus every other copy at weight 1.
fn uniform_half(inst: &LbInstance, l: usize, seed: u64) -> (Vec<usize>, WeightedPointSet) {
    let mut support = Vec::new();
    for i in 0..inst.meta.family.len() {
        let mut members: Vec<usize> = inst
            .copy_points(l)
            .into_iter()
            .filter(|&p| inst.point_tags[p].subset == i)
            .collect();
        members.sort_by_key(|&p| rng::derive(seed, &format!("half/{p}")));
        support.extend_from_slice(&members[..members.len() / 2]);
    }
    support.sort_unstable();
    let mut pts = Vec::new();
    let mut w = Vec::new();
    for (idx, (p, tag)) in inst.points.points().iter().zip(&inst.point_tags).enumerate() {
        if tag.copy != l {
            pts.push(p.clone());
            w.push(1.0);
        } else if support.binary_search(&idx).is_ok() {
            pts.push(p.clone());
            w.push(2.0);
        }
    }
    (support, WeightedPointSet::new(inst.meta.dim, pts, w).unwrap())
}

#[test]
fn criterion_2_adversarial_gap() {
    // t = 10 needs a ground set of at least (k/2)·100 indices; the formula
    // value 100k/t² = k is far smaller, so it is overridden.
    let cases: [(usize, f64, Option<usize>); 3] = [(16, 0.5, None), (256, 0.25, None), (8, 0.1, Some(400))];
    let mut all = true;
    let mut details = Vec::new();
    for (k, eps, ground) in cases {
        let mut cfg = LbConfig::new(k, 2.0, Some(eps), 21);
        cfg.ground_size = ground;
        let inst = build_instance(&cfg).unwrap();
        let t = inst.t();
        let (support, s) = uniform_half(&inst, 0, 5);
        let adv = adversarial_center_set(&inst, &support, 0).unwrap();
        let claims = verify_claims(&inst, &support, &adv).unwrap();
        let (lo, hi) = claims.observed_gap_range.unwrap();
        let gap_err = rel(lo, 0.4 * t).max(rel(hi, 0.4 * t));
        let full = cost_z(&inst.points, &adv.centers, 2.0).unwrap();
        let x_l = inst.copy_points(0).len() as f64;
        let predicted = (x_l - support.len() as f64) * 0.4 * t / full;
        let measured = rel_error(&inst.points, &s, &adv.centers, 2.0).unwrap();
        let pred_err = rel(measured, predicted);
        let ok = claims.pass && gap_err <= 1e-9 && pred_err <= 1e-6;
        all &= ok;
        details.push(format!(
            "t={t}: gap err {gap_err:.1e}, distortion {measured:.6} vs {predicted:.6} (rel {pred_err:.1e})"
        ));
    }
    verdict(2, "adversarial gap", all, &details.join("; "));
}

#[test]
fn criterion_3_coreset_quality() {
    let start = Instant::now();
    let p = gaussian_mixture(5000, 10, 5, 1.0, 2024).unwrap();
    let fams = FamilySpec { random: 1000, perturbed: 100, ..Default::default() };
    let mut all = true;
    let mut details = Vec::new();
    for z in [1.0, 2.0] {
        let params = ClusteringParams::new(5, z, 0.3).unwrap();
        let mut passed = 0;
        let mut errs = Vec::new();
        let mut sizes = Vec::new();
        for seed in 0..10u64 {
            let cfg = CoresetConfig { gamma_const: DEFAULT_GAMMA_CONST, seed, local_search: 0 };
            let run = construct(&p, &params, &cfg).unwrap();
            let r = distortion_over_centers(
                &p,
                &run.coreset.points,
                &params,
                &fams,
                &EvalContext::default(),
                rng::derive(seed, "acceptance/eval"),
            )
            .unwrap();
            passed += usize::from(r.max_rel_error <= 0.3);
            errs.push(r.max_rel_error);
            sizes.push(run.coreset.len());
        }
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        let max_size = *sizes.iter().max().unwrap();
        all &= passed >= 9 && max_size < p.len();
        details.push(format!("z={z}: {passed}/10 seeds, worst {worst:.4}, max size {max_size}"));
    }
    let secs = start.elapsed().as_secs_f64();
    all &= secs < 60.0;
    verdict(3, "coreset quality", all, &format!("{}; {secs:.1}s", details.join("; ")));
}

#[test]
fn criterion_4_oracle_equivalence() {
    let mut mismatches = 0;
    for inst in 0..50u64 {
        let n = 3 + (rng::derive(inst, "n") % 8) as usize;
        let p = uniform_cube(n, 2, 10.0, inst).unwrap();
        let m = 1 + (rng::derive(inst, "m") % n as u64) as usize;
        let picks: Vec<usize> = (0..m).map(|j| (rng::derive(inst, &format!("pick/{j}")) % n as u64) as usize).collect();
        let w: Vec<f64> = (0..m).map(|j| 0.2 + 3.0 * unit(inst, &format!("w/{j}"))).collect();
        let s = WeightedPointSet::new(2, picks.iter().map(|&i| p.point(i).clone()).collect(), w).unwrap();
        let params = ClusteringParams::new(2, if inst % 2 == 0 { 2.0 } else { 1.0 }, 0.2).unwrap();
        let ex = exhaustive_distortion(&p, &s, &params, p.points()).unwrap();
        let fams = FamilySpec { explicit: candidate_subsets(p.points(), 2).unwrap(), ..Default::default() };
        let sampled = distortion_over_centers(&p, &s, &params, &fams, &EvalContext::default(), inst).unwrap();
        if sampled.max_rel_error.to_bits() != ex.max_rel_error.to_bits() {
            mismatches += 1;
        }
    }
    verdict(4, "oracle equivalence", mismatches == 0, &format!("{mismatches}/50 mismatches"));
}

/// Three rings at squared radii 1, 4 and 16 around a single center at the origin.
fn three_group_instance() -> WeightedPointSet {
    let dirs = uniform_cube(300, 3, 2.0, 77).unwrap();
    let pts = dirs
        .points()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let v: Vec<f64> = d.coords().iter().map(|x| x - 1.0).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = [1.0, 2.0, 4.0][i % 3];
            Point::new(v.iter().map(|x| x * r / n).collect()).unwrap()
        })
        .collect();
    WeightedPointSet::unweighted(3, pts).unwrap()
}

#[test]
fn criterion_5_unbiasedness() {
    let p = three_group_instance();
    let z = 2.0;
    let params = ClusteringParams::new(1, z, 0.3).unwrap();
    let sol = ApproxSolution::from_centers(&p, CenterSet::from_rows(vec![vec![0.0; 3]]).unwrap(), z).unwrap();
    let gs = decompose(&p, &sol, &params).unwrap();
    let rp = &gs.ring_partition;
    let redraws = 10_000;
    let gamma = 4;
    let mut details = Vec::new();
    let mut within = 0;
    let mut checks = 0;
    for cs in 0..5u64 {
        let c = uniform_cube(2, 3, 6.0, 500 + cs).unwrap();
        let c = CenterSet::from_rows(c.points().iter().map(|x| x.coords().iter().map(|v| v - 3.0).collect()).collect())
            .unwrap();
        for (gid, g) in gs.groups.iter().enumerate() {
            let truth: f64 = g.members.iter().map(|&m| p.weight(m) * kzcoreset::geometry::dist_z_to_set(p.point(m), &c, z).unwrap()).sum();
            let mut r = rng::stream(9, &format!("acceptance/unbiased/{cs}/{gid}"));
            let est: Vec<f64> = (0..redraws)
                .map(|_| {
                    draw_group(g, &p, rp, gamma, &mut r)
                        .unwrap()
                        .into_iter()
                        .map(|i| {
                            draw_weight(g, rp, gamma, i) * pow_from_sq(kzcoreset::geometry::nearest_sq(p.point(i).coords(), &c).1, z)
                        })
                        .sum()
                })
                .collect();
            let mean = est.iter().sum::<f64>() / redraws as f64;
            let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (redraws - 1) as f64;
            let se = (var / redraws as f64).sqrt();
            checks += 1;
            let ok = (mean - truth).abs() <= 3.0 * se;
            within += usize::from(ok);
            details.push(format!("{:.2}", (mean - truth) / se));
        }
    }
    let ok = gs.groups.len() == 3 && within == checks;
    verdict(
        5,
        "unbiasedness",
        ok,
        &format!("{} groups, {within}/{checks} within 3 SE, z-scores [{}]", gs.groups.len(), details.join(", ")),
    );
}

#[test]
fn criterion_6_group_law() {
    let mut all = true;
    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0;
    for k in [5usize, 20, 80] {
        let p = gaussian_mixture(4000, 5, k, 1.0, k as u64).unwrap();
        for eps in [0.05, 0.1, 0.3] {
            for z in [1.0, 2.0] {
                let params = ClusteringParams::new(k, z, eps).unwrap();
                let sol = dz_seed(&p, &params, 3).unwrap();
                let gs = decompose(&p, &sol, &params).unwrap();
                let bound = group_count_bound(k, z, eps);
                worst_ratio = worst_ratio.max(gs.groups.len() as f64 / bound);
                let v = gs.violations(&p, &sol);
                violations += v.len();
                all &= (gs.groups.len() as f64) <= bound && v.is_empty();
            }
        }
    }
    verdict(
        6,
        "group-structure law",
        all,
        &format!("max groups/bound {worst_ratio:.3}, {violations} predicate violations"),
    );
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

#[test]
fn criterion_7_sample_size_exponent() {
    let eps = 0.1;
    let mut all = true;
    let mut details = Vec::new();
    for (z, expected) in [(2.0, 1.5), (1.0, 4.0 / 3.0)] {
        let ks = [10usize, 100, 1000];
        let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
        let gammas: Vec<f64> = ks
            .iter()
            .map(|&k| gamma_for_group(&ClusteringParams::new(k, z, eps).unwrap(), 1.0).unwrap() as f64)
            .collect();
        // Strip the logarithmic factor in k/ε before regressing.
        let ys: Vec<f64> = gammas.iter().zip(&ks).map(|(g, &k)| (g / (k as f64 / eps).ln()).ln()).collect();
        let raw: Vec<f64> = gammas.iter().map(|g| g.ln()).collect();
        let s = slope(&xs, &ys);
        all &= (s - expected).abs() <= 0.01;
        details.push(format!("z={z}: slope {s:.4} (expected {expected:.4}, raw {:.4})", slope(&xs, &raw)));
    }
    // The values used by the sampler are the same ones.
    let p = gaussian_mixture(500, 2, 3, 1.0, 1).unwrap();
    let params = ClusteringParams::new(3, 2.0, eps).unwrap();
    let run = construct(&p, &params, &CoresetConfig { gamma_const: 1.0, seed: 0, local_search: 0 }).unwrap();
    let expected = gamma_for_group(&params, 1.0).unwrap();
    all &= run.coreset.gamma.iter().all(|g| g.formula == expected);
    verdict(7, "sample-size exponent", all, &details.join("; "));
}

#[test]
fn criterion_8_embedding_bounds() {
    let alpha = 0.3;
    let mut within = 0;
    let mut total = 0;
    let mut anchor_ok = true;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let cube = uniform_cube(50, 20, 2.0, 1000 + seed).unwrap();
        let anchors: Vec<Point> = cube
            .points()
            .iter()
            .map(|p| Point::new(p.coords().iter().map(|x| x - 1.0).collect()).unwrap())
            .collect();
        let emb = make_embedding(anchors, alpha, EmbeddingMode::Additive, seed, DEFAULT_CM).unwrap();
        let r = emb.radius.unwrap();
        let imgs: Vec<Vec<f64>> = emb.anchor_images.clone();
        let d = anchor_distortion(&emb.anchors, &imgs);
        anchor_ok &= d <= 1.0 + alpha;
        let dirs = uniform_cube(50, 20, 2.0, 2000 + seed).unwrap();
        let queries: Vec<Point> = dirs
            .points()
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let v: Vec<f64> = q.coords().iter().map(|x| x - 1.0).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let norm = r * (2.01 + 7.99 * unit(seed, &format!("norm/{i}")));
                Point::new(v.iter().map(|x| x * norm / n).collect()).unwrap()
            })
            .collect();
        let rep = emb.verify_distortion(&queries).unwrap();
        within += rep.within_8_alpha_r;
        total += queries.len();
        worst = worst.max(rep.max_additive_error / (alpha * r));
        anchor_ok &= rep.per_query.iter().all(|q| q.far);
    }
    let frac = within as f64 / total as f64;
    verdict(
        8,
        "embedding bounds",
        anchor_ok && frac >= 0.95,
        &format!("{within}/{total} queries within 8*alpha*r, worst error {worst:.3}*alpha*r, anchor distortion ok: {anchor_ok}"),
    );
}

fn kzc(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kzc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run kzc")
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = gaussian_mixture(400, 3, 3, 1.0, 5).unwrap();
    kzcoreset::io::write_pointset(d.join("pts.txt"), &p, false).unwrap();
    std::fs::write(
        d.join("sweep.toml"),
        "[dataset]\nkind = \"file\"\npath = \"pts.txt\"\n\n[grid]\nk = [2, 3]\nz = [1.0, 2.0]\neps = [0.3]\nseed = [1, 2]\n\n[eval]\nfamilies = \"random:20,perturbed:8\"\n",
    )
    .unwrap();
    let runs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "coreset",
            vec!["--seed", "4", "--reproducible", "coreset", "--input", "pts.txt", "--k", "3", "--eps", "0.3", "--out", "cs.txt", "--report", "cs.json", "--dump-groups", "groups.json"],
            vec!["cs.txt", "cs.json", "groups.json"],
        ),
        (
            "gen-lb",
            vec!["--seed", "4", "gen-lb", "--k", "16", "--eps", "0.5", "--out", "lb.txt", "--meta", "lb.json"],
            vec!["lb.txt", "lb.json"],
        ),
        (
            "verify-lb",
            vec!["--seed", "4", "--reproducible", "verify-lb", "--meta", "lb.json", "--coreset-support", "idx.txt", "--report", "claims.json"],
            vec!["claims.json"],
        ),
        (
            "evaluate",
            vec!["--seed", "4", "--reproducible", "evaluate", "--input", "pts.txt", "--coreset", "cs.txt", "--k", "3", "--eps", "0.3", "--families", "random:50,perturbed:10", "--report", "eval.json"],
            vec!["eval.json"],
        ),
        (
            "embed",
            vec!["--seed", "4", "--reproducible", "embed", "--anchors", "lb.txt", "--queries", "pts3.txt", "--alpha", "0.3", "--out", "img.txt", "--report", "embed.json"],
            vec!["img.txt", "embed.json"],
        ),
        (
            "sweep",
            vec!["--seed", "4", "--reproducible", "sweep", "--config", "sweep.toml", "--out", "sweep.csv", "--report", "sweep.json"],
            vec!["sweep.csv", "sweep.json"],
        ),
    ];
    std::fs::write(d.join("idx.txt"), "0\n3\n5\n").unwrap();
    let lbq = uniform_cube(10, 401, 1.0, 3).unwrap();
    kzcoreset::io::write_pointset(d.join("pts3.txt"), &lbq, false).unwrap();
    let mut mismatched = Vec::new();
    for (name, args, outputs) in &runs {
        let mut snapshots = Vec::new();
        for _ in 0..2 {
            let out = kzc(d, args);
            assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
            snapshots.push(outputs.iter().map(|f| std::fs::read(d.join(f)).unwrap()).collect::<Vec<_>>());
        }
        if snapshots[0] != snapshots[1] {
            mismatched.push(*name);
        }
    }
    verdict(
        9,
        "determinism",
        mismatched.is_empty(),
        &format!("{} subcommands rerun, mismatches: {mismatched:?}", runs.len()),
    );
}
