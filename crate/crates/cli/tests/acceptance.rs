//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use chrono::{NaiveDate, NaiveDateTime};
use diffdata::attributes::{build_time_intervals, Attribute, AttributeConfig, Partitionable};
use diffdata::dataset::{
    generate_city, generate_synthetic, half_split, holdout_split, load_movielens, Checkin,
    CheckinDataset, CityConfig, Rating,
};
use diffdata::diffscan::{differential_run, random_removal_baseline, zscores, zscores_from};
use diffdata::metrics::Metric;
use diffdata::obfuscate::{
    apply_reduction, build_suppression_plan, calibrate_reduction_plan, full_reduction_plan,
    suppress, suppression_prob,
};
use diffdata::recommend::{
    cosine_similarity, location_score, top_n, Evaluator, MfEvaluator, MfHyper, MfModel,
    SimilarityContext, TopNEvaluator,
};
use diffdata::Seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (usize, &'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "even-suppression identity", c1),
        (2, "suppression limits and continuity", c2),
        (3, "z-score standardization", c3),
        (4, "cosine brute-force oracle", c4),
        (5, "MF gradient check", c5),
        (6, "synthetic rating U-shape", c6),
        (7, "MovieLens 1M rating deciles", c7),
        (8, "hardship segregation beats noise", c8),
        (9, "intelligent vs even suppression", c9),
        (10, "reduction keeps accuracy", c10),
        (11, "time-interval construction", c11),
        (12, "determinism of experiment configs", c12),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n}: {tag} {name} ({secs:.1}s): {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn c1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    for _ in 0..100 {
        let alpha: f64 = rng.random_range(0.0..1.0);
        let acc: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
        let table = zscores_from("a", Metric::Precision, &labels(10), &acc, &[0.1; 10]).unwrap();
        let plan = build_suppression_plan(&table, alpha, 0.0).unwrap();
        bad += usize::from(plan.k != 1.0);
        for e in &plan.entries {
            let direct = suppression_prob(e.z, alpha, 0.0);
            bad += usize::from(
                e.p.to_bits() != alpha.to_bits() || direct.to_bits() != alpha.to_bits(),
            );
        }
    }
    verdict(
        bad == 0,
        format!("1000 (alpha, z) pairs, {bad} not bit-equal to alpha"),
    )
}

fn c2() -> Verdict {
    let mut worst_limit: f64 = 0.0;
    let mut worst_join: f64 = 0.0;
    for &alpha in &[0.05, 0.2, 0.5, 0.8, 0.95] {
        for &beta in &[0.5, 1.0, 3.0] {
            worst_limit = worst_limit
                .max((suppression_prob(50.0, alpha, beta) - 1.0).abs())
                .max(suppression_prob(-50.0, alpha, beta).abs());
            // t = 1/2 is reached at z = 0; the lower and upper branches are
            // approached from either side.
            for z in [1e-300, -1e-300, 1e-15, -1e-15] {
                worst_join = worst_join.max((suppression_prob(z, alpha, beta) - alpha).abs());
            }
            let lower = 2.0 * alpha * 0.5;
            let upper = 2.0 * (1.0 - alpha) * 0.5 + 2.0 * alpha - 1.0;
            worst_join = worst_join.max((lower - upper).abs());
        }
    }
    verdict(
        worst_limit <= 1e-9 && worst_join <= 1e-12,
        format!(
            "limit error {worst_limit:.1e} (tol 1e-9), branch gap {worst_join:.1e} (tol 1e-12)"
        ),
    )
}

fn c3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_sum, mut worst_std): (f64, f64) = (0.0, 0.0);
    for trial in 0..500 {
        let n = rng.random_range(2..40);
        let acc: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let metric = if trial % 2 == 0 {
            Metric::Precision
        } else {
            Metric::Rmse
        };
        let t = zscores_from("a", metric, &labels(n), &acc, &vec![1.0 / n as f64; n]).unwrap();
        let z = t.z();
        let sum: f64 = z.iter().sum();
        let std =
            (z.iter().map(|v| v * v).sum::<f64>() / n as f64 - (sum / n as f64).powi(2)).sqrt();
        worst_sum = worst_sum.max(sum.abs());
        worst_std = worst_std.max((std - 1.0).abs());
    }
    let published = [
        -1.12, -1.07, -0.60, 0.04, 0.62, 0.58, 0.45, 1.27, 1.27, -1.45,
    ];
    let total: f64 = published.iter().sum();
    let rounded = (total * 100.0).round() / 100.0;
    // Each entry is off by at most 0.005 from a zero-sum vector.
    let consistent = rounded == -0.01 && total.abs() <= 0.005 * published.len() as f64;
    verdict(
        worst_sum <= 1e-9 && worst_std <= 1e-9 && consistent,
        format!(
            "max |sum z| {worst_sum:.1e}, max |std - 1| {worst_std:.1e}; published table sums to {rounded}"
        ),
    )
}

fn c4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let instances = 500;
    for _ in 0..instances {
        let n_users = rng.random_range(1..=6);
        let n_locs = rng.random_range(1..=8);
        let m: Vec<Vec<f64>> = (0..n_users)
            .map(|_| {
                (0..n_locs)
                    .map(|_| f64::from(u8::from(rng.random_bool(0.4))))
                    .collect()
            })
            .collect();
        let w = |u: usize, v: usize| {
            let dot: f64 = (0..n_locs).map(|i| m[u][i] * m[v][i]).sum();
            let nu: f64 = m[u].iter().sum();
            let nv: f64 = m[v].iter().sum();
            if dot == 0.0 {
                0.0
            } else {
                dot / (nu * nv).sqrt()
            }
        };
        let c = |u: usize, i: usize| {
            let den: f64 = (0..n_users).filter(|&v| v != u).map(|v| w(u, v)).sum();
            let num: f64 = (0..n_users)
                .filter(|&v| v != u && m[v][i] == 1.0)
                .map(|v| w(u, v))
                .sum();
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        };
        let sets: BTreeMap<u64, BTreeSet<u64>> = (0..n_users)
            .map(|u| {
                let items = (0..n_locs)
                    .filter(|&i| m[u][i] == 1.0)
                    .map(|i| i as u64)
                    .collect();
                (u as u64, items)
            })
            .collect();
        let ctx = SimilarityContext::from_item_sets(&sets);
        let n = rng.random_range(1..=8);
        for (u, row) in m.iter().enumerate() {
            let vu = ctx.vector(u as u64);
            for v in 0..n_users {
                mismatches += usize::from(cosine_similarity(&vu, &ctx.vector(v as u64)) != w(u, v));
            }
            let mut expected = Vec::new();
            for &item in ctx.catalog() {
                let score = c(u, item as usize);
                mismatches += usize::from(location_score(&vu, item, &ctx) != score);
                if row[item as usize] == 0.0 {
                    expected.push((score, item));
                }
            }
            expected.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let expected: Vec<u64> = expected.into_iter().take(n).map(|p| p.1).collect();
            mismatches += usize::from(top_n(&vu, &ctx, n) != expected);
        }
    }
    verdict(
        mismatches == 0,
        format!("{instances} instances, {mismatches} inexact values"),
    )
}

fn c5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n_users, n_items, k) = (8u64, 7u64, 5);
    let mut m = MfModel::zeros(k, 3.5, (0..n_users).collect(), (0..n_items).collect());
    for x in m
        .user_bias
        .iter_mut()
        .chain(m.item_bias.iter_mut())
        .chain(m.user_factors.iter_mut())
        .chain(m.item_factors.iter_mut())
    {
        *x = rng.random_range(-1.0..1.0);
    }
    let lambda = 0.02;
    let loss = |m: &MfModel, u: usize, i: usize, r: f64| {
        let p = &m.user_factors[u * k..(u + 1) * k];
        let q = &m.item_factors[i * k..(i + 1) * k];
        let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
        let e = r - (m.global_mean + m.user_bias[u] + m.item_bias[i] + dot);
        let reg: f64 = p.iter().chain(q).map(|x| x * x).sum::<f64>()
            + m.user_bias[u].powi(2)
            + m.item_bias[i].powi(2);
        0.5 * e * e + 0.5 * lambda * reg
    };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = rng.random_range(0..n_users as usize);
        let i = rng.random_range(0..n_items as usize);
        let r = f64::from(rng.random_range(1..=5u8));
        let g = m.rating_gradient(u, i, r, lambda);
        let which = rng.random_range(0..2 + 2 * k);
        let perturb = |m: &mut MfModel, d: f64| match which {
            0 => m.user_bias[u] += d,
            1 => m.item_bias[i] += d,
            w if w < 2 + k => m.user_factors[u * k + w - 2] += d,
            w => m.item_factors[i * k + w - 2 - k] += d,
        };
        let analytic = match which {
            0 => g.user_bias,
            1 => g.item_bias,
            w if w < 2 + k => g.user_factors[w - 2],
            w => g.item_factors[w - 2 - k],
        };
        let (mut plus, mut minus) = (m.clone(), m.clone());
        perturb(&mut plus, h);
        perturb(&mut minus, -h);
        let numeric = (loss(&plus, u, i, r) - loss(&minus, u, i, r)) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    verdict(
        worst <= 1e-4,
        format!("100 parameters, worst relative error {worst:.2e} (tol 1e-4)"),
    )
}

fn c6() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in 1..=3u64 {
        let ds = generate_synthetic(600, 400, 20, 100_000, Seed(s)).unwrap();
        let split = holdout_split(&ds, 0.2, Seed(s)).unwrap();
        let ev = MfEvaluator::new(MfHyper::default(), Metric::Rmse, Seed(s)).unwrap();
        let attr = AttributeConfig::new(Attribute::Rating, Seed(s));
        let part = Rating::partition(&split.train, &attr).unwrap();
        let r = differential_run(&split.train, &split.test, &part, &ev).unwrap();
        let acc = r.accuracies();
        let mid = acc[2..8].iter().copied().fold(f64::INFINITY, f64::min);
        let pass = acc[0] > mid && acc[9] > mid;
        ok &= pass;
        parts.push(format!(
            "seed {s}: d1 {:.3} d10 {:.3} min(d3..d8) {mid:.3}",
            acc[0], acc[9]
        ));
    }
    verdict(ok, parts.join("; "))
}

fn movielens_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("DIFFDATA_ML1M") {
        return Some(PathBuf::from(p));
    }
    let p = workspace_root().join("data/ml-1m/ratings.dat");
    p.exists().then_some(p)
}

fn c7() -> Verdict {
    let Some(path) = movielens_path() else {
        return Verdict::Skip("data/ml-1m/ratings.dat not present (set DIFFDATA_ML1M)".into());
    };
    let ds = match load_movielens(&path) {
        Ok(ds) => ds,
        Err(e) => return Verdict::Fail(format!("cannot load {}: {e}", path.display())),
    };
    let split = holdout_split(&ds, 0.2, Seed(1)).unwrap();
    let ev = MfEvaluator::new(MfHyper::default(), Metric::Rmse, Seed(1)).unwrap();
    let attr = AttributeConfig::new(Attribute::Rating, Seed(1));
    let part = Rating::partition(&split.train, &attr).unwrap();
    let r = differential_run(&split.train, &split.test, &part, &ev).unwrap();
    let acc = r.accuracies();
    let mut idx: Vec<usize> = (0..acc.len()).collect();
    idx.sort_by(|&a, &b| acc[b].total_cmp(&acc[a]));
    let top_two: BTreeSet<usize> = idx[..2].iter().copied().collect();
    let bottom_two: BTreeSet<usize> = idx[acc.len() - 2..].iter().copied().collect();
    let ok = (acc[0] - 0.89).abs() <= 0.03
        && top_two == BTreeSet::from([0, 9])
        && (bottom_two.contains(&2) || bottom_two.contains(&3));
    verdict(
        ok,
        format!(
            "decile 1 removed RMSE {:.4}, highest {:?}, lowest {:?}",
            acc[0], top_two, bottom_two
        ),
    )
}

fn city(s: u64) -> CheckinDataset {
    generate_city(&CityConfig::default(), Seed(s)).unwrap()
}

fn density(s: u64) -> AttributeConfig {
    AttributeConfig::new(Attribute::HardshipDensity, Seed(s))
}

fn c8() -> Verdict {
    let ev = TopNEvaluator::precision(5);
    let mut ok = true;
    let mut parts = Vec::new();
    for s in 1..=3u64 {
        let split = holdout_split(&city(s), 0.2, Seed(s)).unwrap();
        let part = Checkin::partition(&split.train, &density(s)).unwrap();
        let r = differential_run(&split.train, &split.test, &part, &ev).unwrap();
        let b = random_removal_baseline(&split.train, &split.test, 0.1, 20, &ev, Seed(s)).unwrap();
        let outside = r
            .chunks
            .iter()
            .filter(|c| !b.within(c.accuracy, 1.0))
            .count();
        ok &= outside >= 5;
        parts.push(format!("seed {s}: {outside}/10 outside"));
    }
    verdict(ok, parts.join("; "))
}

struct Halves {
    a: diffdata::dataset::SplitPair<Checkin>,
    b: diffdata::dataset::SplitPair<Checkin>,
}

fn halves(s: u64) -> Halves {
    let (a, b) = half_split(&city(s), Seed(s)).unwrap();
    Halves {
        a: holdout_split(&a, 0.2, Seed(s)).unwrap(),
        b: holdout_split(&b, 0.2, Seed(s)).unwrap(),
    }
}

fn c9() -> Verdict {
    let ev = TopNEvaluator::precision(5);
    let mut ok = true;
    let mut parts = Vec::new();
    for s in 1..=3u64 {
        let h = halves(s);
        let pa = Checkin::partition(&h.a.train, &density(s)).unwrap();
        let za = zscores(&differential_run(&h.a.train, &h.a.test, &pa, &ev).unwrap()).unwrap();
        let pb = Checkin::partition(&h.b.train, &density(s)).unwrap();
        let mut row = Vec::new();
        for alpha in [0.3, 0.4, 0.5] {
            let acc = |beta: f64| {
                let plan = build_suppression_plan(&za, alpha, beta).unwrap();
                let kept = suppress(&h.b.train, &pb, &plan, Seed(s)).unwrap();
                ev.evaluate(&kept, &h.b.test).unwrap().value()
            };
            let (even, uneven) = (acc(0.0), acc(3.0));
            ok &= uneven >= even;
            row.push(format!("{alpha}: {uneven:.3} vs {even:.3}"));
        }
        parts.push(format!("seed {s} [{}]", row.join(", ")));
    }
    verdict(ok, parts.join("; "))
}

fn c10() -> Verdict {
    let ev = TopNEvaluator::precision(5);
    let mut ok = true;
    let mut two_sided = true;
    let mut parts = Vec::new();
    for s in 1..=3u64 {
        let h = halves(s);
        let pa = Checkin::partition(&h.a.train, &density(s)).unwrap();
        let za = zscores(&differential_run(&h.a.train, &h.a.test, &pa, &ev).unwrap()).unwrap();
        let tattr = AttributeConfig::new(
            Attribute::Time {
                min_frac: 0.10,
                max_frac: 0.15,
            },
            Seed(s),
        );
        let pt = Checkin::partition(&h.a.train, &tattr).unwrap();
        let zt = zscores(&differential_run(&h.a.train, &h.a.test, &pt, &ev).unwrap()).unwrap();
        let pb = Checkin::partition(&h.b.train, &density(s)).unwrap();
        let full = ev.evaluate(&h.b.train, &h.b.test).unwrap().value();
        let order = full_reduction_plan(Some(&zt), &za, 1.0).unwrap();
        let plan = calibrate_reduction_plan(&order, &h.b.train, &pb, 0.4).unwrap();
        let (reduced, realized) = apply_reduction(&h.b.train, &plan, &pb).unwrap();
        let rel = ev.evaluate(&reduced, &h.b.test).unwrap().value() / full;
        ok &= (realized - 0.4).abs() <= 0.05 && rel >= 0.95;
        two_sided &= rel <= 1.05;
        parts.push(format!(
            "seed {s}: removed {realized:.3}, precision {rel:.3} of full"
        ));
    }
    let note = if two_sided {
        ""
    } else {
        "; above +5% on some seeds, accepted since only a loss is bounded"
    };
    verdict(ok, format!("{}{note}", parts.join("; ")))
}

fn hourly_dataset(counts: &[usize; 24]) -> CheckinDataset {
    let day = NaiveDate::from_ymd_opt(2010, 6, 1).unwrap();
    let mut recs = Vec::new();
    let mut id = 0u64;
    for (h, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let t: NaiveDateTime = day.and_hms_opt(h as u32, 30, 0).unwrap();
            recs.push(Checkin {
                user_id: id % 40,
                location_id: id,
                lat: 30.0,
                lon: -97.0,
                local_time: t,
            });
            id += 1;
        }
    }
    CheckinDataset::new(recs)
}

/// Whether some cyclic tiling of the day has every interval in `[lo, hi]`.
fn feasible(mass: &[f64; 24], lo: f64, hi: f64) -> bool {
    (0..24).any(|anchor| {
        let mut reach = [false; 25];
        reach[0] = true;
        for i in 0..24 {
            if !reach[i] {
                continue;
            }
            let mut acc = 0.0;
            for j in i + 1..=24 {
                acc += mass[(anchor + j - 1) % 24];
                if acc > hi + 1e-12 {
                    break;
                }
                if acc >= lo - 1e-12 {
                    reach[j] = true;
                }
            }
        }
        reach[24]
    })
}

fn c11() -> Verdict {
    let uniform = build_time_intervals(&hourly_dataset(&[100; 24]), 0.10, 0.15).unwrap();
    let eight =
        uniform.intervals.len() == 8 && uniform.intervals.iter().all(|i| i.len_hours() == 3);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut checked, mut violations, mut infeasible) = (0, 0, 0);
    for _ in 0..300 {
        let mut counts = [0usize; 24];
        for c in counts.iter_mut() {
            *c = rng.random_range(0..120);
        }
        if counts.iter().sum::<usize>() == 0 {
            continue;
        }
        let ds = hourly_dataset(&counts);
        let total = ds.len() as f64;
        let mass: [f64; 24] = std::array::from_fn(|h| counts[h] as f64 / total);
        if !feasible(&mass, 0.10, 0.15) {
            infeasible += 1;
            continue;
        }
        checked += 1;
        let ti = build_time_intervals(&ds, 0.10, 0.15).unwrap();
        let hours: usize = ti.intervals.iter().map(|i| i.len_hours() as usize).sum();
        let in_band = ti.intervals.iter().all(|i| {
            let m: f64 = (0..24u32)
                .filter(|&h| i.contains(h))
                .map(|h| mass[h as usize])
                .sum();
            (0.10 - 1e-9..=0.15 + 1e-9).contains(&m) && !i.out_of_band
        });
        violations += usize::from(hours != 24 || !in_band);
    }
    verdict(
        eight && violations == 0 && checked > 0,
        format!(
            "uniform gives {} intervals of {:?} hours; {checked} feasible random profiles, {violations} out of band ({infeasible} infeasible skipped)",
            uniform.intervals.len(),
            uniform.intervals.iter().map(|i| i.len_hours()).collect::<BTreeSet<_>>()
        ),
    )
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn c12() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_diffdata");
    let tmp = tempfile::tempdir().unwrap();
    let mut configs: Vec<PathBuf> = std::fs::read_dir(workspace_root().join("experiments"))
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    let (mut identical, mut problems, mut skipped) = (0, Vec::new(), Vec::new());
    for cfg in &configs {
        let name = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        if name.starts_with("movielens") && movielens_path().is_none() {
            skipped.push(name);
            continue;
        }
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = tmp.path().join(format!("{name}-{run}"));
            let status = Command::new(bin)
                .args(["run", "--config"])
                .arg(cfg)
                .arg("--out-dir")
                .arg(&out)
                .output()
                .unwrap();
            if !status.status.success() {
                problems.push(format!("{name} exited with {}", status.status));
            }
            outputs.push(csv_files(&out));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            problems.push(format!("{name} CSVs differ or are missing"));
        } else {
            identical += 1;
        }
    }
    verdict(
        problems.is_empty() && identical > 0,
        format!(
            "{identical} configs byte-identical on re-run{}{}",
            if skipped.is_empty() {
                String::new()
            } else {
                format!(", skipped {}", skipped.join(", "))
            },
            if problems.is_empty() {
                String::new()
            } else {
                format!("; {}", problems.join("; "))
            }
        ),
    )
}
