//! Pipelines behind the subcommands.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail};
use diffdata::attributes::{Attribute, AttributeConfig, Partitionable};
use diffdata::dataset::{
    generate_city, generate_synthetic, half_split, holdout_split, load_checkins, load_movielens,
    load_ratings_csv, write_checkins_csv, write_ratings_csv, Checkin, CheckinDataset, Dataset,
    RatingDataset, Record, SplitPair,
};
use diffdata::diffscan::{
    differential_run, random_removal_baseline, stability_by_data, stability_by_users, zscores,
    zscores_from, ZScoreTable,
};
use diffdata::metrics::Metric;
use diffdata::obfuscate::{
    apply_reduction, build_reduction_plan, build_suppression_plan, calibrate_reduction_plan,
    differential_fake_run, full_reduction_plan, generate_fake, replace, suppress, suppression_mask,
};
use diffdata::recommend::{Evaluator, MfEvaluator, ModelCache, TopNEvaluator};
use diffdata::Seed;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{chunk_plot, read_result_csv, table_rows, PlotPoint, ResultRow, Sink};

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Dataset,
    Runtime,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Runtime => 1,
            Kind::Config => 2,
            Kind::Dataset => 3,
        }
    }
}

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub stage: String,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {:#}", self.stage, self.error)
    }
}

pub trait StageExt<T> {
    fn stage(self, kind: Kind, stage: &str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, kind: Kind, stage: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind,
            stage: stage.into(),
            error: e.into(),
        })
    }
}

type Out<T = ()> = Result<T, Failure>;

fn runtime<T, E: Into<anyhow::Error>>(r: Result<T, E>, stage: &str) -> Out<T> {
    r.stage(Kind::Runtime, stage)
}

pub enum Data {
    Checkins(CheckinDataset),
    Ratings(RatingDataset),
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    pipeline: &'a str,
    seed: Seed,
    sink: Sink,
}

/// Runs `pipeline` and writes its files plus `report.json`.
pub fn run(pipeline: &str, cfg: &ExperimentConfig, from: Option<&Path>) -> Out<PathBuf> {
    let uses_data = !(pipeline == "report" || (pipeline == "zscore" && from.is_some()));
    cfg.validate(pipeline, uses_data)
        .stage(Kind::Config, "config")?;
    let pipeline = match pipeline {
        "stability" => {
            if cfg.stability.by == "data" {
                "stability-data"
            } else {
                "stability-users"
            }
        }
        p => p,
    };
    let seed = cfg.seed().stage(Kind::Config, "config")?;
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(pipeline));
    let sink = runtime(Sink::new(dir.clone()), "output")?;
    let mut ctx = Ctx {
        cfg,
        pipeline,
        seed,
        sink,
    };

    match pipeline {
        "report" => return report(&mut ctx, from.unwrap_or(&dir)).map(|_| dir),
        "zscore" if from.is_some() => zscore_from_file(&mut ctx, from.unwrap_or(&dir))?,
        "synth" => synth(&mut ctx)?,
        _ => {
            let data = ctx
                .sink
                .timed("load", || load(cfg, seed))
                .stage(Kind::Dataset, "dataset")?;
            dispatch(&mut ctx, data)?;
        }
    }

    let report = json!({
        "pipeline": pipeline,
        "config": cfg,
        "outputs": ctx.sink.outputs,
        "files": ctx.sink.files,
        "timings": ctx.sink.timings,
    });
    runtime(ctx.sink.json("report.json", &report), "output")?;
    Ok(dir)
}

fn load(cfg: &ExperimentConfig, seed: Seed) -> anyhow::Result<Data> {
    let d = &cfg.dataset;
    let path = || {
        d.path
            .clone()
            .ok_or_else(|| anyhow!("dataset kind `{}` needs a path", d.kind))
    };
    let data = match d.kind.as_str() {
        "checkins" => Data::Checkins(load_checkins(path()?)?),
        "movielens" => Data::Ratings(load_movielens(path()?)?),
        "ratings" => Data::Ratings(load_ratings_csv(path()?)?),
        "synthetic" => {
            let s = &d.synthetic;
            Data::Ratings(generate_synthetic(
                s.n_users,
                s.n_items,
                s.n_factors,
                s.n_ratings,
                seed.derive("dataset"),
            )?)
        }
        "city" => Data::Checkins(generate_city(&d.city, seed.derive("dataset"))?),
        other => bail!("unknown dataset kind `{other}`"),
    };
    let empty = match &data {
        Data::Checkins(ds) => ds.is_empty(),
        Data::Ratings(ds) => ds.is_empty(),
    };
    if empty {
        bail!("dataset has no records");
    }
    Ok(data)
}

fn top_n(cfg: &ExperimentConfig) -> Out<TopNEvaluator> {
    let metric = cfg.metric().stage(Kind::Config, "config")?;
    TopNEvaluator::new(cfg.metric.top_n, metric).stage(Kind::Config, "recommender")
}

fn mf(ctx: &Ctx) -> Out<MfEvaluator> {
    let metric = ctx.cfg.metric().stage(Kind::Config, "config")?;
    let mut ev = MfEvaluator::new(
        ctx.cfg.recommender.mf.clone(),
        metric,
        ctx.seed.derive("mf"),
    )
    .stage(Kind::Config, "recommender")?;
    ev.clamp = ctx.cfg.recommender.clamp.map(|[lo, hi]| (lo, hi));
    if ctx.cfg.recommender.cache {
        ev = ev.with_cache(ModelCache::new(ctx.sink.path("model-cache")));
    }
    Ok(ev)
}

fn dispatch(ctx: &mut Ctx, data: Data) -> Out {
    match data {
        Data::Checkins(ds) => {
            let ev = top_n(ctx.cfg)?;
            match ctx.pipeline {
                "fake" => fake(ctx, &ds, &ev),
                "replace" => replace_run(ctx, &ds, &ev),
                "reduce" => reduce(ctx, &ds, &ev),
                "ingest" | "split" => write_data(ctx, &ds, write_checkins_csv, "checkins"),
                _ => generic(ctx, &ds, &ev),
            }
        }
        Data::Ratings(ds) => match ctx.pipeline {
            "ingest" | "split" => write_data(ctx, &ds, write_ratings_csv, "ratings"),
            _ if ctx.cfg.recommender.name == "mf" => {
                let ev = mf(ctx)?;
                generic(ctx, &ds, &ev)
            }
            _ => {
                let ev = top_n(ctx.cfg)?;
                generic(ctx, &ds, &ev)
            }
        },
    }
}

fn generic<R: Partitionable>(ctx: &mut Ctx, ds: &Dataset<R>, ev: &dyn Evaluator<R>) -> Out {
    match ctx.pipeline {
        "diff" => diff(ctx, ds, ev, true),
        "zscore" => diff(ctx, ds, ev, false),
        "baseline" => baseline(ctx, ds, ev),
        "stability-users" | "stability-data" => stability(ctx, ds, ev),
        "suppress" => suppress_run(ctx, ds, ev),
        other => runtime(
            Err(anyhow!("pipeline {other} is not available for this data")),
            other,
        ),
    }
}

#[derive(Serialize)]
struct DataSummary {
    records: usize,
    users: usize,
    items: usize,
    points: usize,
}

fn summary<R: Record>(ds: &Dataset<R>) -> DataSummary {
    DataSummary {
        records: ds.len(),
        users: ds.n_users(),
        items: ds.n_items(),
        points: ds.n_points(),
    }
}

type Writer<R> = fn(&Dataset<R>, BufWriter<File>) -> diffdata::Result<()>;

fn write_file<R: Record>(ctx: &mut Ctx, name: &str, ds: &Dataset<R>, w: Writer<R>) -> Out {
    let path = ctx.sink.path(name);
    let f = runtime(File::create(&path), "output")?;
    runtime(w(ds, BufWriter::new(f)), "output")?;
    ctx.sink.files.push(name.into());
    Ok(())
}

fn write_data<R: Record>(ctx: &mut Ctx, ds: &Dataset<R>, w: Writer<R>, stem: &str) -> Out {
    if ctx.pipeline == "split" {
        let split = split(ctx, ds)?;
        write_file(ctx, &format!("train_{stem}.csv"), &split.train, w)?;
        write_file(ctx, &format!("test_{stem}.csv"), &split.test, w)?;
        runtime(ctx.sink.output("train", &summary(&split.train)), "output")?;
        runtime(ctx.sink.output("test", &summary(&split.test)), "output")
    } else {
        write_file(ctx, &format!("{stem}.csv"), ds, w)?;
        runtime(ctx.sink.output("dataset", &summary(ds)), "output")
    }
}

fn split<R: Record>(ctx: &mut Ctx, ds: &Dataset<R>) -> Out<SplitPair<R>> {
    let tf = ctx.cfg.dataset.test_fraction;
    let seed = ctx.seed.derive("holdout");
    runtime(
        ctx.sink.timed("split", || holdout_split(ds, tf, seed)),
        "split",
    )
}

fn attr_config(ctx: &Ctx) -> Out<AttributeConfig> {
    ctx.cfg
        .attribute
        .config(ctx.seed)
        .stage(Kind::Config, "attribute")
}

/// Partition, differential run and z-scores on one split.
fn learn<R: Partitionable>(
    ctx: &mut Ctx,
    split: &SplitPair<R>,
    attr: &AttributeConfig,
    ev: &dyn Evaluator<R>,
    tag: &str,
) -> Out<(diffdata::diffscan::DifferentialResult, ZScoreTable)> {
    let part = runtime(
        ctx.sink.timed(&format!("partition{tag}"), || {
            R::partition(&split.train, attr)
        }),
        "partition",
    )?;
    let result = runtime(
        ctx.sink.timed(&format!("differential run{tag}"), || {
            differential_run(&split.train, &split.test, &part, ev)
        }),
        "differential run",
    )?;
    let table = runtime(zscores(&result), "zscore")?;
    Ok((result, table))
}

fn diff<R: Partitionable>(
    ctx: &mut Ctx,
    ds: &Dataset<R>,
    ev: &dyn Evaluator<R>,
    with_baseline: bool,
) -> Out {
    let split = split(ctx, ds)?;
    let attr = attr_config(ctx)?;
    let (result, table) = learn(ctx, &split, &attr, ev, "")?;
    let base = if with_baseline && ctx.cfg.baseline.enabled {
        let b = &ctx.cfg.baseline;
        let fraction = b.fraction.unwrap_or(1.0 / attr.n_chunks as f64);
        let (n, seed) = (b.n_trials, ctx.seed.derive("baseline"));
        Some(runtime(
            ctx.sink.timed("baseline", || {
                random_removal_baseline(&split.train, &split.test, fraction, n, ev, seed)
            }),
            "baseline",
        )?)
    } else {
        None
    };

    let mut rows = table_rows(&table, "");
    rows.push(ResultRow::summary("full", result.full_accuracy));
    if let Some(b) = &base {
        rows.push(ResultRow::summary("baseline", b.mean));
    }
    let out = (|| {
        ctx.sink.result_csv(&rows)?;
        ctx.sink.plot(&chunk_plot(
            &table,
            "chunk-removed",
            Some(result.full_accuracy),
            base.as_ref(),
        ))?;
        ctx.sink.output("differential", &result)?;
        ctx.sink.output("zscores", &table)?;
        if let Some(b) = &base {
            ctx.sink.output("baseline", b)?;
            let outside = result
                .chunks
                .iter()
                .filter(|c| !b.within(c.accuracy, 1.0))
                .count();
            ctx.sink.output("chunks_outside_one_std", &outside)?;
        }
        anyhow::Ok(())
    })();
    runtime(out, "output")?;
    print_table(&table, Some(result.full_accuracy));
    Ok(())
}

fn baseline<R: Partitionable>(ctx: &mut Ctx, ds: &Dataset<R>, ev: &dyn Evaluator<R>) -> Out {
    let split = split(ctx, ds)?;
    let full = runtime(
        ctx.sink
            .timed("full run", || ev.evaluate(&split.train, &split.test)),
        "full run",
    )?;
    let b = &ctx.cfg.baseline;
    let fraction = b.fraction.unwrap_or(1.0 / ctx.cfg.attribute.chunks as f64);
    let (n, seed) = (b.n_trials, ctx.seed.derive("baseline"));
    let stats = runtime(
        ctx.sink.timed("baseline", || {
            random_removal_baseline(&split.train, &split.test, fraction, n, ev, seed)
        }),
        "baseline",
    )?;
    let rows = [
        ResultRow::summary("full", full.value()),
        ResultRow::summary("baseline", stats.mean),
    ];
    let plot: Vec<PlotPoint> = stats
        .trials
        .iter()
        .enumerate()
        .map(|(i, &a)| PlotPoint::new((i + 1) as f64, a, "trial"))
        .collect();
    let out = (|| {
        ctx.sink.result_csv(&rows)?;
        ctx.sink.plot(&plot)?;
        ctx.sink.output("full", &full)?;
        ctx.sink.output("baseline", &stats)
    })();
    runtime(out, "output")?;
    println!(
        "full {}  baseline {} ± {}",
        full.value(),
        stats.mean,
        stats.std
    );
    Ok(())
}

fn stability<R: Partitionable>(ctx: &mut Ctx, ds: &Dataset<R>, ev: &dyn Evaluator<R>) -> Out {
    let attr = attr_config(ctx)?;
    let s = &ctx.cfg.stability;
    let seed = ctx.seed.derive("stability");
    let tf = ctx.cfg.dataset.test_fraction;
    let (by_users, n_groups, n_folds) = (ctx.pipeline == "stability-users", s.n_groups, s.n_folds);
    let report = runtime(
        ctx.sink.timed("stability", || {
            if by_users {
                stability_by_users(ds, n_groups, tf, &attr, ev, seed)
            } else {
                stability_by_data(ds, n_folds, &attr, ev, seed)
            }
        }),
        "stability",
    )?;
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    for g in &report.groups {
        let table = runtime(zscores(&g.result), "zscore")?;
        rows.extend(table_rows(&table, &g.label));
        rows.push(ResultRow::summary(
            &format!("{}/full", g.label),
            g.result.full_accuracy,
        ));
        for (i, &c) in g.centered.iter().enumerate() {
            plot.push(PlotPoint::new((i + 1) as f64, c, g.label.clone()));
        }
    }
    let out = (|| {
        ctx.sink.result_csv(&rows)?;
        ctx.sink.plot(&plot)?;
        ctx.sink
            .output("importance_orders", &report.importance_orders())?;
        ctx.sink.output("stability", &report)
    })();
    runtime(out, "output")?;
    for (g, order) in report.groups.iter().zip(report.importance_orders()) {
        println!("{}: {}", g.label, order.join(" > "));
    }
    Ok(())
}

/// Holdout splits of two disjoint user halves; z-scores are learned on the
/// first and applied to the second.
struct Halves<R> {
    a: SplitPair<R>,
    b: SplitPair<R>,
}

fn halves<R: Record>(ctx: &mut Ctx, ds: &Dataset<R>) -> Out<Halves<R>> {
    let tf = ctx.cfg.dataset.test_fraction;
    let seed = ctx.seed;
    runtime(
        ctx.sink.timed("split", || {
            let (a, b) = half_split(ds, seed.derive("halves"))?;
            Ok::<_, diffdata::Error>(Halves {
                a: holdout_split(&a, tf, seed.derive("holdout-a"))?,
                b: holdout_split(&b, tf, seed.derive("holdout-b"))?,
            })
        }),
        "split",
    )
}

#[derive(Serialize)]
struct SuppressRow {
    alpha: f64,
    beta: f64,
    accuracy: f64,
    removed_fraction: f64,
    k: f64,
    clamp_shortfall: f64,
}

fn suppress_run<R: Partitionable>(ctx: &mut Ctx, ds: &Dataset<R>, ev: &dyn Evaluator<R>) -> Out {
    let attr = attr_config(ctx)?;
    if matches!(attr.attribute, Attribute::Time { .. }) {
        return Err(anyhow!(
            "suppression needs chunk labels shared by both halves; time intervals are not"
        ))
        .stage(Kind::Config, "attribute");
    }
    let h = halves(ctx, ds)?;
    let (result_a, za) = learn(ctx, &h.a, &attr, ev, " (half A)")?;
    let pb = runtime(Partitionable::partition(&h.b.train, &attr), "partition")?;
    let full_b = runtime(ev.evaluate(&h.b.train, &h.b.test), "full run")?.value();
    let seed = ctx.seed.derive("suppress");
    let mut rows = Vec::new();
    let mut plans = Vec::new();
    let mut plot = Vec::new();
    for &beta in &ctx.cfg.suppress.betas {
        for &alpha in &ctx.cfg.suppress.alphas {
            let plan = runtime(build_suppression_plan(&za, alpha, beta), "suppression plan")?;
            let kept = runtime(
                ctx.sink
                    .timed(&format!("suppress alpha={alpha} beta={beta}"), || {
                        suppress(&h.b.train, &pb, &plan, seed)
                    }),
                "suppress",
            )?;
            let acc = runtime(ev.evaluate(&kept, &h.b.test), "evaluate")?.value();
            let removed = 1.0 - kept.n_points() as f64 / h.b.train.n_points() as f64;
            plot.push(PlotPoint::new(alpha, acc, format!("beta={beta}")));
            rows.push(SuppressRow {
                alpha,
                beta,
                accuracy: acc,
                removed_fraction: removed,
                k: plan.k,
                clamp_shortfall: plan.clamp_shortfall,
            });
            plans.push(plan);
        }
    }
    for &alpha in &ctx.cfg.suppress.alphas {
        plot.push(PlotPoint::new(alpha, full_b, "full"));
    }
    let mut result = table_rows(&za, "");
    result.push(ResultRow::summary("full", result_a.full_accuracy));
    let out = (|| {
        ctx.sink.result_csv(&result)?;
        ctx.sink.rows("sweep.csv", &rows)?;
        ctx.sink.plot(&plot)?;
        ctx.sink.json("plan.json", &plans)?;
        ctx.sink.output("zscores_half_a", &za)?;
        ctx.sink.output("full_half_b", &full_b)?;
        ctx.sink.output("sweep", &rows)
    })();
    runtime(out, "output")?;
    for r in &rows {
        println!("alpha {} beta {}: {}", r.alpha, r.beta, r.accuracy);
    }
    Ok(())
}

fn fake(ctx: &mut Ctx, ds: &CheckinDataset, ev: &dyn Evaluator<Checkin>) -> Out {
    let split = split(ctx, ds)?;
    let f = &ctx.cfg.fake;
    let hardship = f.hardship().stage(Kind::Config, "fake")?;
    let catalog = ds.locations();
    let (mult, n_chunks, seed) = (f.multiplier, f.n_chunks, ctx.seed.derive("fake"));
    let pool = runtime(
        ctx.sink.timed("generate fakes", || {
            generate_fake(&split.train, &catalog, mult, n_chunks, hardship, seed)
        }),
        "generate fakes",
    )?;
    let result = runtime(
        ctx.sink.timed("differential fake run", || {
            differential_fake_run(&split.train, &split.test, &pool, ev)
        }),
        "differential fake run",
    )?;
    let table = runtime(zscores(&result), "zscore")?;
    let mut rows = table_rows(&table, "");
    rows.push(ResultRow::summary("full", result.full_accuracy));
    let out = (|| {
        ctx.sink.result_csv(&rows)?;
        ctx.sink.plot(&chunk_plot(
            &table,
            "chunk-added",
            Some(result.full_accuracy),
            None,
        ))?;
        ctx.sink.output("differential", &result)?;
        ctx.sink.output("zscores", &table)?;
        ctx.sink.output(
            "pool",
            &json!({
                "fakes": pool.fakes.len(),
                "chunks": pool.n_chunks(),
                "multiplier": pool.multiplier,
                "users_with_replacement": pool.with_replacement.len(),
            }),
        )
    })();
    runtime(out, "output")?;
    print_table(&table, Some(result.full_accuracy));
    Ok(())
}

#[derive(Serialize)]
struct ReplaceRow {
    fraction: f64,
    beta: f64,
    series: &'static str,
    accuracy: f64,
    removed_points: usize,
    borrowed: usize,
}

fn replace_run(ctx: &mut Ctx, ds: &CheckinDataset, ev: &dyn Evaluator<Checkin>) -> Out {
    let attr = attr_config(ctx)?;
    let h = halves(ctx, ds)?;
    let (result_a, za) = learn(ctx, &h.a, &attr, ev, " (half A)")?;
    let pb = runtime(Checkin::partition(&h.b.train, &attr), "partition")?;
    let full_b = runtime(ev.evaluate(&h.b.train, &h.b.test), "full run")?.value();
    let f = &ctx.cfg.fake;
    let hardship = f.hardship().stage(Kind::Config, "fake")?;
    let catalog = ds.locations();
    let (mult, n_chunks, fake_seed) = (f.multiplier, f.n_chunks, ctx.seed.derive("fake"));
    let pool = runtime(
        ctx.sink.timed("generate fakes", || {
            generate_fake(&h.b.train, &catalog, mult, n_chunks, hardship, fake_seed)
        }),
        "generate fakes",
    )?;
    let r = &ctx.cfg.replace;
    let seed = ctx.seed.derive("replace");
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    for &fraction in &r.fractions {
        let rep = runtime(
            ctx.sink.timed(&format!("replace {fraction}"), || {
                replace(&h.b.train, &pb, &za, &pool, &r.mix, fraction, r.beta, seed)
            }),
            "replace",
        )?;
        let acc = runtime(ev.evaluate(&rep.data, &h.b.test), "evaluate")?.value();
        // Same removals without the fakes.
        let plan = runtime(
            build_suppression_plan(&za, fraction, r.beta),
            "suppression plan",
        )?;
        let mask = runtime(
            suppression_mask(&h.b.train, &pb, &plan, seed.derive("replace-suppress")),
            "suppress",
        )?;
        let only = runtime(
            ev.evaluate(&h.b.train.without_mask(&mask), &h.b.test),
            "evaluate",
        )?
        .value();
        for (series, a) in [("replace", acc), ("suppress-only", only)] {
            plot.push(PlotPoint::new(fraction, a, series));
            rows.push(ReplaceRow {
                fraction,
                beta: r.beta,
                series,
                accuracy: a,
                removed_points: rep.removed_points,
                borrowed: if series == "replace" { rep.borrowed } else { 0 },
            });
        }
        plot.push(PlotPoint::new(fraction, full_b, "full"));
    }
    let mut result = table_rows(&za, "");
    result.push(ResultRow::summary("full", result_a.full_accuracy));
    let out = (|| {
        ctx.sink.result_csv(&result)?;
        ctx.sink.rows("sweep.csv", &rows)?;
        ctx.sink.plot(&plot)?;
        ctx.sink.output("zscores_half_a", &za)?;
        ctx.sink.output("full_half_b", &full_b)?;
        ctx.sink.output("sweep", &rows)
    })();
    runtime(out, "output")?;
    for r in &rows {
        println!("{} {}: {}", r.series, r.fraction, r.accuracy);
    }
    Ok(())
}

#[derive(Serialize)]
struct ReduceRow {
    target: f64,
    realized: f64,
    steps: usize,
    accuracy: f64,
    relative: f64,
    random_mean: Option<f64>,
    random_std: Option<f64>,
}

fn reduce(ctx: &mut Ctx, ds: &CheckinDataset, ev: &dyn Evaluator<Checkin>) -> Out {
    let attr = attr_config(ctx)?;
    let h = halves(ctx, ds)?;
    let (result_a, za) = learn(ctx, &h.a, &attr, ev, " (half A)")?;
    let ra = &ctx.cfg.reduce;
    let time = if ra.use_time {
        let a = &ctx.cfg.attribute;
        let mut tattr = attr.clone();
        tattr.attribute = Attribute::Time {
            min_frac: a.min_frac,
            max_frac: a.max_frac,
        };
        Some(learn(ctx, &h.a, &tattr, ev, " (time, half A)")?.1)
    } else {
        None
    };
    let pb = runtime(Checkin::partition(&h.b.train, &attr), "partition")?;
    let full_b = runtime(ev.evaluate(&h.b.train, &h.b.test), "full run")?.value();
    let ra = ctx.cfg.reduce.clone();
    let b = ctx.cfg.baseline.clone();
    let mut rows = Vec::new();
    let mut plans = Vec::new();
    let mut plot = Vec::new();
    for &target in &ra.targets {
        let plan = if ra.calibrate {
            let full = runtime(
                full_reduction_plan(time.as_ref(), &za, ra.noise_threshold),
                "reduction plan",
            )?;
            runtime(
                calibrate_reduction_plan(&full, &h.b.train, &pb, target),
                "reduction plan",
            )?
        } else {
            runtime(
                build_reduction_plan(time.as_ref(), &za, target, ra.noise_threshold),
                "reduction plan",
            )?
        };
        let (reduced, realized) = runtime(
            ctx.sink.timed(&format!("reduce {target}"), || {
                apply_reduction(&h.b.train, &plan, &pb)
            }),
            "reduce",
        )?;
        let acc = runtime(ev.evaluate(&reduced, &h.b.test), "evaluate")?.value();
        let random = if b.enabled && realized > 0.0 && realized < 1.0 {
            let seed = ctx.seed.derive("reduce-random");
            Some(runtime(
                random_removal_baseline(&h.b.train, &h.b.test, realized, b.n_trials, ev, seed),
                "baseline",
            )?)
        } else {
            None
        };
        plot.push(PlotPoint::new(realized, acc, "reduction"));
        plot.push(PlotPoint::new(realized, full_b, "full"));
        if let Some(r) = &random {
            plot.push(PlotPoint::new(realized, r.mean, "random"));
        }
        rows.push(ReduceRow {
            target,
            realized,
            steps: plan.steps.len(),
            accuracy: acc,
            relative: acc / full_b,
            random_mean: random.as_ref().map(|r| r.mean),
            random_std: random.as_ref().map(|r| r.std),
        });
        plans.push(plan);
    }
    let mut result = table_rows(&za, "");
    if let Some(t) = &time {
        result.extend(table_rows(t, "time"));
    }
    result.push(ResultRow::summary("full", result_a.full_accuracy));
    let out = (|| {
        ctx.sink.result_csv(&result)?;
        ctx.sink.rows("sweep.csv", &rows)?;
        ctx.sink.plot(&plot)?;
        ctx.sink.json("plan.json", &plans)?;
        ctx.sink.output("zscores_half_a", &za)?;
        if let Some(t) = &time {
            ctx.sink.output("time_zscores_half_a", t)?;
        }
        ctx.sink.output("full_half_b", &full_b)?;
        ctx.sink.output("sweep", &rows)
    })();
    runtime(out, "output")?;
    for r in &rows {
        println!(
            "target {} realized {:.3}: {} ({:.3} of full)",
            r.target, r.realized, r.accuracy, r.relative
        );
    }
    Ok(())
}

fn synth(ctx: &mut Ctx) -> Out {
    let data = ctx
        .sink
        .timed("generate", || load(ctx.cfg, ctx.seed))
        .stage(Kind::Dataset, "generate")?;
    match data {
        Data::Checkins(ds) => write_data(ctx, &ds, write_checkins_csv, "checkins"),
        Data::Ratings(ds) => write_data(ctx, &ds, write_ratings_csv, "ratings"),
    }
}

fn result_path(from: &Path) -> PathBuf {
    if from.is_dir() {
        from.join("result.csv")
    } else {
        from.to_path_buf()
    }
}

fn read_table(ctx: &Ctx, from: &Path) -> Out<(ZScoreTable, Option<f64>)> {
    let (labels, acc, full) =
        read_result_csv(&result_path(from)).stage(Kind::Dataset, "read results")?;
    let metric: Metric = ctx.cfg.metric().stage(Kind::Config, "config")?;
    // Chunk sizes are not part of the file.
    let fractions = vec![f64::NAN; acc.len()];
    let table = runtime(
        zscores_from(&ctx.cfg.attribute.name, metric, &labels, &acc, &fractions),
        "zscore",
    )?;
    Ok((table, full))
}

fn zscore_from_file(ctx: &mut Ctx, from: &Path) -> Out {
    let (table, full) = read_table(ctx, from)?;
    let mut rows = table_rows(&table, "");
    if let Some(a) = full {
        rows.push(ResultRow::summary("full", a));
    }
    let out = (|| {
        ctx.sink.result_csv(&rows)?;
        ctx.sink.plot(&chunk_plot(&table, "chunk", full, None))?;
        ctx.sink.output("zscores", &table)
    })();
    runtime(out, "output")?;
    print_table(&table, full);
    Ok(())
}

/// Re-reads a finished run and emits its plot data and a summary.
fn report(ctx: &mut Ctx, from: &Path) -> Out {
    let (table, full) = read_table(ctx, from)?;
    let order = {
        let mut idx: Vec<usize> = (0..table.entries.len()).collect();
        idx.sort_by(|&a, &b| table.entries[a].z.total_cmp(&table.entries[b].z));
        idx.into_iter()
            .map(|i| table.entries[i].label.clone())
            .collect::<Vec<_>>()
    };
    let out = (|| {
        ctx.sink.plot(&chunk_plot(&table, "chunk", full, None))?;
        ctx.sink.json(
            "summary.json",
            &json!({ "source": result_path(from), "zscores": table, "full": full, "importance_order": order }),
        )
    })();
    runtime(out, "output")?;
    print_table(&table, full);
    println!("most important first: {}", order.join(" > "));
    Ok(())
}

fn print_table(table: &ZScoreTable, full: Option<f64>) {
    println!("{:<16} {:>12} {:>8}", "chunk", table.metric, "z");
    for e in &table.entries {
        println!("{:<16} {:>12.6} {:>8.3}", e.label, e.accuracy, e.z);
    }
    if let Some(a) = full {
        println!("{:<16} {:>12.6}", "full", a);
    }
}
