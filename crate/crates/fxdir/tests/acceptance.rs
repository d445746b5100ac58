//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use fxdir_core::backtest::{evaluate, profit_curve, EvalData, Protocol};
use fxdir_core::calendar::{days_in_month, next_day, weekday_index, ymd, DateRange, TradingDate};
use fxdir_core::features::{align_on_common_dates, apply_transforms, build_dataset, DatasetConfig, FeatureMatrix, Representation};
use fxdir_core::indicators::catalog;
use fxdir_core::marketdata::{build_panel, AlignedPanel, ColumnKind};
use fxdir_core::matrix::Matrix;
use fxdir_core::models::boost::{self, BoostKind, BoostParams};
use fxdir_core::models::logistic::loss_and_gradient;
use fxdir_core::models::{accuracy, default_search_space, train, DimKind, Family, ModelSpec, ParamValue, SearchSpace};
use fxdir_core::preprocess::fit_pca;
use fxdir_core::seed;
use fxdir_core::stacking::{oof_meta_features, train_stack, BaseSpec, StackSpec};
use fxdir_core::synth::{generate, PlantedSignal, SynthConfig};
use fxdir_core::tuning::cv::{feature_layout, CvTask};
use fxdir_core::tuning::search::run_search;
use fxdir_core::tuning::tpe::{sample_uniform, TpeConfig};
use fxdir_core::tuning::{make_fold_plan, Config, FoldPlanConfig, TierSpace};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn uniform_matrix(rows: usize, cols: usize, s: u64) -> Matrix {
    let mut rng = seed::rng(s);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn random_labels(n: usize, s: u64) -> Vec<u8> {
    let mut rng = seed::rng(s);
    (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect()
}

fn weekdays(from: TradingDate, to: TradingDate) -> Vec<TradingDate> {
    let mut out = Vec::new();
    let mut d = from;
    while d <= to {
        if weekday_index(d) < 5 {
            out.push(d);
        }
        d = next_day(d);
    }
    out
}

fn small_synth(seed_value: u64, planted: Option<PlantedSignal>) -> SynthConfig {
    SynthConfig {
        seed: seed_value,
        days: 2600,
        instruments: vec!["EURUSD".into(), "DAX".into()],
        indicators: vec!["USA_CPI_YOY".into(), "EA_CPI_YOY".into(), "EA_INTEREST_RATE".into()],
        planted,
        ..SynthConfig::default()
    }
}

fn panel(cfg: &SynthConfig) -> AlignedPanel {
    let data = generate(cfg).unwrap();
    let raw = build_panel(&data.series, &data.calendars, &cfg.target).unwrap();
    apply_transforms(&raw, None, None).unwrap().0
}

fn lag5() -> DatasetConfig {
    DatasetConfig { lag_depth: 5, ..DatasetConfig::default() }
}

fn indicator_oracle() -> Outcome {
    let started = Instant::now();
    let n = catalog().len();
    ensure(n == 92, || format!("catalog has {n} specs"))?;
    oracle::check_catalog(100, 500)?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("92 specs x 100 fixtures within 1e-9 in {secs:.1}s"))
}

/// Population covariance (1/n), computed here rather than by the library.
fn sample_cov(x: &Matrix) -> Vec<Vec<f64>> {
    let (n, p) = (x.nrows(), x.ncols());
    let mean: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; p]; p];
    for i in 0..n {
        for a in 0..p {
            for b in 0..p {
                c[a][b] += (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b]);
            }
        }
    }
    let denom = n as f64;
    c.iter_mut().flatten().for_each(|v| *v /= denom);
    c
}

fn pca() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for s in 0..50u64 {
        let p = 2 + (s as usize % 9);
        let n = 20 + 7 * p;
        // Correlated columns: each mixes the previous one.
        let mut x = uniform_matrix(n, p, seed::derive(0x9CA, s));
        for i in 0..n {
            for j in 1..p {
                let v = x.get(i, j) + 0.8 * x.get(i, j - 1);
                x.set(i, j, v);
            }
        }
        let t = fit_pca(&x).map_err(|e| e.to_string())?;
        let z = t.apply(&x).map_err(|e| e.to_string())?;
        ensure(z.ncols() == p, || format!("dimension {} != {p}", z.ncols()))?;
        let cz = sample_cov(&z);
        let off = (0..p).flat_map(|a| (0..p).filter(move |&b| b != a).map(move |b| (a, b))).map(|(a, b)| cz[a][b].abs());
        worst.0 = worst.0.max(off.fold(0.0, f64::max));
        let cx = sample_cov(&x);
        let trace: f64 = (0..p).map(|j| cx[j][j]).sum();
        worst.1 = worst.1.max((t.eigenvalues.iter().sum::<f64>() - trace).abs());
        let back = t.inverse(&z).map_err(|e| e.to_string())?;
        let rt = back.as_slice().iter().zip(x.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst.2 = worst.2.max(rt);
    }
    let (off, tr, rt) = worst;
    ensure(off < 1e-8 && tr < 1e-8 && rt < 1e-8, || format!("off-diag {off:e}, trace {tr:e}, round trip {rt:e}"))?;
    Ok(format!("50 fixtures: off-diag {off:.1e}, trace {tr:.1e}, round trip {rt:.1e}"))
}

fn profit() -> Outcome {
    let hand = profit_curve(&[1, 0], &[1.0, 1.1, 1.0]).map_err(|e| e.to_string())?.final_value();
    ensure((hand - 1.21).abs() < 1e-12, || format!("hand case {hand}"))?;

    let mut worst: f64 = 0.0;
    for i in 0..1000u64 {
        let mut rng = seed::rng(seed::derive(0x12EC, i));
        let n = rng.random_range(1..250);
        let mut closes = vec![1.1f64];
        for _ in 0..n {
            let last = *closes.last().unwrap();
            closes.push(last * (1.0 + rng.random_range(-0.02..0.02)));
        }
        let preds: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let flipped: Vec<u8> = preds.iter().map(|p| 1 - p).collect();
        let a = profit_curve(&preds, &closes).map_err(|e| e.to_string())?.final_value();
        let b = profit_curve(&flipped, &closes).map_err(|e| e.to_string())?.final_value();
        worst = worst.max((a * b - 1.0).abs());
    }
    ensure(worst < 1e-9, || format!("reciprocity error {worst:e}"))?;

    let dates = weekdays(ymd(2021, 1, 1), ymd(2022, 12, 31));
    let mut rng = seed::rng(31);
    let mut c = vec![1.2f64];
    for _ in 0..dates.len() {
        let last = *c.last().unwrap();
        c.push(last * (1.0 + rng.random_range(-0.01..0.01)));
    }
    let (close, next_close) = (c[..dates.len()].to_vec(), c[1..].to_vec());
    let labels: Vec<u8> = close.iter().zip(&next_close).map(|(a, b)| u8::from(b > a)).collect();
    let data = EvalData { dates: &dates, labels: &labels, close: &close, next_close: &next_close };
    let report = evaluate(Protocol::MonthlyRetrain, 2022, data, |_, test| Ok(test.iter().map(|&i| (i % 2) as u8).collect()))
        .map_err(|e| e.to_string())?;
    let product: f64 = report.months.iter().map(|m| m.growth).product();
    let gap = (product - report.curve.final_value()).abs();
    ensure(report.months.len() == 12 && gap < 1e-12, || format!("{} months, gap {gap:e}", report.months.len()))?;
    Ok(format!("hand case 1.21, reciprocity {worst:.1e} over 1000, monthly gap {gap:.1e}"))
}

fn fold_plan() -> Outcome {
    let dates = weekdays(ymd(2013, 11, 26), ymd(2022, 12, 31));
    let plan = make_fold_plan(&dates, &FoldPlanConfig::default()).map_err(|e| e.to_string())?;
    ensure(plan.folds.len() == 8, || format!("{} folds", plan.folds.len()))?;
    for (k, f) in plan.folds.iter().enumerate() {
        let (year, q) = (2020 + (k / 4) as i32, (k % 4) as u32);
        let start = ymd(year, 3 * q + 1, 1);
        let end = ymd(year, 3 * q + 3, days_in_month(year, 3 * q + 3));
        ensure(f.validation == DateRange { start, end }, || format!("fold {} validation {:?}", k + 1, f.validation))?;
        ensure(f.train.start == ymd(2013, 11, 26), || format!("fold {} train starts {}", k + 1, f.train.start))?;
        ensure(next_day(f.train.end) == f.validation.start, || format!("fold {} gap", k + 1))?;
        if k > 0 {
            ensure(f.train.end > plan.folds[k - 1].train.end, || format!("fold {} not strictly nested", k + 1))?;
        }
    }
    ensure(plan.folds[0].train.end == ymd(2019, 12, 31), || format!("fold 1 ends {}", plan.folds[0].train.end))?;
    Ok("8 quarterly folds 2020Q1-2021Q4, fold 1 trains 2013-11-26..2019-12-31, strictly nested".into())
}

fn model_sanity() -> Outcome {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for probe in 0..50u64 {
        let mut rng = seed::rng(seed::derive(0xF0D, probe));
        let (n, p) = (rng.random_range(5..40), rng.random_range(1..8));
        let x = uniform_matrix(n, p, seed::derive(1, probe));
        let y = random_labels(n, seed::derive(2, probe));
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(0.0..0.5);
        let (_, gw, gb) = loss_and_gradient(&w, b, &x, &y, l2);
        let mut err2 = 0.0;
        let mut norm2 = 0.0;
        for j in 0..=p {
            let at = |d: f64| {
                let (mut w2, mut b2) = (w.clone(), b);
                if j < p {
                    w2[j] += d;
                } else {
                    b2 += d;
                }
                loss_and_gradient(&w2, b2, &x, &y, l2).0
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let analytic = if j < p { gw[j] } else { gb };
            err2 += (analytic - numeric) * (analytic - numeric);
            norm2 += analytic * analytic;
        }
        worst = worst.max(err2.sqrt() / norm2.sqrt().max(1e-12));
    }
    ensure(worst < 1e-4, || format!("gradient relative error {worst:e}"))?;

    let x = uniform_matrix(300, 4, 8);
    let y = random_labels(300, 9);
    let train_acc = |spec: ModelSpec| -> Result<f64, String> {
        let m = train(&spec, &x, &y).map_err(|e| e.to_string())?;
        Ok(accuracy(&m.predict(&x).map_err(|e| e.to_string())?, &y))
    };
    let knn = train_acc(ModelSpec::new(Family::Knn).with("k", ParamValue::Int(1)))?;
    let cart = train_acc(ModelSpec::new(Family::Tree))?;
    ensure(knn == 1.0 && cart == 1.0, || format!("train accuracy knn {knn}, cart {cart}"))?;

    let params = |kind, bins| BoostParams { kind, n_stages: 40, shrinkage: 0.3, max_depth: 3, min_leaf: 1, bins, l2: 1.0 };
    for kind in [BoostKind::Exact, BoostKind::Histogram, BoostKind::Newton] {
        let m = boost::fit(&params(kind, 16), &x, &y).map_err(|e| e.to_string())?;
        ensure(m.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-12), || format!("{kind:?} loss increased"))?;
    }
    let (xs, ys) = (uniform_matrix(150, 4, 31), random_labels(150, 32));
    let q = uniform_matrix(80, 4, 33);
    let exact = boost::fit(&params(BoostKind::Exact, 255), &xs, &ys).map_err(|e| e.to_string())?;
    let hist = boost::fit(&params(BoostKind::Histogram, 150), &xs, &ys).map_err(|e| e.to_string())?;
    ensure(exact.raw_scores(&q) == hist.raw_scores(&q), || "histogram boosting differs from exact".into())?;
    Ok(format!("gradient rel err {worst:.1e}, knn/cart train acc 1.0, boosting monotone, histogram = exact"))
}

fn leakage() -> Outcome {
    let p = panel(&small_synth(5, None));
    let data = build_dataset(&p, Representation::D1, &lag5()).map_err(|e| e.to_string())?;
    let plan = make_fold_plan(&data.dates, &FoldPlanConfig::default()).map_err(|e| e.to_string())?;
    let layout = feature_layout(&data, &Family::Logistic);
    let space = TierSpace::new(1, &default_search_space(&Family::Logistic).unwrap(), &layout).map_err(|e| e.to_string())?;
    let config: Config = [("iters".to_string(), ParamValue::Int(300))].into_iter().collect();
    let mut scores = Vec::new();
    for s in 0..20u64 {
        let mut shuffled = data.clone();
        shuffled.labels.shuffle(&mut seed::rng(seed::derive(0xACCE, s)));
        let task = CvTask::new(&shuffled, &plan, &space, Family::Logistic, false, s).map_err(|e| e.to_string())?;
        scores.push(task.cv_accuracy(&config).map_err(|e| e.to_string())?);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    ensure((0.45..=0.55).contains(&mean), || format!("permuted-label CV mean {mean:.4}"))?;

    let cfg = small_synth(3, None);
    let synth = generate(&cfg).map_err(|e| e.to_string())?;
    let raw = build_panel(&synth.series, &synth.calendars, &cfg.target).map_err(|e| e.to_string())?;
    let cut = ymd(2019, 7, 3);
    let (base, ledger) = apply_transforms(&raw, None, Some(DateRange { start: raw.dates[0], end: cut })).map_err(|e| e.to_string())?;
    let mut shifted = raw.clone();
    let mut rng = seed::rng(17);
    for col in shifted.columns.iter_mut() {
        for (d, v) in raw.dates.iter().zip(col.values.iter_mut()) {
            if *d > cut {
                *v = match col.kind {
                    ColumnKind::DaysSince => *v + f64::from(rng.random_range(0..5u8)),
                    _ => *v * rng.random_range(0.5..1.5) + 0.01,
                };
            }
        }
    }
    let (perturbed, _) = apply_transforms(&shifted, Some(&ledger), None).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for repr in Representation::ALL {
        let a = build_dataset(&base, repr, &lag5()).map_err(|e| e.to_string())?;
        let b = build_dataset(&perturbed, repr, &lag5()).map_err(|e| e.to_string())?;
        for i in (0..a.nrows()).filter(|&i| a.dates[i] <= cut) {
            ensure(b.dates[i] == a.dates[i] && a.x.row(i) == b.x.row(i), || format!("{repr:?} row {} changed", a.dates[i]))?;
            checked += 1;
        }
    }
    Ok(format!("permuted-label CV mean {mean:.4} over 20 seeds; {checked} past rows unchanged by future perturbation"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
}

fn search() -> Outcome {
    let mut bowl = SearchSpace::default();
    for i in 0..4 {
        bowl.push(&format!("x{i}"), DimKind::Real { lo: -5.0, hi: 5.0, log: false });
    }
    let mut sparse = SearchSpace::default();
    for i in 0..20 {
        sparse.push(&format!("f{i}"), DimKind::Boolean);
    }
    let mut step = SearchSpace::default();
    step.push("c", DimKind::Categorical { options: (0..8).map(|i| format!("c{i}")).collect() });
    step.push("n", DimKind::Int { lo: 1, hi: 20 });
    type Objective = fn(&Config) -> f64;
    let objectives: [(&str, SearchSpace, Objective); 3] = [
        ("bowl", bowl, |c| -(0..4).map(|i| (c[&format!("x{i}")].as_f64().unwrap() - 1.5).powi(2)).sum::<f64>()),
        ("sparse", sparse, |c| {
            let on = |i: usize| c[&format!("f{i}")] == ParamValue::Bool(true);
            0.1 * (0..3).filter(|&i| on(i)).count() as f64 - 0.02 * (3..20).filter(|&i| on(i)).count() as f64
        }),
        ("step", step, |c| {
            let n = if let ParamValue::Int(n) = c["n"] { n } else { 0 };
            f64::from(c["c"] == ParamValue::Cat("c5".into())) + 0.5 * f64::from(n >= 15)
        }),
    ];
    let mut wins = 0;
    let mut notes = Vec::new();
    for (name, space, f) in objectives {
        let space = TierSpace::new(1, &space, &[]).map_err(|e| e.to_string())?;
        let best = |cfg: TpeConfig| -> Result<f64, String> {
            let mut v = Vec::new();
            for s in 0..20 {
                let r = run_search(&space, 50, &[], cfg, s, |c| Ok(f(c))).map_err(|e| e.to_string())?;
                v.push(r.best.objective.unwrap_or(f64::NEG_INFINITY));
            }
            Ok(median(v))
        };
        let (tpe, random) = (best(TpeConfig::default())?, best(TpeConfig::random())?);
        wins += usize::from(tpe > random);
        notes.push(format!("{name} {tpe:.3}/{random:.3}"));
    }
    ensure(wins >= 2, || format!("TPE beat random on {wins}/3 ({})", notes.join(", ")))?;

    let mut layout = Vec::new();
    for (cat, n) in [("EURUSD", 4), ("DAX", 3), ("USA_CPI_YOY", 2)] {
        layout.extend((0..n).map(|i| (format!("{cat}_f{i}"), cat.to_string())));
    }
    let hyper = default_search_space(&Family::Svm).unwrap();
    let tiers = [1, 2, 3].map(|t| TierSpace::new(t, &hyper, &layout).unwrap());
    for s in 0..500u64 {
        for k in 0..2 {
            let c = sample_uniform(&tiers[k].space, &mut seed::rng(seed::derive(0x11F7, s)));
            let lifted = tiers[k + 1].lift(&c);
            ensure(tiers[k + 1].admits(&lifted), || format!("tier {} lift of sample {s} invalid", k + 1))?;
        }
    }
    Ok(format!("TPE beat random on {wins}/3 ({}); 1000 lifts valid", notes.join(", ")))
}

fn stacking() -> Outcome {
    let p = panel(&small_synth(11, Some(PlantedSignal { window: 3, noise: 0.15 })));
    let d: Vec<FeatureMatrix> = Representation::ALL.iter().map(|&r| build_dataset(&p, r, &lag5()).unwrap()).collect();
    let sets = align_on_common_dates(&[&d[0], &d[1], &d[2]]);
    let plan = make_fold_plan(&sets[0].dates, &FoldPlanConfig::default()).map_err(|e| e.to_string())?;
    let tree = |depth| ModelSpec::new(Family::Tree).with("max_depth", ParamValue::Int(depth));
    let spec = StackSpec {
        bases: Representation::ALL
            .iter()
            .map(|&r| BaseSpec { model: tree(3), representation: r, use_pca: false })
            .collect(),
        meta: tree(4),
        meta_representation: Representation::D3,
        meta_use_pca: false,
        score_passthrough: false,
    };
    let refs: Vec<&FeatureMatrix> = sets.iter().collect();
    let rows: Vec<usize> = (0..sets[0].nrows()).filter(|&i| sets[0].dates[i] < ymd(2022, 1, 1)).collect();
    let model = train_stack(&spec, &refs, &plan, &rows).map_err(|e| e.to_string())?;
    let f3 = sets[2].view_columns(Family::Tree.date_family()).len();
    ensure(model.meta_width() == f3 + 3, || format!("meta width {} != {f3} + 3", model.meta_width()))?;
    let oof = oof_meta_features(&spec, &refs, &plan, &rows).map_err(|e| e.to_string())?;
    ensure(oof.rows.len() == model.meta_rows && !oof.rows.is_empty(), || "meta rows mismatch".into())?;
    for (k, &i) in oof.rows.iter().enumerate() {
        let prov = oof.provenance.get(oof.row_segment[k]).ok_or("row without provenance")?;
        let date = sets[2].dates[i];
        ensure(prov.segment.contains(date) && prov.train_last < date, || format!("row {date} provenance {prov:?}"))?;
    }
    Ok(format!("meta width {} = F3 {f3} + 3; {} meta rows with out-of-fold provenance", model.meta_width(), oof.rows.len()))
}

const PIPELINE_CONFIG: &str = r#"
seed = 7
data_dir = "data"
output_dir = "results"
run_id = "accept"
protocols = ["monthly", "annually"]

[dataset]
representations = ["D1", "D3"]
lag_depth = 5

[tuning]
budgets = [5, 5, 5]
chunk = 5
top_q = 3

[[models]]
name = "tree"
family = "TREE"

[[models]]
name = "tree_pca"
family = "TREE"
pca = true
tune = false
representations = ["D3"]
params = { max_depth = 4 }

[[stacks]]
name = "stack"
meta = "TREE"
meta_params = { max_depth = 3 }
meta_representation = "D3"
[[stacks.bases]]
family = "TREE"
representation = "D1"
params = { max_depth = 3 }
[[stacks.bases]]
family = "TREE"
representation = "D3"
params = { max_depth = 3 }
"#;

struct PipelineRun {
    root: tempfile::TempDir,
    secs: f64,
}

impl PipelineRun {
    fn run_dir(&self) -> PathBuf {
        self.root.path().join("results/accept")
    }
}

fn pipeline() -> Result<PipelineRun, String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(root.path().join("exp.toml"), PIPELINE_CONFIG).map_err(|e| e.to_string())?;
    let started = Instant::now();
    for cmd in ["synth", "ingest", "build", "tune", "train", "backtest", "report"] {
        let out = Command::new(env!("CARGO_BIN_EXE_fxdir"))
            .current_dir(root.path())
            .args(["--config", "exp.toml", cmd])
            .env_remove("FXDIR_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("`fxdir {cmd}` failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    Ok(PipelineRun { root, secs: started.elapsed().as_secs_f64() })
}

fn read_table(run: &PipelineRun) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let text = std::fs::read_to_string(run.run_dir().join("table.csv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    let header = lines.next().ok_or("empty table.csv")?;
    Ok((header, lines.collect()))
}

fn planted_signal(run: &Result<PipelineRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let (_, rows) = read_table(run)?;
    let acc = |model: &str, dataset: &str| -> Result<f64, String> {
        rows.iter()
            .find(|r| r[0] == model && r[1] == dataset && r[2] == "annually")
            .ok_or_else(|| format!("no {model} {dataset} annually row"))?[3]
            .parse::<f64>()
            .map_err(|e| e.to_string())
    };
    let d3 = acc("tree", "D3")?;
    let pca = acc("tree_pca", "D3")?;
    let d1 = acc("tree", "D1")?;
    ensure(d3 >= 75.0, || format!("tuned tree on D3 holdout accuracy {d3:.1}%"))?;
    ensure(run.secs < 600.0, || format!("pipeline took {:.0}s", run.secs))?;
    Ok(format!("tuned tree D3 holdout {d3:.1}% (PCA variant {pca:.1}%, D1 variant {d1:.1}%), pipeline {:.0}s", run.secs))
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap_or_default());
            }
        }
    }
    out
}

fn determinism(a: &Result<PipelineRun, String>) -> Outcome {
    let a = a.as_ref().map_err(Clone::clone)?;
    let b = pipeline()?;
    let (fa, fb) = (csv_files(a.root.path()), csv_files(b.root.path()));
    ensure(fa.len() > 10, || format!("only {} CSV files", fa.len()))?;
    let names_a: Vec<_> = fa.keys().collect();
    let names_b: Vec<_> = fb.keys().collect();
    ensure(names_a == names_b, || "runs wrote different CSV sets".into())?;
    for (path, bytes) in &fa {
        ensure(&fb[path] == bytes, || format!("{} differs", path.display()))?;
    }
    Ok(format!("{} CSV files byte-identical across two seed-7 runs", fa.len()))
}

fn report_shape(run: &Result<PipelineRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let (header, rows) = read_table(run)?;
    ensure(header == ["model", "dataset", "protocol", "Acc", "Pro"], || format!("header {header:?}"))?;
    let one_decimal = |s: &str| {
        let s = s.strip_prefix('-').unwrap_or(s);
        s.split_once('.').is_some_and(|(i, f)| !i.is_empty() && i.bytes().all(|b| b.is_ascii_digit()) && f.len() == 1 && f.bytes().all(|b| b.is_ascii_digit()))
    };
    let mut cells: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for r in &rows {
        ensure(r.len() == 5 && one_decimal(&r[3]) && one_decimal(&r[4]), || format!("bad row {r:?}"))?;
        cells.entry((r[0].clone(), r[1].clone())).or_default().push(r[2].clone());
    }
    for (k, protocols) in &cells {
        ensure(protocols == &["monthly", "annually"], || format!("{k:?} has protocols {protocols:?}"))?;
    }
    ensure(cells.len() == 4, || format!("{} model x dataset cells", cells.len()))?;
    Ok(format!("{} rows: model x dataset x {{monthly, annually}} x {{Acc, Pro}}, 1 decimal", rows.len()))
}

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report("1 indicator oracle", indicator_oracle);
    ok &= report("2 pca", pca);
    ok &= report("3 profit metric", profit);
    ok &= report("4 fold plan", fold_plan);
    ok &= report("5 model sanity", model_sanity);
    ok &= report("6 leakage nulls", leakage);
    let run = pipeline();
    ok &= report("7 planted signal", || planted_signal(&run));
    ok &= report("8 search effectiveness", search);
    ok &= report("9 stacking", stacking);
    ok &= report("10 determinism", || determinism(&run));
    ok &= report("11 report shape", || report_shape(&run));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
