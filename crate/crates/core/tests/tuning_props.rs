mod common;

use fxdir_core::calendar::{next_day, weekday_index, ymd, DateRange, TradingDate};
use fxdir_core::error::Error;
use fxdir_core::features::{FeatureMatrix, Representation};
use fxdir_core::matrix::Matrix;
use fxdir_core::models::{default_search_space, DimKind, Family, ParamValue, SearchSpace};
use fxdir_core::seed;
use fxdir_core::tuning::cv::{feature_layout, CvTask};
use fxdir_core::tuning::search::{run_search, run_tiers, Search, TierSchedule, Trial, TrialStatus};
use fxdir_core::tuning::tpe::TpeConfig;
use fxdir_core::tuning::{make_fold_plan, transfer, Config, FoldPlanConfig, TierSpace};
use proptest::prelude::*;
use rand::Rng;

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

#[test]
fn fold_plan_invariants() {
    let dates = weekdays(ymd(2013, 11, 26), ymd(2022, 12, 31));
    let plan = make_fold_plan(&dates, &FoldPlanConfig::default()).unwrap();
    assert_eq!(plan.folds.len(), 8);
    assert_eq!(plan.validation_span(), Some(DateRange { start: ymd(2020, 1, 1), end: ymd(2021, 12, 31) }));
    for (k, f) in plan.folds.iter().enumerate() {
        assert_eq!(f.train.start, ymd(2013, 11, 26));
        assert_eq!(next_day(f.train.end), f.validation.start);
        assert!(!f.train.contains(f.validation.start) && !f.train.contains(f.validation.end));
        if k > 0 {
            let prev = &plan.folds[k - 1];
            assert_eq!(next_day(prev.validation.end), f.validation.start);
            assert!(f.train.end > prev.train.end);
        }
    }
    assert_eq!(plan.folds[0].train.end, ymd(2019, 12, 31));
    assert!(matches!(
        make_fold_plan(&weekdays(ymd(2014, 1, 1), ymd(2022, 1, 1)), &FoldPlanConfig::default()),
        Err(Error::DateCoverage(_))
    ));
}

fn real_space(lo: f64, hi: f64) -> TierSpace {
    let mut s = SearchSpace::default();
    s.push("x", DimKind::Real { lo, hi, log: false });
    TierSpace::new(1, &s, &[]).unwrap()
}

fn x_of(c: &Config) -> f64 {
    c["x"].as_f64().unwrap()
}

#[test]
fn tpe_finds_quadratic_minimum() {
    let space = real_space(0.0, 1.0);
    let mut hits = 0;
    for s in 0..20 {
        let r = run_search(&space, 50, &[], TpeConfig::default(), s, |c| Ok(-(x_of(c) - 0.3).powi(2))).unwrap();
        if (x_of(&r.best.config) - 0.3).abs() < 0.05 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

struct Objective {
    name: &'static str,
    space: TierSpace,
    f: fn(&Config) -> f64,
}

fn objectives() -> Vec<Objective> {
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
    vec![
        Objective {
            name: "quadratic bowl",
            space: TierSpace::new(1, &bowl, &[]).unwrap(),
            f: |c| -(0..4).map(|i| (c[&format!("x{i}")].as_f64().unwrap() - 1.5).powi(2)).sum::<f64>(),
        },
        Objective {
            name: "planted sparse features",
            space: TierSpace::new(1, &sparse, &[]).unwrap(),
            f: |c| {
                let on = |i: usize| c[&format!("f{i}")] == ParamValue::Bool(true);
                0.5 + 0.1 * (0..3).filter(|&i| on(i)).count() as f64 - 0.02 * (3..20).filter(|&i| on(i)).count() as f64
            },
        },
        Objective {
            name: "categorical step",
            space: TierSpace::new(1, &step, &[]).unwrap(),
            f: |c| {
                let cat = f64::from(c["c"] == ParamValue::Cat("c5".into()));
                let n = match c["n"] {
                    ParamValue::Int(n) => n,
                    _ => 0,
                };
                cat + 0.5 * f64::from(n >= 15)
            },
        },
    ]
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
}

#[test]
fn tpe_beats_random_on_most_objectives() {
    let mut wins = 0;
    for o in objectives() {
        let best = |cfg: TpeConfig| -> f64 {
            median(
                (0..20)
                    .map(|s| run_search(&o.space, 50, &[], cfg, s, |c| Ok((o.f)(c))).unwrap().best.objective.unwrap())
                    .collect(),
            )
        };
        let (tpe, random) = (best(TpeConfig::default()), best(TpeConfig::random()));
        println!("{}: tpe {tpe:.4} random {random:.4}", o.name);
        if tpe >= random {
            wins += 1;
        }
    }
    assert!(wins >= 2, "TPE won {wins}/3");
}

#[test]
fn run_search_counting_and_ties() {
    let space = real_space(0.0, 1.0);
    let r = run_search(&space, 1, &[], TpeConfig::default(), 0, |_| Ok(0.5)).unwrap();
    assert_eq!(r.history.len(), 1);

    let mut calls = 0;
    let r = run_search(&space, 10, &[], TpeConfig::default(), 0, |_| {
        calls += 1;
        Ok(if calls == 4 || calls == 8 { 0.9 } else { 0.5 })
    })
    .unwrap();
    assert_eq!(r.best.id, 3);

    let warm = Trial {
        id: 0,
        tier: 1,
        config: [("x".to_string(), ParamValue::Real(0.7))].into_iter().collect(),
        objective: Some(1.0),
        status: TrialStatus::Ok,
        parent: None,
        note: None,
    };
    let r = run_search(&space, 5, &[warm], TpeConfig::default(), 0, |_| Ok(0.6)).unwrap();
    assert_eq!(r.best.objective, Some(1.0));
    assert_eq!(r.history.len(), 6);

    let failed = run_search(&space, 4, &[], TpeConfig::default(), 0, |_| Err(Error::Validation("no".into())));
    assert!(matches!(failed, Err(Error::Search(_))));
}

#[test]
fn search_is_deterministic() {
    let space = real_space(-1.0, 1.0);
    let run = || run_search(&space, 30, &[], TpeConfig::default(), 42, |c| Ok(-x_of(c).abs())).unwrap();
    assert_eq!(run(), run());
}

fn layout() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (cat, n) in [("EURUSD", 4), ("DAX", 3), ("USA_CPI_YOY", 2)] {
        for i in 0..n {
            out.push((format!("{cat}_f{i}"), cat.to_string()));
        }
    }
    out
}

fn tier_spaces() -> [TierSpace; 3] {
    let hyper = default_search_space(&Family::Svm).unwrap();
    let f = layout();
    [1, 2, 3].map(|t| TierSpace::new(t, &hyper, &f).unwrap())
}

#[test]
fn transfer_truncates_and_lifts() {
    let spaces = tier_spaces();
    let mut parent = Search::new(&spaces[0], TpeConfig::default(), 1);
    parent.step(3, &mut |_: &Config| Ok(0.5));
    let mut child = Search::new(&spaces[1], TpeConfig::default(), 2);
    assert_eq!(transfer(&parent, &mut child, 10), 3);
    for t in &child.history {
        assert!(t.transferred());
        assert!(spaces[1].admits(&t.config));
        assert!(t.config.iter().filter(|(k, _)| k.starts_with("cat:")).all(|(_, v)| *v == ParamValue::Bool(true)));
    }
    // Lifting is idempotent in the child's history.
    assert_eq!(transfer(&parent, &mut child, 10), 0);
}

#[test]
fn tiered_schedule_counts() {
    let spaces = tier_spaces();
    let schedule = TierSchedule { budgets: [5, 5, 5], chunk: 25, top_q: 10 };
    let r = run_tiers(&spaces, &schedule, TpeConfig::default(), 7, |tier, c| {
        Ok(0.5 + 0.01 * f64::from(tier) + 0.001 * c.len() as f64)
    })
    .unwrap();
    let evaluated: usize = r.tiers.iter().map(|t| t.history.iter().filter(|x| !x.transferred()).count()).sum();
    assert_eq!(evaluated, 15);
    assert!(r.tiers[1].history.iter().any(|t| t.transferred()));
    assert!(r.tiers[2].history.iter().any(|t| t.transferred()));
    assert!(r.tiers[0].history.iter().all(|t| !t.transferred()));
    for (t, s) in r.tiers.iter().zip(&spaces) {
        assert!(t.history.iter().all(|x| s.admits(&x.config)));
    }
}

fn random_config(space: &TierSpace, s: u64) -> Config {
    fxdir_core::tuning::tpe::sample_uniform(&space.space, &mut seed::rng(s))
}

proptest! {
    #[test]
    fn lifted_trials_are_valid(s in any::<u64>()) {
        let spaces = tier_spaces();
        let c1 = random_config(&spaces[0], s);
        let c2 = spaces[1].lift(&c1);
        prop_assert!(spaces[1].admits(&c2));
        let c2_random = random_config(&spaces[1], s ^ 0xABC);
        let c3 = spaces[2].lift(&c2_random);
        prop_assert!(spaces[2].admits(&c3));
        prop_assert_eq!(spaces[1].feature_mask(&c2_random), spaces[2].feature_mask(&c3));
        prop_assert_eq!(spaces[1].feature_mask(&c2).len(), layout().len());
    }
}

fn planted_matrix() -> FeatureMatrix {
    let dates = weekdays(ymd(2013, 11, 26), ymd(2021, 12, 31));
    let n = dates.len();
    let labels = common::random_labels(n, 3);
    let mut rng = seed::rng(4);
    let rows: Vec<Vec<f64>> =
        labels.iter().map(|&l| vec![f64::from(l), rng.random::<f64>(), rng.random::<f64>()]).collect();
    FeatureMatrix {
        representation: Representation::D1,
        dates,
        names: vec!["signal".into(), "noise_a".into(), "noise_b".into()],
        categories: vec!["S".into(), "N".into(), "N".into()],
        x: Matrix::from_rows(&rows).unwrap(),
        labels,
        close: vec![1.0; n],
        next_close: vec![1.0; n],
        dropped: Vec::new(),
    }
}

#[test]
fn cv_accuracy_recovers_a_planted_feature() {
    let data = planted_matrix();
    let plan = make_fold_plan(&data.dates, &FoldPlanConfig::default()).unwrap();
    let layout = feature_layout(&data, &Family::Tree);
    let hyper = default_search_space(&Family::Tree).unwrap();
    let space = TierSpace::new(3, &hyper, &layout).unwrap();
    let task = CvTask::new(&data, &plan, &space, Family::Tree, false, 0).unwrap();
    assert_eq!(task.n_folds(), 8);
    let mut config: Config = [("max_depth".to_string(), ParamValue::Int(1)), ("min_leaf".to_string(), ParamValue::Int(1))]
        .into_iter()
        .collect();
    for (name, cat) in &layout {
        config.insert(format!("cat:{cat}"), ParamValue::Bool(true));
        config.insert(format!("feat:{name}"), ParamValue::Bool(name == "signal"));
    }
    assert_eq!(task.cv_accuracy(&config).unwrap(), 1.0);
    config.insert("cat:S".into(), ParamValue::Bool(false));
    assert!(matches!(task.cv_accuracy(&config), Err(Error::Validation(_))));
}
