//! `synth`, `ingest`, `build`, `tune`, `train`, `backtest` and `report`.
//!
//! Every command owns one output directory, records a manifest there and
//! does nothing when the manifest shows an identical earlier run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::Datelike;
use fxdir_core::backtest::{evaluate, EvalReport, Protocol};
use fxdir_core::calendar::{prev_day, ymd, DateRange, TradingDate};
use fxdir_core::error::Error as CoreError;
use fxdir_core::features::{align_on_common_dates, apply_transforms, build_dataset, FeatureMatrix, Representation, TransformLedger};
use fxdir_core::marketdata::build_panel;
use fxdir_core::models::{default_search_space, Family, ModelSpec};
use fxdir_core::pipeline::{self, Pipeline};
use fxdir_core::seed;
use fxdir_core::stacking::{predict_stack, train_stack, StackModel, StackSpec};
use fxdir_core::synth::generate;
use fxdir_core::tuning::cv::{feature_layout, CvTask};
use fxdir_core::tuning::{make_fold_plan, run_tiers, Config, FoldPlan, TierSpace, Trial};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{fingerprint, ExperimentConfig};
use crate::error::{AppError, Result};
use crate::io;
use crate::manifest::RunManifest;
use crate::report::{self, BacktestEntry, BacktestIndex, ReportItem};

pub const PANEL_DIR: &str = "panel";
pub const DATASETS_DIR: &str = "datasets";
pub const TUNING_DIR: &str = "tuning";
pub const MODELS_DIR: &str = "models";
pub const BACKTEST_DIR: &str = "backtest";
pub const TRIAL_LOG_HEADER: [&str; 5] = ["trial_id", "tier", "objective", "status", "config_json"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Wrote(PathBuf),
    UpToDate(PathBuf),
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub force: bool,
}

/// Test year and the transforms fit on the years before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestInfo {
    pub test_year: i32,
    pub transforms: TransformLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedConfig {
    pub model: String,
    pub family: Family,
    pub representation: Representation,
    pub use_pca: bool,
    pub tier: u8,
    pub trial_id: usize,
    pub objective: f64,
    pub config: Config,
    /// Dataset columns the configuration keeps.
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub id: String,
    pub representation: Representation,
    pub columns: Vec<String>,
    pub pipeline: Pipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedStack {
    pub id: String,
    pub model: StackModel,
}

/// Seed for a named job, independent of job order.
pub fn job_seed(seed: u64, name: &str) -> u64 {
    let h = io::sha256_str(name);
    seed::derive(seed, u64::from_str_radix(&h[..16], 16).expect("hex digest"))
}

/// The last calendar year whose final weeks are in the data.
pub fn last_full_year(dates: &[TradingDate]) -> Option<i32> {
    let last = dates.last()?;
    Some(if last.month() == 12 && last.day() >= 24 { last.year() } else { last.year() - 1 })
}

fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(AppError::Missing { what: path.display().to_string(), command: producer })
    }
}

fn test_start(year: i32) -> TradingDate {
    ymd(year, 1, 1)
}

fn rows_before(data: &FeatureMatrix, d: TradingDate) -> Vec<usize> {
    (0..data.nrows()).filter(|&i| data.dates[i] < d).collect()
}

impl Context {
    fn run_dir(&self) -> PathBuf {
        self.cfg.run_dir()
    }

    fn skip(&self, m: &RunManifest, dir: &Path) -> bool {
        !self.force && m.up_to_date(dir)
    }

    pub fn synth(&self, days: Option<usize>) -> Result<Outcome> {
        let mut sc = self.cfg.synth_config()?;
        if let Some(d) = days {
            if d < 2 {
                return Err(AppError::config("--days", "must be at least 2"));
            }
            sc.days = d;
        }
        let dir = self.cfg.data_dir.clone();
        let m = RunManifest::new("synth", fingerprint(&sc), sc.seed);
        if self.skip(&m, &dir) {
            return Ok(Outcome::UpToDate(dir));
        }
        let data = generate(&sc)?;
        let mut outputs = Vec::new();
        for s in &data.series {
            let p = dir.join("ohlcv").join(format!("{}.csv", s.instrument_id));
            io::write_ohlcv(&p, s)?;
            outputs.push(p);
        }
        for c in &data.calendars {
            let p = dir.join("calendars").join(format!("{}.csv", c.indicator_id));
            io::write_calendar(&p, c)?;
            outputs.push(p);
        }
        m.finish(&dir, &outputs)?;
        Ok(Outcome::Wrote(dir))
    }

    pub fn ingest(&self) -> Result<Outcome> {
        let cfg = &self.cfg;
        let dir = self.run_dir().join(PANEL_DIR);
        let key = (&cfg.target, &cfg.instruments, &cfg.indicators, cfg.test_year);
        let mut m = RunManifest::new("ingest", fingerprint(&key), cfg.seed);
        let ohlcv: Vec<PathBuf> = cfg.instruments.iter().map(|id| cfg.data_dir.join("ohlcv").join(format!("{id}.csv"))).collect();
        let calendars: Vec<PathBuf> =
            cfg.indicators.iter().map(|id| cfg.data_dir.join("calendars").join(format!("{id}.csv"))).collect();
        for p in ohlcv.iter().chain(&calendars) {
            require(p, "synth")?;
            m.input(&cfg.data_dir, p)?;
        }
        if self.skip(&m, &dir) {
            return Ok(Outcome::UpToDate(dir));
        }
        let series = ohlcv.iter().zip(&cfg.instruments).map(|(p, id)| io::read_ohlcv(p, id)).collect::<Result<Vec<_>>>()?;
        let cals =
            calendars.iter().zip(&cfg.indicators).map(|(p, id)| io::read_calendar(p, id)).collect::<Result<Vec<_>>>()?;
        let raw = build_panel(&series, &cals, &cfg.target).map_err(|e| AppError::data(&cfg.data_dir, e))?;
        let test_year = match cfg.test_year {
            Some(y) => y,
            None => last_full_year(&raw.dates).ok_or_else(|| CoreError::DateCoverage("the panel is empty".into()))?,
        };
        let first = raw.dates[0];
        let fit_end = prev_day(test_start(test_year));
        if fit_end < first {
            return Err(CoreError::DateCoverage(format!("no data before the test year {test_year}")).into());
        }
        let (_, transforms) = apply_transforms(&raw, None, Some(DateRange { start: first, end: fit_end }))?;
        io::write_panel(&dir, &raw)?;
        io::write_json(&dir.join("transforms.json"), &IngestInfo { test_year, transforms })?;
        let outputs = ["panel.csv", "panel.json", "transforms.json"].map(|f| dir.join(f));
        m.finish(&dir, &outputs)?;
        Ok(Outcome::Wrote(dir))
    }

    fn ingest_info(&self, m: &mut RunManifest) -> Result<IngestInfo> {
        let path = self.run_dir().join(PANEL_DIR).join("transforms.json");
        require(&path, "ingest")?;
        m.input(&self.run_dir(), &path)?;
        io::read_json(&path, "ingest")
    }

    pub fn build(&self) -> Result<Outcome> {
        let cfg = &self.cfg;
        let run = self.run_dir();
        let dir = run.join(DATASETS_DIR);
        let reprs = cfg.representations()?;
        let mut m = RunManifest::new("build", fingerprint(&(&cfg.dataset, &reprs)), cfg.seed);
        let panel_dir = run.join(PANEL_DIR);
        for f in ["panel.csv", "panel.json"] {
            require(&panel_dir.join(f), "ingest")?;
            m.input(&run, &panel_dir.join(f))?;
        }
        let info = self.ingest_info(&mut m)?;
        if self.skip(&m, &dir) {
            return Ok(Outcome::UpToDate(dir));
        }
        let raw = io::read_panel(&panel_dir)?;
        let (panel, _) = apply_transforms(&raw, Some(&info.transforms), None)?;
        let dcfg = cfg.dataset_config();
        let sets = reprs.par_iter().map(|&r| build_dataset(&panel, r, &dcfg)).collect::<Result<Vec<_>, _>>()?;
        let mut outputs = Vec::new();
        for d in &sets {
            if d.nrows() == 0 {
                return Err(CoreError::InsufficientData(format!("{} has no complete rows", d.representation.tag())).into());
            }
            io::write_dataset(&dir, d, &info.transforms)?;
            let stem = io::dataset_stem(d.representation);
            outputs.push(dir.join(format!("{stem}.csv")));
            outputs.push(dir.join(format!("{stem}.json")));
        }
        m.finish(&dir, &outputs)?;
        Ok(Outcome::Wrote(dir))
    }

    fn load_sets(&self, reprs: &[Representation], m: &mut RunManifest) -> Result<BTreeMap<Representation, FeatureMatrix>> {
        let run = self.run_dir();
        let dir = run.join(DATASETS_DIR);
        let mut out = BTreeMap::new();
        for &r in reprs {
            let stem = io::dataset_stem(r);
            for ext in ["csv", "json"] {
                let p = dir.join(format!("{stem}.{ext}"));
                require(&p, "build")?;
                m.input(&run, &p)?;
            }
        }
        for &r in reprs {
            out.insert(r, io::read_dataset(&dir, r)?);
        }
        Ok(out)
    }

    fn tune_jobs(&self) -> Result<Vec<(usize, Representation)>> {
        let mut jobs = Vec::new();
        for (i, m) in self.cfg.models.iter().enumerate() {
            if m.tune {
                for r in self.cfg.model_representations(i)? {
                    jobs.push((i, r));
                }
            }
        }
        Ok(jobs)
    }

    pub fn tune(&self) -> Result<Outcome> {
        let cfg = &self.cfg;
        let dir = self.run_dir().join(TUNING_DIR);
        let jobs = self.tune_jobs()?;
        let tuned: Vec<_> = cfg.models.iter().filter(|m| m.tune).collect();
        let mut m = RunManifest::new("tune", fingerprint(&(&cfg.folds, &cfg.tuning, &tuned)), cfg.seed);
        let info = self.ingest_info(&mut m)?;
        let mut reprs: Vec<Representation> = jobs.iter().map(|j| j.1).collect();
        reprs.sort();
        reprs.dedup();
        let sets = self.load_sets(&reprs, &mut m)?;
        if self.skip(&m, &dir) {
            return Ok(Outcome::UpToDate(dir));
        }
        let results = jobs
            .par_iter()
            .map(|&(i, r)| self.tune_one(i, &sets[&r], info.test_year))
            .collect::<Result<Vec<_>>>()?;
        let mut outputs = Vec::new();
        for (log, best) in results {
            let job_dir = dir.join(format!("{}_{}", best.model, best.representation.tag()));
            let rows = log.iter().map(|t| {
                vec![
                    t.id.to_string(),
                    t.tier.to_string(),
                    t.objective.map(io::num).unwrap_or_default(),
                    t.status.label().to_string(),
                    serde_json::to_string(&t.config).expect("configs serialize"),
                ]
            });
            let log_path = job_dir.join("trials.csv");
            io::write_csv(&log_path, &TRIAL_LOG_HEADER, rows)?;
            let best_path = job_dir.join("best.json");
            io::write_json(&best_path, &best)?;
            outputs.push(log_path);
            outputs.push(best_path);
        }
        m.finish(&dir, &outputs)?;
        Ok(Outcome::Wrote(dir))
    }

    /// Three-tier search for model `i` on the rows before the test year.
    fn tune_one(&self, i: usize, data: &FeatureMatrix, test_year: i32) -> Result<(Vec<Trial>, TunedConfig)> {
        let cfg = &self.cfg;
        let entry = &cfg.models[i];
        let family = cfg.model_family(i)?;
        let id = format!("{}_{}", entry.name, data.representation.tag());
        let train = data.select_rows(&rows_before(data, test_start(test_year)));
        let plan = make_fold_plan(&train.dates, &cfg.fold_config()?).map_err(|e| job_error(&id, e))?;
        let layout = feature_layout(&train, &family);
        let hyper = default_search_space(&family)?;
        let spaces = [
            TierSpace::new(1, &hyper, &layout)?,
            TierSpace::new(2, &hyper, &layout)?,
            TierSpace::new(3, &hyper, &layout)?,
        ];
        let seed = job_seed(cfg.seed, &id);
        let tasks = spaces
            .iter()
            .map(|s| CvTask::new(&train, &plan, s, family.clone(), entry.pca, seed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| job_error(&id, e))?;
        let result = run_tiers(&spaces, &cfg.schedule(), cfg.tpe(), seed, |tier, c| cv_accuracy(&tasks[tier as usize - 1], c))
            .map_err(|e| job_error(&id, e))?;
        let best = &result.best;
        let columns = tasks[best.tier as usize - 1]
            .columns(&best.config)?
            .into_iter()
            .map(|j| train.names[j].clone())
            .collect();
        let tuned = TunedConfig {
            model: entry.name.clone(),
            family,
            representation: data.representation,
            use_pca: entry.pca,
            tier: best.tier,
            trial_id: best.id,
            objective: best.objective.expect("best trial has an objective"),
            config: best.config.clone(),
            columns,
        };
        let log = result.tiers.into_iter().flat_map(|t| t.history).collect();
        Ok((log, tuned))
    }

    /// Every configured model and stack, resolved against the datasets.
    fn candidates(&self, sets: &BTreeMap<Representation, FeatureMatrix>, m: &mut RunManifest) -> Result<Vec<Candidate>> {
        let cfg = &self.cfg;
        let mut out = Vec::new();
        for (i, entry) in cfg.models.iter().enumerate() {
            let family = cfg.model_family(i)?;
            for r in cfg.model_representations(i)? {
                let data = &sets[&r];
                let id = format!("{}_{}", entry.name, r.tag());
                let seed = job_seed(cfg.seed, &id);
                let (params, columns) = if entry.tune {
                    let path = self.run_dir().join(TUNING_DIR).join(&id).join("best.json");
                    require(&path, "tune")?;
                    m.input(&self.run_dir(), &path)?;
                    let best: TunedConfig = io::read_json(&path, "tune")?;
                    let cols = best
                        .columns
                        .iter()
                        .map(|name| {
                            data.names.iter().position(|n| n == name).ok_or_else(|| {
                                AppError::data(&path, CoreError::Validation(format!("column {name} is not in {}; rerun `fxdir tune`", r.tag())))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (TierSpace::hyperparameters(&best.config), cols)
                } else {
                    (entry.params.clone(), data.view_columns(family.date_family()))
                };
                out.push(Candidate {
                    id,
                    model: entry.name.clone(),
                    estimator: family.tag(),
                    representation: r,
                    kind: Kind::Single { spec: ModelSpec { family: family.clone(), params, seed }, use_pca: entry.pca, columns },
                });
            }
        }
        for (i, entry) in cfg.stacks.iter().enumerate() {
            let mut spec = cfg.stack_spec(i)?;
            let id = format!("{}_{}", entry.name, spec.meta_representation.tag());
            let seed = job_seed(cfg.seed, &id);
            for (k, b) in spec.bases.iter_mut().enumerate() {
                b.model.seed = seed::derive(seed, k as u64);
            }
            spec.meta.seed = seed::derive(seed, spec.bases.len() as u64);
            let mut reprs: Vec<Representation> = spec.bases.iter().map(|b| b.representation).collect();
            reprs.push(spec.meta_representation);
            reprs.sort();
            reprs.dedup();
            let refs: Vec<&FeatureMatrix> = reprs.iter().map(|r| &sets[r]).collect();
            let aligned = align_on_common_dates(&refs);
            let plan = make_fold_plan(&aligned[0].dates, &cfg.fold_config()?).map_err(|e| job_error(&id, e))?;
            out.push(Candidate {
                model: entry.name.clone(),
                estimator: format!("STACK({})", spec.meta.family.tag()),
                representation: spec.meta_representation,
                kind: Kind::Stack { spec, aligned, plan },
                id,
            });
        }
        Ok(out)
    }

    fn needed_representations(&self) -> Result<Vec<Representation>> {
        let cfg = &self.cfg;
        let mut reprs = Vec::new();
        for i in 0..cfg.models.len() {
            reprs.extend(cfg.model_representations(i)?);
        }
        for i in 0..cfg.stacks.len() {
            let s = cfg.stack_spec(i)?;
            reprs.extend(s.bases.iter().map(|b| b.representation));
            reprs.push(s.meta_representation);
        }
        reprs.sort();
        reprs.dedup();
        Ok(reprs)
    }

    fn model_fingerprint(&self) -> String {
        let cfg = &self.cfg;
        fingerprint(&(&cfg.models, &cfg.stacks, &cfg.folds))
    }

    pub fn train(&self) -> Result<Outcome> {
        let dir = self.run_dir().join(MODELS_DIR);
        let mut m = RunManifest::new("train", self.model_fingerprint(), self.cfg.seed);
        let info = self.ingest_info(&mut m)?;
        let sets = self.load_sets(&self.needed_representations()?, &mut m)?;
        let candidates = self.candidates(&sets, &mut m)?;
        if self.skip(&m, &dir) {
            return Ok(Outcome::UpToDate(dir));
        }
        let start = test_start(info.test_year);
        let fitted = candidates.par_iter().map(|c| c.fit_final(&sets, start)).collect::<Result<Vec<_>>>()?;
        let mut outputs = Vec::new();
        for (c, saved) in candidates.iter().zip(fitted) {
            let path = dir.join(format!("{}.json", c.id));
            match saved {
                Saved::Single(s) => io::write_json(&path, &s)?,
                Saved::Stack(s) => io::write_json(&path, &s)?,
            }
            outputs.push(path);
        }
        m.finish(&dir, &outputs)?;
        Ok(Outcome::Wrote(dir))
    }

    pub fn backtest(&self) -> Result<Outcome> {
        let cfg = &self.cfg;
        let dir = self.run_dir().join(BACKTEST_DIR);
        let protocols = cfg.protocol_list()?;
        let mut m = RunManifest::new("backtest", fingerprint(&(self.model_fingerprint(), &cfg.protocols)), cfg.seed);
        let info = self.ingest_info(&mut m)?;
        let sets = self.load_sets(&self.needed_representations()?, &mut m)?;
        let candidates = self.candidates(&sets, &mut m)?;
        if self.skip(&m, &dir) {
            return Ok(Outcome::UpToDate(dir));
        }
        let jobs: Vec<(&Candidate, Protocol)> =
            candidates.iter().flat_map(|c| protocols.iter().map(move |&p| (c, p))).collect();
        let reports = jobs
            .par_iter()
            .map(|&(c, p)| c.evaluate(&sets, p, info.test_year))
            .collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::new();
        let mut outputs = Vec::new();
        for ((c, p), report) in jobs.iter().zip(reports) {
            let config = format!("{}_{}", c.id, p.label());
            let file = format!("{config}.json");
            io::write_json(&dir.join(&file), &report)?;
            outputs.push(dir.join(&file));
            entries.push(BacktestEntry {
                config,
                model: c.model.clone(),
                estimator: c.estimator.clone(),
                dataset: c.representation.tag().to_string(),
                protocol: p.label().to_string(),
                file,
            });
        }
        let index = dir.join("index.json");
        io::write_json(&index, &BacktestIndex { test_year: info.test_year, entries })?;
        outputs.push(index);
        m.finish(&dir, &outputs)?;
        Ok(Outcome::Wrote(dir))
    }

    /// Combines the backtests of `runs` (default: this run) into one report.
    pub fn report(&self, runs: &[String]) -> Result<Outcome> {
        let cfg = &self.cfg;
        let own = [cfg.run_id.clone()];
        let runs = if runs.is_empty() { &own[..] } else { runs };
        let dir = self.run_dir();
        let mut m = RunManifest::new("report", fingerprint(&runs), cfg.seed);
        let mut items = Vec::new();
        let mut loaded = Vec::new();
        for run in runs {
            let bdir = cfg.output_dir.join(run).join(BACKTEST_DIR);
            let index_path = bdir.join("index.json");
            require(&index_path, "backtest")?;
            m.input(&cfg.output_dir, &index_path)?;
            let index: BacktestIndex = io::read_json(&index_path, "backtest")?;
            for e in &index.entries {
                m.input(&cfg.output_dir, &bdir.join(&e.file))?;
            }
            loaded.push((run, bdir, index));
        }
        if self.skip(&m, &dir) {
            return Ok(Outcome::UpToDate(dir));
        }
        for (run, bdir, index) in loaded {
            for mut entry in index.entries {
                let report: EvalReport = io::read_json(&bdir.join(&entry.file), "backtest")?;
                if runs.len() > 1 {
                    entry.model = format!("{run}:{}", entry.model);
                    entry.config = format!("{run}_{}", entry.config);
                }
                items.push(ReportItem { entry, report });
            }
        }
        let outputs = report::emit_report(&items, &dir)?;
        m.finish(&dir, &outputs)?;
        Ok(Outcome::Wrote(dir))
    }
}

fn job_error(id: &str, e: CoreError) -> AppError {
    let tag = |m: String| format!("{id}: {m}");
    AppError::Core(match e {
        CoreError::DateCoverage(m) => CoreError::DateCoverage(tag(m)),
        CoreError::InsufficientData(m) => CoreError::InsufficientData(tag(m)),
        CoreError::DegenerateData(m) => CoreError::DegenerateData(tag(m)),
        CoreError::Validation(m) => CoreError::Validation(tag(m)),
        CoreError::Parameter(m) => CoreError::Parameter(tag(m)),
        CoreError::Search(m) => CoreError::Search(tag(m)),
        other => other,
    })
}

/// Fold accuracies computed in parallel and averaged in fold order.
fn cv_accuracy(task: &CvTask<'_>, config: &Config) -> fxdir_core::error::Result<f64> {
    let accs = (0..task.n_folds())
        .into_par_iter()
        .map(|k| task.fold_accuracy(config, k))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut total = 0.0;
    for a in &accs {
        total += a;
    }
    Ok(total / accs.len() as f64)
}

enum Kind {
    Single { spec: ModelSpec, use_pca: bool, columns: Vec<usize> },
    Stack { spec: StackSpec, aligned: Vec<FeatureMatrix>, plan: FoldPlan },
}

struct Candidate {
    id: String,
    model: String,
    estimator: String,
    representation: Representation,
    kind: Kind,
}

enum Saved {
    Single(SavedModel),
    Stack(SavedStack),
}

fn fit_single(spec: &ModelSpec, use_pca: bool, data: &FeatureMatrix, cols: &[usize], rows: &[usize]) -> fxdir_core::error::Result<Pipeline> {
    let y: Vec<u8> = rows.iter().map(|&i| data.labels[i]).collect();
    pipeline::fit(spec, use_pca, &data.x.select(rows, cols), &y)
}

impl Candidate {
    fn fit_final(&self, sets: &BTreeMap<Representation, FeatureMatrix>, start: TradingDate) -> Result<Saved> {
        match &self.kind {
            Kind::Single { spec, use_pca, columns } => {
                let data = &sets[&self.representation];
                let rows = rows_before(data, start);
                let pipeline = fit_single(spec, *use_pca, data, columns, &rows).map_err(|e| job_error(&self.id, e))?;
                Ok(Saved::Single(SavedModel {
                    id: self.id.clone(),
                    representation: self.representation,
                    columns: columns.iter().map(|&j| data.names[j].clone()).collect(),
                    pipeline,
                }))
            }
            Kind::Stack { spec, aligned, plan } => {
                let refs: Vec<&FeatureMatrix> = aligned.iter().collect();
                let rows = rows_before(&aligned[0], start);
                let model = train_stack(spec, &refs, &plan.extended_until(start), &rows).map_err(|e| job_error(&self.id, e))?;
                Ok(Saved::Stack(SavedStack { id: self.id.clone(), model }))
            }
        }
    }

    fn evaluate(&self, sets: &BTreeMap<Representation, FeatureMatrix>, protocol: Protocol, test_year: i32) -> Result<EvalReport> {
        let mut report = match &self.kind {
            Kind::Single { spec, use_pca, columns } => {
                let data = &sets[&self.representation];
                evaluate(protocol, test_year, data.into(), |train, test| {
                    let p = fit_single(spec, *use_pca, data, columns, train)?;
                    p.predict(&data.x.select(test, columns))
                })
            }
            Kind::Stack { spec, aligned, plan } => {
                let refs: Vec<&FeatureMatrix> = aligned.iter().collect();
                let meta = aligned
                    .iter()
                    .find(|d| d.representation == spec.meta_representation)
                    .expect("meta representation is aligned");
                evaluate(protocol, test_year, meta.into(), |train, test| {
                    let until = meta.dates[test[0]];
                    let model = train_stack(spec, &refs, &plan.extended_until(until), train)?;
                    predict_stack(&model, &refs, test)
                })
            }
        }
        .map_err(|e| job_error(&self.id, e))?;
        report.fingerprint = self.fingerprint(protocol, test_year);
        Ok(report)
    }

    fn fingerprint(&self, protocol: Protocol, test_year: i32) -> String {
        match &self.kind {
            Kind::Single { spec, use_pca, columns } => {
                fingerprint(&(&self.id, protocol, test_year, spec, use_pca, columns))
            }
            Kind::Stack { spec, .. } => fingerprint(&(&self.id, protocol, test_year, spec)),
        }
    }
}
