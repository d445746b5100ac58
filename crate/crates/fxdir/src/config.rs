//! Experiment configuration: one TOML file, flags and `FXDIR_*` variables on top.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fxdir_core::backtest::Protocol;
use fxdir_core::calendar::{parse_date, TradingDate};
use fxdir_core::features::{DatasetConfig, Representation};
use fxdir_core::models::{Family, ModelSpec, Params};
use fxdir_core::stacking::{BaseSpec, StackSpec};
use fxdir_core::synth::{PlantedSignal, SynthConfig};
use fxdir_core::tuning::{FoldPlanConfig, TierSchedule, TpeConfig};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub run_id: String,
    pub target: String,
    pub instruments: Vec<String>,
    pub indicators: Vec<String>,
    /// Defaults to the last full calendar year in the data.
    pub test_year: Option<i32>,
    pub protocols: Vec<String>,
    pub dataset: DatasetSection,
    pub folds: FoldSection,
    pub tuning: TuningSection,
    pub models: Vec<ModelEntry>,
    pub stacks: Vec<StackEntry>,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub representations: Vec<String>,
    pub lag_depth: usize,
    pub lag_indicators: bool,
    /// Instruments whose indicator catalog enters D3; all instruments when unset.
    pub indicator_sources: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoldSection {
    pub train_start: String,
    pub validation_start: String,
    pub folds: usize,
    pub months_per_fold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    pub budgets: [usize; 3],
    pub chunk: usize,
    pub top_q: usize,
    pub gamma: f64,
    pub candidates: usize,
    pub startup: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub family: String,
    #[serde(default)]
    pub pca: bool,
    /// Empty means every representation in `dataset.representations`.
    #[serde(default)]
    pub representations: Vec<String>,
    #[serde(default = "yes")]
    pub tune: bool,
    /// Used as-is when `tune = false`.
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseEntry {
    pub family: String,
    pub representation: String,
    #[serde(default)]
    pub pca: bool,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackEntry {
    pub name: String,
    pub bases: Vec<BaseEntry>,
    pub meta: String,
    #[serde(default)]
    pub meta_params: Params,
    pub meta_representation: String,
    #[serde(default)]
    pub meta_pca: bool,
    #[serde(default)]
    pub passthrough: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub days: usize,
    pub end: String,
    pub planted_window: Option<usize>,
    pub noise: f64,
}

/// Enough history that D3, after its longest indicator warm-up, still
/// starts before the default fold plan's training start.
pub const DEFAULT_SYNTH_DAYS: usize = 2750;

fn yes() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            seed: 7,
            data_dir: "data".into(),
            output_dir: "results".into(),
            run_id: "default".into(),
            target: s.target,
            instruments: s.instruments,
            indicators: s.indicators,
            test_year: None,
            protocols: vec!["monthly".into(), "annually".into()],
            dataset: DatasetSection::default(),
            folds: FoldSection::default(),
            tuning: TuningSection::default(),
            models: vec![
                ModelEntry {
                    name: "tree".into(),
                    family: "TREE".into(),
                    pca: false,
                    representations: vec![],
                    tune: true,
                    params: Params::new(),
                },
                ModelEntry {
                    name: "logistic".into(),
                    family: "LOGISTIC".into(),
                    pca: false,
                    representations: vec![],
                    tune: true,
                    params: Params::new(),
                },
            ],
            stacks: vec![],
            synth: SynthSection::default(),
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            representations: vec!["D1".into(), "D2".into(), "D3".into()],
            lag_depth: d.lag_depth,
            lag_indicators: d.lag_indicators,
            indicator_sources: d.indicator_sources,
        }
    }
}

impl Default for FoldSection {
    fn default() -> Self {
        let f = FoldPlanConfig::default();
        Self {
            train_start: f.train_start.to_string(),
            validation_start: f.validation_start.to_string(),
            folds: f.folds,
            months_per_fold: f.months_per_fold,
        }
    }
}

impl Default for TuningSection {
    fn default() -> Self {
        let s = TierSchedule::default();
        let t = TpeConfig::default();
        Self {
            budgets: s.budgets,
            chunk: s.chunk,
            top_q: s.top_q,
            gamma: t.gamma,
            candidates: t.candidates,
            startup: t.startup,
        }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            days: DEFAULT_SYNTH_DAYS,
            end: s.end.to_string(),
            planted_window: s.planted.map(|p| p.window),
            noise: s.planted.map_or(0.15, |p| p.noise),
        }
    }
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub run_id: Option<String>,
}

fn safe_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn date_at(path: &str, s: &str) -> Result<TradingDate> {
    parse_date(s).ok_or_else(|| AppError::config(path, format!("`{s}` is not a YYYY-MM-DD date")))
}

fn family_at(path: &str, tag: &str) -> Result<Family> {
    Family::from_tag(tag).map_err(|e| AppError::config(path, e.to_string()))
}

fn repr_at(path: &str, tag: &str) -> Result<Representation> {
    Representation::from_tag(tag).map_err(|e| AppError::config(path, e.to_string()))
}

fn spec_at(path: &str, family: Family, params: &Params) -> Result<ModelSpec> {
    let spec = ModelSpec { family, params: params.clone(), seed: 0 };
    spec.validate().map_err(|e| AppError::config(path, e.to_string()))?;
    Ok(spec)
}

impl ExperimentConfig {
    /// Parses `text`; errors carry the dotted path of the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.into_inner().message().trim().to_string();
            AppError::config(if path == "." { "<root>".to_string() } else { path }, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| AppError::config("--config", format!("{}: {e}", p.display())))?;
                Self::parse(&text)?
            }
            None => Self::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(d) = &overrides.data_dir {
            cfg.data_dir = d.clone();
        }
        if let Some(d) = &overrides.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(r) = &overrides.run_id {
            cfg.run_id = r.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !safe_name(&self.run_id) {
            return Err(AppError::config("run_id", "use letters, digits, `_` or `-`"));
        }
        if !self.instruments.contains(&self.target) {
            return Err(AppError::config("target", format!("{} is not listed in `instruments`", self.target)));
        }
        for (i, id) in self.instruments.iter().chain(&self.indicators).enumerate() {
            if !safe_name(id) {
                let path = if i < self.instruments.len() {
                    format!("instruments[{i}]")
                } else {
                    format!("indicators[{}]", i - self.instruments.len())
                };
                return Err(AppError::config(path, "use letters, digits, `_` or `-`"));
            }
        }
        if self.protocols.is_empty() {
            return Err(AppError::config("protocols", "at least one protocol is required"));
        }
        self.protocol_list()?;
        if self.dataset.representations.is_empty() {
            return Err(AppError::config("dataset.representations", "at least one representation is required"));
        }
        self.representations()?;
        if let Some(src) = &self.dataset.indicator_sources {
            for (i, s) in src.iter().enumerate() {
                if !self.instruments.contains(s) {
                    return Err(AppError::config(
                        format!("dataset.indicator_sources[{i}]"),
                        format!("{s} is not listed in `instruments`"),
                    ));
                }
            }
        }
        self.fold_config()?;
        let t = &self.tuning;
        if t.chunk == 0 {
            return Err(AppError::config("tuning.chunk", "must be positive"));
        }
        if !(t.gamma > 0.0 && t.gamma < 1.0) {
            return Err(AppError::config("tuning.gamma", "must lie in (0, 1)"));
        }
        if t.candidates == 0 {
            return Err(AppError::config("tuning.candidates", "must be positive"));
        }
        let mut names = BTreeSet::new();
        for (i, m) in self.models.iter().enumerate() {
            if !safe_name(&m.name) {
                return Err(AppError::config(format!("models[{i}].name"), "use letters, digits, `_` or `-`"));
            }
            if !names.insert(m.name.as_str()) {
                return Err(AppError::config(format!("models[{i}].name"), format!("duplicate name {}", m.name)));
            }
            let family = family_at(&format!("models[{i}].family"), &m.family)?;
            spec_at(&format!("models[{i}].params"), family, &m.params)?;
            if m.tune && !m.params.is_empty() {
                return Err(AppError::config(
                    format!("models[{i}].params"),
                    "tuned models take their hyperparameters from the search; set `tune = false` to fix them",
                ));
            }
            for (k, r) in m.representations.iter().enumerate() {
                let path = format!("models[{i}].representations[{k}]");
                let repr = repr_at(&path, r)?;
                if !self.representations()?.contains(&repr) {
                    return Err(AppError::config(path, format!("{r} is not built (see dataset.representations)")));
                }
            }
        }
        for (i, s) in self.stacks.iter().enumerate() {
            if !safe_name(&s.name) {
                return Err(AppError::config(format!("stacks[{i}].name"), "use letters, digits, `_` or `-`"));
            }
            if !names.insert(s.name.as_str()) {
                return Err(AppError::config(format!("stacks[{i}].name"), format!("duplicate name {}", s.name)));
            }
            self.stack_spec(i)?;
        }
        if self.synth.days < 2 {
            return Err(AppError::config("synth.days", "must be at least 2"));
        }
        date_at("synth.end", &self.synth.end)?;
        if !(0.0..=1.0).contains(&self.synth.noise) {
            return Err(AppError::config("synth.noise", "must lie in [0, 1]"));
        }
        if self.synth.planted_window == Some(0) {
            return Err(AppError::config("synth.planted_window", "must be at least 1"));
        }
        Ok(())
    }

    pub fn protocol_list(&self) -> Result<Vec<Protocol>> {
        self.protocols
            .iter()
            .enumerate()
            .map(|(i, p)| match p.as_str() {
                "annually" => Ok(Protocol::Annual),
                "monthly" => Ok(Protocol::MonthlyRetrain),
                other => Err(AppError::config(
                    format!("protocols[{i}]"),
                    format!("`{other}` is not one of annually, monthly"),
                )),
            })
            .collect()
    }

    pub fn representations(&self) -> Result<Vec<Representation>> {
        let mut out = Vec::new();
        for (i, r) in self.dataset.representations.iter().enumerate() {
            let repr = repr_at(&format!("dataset.representations[{i}]"), r)?;
            if !out.contains(&repr) {
                out.push(repr);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            lag_depth: self.dataset.lag_depth,
            lag_indicators: self.dataset.lag_indicators,
            indicator_sources: self.dataset.indicator_sources.clone(),
        }
    }

    pub fn fold_config(&self) -> Result<FoldPlanConfig> {
        let f = &self.folds;
        let cfg = FoldPlanConfig {
            train_start: date_at("folds.train_start", &f.train_start)?,
            validation_start: date_at("folds.validation_start", &f.validation_start)?,
            folds: f.folds,
            months_per_fold: f.months_per_fold,
        };
        if cfg.folds == 0 {
            return Err(AppError::config("folds.folds", "must be positive"));
        }
        if cfg.months_per_fold == 0 {
            return Err(AppError::config("folds.months_per_fold", "must be positive"));
        }
        if cfg.validation_start <= cfg.train_start {
            return Err(AppError::config("folds.validation_start", "must come after folds.train_start"));
        }
        Ok(cfg)
    }

    pub fn schedule(&self) -> TierSchedule {
        TierSchedule { budgets: self.tuning.budgets, chunk: self.tuning.chunk, top_q: self.tuning.top_q }
    }

    pub fn tpe(&self) -> TpeConfig {
        TpeConfig { gamma: self.tuning.gamma, candidates: self.tuning.candidates, startup: self.tuning.startup }
    }

    pub fn model_family(&self, i: usize) -> Result<Family> {
        family_at(&format!("models[{i}].family"), &self.models[i].family)
    }

    /// Representations model `i` runs on.
    pub fn model_representations(&self, i: usize) -> Result<Vec<Representation>> {
        let m = &self.models[i];
        if m.representations.is_empty() {
            return self.representations();
        }
        let mut out: Vec<Representation> = m
            .representations
            .iter()
            .enumerate()
            .map(|(k, r)| repr_at(&format!("models[{i}].representations[{k}]"), r))
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn stack_spec(&self, i: usize) -> Result<StackSpec> {
        let s = &self.stacks[i];
        let built = self.representations()?;
        let repr = |path: String, tag: &str| -> Result<Representation> {
            let r = repr_at(&path, tag)?;
            if !built.contains(&r) {
                return Err(AppError::config(path, format!("{tag} is not built (see dataset.representations)")));
            }
            Ok(r)
        };
        if s.bases.is_empty() {
            return Err(AppError::config(format!("stacks[{i}].bases"), "a stack needs at least one base model"));
        }
        let mut bases = Vec::with_capacity(s.bases.len());
        for (k, b) in s.bases.iter().enumerate() {
            let at = |field: &str| format!("stacks[{i}].bases[{k}].{field}");
            let family = family_at(&at("family"), &b.family)?;
            bases.push(BaseSpec {
                model: spec_at(&at("params"), family, &b.params)?,
                representation: repr(at("representation"), &b.representation)?,
                use_pca: b.pca,
            });
        }
        let meta_family = family_at(&format!("stacks[{i}].meta"), &s.meta)?;
        Ok(StackSpec {
            bases,
            meta: spec_at(&format!("stacks[{i}].meta_params"), meta_family, &s.meta_params)?,
            meta_representation: repr(format!("stacks[{i}].meta_representation"), &s.meta_representation)?,
            meta_use_pca: s.meta_pca,
            score_passthrough: s.passthrough,
        })
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        Ok(SynthConfig {
            seed: self.seed,
            days: self.synth.days,
            end: date_at("synth.end", &self.synth.end)?,
            target: self.target.clone(),
            instruments: self.instruments.clone(),
            indicators: self.indicators.clone(),
            planted: self.synth.planted_window.map(|window| PlantedSignal { window, noise: self.synth.noise }),
        })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}

/// Stable content hash of any serializable config fragment.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config fragments serialize");
    crate::io::sha256_str(&text)
}

