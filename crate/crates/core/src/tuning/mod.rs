//! Tiered hyperparameter and feature search over a rolling fold plan.
//!
//! A configuration is a flat map of dimension name to value. Hyperparameters
//! use their model names; tier 2 adds `cat:<category>` switches and tier 3
//! adds `feat:<feature>` switches.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::calendar::{add_months, next_day, prev_day, ymd, DateRange, TradingDate};
use crate::error::{Error, Result};
use crate::models::{DimKind, ParamValue, Params, SearchSpace};

pub mod cv;
pub mod search;
pub mod tpe;

pub use search::{run_search, run_tiers, transfer, Search, SearchResult, TierSchedule, TieredResult, Trial, TrialStatus};
pub use tpe::TpeConfig;

pub const CATEGORY_PREFIX: &str = "cat:";
pub const FEATURE_PREFIX: &str = "feat:";

pub type Config = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: DateRange,
    pub validation: DateRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlanConfig {
    pub train_start: TradingDate,
    pub validation_start: TradingDate,
    pub folds: usize,
    pub months_per_fold: u32,
}

impl Default for FoldPlanConfig {
    fn default() -> Self {
        Self { train_start: ymd(2013, 11, 26), validation_start: ymd(2020, 1, 1), folds: 8, months_per_fold: 3 }
    }
}

/// Rolling plan: fold k validates on the k-th block of `months_per_fold`
/// months and trains on everything from `train_start` up to that block.
pub fn make_fold_plan(dates: &[TradingDate], cfg: &FoldPlanConfig) -> Result<FoldPlan> {
    if cfg.folds == 0 || cfg.months_per_fold == 0 || cfg.validation_start <= cfg.train_start {
        return Err(Error::parameter("fold plan needs folds >= 1, months >= 1 and training before validation"));
    }
    let end = prev_day(add_months(cfg.validation_start, cfg.folds as u32 * cfg.months_per_fold));
    let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
        return Err(Error::DateCoverage("no dates to plan folds over".into()));
    };
    // The data must reach into the plan's final month; trading calendars
    // rarely include its last calendar day.
    let final_month = DateRange::month_of(end.year(), end.month()).start;
    if first > cfg.train_start || last < final_month {
        return Err(Error::DateCoverage(format!(
            "dates cover {first}..{last} but the fold plan needs {}..{end}",
            cfg.train_start
        )));
    }
    let folds = (0..cfg.folds as u32)
        .map(|k| {
            let start = add_months(cfg.validation_start, k * cfg.months_per_fold);
            let stop = prev_day(add_months(start, cfg.months_per_fold));
            Fold {
                train: DateRange { start: cfg.train_start, end: prev_day(start) },
                validation: DateRange { start, end: stop },
            }
        })
        .collect();
    Ok(FoldPlan { folds })
}

impl FoldPlan {
    /// Validation segments span `[first validation start, last validation end]`.
    pub fn validation_span(&self) -> Option<DateRange> {
        Some(DateRange { start: self.folds.first()?.validation.start, end: self.folds.last()?.validation.end })
    }

    /// Appends one-month folds after the last validation segment until the
    /// month containing `until` (exclusive).
    pub fn extended_until(&self, until: TradingDate) -> FoldPlan {
        let mut out = self.clone();
        let Some(last) = self.folds.last() else { return out };
        let train_start = last.train.start;
        let mut start = next_day(last.validation.end);
        while add_months(start, 1) <= until {
            let end = prev_day(add_months(start, 1));
            out.folds.push(Fold {
                train: DateRange { start: train_start, end: prev_day(start) },
                validation: DateRange { start, end },
            });
            start = add_months(start, 1);
        }
        out
    }
}

/// Search space of one tier plus the feature layout its switches refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSpace {
    pub tier: u8,
    pub space: SearchSpace,
    /// `(feature name, category)` in matrix column order.
    pub features: Vec<(String, String)>,
}

impl TierSpace {
    pub fn new(tier: u8, hyper: &SearchSpace, features: &[(String, String)]) -> Result<Self> {
        if !(1..=3).contains(&tier) {
            return Err(Error::parameter(format!("tier must be 1, 2 or 3, got {tier}")));
        }
        let mut space = hyper.clone();
        if tier >= 2 {
            let mut cats: Vec<&String> = features.iter().map(|(_, c)| c).collect();
            cats.sort();
            cats.dedup();
            for c in cats {
                space.push(&format!("{CATEGORY_PREFIX}{c}"), DimKind::Boolean);
            }
        }
        if tier == 3 {
            for (f, _) in features {
                space.push(&format!("{FEATURE_PREFIX}{f}"), DimKind::Boolean);
            }
        }
        Ok(Self { tier, space, features: features.to_vec() })
    }

    /// Column indices enabled by `config`. Missing switches count as on.
    pub fn feature_mask(&self, config: &Config) -> Vec<usize> {
        let on = |key: String| !matches!(config.get(&key), Some(ParamValue::Bool(false)));
        self.features
            .iter()
            .enumerate()
            .filter(|(_, (f, c))| on(format!("{CATEGORY_PREFIX}{c}")) && on(format!("{FEATURE_PREFIX}{f}")))
            .map(|(j, _)| j)
            .collect()
    }

    /// Hyperparameter entries of `config`.
    pub fn hyperparameters(config: &Config) -> Params {
        config
            .iter()
            .filter(|(k, _)| !k.starts_with(CATEGORY_PREFIX) && !k.starts_with(FEATURE_PREFIX))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn admits(&self, config: &Config) -> bool {
        config.len() == self.space.len()
            && self.space.dims.iter().all(|d| config.get(&d.name).is_some_and(|v| d.kind.admits(v)))
    }

    /// Lifts a parent-tier configuration: shared dimensions are copied, new
    /// category switches are on, and new feature switches follow their
    /// category's switch.
    pub fn lift(&self, parent: &Config) -> Config {
        let mut out = Config::new();
        let category_of: BTreeMap<&str, &str> =
            self.features.iter().map(|(f, c)| (f.as_str(), c.as_str())).collect();
        for d in &self.space.dims {
            if let Some(v) = parent.get(&d.name) {
                out.insert(d.name.clone(), v.clone());
            } else if let Some(f) = d.name.strip_prefix(FEATURE_PREFIX) {
                let cat = category_of.get(f).map(|c| format!("{CATEGORY_PREFIX}{c}"));
                let on = cat.and_then(|k| parent.get(&k).cloned()).unwrap_or(ParamValue::Bool(true));
                out.insert(d.name.clone(), on);
            } else {
                out.insert(d.name.clone(), ParamValue::Bool(true));
            }
        }
        out
    }
}
