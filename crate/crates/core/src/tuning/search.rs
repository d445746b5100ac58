//! Search loops, cross-tier transfer and the round-robin tier schedule.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tpe::{suggest, TpeConfig};
use super::{Config, TierSpace};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed,
    /// Lifted from the tier below; the objective is the parent's.
    Transferred,
}

impl TrialStatus {
    pub fn label(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Failed => "failed",
            TrialStatus::Transferred => "transferred",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Position in its tier's history.
    pub id: usize,
    pub tier: u8,
    pub config: Config,
    pub objective: Option<f64>,
    pub status: TrialStatus,
    /// `(tier, id)` of the trial this one was lifted from.
    pub parent: Option<(u8, usize)>,
    pub note: Option<String>,
}

impl Trial {
    pub fn transferred(&self) -> bool {
        self.status == TrialStatus::Transferred
    }
}

/// Best trial by objective; ties go to the earliest.
pub fn best_of(history: &[Trial]) -> Option<&Trial> {
    history
        .iter()
        .filter(|t| t.objective.is_some_and(f64::is_finite))
        .fold(None, |best: Option<&Trial>, t| match best {
            Some(b) if b.objective >= t.objective => Some(b),
            _ => Some(t),
        })
}

/// Top `q` trials, best first, ties by position.
pub fn top_trials(history: &[Trial], q: usize) -> Vec<&Trial> {
    let mut ranked: Vec<&Trial> = history.iter().filter(|t| t.objective.is_some_and(f64::is_finite)).collect();
    ranked.sort_by(|a, b| b.objective.unwrap().total_cmp(&a.objective.unwrap()));
    ranked.truncate(q);
    ranked
}

pub struct Search<'a> {
    pub space: &'a TierSpace,
    pub tpe: TpeConfig,
    pub seed: u64,
    pub history: Vec<Trial>,
    evaluated: usize,
}

impl<'a> Search<'a> {
    pub fn new(space: &'a TierSpace, tpe: TpeConfig, seed: u64) -> Self {
        Self { space, tpe, seed, history: Vec::new(), evaluated: 0 }
    }

    pub fn evaluated(&self) -> usize {
        self.evaluated
    }

    /// Proposes and evaluates `n` new trials. An objective error marks the
    /// trial failed; the search carries on.
    pub fn step<F>(&mut self, n: usize, objective: &mut F)
    where
        F: FnMut(&Config) -> Result<f64>,
    {
        for _ in 0..n {
            let mut rng = seed::rng(seed::derive(self.seed, self.evaluated as u64));
            let config = suggest(&self.history, &self.space.space, &self.tpe, &mut rng);
            let (objective, status, note) = match objective(&config) {
                Ok(v) if v.is_finite() => (Some(v), TrialStatus::Ok, None),
                Ok(v) => (None, TrialStatus::Failed, Some(format!("objective {v}"))),
                Err(e) => (None, TrialStatus::Failed, Some(e.to_string())),
            };
            self.history.push(Trial {
                id: self.history.len(),
                tier: self.space.tier,
                config,
                objective,
                status,
                parent: None,
                note,
            });
            self.evaluated += 1;
        }
    }

    /// Adds `parent` lifted into this tier unless an identical configuration
    /// is already present. Returns whether it was added.
    pub fn add_transferred(&mut self, parent: &Trial) -> bool {
        let config = self.space.lift(&parent.config);
        if self.history.iter().any(|t| t.config == config) {
            return false;
        }
        self.history.push(Trial {
            id: self.history.len(),
            tier: self.space.tier,
            config,
            objective: parent.objective,
            status: TrialStatus::Transferred,
            parent: Some((parent.tier, parent.id)),
            note: None,
        });
        true
    }

    pub fn best(&self) -> Result<&Trial> {
        best_of(&self.history).ok_or_else(|| {
            Error::Search(format!("every trial of tier {} failed ({} evaluated)", self.space.tier, self.evaluated))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub tier: u8,
    pub best: Trial,
    pub history: Vec<Trial>,
}

/// `budget` new trials on top of `warm_start`, which is lifted into `space`.
pub fn run_search<F>(
    space: &TierSpace,
    budget: usize,
    warm_start: &[Trial],
    tpe: TpeConfig,
    seed: u64,
    mut objective: F,
) -> Result<SearchResult>
where
    F: FnMut(&Config) -> Result<f64>,
{
    let mut s = Search::new(space, tpe, seed);
    for t in warm_start {
        s.add_transferred(t);
    }
    s.step(budget, &mut objective);
    let best = s.best()?.clone();
    Ok(SearchResult { tier: space.tier, best, history: s.history })
}

/// Lifts the top `q` trials of `from` into `to`; returns how many were new.
pub fn transfer(from: &Search<'_>, to: &mut Search<'_>, q: usize) -> usize {
    let top: Vec<Trial> = top_trials(&from.history, q).into_iter().cloned().collect();
    top.iter().filter(|t| to.add_transferred(t)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierSchedule {
    pub budgets: [usize; 3],
    /// New trials per tier between transfers.
    pub chunk: usize,
    /// Trials lifted per transfer.
    pub top_q: usize,
}

impl Default for TierSchedule {
    fn default() -> Self {
        Self { budgets: [100, 200, 300], chunk: 25, top_q: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieredResult {
    pub tiers: Vec<SearchResult>,
    /// Tier and trial of the overall best; ties go to the lower tier.
    pub best: Trial,
}

/// Runs the three tiers round-robin in chunks, lifting the top trials
/// 1 → 2 and 2 → 3 after every round and once more at the end.
pub fn run_tiers<F>(
    spaces: &[TierSpace; 3],
    schedule: &TierSchedule,
    tpe: TpeConfig,
    seed: u64,
    mut objective: F,
) -> Result<TieredResult>
where
    F: FnMut(u8, &Config) -> Result<f64>,
{
    if schedule.chunk == 0 {
        return Err(Error::parameter("tier chunk size must be positive"));
    }
    let mut searches: Vec<Search<'_>> =
        spaces.iter().enumerate().map(|(i, s)| Search::new(s, tpe, seed::derive(seed, i as u64))).collect();
    loop {
        let mut progressed = false;
        for (i, s) in searches.iter_mut().enumerate() {
            let n = schedule.chunk.min(schedule.budgets[i] - s.evaluated());
            if n > 0 {
                let tier = s.space.tier;
                s.step(n, &mut |c: &Config| objective(tier, c));
                progressed = true;
            }
        }
        for i in 0..2 {
            let (lo, hi) = searches.split_at_mut(i + 1);
            transfer(&lo[i], &mut hi[0], schedule.top_q);
        }
        if !progressed {
            break;
        }
    }
    let mut tiers = Vec::with_capacity(3);
    for s in &searches {
        tiers.push(SearchResult { tier: s.space.tier, best: s.best()?.clone(), history: s.history.clone() });
    }
    let best = tiers
        .iter()
        .map(|r| &r.best)
        .fold(None, |acc: Option<&Trial>, t| match acc {
            Some(b) if b.objective >= t.objective => Some(b),
            _ => Some(t),
        })
        .expect("three tiers")
        .clone();
    Ok(TieredResult { tiers, best })
}
