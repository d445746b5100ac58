//! Tree-structured Parzen estimator over independent dimensions.
//!
//! Completed trials are split by objective into a good top-γ share and the
//! rest. Candidates are drawn from the good density and ranked by
//! `ln l(x) - ln g(x)` summed over dimensions.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Config, Trial};
use crate::math;
use crate::models::{DimKind, ParamValue, SearchSpace};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeConfig {
    pub gamma: f64,
    pub candidates: usize,
    /// Trials sampled uniformly before the density model kicks in.
    pub startup: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self { gamma: 0.25, candidates: 24, startup: 10 }
    }
}

impl TpeConfig {
    /// Never leaves the start-up phase.
    pub fn random() -> Self {
        Self { startup: usize::MAX, ..Self::default() }
    }
}

pub fn sample_uniform<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Config {
    space
        .dims
        .iter()
        .map(|d| {
            let v = match &d.kind {
                DimKind::Real { lo, hi, log: true } => {
                    ParamValue::Real(math::exp(rng.random_range(math::ln(*lo)..=math::ln(*hi))).clamp(*lo, *hi))
                }
                DimKind::Real { lo, hi, log: false } => ParamValue::Real(rng.random_range(*lo..=*hi)),
                DimKind::Int { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
                DimKind::Categorical { options } => ParamValue::Cat(options[rng.random_range(0..options.len())].clone()),
                DimKind::Boolean => ParamValue::Bool(rng.random_bool(0.5)),
            };
            (d.name.clone(), v)
        })
        .collect()
}

/// Numeric dimensions live on `[lo, hi]` in internal units: the log for
/// log-scaled reals, and widened by half a step for integers.
fn bounds(kind: &DimKind) -> (f64, f64) {
    match kind {
        DimKind::Real { lo, hi, log: true } => (math::ln(*lo), math::ln(*hi)),
        DimKind::Real { lo, hi, .. } => (*lo, *hi),
        DimKind::Int { lo, hi } => (*lo as f64 - 0.5, *hi as f64 + 0.5),
        _ => unreachable!("numeric dimension"),
    }
}

fn to_internal(kind: &DimKind, v: &ParamValue) -> Option<f64> {
    let x = v.as_f64()?;
    Some(match kind {
        DimKind::Real { log: true, .. } => math::ln(x),
        _ => x,
    })
}

fn from_internal(kind: &DimKind, u: f64) -> ParamValue {
    match kind {
        DimKind::Real { lo, hi, log: true } => ParamValue::Real(math::exp(u).clamp(*lo, *hi)),
        DimKind::Real { lo, hi, .. } => ParamValue::Real(u.clamp(*lo, *hi)),
        DimKind::Int { lo, hi } => ParamValue::Int((math::round(u) as i64).clamp(*lo, *hi)),
        _ => unreachable!("numeric dimension"),
    }
}

/// Equal-weight mixture of truncated Gaussians, one per observation plus a
/// broad prior centred on the range.
struct Parzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
}

impl Parzen {
    fn new(lo: f64, hi: f64, obs: &[f64]) -> Self {
        let range = hi - lo;
        let mut mus: Vec<f64> = obs.to_vec();
        mus.push(0.5 * (lo + hi));
        mus.sort_by(f64::total_cmp);
        let n = mus.len();
        let min_sigma = range / (n.min(100) as f64 + 1.0);
        let sigmas = (0..n)
            .map(|i| {
                let left = if i == 0 { mus[i] - lo } else { mus[i] - mus[i - 1] };
                let right = if i + 1 == n { hi - mus[i] } else { mus[i + 1] - mus[i] };
                left.max(right).clamp(min_sigma, range)
            })
            .collect();
        Self { lo, hi, mus, sigmas }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = rng.random_range(0..self.mus.len());
        for _ in 0..64 {
            let z: f64 = StandardNormal.sample(rng);
            let x = self.mus[k] + self.sigmas[k] * z;
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
        self.mus[k].clamp(self.lo, self.hi)
    }

    fn ln_density(&self, x: f64) -> f64 {
        let mut total = 0.0;
        for (&mu, &s) in self.mus.iter().zip(&self.sigmas) {
            let mass = math::std_normal_cdf((self.hi - mu) / s) - math::std_normal_cdf((self.lo - mu) / s);
            let z = (x - mu) / s;
            total += math::exp(-0.5 * z * z) / (SQRT_2PI * s * mass.max(1e-300));
        }
        math::ln((total / self.mus.len() as f64).max(1e-300))
    }
}

/// Laplace-smoothed frequencies.
fn categorical_probs(n_options: usize, obs: &[usize]) -> Vec<f64> {
    let mut counts = alloc::vec![1.0; n_options];
    for &o in obs {
        counts[o] += 1.0;
    }
    let total = (obs.len() + n_options) as f64;
    counts.iter().map(|c| c / total).collect()
}

fn option_index(kind: &DimKind, v: &ParamValue) -> Option<usize> {
    match (kind, v) {
        (DimKind::Categorical { options }, ParamValue::Cat(s)) => options.iter().position(|o| o == s),
        (DimKind::Boolean, ParamValue::Bool(b)) => Some(usize::from(*b)),
        _ => None,
    }
}

fn option_value(kind: &DimKind, i: usize) -> ParamValue {
    match kind {
        DimKind::Categorical { options } => ParamValue::Cat(options[i].clone()),
        _ => ParamValue::Bool(i == 1),
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

enum DimModel {
    Numeric { good: Parzen, bad: Parzen },
    Discrete { good: Vec<f64>, bad: Vec<f64> },
}

/// Proposes the next configuration given the trial history.
pub fn suggest<R: Rng + ?Sized>(history: &[Trial], space: &SearchSpace, cfg: &TpeConfig, rng: &mut R) -> Config {
    let mut done: Vec<(&Config, f64)> =
        history.iter().filter_map(|t| t.objective.filter(|v| v.is_finite()).map(|v| (&t.config, v))).collect();
    if done.len() < cfg.startup.max(2) {
        return sample_uniform(space, rng);
    }
    if done.iter().all(|(_, v)| *v == done[0].1) {
        return sample_uniform(space, rng);
    }
    // Stable sort keeps earlier trials first among equal objectives.
    done.sort_by(|a, b| b.1.total_cmp(&a.1));
    let n_good = (math::ceil(cfg.gamma * done.len() as f64) as usize).clamp(1, done.len() - 1);
    let (good, bad) = done.split_at(n_good);

    let models: Vec<DimModel> = space
        .dims
        .iter()
        .map(|d| match &d.kind {
            DimKind::Real { .. } | DimKind::Int { .. } => {
                let (lo, hi) = bounds(&d.kind);
                let obs = |set: &[(&Config, f64)]| -> Vec<f64> {
                    set.iter().filter_map(|(c, _)| c.get(&d.name).and_then(|v| to_internal(&d.kind, v))).collect()
                };
                DimModel::Numeric { good: Parzen::new(lo, hi, &obs(good)), bad: Parzen::new(lo, hi, &obs(bad)) }
            }
            DimKind::Categorical { .. } | DimKind::Boolean => {
                let k = match &d.kind {
                    DimKind::Categorical { options } => options.len(),
                    _ => 2,
                };
                let obs = |set: &[(&Config, f64)]| -> Vec<usize> {
                    set.iter().filter_map(|(c, _)| c.get(&d.name).and_then(|v| option_index(&d.kind, v))).collect()
                };
                DimModel::Discrete { good: categorical_probs(k, &obs(good)), bad: categorical_probs(k, &obs(bad)) }
            }
        })
        .collect();

    let mut best: Option<(f64, Config)> = None;
    for _ in 0..cfg.candidates.max(1) {
        let mut score = 0.0;
        let mut cand = Config::new();
        for (d, m) in space.dims.iter().zip(&models) {
            let v = match m {
                DimModel::Numeric { good, bad } => {
                    let v = from_internal(&d.kind, good.sample(rng));
                    let u = to_internal(&d.kind, &v).expect("numeric");
                    score += good.ln_density(u) - bad.ln_density(u);
                    v
                }
                DimModel::Discrete { good, bad } => {
                    let i = sample_index(good, rng);
                    score += math::ln(good[i]) - math::ln(bad[i]);
                    option_value(&d.kind, i)
                }
            };
            cand.insert(d.name.clone(), v);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    best.expect("at least one candidate").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn laplace_smoothing() {
        assert_eq!(categorical_probs(2, &[]), alloc::vec![0.5, 0.5]);
        assert_eq!(categorical_probs(3, &[0, 0]), alloc::vec![0.6, 0.2, 0.2]);
    }

    #[test]
    fn parzen_density_integrates_to_one() {
        let p = Parzen::new(0.0, 2.0, &[0.3, 0.35, 1.7]);
        let n = 20000;
        let h = 2.0 / n as f64;
        let integral: f64 = (0..n).map(|i| math::exp(p.ln_density((i as f64 + 0.5) * h)) * h).sum();
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
    }

    #[test]
    fn samples_stay_in_bounds() {
        let mut space = SearchSpace::default();
        space.push("r", DimKind::Real { lo: 1e-3, hi: 10.0, log: true });
        space.push("i", DimKind::Int { lo: 2, hi: 5 });
        let mut rng = seed::rng(3);
        let p = Parzen::new(0.0, 1.0, &[0.99, 0.98]);
        for _ in 0..1000 {
            let x = p.sample(&mut rng);
            assert!((0.0..=1.0).contains(&x));
            let c = sample_uniform(&space, &mut rng);
            assert!(space.dims.iter().all(|d| d.kind.admits(&c[&d.name])));
        }
    }
}
