//! Bootstrap aggregation of any non-bagging family with hard voting.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{both_classes, fit_family, get_bool, get_int, Family, Fitted, Params};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Redraws allowed when a bootstrap sample misses a class the inner
/// family needs.
const MAX_REDRAWS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggingModel {
    pub members: Vec<Fitted>,
}

impl BaggingModel {
    /// Share of members voting 1.
    pub fn scores(&self, x: &Matrix) -> Vec<f64> {
        let mut votes = alloc::vec![0.0; x.nrows()];
        for m in &self.members {
            for (v, p) in votes.iter_mut().zip(m.predict(x)) {
                *v += f64::from(p);
            }
        }
        let k = self.members.len() as f64;
        votes.into_iter().map(|v| v / k).collect()
    }
}

pub fn fit(inner: &Family, p: &Params, seed_value: u64, x: &Matrix, y: &[u8]) -> Result<BaggingModel> {
    if matches!(inner, Family::Bagging(_)) {
        return Err(Error::parameter("nested bagging is not supported"));
    }
    let estimators = get_int(p, "bag_estimators", 10)?.max(1) as u64;
    let bootstrap = get_bool(p, "bag_bootstrap", true)?;
    let needs_both = inner.needs_both_classes();
    let n = x.nrows();
    let mut members = Vec::with_capacity(estimators as usize);
    for e in 0..estimators {
        let member_seed = seed::derive(seed_value, e);
        let fitted = if bootstrap {
            let mut drawn = None;
            for attempt in 0..MAX_REDRAWS {
                let mut rng = seed::rng(seed::derive(member_seed, attempt));
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
                if !needs_both || both_classes(&ys) {
                    drawn = Some((x.select_rows(&idx), ys));
                    break;
                }
            }
            let (xs, ys) = drawn.ok_or_else(|| {
                Error::DegenerateData(format!("bootstrap samples for {} keep missing a class", inner.tag()))
            })?;
            fit_family(inner, p, seed::derive(member_seed, MAX_REDRAWS), &xs, &ys)?
        } else {
            fit_family(inner, p, seed::derive(member_seed, MAX_REDRAWS), x, y)?
        };
        members.push(fitted);
    }
    Ok(BaggingModel { members })
}

/// The bagging family wrapping `inner`.
pub fn family(inner: Family) -> Family {
    Family::Bagging(Box::new(inner))
}
