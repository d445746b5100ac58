//! Accuracy and compounded profit under the annual and monthly-retrain
//! protocols.
//!
//! `P(0) = 1` and the reported return is `100 (P(T) - 1)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::calendar::{ymd, DateRange, TradingDate};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::accuracy;

/// Running product of per-step factors; `values[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitCurve {
    pub factors: Vec<f64>,
    pub values: Vec<f64>,
}

impl ProfitCurve {
    fn from_factors(factors: Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(factors.len() + 1);
        let mut p = 1.0;
        values.push(p);
        for f in &factors {
            p *= f;
            values.push(p);
        }
        Self { factors, values }
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("curve starts at 1")
    }

    pub fn return_pct(&self) -> f64 {
        100.0 * (self.final_value() - 1.0)
    }

    /// `P(t) - P(t-1)` for each step.
    pub fn daily_returns(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

fn factor(pred: u8, prev: f64, next: f64) -> f64 {
    if pred == 1 {
        next / prev
    } else {
        prev / next
    }
}

/// `preds[i]` bets on the move `closes[i] -> closes[i+1]`.
pub fn profit_curve(preds: &[u8], closes: &[f64]) -> Result<ProfitCurve> {
    if closes.len() != preds.len() + 1 {
        return Err(Error::validation(format!(
            "{} predictions need {} closes, got {}",
            preds.len(),
            preds.len() + 1,
            closes.len()
        )));
    }
    check_positive(closes)?;
    Ok(ProfitCurve::from_factors(
        preds.iter().enumerate().map(|(i, &p)| factor(p, closes[i], closes[i + 1])).collect(),
    ))
}

/// Profit when each prediction carries its own `(close, next close)` pair,
/// as rows of a dataset do after pre-closure days are dropped.
pub fn profit_from_pairs(preds: &[u8], close: &[f64], next_close: &[f64]) -> Result<ProfitCurve> {
    profit_from_pairs_with_cost(preds, close, next_close, 0.0)
}

/// As `profit_from_pairs`, with every factor multiplied by `1 - cost`.
pub fn profit_from_pairs_with_cost(preds: &[u8], close: &[f64], next_close: &[f64], cost: f64) -> Result<ProfitCurve> {
    if close.len() != preds.len() || next_close.len() != preds.len() {
        return Err(Error::validation("predictions and price pairs differ in length"));
    }
    if !(0.0..1.0).contains(&cost) {
        return Err(Error::parameter("trade cost must lie in [0, 1)"));
    }
    check_positive(close)?;
    check_positive(next_close)?;
    Ok(ProfitCurve::from_factors(
        preds.iter().zip(close.iter().zip(next_close)).map(|(&p, (&c, &n))| factor(p, c, n) * (1.0 - cost)).collect(),
    ))
}

fn check_positive(v: &[f64]) -> Result<()> {
    match v.iter().position(|&c| !(c > 0.0)) {
        Some(i) => Err(Error::validation(format!("close at position {i} is not positive"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Protocol {
    Annual,
    MonthlyRetrain,
}

impl Protocol {
    pub fn label(self) -> &'static str {
        match self {
            Protocol::Annual => "annually",
            Protocol::MonthlyRetrain => "monthly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthSummary {
    pub month: u32,
    pub rows: usize,
    pub accuracy: f64,
    /// Product of the month's factors.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub test_year: i32,
    pub accuracy: f64,
    pub return_pct: f64,
    pub fits: usize,
    pub months: Vec<MonthSummary>,
    pub dates: Vec<TradingDate>,
    pub predictions: Vec<u8>,
    pub labels: Vec<u8>,
    pub curve: ProfitCurve,
    pub daily_returns: Vec<f64>,
    pub fingerprint: String,
}

/// Labels and price pairs of the rows being evaluated.
#[derive(Debug, Clone, Copy)]
pub struct EvalData<'a> {
    pub dates: &'a [TradingDate],
    pub labels: &'a [u8],
    pub close: &'a [f64],
    pub next_close: &'a [f64],
}

impl<'a> From<&'a FeatureMatrix> for EvalData<'a> {
    fn from(m: &'a FeatureMatrix) -> Self {
        Self { dates: &m.dates, labels: &m.labels, close: &m.close, next_close: &m.next_close }
    }
}

/// Runs `protocol` over `test_year`.
///
/// `fit_predict(train_rows, test_rows)` fits on the given row indices and
/// returns one label per test row. The annual protocol calls it once with
/// every row before the test year; monthly retraining calls it twelve times,
/// each fit also seeing the test-year months already evaluated.
pub fn evaluate<F>(protocol: Protocol, test_year: i32, data: EvalData<'_>, mut fit_predict: F) -> Result<EvalReport>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<u8>>,
{
    let start = ymd(test_year, 1, 1);
    let rows_before = |d: TradingDate| -> Vec<usize> { (0..data.dates.len()).filter(|&i| data.dates[i] < d).collect() };
    let rows_in = |r: DateRange| -> Vec<usize> { (0..data.dates.len()).filter(|&i| r.contains(data.dates[i])).collect() };
    let segments: Vec<(Vec<usize>, Vec<usize>)> = match protocol {
        Protocol::Annual => {
            let test = rows_in(DateRange::year(test_year));
            if test.is_empty() {
                return Err(Error::DateCoverage(format!("no rows in test year {test_year}")));
            }
            alloc::vec![(rows_before(start), test)]
        }
        Protocol::MonthlyRetrain => (1..=12)
            .map(|m| {
                let month = DateRange::month_of(test_year, m);
                let test = rows_in(month);
                if test.is_empty() {
                    return Err(Error::DateCoverage(format!("no rows in test month {test_year}-{m:02}")));
                }
                Ok((rows_before(month.start), test))
            })
            .collect::<Result<_>>()?,
    };

    let mut test_rows = Vec::new();
    let mut predictions = Vec::new();
    for (train, test) in &segments {
        if train.is_empty() {
            return Err(Error::DateCoverage(format!("no training rows before {test_year}")));
        }
        let p = fit_predict(train, test)?;
        if p.len() != test.len() {
            return Err(Error::validation("fit_predict returned the wrong number of predictions"));
        }
        test_rows.extend_from_slice(test);
        predictions.extend(p);
    }
    let pick = |v: &[f64]| -> Vec<f64> { test_rows.iter().map(|&i| v[i]).collect() };
    let labels: Vec<u8> = test_rows.iter().map(|&i| data.labels[i]).collect();
    let dates: Vec<TradingDate> = test_rows.iter().map(|&i| data.dates[i]).collect();
    let curve = profit_from_pairs(&predictions, &pick(data.close), &pick(data.next_close))?;

    let mut months = Vec::new();
    for m in 1..=12u32 {
        let idx: Vec<usize> = (0..dates.len()).filter(|&k| dates[k].month() == m).collect();
        if idx.is_empty() {
            continue;
        }
        let p: Vec<u8> = idx.iter().map(|&k| predictions[k]).collect();
        let l: Vec<u8> = idx.iter().map(|&k| labels[k]).collect();
        months.push(MonthSummary {
            month: m,
            rows: idx.len(),
            accuracy: accuracy(&p, &l),
            growth: idx.iter().map(|&k| curve.factors[k]).product(),
        });
    }
    Ok(EvalReport {
        protocol,
        test_year,
        accuracy: accuracy(&predictions, &labels),
        return_pct: curve.return_pct(),
        fits: segments.len(),
        months,
        daily_returns: curve.daily_returns(),
        dates,
        predictions,
        labels,
        curve,
        fingerprint: String::new(),
    })
}
