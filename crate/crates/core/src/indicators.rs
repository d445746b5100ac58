//! Technical indicators over daily OHLCV data.
//!
//! Every indicator produces a series aligned with its input. Indices that
//! lack enough history are *undefined* and hold `NaN`; `IndicatorSeries::get`
//! turns them into `None`.
//!
//! Conventions not fixed by the formulas themselves:
//! - EMA uses `alpha = 2 / (n + 1)` and is seeded with the first observation.
//! - Stochastic D% is the N-day mean of K%.
//! - CCI uses the mean absolute deviation of the typical price.
//! - OSCP is `(SMA_N - SMA_M) / SMA_N`.
//! - Williams R% uses the single-day high/low at `t - N`.
//! - Degenerate denominators map to neutral values (see each kind).

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::OhlcvSeries;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IndicatorKind {
    SmaClose,
    WmaClose,
    SmaVolume,
    WmaVolume,
    Momentum,
    StochK,
    StochD,
    Rsi,
    WilliamsR,
    AdOsc,
    Cci,
    Roc,
    Disparity,
    Oscp,
    Macd,
    MacdSignal,
    Ema,
}

impl IndicatorKind {
    pub const ALL: [IndicatorKind; 17] = [
        IndicatorKind::SmaClose,
        IndicatorKind::WmaClose,
        IndicatorKind::SmaVolume,
        IndicatorKind::WmaVolume,
        IndicatorKind::Momentum,
        IndicatorKind::StochK,
        IndicatorKind::StochD,
        IndicatorKind::Rsi,
        IndicatorKind::WilliamsR,
        IndicatorKind::AdOsc,
        IndicatorKind::Cci,
        IndicatorKind::Roc,
        IndicatorKind::Disparity,
        IndicatorKind::Oscp,
        IndicatorKind::Macd,
        IndicatorKind::MacdSignal,
        IndicatorKind::Ema,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            IndicatorKind::SmaClose => "SMA_CLOSE",
            IndicatorKind::WmaClose => "WMA_CLOSE",
            IndicatorKind::SmaVolume => "SMA_VOLUME",
            IndicatorKind::WmaVolume => "WMA_VOLUME",
            IndicatorKind::Momentum => "MOMENTUM",
            IndicatorKind::StochK => "STOCH_K",
            IndicatorKind::StochD => "STOCH_D",
            IndicatorKind::Rsi => "RSI",
            IndicatorKind::WilliamsR => "WILLIAMS_R",
            IndicatorKind::AdOsc => "AD_OSC",
            IndicatorKind::Cci => "CCI",
            IndicatorKind::Roc => "ROC",
            IndicatorKind::Disparity => "DISPARITY",
            IndicatorKind::Oscp => "OSCP",
            IndicatorKind::Macd => "MACD",
            IndicatorKind::MacdSignal => "MACD_SIGNAL",
            IndicatorKind::Ema => "EMA",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == tag)
            .ok_or_else(|| Error::parameter(format!("unknown indicator kind {tag}")))
    }

    /// Number of window parameters the kind takes.
    pub fn arity(self) -> usize {
        match self {
            IndicatorKind::AdOsc => 0,
            IndicatorKind::Oscp | IndicatorKind::Macd => 2,
            IndicatorKind::MacdSignal => 3,
            _ => 1,
        }
    }
}

/// An indicator kind with its window parameters `(N[, M[, P]])`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub kind: IndicatorKind,
    pub windows: Vec<usize>,
}

impl IndicatorSpec {
    pub fn new(kind: IndicatorKind, windows: &[usize]) -> Result<Self> {
        if windows.len() != kind.arity() {
            return Err(Error::parameter(format!(
                "{} takes {} window parameter(s), got {}",
                kind.tag(),
                kind.arity(),
                windows.len()
            )));
        }
        if windows.iter().any(|&w| w == 0) {
            return Err(Error::parameter(format!("{}: windows must be >= 1", kind.tag())));
        }
        if kind.arity() >= 2 && windows[0] >= windows[1] {
            return Err(Error::parameter(format!(
                "{}: fast window {} must be shorter than slow window {}",
                kind.tag(),
                windows[0],
                windows[1]
            )));
        }
        Ok(Self { kind, windows: windows.to_vec() })
    }

    fn n(&self) -> usize {
        self.windows[0]
    }

    /// First defined index.
    pub fn warmup(&self) -> usize {
        use IndicatorKind::*;
        match self.kind {
            SmaClose | WmaClose | SmaVolume | WmaVolume | Cci | Disparity => self.n() - 1,
            Momentum | Roc | StochK | WilliamsR | Rsi => self.n(),
            StochD => 2 * self.n() - 1,
            AdOsc => 1,
            Oscp => self.windows[1] - 1,
            Macd | MacdSignal | Ema => 0,
        }
    }

    /// `<instrument>_<KIND>[_<N>[_<M>[_<P>]]]`, e.g. `EURUSD_RSI_14`.
    pub fn column_name(&self, instrument: &str) -> String {
        let mut s = format!("{instrument}_{}", self.kind.tag());
        for w in &self.windows {
            s.push('_');
            s.push_str(&w.to_string());
        }
        s
    }
}

/// Borrowed price/volume columns of one instrument.
#[derive(Debug, Clone, Copy)]
pub struct PriceView<'a> {
    pub high: &'a [f64],
    pub low: &'a [f64],
    pub close: &'a [f64],
    pub volume: &'a [f64],
}

impl PriceView<'_> {
    pub fn len(&self) -> usize {
        self.close.len()
    }

    pub fn is_empty(&self) -> bool {
        self.close.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub spec: IndicatorSpec,
    pub source: String,
    /// `NaN` marks undefined (warm-up) entries.
    pub values: Vec<f64>,
}

impl IndicatorSeries {
    pub fn get(&self, t: usize) -> Option<f64> {
        self.values.get(t).copied().filter(|v| !v.is_nan())
    }

    pub fn defined(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().copied().enumerate().filter(|(_, v)| !v.is_nan())
    }
}

/// Exponential moving average seeded with the first observation.
pub fn ema(values: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::parameter("EMA window must be >= 1"));
    }
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut prev = match values.first() {
        Some(&v) => v,
        None => return Ok(out),
    };
    out.push(prev);
    for &v in &values[1..] {
        prev = alpha * v + (1.0 - alpha) * prev;
        out.push(prev);
    }
    Ok(out)
}

pub fn compute(spec: &IndicatorSpec, series: &OhlcvSeries) -> Result<IndicatorSeries> {
    let high: Vec<f64> = series.bars.iter().map(|b| b.high).collect();
    let low: Vec<f64> = series.bars.iter().map(|b| b.low).collect();
    let close = series.closes();
    let volume: Vec<f64> = series.bars.iter().map(|b| b.volume).collect();
    let view = PriceView { high: &high, low: &low, close: &close, volume: &volume };
    Ok(IndicatorSeries {
        spec: spec.clone(),
        source: series.instrument_id.clone(),
        values: compute_view(spec, &view)?,
    })
}

/// Evaluates `spec` over borrowed columns. Entries before the warm-up are `NaN`.
pub fn compute_view(spec: &IndicatorSpec, p: &PriceView<'_>) -> Result<Vec<f64>> {
    use IndicatorKind::*;
    let len = p.len();
    if p.high.len() != len || p.low.len() != len || p.volume.len() != len {
        return Err(Error::validation("price columns differ in length"));
    }
    let spec = IndicatorSpec::new(spec.kind, &spec.windows)?;
    let n = spec.windows.first().copied().unwrap_or(1);
    let mut out = match spec.kind {
        SmaClose => rolling_mean(p.close, n),
        WmaClose => rolling_wma(p.close, n),
        SmaVolume => rolling_mean(p.volume, n),
        WmaVolume => rolling_wma(p.volume, n),
        Momentum => lagged(p.close, n, |now, then| now - then),
        Roc => lagged(p.close, n, |now, then| 100.0 * now / then),
        StochK => stoch_k(p, n),
        StochD => rolling_mean_from(&stoch_k(p, n), n, n),
        Rsi => rsi(p.close, n),
        WilliamsR => williams_r(p, n),
        AdOsc => ad_osc(p),
        Cci => cci(p, n),
        Disparity => {
            let sma = rolling_mean(p.close, n);
            zip_defined(p.close, &sma, |c, s| 100.0 * c / s)
        }
        Oscp => {
            let fast = rolling_mean(p.close, n);
            let slow = rolling_mean(p.close, spec.windows[1]);
            zip_defined(&fast, &slow, |f, s| (f - s) / f)
        }
        Macd => macd(p.close, n, spec.windows[1])?,
        MacdSignal => ema(&macd(p.close, n, spec.windows[1])?, spec.windows[2])?,
        Ema => ema(p.close, n)?,
    };
    let warm = spec.warmup().min(len);
    out[..warm].iter_mut().for_each(|v| *v = f64::NAN);
    Ok(out)
}

fn rolling_mean(x: &[f64], n: usize) -> Vec<f64> {
    rolling_mean_from(x, n, 0)
}

/// Mean over `x[t-n+1..=t]`, defined once those entries are all at or after `first`.
fn rolling_mean_from(x: &[f64], n: usize, first: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for t in (first + n - 1)..x.len() {
        let sum: f64 = x[t + 1 - n..=t].iter().sum();
        out[t] = sum / n as f64;
    }
    out
}

fn rolling_wma(x: &[f64], n: usize) -> Vec<f64> {
    let denom = (n * (n + 1) / 2) as f64;
    let mut out = vec![f64::NAN; x.len()];
    for t in (n - 1)..x.len() {
        let num: f64 = (0..n).map(|i| (n - i) as f64 * x[t - i]).sum();
        out[t] = num / denom;
    }
    out
}

fn lagged(x: &[f64], n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for t in n..x.len() {
        out[t] = f(x[t], x[t - n]);
    }
    out
}

fn zip_defined(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if x.is_nan() || y.is_nan() { f64::NAN } else { f(x, y) })
        .collect()
}

/// Extremum over the inclusive window `x[t-n..=t]` via a monotone deque.
fn window_extremum(x: &[f64], n: usize, better: impl Fn(f64, f64) -> bool) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    let mut dq: VecDeque<usize> = VecDeque::new();
    for t in 0..x.len() {
        while let Some(&back) = dq.back() {
            if better(x[t], x[back]) || x[t] == x[back] {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(t);
        while let Some(&front) = dq.front() {
            if front + n < t {
                dq.pop_front();
            } else {
                break;
            }
        }
        if t >= n {
            out[t] = x[*dq.front().expect("non-empty window")];
        }
    }
    out
}

/// K% = 100 (C - LL) / (HH - LL) over days `t-N..=t`; 50 when HH = LL.
fn stoch_k(p: &PriceView<'_>, n: usize) -> Vec<f64> {
    let hh = window_extremum(p.high, n, |a, b| a > b);
    let ll = window_extremum(p.low, n, |a, b| a < b);
    (0..p.len())
        .map(|t| {
            if t < n {
                f64::NAN
            } else if hh[t] == ll[t] {
                50.0
            } else {
                100.0 * (p.close[t] - ll[t]) / (hh[t] - ll[t])
            }
        })
        .collect()
}

/// 100 when there were no down moves, 50 when there were no moves at all.
fn rsi(close: &[f64], n: usize) -> Vec<f64> {
    let len = close.len();
    let mut up = vec![0.0; len];
    let mut dw = vec![0.0; len];
    for i in 1..len {
        let d = close[i] - close[i - 1];
        up[i] = d.max(0.0);
        dw[i] = (-d).max(0.0);
    }
    let mut out = vec![f64::NAN; len];
    for t in n..len {
        let su: f64 = up[t + 1 - n..=t].iter().sum();
        let sd: f64 = dw[t + 1 - n..=t].iter().sum();
        out[t] = match (su == 0.0, sd == 0.0) {
            (true, true) => 50.0,
            (false, true) => 100.0,
            _ => 100.0 - 100.0 / (1.0 + su / sd),
        };
    }
    out
}

/// R% = 100 (H(t-N) - C(t)) / (H(t-N) - L(t-N)); 50 when H(t-N) = L(t-N).
fn williams_r(p: &PriceView<'_>, n: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; p.len()];
    for t in n..p.len() {
        let (h, l) = (p.high[t - n], p.low[t - n]);
        out[t] = if h == l { 50.0 } else { 100.0 * (h - p.close[t]) / (h - l) };
    }
    out
}

/// (H(t) - C(t-1)) / (H(t) - L(t)); 0 on a flat day.
fn ad_osc(p: &PriceView<'_>) -> Vec<f64> {
    let mut out = vec![f64::NAN; p.len()];
    for t in 1..p.len() {
        let (h, l) = (p.high[t], p.low[t]);
        out[t] = if h == l { 0.0 } else { (h - p.close[t - 1]) / (h - l) };
    }
    out
}

/// Relative size below which the CCI mean deviation counts as zero. A flat
/// typical price leaves only rounding noise in the deviation.
const CCI_FLAT_REL: f64 = 1e-12;

fn cci(p: &PriceView<'_>, n: usize) -> Vec<f64> {
    let m: Vec<f64> = (0..p.len()).map(|t| (p.high[t] + p.low[t] + p.close[t]) / 3.0).collect();
    let mut out = vec![f64::NAN; p.len()];
    for t in (n - 1)..p.len() {
        let window = &m[t + 1 - n..=t];
        let sm = window.iter().sum::<f64>() / n as f64;
        let dev = window.iter().map(|&v| math::abs(v - sm)).sum::<f64>() / n as f64;
        out[t] = if dev <= CCI_FLAT_REL * math::abs(sm) { 0.0 } else { (m[t] - sm) / (0.015 * dev) };
    }
    out
}

fn macd(close: &[f64], fast: usize, slow: usize) -> Result<Vec<f64>> {
    let f = ema(close, fast)?;
    let s = ema(close, slow)?;
    Ok(f.iter().zip(&s).map(|(a, b)| a - b).collect())
}

const MA_WINDOWS: [usize; 6] = [3, 7, 14, 30, 60, 90];
const SHORT_WINDOWS: [usize; 8] = [1, 2, 3, 7, 14, 30, 60, 90];
const LONG_WINDOWS: [usize; 5] = [7, 14, 30, 60, 90];
const OSCP_PAIRS: [(usize, usize); 5] = [(3, 7), (7, 14), (14, 30), (30, 60), (60, 90)];
const MACD_PAIRS: [(usize, usize); 3] = [(7, 21), (12, 26), (20, 34)];
const MACD_SIGNALS: [(usize, usize, usize); 3] = [(7, 21, 4), (12, 26, 9), (20, 34, 17)];

/// The full indicator grid for one instrument (92 specs).
pub fn catalog() -> Vec<IndicatorSpec> {
    use IndicatorKind::*;
    let single = |kind: IndicatorKind, ws: &[usize]| -> Vec<IndicatorSpec> {
        ws.iter().map(|&w| IndicatorSpec { kind, windows: vec![w] }).collect()
    };
    let mut specs = Vec::with_capacity(92);
    specs.extend(single(SmaClose, &MA_WINDOWS));
    specs.extend(single(WmaClose, &MA_WINDOWS));
    specs.extend(single(SmaVolume, &MA_WINDOWS));
    specs.extend(single(WmaVolume, &MA_WINDOWS));
    specs.extend(single(Momentum, &SHORT_WINDOWS));
    specs.extend(single(StochK, &SHORT_WINDOWS));
    specs.extend(single(StochD, &SHORT_WINDOWS));
    specs.extend(single(Rsi, &LONG_WINDOWS));
    specs.extend(single(WilliamsR, &SHORT_WINDOWS));
    specs.push(IndicatorSpec { kind: AdOsc, windows: vec![] });
    specs.extend(single(Cci, &LONG_WINDOWS));
    specs.extend(single(Roc, &SHORT_WINDOWS));
    specs.extend(single(Disparity, &MA_WINDOWS));
    specs.extend(OSCP_PAIRS.iter().map(|&(n, m)| IndicatorSpec { kind: Oscp, windows: vec![n, m] }));
    specs.extend(MACD_PAIRS.iter().map(|&(n, m)| IndicatorSpec { kind: Macd, windows: vec![n, m] }));
    specs.extend(
        MACD_SIGNALS
            .iter()
            .map(|&(n, m, p)| IndicatorSpec { kind: MacdSignal, windows: vec![n, m, p] }),
    );
    specs
}

/// The indicator grid for each source instrument, in the given order.
pub fn expand_catalog(sources: &[String]) -> Vec<(String, Vec<IndicatorSpec>)> {
    sources.iter().map(|s| (s.clone(), catalog())).collect()
}
