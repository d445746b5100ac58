//! Brute-force reference evaluation of every catalog indicator, written
//! directly from the indicator definitions without sharing library code.

use fxdir_core::indicators::{catalog, compute_view, IndicatorKind, IndicatorSpec, PriceView};
use fxdir_core::seed;
use rand::Rng;

pub struct Fixture {
    high: Vec<f64>,
    low: Vec<f64>,
    close: Vec<f64>,
    volume: Vec<f64>,
}

pub fn random_walk(seed_value: u64, len: usize) -> Fixture {
    let mut rng = seed::rng(seed_value);
    let mut close = Vec::with_capacity(len);
    let mut high = Vec::with_capacity(len);
    let mut low = Vec::with_capacity(len);
    let mut volume = Vec::with_capacity(len);
    let mut c = 1.0 + rng.random::<f64>();
    for _ in 0..len {
        let open = c;
        c *= (0.01 * (rng.random::<f64>() - 0.5)).exp();
        high.push(open.max(c) * (1.0 + 0.004 * rng.random::<f64>()));
        low.push(open.min(c) * (1.0 - 0.004 * rng.random::<f64>()));
        close.push(c);
        volume.push(1e5 * (0.5 + rng.random::<f64>()));
    }
    Fixture { high, low, close, volume }
}

fn sma(x: &[f64], t: usize, n: usize) -> Option<f64> {
    if t + 1 < n {
        return None;
    }
    let mut s = 0.0;
    for i in 0..n {
        s += x[t - i];
    }
    Some(s / n as f64)
}

fn wma(x: &[f64], t: usize, n: usize) -> Option<f64> {
    if t + 1 < n {
        return None;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let w = (n - i) as f64;
        num += w * x[t - i];
        den += w;
    }
    Some(num / den)
}

fn ema_at(x: &[f64], t: usize, n: usize) -> f64 {
    let a = 2.0 / (n as f64 + 1.0);
    // Closed form: a * sum_{j<t} (1-a)^j x[t-j] + (1-a)^t x[0].
    let mut acc = (1.0 - a).powi(t as i32) * x[0];
    for j in 0..t {
        acc += a * (1.0 - a).powi(j as i32) * x[t - j];
    }
    acc
}

fn stoch_k(f: &Fixture, t: usize, n: usize) -> Option<f64> {
    if t < n {
        return None;
    }
    let hh = (t - n..=t).map(|i| f.high[i]).fold(f64::MIN, f64::max);
    let ll = (t - n..=t).map(|i| f.low[i]).fold(f64::MAX, f64::min);
    Some(if hh == ll { 50.0 } else { 100.0 * (f.close[t] - ll) / (hh - ll) })
}

fn reference(spec: &IndicatorSpec, f: &Fixture, t: usize) -> Option<f64> {
    let c = &f.close;
    let n = spec.windows.first().copied().unwrap_or(0);
    match spec.kind {
        IndicatorKind::SmaClose => sma(c, t, n),
        IndicatorKind::WmaClose => wma(c, t, n),
        IndicatorKind::SmaVolume => sma(&f.volume, t, n),
        IndicatorKind::WmaVolume => wma(&f.volume, t, n),
        IndicatorKind::Momentum => (t >= n).then(|| c[t] - c[t - n]),
        IndicatorKind::Roc => (t >= n).then(|| 100.0 * c[t] / c[t - n]),
        IndicatorKind::StochK => stoch_k(f, t, n),
        IndicatorKind::StochD => {
            if t + 1 < 2 * n {
                return None;
            }
            let mut s = 0.0;
            for i in 0..n {
                s += stoch_k(f, t - i, n)?;
            }
            Some(s / n as f64)
        }
        IndicatorKind::Rsi => {
            if t < n {
                return None;
            }
            let (mut up, mut dw) = (0.0, 0.0);
            for i in (t + 1 - n)..=t {
                let d = c[i] - c[i - 1];
                if d > 0.0 {
                    up += d;
                } else {
                    dw -= d;
                }
            }
            Some(if up == 0.0 && dw == 0.0 {
                50.0
            } else if dw == 0.0 {
                100.0
            } else {
                100.0 * up / (up + dw)
            })
        }
        IndicatorKind::WilliamsR => {
            if t < n {
                return None;
            }
            let (h, l) = (f.high[t - n], f.low[t - n]);
            Some(if h == l { 50.0 } else { 100.0 * (h - c[t]) / (h - l) })
        }
        IndicatorKind::AdOsc => {
            if t < 1 {
                return None;
            }
            let (h, l) = (f.high[t], f.low[t]);
            Some(if h == l { 0.0 } else { (h - c[t - 1]) / (h - l) })
        }
        IndicatorKind::Cci => {
            if t + 1 < n {
                return None;
            }
            let m = |i: usize| (f.high[i] + f.low[i] + c[i]) / 3.0;
            let sm = (0..n).map(|i| m(t - i)).sum::<f64>() / n as f64;
            let d = (0..n).map(|i| (m(t - i) - sm).abs()).sum::<f64>() / n as f64;
            Some(if d == 0.0 { 0.0 } else { (m(t) - sm) / (0.015 * d) })
        }
        IndicatorKind::Disparity => sma(c, t, n).map(|s| 100.0 * c[t] / s),
        IndicatorKind::Oscp => {
            let fast = sma(c, t, n)?;
            let slow = sma(c, t, spec.windows[1])?;
            Some((fast - slow) / fast)
        }
        IndicatorKind::Macd => Some(ema_at(c, t, n) - ema_at(c, t, spec.windows[1])),
        IndicatorKind::MacdSignal => unreachable!("evaluated over the whole MACD line"),
        IndicatorKind::Ema => Some(ema_at(c, t, n)),
    }
}

/// Compares every catalog spec against the brute-force reference on
/// `fixtures` seeded random walks of length `len`; returns the first mismatch.
pub fn check_catalog(fixtures: u64, len: usize) -> Result<(), String> {
    let specs = catalog();
    for fixture_seed in 0..fixtures {
        let f = random_walk(seed::derive(0x0A11CE, fixture_seed), len);
        let view = PriceView { high: &f.high, low: &f.low, close: &f.close, volume: &f.volume };
        for spec in &specs {
            let got = compute_view(spec, &view).map_err(|e| format!("{spec:?}: {e}"))?;
            let line: Vec<f64> = if spec.kind == IndicatorKind::MacdSignal {
                (0..len)
                    .map(|i| ema_at(&f.close, i, spec.windows[0]) - ema_at(&f.close, i, spec.windows[1]))
                    .collect()
            } else {
                Vec::new()
            };
            for t in 0..len {
                let want = if spec.kind == IndicatorKind::MacdSignal {
                    Some(ema_at(&line, t, spec.windows[2]))
                } else {
                    reference(spec, &f, t)
                };
                match want {
                    None if !got[t].is_nan() => return Err(format!("{spec:?} defined at {t}")),
                    Some(w) if !((got[t] - w).abs() <= 1e-9) => {
                        return Err(format!("{spec:?} fixture {fixture_seed} t {t}: got {} want {w}", got[t]))
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}
