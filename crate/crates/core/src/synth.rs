//! Seeded synthetic market data: OHLCV random walks, stepwise economic
//! calendars and an optional planted direction signal on the target.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::{add_months, prev_day, weekday_index, ymd, TradingDate};
use crate::error::{Error, Result};
use crate::marketdata::{EconomicCalendar, EconomicRelease, OhlcvBar, OhlcvSeries};
use crate::math;
use crate::seed;

/// Next-day direction of the target is the sign of its `window`-day
/// momentum, flipped with probability `noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedSignal {
    pub window: usize,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Target trading days, counted back from `end`.
    pub days: usize,
    pub end: TradingDate,
    pub target: String,
    pub instruments: Vec<String>,
    pub indicators: Vec<String>,
    pub planted: Option<PlantedSignal>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            seed: 7,
            days: 2500,
            end: ymd(2022, 12, 31),
            target: "EURUSD".into(),
            instruments: s(&["EURUSD", "GBPUSD", "DAX", "SPX"]),
            indicators: s(&["USA_CPI_YOY", "EA_CPI_YOY", "USA_INTEREST_RATE", "EA_INTEREST_RATE", "USA_GDP_QOQ"]),
            planted: Some(PlantedSignal { window: 3, noise: 0.15 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub series: Vec<OhlcvSeries>,
    pub calendars: Vec<EconomicCalendar>,
}

fn is_forex(id: &str) -> bool {
    id.len() == 6 && id.chars().all(|c| c.is_ascii_uppercase())
}

/// Weekdays except 25 Dec and 1 Jan; indices also close on 1 May (European)
/// or 4 Jul (everything else).
fn is_open(id: &str, d: TradingDate) -> bool {
    use chrono::Datelike;
    let (m, day) = (d.month(), d.day());
    if weekday_index(d) >= 5 || (m == 12 && day == 25) || (m == 1 && day == 1) {
        return false;
    }
    if is_forex(id) {
        return true;
    }
    let european = matches!(id, "DAX" | "CAC40" | "FTSE" | "STOXX50" | "IBEX" | "AEX" | "SMI");
    !(european && m == 5 && day == 1 || !european && m == 7 && day == 4)
}

fn calendar_days(cfg: &SynthConfig) -> Vec<TradingDate> {
    let mut out = Vec::with_capacity(cfg.days * 7 / 5 + 8);
    let mut d = cfg.end;
    let mut counted = 0;
    while counted < cfg.days {
        if is_open(&cfg.target, d) {
            counted += 1;
        }
        out.push(d);
        d = prev_day(d);
    }
    out.reverse();
    out
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn series_for(cfg: &SynthConfig, id: &str, idx: u64, days: &[TradingDate]) -> Result<OhlcvSeries> {
    let mut rng = seed::rng(seed::derive(cfg.seed, idx));
    let forex = is_forex(id);
    let sigma = if forex { 0.005 } else { 0.01 };
    let mut close = if forex { 0.8 + 0.8 * rng.random::<f64>() } else { 2000.0 + 10000.0 * rng.random::<f64>() };
    let planted = cfg.planted.filter(|_| id == cfg.target);
    let mut closes: Vec<f64> = Vec::new();
    let mut bars = Vec::new();
    for &d in days.iter().filter(|&&d| is_open(id, d)) {
        let open = close * math::exp(0.1 * sigma * normal(&mut rng));
        let step = sigma * normal(&mut rng);
        let r = match planted {
            Some(p) if closes.len() > p.window => {
                let last = closes[closes.len() - 1];
                let mom = last - closes[closes.len() - 1 - p.window];
                let up = (mom >= 0.0) != (rng.random::<f64>() < p.noise);
                if up { math::abs(step) } else { -math::abs(step) }
            }
            _ => step,
        };
        close *= math::exp(r);
        let hi = open.max(close) * (1.0 + 0.3 * sigma * math::abs(normal(&mut rng)));
        let lo = open.min(close) * (1.0 - 0.3 * sigma * math::abs(normal(&mut rng)));
        let volume = math::round(1e5 * math::exp(0.3 * normal(&mut rng)));
        closes.push(close);
        bars.push(OhlcvBar { date: d, open, high: hi, low: lo, close, volume });
    }
    OhlcvSeries::new(id, bars)
}

fn calendar_for(cfg: &SynthConfig, id: &str, idx: u64, first: TradingDate) -> Result<EconomicCalendar> {
    use chrono::Datelike;
    let mut rng = seed::rng(seed::derive(cfg.seed, 1000 + idx));
    let quarterly = id.contains("GDP");
    let rate = id.contains("INTEREST_RATE");
    let step_months = if quarterly { 3 } else { 1 };
    let mut value = if rate {
        if id.starts_with("EA") { 0.0 } else { 1.0 }
    } else if quarterly {
        0.5
    } else {
        2.0
    };
    let mut d = ymd(first.year() - 1, 1, 15);
    let mut releases = Vec::new();
    while d <= cfg.end {
        if rate {
            if rng.random::<f64>() < 0.25 {
                value += if rng.random::<bool>() { 0.25 } else { -0.25 };
            }
        } else {
            value += 0.2 * normal(&mut rng);
        }
        releases.push(EconomicRelease { release_date: d, value });
        d = add_months(d, step_months);
    }
    EconomicCalendar::new(id, releases)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if cfg.days < 2 {
        return Err(Error::parameter("synthetic data needs at least two days"));
    }
    if !cfg.instruments.contains(&cfg.target) {
        return Err(Error::parameter(format!("target {} is not among the instruments", cfg.target)));
    }
    if let Some(p) = cfg.planted {
        if p.window == 0 || !(0.0..=1.0).contains(&p.noise) {
            return Err(Error::parameter("planted signal needs window >= 1 and noise in [0, 1]"));
        }
    }
    let days = calendar_days(cfg);
    let series = cfg
        .instruments
        .iter()
        .enumerate()
        .map(|(i, id)| series_for(cfg, id, i as u64, &days))
        .collect::<Result<Vec<_>>>()?;
    let calendars = cfg
        .indicators
        .iter()
        .enumerate()
        .map(|(i, id)| calendar_for(cfg, id, i as u64, days[0]))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthData { series, calendars })
}
