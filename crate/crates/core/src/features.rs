//! Distribution transforms, date encodings, direction labels and the three
//! dataset representations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calendar::{days_in_month, weekday_index, DateRange, TradingDate};
use crate::error::{Error, Result};
use crate::indicators::{self, PriceView};
use crate::marketdata::{AlignedPanel, ColumnKind};
use crate::math;
use crate::matrix::Matrix;

pub const LAG_DEPTH: usize = 90;
pub const EA_CPI_YOY: &str = "EA_CPI_YOY";
pub const INTEREST_RATE_SUFFIX: &str = "_INTEREST_RATE";
pub const DATE_TREE: &str = "DATE_TREE";
pub const DATE_CYCLIC: &str = "DATE_CYCLIC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Representation {
    D1,
    D2,
    D3,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Representation::D1, Representation::D2, Representation::D3];

    pub fn tag(self) -> &'static str {
        match self {
            Representation::D1 => "D1",
            Representation::D2 => "D2",
            Representation::D3 => "D3",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.tag() == s)
            .ok_or_else(|| Error::parameter(format!("unknown representation {s}")))
    }
}

/// Which date encoding a model family consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DateFamily {
    /// Integer day, month and weekday.
    Tree,
    /// Sine/cosine pairs.
    Continuous,
}

impl DateFamily {
    pub fn category(self) -> &'static str {
        match self {
            DateFamily::Tree => DATE_TREE,
            DateFamily::Continuous => DATE_CYCLIC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Transform {
    None,
    SqrtSigned,
    /// `x -> ln(x - min + 1)` with `min` fitted on the fitting range.
    LogShifted { min: f64 },
}

impl Transform {
    pub fn apply(self, column: &str, x: f64) -> Result<f64> {
        match self {
            Transform::None => Ok(x),
            Transform::SqrtSigned => Ok(sqrt_signed(x)),
            Transform::LogShifted { min } => {
                let arg = x - min + 1.0;
                if !(arg > 0.0) {
                    return Err(Error::TransformDomain { column: column.to_string(), argument: arg });
                }
                Ok(math::ln(arg))
            }
        }
    }
}

pub fn sqrt_signed(x: f64) -> f64 {
    if x < 0.0 {
        -math::sqrt(-x)
    } else {
        math::sqrt(x)
    }
}

pub fn sqrt_signed_inverse(y: f64) -> f64 {
    if y < 0.0 {
        -(y * y)
    } else {
        y * y
    }
}

/// Per-column transforms. Columns not listed are left unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformLedger {
    pub columns: BTreeMap<String, Transform>,
}

fn default_transform(kind: ColumnKind, category: &str) -> Option<Transform> {
    match kind {
        ColumnKind::Volume => Some(Transform::SqrtSigned),
        ColumnKind::IndicatorValue if category.ends_with(INTEREST_RATE_SUFFIX) => {
            Some(Transform::SqrtSigned)
        }
        ColumnKind::IndicatorValue if category == EA_CPI_YOY => Some(Transform::LogShifted { min: 0.0 }),
        _ => None,
    }
}

/// Applies `ledger` to the panel, or fits a new ledger when none is given.
///
/// Fitting takes the log-shift minimum over the dates in `fit_range`
/// (all dates when `None`).
pub fn apply_transforms(
    panel: &AlignedPanel,
    ledger: Option<&TransformLedger>,
    fit_range: Option<DateRange>,
) -> Result<(AlignedPanel, TransformLedger)> {
    let ledger = match ledger {
        Some(l) => l.clone(),
        None => fit_ledger(panel, fit_range)?,
    };
    let mut out = panel.clone();
    for (name, t) in &ledger.columns {
        let col = out
            .column_mut(name)
            .ok_or_else(|| Error::validation(format!("transform targets missing column {name}")))?;
        for v in col.values.iter_mut() {
            *v = t.apply(name, *v)?;
        }
    }
    Ok((out, ledger))
}

fn fit_ledger(panel: &AlignedPanel, fit_range: Option<DateRange>) -> Result<TransformLedger> {
    let mut ledger = TransformLedger::default();
    for col in &panel.columns {
        let Some(mut t) = default_transform(col.kind, &col.category) else { continue };
        if let Transform::LogShifted { min } = &mut t {
            *min = panel
                .dates
                .iter()
                .zip(&col.values)
                .filter(|(d, _)| fit_range.is_none_or(|r| r.contains(**d)))
                .map(|(_, &v)| v)
                .fold(f64::INFINITY, f64::min);
            if !min.is_finite() {
                return Err(Error::DateCoverage(format!("no {} values in the fitting range", col.name)));
            }
        }
        ledger.columns.insert(col.name.clone(), t);
    }
    Ok(ledger)
}

/// Named date-feature columns for `dates`.
pub fn encode_dates(dates: &[TradingDate], family: DateFamily) -> Vec<(String, Vec<f64>)> {
    use chrono::Datelike;
    let col = |f: &dyn Fn(TradingDate) -> f64| dates.iter().map(|&d| f(d)).collect::<Vec<f64>>();
    match family {
        DateFamily::Tree => vec![
            ("date_day".into(), col(&|d| d.day() as f64)),
            ("date_month".into(), col(&|d| d.month() as f64)),
            ("date_weekday".into(), col(&|d| weekday_index(d) as f64)),
        ],
        DateFamily::Continuous => {
            let day = |d: TradingDate| 2.0 * PI * (d.day() - 1) as f64 / days_in_month(d.year(), d.month()) as f64;
            let month = |d: TradingDate| 2.0 * PI * (d.month() - 1) as f64 / 12.0;
            let wd = |d: TradingDate| 2.0 * PI * weekday_index(d) as f64 / 7.0;
            vec![
                ("date_day_sin".into(), col(&|d| math::sin(day(d)))),
                ("date_day_cos".into(), col(&|d| math::cos(day(d)))),
                ("date_month_sin".into(), col(&|d| math::sin(month(d)))),
                ("date_month_cos".into(), col(&|d| math::cos(month(d)))),
                ("date_weekday_sin".into(), col(&|d| math::sin(wd(d)))),
                ("date_weekday_cos".into(), col(&|d| math::cos(wd(d)))),
            ]
        }
    }
}

/// `label[t] = 1` iff `close[t+1] > close[t]`; one label fewer than closes.
pub fn build_target(close: &[f64]) -> Result<Vec<u8>> {
    if close.len() < 2 {
        return Err(Error::insufficient("direction labels need at least two closes"));
    }
    Ok(close.windows(2).map(|w| u8::from(w[1] > w[0])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub lag_depth: usize,
    /// Also lag economic-indicator columns in D2.
    pub lag_indicators: bool,
    /// Instruments whose indicator catalog goes into D3; `None` means all.
    pub indicator_sources: Option<Vec<String>>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { lag_depth: LAG_DEPTH, lag_indicators: false, indicator_sources: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    PreClosure,
    NoLabel,
    Undefined,
}

/// Supervised rows of one representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub representation: Representation,
    pub dates: Vec<TradingDate>,
    pub names: Vec<String>,
    /// Category of each feature, parallel to `names`.
    pub categories: Vec<String>,
    pub x: Matrix,
    pub labels: Vec<u8>,
    /// Target close on each row's date and on the next trading day.
    pub close: Vec<f64>,
    pub next_close: Vec<f64>,
    pub dropped: Vec<(TradingDate, DropReason)>,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.dates.len()
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn category_of(&self, name: &str) -> Option<&str> {
        self.names.iter().position(|n| n == name).map(|i| self.categories[i].as_str())
    }

    /// Column indices a model with date encoding `family` sees: everything
    /// except the other family's date block.
    pub fn view_columns(&self, family: DateFamily) -> Vec<usize> {
        let other = match family {
            DateFamily::Tree => DATE_CYCLIC,
            DateFamily::Continuous => DATE_TREE,
        };
        (0..self.ncols()).filter(|&j| self.categories[j] != other).collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let all: Vec<usize> = (0..self.nrows()).collect();
        FeatureMatrix {
            representation: self.representation,
            dates: self.dates.clone(),
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            categories: cols.iter().map(|&j| self.categories[j].clone()).collect(),
            x: self.x.select(&all, cols),
            labels: self.labels.clone(),
            close: self.close.clone(),
            next_close: self.next_close.clone(),
            dropped: self.dropped.clone(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            representation: self.representation,
            dates: rows.iter().map(|&i| self.dates[i]).collect(),
            names: self.names.clone(),
            categories: self.categories.clone(),
            x: self.x.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            close: rows.iter().map(|&i| self.close[i]).collect(),
            next_close: rows.iter().map(|&i| self.next_close[i]).collect(),
            dropped: Vec::new(),
        }
    }

    /// Row indices whose dates fall in `range`.
    pub fn rows_in(&self, range: DateRange) -> Vec<usize> {
        (0..self.nrows()).filter(|&i| range.contains(self.dates[i])).collect()
    }

    /// Keeps only rows dated in `dates` (which must be sorted).
    pub fn restrict_to_dates(&self, dates: &[TradingDate]) -> FeatureMatrix {
        let rows: Vec<usize> =
            (0..self.nrows()).filter(|&i| dates.binary_search(&self.dates[i]).is_ok()).collect();
        self.select_rows(&rows)
    }
}

/// Restricts every matrix to the dates they all share.
pub fn align_on_common_dates(sets: &[&FeatureMatrix]) -> Vec<FeatureMatrix> {
    let Some(first) = sets.first() else { return Vec::new() };
    let common: Vec<TradingDate> = first
        .dates
        .iter()
        .copied()
        .filter(|d| sets[1..].iter().all(|s| s.dates.binary_search(d).is_ok()))
        .collect();
    sets.iter().map(|s| s.restrict_to_dates(&common)).collect()
}

struct Block {
    names: Vec<String>,
    categories: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Block {
    fn new() -> Self {
        Self { names: Vec::new(), categories: Vec::new(), columns: Vec::new() }
    }

    fn push(&mut self, name: String, category: &str, values: Vec<f64>) {
        self.names.push(name);
        self.categories.push(category.to_string());
        self.columns.push(values);
    }
}

/// Assembles D1, D2 or D3 from a (transformed) panel.
///
/// Rows flagged pre-closure, without a next-day label, or with any undefined
/// feature are dropped and logged in `dropped`.
pub fn build_dataset(
    panel: &AlignedPanel,
    repr: Representation,
    config: &DatasetConfig,
) -> Result<FeatureMatrix> {
    panel.validate()?;
    let n = panel.len();
    let closes = panel.target_closes()?.to_vec();
    let mut block = Block::new();

    for col in &panel.columns {
        block.push(col.name.clone(), &col.category, col.values.clone());
    }
    for family in [DateFamily::Tree, DateFamily::Continuous] {
        for (name, values) in encode_dates(&panel.dates, family) {
            block.push(name, family.category(), values);
        }
    }

    match repr {
        Representation::D1 => {}
        Representation::D2 => {
            if n <= config.lag_depth {
                return Err(Error::InsufficientData(format!(
                    "{}-day lags need more than {} panel days, have {n}",
                    config.lag_depth, config.lag_depth
                )));
            }
            let lagged: Vec<&crate::marketdata::PanelColumn> = panel
                .columns
                .iter()
                .filter(|c| c.kind.is_instrument() || config.lag_indicators)
                .collect();
            for k in 1..=config.lag_depth {
                for col in &lagged {
                    let values =
                        (0..n).map(|t| if t >= k { col.values[t - k] } else { f64::NAN }).collect();
                    block.push(format!("{}_lag{k}", col.name), &col.category, values);
                }
            }
        }
        Representation::D3 => {
            let sources = match &config.indicator_sources {
                Some(s) => s.clone(),
                None => panel.instruments(),
            };
            for (source, specs) in indicators::expand_catalog(&sources) {
                let get = |kind| {
                    panel.series(&source, kind).ok_or_else(|| {
                        Error::validation(format!("indicator source {source} is not in the panel"))
                    })
                };
                let view = PriceView {
                    high: get(ColumnKind::High)?,
                    low: get(ColumnKind::Low)?,
                    close: get(ColumnKind::Close)?,
                    volume: get(ColumnKind::Volume)?,
                };
                for spec in specs {
                    let values = indicators::compute_view(&spec, &view)?;
                    block.push(spec.column_name(&source), &source, values);
                }
            }
        }
    }

    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for t in 0..n {
        let reason = if panel.pre_closure[t] {
            Some(DropReason::PreClosure)
        } else if panel.target_next_close[t].is_none() {
            Some(DropReason::NoLabel)
        } else if block.columns.iter().any(|c| !c[t].is_finite()) {
            Some(DropReason::Undefined)
        } else {
            None
        };
        match reason {
            Some(r) => dropped.push((panel.dates[t], r)),
            None => keep.push(t),
        }
    }

    let ncols = block.columns.len();
    let mut data = Vec::with_capacity(keep.len() * ncols);
    for &t in &keep {
        data.extend(block.columns.iter().map(|c| c[t]));
    }
    let next_close: Vec<f64> = keep.iter().map(|&t| panel.target_next_close[t].expect("kept rows have labels")).collect();
    let close: Vec<f64> = keep.iter().map(|&t| closes[t]).collect();
    let labels = close.iter().zip(&next_close).map(|(c, nc)| u8::from(nc > c)).collect();
    Ok(FeatureMatrix {
        representation: repr,
        dates: keep.iter().map(|&t| panel.dates[t]).collect(),
        names: block.names,
        categories: block.categories,
        x: Matrix::from_vec(keep.len(), ncols, data)?,
        labels,
        close,
        next_close,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::ymd;
    use crate::marketdata::{build_panel, EconomicCalendar, EconomicRelease, OhlcvBar, OhlcvSeries};

    fn weekdays(from: TradingDate, count: usize) -> Vec<TradingDate> {
        let mut out = Vec::new();
        let mut d = from;
        while out.len() < count {
            if weekday_index(d) < 5 {
                out.push(d);
            }
            d = crate::calendar::next_day(d);
        }
        out
    }

    fn series(id: &str, dates: &[TradingDate], base: f64) -> OhlcvSeries {
        let bars = dates
            .iter()
            .enumerate()
            .map(|(i, &date)| {
                let c = base * (1.0 + 0.01 * libm::sin(i as f64 * 0.7));
                OhlcvBar { date, open: c, high: c * 1.01, low: c * 0.99, close: c, volume: 100.0 }
            })
            .collect();
        OhlcvSeries::new(id, bars).unwrap()
    }

    fn calendar(id: &str, start: TradingDate, values: &[f64]) -> EconomicCalendar {
        let releases = values
            .iter()
            .enumerate()
            .map(|(i, &value)| EconomicRelease { release_date: crate::calendar::add_months(start, i as u32), value })
            .collect();
        EconomicCalendar::new(id, releases).unwrap()
    }

    fn panel(days: usize) -> AlignedPanel {
        let dates = weekdays(ymd(2020, 1, 6), days);
        build_panel(
            &[series("EURUSD", &dates, 1.1), series("DAX", &dates, 13000.0)],
            &[
                calendar("EA_INTEREST_RATE", ymd(2020, 1, 1), &[-0.25; 12]),
                calendar(EA_CPI_YOY, ymd(2020, 1, 1), &[-0.6, 0.3, 1.2, 2.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]),
            ],
            "EURUSD",
        )
        .unwrap()
    }

    #[test]
    fn transform_examples() {
        assert_eq!(sqrt_signed(100.0), 10.0);
        assert_eq!(sqrt_signed(-0.25), -0.5);
        assert!((sqrt_signed_inverse(sqrt_signed(-0.3)) + 0.3).abs() < 1e-12);
        assert_eq!(Transform::LogShifted { min: -0.6 }.apply("x", -0.6).unwrap(), 0.0);
        assert!(matches!(
            Transform::LogShifted { min: 0.0 }.apply("x", -1.5),
            Err(Error::TransformDomain { .. })
        ));
    }

    #[test]
    fn ledger_targets_volume_rates_and_cpi() {
        let p = panel(60);
        let (t, ledger) = apply_transforms(&p, None, None).unwrap();
        assert_eq!(ledger.columns.get("DAX_volume"), Some(&Transform::SqrtSigned));
        assert_eq!(ledger.columns.get("EA_INTEREST_RATE"), Some(&Transform::SqrtSigned));
        assert_eq!(ledger.columns.get(EA_CPI_YOY), Some(&Transform::LogShifted { min: -0.6 }));
        assert!(!ledger.columns.contains_key("EURUSD_close"));
        assert_eq!(t.column("DAX_volume").unwrap().values[0], 10.0);
        assert_eq!(t.column("EA_INTEREST_RATE").unwrap().values[0], -0.5);
        assert_eq!(t.column(EA_CPI_YOY).unwrap().values[0], 0.0);
        assert_eq!(t.column("EURUSD_close"), p.column("EURUSD_close"));
        // A persisted ledger whose offset no longer covers the data fails.
        let mut strict = ledger.clone();
        strict.columns.insert(EA_CPI_YOY.into(), Transform::LogShifted { min: 0.5 });
        assert!(matches!(apply_transforms(&p, Some(&strict), None), Err(Error::TransformDomain { .. })));
    }

    #[test]
    fn date_encoding_examples() {
        let tree = encode_dates(&[ymd(2022, 3, 15)], DateFamily::Tree);
        let vals: Vec<f64> = tree.iter().map(|(_, v)| v[0]).collect();
        assert_eq!(vals, vec![15.0, 3.0, 1.0]);
        let cont = encode_dates(&[ymd(2022, 1, 1), ymd(2022, 2, 17)], DateFamily::Continuous);
        assert_eq!(cont.len(), 6);
        assert_eq!(cont[0].1[0], 0.0);
        assert_eq!(cont[1].1[0], 1.0);
        for pair in cont.chunks(2) {
            for i in 0..2 {
                let (s, c) = (pair[0].1[i], pair[1].1[i]);
                assert!((s * s + c * c - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn target_examples() {
        assert_eq!(build_target(&[1.00, 1.01]).unwrap(), vec![1]);
        assert_eq!(build_target(&[1.01, 1.01]).unwrap(), vec![0]);
        assert_eq!(build_target(&[1.01, 1.00]).unwrap(), vec![0]);
        assert!(matches!(build_target(&[1.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn d1_drops_fridays() {
        let p = panel(30);
        let d1 = build_dataset(&p, Representation::D1, &DatasetConfig::default()).unwrap();
        assert!(d1.dates.iter().all(|&d| weekday_index(d) != 4));
        assert!(d1.x.all_finite());
        assert_eq!(d1.labels.len(), d1.nrows());
        assert!(d1.dropped.iter().any(|(_, r)| *r == DropReason::PreClosure));
        let names: alloc::collections::BTreeSet<&String> = d1.names.iter().collect();
        assert_eq!(names.len(), d1.ncols());
        // 2 instruments x 5 + 2 indicators x 2 + 3 + 6 date features.
        assert_eq!(d1.ncols(), 10 + 4 + 9);
    }

    #[test]
    fn dataset_column_counts() {
        let p = panel(200);
        let cfg = DatasetConfig::default();
        let d1 = build_dataset(&p, Representation::D1, &cfg).unwrap();
        let d2 = build_dataset(&p, Representation::D2, &cfg).unwrap();
        let d3 = build_dataset(&p, Representation::D3, &cfg).unwrap();
        assert_eq!(d2.ncols() - d1.ncols(), 90 * 10);
        assert_eq!(d3.ncols() - d1.ncols(), 2 * 92);
        for name in &d1.names {
            assert!(d2.names.contains(name) && d3.names.contains(name));
        }
        assert_eq!(d2.category_of("DAX_close_lag90"), Some("DAX"));
        assert_eq!(d3.category_of("EURUSD_RSI_14"), Some("EURUSD"));
        assert!(d2.dates[0] > p.dates[89]);
        assert!(matches!(
            build_dataset(&panel(90), Representation::D2, &cfg),
            Err(Error::InsufficientData(_))
        ));
        let tree = d1.view_columns(DateFamily::Tree);
        assert!(tree.iter().all(|&j| d1.categories[j] != DATE_CYCLIC));
        assert_eq!(tree.len(), d1.ncols() - 6);
    }

    #[test]
    fn alignment_keeps_shared_dates() {
        let p = panel(200);
        let cfg = DatasetConfig::default();
        let d1 = build_dataset(&p, Representation::D1, &cfg).unwrap();
        let d3 = build_dataset(&p, Representation::D3, &cfg).unwrap();
        let aligned = align_on_common_dates(&[&d1, &d3]);
        assert_eq!(aligned[0].dates, aligned[1].dates);
        assert_eq!(aligned[0].dates, d3.dates);
    }
}
