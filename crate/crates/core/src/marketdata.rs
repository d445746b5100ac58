//! Market and economic-release data: validated series, forward fill of
//! indicator releases onto trading dates, and the aligned daily panel.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calendar::{days_between, next_day, TradingDate};
use crate::error::{Error, Result};

/// Default instrument whose direction is predicted.
pub const TARGET_INSTRUMENT: &str = "EURUSD";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: TradingDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// Checks positivity, finiteness and the high/low envelope.
    pub fn check(&self) -> core::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if !prices.iter().chain([&self.volume]).all(|v| v.is_finite()) {
            return Err(format!("{}: non-finite value", self.date));
        }
        if prices.iter().any(|&p| p <= 0.0) {
            return Err(format!("{}: prices must be positive", self.date));
        }
        if self.volume < 0.0 {
            return Err(format!("{}: negative volume {}", self.date, self.volume));
        }
        if self.low > self.high {
            return Err(format!("{}: high {} < low {}", self.date, self.high, self.low));
        }
        if self.low > self.open.min(self.close) || self.high < self.open.max(self.close) {
            return Err(format!(
                "{}: open/close outside [low, high] = [{}, {}]",
                self.date, self.low, self.high
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcvSeries {
    pub instrument_id: String,
    pub bars: Vec<OhlcvBar>,
}

impl OhlcvSeries {
    /// Validates every bar, sorts by date and rejects duplicate dates.
    pub fn new(instrument_id: impl Into<String>, mut bars: Vec<OhlcvBar>) -> Result<Self> {
        let instrument_id = instrument_id.into();
        if bars.is_empty() {
            return Err(Error::validation(format!("{instrument_id}: series is empty")));
        }
        for b in &bars {
            b.check().map_err(|m| Error::validation(format!("{instrument_id}: {m}")))?;
        }
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::validation(format!(
                "{instrument_id}: duplicate date {}",
                w[0].date
            )));
        }
        Ok(Self { instrument_id, bars })
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = TradingDate> + '_ {
        self.bars.iter().map(|b| b.date)
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    fn index_of(&self, d: TradingDate) -> Option<usize> {
        self.bars.binary_search_by_key(&d, |b| b.date).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicRelease {
    pub release_date: TradingDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicCalendar {
    pub indicator_id: String,
    pub releases: Vec<EconomicRelease>,
}

impl EconomicCalendar {
    pub fn new(indicator_id: impl Into<String>, mut releases: Vec<EconomicRelease>) -> Result<Self> {
        let indicator_id = indicator_id.into();
        if releases.is_empty() {
            return Err(Error::validation(format!("{indicator_id}: calendar has no releases")));
        }
        if let Some(r) = releases.iter().find(|r| !r.value.is_finite()) {
            return Err(Error::validation(format!(
                "{indicator_id}: non-finite value on {}",
                r.release_date
            )));
        }
        releases.sort_by_key(|r| r.release_date);
        if let Some(w) = releases.windows(2).find(|w| w[0].release_date == w[1].release_date) {
            return Err(Error::validation(format!(
                "{indicator_id}: duplicate release date {}",
                w[0].release_date
            )));
        }
        Ok(Self { indicator_id, releases })
    }
}

/// Forward-filled indicator values with the calendar age of each value.
#[derive(Debug, Clone, PartialEq)]
pub struct FilledIndicator {
    pub values: Vec<f64>,
    pub days_since: Vec<u32>,
}

/// Carries the latest release on or before each date forward.
pub fn forward_fill(calendar: &EconomicCalendar, dates: &[TradingDate]) -> Result<FilledIndicator> {
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("forward_fill: dates must be strictly increasing"));
    }
    let releases = &calendar.releases;
    let mut values = Vec::with_capacity(dates.len());
    let mut days_since = Vec::with_capacity(dates.len());
    let mut next = 0usize;
    for &d in dates {
        while next < releases.len() && releases[next].release_date <= d {
            next += 1;
        }
        if next == 0 {
            return Err(Error::Coverage {
                indicator: calendar.indicator_id.clone(),
                first_date: d.to_string(),
            });
        }
        let r = &releases[next - 1];
        values.push(r.value);
        days_since.push(days_between(r.release_date, d) as u32);
    }
    Ok(FilledIndicator { values, days_since })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Open,
    High,
    Low,
    Close,
    Volume,
    IndicatorValue,
    DaysSince,
}

impl ColumnKind {
    pub const OHLCV: [ColumnKind; 5] =
        [ColumnKind::Open, ColumnKind::High, ColumnKind::Low, ColumnKind::Close, ColumnKind::Volume];

    pub fn suffix(self) -> &'static str {
        match self {
            ColumnKind::Open => "open",
            ColumnKind::High => "high",
            ColumnKind::Low => "low",
            ColumnKind::Close => "close",
            ColumnKind::Volume => "volume",
            ColumnKind::IndicatorValue => "",
            ColumnKind::DaysSince => "days_since",
        }
    }

    pub fn is_instrument(self) -> bool {
        !matches!(self, ColumnKind::IndicatorValue | ColumnKind::DaysSince)
    }
}

pub fn instrument_column(instrument: &str, kind: ColumnKind) -> String {
    format!("{instrument}_{}", kind.suffix())
}

pub fn days_since_column(indicator: &str) -> String {
    format!("{indicator}_days_since")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelColumn {
    pub name: String,
    /// Instrument or indicator id the column belongs to.
    pub category: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
}

/// Daily panel over the common trading dates of all instruments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPanel {
    pub target: String,
    pub dates: Vec<TradingDate>,
    /// Instrument columns (by name), then indicator columns (by name).
    pub columns: Vec<PanelColumn>,
    pub pre_closure: Vec<bool>,
    /// Close of the target's next own trading day after each panel date.
    pub target_next_close: Vec<Option<f64>>,
    /// Dates traded by some instrument but dropped by the intersection.
    pub excluded_dates: Vec<TradingDate>,
}

impl AlignedPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&PanelColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut PanelColumn> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    pub fn instruments(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .columns
            .iter()
            .filter(|c| c.kind.is_instrument())
            .map(|c| c.category.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn indicators(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .columns
            .iter()
            .filter(|c| !c.kind.is_instrument())
            .map(|c| c.category.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    }

    /// Values of `instrument`'s `kind` column.
    pub fn series(&self, instrument: &str, kind: ColumnKind) -> Option<&[f64]> {
        self.column(&instrument_column(instrument, kind)).map(|c| c.values.as_slice())
    }

    pub fn target_closes(&self) -> Result<&[f64]> {
        self.series(&self.target, ColumnKind::Close)
            .ok_or_else(|| Error::validation(format!("panel has no close column for {}", self.target)))
    }

    /// Checks the structural invariants (column lengths, days-since columns).
    pub fn validate(&self) -> Result<()> {
        let n = self.dates.len();
        if self.pre_closure.len() != n || self.target_next_close.len() != n {
            return Err(Error::validation("panel flag vectors do not match date count"));
        }
        for c in &self.columns {
            if c.values.len() != n {
                return Err(Error::validation(format!("column {} has wrong length", c.name)));
            }
            if c.kind == ColumnKind::IndicatorValue {
                let ds = self.column(&days_since_column(&c.name)).ok_or_else(|| {
                    Error::validation(format!("indicator {} lacks a days_since column", c.name))
                })?;
                if ds.values.iter().any(|&v| v < 0.0 || libm::trunc(v) != v) {
                    return Err(Error::validation(format!("{} has invalid day counts", ds.name)));
                }
            }
        }
        Ok(())
    }
}

/// Aligns instruments on their common trading dates and forward-fills every
/// economic calendar onto them.
///
/// `pre_closure[t]` is set when the calendar day after `dates[t]` is not a
/// trading day of the target instrument.
pub fn build_panel(
    series: &[OhlcvSeries],
    calendars: &[EconomicCalendar],
    target: &str,
) -> Result<AlignedPanel> {
    let target_series = series
        .iter()
        .find(|s| s.instrument_id == target)
        .ok_or_else(|| Error::validation(format!("target instrument {target} is missing")))?;
    let mut seen = BTreeSet::new();
    for s in series {
        if s.is_empty() {
            return Err(Error::validation(format!("{}: series is empty", s.instrument_id)));
        }
        if !seen.insert(s.instrument_id.as_str()) {
            return Err(Error::validation(format!("instrument {} given twice", s.instrument_id)));
        }
    }
    let mut ids = BTreeSet::new();
    for c in calendars {
        if !ids.insert(c.indicator_id.as_str()) {
            return Err(Error::validation(format!("indicator {} given twice", c.indicator_id)));
        }
    }

    let dates: Vec<TradingDate> = target_series
        .dates()
        .filter(|&d| series.iter().all(|s| s.index_of(d).is_some()))
        .collect();
    if dates.is_empty() {
        let target_dates: BTreeSet<TradingDate> = target_series.dates().collect();
        let mut offending: Vec<String> = series
            .iter()
            .filter(|s| s.dates().all(|d| !target_dates.contains(&d)))
            .map(|s| s.instrument_id.clone())
            .collect();
        if offending.is_empty() {
            offending = series.iter().map(|s| s.instrument_id.clone()).collect();
        }
        return Err(Error::Alignment { offending });
    }

    let kept: BTreeSet<TradingDate> = dates.iter().copied().collect();
    let excluded_dates: Vec<TradingDate> = series
        .iter()
        .flat_map(|s| s.dates())
        .filter(|d| !kept.contains(d))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut instrument_cols = Vec::with_capacity(series.len() * 5);
    for s in series {
        let rows: Vec<&OhlcvBar> =
            dates.iter().map(|&d| &s.bars[s.index_of(d).expect("date in intersection")]).collect();
        for kind in ColumnKind::OHLCV {
            let values = rows
                .iter()
                .map(|b| match kind {
                    ColumnKind::Open => b.open,
                    ColumnKind::High => b.high,
                    ColumnKind::Low => b.low,
                    ColumnKind::Close => b.close,
                    _ => b.volume,
                })
                .collect();
            instrument_cols.push(PanelColumn {
                name: instrument_column(&s.instrument_id, kind),
                category: s.instrument_id.clone(),
                kind,
                values,
            });
        }
    }
    instrument_cols.sort_by(|a, b| a.name.cmp(&b.name));

    let mut indicator_cols = Vec::with_capacity(calendars.len() * 2);
    for cal in calendars {
        let filled = forward_fill(cal, &dates)?;
        indicator_cols.push(PanelColumn {
            name: cal.indicator_id.clone(),
            category: cal.indicator_id.clone(),
            kind: ColumnKind::IndicatorValue,
            values: filled.values,
        });
        indicator_cols.push(PanelColumn {
            name: days_since_column(&cal.indicator_id),
            category: cal.indicator_id.clone(),
            kind: ColumnKind::DaysSince,
            values: filled.days_since.into_iter().map(f64::from).collect(),
        });
    }
    indicator_cols.sort_by(|a, b| a.name.cmp(&b.name));

    let pre_closure = dates.iter().map(|&d| target_series.index_of(next_day(d)).is_none()).collect();
    let target_next_close = dates
        .iter()
        .map(|&d| {
            let i = target_series.index_of(d).expect("target date");
            target_series.bars.get(i + 1).map(|b| b.close)
        })
        .collect();

    let mut columns = instrument_cols;
    columns.extend(indicator_cols);
    let panel = AlignedPanel {
        target: target.to_string(),
        dates,
        columns,
        pre_closure,
        target_next_close,
        excluded_dates,
    };
    panel.validate()?;
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::ymd;
    use alloc::vec;

    fn bar(d: TradingDate, c: f64) -> OhlcvBar {
        OhlcvBar { date: d, open: c, high: c * 1.01, low: c * 0.99, close: c, volume: 100.0 }
    }

    fn week(id: &str, days: core::ops::RangeInclusive<u32>) -> OhlcvSeries {
        // 2021-03-01 is a Monday.
        OhlcvSeries::new(id, days.map(|d| bar(ymd(2021, 3, d), 1.0 + d as f64 / 100.0)).collect())
            .unwrap()
    }

    #[test]
    fn rejects_inverted_bar() {
        let mut b = bar(ymd(2021, 1, 4), 1.06);
        b.high = 1.05;
        b.low = 1.07;
        assert!(matches!(OhlcvSeries::new("X", vec![b]), Err(Error::Validation(_))));
    }

    #[test]
    fn sorts_and_rejects_duplicates() {
        let s = OhlcvSeries::new(
            "X",
            vec![bar(ymd(2021, 1, 6), 1.0), bar(ymd(2021, 1, 4), 1.0), bar(ymd(2021, 1, 5), 1.0)],
        )
        .unwrap();
        let dates: Vec<_> = s.dates().collect();
        assert_eq!(dates, vec![ymd(2021, 1, 4), ymd(2021, 1, 5), ymd(2021, 1, 6)]);
        assert!(OhlcvSeries::new("X", vec![bar(ymd(2021, 1, 4), 1.0), bar(ymd(2021, 1, 4), 1.1)])
            .is_err());
    }

    #[test]
    fn calendar_rules() {
        let r = |d, v| EconomicRelease { release_date: ymd(2021, 1, d), value: v };
        assert_eq!(EconomicCalendar::new("GDP", vec![r(1, 1.0), r(2, 2.0), r(3, 3.0), r(4, 4.0)])
            .unwrap()
            .releases
            .len(), 4);
        assert!(EconomicCalendar::new("GDP", vec![r(1, 1.0), r(1, 2.0)]).is_err());
        assert!(EconomicCalendar::new("GDP", vec![]).is_err());
    }

    #[test]
    fn forward_fill_examples() {
        let cal = EconomicCalendar::new(
            "X",
            vec![EconomicRelease { release_date: ymd(2021, 1, 5), value: 2.1 }],
        )
        .unwrap();
        let f = forward_fill(&cal, &[ymd(2021, 1, 5), ymd(2021, 1, 6), ymd(2021, 1, 7)]).unwrap();
        assert_eq!(f.values, vec![2.1, 2.1, 2.1]);
        assert_eq!(f.days_since, vec![0, 1, 2]);

        let cal = EconomicCalendar::new(
            "X",
            vec![
                EconomicRelease { release_date: ymd(2021, 1, 1), value: 1.0 },
                EconomicRelease { release_date: ymd(2021, 1, 6), value: 2.0 },
            ],
        )
        .unwrap();
        let f = forward_fill(&cal, &[ymd(2021, 1, 5), ymd(2021, 1, 6)]).unwrap();
        assert_eq!(f.values, vec![1.0, 2.0]);
        assert_eq!(f.days_since, vec![4, 0]);

        let err = forward_fill(&cal, &[ymd(2020, 12, 31)]).unwrap_err();
        assert!(matches!(err, Error::Coverage { ref indicator, .. } if indicator == "X"));
    }

    #[test]
    fn intersection_and_pre_closure() {
        let a = week("EURUSD", 1..=5);
        let b = week("DAX", 2..=5);
        let p = build_panel(&[a, b], &[], "EURUSD").unwrap();
        assert_eq!(p.dates, (2..=5).map(|d| ymd(2021, 3, d)).collect::<Vec<_>>());
        assert_eq!(p.excluded_dates, vec![ymd(2021, 3, 1)]);
        // Friday 5th is followed by a Saturday.
        assert_eq!(p.pre_closure, vec![false, false, false, true]);
        assert_eq!(p.columns.len(), 10);
        assert_eq!(p.columns[0].name, "DAX_close");
        assert_eq!(p.target_next_close[0], Some(1.03));
        assert_eq!(p.target_next_close[3], None);
    }

    #[test]
    fn disjoint_series_fail_alignment() {
        let a = week("EURUSD", 1..=2);
        let b = week("DAX", 3..=5);
        match build_panel(&[a, b], &[], "EURUSD") {
            Err(Error::Alignment { offending }) => assert_eq!(offending, vec!["DAX".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
