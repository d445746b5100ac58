//! Calendar-day helpers on top of `chrono::NaiveDate`.

use chrono::{Datelike, Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trading day at day resolution.
pub type TradingDate = NaiveDate;

pub fn parse_date(s: &str) -> Option<TradingDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

pub fn ymd(year: i32, month: u32, day: u32) -> TradingDate {
    NaiveDate::from_ymd_opt(year, month, day).expect("valid calendar date")
}

pub fn next_day(d: TradingDate) -> TradingDate {
    d.checked_add_days(Days::new(1)).expect("date in range")
}

pub fn prev_day(d: TradingDate) -> TradingDate {
    d.checked_sub_days(Days::new(1)).expect("date in range")
}

pub fn add_months(d: TradingDate, months: u32) -> TradingDate {
    d.checked_add_months(Months::new(months)).expect("date in range")
}

pub fn days_between(earlier: TradingDate, later: TradingDate) -> i64 {
    (later - earlier).num_days()
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let first = ymd(year, month, 1);
    let next = add_months(first, 1);
    days_between(first, next) as u32
}

/// Monday = 0 … Sunday = 6.
pub fn weekday_index(d: TradingDate) -> u32 {
    d.weekday().num_days_from_monday()
}

/// Inclusive calendar range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: TradingDate,
    pub end: TradingDate,
}

impl DateRange {
    pub fn new(start: TradingDate, end: TradingDate) -> Result<Self> {
        if end < start {
            return Err(Error::validation(alloc::format!(
                "date range ends ({end}) before it starts ({start})"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: TradingDate) -> bool {
        self.start <= d && d <= self.end
    }

    /// The calendar month starting at `first` (which must be day 1).
    pub fn month_of(year: i32, month: u32) -> Self {
        let start = ymd(year, month, 1);
        Self { start, end: prev_day(add_months(start, 1)) }
    }

    pub fn year(year: i32) -> Self {
        Self { start: ymd(year, 1, 1), end: ymd(year, 12, 31) }
    }
}

impl core::fmt::Display for DateRange {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}
