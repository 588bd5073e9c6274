//! Calendar-month arithmetic.
//!
//! Rebalance bookkeeping is keyed by month, not by date: decisions happen on
//! the last business day of a month and executions on the first business day
//! of the next. `Month` keeps that arithmetic exact and serializes as
//! `"YYYY-MM"`.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A calendar month, e.g. 2023-09.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    year: i32,
    /// 1-12.
    month: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid month string {0:?} (expected YYYY-MM)")]
pub struct ParseMonthError(pub String);

impl Month {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        Self { year, month }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    /// The month containing `date`.
    pub fn from_date(date: NaiveDate) -> Self {
        Self::new(date.year(), date.month())
    }

    /// First calendar day of the month.
    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    /// Last calendar day of the month.
    pub fn last_day(&self) -> NaiveDate {
        self.next().first_day().pred_opt().expect("valid date")
    }

    pub fn next(&self) -> Self {
        self.add_months(1)
    }

    pub fn prev(&self) -> Self {
        self.add_months(-1)
    }

    pub fn add_months(&self, delta: i32) -> Self {
        let zero_based = self.year as i64 * 12 + (self.month as i64 - 1) + delta as i64;
        let year = zero_based.div_euclid(12);
        let month = zero_based.rem_euclid(12) + 1;
        Self::new(year as i32, month as u32)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(&self, other: Month) -> i32 {
        (self.year - other.year) * 12 + self.month as i32 - other.month as i32
    }

    /// Inclusive range of months from `self` through `end`.
    pub fn through(&self, end: Month) -> Vec<Month> {
        let mut out = Vec::new();
        let mut cur = *self;
        while cur <= end {
            out.push(cur);
            cur = cur.next();
        }
        out
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = ParseMonthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s.split_once('-').ok_or_else(|| ParseMonthError(s.into()))?;
        let year: i32 = y.parse().map_err(|_| ParseMonthError(s.into()))?;
        let month: u32 = m.parse().map_err(|_| ParseMonthError(s.into()))?;
        if !(1..=12).contains(&month) {
            return Err(ParseMonthError(s.into()));
        }
        Ok(Self { year, month })
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
