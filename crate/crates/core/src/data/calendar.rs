//! Trading calendar and the monthly rebalance schedule.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::Month;

use super::DataError;

/// Ordered set of business days, inferred from the union of dates in the
/// price fixtures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradingCalendar {
    business_days: Vec<NaiveDate>,
}

impl TradingCalendar {
    /// Build from an iterator of dates; duplicates collapse, order is sorted.
    pub fn from_dates<I: IntoIterator<Item = NaiveDate>>(dates: I) -> Self {
        let mut business_days: Vec<NaiveDate> = dates.into_iter().collect();
        business_days.sort_unstable();
        business_days.dedup();
        Self { business_days }
    }

    pub fn business_days(&self) -> &[NaiveDate] {
        &self.business_days
    }

    pub fn is_empty(&self) -> bool {
        self.business_days.is_empty()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.business_days.binary_search(&date).is_ok()
    }

    /// Last business day on or before `date`.
    pub fn last_on_or_before(&self, date: NaiveDate) -> Option<NaiveDate> {
        match self.business_days.binary_search(&date) {
            Ok(i) => Some(self.business_days[i]),
            Err(0) => None,
            Err(i) => Some(self.business_days[i - 1]),
        }
    }

    /// Last business day of `month`, if the calendar has one.
    pub fn last_business_day(&self, month: Month) -> Option<NaiveDate> {
        self.last_on_or_before(month.last_day())
            .filter(|d| Month::from_date(*d) == month)
    }

    /// First business day of `month`, if the calendar has one.
    pub fn first_business_day(&self, month: Month) -> Option<NaiveDate> {
        let i = match self.business_days.binary_search(&month.first_day()) {
            Ok(i) => i,
            Err(i) => i,
        };
        self.business_days
            .get(i)
            .copied()
            .filter(|d| Month::from_date(*d) == month)
    }

    /// Truncate to business days on or before `cutoff`.
    pub fn truncated(&self, cutoff: NaiveDate) -> Self {
        let end = match self.business_days.binary_search(&cutoff) {
            Ok(i) => i + 1,
            Err(i) => i,
        };
        Self {
            business_days: self.business_days[..end].to_vec(),
        }
    }
}

/// One rebalance event: information cutoff at `decision_date` (last business
/// day of the decision month), trade at the open of `execution_date` (first
/// business day of the following month).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebalancePair {
    pub decision_date: NaiveDate,
    pub execution_date: NaiveDate,
}

impl RebalancePair {
    /// The month whose close-of-month information the decision uses.
    pub fn decision_month(&self) -> Month {
        Month::from_date(self.decision_date)
    }

    /// The month over which the resulting book is held.
    pub fn holding_month(&self) -> Month {
        Month::from_date(self.execution_date)
    }
}

/// Decision/execution pairs for every month in `[start_month, end_month]`.
///
/// Errors if the calendar has no business day in a requested decision month
/// or in the execution month that follows it.
pub fn rebalance_schedule(
    calendar: &TradingCalendar,
    start_month: Month,
    end_month: Month,
) -> Result<Vec<RebalancePair>, DataError> {
    if start_month > end_month {
        return Err(DataError::InvalidWindow {
            start: start_month,
            end: end_month,
        });
    }
    let mut pairs = Vec::new();
    for month in start_month.through(end_month) {
        let decision_date = calendar
            .last_business_day(month)
            .ok_or(DataError::CalendarGap { month })?;
        let next = month.next();
        let execution_date = calendar
            .first_business_day(next)
            .ok_or(DataError::CalendarGap { month: next })?;
        pairs.push(RebalancePair {
            decision_date,
            execution_date,
        });
    }
    Ok(pairs)
}
