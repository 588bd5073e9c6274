//! Technical indicators for the fine-grained feature set, plus the raw
//! price window used by coarse-grained prompts.
//!
//! Every operation is a pure function of a [`PriceSeries`] and an as-of
//! date that must be a bar date. Short history never errors; it yields the
//! missing marker (`None`) for the affected field.

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PriceSeries;

/// Day-based RoC horizons.
pub const ROC_DAY_HORIZONS: [usize; 4] = [5, 10, 20, 30];
/// Month-based RoC horizons.
pub const ROC_MONTH_HORIZONS: [u32; 4] = [1, 3, 6, 12];
/// Coarse prompts carry one trading year of closes.
pub const COARSE_WINDOW_DAYS: usize = 252;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndicatorError {
    #[error("ema requires a non-empty input")]
    EmptyInput,
    #[error("ema span must be >= 1")]
    InvalidSpan,
}

/// The fine-grained technical feature set; all values are pinned to the
/// as-of close so they are invariant under price rescaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnicalFeatureSet {
    /// Percent change over 5/10/20/30 business days, in horizon order.
    pub roc_days: [Option<f64>; 4],
    /// Percent change over 1/3/6/12 calendar months, in horizon order.
    pub roc_months: [Option<f64>; 4],
    pub bollinger_z: Option<f64>,
    pub macd_norm: Option<f64>,
    pub signal_norm: Option<f64>,
    pub hist_norm: Option<f64>,
    pub rsi: Option<f64>,
    pub pct_k: Option<f64>,
    pub pct_d: Option<f64>,
    pub j: Option<f64>,
}

/// Most-recent-first close window for coarse prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPriceWindow {
    pub closes: Vec<f64>,
    /// Set when fewer than [`COARSE_WINDOW_DAYS`] closes were available.
    pub short_history: bool,
}

fn closes_through(series: &PriceSeries, asof: NaiveDate) -> Option<Vec<f64>> {
    series
        .closes_through(asof)
        .map(|bars| bars.iter().map(|b| b.close).collect())
}

/// Rate-of-change lookback: a count of business days or of calendar months.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookback {
    Days(usize),
    Months(u32),
}

/// Percent change `100 * (P_asof / P_ref - 1)`.
///
/// The day variant indexes `n` business days back within the series; the
/// month variant anchors at the same calendar day `m` months earlier and
/// rolls back to the nearest prior bar when that day is not a trading day.
pub fn roc(series: &PriceSeries, asof: NaiveDate, lookback: Lookback) -> Option<f64> {
    let idx = series.index_of(asof)?;
    let p_asof = series.bars[idx].close;
    let p_ref = match lookback {
        Lookback::Days(n) => {
            if idx < n {
                return None;
            }
            series.bars[idx - n].close
        }
        Lookback::Months(m) => {
            let anchor = asof.checked_sub_months(Months::new(m))?;
            let ref_idx = series.index_on_or_before(anchor)?;
            series.bars[ref_idx].close
        }
    };
    Some(100.0 * (p_asof / p_ref - 1.0))
}

/// Recursive EMA with `alpha = 2 / (span + 1)`, seeded with the first value.
pub fn ema(values: &[f64], span: usize) -> Result<Vec<f64>, IndicatorError> {
    if values.is_empty() {
        return Err(IndicatorError::EmptyInput);
    }
    if span < 1 {
        return Err(IndicatorError::InvalidSpan);
    }
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut prev = values[0];
    out.push(prev);
    for &v in &values[1..] {
        // Incremental form: exact on constant input for any alpha.
        prev += alpha * (v - prev);
        out.push(prev);
    }
    Ok(out)
}

/// MACD line, signal line, and histogram, each normalized by the as-of
/// close. Requires at least 26 closes ending at `asof`.
pub fn macd(series: &PriceSeries, asof: NaiveDate) -> Option<(f64, f64, f64)> {
    let closes = closes_through(series, asof)?;
    if closes.len() < 26 {
        return None;
    }
    let ema12 = ema(&closes, 12).expect("non-empty");
    let ema26 = ema(&closes, 26).expect("non-empty");
    let macd_line: Vec<f64> = ema12.iter().zip(&ema26).map(|(a, b)| a - b).collect();
    let signal = ema(&macd_line, 9).expect("non-empty");
    let p = *closes.last().expect("non-empty");
    let m = macd_line.last().expect("non-empty") / p;
    let s = signal.last().expect("non-empty") / p;
    // Defined as the difference of the normalized lines so the histogram
    // identity holds exactly in floating point.
    let h = m - s;
    Some((m, s, h))
}

/// Z-score of the as-of close against its trailing 20-day mean and
/// population standard deviation. Missing below 20 closes or on a flat
/// window.
pub fn bollinger_z(series: &PriceSeries, asof: NaiveDate) -> Option<f64> {
    let closes = closes_through(series, asof)?;
    if closes.len() < 20 {
        return None;
    }
    let window = &closes[closes.len() - 20..];
    let mean = window.iter().sum::<f64>() / 20.0;
    let var = window.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / 20.0;
    let std = var.sqrt();
    if std == 0.0 {
        return None;
    }
    Some((window[19] - mean) / std)
}

/// 14-day RSI with Wilder smoothing (alpha = 1/14) seeded by the simple
/// 14-period averages. Requires at least 15 closes.
pub fn rsi(series: &PriceSeries, asof: NaiveDate) -> Option<f64> {
    let closes = closes_through(series, asof)?;
    if closes.len() < 15 {
        return None;
    }
    let diffs: Vec<f64> = closes.windows(2).map(|w| w[1] - w[0]).collect();
    let mut avg_gain = diffs[..14].iter().map(|d| d.max(0.0)).sum::<f64>() / 14.0;
    let mut avg_loss = diffs[..14].iter().map(|d| (-d).max(0.0)).sum::<f64>() / 14.0;
    for &d in &diffs[14..] {
        avg_gain = (avg_gain * 13.0 + d.max(0.0)) / 14.0;
        avg_loss = (avg_loss * 13.0 + (-d).max(0.0)) / 14.0;
    }
    if avg_loss == 0.0 {
        return Some(100.0);
    }
    if avg_gain == 0.0 {
        return Some(0.0);
    }
    let rs = avg_gain / avg_loss;
    Some(100.0 - 100.0 / (1.0 + rs))
}

/// Stochastic oscillator: %K over the trailing 9 closes, %D as its 3-day
/// simple moving average, and J = 3D - 2K. Requires at least 11 closes.
/// A flat 9-day range pins %K at the neutral 50.
pub fn stochastic_kdj(series: &PriceSeries, asof: NaiveDate) -> Option<(f64, f64, f64)> {
    let closes = closes_through(series, asof)?;
    if closes.len() < 11 {
        return None;
    }
    let pct_k_at = |end: usize| -> f64 {
        let window = &closes[end - 9..end];
        let high = window.iter().cloned().fold(f64::MIN, f64::max);
        let low = window.iter().cloned().fold(f64::MAX, f64::min);
        if high == low {
            50.0
        } else {
            100.0 * (window[8] - low) / (high - low)
        }
    };
    let n = closes.len();
    let k2 = pct_k_at(n - 2);
    let k1 = pct_k_at(n - 1);
    let k0 = pct_k_at(n);
    let d = (k0 + k1 + k2) / 3.0;
    let j = 3.0 * d - 2.0 * k0;
    Some((k0, d, j))
}

/// The full fine-grained feature set, with per-field missing markers on
/// short history.
pub fn fine_features(series: &PriceSeries, asof: NaiveDate) -> TechnicalFeatureSet {
    let mut roc_days = [None; 4];
    for (slot, n) in roc_days.iter_mut().zip(ROC_DAY_HORIZONS) {
        *slot = roc(series, asof, Lookback::Days(n));
    }
    let mut roc_months = [None; 4];
    for (slot, m) in roc_months.iter_mut().zip(ROC_MONTH_HORIZONS) {
        *slot = roc(series, asof, Lookback::Months(m));
    }
    let macd_triple = macd(series, asof);
    let kdj = stochastic_kdj(series, asof);
    TechnicalFeatureSet {
        roc_days,
        roc_months,
        bollinger_z: bollinger_z(series, asof),
        macd_norm: macd_triple.map(|t| t.0),
        signal_norm: macd_triple.map(|t| t.1),
        hist_norm: macd_triple.map(|t| t.2),
        rsi: rsi(series, asof),
        pct_k: kdj.map(|t| t.0),
        pct_d: kdj.map(|t| t.1),
        j: kdj.map(|t| t.2),
    }
}

/// Last `COARSE_WINDOW_DAYS` closes ending at `asof`, most recent first.
pub fn coarse_window(series: &PriceSeries, asof: NaiveDate) -> Option<RawPriceWindow> {
    let closes = closes_through(series, asof)?;
    if closes.is_empty() {
        return None;
    }
    let take = closes.len().min(COARSE_WINDOW_DAYS);
    let mut window: Vec<f64> = closes[closes.len() - take..].to_vec();
    window.reverse();
    Some(RawPriceWindow {
        short_history: take < COARSE_WINDOW_DAYS,
        closes: window,
    })
}
