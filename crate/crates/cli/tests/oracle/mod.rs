//! Independent brute-force oracles for the acceptance suite. Everything
//! here recomputes results from first principles, sharing no code with the
//! implementation paths it checks.

use chrono::{Months, NaiveDate};

use tradecrew_core::data::{
    LineItems, PeriodType, PriceBar, PriceSeries, StatementRecord, StatementTexts, Ticker,
};
use tradecrew_core::fundamentals::{self, MetricValue};
use tradecrew_core::indicators::{ROC_DAY_HORIZONS, ROC_MONTH_HORIZONS};
use tradecrew_core::Month;

pub struct OracleFeatures {
    pub roc_days: [Option<f64>; 4],
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

/// Direct-formula EMA: e_t = alpha * v_t + (1 - alpha) * e_{t-1}.
pub fn ema_oracle(values: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        if i == 0 {
            out.push(*v);
        } else {
            out.push(alpha * v + (1.0 - alpha) * out[i - 1]);
        }
    }
    out
}

pub fn indicator_oracle(series: &PriceSeries, asof: NaiveDate) -> OracleFeatures {
    let idx = series
        .bars
        .iter()
        .position(|b| b.date == asof)
        .expect("asof in series");
    let closes: Vec<f64> = series.bars[..=idx].iter().map(|b| b.close).collect();
    let p = closes[closes.len() - 1];

    let mut roc_days = [None; 4];
    for (slot, n) in roc_days.iter_mut().zip(ROC_DAY_HORIZONS) {
        if idx >= n {
            let p_ref = series.bars[idx - n].close;
            *slot = Some(100.0 * (p / p_ref - 1.0));
        }
    }
    let mut roc_months = [None; 4];
    for (slot, m) in roc_months.iter_mut().zip(ROC_MONTH_HORIZONS) {
        let anchor = asof.checked_sub_months(Months::new(m)).expect("valid date");
        let mut reference = None;
        for bar in series.bars.iter().take(idx + 1) {
            if bar.date <= anchor {
                reference = Some(bar.close);
            }
        }
        *slot = reference.map(|p_ref| 100.0 * (p / p_ref - 1.0));
    }

    let bollinger_z = if closes.len() >= 20 {
        let window = &closes[closes.len() - 20..];
        let mean = window.iter().sum::<f64>() / 20.0;
        let var = window.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / 20.0;
        if var.sqrt() == 0.0 {
            None
        } else {
            Some((p - mean) / var.sqrt())
        }
    } else {
        None
    };

    let (macd_norm, signal_norm, hist_norm) = if closes.len() >= 26 {
        let e12 = ema_oracle(&closes, 12);
        let e26 = ema_oracle(&closes, 26);
        let m_line: Vec<f64> = e12.iter().zip(&e26).map(|(a, b)| a - b).collect();
        let s_line = ema_oracle(&m_line, 9);
        let m = m_line[m_line.len() - 1];
        let s = s_line[s_line.len() - 1];
        // Independent route: normalize the raw histogram, not the
        // difference of the normalized lines.
        (Some(m / p), Some(s / p), Some((m - s) / p))
    } else {
        (None, None, None)
    };

    let rsi = if closes.len() >= 15 {
        let mut gains = Vec::new();
        let mut losses = Vec::new();
        for w in closes.windows(2) {
            let d = w[1] - w[0];
            gains.push(if d > 0.0 { d } else { 0.0 });
            losses.push(if d < 0.0 { -d } else { 0.0 });
        }
        let mut avg_gain = gains[..14].iter().sum::<f64>() / 14.0;
        let mut avg_loss = losses[..14].iter().sum::<f64>() / 14.0;
        for k in 14..gains.len() {
            avg_gain = avg_gain + (gains[k] - avg_gain) / 14.0;
            avg_loss = avg_loss + (losses[k] - avg_loss) / 14.0;
        }
        if avg_loss == 0.0 {
            Some(100.0)
        } else if avg_gain == 0.0 {
            Some(0.0)
        } else {
            Some(100.0 - 100.0 / (1.0 + avg_gain / avg_loss))
        }
    } else {
        None
    };

    let (pct_k, pct_d, j) = if closes.len() >= 11 {
        let k_at = |end: usize| {
            let window = &closes[end - 9..end];
            let mut high = window[0];
            let mut low = window[0];
            for v in window {
                high = high.max(*v);
                low = low.min(*v);
            }
            if high == low {
                50.0
            } else {
                100.0 * (window[8] - low) / (high - low)
            }
        };
        let n = closes.len();
        let k0 = k_at(n);
        let d = (k_at(n) + k_at(n - 1) + k_at(n - 2)) / 3.0;
        (Some(k0), Some(d), Some(3.0 * d - 2.0 * k0))
    } else {
        (None, None, None)
    };

    OracleFeatures {
        roc_days,
        roc_months,
        bollinger_z,
        macd_norm,
        signal_norm,
        hist_norm,
        rsi,
        pct_k,
        pct_d,
        j,
    }
}

// ---------------------------------------------------------------------
// Fundamentals suite (criterion 2)
// ---------------------------------------------------------------------

fn statement(ticker: &str, period_type: PeriodType, end: NaiveDate, scale: f64) -> StatementRecord {
    let span = period_type.months() as f64 / 3.0;
    StatementRecord {
        ticker: ticker.into(),
        period_type,
        period_end: end,
        publish_date: end + chrono::Duration::days(40),
        items: LineItems {
            sales: Some(100.0 * span * scale),
            cost_of_sales: Some(60.0 * span * scale),
            operating_profit: Some(12.0 * span * scale),
            net_income: Some(8.0 * span * scale),
            depreciation: Some(5.0 * span * scale),
            total_assets: Some(400.0 * scale),
            equity: Some(180.0 * scale),
            cash: Some(50.0 * scale),
            receivables: Some(30.0 * scale),
            financial_assets: Some(20.0 * scale),
            inventory: Some(25.0 * scale),
            current_liabilities: Some(80.0 * scale),
            interest_bearing_debt: Some(90.0 * scale),
            operating_cf: Some(11.0 * span * scale),
            investing_cf: Some(-4.0 * span * scale),
            eps: Some(2.0 * span),
            dividends_per_share: Some(0.5 * span),
            issued_shares: Some(4.0e6),
        },
        texts: StatementTexts::default(),
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn flat_prices(close: f64) -> PriceSeries {
    PriceSeries {
        ticker: Ticker {
            code: "1001".into(),
            sector: "Autos".into(),
        },
        bars: tradecrew_core::testkit::weekday_calendar(date(2023, 1, 2), date(2023, 11, 30))
            .into_iter()
            .map(|d| PriceBar {
                date: d,
                open: close,
                close,
            })
            .collect(),
    }
}

fn quarters_back(n: usize, growth_per_q: f64) -> Vec<StatementRecord> {
    let mut out = Vec::new();
    let mut end = Month::new(2023, 9);
    let mut scale = 1.0;
    for _ in 0..n {
        out.push(statement(
            "1001",
            PeriodType::Quarterly,
            end.last_day(),
            scale,
        ));
        end = end.add_months(-3);
        scale /= 1.0 + growth_per_q;
    }
    out.reverse();
    out
}

pub fn run_fundamentals_suite() {
    let tol = 1e-9;
    let asof = date(2023, 11, 30);

    // --- TTM coverage on hand-enumerated period mixes ---
    // Four clean quarters sum exactly.
    let quarters = vec![
        statement("1001", PeriodType::Quarterly, date(2022, 12, 31), 1.0),
        statement("1001", PeriodType::Quarterly, date(2023, 3, 31), 2.0),
        statement("1001", PeriodType::Quarterly, date(2023, 6, 30), 3.0),
        statement("1001", PeriodType::Quarterly, date(2023, 9, 30), 4.0),
    ];
    let agg = fundamentals::ttm(&quarters, asof);
    assert_eq!(agg.coverage_months, 12);
    // Hand sum: 100 * (1 + 2 + 3 + 4) = 1000.
    assert!((agg.sales.unwrap() - 1000.0).abs() < tol);

    // One annual report covers the year by itself.
    let annual = vec![statement(
        "1001",
        PeriodType::Annual,
        date(2023, 3, 31),
        1.0,
    )];
    let agg = fundamentals::ttm(&annual, date(2023, 6, 30));
    assert_eq!(agg.coverage_months, 12);
    assert!((agg.sales.unwrap() - 400.0).abs() < tol);

    // Mixed: two quarters + one semi-annual; hand enumeration:
    // Q(Sep, scale 4) 400 + Q(Jun, scale 3) 300 + S(Mar, scale 1) 200 = 900.
    let mixed = vec![
        statement("1001", PeriodType::SemiAnnual, date(2023, 3, 31), 1.0),
        statement("1001", PeriodType::Quarterly, date(2023, 6, 30), 3.0),
        statement("1001", PeriodType::Quarterly, date(2023, 9, 30), 4.0),
    ];
    let agg = fundamentals::ttm(&mixed, asof);
    assert_eq!(agg.coverage_months, 12);
    assert!((agg.sales.unwrap() - 900.0).abs() < tol);

    // Two semi-annual periods.
    let semis = vec![
        statement("1001", PeriodType::SemiAnnual, date(2023, 3, 31), 1.0),
        statement("1001", PeriodType::SemiAnnual, date(2023, 9, 30), 2.0),
    ];
    let agg = fundamentals::ttm(&semis, asof);
    assert_eq!(agg.coverage_months, 12);
    assert!((agg.sales.unwrap() - 600.0).abs() < tol);

    // Insufficient coverage keeps the missing marker.
    let short = vec![statement(
        "1001",
        PeriodType::Quarterly,
        date(2023, 9, 30),
        1.0,
    )];
    let agg = fundamentals::ttm(&short, asof);
    assert_eq!(agg.coverage_months, 3);
    assert_eq!(agg.sales, None);

    // --- All 16 metrics against a spreadsheet-style ratio oracle ---
    let close = 150.0;
    let stmts = quarters_back(16, 0.05);
    let prices = flat_prices(close);
    let pack = fundamentals::fine_metrics(&stmts, &prices, asof);

    let visible: Vec<&StatementRecord> = stmts.iter().filter(|r| r.publish_date <= asof).collect();
    let mut recent = visible.clone();
    recent.sort_by_key(|r| std::cmp::Reverse(r.period_end));
    let sum4 = |skip: usize, get: fn(&LineItems) -> f64| -> f64 {
        recent[skip..skip + 4].iter().map(|r| get(&r.items)).sum()
    };
    let bs = &recent[0].items;
    let ttm_sales = sum4(0, |i| i.sales.unwrap());
    let ttm_ni = sum4(0, |i| i.net_income.unwrap());
    let ttm_eps = sum4(0, |i| i.eps.unwrap());
    let fcf = sum4(0, |i| i.operating_cf.unwrap()) + sum4(0, |i| i.investing_cf.unwrap());

    let expect: &[(&str, MetricValue, f64)] = &[
        ("net_margin", pack.net_margin, ttm_ni / ttm_sales),
        ("roa", pack.roa, ttm_ni / bs.total_assets.unwrap()),
        ("roe", pack.roe, ttm_ni / bs.equity.unwrap()),
        (
            "asset_turnover",
            pack.asset_turnover,
            ttm_sales / bs.total_assets.unwrap(),
        ),
        (
            "inventory_turn_days",
            pack.inventory_turn_days,
            365.0 * bs.inventory.unwrap() / sum4(0, |i| i.cost_of_sales.unwrap()),
        ),
        ("per", pack.per, close / ttm_eps),
        ("fcf", pack.fcf, fcf),
        ("fcf_margin", pack.fcf_margin, fcf / ttm_sales),
        (
            "ebitda",
            pack.ebitda,
            sum4(0, |i| i.operating_profit.unwrap()) + sum4(0, |i| i.depreciation.unwrap()),
        ),
        (
            "equity_ratio",
            pack.equity_ratio,
            bs.equity.unwrap() / bs.total_assets.unwrap(),
        ),
        (
            "quick_ratio",
            pack.quick_ratio,
            (bs.cash.unwrap() + bs.receivables.unwrap() + bs.financial_assets.unwrap())
                / bs.current_liabilities.unwrap(),
        ),
        (
            "de_ratio",
            pack.de_ratio,
            bs.interest_bearing_debt.unwrap() / bs.equity.unwrap(),
        ),
        (
            "sales_yoy",
            pack.sales_yoy,
            (ttm_sales - sum4(4, |i| i.sales.unwrap())) / sum4(4, |i| i.sales.unwrap()).abs(),
        ),
        (
            "sales_cagr_3y",
            pack.sales_cagr_3y,
            (ttm_sales / sum4(12, |i| i.sales.unwrap())).powf(1.0 / 3.0) - 1.0,
        ),
        (
            "eps_growth",
            pack.eps_growth,
            (ttm_eps - sum4(4, |i| i.eps.unwrap())) / sum4(4, |i| i.eps.unwrap()).abs(),
        ),
        ("dps", pack.dps, sum4(0, |i| i.dividends_per_share.unwrap())),
    ];
    assert_eq!(expect.len(), 16);
    for (name, got, want) in expect {
        let got = got.value.unwrap_or_else(|| panic!("{name} missing"));
        assert!((got - want).abs() < tol, "{name}: {got} vs {want}");
    }

    // --- Scale invariance of the ratio metrics ---
    let c = 4.2;
    let scaled: Vec<StatementRecord> = stmts
        .iter()
        .map(|r| {
            let mut s = r.clone();
            for field in [
                &mut s.items.sales,
                &mut s.items.cost_of_sales,
                &mut s.items.operating_profit,
                &mut s.items.net_income,
                &mut s.items.depreciation,
                &mut s.items.total_assets,
                &mut s.items.equity,
                &mut s.items.cash,
                &mut s.items.receivables,
                &mut s.items.financial_assets,
                &mut s.items.inventory,
                &mut s.items.current_liabilities,
                &mut s.items.interest_bearing_debt,
                &mut s.items.operating_cf,
                &mut s.items.investing_cf,
            ] {
                *field = field.map(|v| v * c);
            }
            s
        })
        .collect();
    let scaled_pack = fundamentals::fine_metrics(&scaled, &prices, asof);
    let ratio_fields = [
        ("net_margin", pack.net_margin, scaled_pack.net_margin),
        ("roa", pack.roa, scaled_pack.roa),
        ("roe", pack.roe, scaled_pack.roe),
        (
            "asset_turnover",
            pack.asset_turnover,
            scaled_pack.asset_turnover,
        ),
        (
            "inventory_turn_days",
            pack.inventory_turn_days,
            scaled_pack.inventory_turn_days,
        ),
        ("equity_ratio", pack.equity_ratio, scaled_pack.equity_ratio),
        ("quick_ratio", pack.quick_ratio, scaled_pack.quick_ratio),
        ("de_ratio", pack.de_ratio, scaled_pack.de_ratio),
        ("sales_yoy", pack.sales_yoy, scaled_pack.sales_yoy),
        (
            "sales_cagr_3y",
            pack.sales_cagr_3y,
            scaled_pack.sales_cagr_3y,
        ),
        ("fcf_margin", pack.fcf_margin, scaled_pack.fcf_margin),
    ];
    for (name, base, scaled) in ratio_fields {
        let (b, s) = (base.value.unwrap(), scaled.value.unwrap());
        assert!(
            (b - s).abs() < tol * b.abs().max(1.0),
            "{name} must be scale-invariant: {b} vs {s}"
        );
    }
    // fcf and ebitda scale with the constant.
    assert!((scaled_pack.fcf.value.unwrap() / pack.fcf.value.unwrap() - c).abs() < tol);
    assert!((scaled_pack.ebitda.value.unwrap() / pack.ebitda.value.unwrap() - c).abs() < tol);
}
