//! Acceptance gate: one test per criterion, each printing a PASS line
//! (run with `--nocapture` to see them).
//!
//! Criteria:
//! 1. indicator oracle suite          6. blend-sweep diversification
//! 2. fundamentals suite              7. statistics suite
//! 3. leakage audit                   8. end-to-end determinism
//! 4. backtest antisymmetry           9. protocol-shape reproduction
//! 5. ERC solver

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use tradecrew_core::agents::audit::{audit_leakage, audit_mask};
use tradecrew_core::agents::backend::SyntheticBackend;
use tradecrew_core::agents::pipeline::run_trial;
use tradecrew_core::agents::{AblationMask, Granularity};
use tradecrew_core::data::{rebalance_schedule, DataRepository, PriceBar, PriceSeries, Ticker};
use tradecrew_core::testkit::{synthetic_repository, weekday_calendar, FixtureSpec};
use tradecrew_core::{indicators, Month};

mod oracle;

fn pass(criterion: u32, name: &str, started: Instant, budget_secs: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < budget_secs,
        "criterion {criterion} exceeded its {budget_secs}s budget: {elapsed:.2}s"
    );
    println!("ACCEPTANCE {criterion} ({name}): PASS [{elapsed:.2}s < {budget_secs}s]");
}

fn random_series(seed: u64, days: usize) -> PriceSeries {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dates = weekday_calendar(
        chrono::NaiveDate::from_ymd_opt(2022, 1, 3).unwrap(),
        chrono::NaiveDate::from_ymd_opt(2023, 12, 29).unwrap(),
    );
    let mut close = 500.0 + rng.random::<f64>() * 2000.0;
    let bars: Vec<PriceBar> = dates
        .into_iter()
        .take(days)
        .map(|date| {
            close *= 1.0 + 0.03 * (rng.random::<f64>() - 0.5);
            PriceBar {
                date,
                open: close,
                close,
            }
        })
        .collect();
    PriceSeries {
        ticker: Ticker {
            code: "9000".into(),
            sector: "Autos".into(),
        },
        bars,
    }
}

fn assert_close(got: Option<f64>, want: Option<f64>, tol: f64, what: &str) {
    match (got, want) {
        (Some(g), Some(w)) => assert!((g - w).abs() <= tol, "{what}: {g} vs {w}"),
        (None, None) => {}
        other => panic!("{what}: availability mismatch {other:?}"),
    }
}

#[test]
fn criterion_1_indicator_oracles() {
    let started = Instant::now();
    for seed in 0..100u64 {
        let series = random_series(seed, 300);
        let asof = series.bars.last().unwrap().date;
        let features = indicators::fine_features(&series, asof);
        let o = oracle::indicator_oracle(&series, asof);
        let tol = 1e-9;
        for (i, n) in indicators::ROC_DAY_HORIZONS.iter().enumerate() {
            assert_close(
                features.roc_days[i],
                o.roc_days[i],
                tol,
                &format!("roc {n}d"),
            );
        }
        for (i, m) in indicators::ROC_MONTH_HORIZONS.iter().enumerate() {
            assert_close(
                features.roc_months[i],
                o.roc_months[i],
                tol,
                &format!("roc {m}m"),
            );
        }
        assert_close(features.bollinger_z, o.bollinger_z, tol, "bollinger");
        assert_close(features.macd_norm, o.macd_norm, tol, "macd");
        assert_close(features.signal_norm, o.signal_norm, tol, "signal");
        assert_close(features.hist_norm, o.hist_norm, tol, "hist");
        assert_close(features.rsi, o.rsi, tol, "rsi");
        assert_close(features.pct_k, o.pct_k, tol, "pct_k");
        assert_close(features.pct_d, o.pct_d, tol, "pct_d");
        assert_close(features.j, o.j, tol, "j");

        // EMA against the direct-formula oracle on the close series.
        let closes: Vec<f64> = series.bars.iter().map(|b| b.close).collect();
        for span in [9usize, 12, 26] {
            let got = indicators::ema(&closes, span).unwrap();
            let want = oracle::ema_oracle(&closes, span);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= tol, "ema span {span}");
            }
        }
    }

    // Degenerate cases return the specified values.
    let flat = {
        let mut s = random_series(0, 60);
        for b in &mut s.bars {
            b.close = 250.0;
            b.open = 250.0;
        }
        s
    };
    let asof = flat.bars.last().unwrap().date;
    let f = indicators::fine_features(&flat, asof);
    assert_eq!(f.bollinger_z, None, "flat series has no bollinger z");
    assert_eq!(f.pct_k, Some(50.0), "flat 9-day range pins %K at 50");
    assert_eq!(
        f.rsi,
        Some(100.0),
        "flat series: AvgLoss=0 rule applies first"
    );
    assert_eq!(
        (f.macd_norm, f.signal_norm, f.hist_norm),
        (Some(0.0), Some(0.0), Some(0.0))
    );

    let short = random_series(1, 10);
    let asof = short.bars.last().unwrap().date;
    let f = indicators::fine_features(&short, asof);
    assert_eq!(f.rsi, None);
    assert_eq!(f.macd_norm, None);
    assert_eq!(f.bollinger_z, None);
    assert_eq!(f.pct_k, None);
    assert_eq!(f.roc_days[3], None);

    pass(1, "indicator oracle suite", started, 5.0);
}

#[test]
fn criterion_2_fundamentals_suite() {
    let started = Instant::now();
    oracle::run_fundamentals_suite();
    pass(2, "fundamentals suite", started, 5.0);
}

#[test]
fn criterion_3_leakage_audit() {
    let started = Instant::now();
    let repo = synthetic_repository(&FixtureSpec::desk(6, 2024));
    let schedule = rebalance_schedule(&repo.calendar, Month::new(2023, 9), Month::new(2024, 8))
        .expect("12 decision months");
    assert_eq!(schedule.len(), 12);
    let mut total_records = 0usize;
    for granularity in [Granularity::Fine, Granularity::Coarse] {
        for mask in AblationMask::leave_one_out_sweep() {
            let (_scores, store) =
                run_trial(&repo, &schedule, granularity, &mask, 0, &SyntheticBackend)
                    .expect("scripted trial");
            total_records += store.len();
            let leaks = audit_leakage(&store, &repo.calendar);
            assert!(
                leaks.is_empty(),
                "{granularity}/{}: {} leakage violations, first: {}",
                mask.label(),
                leaks.len(),
                leaks[0]
            );
            let mask_violations = audit_mask(&store, &mask);
            assert!(
                mask_violations.is_empty(),
                "{granularity}/{}: {} mask violations, first: {}",
                mask.label(),
                mask_violations.len(),
                mask_violations[0]
            );
            // Bound enforcement: every persisted report satisfies its
            // role's score bounds, fallbacks included.
            for record in store.records() {
                assert!(
                    record.report.scores.valid_for(record.role),
                    "out-of-bounds persisted report for {}",
                    record.key()
                );
                assert!(!record.report.reason.is_empty());
            }
        }
    }
    assert!(total_records > 2000, "audited {total_records} transcripts");
    pass(3, "leakage audit", started, 30.0);
}

#[test]
fn criterion_4_backtest_antisymmetry_and_neutrality() {
    let started = Instant::now();
    let repo = synthetic_repository(&FixtureSpec::desk(6, 5));
    let schedule = rebalance_schedule(&repo.calendar, Month::new(2023, 9), Month::new(2023, 12))
        .expect("schedule");

    // Foresight scores: rank of realized next-month open-to-open return.
    let realized_ranks = |repo: &DataRepository, decision_month: Month, invert: bool| {
        let exec_month = decision_month.next();
        let entry = repo.calendar.first_business_day(exec_month).unwrap();
        let exit = repo.calendar.first_business_day(exec_month.next()).unwrap();
        let mut rets: Vec<(String, f64)> = repo
            .prices
            .keys()
            .map(|code| {
                let a = repo.open_on(code, entry).unwrap();
                let b = repo.open_on(code, exit).unwrap();
                (code.clone(), b / a - 1.0)
            })
            .collect();
        rets.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        rets.into_iter()
            .enumerate()
            .map(|(rank, (code, _))| {
                let score = rank as f64;
                (code, if invert { -score } else { score })
            })
            .collect::<BTreeMap<String, f64>>()
    };
    let mut fwd =
        |_: &tradecrew_core::data::DataView, m: Month| Ok(realized_ranks(&repo, m, false));
    let mut rev = |_: &tradecrew_core::data::DataView, m: Month| Ok(realized_ranks(&repo, m, true));
    let a = tradecrew_core::portfolio::run_backtest(&repo, &schedule, &mut fwd, 4, 0.0).unwrap();
    let b = tradecrew_core::portfolio::run_backtest(&repo, &schedule, &mut rev, 4, 0.0).unwrap();
    for (x, y) in a.months.iter().zip(&b.months) {
        assert_eq!(
            x.gross_return, -y.gross_return,
            "negated scores must negate returns"
        );
        assert_eq!(
            x.gross_return, x.net_return,
            "cost_bps = 0 means net == gross"
        );
        assert_eq!(y.gross_return, y.net_return);
    }

    // Uniform market move: power-of-two prices make the cancellation exact.
    let mut uniform = repo.clone();
    let d1 = schedule[0].execution_date;
    let d2 = schedule[1].execution_date;
    for series in uniform.prices.values_mut() {
        for bar in series.bars.iter_mut() {
            if bar.date == d1 {
                bar.open = 512.0;
            }
            if bar.date == d2 {
                bar.open = 768.0; // exactly +50%
            }
        }
    }
    let scores: BTreeMap<String, f64> = uniform
        .prices
        .keys()
        .enumerate()
        .map(|(i, code)| (code.clone(), i as f64))
        .collect();
    let book = tradecrew_core::portfolio::construct(&scores, 4, Month::from_date(d1)).unwrap();
    let gross = tradecrew_core::portfolio::month_return(&book, &uniform, d1, d2).unwrap();
    assert_eq!(gross, 0.0, "uniform move must cancel exactly");

    pass(4, "backtest antisymmetry + neutrality", started, 30.0);
}

#[test]
fn criterion_5_erc_solver() {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use tradecrew_core::optimizer::{erc_weights, risk_contributions};

    let started = Instant::now();
    let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
    let sol = erc_weights(&diag).unwrap();
    assert!((sol.weights[0] - 2.0 / 3.0).abs() < 1e-6);
    assert!((sol.weights[1] - 1.0 / 3.0).abs() < 1e-6);

    for m in [2usize, 4, 6, 9] {
        let sol = erc_weights(&DMatrix::identity(m, m)).unwrap();
        for w in &sol.weights {
            assert!((w - 1.0 / m as f64).abs() < 1e-8, "identity -> 1/M");
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let a = DMatrix::from_fn(6, 8, |_, _| rng.random::<f64>() - 0.3);
        let sigma = &a * a.transpose() + DMatrix::identity(6, 6) * 0.02;
        let sol = erc_weights(&sigma).unwrap();
        // Re-verify outside the solver.
        let rc = risk_contributions(&sigma, &sol.weights);
        for i in 0..rc.len() {
            for j in 0..rc.len() {
                let ratio_dev = (rc[i] / rc[j] - 1.0).abs();
                assert!(ratio_dev <= 1e-4, "RC ratio deviation {ratio_dev}");
            }
        }
        let sum: f64 = sol.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
    }

    // Sigma = PVP' against the naive triple loop.
    for _ in 0..10 {
        let p = DMatrix::from_fn(4, 7, |_, _| rng.random::<f64>() - 0.5);
        let vbase = DMatrix::from_fn(7, 7, |_, _| rng.random::<f64>() - 0.5);
        let v = &vbase * vbase.transpose();
        let panel = tradecrew_core::optimizer::StrategyPanel {
            labels: (0..4).map(|i| format!("s{i}")).collect(),
            tickers: (0..7).map(|i| format!("{}", 3000 + i)).collect(),
            weights: p.clone(),
            month: Month::new(2024, 1),
        };
        let cov = tradecrew_core::optimizer::CovarianceEstimate {
            tickers: panel.tickers.clone(),
            matrix: v.clone(),
            window_months: 24,
        };
        let sigma = tradecrew_core::optimizer::strategy_covariance(&panel, &cov).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut want = 0.0;
                for x in 0..7 {
                    for y in 0..7 {
                        want += p[(i, x)] * v[(x, y)] * p[(j, y)];
                    }
                }
                assert!((sigma[(i, j)] - want).abs() <= 1e-10, "PVP' triple loop");
            }
        }
    }
    pass(5, "ERC solver", started, 10.0);
}

#[test]
fn criterion_6_blend_sweep_diversification() {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    use tradecrew_core::optimizer::blend_sweep;
    use tradecrew_core::portfolio::annualize;

    let started = Instant::now();
    // Synthetic monthly streams with correlation 0.4 and comparable vol.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
    let normal = rand_distr::Normal::new(0.0f64, 1.0).unwrap();
    let rho: f64 = 0.4;
    let n = 120;
    let mut index = Vec::with_capacity(n);
    let mut comp = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = normal.sample(&mut rng);
        let z2: f64 = normal.sample(&mut rng);
        index.push(0.008 + 0.02 * z1);
        comp.push(0.008 + 0.02 * (rho * z1 + (1.0 - rho * rho).sqrt() * z2));
    }
    let turnover = vec![2.0; n];
    let points = blend_sweep(&index, &comp, &turnover, 10.0).unwrap();
    assert_eq!(points.len(), 11);

    // Endpoints reproduce the standalone stats exactly.
    assert_eq!(points[0].gross, annualize(&index).unwrap());
    assert_eq!(points[0].net, annualize(&index).unwrap());
    assert_eq!(points[10].gross, annualize(&comp).unwrap());
    let net_comp: Vec<f64> = comp.iter().map(|r| r - 10.0e-4 * 2.0).collect();
    assert_eq!(points[10].net, annualize(&net_comp).unwrap());

    // Some interior allocation strictly beats both endpoints (gross and
    // net alike at this cost level).
    for series in ["gross", "net"] {
        let sharpes: Vec<f64> = points
            .iter()
            .map(|p| {
                let s = if series == "gross" { p.gross } else { p.net };
                s.ann_sharpe.expect("nonzero vol")
            })
            .collect();
        let best = sharpes.iter().cloned().fold(f64::MIN, f64::max);
        let best_idx = sharpes.iter().position(|s| *s == best).unwrap();
        assert!(
            best > sharpes[0] && best > sharpes[10],
            "{series}: interior Sharpe must strictly exceed both endpoints"
        );
        assert!(best_idx != 0 && best_idx != 10);
    }
    pass(6, "blend-sweep diversification", started, 5.0);
}

#[test]
fn criterion_7_statistics_suite() {
    use rand::{Rng, SeedableRng};
    use tradecrew_core::analysis::{
        delta_sharpe_tables, log_odds, mann_whitney_u, TokenCorpus, TrialSharpe,
    };

    let started = Instant::now();
    // Mann-Whitney exact p for fully separated n = m = 3 samples.
    let result = mann_whitney_u(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
    assert_eq!(result.u, 0.0);
    assert!((result.p - 0.1).abs() < 1e-12, "exact p = {}", result.p);

    // Log-odds: identical corpora give delta = 0; antisymmetry is exact.
    let mut a = TokenCorpus::new("a");
    let mut b = TokenCorpus::new("b");
    for (t, c) in [("up", 7u64), ("down", 3), ("flat", 5)] {
        a.add_token(t, c);
        b.add_token(t, c);
    }
    for s in &log_odds(&a, &b, 0.01).unwrap().stats {
        assert_eq!(s.delta, 0.0);
    }
    let mut c = TokenCorpus::new("c");
    c.add_token("up", 1);
    c.add_token("slide", 9);
    let ij = log_odds(&a, &c, 0.01).unwrap();
    let ji = log_odds(&c, &a, 0.01).unwrap();
    for (x, y) in ij.stats.iter().zip(&ji.stats) {
        assert_eq!(x.delta, -y.delta);
        assert_eq!(x.z, -y.z);
    }

    // Delta-SR tables: a +0.2 uniform Sharpe shift over 50 trials.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut trials = Vec::new();
    for t in 0..50u32 {
        let base = 1.0 + (rng.random::<f64>() - 0.5) * 0.2;
        trials.push(TrialSharpe {
            granularity: Granularity::Coarse,
            mask_label: "all".into(),
            n: 2,
            trial: t,
            sharpe: base,
        });
        trials.push(TrialSharpe {
            granularity: Granularity::Fine,
            mask_label: "all".into(),
            n: 2,
            trial: t,
            sharpe: base + 0.2,
        });
    }
    let tables = delta_sharpe_tables(&trials);
    let cell = &tables.fine_vs_coarse[0].cells[0];
    assert!(
        (cell.delta_sr - 0.2).abs() <= 1e-12,
        "delta SR {}",
        cell.delta_sr
    );
    assert_eq!(cell.stars.as_deref(), Some("****"));
    assert!(cell.p.unwrap() < 1e-4);
    pass(7, "statistics suite", started, 10.0);
}

/// Write the shared CLI fixture and a config for it; returns the config
/// path.
fn write_cli_fixture(dir: &Path, trials: u32) -> std::path::PathBuf {
    let repo = synthetic_repository(&FixtureSpec::desk(6, 2024));
    tradecrew_core::data::save_repository(&repo, &dir.join("data")).expect("save fixture");
    let config = serde_json::json!({
        "data_root": dir.join("data"),
        "start_month": "2023-10",
        "end_month": "2024-09",
        "granularity": "fine",
        "mask": [],
        "portfolio_sizes": [2, 4],
        "trials": trials,
        "cost_bps": 10.0,
        "seed": 11,
        "backend": {"mode": "scripted"}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let exe = env!("CARGO_BIN_EXE_tradecrew");
    std::process::Command::new(exe)
        .args(args)
        .output()
        .expect("spawn tradecrew")
}

#[test]
fn criterion_8_end_to_end_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = write_cli_fixture(dir.path(), 2);
    let config = config.to_str().unwrap();
    for out in ["run_a", "run_b"] {
        let output = run_cli(&[
            "--config",
            config,
            "--out",
            dir.path().join(out).to_str().unwrap(),
            "backtest",
        ]);
        assert!(
            output.status.success(),
            "backtest failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let a = std::fs::read(dir.path().join("run_a/manifest.json")).unwrap();
    let b = std::fs::read(dir.path().join("run_b/manifest.json")).unwrap();
    assert_eq!(a, b, "manifests must be bit-identical");
    pass(8, "end-to-end determinism", started, 60.0);
}

#[test]
fn criterion_9_protocol_shape_reproduction() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = write_cli_fixture(dir.path(), 3);
    let config = config.to_str().unwrap();
    for granularity in ["fine", "coarse"] {
        let out = dir.path().join(granularity);
        let output = run_cli(&[
            "--config",
            config,
            "--out",
            out.to_str().unwrap(),
            "backtest",
            "--granularity",
            granularity,
            "--sweep-masks",
        ]);
        assert!(
            output.status.success(),
            "sweep failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let compare_out = dir.path().join("tables");
    let output = run_cli(&[
        "--out",
        compare_out.to_str().unwrap(),
        "compare",
        "--fine",
        dir.path().join("fine/fine").to_str().unwrap(),
        "--coarse",
        dir.path().join("coarse/coarse").to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "compare failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let tables: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(compare_out.join("delta_sr_tables.json")).unwrap(),
    )
    .unwrap();

    // Table-1 shape: 6 mask rows (all + 5 leave-one-out) x N in {2, 4}.
    assert_eq!(tables["portfolio_sizes"], serde_json::json!([2, 4]));
    let fvc = tables["fine_vs_coarse"].as_array().unwrap();
    assert_eq!(fvc.len(), 6);
    let expected_masks = [
        "all",
        "wo_technical",
        "wo_quantitative",
        "wo_qualitative",
        "wo_news",
        "wo_macro",
    ];
    for (row, mask) in fvc.iter().zip(expected_masks) {
        assert_eq!(row["mask"], mask);
        assert_eq!(row["cells"].as_array().unwrap().len(), 2);
    }
    // Table-2 shape: per granularity, a baseline row and 5 ablation rows.
    let ablation = tables["ablation"].as_array().unwrap();
    assert_eq!(ablation.len(), 2);
    for table in ablation {
        assert_eq!(table["baseline"].as_array().unwrap().len(), 2);
        let rows = table["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 5);
        for row in rows {
            assert_eq!(row["cells"].as_array().unwrap().len(), 2);
        }
    }

    // Arithmetic check: recompute the (all, N=2) fine-vs-coarse cell from
    // the per-trial result files.
    let sharpes = |granularity: &str| -> Vec<f64> {
        (0..3u32)
            .map(|t| {
                let path = dir.path().join(format!(
                    "{granularity}/{granularity}/all/results/N2/trial_{t}.json"
                ));
                let result: tradecrew_core::portfolio::BacktestResult =
                    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
                result.net_sharpe().unwrap()
            })
            .collect()
    };
    let fine = sharpes("fine");
    let coarse = sharpes("coarse");
    let median = |mut v: Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let want = median(fine) - median(coarse);
    let got = tables["fine_vs_coarse"][0]["cells"][0]["delta_sr"]
        .as_f64()
        .unwrap();
    assert_eq!(got, want, "cell arithmetic must match the trial files");

    pass(9, "protocol-shape reproduction", started, 120.0);
}
