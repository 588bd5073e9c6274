//! Fixture loading and canonical serialization.
//!
//! Layout under the data root:
//!
//! ```text
//! universe.json        [{"code": "...", "sector": "..."}, ...]
//! prices/<code>.csv    header `date,open,close`, ISO-8601 dates
//! statements.jsonl     one StatementRecord per line
//! news.jsonl           one NewsItem per line
//! macro.jsonl          one MacroSnapshot per line
//! ```
//!
//! Structural problems (missing universe, unparseable rows, duplicate price
//! dates) are hard errors. Parseable rows that violate a type invariant are
//! rejected and reported with file and line, and loading continues.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use super::{
    DataError, DataRepository, MacroSnapshot, NewsItem, PriceBar, PriceSeries, StatementRecord,
    Ticker, TradingCalendar, MACRO_INDICATORS,
};

/// A parseable row dropped for violating a type invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub file: String,
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for RejectedRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.reason)
    }
}

/// Outcome of a load: which rows were rejected and why.
#[derive(Debug, Default, Clone)]
pub struct LoadReport {
    pub rejected: Vec<RejectedRow>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty()
    }

    fn reject(&mut self, file: &str, line: usize, reason: impl Into<String>) {
        self.rejected.push(RejectedRow {
            file: file.to_string(),
            line,
            reason: reason.into(),
        });
    }
}

/// Load and validate all fixtures under `root`. The trading calendar is the
/// union of dates across all price files.
pub fn load_repository(
    root: &Path,
    universe_config: &Path,
) -> Result<(DataRepository, LoadReport), DataError> {
    let mut report = LoadReport::default();

    let universe_text =
        fs::read_to_string(universe_config).map_err(|source| DataError::UniverseFile {
            path: universe_config.display().to_string(),
            source,
        })?;
    let universe: Vec<Ticker> =
        serde_json::from_str(&universe_text).map_err(|e| DataError::Parse {
            path: universe_config.display().to_string(),
            message: e.to_string(),
        })?;
    if universe.is_empty() {
        return Err(DataError::EmptyUniverse);
    }
    let mut seen = BTreeSet::new();
    for t in &universe {
        if t.code.is_empty() {
            return Err(DataError::Parse {
                path: universe_config.display().to_string(),
                message: "empty ticker code".into(),
            });
        }
        if !seen.insert(t.code.clone()) {
            return Err(DataError::DuplicateTicker(t.code.clone()));
        }
    }
    let codes: BTreeSet<&str> = universe.iter().map(|t| t.code.as_str()).collect();

    let mut prices = BTreeMap::new();
    let mut calendar_dates = BTreeSet::new();
    for ticker in &universe {
        let path = root.join("prices").join(format!("{}.csv", ticker.code));
        if !path.exists() {
            continue;
        }
        let series = load_price_csv(&path, ticker)?;
        calendar_dates.extend(series.bars.iter().map(|b| b.date));
        prices.insert(ticker.code.clone(), series);
    }

    let mut statements: BTreeMap<String, Vec<StatementRecord>> = BTreeMap::new();
    for_each_jsonl_record(&root.join("statements.jsonl"), |line_no, path, value| {
        let record: StatementRecord = match serde_json::from_str(value) {
            Ok(r) => r,
            Err(e) => {
                return Err(DataError::MalformedRow {
                    path: path.to_string(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        if !codes.contains(record.ticker.as_str()) {
            report.reject(path, line_no, format!("unknown ticker {}", record.ticker));
        } else if record.publish_date < record.period_end {
            report.reject(
                path,
                line_no,
                format!(
                    "publish_date {} before period_end {}",
                    record.publish_date, record.period_end
                ),
            );
        } else if matches!(record.items.issued_shares, Some(v) if v <= 0.0) {
            report.reject(path, line_no, "issued_shares must be positive");
        } else {
            statements
                .entry(record.ticker.clone())
                .or_default()
                .push(record);
        }
        Ok(())
    })?;
    for records in statements.values_mut() {
        records.sort_by_key(|r| (r.period_end, r.publish_date));
    }

    let mut news: Vec<NewsItem> = Vec::new();
    for_each_jsonl_record(&root.join("news.jsonl"), |line_no, path, value| {
        let item: NewsItem = match serde_json::from_str(value) {
            Ok(n) => n,
            Err(e) => {
                return Err(DataError::MalformedRow {
                    path: path.to_string(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        if item.headline.is_empty() {
            report.reject(path, line_no, "empty headline");
        } else if let Some(unknown) = item
            .ticker_matches
            .iter()
            .find(|t| !codes.contains(t.as_str()))
        {
            report.reject(path, line_no, format!("unknown ticker {unknown}"));
        } else {
            news.push(item);
        }
        Ok(())
    })?;
    news.sort_by_key(|n| n.date);

    let mut macro_snapshots: BTreeMap<_, MacroSnapshot> = BTreeMap::new();
    let mut macro_lines = BTreeMap::new();
    for_each_jsonl_record(&root.join("macro.jsonl"), |line_no, path, value| {
        let snap: MacroSnapshot = match serde_json::from_str(value) {
            Ok(s) => s,
            Err(e) => {
                return Err(DataError::MalformedRow {
                    path: path.to_string(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        if let Some(bad) = snap
            .indicators
            .keys()
            .find(|k| !MACRO_INDICATORS.contains(&k.as_str()))
        {
            report.reject(path, line_no, format!("unknown macro indicator {bad}"));
        } else {
            macro_lines.insert(snap.as_of, (line_no, path.to_string()));
            macro_snapshots.insert(snap.as_of, snap);
        }
        Ok(())
    })?;
    // A missing rate of change is only legitimate when there is no prior
    // level to compare against.
    let months: Vec<_> = macro_snapshots.keys().copied().collect();
    for pair in months.windows(2) {
        let (prev_m, cur_m) = (pair[0], pair[1]);
        if cur_m != prev_m.next() {
            continue;
        }
        let prev = &macro_snapshots[&prev_m];
        let offenders: Vec<String> = macro_snapshots[&cur_m]
            .indicators
            .iter()
            .filter(|(name, ind)| ind.mom_roc.is_none() && prev.indicators.contains_key(*name))
            .map(|(name, _)| name.clone())
            .collect();
        if !offenders.is_empty() {
            let (line, path) = &macro_lines[&cur_m];
            report.reject(
                path,
                *line,
                format!(
                    "mom_roc missing despite prior level: {}",
                    offenders.join(", ")
                ),
            );
        }
    }

    let repo = DataRepository {
        universe,
        calendar: TradingCalendar::from_dates(calendar_dates),
        prices,
        statements,
        news,
        macro_snapshots,
    };
    Ok((repo, report))
}

fn load_price_csv(path: &Path, ticker: &Ticker) -> Result<PriceSeries, DataError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: display.clone(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "date,open,close")) => {}
        _ => {
            return Err(DataError::Parse {
                path: display,
                message: "expected header `date,open,close`".into(),
            })
        }
    }
    let mut bars = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (date, open, close) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(d), Some(o), Some(c), None) => (d, o, c),
            _ => {
                return Err(DataError::MalformedRow {
                    path: display,
                    line: line_no,
                    message: "expected 3 fields".into(),
                })
            }
        };
        let malformed = |message: String| DataError::MalformedRow {
            path: display.clone(),
            line: line_no,
            message,
        };
        let date: NaiveDate = date
            .parse()
            .map_err(|e| malformed(format!("bad date: {e}")))?;
        let open: f64 = open
            .parse()
            .map_err(|e| malformed(format!("bad open: {e}")))?;
        let close: f64 = close
            .parse()
            .map_err(|e| malformed(format!("bad close: {e}")))?;
        if open <= 0.0 || close <= 0.0 {
            return Err(malformed("prices must be positive".into()));
        }
        if !seen.insert(date) {
            return Err(DataError::DuplicatePriceDate {
                path: display,
                line: line_no,
                ticker: ticker.code.clone(),
                date,
            });
        }
        bars.push(PriceBar { date, open, close });
    }
    bars.sort_by_key(|b| b.date);
    Ok(PriceSeries {
        ticker: ticker.clone(),
        bars,
    })
}

fn for_each_jsonl_record(
    path: &Path,
    mut f: impl FnMut(usize, &str, &str) -> Result<(), DataError>,
) -> Result<(), DataError> {
    if !path.exists() {
        return Ok(());
    }
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: display.clone(),
        source,
    })?;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        f(idx + 1, &display, line)?;
    }
    Ok(())
}

/// Write `repo` back out in canonical form. Loading a canonically written
/// tree and saving it again is byte-stable.
pub fn save_repository(repo: &DataRepository, root: &Path) -> Result<(), DataError> {
    let io_err = |path: &Path, source: std::io::Error| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(root.join("prices")).map_err(|e| io_err(root, e))?;

    let universe_path = root.join("universe.json");
    let mut universe = serde_json::to_string_pretty(&repo.universe).expect("serializable");
    universe.push('\n');
    fs::write(&universe_path, universe).map_err(|e| io_err(&universe_path, e))?;

    for (code, series) in &repo.prices {
        let path = root.join("prices").join(format!("{code}.csv"));
        let mut out = String::from("date,open,close\n");
        for bar in &series.bars {
            out.push_str(&format!("{},{},{}\n", bar.date, bar.open, bar.close));
        }
        fs::write(&path, out).map_err(|e| io_err(&path, e))?;
    }

    let mut stmt_out = String::new();
    for records in repo.statements.values() {
        for r in records {
            stmt_out.push_str(&serde_json::to_string(r).expect("serializable"));
            stmt_out.push('\n');
        }
    }
    let stmt_path = root.join("statements.jsonl");
    fs::write(&stmt_path, stmt_out).map_err(|e| io_err(&stmt_path, e))?;

    let mut news_out = String::new();
    for n in &repo.news {
        news_out.push_str(&serde_json::to_string(n).expect("serializable"));
        news_out.push('\n');
    }
    let news_path = root.join("news.jsonl");
    fs::write(&news_path, news_out).map_err(|e| io_err(&news_path, e))?;

    let mut macro_out = String::new();
    for snap in repo.macro_snapshots.values() {
        macro_out.push_str(&serde_json::to_string(snap).expect("serializable"));
        macro_out.push('\n');
    }
    let macro_path = root.join("macro.jsonl");
    fs::write(&macro_path, macro_out).map_err(|e| io_err(&macro_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{self, FixtureSpec};
    use std::fs;

    #[test]
    fn load_small_fixture_identity() {
        let dir = tempfile::tempdir().unwrap();
        let repo = testkit::synthetic_repository(&FixtureSpec::small());
        save_repository(&repo, dir.path()).unwrap();
        let (loaded, report) =
            load_repository(dir.path(), &dir.path().join("universe.json")).unwrap();
        assert!(report.is_clean(), "rejected: {:?}", report.rejected);
        assert_eq!(loaded.universe, repo.universe);
        assert_eq!(loaded.prices.len(), repo.prices.len());
        for (code, series) in &repo.prices {
            assert_eq!(&loaded.prices[code].bars, &series.bars);
        }
        assert_eq!(loaded.news, repo.news);
        assert_eq!(loaded.macro_snapshots, repo.macro_snapshots);
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let repo = testkit::synthetic_repository(&FixtureSpec::small());
        save_repository(&repo, dir1.path()).unwrap();
        let (loaded, _) = load_repository(dir1.path(), &dir1.path().join("universe.json")).unwrap();
        save_repository(&loaded, dir2.path()).unwrap();
        for name in [
            "universe.json",
            "statements.jsonl",
            "news.jsonl",
            "macro.jsonl",
        ] {
            let a = fs::read(dir1.path().join(name)).unwrap();
            let b = fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "file {name} not byte-stable");
        }
        for code in repo.prices.keys() {
            let rel = format!("prices/{code}.csv");
            let a = fs::read(dir1.path().join(&rel)).unwrap();
            let b = fs::read(dir2.path().join(&rel)).unwrap();
            assert_eq!(a, b, "file {rel} not byte-stable");
        }
    }

    #[test]
    fn duplicate_price_date_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let repo = testkit::synthetic_repository(&FixtureSpec::small());
        save_repository(&repo, dir.path()).unwrap();
        let code = repo.universe[0].code.clone();
        let path = dir.path().join("prices").join(format!("{code}.csv"));
        let mut text = fs::read_to_string(&path).unwrap();
        let dup = text.lines().nth(1).unwrap().to_string();
        text.push_str(&dup);
        text.push('\n');
        fs::write(&path, text).unwrap();
        let err = load_repository(dir.path(), &dir.path().join("universe.json")).unwrap_err();
        match err {
            DataError::DuplicatePriceDate { ticker, line, .. } => {
                assert_eq!(ticker, code);
                assert!(line > 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn early_publish_date_is_rejected_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let mut repo = testkit::synthetic_repository(&FixtureSpec::small());
        let code = repo.universe[0].code.clone();
        let records = repo.statements.get_mut(&code).unwrap();
        let mut bad = records[0].clone();
        bad.publish_date = bad.period_end.pred_opt().unwrap();
        records.push(bad);
        save_repository(&repo, dir.path()).unwrap();
        let (loaded, report) =
            load_repository(dir.path(), &dir.path().join("universe.json")).unwrap();
        assert_eq!(report.rejected.len(), 1);
        assert!(report.rejected[0].reason.contains("publish_date"));
        assert!(loaded.statements[&code].len() < repo.statements[&code].len());
    }

    #[test]
    fn missing_universe_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_repository(dir.path(), &dir.path().join("universe.json")).unwrap_err();
        assert!(matches!(err, DataError::UniverseFile { .. }));
    }

    #[test]
    fn malformed_price_row_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let repo = testkit::synthetic_repository(&FixtureSpec::small());
        save_repository(&repo, dir.path()).unwrap();
        let code = repo.universe[0].code.clone();
        let path = dir.path().join("prices").join(format!("{code}.csv"));
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("2024-01-01,not-a-number,3\n");
        fs::write(&path, text).unwrap();
        let err = load_repository(dir.path(), &dir.path().join("universe.json")).unwrap_err();
        assert!(matches!(err, DataError::MalformedRow { .. }));
    }
}
