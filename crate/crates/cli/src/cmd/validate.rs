//! `validate`: load the fixture tree and report invariant violations.

use anyhow::Result;
use serde_json::json;

use tradecrew_core::data::load_repository;

use crate::config::RunConfig;
use crate::manifest::OutputWriter;

/// Returns true when the fixtures are clean (exit code 0).
pub fn cmd_validate(config: &RunConfig, out: &std::path::Path) -> Result<bool> {
    let (repo, report) = load_repository(&config.data_root, &config.universe_path())?;
    let mut writer = OutputWriter::new(out, "validate")?;
    let rejected: Vec<_> = report
        .rejected
        .iter()
        .map(|r| {
            json!({
                "file": r.file,
                "line": r.line,
                "reason": r.reason,
            })
        })
        .collect();
    let clean = report.is_clean();
    writer.write_json(
        "validate_report.json",
        &json!({
            "clean": clean,
            "universe_size": repo.universe.len(),
            "tickers_with_prices": repo.prices.len(),
            "business_days": repo.calendar.business_days().len(),
            "rejected": rejected,
        }),
    )?;
    writer.finish()?;
    if clean {
        println!("validate: clean ({} tickers)", repo.universe.len());
    } else {
        println!("validate: {} rejected row(s)", report.rejected.len());
        for r in &report.rejected {
            println!("  {r}");
        }
    }
    Ok(clean)
}
