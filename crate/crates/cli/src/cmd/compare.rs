//! `compare`: collect per-trial backtest results from a fine and a coarse
//! run directory and emit the Sharpe-difference tables.

use std::path::Path;

use anyhow::{anyhow, Context, Result};

use tradecrew_core::agents::Granularity;
use tradecrew_core::analysis::{delta_sharpe_tables, TrialSharpe};
use tradecrew_core::portfolio::BacktestResult;

use crate::manifest::OutputWriter;

use super::collect_files;

/// Parse `.../<mask>/results/N<k>/trial_<t>.json` into a tagged Sharpe.
fn trial_from_path(path: &Path, granularity: Granularity) -> Result<Option<TrialSharpe>> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let Some(trial_str) = name
        .strip_prefix("trial_")
        .and_then(|s| s.strip_suffix(".json"))
    else {
        return Ok(None); // median.json and friends
    };
    let trial: u32 = trial_str
        .parse()
        .with_context(|| format!("bad trial index in {}", path.display()))?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let result: BacktestResult =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    // <mask>/results/N<k>/trial_<t>.json
    let mask_label = path
        .ancestors()
        .nth(3)
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .ok_or_else(|| anyhow!("cannot infer mask label for {}", path.display()))?
        .to_string();
    let sharpe = match result.net_sharpe() {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{}: skipping ({e})", path.display());
            return Ok(None);
        }
    };
    Ok(Some(TrialSharpe {
        granularity,
        mask_label,
        n: result.config.n,
        trial,
        sharpe,
    }))
}

fn collect_trials(dir: &Path, granularity: Granularity) -> Result<Vec<TrialSharpe>> {
    let files = collect_files(dir, &|p| {
        p.extension().map(|e| e == "json").unwrap_or(false)
            && p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("trial_"))
                .unwrap_or(false)
            && p.parent()
                .and_then(|p| p.parent())
                .and_then(|p| p.file_name())
                .map(|n| n == "results")
                .unwrap_or(false)
    })?;
    let mut out = Vec::new();
    for file in files {
        if let Some(t) = trial_from_path(&file, granularity)? {
            out.push(t);
        }
    }
    Ok(out)
}

pub fn cmd_compare(fine_dir: &Path, coarse_dir: &Path, out: &Path) -> Result<()> {
    let mut trials = collect_trials(fine_dir, Granularity::Fine)?;
    trials.extend(collect_trials(coarse_dir, Granularity::Coarse)?);
    if trials.is_empty() {
        return Err(anyhow!(
            "no trial results found under {} / {}",
            fine_dir.display(),
            coarse_dir.display()
        ));
    }
    let tables = delta_sharpe_tables(&trials);
    let mut writer = OutputWriter::new(out, "compare")?;
    writer.write_json("delta_sr_tables.json", &tables)?;
    writer.finish()?;
    println!(
        "compare: {} trial results -> {} fine-vs-coarse rows, {} ablation tables",
        trials.len(),
        tables.fine_vs_coarse.len(),
        tables.ablation.len()
    );
    Ok(())
}
