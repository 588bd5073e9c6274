//! `analyze-text`: build fine-vs-coarse log-odds tables per role and the
//! similarity propagation report from transcript stores.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};

use tradecrew_core::agents::transcript::TranscriptStore;
use tradecrew_core::agents::{AgentRole, Granularity};
use tradecrew_core::analysis::{log_odds, propagation_report, TokenCorpus};

use crate::config::RunConfig;
use crate::manifest::OutputWriter;

use super::collect_files;

const LOG_ODDS_ROLES: [AgentRole; 4] = [
    AgentRole::Technical,
    AgentRole::Quantitative,
    AgentRole::Sector,
    AgentRole::Pm,
];

fn load_stores(dirs: &[PathBuf]) -> Result<TranscriptStore> {
    let mut merged = TranscriptStore::new();
    let mut found = false;
    for dir in dirs {
        let files = collect_files(dir, &|p| {
            p.extension().map(|e| e == "jsonl").unwrap_or(false)
        })?;
        for file in files {
            found = true;
            let store = TranscriptStore::load_jsonl(&file)
                .with_context(|| format!("loading {}", file.display()))?;
            merged.merge(store).with_context(|| {
                format!(
                    "{}: transcripts overlap an already-loaded run; pass one run per \
                     (granularity, mask) configuration",
                    file.display()
                )
            })?;
        }
    }
    if !found {
        return Err(anyhow!("no .jsonl transcript files found"));
    }
    Ok(merged)
}

pub fn cmd_analyze_text(config: &RunConfig, transcript_dirs: &[PathBuf], out: &Path) -> Result<()> {
    let store = load_stores(transcript_dirs)?;
    let stopwords: BTreeSet<String> = config.stopwords.iter().cloned().collect();
    let mut writer = OutputWriter::new(out, "analyze-text")?;

    for role in LOG_ODDS_ROLES {
        let corpus_of = |granularity: Granularity| {
            let texts: Vec<&str> = store
                .records()
                .iter()
                .filter(|r| r.role == role && r.granularity == granularity)
                .map(|r| r.report.reason.as_str())
                .collect();
            TokenCorpus::from_texts(
                format!("{role}_{granularity}"),
                texts.iter().copied(),
                &stopwords,
            )
        };
        let fine = corpus_of(Granularity::Fine);
        let coarse = corpus_of(Granularity::Coarse);
        if fine.is_empty() || coarse.is_empty() {
            log::warn!("{role}: missing a granularity side, skipping log-odds");
            continue;
        }
        let result = log_odds(&fine, &coarse, 0.01)?;
        writer.write(
            &format!("logodds_{}_vs_{}.csv", result.label_i, result.label_j),
            result.to_csv(),
        )?;
    }

    let embedder = config.embedding_backend()?;
    let report = propagation_report(&store, embedder.as_ref())?;
    writer.write_json("similarity_report.json", &report)?;
    writer.finish()?;
    println!(
        "analyze-text: {} records, {} similarity rows",
        store.len(),
        report.rows.len()
    );
    Ok(())
}
