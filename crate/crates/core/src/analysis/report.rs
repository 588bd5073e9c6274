//! Transcript-level reports: embedding-similarity propagation from the
//! Level-1 specialists into the sector agent's thesis, and the
//! Sharpe-difference tables over trial groups.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agents::transcript::TranscriptStore;
use crate::agents::{AgentRole, Granularity};
use crate::num::median;
use crate::time::Month;

use super::embed::{cosine, EmbeddingBackend};
use super::mwu::mann_whitney_u;
use super::AnalysisError;

/// Median cosine similarity of one Level-1 role's reasons to the sector
/// theses, per granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub role: AgentRole,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fine: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coarse: Option<f64>,
    /// fine - coarse, when both sides are present.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub rows: Vec<SimilarityRow>,
    /// (month, ticker, trial, granularity) groups that contributed.
    pub groups: usize,
}

/// For every (month, ticker, trial, granularity) with a sector record,
/// cosine-compare each present Level-1 reason against the sector thesis and
/// aggregate by median per (role, granularity). Ablated roles simply have
/// no samples and are omitted.
pub fn propagation_report(
    store: &TranscriptStore,
    backend: &dyn EmbeddingBackend,
) -> Result<SimilarityReport, AnalysisError> {
    type GroupKey = (Month, Option<String>, u32, Granularity);
    let mut sector_by_group: BTreeMap<GroupKey, &str> = BTreeMap::new();
    for record in store.records() {
        if record.role == AgentRole::Sector {
            sector_by_group.insert(
                (
                    record.month,
                    record.ticker.clone(),
                    record.trial_id,
                    record.granularity,
                ),
                record.report.reason.as_str(),
            );
        }
    }

    let mut pairs: Vec<(AgentRole, Granularity, &str, &str)> = Vec::new();
    for record in store.records() {
        if !AgentRole::LEVEL1.contains(&record.role) {
            continue;
        }
        let key = (
            record.month,
            record.ticker.clone(),
            record.trial_id,
            record.granularity,
        );
        if let Some(thesis) = sector_by_group.get(&key) {
            pairs.push((
                record.role,
                record.granularity,
                record.report.reason.as_str(),
                thesis,
            ));
        }
    }

    // Batch-embed the distinct texts once.
    let mut unique: BTreeSet<&str> = BTreeSet::new();
    for (_, _, reason, thesis) in &pairs {
        unique.insert(reason);
        unique.insert(thesis);
    }
    let texts: Vec<&str> = unique.into_iter().collect();
    let vectors = backend.embed(&texts)?;
    let lookup: BTreeMap<&str, &Vec<f64>> = texts.iter().copied().zip(vectors.iter()).collect();

    let mut samples: BTreeMap<(AgentRole, Granularity), Vec<f64>> = BTreeMap::new();
    for (role, granularity, reason, thesis) in &pairs {
        let sim = cosine(lookup[reason], lookup[thesis]);
        samples.entry((*role, *granularity)).or_default().push(sim);
    }

    let mut rows = Vec::new();
    for role in AgentRole::LEVEL1 {
        let fine = samples
            .get(&(role, Granularity::Fine))
            .and_then(|v| median(v));
        let coarse = samples
            .get(&(role, Granularity::Coarse))
            .and_then(|v| median(v));
        if fine.is_none() && coarse.is_none() {
            continue;
        }
        let diff = match (fine, coarse) {
            (Some(f), Some(c)) => Some(f - c),
            _ => None,
        };
        rows.push(SimilarityRow {
            role,
            fine,
            coarse,
            diff,
        });
    }
    Ok(SimilarityReport {
        rows,
        groups: sector_by_group.len(),
    })
}

/// One backtest trial's Sharpe, tagged by configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSharpe {
    pub granularity: Granularity,
    pub mask_label: String,
    pub n: usize,
    pub trial: u32,
    pub sharpe: f64,
}

/// One table cell: a median-Sharpe difference with its U-test annotation.
/// Stars are suppressed when either group has fewer than 2 trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub n: usize,
    pub delta_sr: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stars: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub mask: String,
    pub cells: Vec<DeltaCell>,
}

/// Ablation table for one granularity: baseline median Sharpe per portfolio
/// size plus one row per leave-one-out mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub granularity: Granularity,
    /// (portfolio size, baseline all-agents median Sharpe).
    pub baseline: Vec<(usize, f64)>,
    pub rows: Vec<DeltaRow>,
}

/// The two table families: fine-vs-coarse median Sharpe differences per
/// (mask, N), and per-granularity ablation differences against the
/// all-agents baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSrTables {
    pub portfolio_sizes: Vec<usize>,
    pub fine_vs_coarse: Vec<DeltaRow>,
    pub ablation: Vec<AblationTable>,
}

const CANONICAL_MASKS: [&str; 6] = [
    "all",
    "wo_technical",
    "wo_quantitative",
    "wo_qualitative",
    "wo_news",
    "wo_macro",
];

fn mask_order(label: &str) -> (usize, String) {
    match CANONICAL_MASKS.iter().position(|m| *m == label) {
        Some(i) => (i, String::new()),
        None => (CANONICAL_MASKS.len(), label.to_string()),
    }
}

fn annotate(delta_sr: f64, a: &[f64], b: &[f64], n: usize) -> DeltaCell {
    if a.len() < 2 || b.len() < 2 {
        return DeltaCell {
            n,
            delta_sr,
            p: None,
            stars: None,
        };
    }
    let test = mann_whitney_u(a, b).expect("non-empty samples");
    DeltaCell {
        n,
        delta_sr,
        p: Some(test.p),
        stars: Some(test.stars.as_str().to_string()),
    }
}

/// Build both table families from tagged per-trial Sharpe ratios.
pub fn delta_sharpe_tables(trials: &[TrialSharpe]) -> DeltaSrTables {
    let mut groups: BTreeMap<(Granularity, String, usize), Vec<f64>> = BTreeMap::new();
    for t in trials {
        groups
            .entry((t.granularity, t.mask_label.clone(), t.n))
            .or_default()
            .push(t.sharpe);
    }
    let portfolio_sizes: Vec<usize> = trials
        .iter()
        .map(|t| t.n)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut mask_labels: Vec<String> = groups
        .keys()
        .map(|(_, label, _)| label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    mask_labels.sort_by_key(|l| mask_order(l));

    let mut fine_vs_coarse = Vec::new();
    for label in &mask_labels {
        let mut cells = Vec::new();
        for n in &portfolio_sizes {
            let fine = groups.get(&(Granularity::Fine, label.clone(), *n));
            let coarse = groups.get(&(Granularity::Coarse, label.clone(), *n));
            let (Some(fine), Some(coarse)) = (fine, coarse) else {
                continue;
            };
            let delta = median(fine).expect("non-empty") - median(coarse).expect("non-empty");
            cells.push(annotate(delta, fine, coarse, *n));
        }
        if !cells.is_empty() {
            fine_vs_coarse.push(DeltaRow {
                mask: label.clone(),
                cells,
            });
        }
    }

    let mut ablation = Vec::new();
    for granularity in [Granularity::Fine, Granularity::Coarse] {
        let mut baseline = Vec::new();
        for n in &portfolio_sizes {
            if let Some(base) = groups.get(&(granularity, "all".to_string(), *n)) {
                baseline.push((*n, median(base).expect("non-empty")));
            }
        }
        if baseline.is_empty() {
            continue;
        }
        let mut rows = Vec::new();
        for label in &mask_labels {
            if label == "all" {
                continue;
            }
            let mut cells = Vec::new();
            for n in &portfolio_sizes {
                let masked = groups.get(&(granularity, label.clone(), *n));
                let base = groups.get(&(granularity, "all".to_string(), *n));
                let (Some(masked), Some(base)) = (masked, base) else {
                    continue;
                };
                let delta = median(masked).expect("non-empty") - median(base).expect("non-empty");
                cells.push(annotate(delta, masked, base, *n));
            }
            if !cells.is_empty() {
                rows.push(DeltaRow {
                    mask: label.clone(),
                    cells,
                });
            }
        }
        ablation.push(AblationTable {
            granularity,
            baseline,
            rows,
        });
    }

    DeltaSrTables {
        portfolio_sizes,
        fine_vs_coarse,
        ablation,
    }
}
