//! Mann-Whitney U test with midrank ties: exact enumeration for small
//! samples, normal approximation with tie and continuity corrections
//! otherwise.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::AnalysisError;

/// Significance stars at the thresholds 0.05, 0.01, 0.001, 0.0001.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "ns")]
    NotSignificant,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "***")]
    Three,
    #[serde(rename = "****")]
    Four,
}

impl Stars {
    pub fn from_p(p: f64) -> Self {
        if p < 0.0001 {
            Stars::Four
        } else if p < 0.001 {
            Stars::Three
        } else if p < 0.01 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::NotSignificant
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stars::NotSignificant => "ns",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
            Stars::Four => "****",
        }
    }
}

impl std::fmt::Display for Stars {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    NormalApprox,
}

/// U statistic of the first sample, its complement, and the two-sided p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U of the first sample (rank-sum form with midranks).
    pub u: f64,
    /// U of the second sample; `u + u_other = n * m`.
    pub u_other: f64,
    pub p: f64,
    pub stars: Stars,
    pub method: PValueMethod,
}

/// Midranks of the pooled samples, returned per group.
fn midranks(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = x
        .iter()
        .map(|v| (*v, 0usize))
        .chain(y.iter().map(|v| (*v, 1usize)))
        .collect();
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("no NaN sample"));
    let n_total = pooled.len();
    let mut ranks = vec![0.0; n_total];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n_total {
        let mut j = i;
        while j < n_total && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        for slot in ranks.iter_mut().take(j).skip(i) {
            *slot = midrank;
        }
        tie_sizes.push(j - i);
        i = j;
    }
    let mut rx = Vec::with_capacity(x.len());
    let mut ry = Vec::with_capacity(y.len());
    for (k, (_, group)) in pooled.iter().enumerate() {
        if *group == 0 {
            rx.push(ranks[k]);
        } else {
            ry.push(ranks[k]);
        }
    }
    (rx, ry, tie_sizes)
}

/// Number of n-subsets of ranks {1..n+m} with each possible U value, as the
/// exact null distribution (an untied-rank enumeration).
fn exact_u_counts(n: usize, m: usize) -> Vec<f64> {
    let max_u = n * m;
    // ways[j][u]: subsets of size j with U value u, built rank by rank.
    let mut ways = vec![vec![0.0f64; max_u + 1]; n + 1];
    ways[0][0] = 1.0;
    for rank in 1..=(n + m) {
        for j in (1..=n.min(rank)).rev() {
            // Choosing `rank` as the j-th (largest so far) element adds
            // rank - j to the rank-sum, i.e. to U.
            let add = rank - j;
            if add > max_u {
                continue;
            }
            for u in (add..=max_u).rev() {
                let carry = ways[j - 1][u - add];
                if carry > 0.0 {
                    ways[j][u] += carry;
                }
            }
        }
    }
    ways.swap_remove(n)
}

const EXACT_THRESHOLD: usize = 8;

/// Two-sided Mann-Whitney U test. Exact enumeration when either sample has
/// fewer than 8 observations, normal approximation with tie and continuity
/// corrections otherwise.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<UTestResult, AnalysisError> {
    if x.is_empty() || y.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let n = x.len();
    let m = y.len();
    let (rx, _ry, tie_sizes) = midranks(x, y);
    let rank_sum_x: f64 = rx.iter().sum();
    let u_x = rank_sum_x - (n * (n + 1)) as f64 / 2.0;
    let u_y = (n * m) as f64 - u_x;

    let (p, method) = if n < EXACT_THRESHOLD || m < EXACT_THRESHOLD {
        let counts = exact_u_counts(n, m);
        let total: f64 = counts.iter().sum();
        let le: f64 = counts
            .iter()
            .enumerate()
            .filter(|(u, _)| (*u as f64) <= u_x + 1e-9)
            .map(|(_, c)| c)
            .sum();
        let ge: f64 = counts
            .iter()
            .enumerate()
            .filter(|(u, _)| (*u as f64) >= u_x - 1e-9)
            .map(|(_, c)| c)
            .sum();
        let p = (2.0 * (le.min(ge)) / total).min(1.0);
        (p, PValueMethod::Exact)
    } else {
        let nt = (n + m) as f64;
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|t| {
                let t = *t as f64;
                t * t * t - t
            })
            .sum();
        let variance = (n as f64 * m as f64 / 12.0) * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
        if variance <= 0.0 {
            // Everything tied: no evidence either way.
            (1.0, PValueMethod::NormalApprox)
        } else {
            let mean = (n * m) as f64 / 2.0;
            let diff = u_x - mean;
            // Continuity correction toward the mean.
            let corrected = if diff > 0.0 {
                diff - 0.5
            } else if diff < 0.0 {
                diff + 0.5
            } else {
                0.0
            };
            let z = corrected / variance.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let p = (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0);
            (p, PValueMethod::NormalApprox)
        }
    };

    Ok(UTestResult {
        u: u_x,
        u_other: u_y,
        p,
        stars: Stars::from_p(p),
        method,
    })
}
