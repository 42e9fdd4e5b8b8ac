use serde::Serialize;

use super::metrics::{fully_mated_attempts, mated_morphs};
use super::{ScoreEntry, VulnerabilityScoreTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub fmmpmr_percent: f64,
    pub mmpmr_percent: f64,
    pub morphs: usize,
    pub attempts: usize,
}

/// One `(morph, attempt)` with the scores of all contributing subjects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub morph_id: String,
    pub alpha: f64,
    pub attempt: u32,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VulnerabilityReport {
    pub comparator: String,
    pub tau: f64,
    /// Pooled over all alphas.
    pub fmmpmr_percent: f64,
    pub mmpmr_percent: f64,
    pub per_alpha: Vec<AlphaRow>,
    /// Alphas that were requested but had no scores.
    pub empty_alphas: Vec<f64>,
    pub scatter: Vec<ScatterPoint>,
}

impl VulnerabilityReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Alpha encoded in a morph id of the form `<a>__<b>__<alpha>`.
pub fn alpha_of_morph_id(id: &str) -> Option<f64> {
    id.rsplit_once("__").and_then(|(_, a)| a.parse().ok())
}

/// Splits a table by the alpha encoded in its morph ids, ascending.
pub fn split_by_alpha(table: &VulnerabilityScoreTable) -> Result<Vec<(f64, VulnerabilityScoreTable)>> {
    let mut groups: Vec<(f64, Vec<ScoreEntry>)> = Vec::new();
    for e in table.entries() {
        let alpha = alpha_of_morph_id(&e.morph_id)
            .ok_or_else(|| Error::Contract(format!("morph id `{}` carries no alpha", e.morph_id)))?;
        match groups.iter_mut().find(|(a, _)| *a == alpha) {
            Some((_, v)) => v.push(e),
            None => groups.push((alpha, vec![e])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    groups
        .into_iter()
        .map(|(a, v)| Ok((a, VulnerabilityScoreTable::new(v, table.k())?)))
        .collect()
}

/// Per-alpha and pooled FMMPMR / MMPMR. Pooled values weight each alpha by
/// its attempt (FMMPMR) or morph (MMPMR) count. `None` or empty tables are
/// left out of the breakdown and listed in `empty_alphas`.
pub fn build_vulnerability_report(
    tables: &[(f64, Option<&VulnerabilityScoreTable>)],
    tau: f64,
    comparator: &str,
) -> Result<VulnerabilityReport> {
    if tables.is_empty() {
        return Err(Error::Contract("at least one score table required".into()));
    }
    let mut report = VulnerabilityReport {
        comparator: comparator.to_string(),
        tau,
        fmmpmr_percent: 0.0,
        mmpmr_percent: 0.0,
        per_alpha: Vec::new(),
        empty_alphas: Vec::new(),
        scatter: Vec::new(),
    };
    let (mut full, mut attempts, mut mated, mut morphs) = (0, 0, 0, 0);
    for &(alpha, table) in tables {
        let Some(t) = table.filter(|t| !t.is_empty()) else {
            report.empty_alphas.push(alpha);
            continue;
        };
        let (f, m) = (fully_mated_attempts(t, tau), mated_morphs(t, tau));
        let (na, nm) = (t.attempt_count(), t.morph_count());
        report.per_alpha.push(AlphaRow {
            alpha,
            fmmpmr_percent: 100.0 * f as f64 / na as f64,
            mmpmr_percent: 100.0 * m as f64 / nm as f64,
            morphs: nm,
            attempts: na,
        });
        full += f;
        attempts += na;
        mated += m;
        morphs += nm;
        report.scatter.extend(t.attempts().map(|(id, p, s)| ScatterPoint {
            morph_id: id.to_string(),
            alpha,
            attempt: p,
            scores: s.to_vec(),
        }));
    }
    if attempts == 0 {
        return Err(Error::Contract("all score tables are empty".into()));
    }
    report.fmmpmr_percent = 100.0 * full as f64 / attempts as f64;
    report.mmpmr_percent = 100.0 * mated as f64 / morphs as f64;
    Ok(report)
}
