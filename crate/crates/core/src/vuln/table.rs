use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fileio;

/// One comparison: morph `morph_id`, attempt `attempt` (1-based), against a
/// probe of contributing subject `subject` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub morph_id: String,
    pub attempt: u32,
    pub subject: u32,
    pub score: f64,
}

/// Comparison scores grouped by `(morph, attempt)`, each group holding one
/// score per contributing subject in subject order.
#[derive(Debug, Clone, PartialEq)]
pub struct VulnerabilityScoreTable {
    k: usize,
    groups: BTreeMap<(String, u32), Vec<f64>>,
}

impl VulnerabilityScoreTable {
    pub fn new(entries: Vec<ScoreEntry>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Contract("at least one contributing subject required".into()));
        }
        let mut groups: BTreeMap<(String, u32), Vec<Option<f64>>> = BTreeMap::new();
        for e in entries {
            if !e.score.is_finite() {
                return Err(Error::Contract(format!("non-finite score for morph `{}`", e.morph_id)));
            }
            if e.attempt == 0 || e.subject == 0 || e.subject as usize > k {
                return Err(Error::Contract(format!(
                    "morph `{}`: attempt {} / subject {} out of range (K = {k})",
                    e.morph_id, e.attempt, e.subject
                )));
            }
            let slot = &mut groups.entry((e.morph_id.clone(), e.attempt)).or_insert_with(|| vec![None; k])
                [e.subject as usize - 1];
            if slot.replace(e.score).is_some() {
                return Err(Error::Contract(format!(
                    "morph `{}` attempt {}: duplicate score for subject {}",
                    e.morph_id, e.attempt, e.subject
                )));
            }
        }
        let groups = groups
            .into_iter()
            .map(|(key, scores)| {
                let complete: Option<Vec<f64>> = scores.into_iter().collect();
                complete.map(|s| (key.clone(), s)).ok_or_else(|| {
                    Error::Contract(format!("morph `{}` attempt {}: missing subject scores", key.0, key.1))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { k, groups })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Number of `(morph, attempt)` pairs.
    pub fn attempt_count(&self) -> usize {
        self.groups.len()
    }

    pub fn morph_count(&self) -> usize {
        self.morphs().count()
    }

    pub fn morphs(&self) -> impl Iterator<Item = &str> {
        let mut last: Option<&str> = None;
        self.groups.keys().filter_map(move |(m, _)| {
            if last == Some(m.as_str()) {
                None
            } else {
                last = Some(m.as_str());
                Some(m.as_str())
            }
        })
    }

    /// `(morph_id, attempt, scores)` in morph then attempt order.
    pub fn attempts(&self) -> impl Iterator<Item = (&str, u32, &[f64])> {
        self.groups.iter().map(|((m, p), s)| (m.as_str(), *p, s.as_slice()))
    }

    pub fn entries(&self) -> Vec<ScoreEntry> {
        self.attempts()
            .flat_map(|(m, p, s)| {
                s.iter().enumerate().map(move |(k, &score)| ScoreEntry {
                    morph_id: m.to_string(),
                    attempt: p,
                    subject: k as u32 + 1,
                    score,
                })
            })
            .collect()
    }

    /// Score table file: `morph_id;attempt;subject_index;score` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# morph_id;attempt;subject_index;score\n");
        for e in self.entries() {
            out.push_str(&format!("{};{};{};{}\n", e.morph_id, e.attempt, e.subject, e.score));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fileio::write_atomic(path, self.to_text().as_bytes())
    }

    /// Reads a score table; K is the largest subject index present.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fileio::read_to_string(path)?;
        let mut entries = Vec::new();
        for (line, l) in fileio::content_lines(&text) {
            let f = fileio::fields(path, line, l, 4)?;
            let int = |s: &str, what: &str| -> Result<u32> {
                s.parse().map_err(|_| Error::parse(path, line, format!("invalid {what} `{s}`")))
            };
            entries.push(ScoreEntry {
                morph_id: f[0].to_string(),
                attempt: int(f[1], "attempt")?,
                subject: int(f[2], "subject index")?,
                score: fileio::parse_f64(path, line, f[3], "score")?,
            });
        }
        let k = entries.iter().map(|e| e.subject as usize).max().unwrap_or(2);
        Self::new(entries, k)
    }
}
