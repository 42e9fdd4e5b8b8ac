use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::{DatasetManifest, Partition, ProtocolSplit, MORPH_SESSION};
use crate::comparator::FaceComparator;
use crate::error::{Error, Result};
use crate::fileio;

/// Two same-gender subjects of one partition selected for morphing.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphPair {
    pub subject_a: String,
    pub subject_b: String,
    pub pair_score: f64,
    pub split: Partition,
}

/// Scored candidate pair; `a < b` is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCandidate {
    pub a: String,
    pub b: String,
    pub score: f64,
    pub split: Partition,
}

#[derive(Debug, Clone, Default)]
pub struct PairSelection {
    pub pairs: Vec<MorphPair>,
    /// Subjects whose morph-source image could not be enrolled.
    pub item_errors: Vec<(String, String)>,
}

/// Greedy selection: candidates at or above `threshold` are visited by
/// descending score (ties by `(a, b)`), and accepted while neither subject
/// has reached `cap` pairs.
pub fn greedy_pairs(candidates: Vec<PairCandidate>, threshold: f64, cap: usize) -> Vec<MorphPair> {
    let mut eligible: Vec<MorphPair> = candidates
        .into_iter()
        .filter(|c| c.a != c.b && c.score >= threshold)
        .map(|c| {
            let (a, b) = if c.a < c.b { (c.a, c.b) } else { (c.b, c.a) };
            MorphPair {
                subject_a: a,
                subject_b: b,
                pair_score: c.score,
                split: c.split,
            }
        })
        .collect();
    eligible.sort_by(|x, y| {
        y.pair_score
            .total_cmp(&x.pair_score)
            .then_with(|| x.subject_a.cmp(&y.subject_a))
            .then_with(|| x.subject_b.cmp(&y.subject_b))
    });
    eligible.dedup_by(|x, y| x.subject_a == y.subject_a && x.subject_b == y.subject_b);
    let mut used: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for p in eligible {
        let ca = used.get(&p.subject_a).copied().unwrap_or(0);
        let cb = used.get(&p.subject_b).copied().unwrap_or(0);
        if ca < cap && cb < cap {
            *used.entry(p.subject_a.clone()).or_default() += 1;
            *used.entry(p.subject_b.clone()).or_default() += 1;
            out.push(p);
        }
    }
    out
}

/// Scores every same-gender pair inside each split partition on the
/// morph-source session and keeps the best pairs above `pair_threshold`.
pub fn select_pairs<C: FaceComparator>(
    manifest: &DatasetManifest,
    split: &ProtocolSplit,
    comparator: &C,
    pair_threshold: f64,
    max_pairs_per_subject: usize,
) -> Result<PairSelection> {
    if max_pairs_per_subject == 0 {
        return Err(Error::Contract("max_pairs_per_subject must be at least 1".into()));
    }
    let mut subjects: Vec<_> = manifest
        .subjects
        .iter()
        .filter_map(|s| split.partition_of(&s.subject_id).map(|p| (s, p)))
        .collect();
    subjects.sort_by(|a, b| a.0.subject_id.cmp(&b.0.subject_id));

    let enrolled: Vec<_> = subjects
        .par_iter()
        .map(|(s, _)| -> Result<C::Template> {
            let entry = s.session(MORPH_SESSION).ok_or_else(|| {
                Error::Integrity(format!("subject `{}` has no session {MORPH_SESSION}", s.subject_id))
            })?;
            comparator.enrol_path(&manifest.resolve(&entry.image_path))
        })
        .collect();

    let mut selection = PairSelection::default();
    let mut templates = Vec::new();
    for ((s, part), t) in subjects.iter().zip(enrolled) {
        match t {
            Ok(t) => templates.push((s, *part, t)),
            Err(e) => {
                log::warn!("skipping subject {}: {e}", s.subject_id);
                selection.item_errors.push((s.subject_id.clone(), e.to_string()));
            }
        }
    }

    let mut candidates = Vec::new();
    for (i, (sa, pa, ta)) in templates.iter().enumerate() {
        for (sb, pb, tb) in &templates[i + 1..] {
            if pa == pb && sa.gender == sb.gender {
                candidates.push(PairCandidate {
                    a: sa.subject_id.clone(),
                    b: sb.subject_id.clone(),
                    score: comparator.compare(ta, tb),
                    split: *pa,
                });
            }
        }
    }
    selection.pairs = greedy_pairs(candidates, pair_threshold, max_pairs_per_subject);
    Ok(selection)
}

pub fn write_pairs(pairs: &[MorphPair], path: &Path) -> Result<()> {
    let mut out = String::from("# subject_a;subject_b;pair_score;split\n");
    for p in pairs {
        out.push_str(&format!("{};{};{};{}\n", p.subject_a, p.subject_b, p.pair_score, p.split));
    }
    fileio::write_atomic(path, out.as_bytes())
}

pub fn read_pairs(path: &Path) -> Result<Vec<MorphPair>> {
    let text = fileio::read_to_string(path)?;
    fileio::content_lines(&text)
        .map(|(line, l)| {
            let f = fileio::fields(path, line, l, 4)?;
            Ok(MorphPair {
                subject_a: f[0].to_string(),
                subject_b: f[1].to_string(),
                pair_score: fileio::parse_f64(path, line, f[2], "pair_score")?,
                split: f[3].parse().map_err(|e: String| Error::parse(path, line, e))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(a: &str, b: &str, score: f64) -> PairCandidate {
        PairCandidate {
            a: a.into(),
            b: b.into(),
            score,
            split: Partition::Train,
        }
    }

    /// Every subset of the candidate pairs that respects the cap, compared
    /// lexicographically by sorted score vector, picks the greedy answer.
    fn best_capped_subset(pairs: &[(usize, usize, f64)], cap: usize) -> Vec<(usize, usize)> {
        let mut sorted = pairs.to_vec();
        sorted.sort_by(|x, y| y.2.total_cmp(&x.2));
        let n = sorted.len();
        type Ranked = (Vec<f64>, Vec<(usize, usize)>);
        let mut best: Option<Ranked> = None;
        for mask in 0u32..(1 << n) {
            let mut deg = [0usize; 4];
            let chosen: Vec<_> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| sorted[i]).collect();
            for &(a, b, _) in &chosen {
                deg[a] += 1;
                deg[b] += 1;
            }
            if deg.iter().any(|&d| d > cap) {
                continue;
            }
            // maximal sets only: no unchosen pair can be added
            let maximal = (0..n).filter(|i| mask & (1 << i) == 0).all(|i| {
                let (a, b, _) = sorted[i];
                deg[a] >= cap || deg[b] >= cap
            });
            if !maximal {
                continue;
            }
            let scores: Vec<f64> = chosen.iter().map(|c| c.2).collect();
            let key: Vec<(usize, usize)> = chosen.iter().map(|c| (c.0, c.1)).collect();
            if best.as_ref().is_none_or(|(s, _)| scores.partial_cmp(s) == Some(std::cmp::Ordering::Greater)) {
                best = Some((scores, key));
            }
        }
        let mut out = best.unwrap().1;
        out.sort();
        out
    }

    #[test]
    fn four_subject_matrix_cap_one() {
        let ids = ["a", "b", "c", "d"];
        let matrix = [
            [0.0, 0.90, 0.80, 0.30],
            [0.90, 0.0, 0.95, 0.60],
            [0.80, 0.95, 0.0, 0.70],
            [0.30, 0.60, 0.70, 0.0],
        ];
        let mut cands = Vec::new();
        let mut raw = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                cands.push(cand(ids[i], ids[j], matrix[i][j]));
                raw.push((i, j, matrix[i][j]));
            }
        }
        let got = greedy_pairs(cands, 0.5, 1);
        let mut got_idx: Vec<(usize, usize)> = got
            .iter()
            .map(|p| {
                let a = ids.iter().position(|x| *x == p.subject_a).unwrap();
                let b = ids.iter().position(|x| *x == p.subject_b).unwrap();
                (a, b)
            })
            .collect();
        got_idx.sort();
        let thresholded: Vec<_> = raw.into_iter().filter(|r| r.2 >= 0.5).collect();
        assert_eq!(got_idx, best_capped_subset(&thresholded, 1));
        // b-c (0.95) first, then a-d is below threshold, so a and d stay unpaired
        assert_eq!(got_idx, vec![(1, 2)]);
    }

    #[test]
    fn ties_break_lexicographically_and_orient_pairs() {
        let got = greedy_pairs(vec![cand("d", "c", 0.8), cand("b", "a", 0.8)], 0.5, 1);
        assert_eq!(got[0].subject_a, "a");
        assert_eq!(got[0].subject_b, "b");
        assert_eq!(got[1].subject_a, "c");
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(greedy_pairs(vec![cand("a", "b", 0.5)], 0.5, 1).len(), 1);
        assert!(greedy_pairs(vec![cand("a", "b", 0.49)], 0.5, 1).is_empty());
    }

    #[test]
    fn pair_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = greedy_pairs(vec![cand("a", "b", 0.75), cand("c", "d", 0.625)], 0.0, 2);
        let p = dir.path().join("pairs.txt");
        write_pairs(&pairs, &p).unwrap();
        assert_eq!(read_pairs(&p).unwrap(), pairs);
    }
}
