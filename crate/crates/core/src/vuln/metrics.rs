use super::VulnerabilityScoreTable;
use crate::error::{Error, Result};

fn non_empty(table: &VulnerabilityScoreTable) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Contract("empty vulnerability score table".into()));
    }
    Ok(())
}

/// Number of `(morph, attempt)` pairs where every contributing subject
/// scores strictly above `tau`.
pub fn fully_mated_attempts(table: &VulnerabilityScoreTable, tau: f64) -> usize {
    table
        .attempts()
        .filter(|(_, _, scores)| scores.iter().all(|&s| s > tau))
        .count()
}

/// Fully mated morphed presentation match rate, in percent: the share of
/// all `(morph, attempt)` pairs in which every contributing subject is
/// verified (`score > tau`) on that same attempt.
pub fn compute_fmmpmr(table: &VulnerabilityScoreTable, tau: f64) -> Result<f64> {
    non_empty(table)?;
    Ok(100.0 * fully_mated_attempts(table, tau) as f64 / table.attempt_count() as f64)
}

/// Number of morphs for which every contributing subject is verified on at
/// least one attempt (not necessarily the same one).
pub fn mated_morphs(table: &VulnerabilityScoreTable, tau: f64) -> usize {
    let k = table.k();
    let mut count = 0;
    let mut current: Option<(&str, Vec<f64>)> = None;
    let mut flush = |best: &[f64]| {
        if best.iter().all(|&s| s > tau) {
            count += 1;
        }
    };
    for (m, _, scores) in table.attempts() {
        match &mut current {
            Some((id, best)) if *id == m => {
                best.iter_mut().zip(scores).for_each(|(b, &s)| *b = b.max(s));
            }
            _ => {
                if let Some((_, best)) = current.take() {
                    flush(&best);
                }
                let mut best = vec![f64::NEG_INFINITY; k];
                best.iter_mut().zip(scores).for_each(|(b, &s)| *b = s);
                current = Some((m, best));
            }
        }
    }
    if let Some((_, best)) = current {
        flush(&best);
    }
    count
}

/// Mated morph presentation match rate, in percent, using the maximum score
/// over attempts for each contributing subject.
pub fn compute_mmpmr(table: &VulnerabilityScoreTable, tau: f64) -> Result<f64> {
    non_empty(table)?;
    Ok(100.0 * mated_morphs(table, tau) as f64 / table.morph_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vuln::ScoreEntry;
    use proptest::prelude::*;

    fn table(rows: &[(&str, u32, [f64; 2])]) -> VulnerabilityScoreTable {
        let entries = rows
            .iter()
            .flat_map(|(m, p, s)| {
                (0..2).map(move |k| ScoreEntry {
                    morph_id: m.to_string(),
                    attempt: *p,
                    subject: k as u32 + 1,
                    score: s[k],
                })
            })
            .collect();
        VulnerabilityScoreTable::new(entries, 2).unwrap()
    }

    #[test]
    fn all_above_is_full() {
        let t = table(&[("m1", 1, [0.9, 0.8]), ("m2", 1, [0.7, 0.95])]);
        assert_eq!(compute_fmmpmr(&t, 0.5).unwrap(), 100.0);
        assert_eq!(compute_mmpmr(&t, 0.5).unwrap(), 100.0);
    }

    #[test]
    fn two_by_two_example() {
        // pass, fail, pass, fail -> 2 of 4 attempts
        let t = table(&[
            ("M1", 1, [0.6, 0.7]),
            ("M1", 2, [0.6, 0.4]),
            ("M2", 1, [0.9, 0.9]),
            ("M2", 2, [0.2, 0.9]),
        ]);
        assert_eq!(compute_fmmpmr(&t, 0.5).unwrap(), 50.0);
    }

    #[test]
    fn metrics_diverge_when_subjects_alternate() {
        // each subject verified on some attempt, never both together
        let t = table(&[
            ("M1", 1, [0.9, 0.1]),
            ("M1", 2, [0.1, 0.9]),
            ("M2", 1, [0.8, 0.2]),
            ("M2", 2, [0.3, 0.7]),
        ]);
        assert_eq!(compute_mmpmr(&t, 0.5).unwrap(), 100.0);
        assert_eq!(compute_fmmpmr(&t, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn subject_never_verified() {
        let t = table(&[("M1", 1, [0.4, 0.9]), ("M1", 2, [0.3, 0.95])]);
        assert_eq!(compute_mmpmr(&t, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn equality_does_not_pass() {
        let t = table(&[("M1", 1, [0.5, 0.9])]);
        assert_eq!(compute_fmmpmr(&t, 0.5).unwrap(), 0.0);
        assert_eq!(compute_mmpmr(&t, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn empty_table_is_error() {
        let t = VulnerabilityScoreTable::new(vec![], 2).unwrap();
        assert!(compute_fmmpmr(&t, 0.5).is_err());
        assert!(compute_mmpmr(&t, 0.5).is_err());
    }

    fn random_rows() -> impl Strategy<Value = Vec<(String, u32, [f64; 2])>> {
        (1usize..8, 1u32..5).prop_flat_map(|(m, p)| {
            prop::collection::vec(((0u32..10).prop_map(|v| v as f64 / 10.0), (0u32..10).prop_map(|v| v as f64 / 10.0)), m * p as usize)
                .prop_map(move |s| {
                    s.into_iter()
                        .enumerate()
                        .map(|(i, (a, b))| (format!("m{}", i / p as usize), (i % p as usize) as u32 + 1, [a, b]))
                        .collect()
                })
        })
    }

    proptest! {
        #[test]
        fn fmmpmr_monotone_and_bounded_by_mmpmr(rows in random_rows()) {
            let refs: Vec<(&str, u32, [f64; 2])> = rows.iter().map(|(m, p, s)| (m.as_str(), *p, *s)).collect();
            let t = table(&refs);
            let mut prev = f64::INFINITY;
            for i in 0..=20 {
                let tau = i as f64 / 20.0 - 0.025;
                let f = compute_fmmpmr(&t, tau).unwrap();
                prop_assert!(f <= prev);
                prop_assert!(f <= compute_mmpmr(&t, tau).unwrap());
                prev = f;
            }
        }

        #[test]
        fn permutation_invariant(rows in random_rows(), seed: u64) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let refs: Vec<(&str, u32, [f64; 2])> = rows.iter().map(|(m, p, s)| (m.as_str(), *p, *s)).collect();
            let t = table(&refs);
            let mut entries = t.entries();
            entries.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            // rename morphs
            for e in &mut entries {
                e.morph_id = format!("z{}", e.morph_id);
            }
            let shuffled = VulnerabilityScoreTable::new(entries, 2).unwrap();
            prop_assert_eq!(compute_fmmpmr(&t, 0.45).unwrap(), compute_fmmpmr(&shuffled, 0.45).unwrap());
        }
    }
}
