use std::path::Path;

use crate::error::{Error, Result};
use crate::fileio;

/// Verification threshold fixed at a target false accept rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub tau: f64,
    pub far_target: f64,
    pub impostor_count: usize,
}

/// Smallest observed impostor score `v` with `fraction(scores >= v) <= far_target`.
/// When no observed score qualifies, `tau` is the next representable value
/// above the maximum, which no impostor reaches.
pub fn calibrate_threshold(impostor_scores: &[f64], far_target: f64) -> Result<CalibrationResult> {
    if impostor_scores.is_empty() {
        return Err(Error::Contract("no impostor scores to calibrate on".into()));
    }
    if !(far_target > 0.0 && far_target <= 1.0) {
        return Err(Error::Contract(format!("FAR target {far_target} not in (0, 1]")));
    }
    if impostor_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Contract("impostor scores must be finite".into()));
    }
    let mut sorted = impostor_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut tau = None;
    let mut i = 0;
    while i < n {
        // scores at index >= i are all >= sorted[i]
        let frac = (n - i) as f64 / n as f64;
        if frac <= far_target {
            tau = Some(sorted[i]);
            break;
        }
        let v = sorted[i];
        while i < n && sorted[i] == v {
            i += 1;
        }
    }
    Ok(CalibrationResult {
        tau: tau.unwrap_or_else(|| sorted[n - 1].next_up()),
        far_target,
        impostor_count: n,
    })
}

/// Scores of every probe against every reference of a different subject.
pub fn impostor_scores<T>(
    probes: &[(String, T)],
    references: &[(String, T)],
    compare: impl Fn(&T, &T) -> f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for (pid, p) in probes {
        for (rid, r) in references {
            if pid != rid {
                out.push(compare(p, r));
            }
        }
    }
    out
}

impl CalibrationResult {
    pub fn to_text(&self) -> String {
        format!("tau={}\nfar_target={}\nn={}\n", self.tau, self.far_target, self.impostor_count)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fileio::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<CalibrationResult> {
        let text = fileio::read_to_string(path)?;
        let (mut tau, mut far, mut n) = (None, None, None);
        for (line, l) in fileio::content_lines(&text) {
            let (k, v) = l.split_once('=').ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
            match k.trim() {
                "tau" => tau = Some(fileio::parse_f64(path, line, v, "tau")?),
                "far_target" => far = Some(fileio::parse_f64(path, line, v, "far_target")?),
                "n" => n = Some(v.trim().parse().map_err(|_| Error::parse(path, line, "invalid n"))?),
                other => return Err(Error::parse(path, line, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::parse(path, 0, format!("missing `{k}=`"));
        Ok(CalibrationResult {
            tau: tau.ok_or_else(|| missing("tau"))?,
            far_target: far.ok_or_else(|| missing("far_target"))?,
            impostor_count: n.ok_or_else(|| missing("n"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_scores_ten_percent() {
        let s: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        // Oracle: enumerate every observed value as a candidate.
        let cand = s
            .iter()
            .copied()
            .filter(|&v| s.iter().filter(|&&x| x >= v).count() as f64 / 10.0 <= 0.10)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(cand, 1.0);
        assert_eq!(calibrate_threshold(&s, 0.10).unwrap().tau, 1.0);
    }

    #[test]
    fn full_far_gives_minimum() {
        assert_eq!(calibrate_threshold(&[0.4, 0.2, 0.9], 1.0).unwrap().tau, 0.2);
    }

    #[test]
    fn degenerate_distribution_uses_sentinel() {
        let r = calibrate_threshold(&[0.5; 20], 0.001).unwrap();
        assert!(r.tau > 0.5);
        assert_eq!(r.tau, 0.5f64.next_up());
        assert_eq!(r.impostor_count, 20);
    }

    #[test]
    fn contract_errors() {
        assert!(calibrate_threshold(&[], 0.1).is_err());
        assert!(calibrate_threshold(&[0.1], 0.0).is_err());
    }

    #[test]
    fn impostors_skip_same_subject() {
        let p = vec![("a".to_string(), 1.0), ("b".to_string(), 2.0)];
        let r = vec![("a".to_string(), 10.0), ("b".to_string(), 20.0), ("c".to_string(), 30.0)];
        let s = impostor_scores(&p, &r, |x, y| x * y);
        assert_eq!(s, vec![20.0, 30.0, 20.0, 60.0]);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let r = calibrate_threshold(&[0.1, 0.7, 0.3], 0.5).unwrap();
        let p = dir.path().join("cal.txt");
        r.save(&p).unwrap();
        assert_eq!(CalibrationResult::load(&p).unwrap(), r);
    }

    proptest! {
        #[test]
        fn achieved_far_within_target(
            scores in prop::collection::vec((0u32..50).prop_map(|v| v as f64 / 7.0), 1..200),
            far in 0.0005f64..1.0,
        ) {
            let r = calibrate_threshold(&scores, far).unwrap();
            let achieved = scores.iter().filter(|&&s| s >= r.tau).count() as f64 / scores.len() as f64;
            prop_assert!(achieved <= far);
            // minimality: the next lower observed value would exceed the target
            if let Some(lower) = scores.iter().copied().filter(|&s| s < r.tau).fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s)))) {
                let f = scores.iter().filter(|&&s| s >= lower).count() as f64 / scores.len() as f64;
                prop_assert!(f > far);
            }
        }
    }
}
