//! Presentation attack detection metrics in the ISO/IEC 30107-3 sense.
//!
//! Scores are oriented so that higher means more attack-like, and a sample
//! is classified as an attack when `score >= threshold`. All rates are
//! returned in percent.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fileio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    BonaFide,
    Attack,
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(Label::BonaFide),
            "attack" => Ok(Label::Attack),
            other => Err(format!("unknown label `{other}` (expected bonafide|attack)")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::BonaFide => "bonafide",
            Label::Attack => "attack",
        })
    }
}

/// Detection scores of both classes, each kept sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionScoreSet {
    bona_fide: Vec<f64>,
    attack: Vec<f64>,
}

impl DetectionScoreSet {
    pub fn new(mut bona_fide: Vec<f64>, mut attack: Vec<f64>) -> Result<Self> {
        if bona_fide.is_empty() || attack.is_empty() {
            return Err(Error::Contract(format!(
                "detection score set needs both classes ({} bona fide, {} attack)",
                bona_fide.len(),
                attack.len()
            )));
        }
        if bona_fide.iter().chain(&attack).any(|s| !s.is_finite()) {
            return Err(Error::Contract("detection scores must be finite".into()));
        }
        bona_fide.sort_by(f64::total_cmp);
        attack.sort_by(f64::total_cmp);
        Ok(Self { bona_fide, attack })
    }

    pub fn from_labeled(scores: &[(Label, f64)]) -> Result<Self> {
        let pick = |l: Label| scores.iter().filter(|s| s.0 == l).map(|s| s.1).collect();
        Self::new(pick(Label::BonaFide), pick(Label::Attack))
    }

    pub fn bona_fide(&self) -> &[f64] {
        &self.bona_fide
    }

    pub fn attack(&self) -> &[f64] {
        &self.attack
    }

    /// Every distinct observed score plus the two infinite sentinels, ascending.
    pub fn candidate_thresholds(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.bona_fide.iter().chain(&self.attack).copied().collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t.insert(0, f64::NEG_INFINITY);
        t.push(f64::INFINITY);
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRates {
    pub apcer: f64,
    pub bpcer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

fn percent(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

/// APCER: attacks scored below the threshold. BPCER: bona fide scored at or
/// above it.
pub fn error_rates(set: &DetectionScoreSet, threshold: f64) -> ErrorRates {
    let missed = set.attack.partition_point(|&s| s < threshold);
    let rejected = set.bona_fide.len() - set.bona_fide.partition_point(|&s| s < threshold);
    ErrorRates {
        apcer: percent(missed, set.attack.len()),
        bpcer: percent(rejected, set.bona_fide.len()),
    }
}

/// Step-wise DET curve: one point per candidate threshold, ascending
/// threshold order (APCER non-decreasing, BPCER non-increasing).
pub fn det_curve(set: &DetectionScoreSet) -> Vec<DetPoint> {
    set.candidate_thresholds()
        .into_iter()
        .map(|threshold| {
            let r = error_rates(set, threshold);
            DetPoint {
                threshold,
                apcer: r.apcer,
                bpcer: r.bpcer,
            }
        })
        .collect()
}

/// Detection equal error rate. Exact when a sweep point has APCER == BPCER,
/// otherwise linearly interpolated across the sign change of APCER - BPCER.
pub fn equal_error_rate(set: &DetectionScoreSet) -> f64 {
    let curve = det_curve(set);
    // The first point (threshold -inf) has APCER 0 and BPCER 100, the last
    // APCER 100 and BPCER 0, so a sign change always exists.
    let idx = curve
        .iter()
        .position(|p| p.apcer - p.bpcer >= 0.0)
        .expect("sweep ends at APCER 100 / BPCER 0");
    let hi = curve[idx];
    if hi.apcer == hi.bpcer {
        return hi.apcer;
    }
    let lo = curve[idx - 1];
    let d_lo = lo.apcer - lo.bpcer;
    let d_hi = hi.apcer - hi.bpcer;
    let t = -d_lo / (d_hi - d_lo);
    lo.apcer + t * (hi.apcer - lo.apcer)
}

/// Threshold with the lowest BPCER among those keeping APCER at or below
/// `apcer_target` (percent). BPCER falls as the threshold rises, so this is
/// the largest qualifying candidate.
pub fn operating_point(set: &DetectionScoreSet, apcer_target: f64) -> Result<DetPoint> {
    check_target(apcer_target)?;
    Ok(det_curve(set)
        .into_iter()
        .rev()
        .find(|p| p.apcer <= apcer_target)
        .expect("threshold -inf has APCER 0"))
}

fn check_target(apcer_target: f64) -> Result<()> {
    if !(apcer_target > 0.0 && apcer_target <= 100.0) {
        return Err(Error::Contract(format!("APCER target {apcer_target}% not in (0, 100]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingMode {
    /// Threshold fixed beforehand on a development set.
    DevCalibrated,
    /// Threshold chosen on the evaluated set itself.
    Direct,
}

impl FromStr for OperatingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dev" | "dev_calibrated" => Ok(OperatingMode::DevCalibrated),
            "direct" => Ok(OperatingMode::Direct),
            other => Err(format!("unknown operating mode `{other}`")),
        }
    }
}

/// BPCER at an APCER operating point, in percent.
pub fn bpcer_at_apcer(
    set: &DetectionScoreSet,
    apcer_target: f64,
    mode: OperatingMode,
    dev_threshold: Option<f64>,
) -> Result<f64> {
    check_target(apcer_target)?;
    match mode {
        OperatingMode::Direct => Ok(operating_point(set, apcer_target)?.bpcer),
        OperatingMode::DevCalibrated => {
            let t = dev_threshold
                .ok_or_else(|| Error::Contract("dev-calibrated mode requires a development threshold".into()))?;
            Ok(error_rates(set, t).bpcer)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpcerAtApcer {
    pub apcer_target: f64,
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetReport {
    pub eer_percent: f64,
    pub bpcer_at_apcer: Vec<BpcerAtApcer>,
    pub det_points: Vec<DetPoint>,
    pub mode: OperatingMode,
}

/// Full report for an evaluation set. In dev-calibrated mode `dev_thresholds`
/// supplies one `(apcer_target, threshold)` per target.
pub fn det_report(
    set: &DetectionScoreSet,
    apcer_targets: &[f64],
    mode: OperatingMode,
    dev_thresholds: &[(f64, f64)],
) -> Result<DetReport> {
    let mut rows = Vec::with_capacity(apcer_targets.len());
    for &target in apcer_targets {
        check_target(target)?;
        let threshold = match mode {
            OperatingMode::Direct => operating_point(set, target)?.threshold,
            OperatingMode::DevCalibrated => dev_thresholds
                .iter()
                .find(|(t, _)| *t == target)
                .map(|(_, thr)| *thr)
                .ok_or_else(|| Error::Contract(format!("no development threshold for APCER {target}%")))?,
        };
        let r = error_rates(set, threshold);
        rows.push(BpcerAtApcer {
            apcer_target: target,
            threshold,
            apcer: r.apcer,
            bpcer: r.bpcer,
        });
    }
    Ok(DetReport {
        eer_percent: equal_error_rate(set),
        bpcer_at_apcer: rows,
        det_points: det_curve(set),
        mode,
    })
}

impl DetReport {
    /// Tab-separated DET table: threshold, APCER, BPCER.
    pub fn det_table(&self) -> String {
        let mut out = String::from("threshold\tapcer\tbpcer\n");
        for p in &self.det_points {
            out.push_str(&format!("{}\t{}\t{}\n", p.threshold, p.apcer, p.bpcer));
        }
        out
    }

    pub fn to_json(&self) -> String {
        // JSON has no infinities; sentinel thresholds become strings.
        let rows: Vec<_> = self
            .bpcer_at_apcer
            .iter()
            .map(|r| {
                serde_json::json!({
                    "apcer_target": r.apcer_target,
                    "threshold": json_f64(r.threshold),
                    "apcer": r.apcer,
                    "bpcer": r.bpcer,
                })
            })
            .collect();
        let v = serde_json::json!({
            "eer_percent": self.eer_percent,
            "mode": self.mode,
            "bpcer_at_apcer": rows,
            "det_point_count": self.det_points.len(),
        });
        serde_json::to_string_pretty(&v).expect("serializable") + "\n"
    }
}

pub(crate) fn json_f64(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

/// Labeled score record of a score set file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub id: String,
    pub label: Label,
    pub score: f64,
}

pub fn write_score_set(records: &[ScoreRecord], path: &Path) -> Result<()> {
    let mut out = String::from("# id;label;score\n");
    for r in records {
        out.push_str(&format!("{};{};{}\n", r.id, r.label, r.score));
    }
    fileio::write_atomic(path, out.as_bytes())
}

pub fn read_score_set(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = fileio::read_to_string(path)?;
    fileio::content_lines(&text)
        .map(|(line, l)| {
            let f = fileio::fields(path, line, l, 3)?;
            Ok(ScoreRecord {
                id: f[0].to_string(),
                label: f[1].parse().map_err(|e: String| Error::parse(path, line, e))?,
                score: fileio::parse_f64(path, line, f[2], "score")?,
            })
        })
        .collect()
}

pub fn score_set_from_records(records: &[ScoreRecord]) -> Result<DetectionScoreSet> {
    let labeled: Vec<(Label, f64)> = records.iter().map(|r| (r.label, r.score)).collect();
    DetectionScoreSet::from_labeled(&labeled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(bona: &[f64], attack: &[f64]) -> DetectionScoreSet {
        DetectionScoreSet::new(bona.to_vec(), attack.to_vec()).unwrap()
    }

    /// Counting oracle over raw, unsorted scores.
    fn brute_rates(bona: &[f64], attack: &[f64], t: f64) -> (f64, f64) {
        let a = attack.iter().filter(|&&s| s < t).count();
        let b = bona.iter().filter(|&&s| s >= t).count();
        (100.0 * a as f64 / attack.len() as f64, 100.0 * b as f64 / bona.len() as f64)
    }

    #[test]
    fn extreme_thresholds() {
        let s = set(&[0.1, 0.8], &[0.9, 0.2]);
        assert_eq!(error_rates(&s, -1.0), ErrorRates { apcer: 0.0, bpcer: 100.0 });
        assert_eq!(error_rates(&s, 2.0), ErrorRates { apcer: 100.0, bpcer: 0.0 });
        assert_eq!(error_rates(&s, 0.5), ErrorRates { apcer: 50.0, bpcer: 50.0 });
    }

    #[test]
    fn ties_count_as_attack() {
        let s = set(&[0.5], &[0.5]);
        assert_eq!(error_rates(&s, 0.5), ErrorRates { apcer: 0.0, bpcer: 100.0 });
    }

    #[test]
    fn empty_class_rejected() {
        assert!(DetectionScoreSet::new(vec![], vec![1.0]).is_err());
        assert!(DetectionScoreSet::new(vec![1.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn separated_curve_touches_origin() {
        let s = set(&[0.1, 0.2], &[0.8, 0.9]);
        assert!(det_curve(&s).iter().any(|p| p.apcer == 0.0 && p.bpcer == 0.0));
        assert_eq!(equal_error_rate(&s), 0.0);
        assert_eq!(bpcer_at_apcer(&s, 1.0, OperatingMode::Direct, None).unwrap(), 0.0);
    }

    #[test]
    fn single_point_classes() {
        let s = set(&[0.5], &[0.5]);
        let c = det_curve(&s);
        assert!(c.iter().any(|p| p.apcer == 0.0 && p.bpcer == 100.0));
        assert!(c.iter().any(|p| p.apcer == 100.0 && p.bpcer == 0.0));
        assert_eq!(equal_error_rate(&s), 50.0);
    }

    #[test]
    fn eer_exact_sweep_point() {
        // Sweep: at threshold 0.3 APCER = 1/4 (0.2) and BPCER = 1/4 (0.75).
        let s = set(&[0.75, 0.25, 0.15, 0.1], &[0.8, 0.7, 0.3, 0.2]);
        assert_eq!(equal_error_rate(&s), 25.0);
    }

    #[test]
    fn eer_interpolated() {
        // bona {0.1, 0.6}, attack {0.4, 0.9}:
        //   t=0.4 -> (0, 50); t=0.6 -> (50, 50) exact
        let s = set(&[0.1, 0.6], &[0.4, 0.9]);
        assert_eq!(equal_error_rate(&s), 50.0);
        // bona {0.1, 0.2, 0.6}, attack {0.4, 0.9}:
        //   t=0.4 -> (0, 33.33..), t=0.6 -> (50, 33.33..)
        //   d goes -33.33 -> +16.67, t* = 2/3, EER = 2/3 * 50 = 33.33..
        let s = set(&[0.1, 0.2, 0.6], &[0.4, 0.9]);
        assert!((equal_error_rate(&s) - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn calibrated_mode_needs_threshold() {
        let s = set(&[0.1], &[0.9]);
        assert!(bpcer_at_apcer(&s, 5.0, OperatingMode::DevCalibrated, None).is_err());
        assert!(bpcer_at_apcer(&s, 0.0, OperatingMode::Direct, None).is_err());
        assert_eq!(bpcer_at_apcer(&s, 5.0, OperatingMode::DevCalibrated, Some(0.05)).unwrap(), 100.0);
    }

    #[test]
    fn score_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            ScoreRecord { id: "x".into(), label: Label::Attack, score: 0.25 },
            ScoreRecord { id: "y".into(), label: Label::BonaFide, score: -1.5 },
        ];
        let p = dir.path().join("s.txt");
        write_score_set(&recs, &p).unwrap();
        assert_eq!(read_score_set(&p).unwrap(), recs);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u32..40).prop_map(|v| v as f64 / 4.0), 1..25)
    }

    proptest! {
        #[test]
        fn rates_match_brute_force(bona in scores(), attack in scores(), t in -1.0f64..11.0) {
            let s = set(&bona, &attack);
            let r = error_rates(&s, t);
            prop_assert_eq!((r.apcer, r.bpcer), brute_rates(&bona, &attack, t));
            for p in det_curve(&s) {
                prop_assert_eq!((p.apcer, p.bpcer), brute_rates(&bona, &attack, p.threshold));
            }
        }

        #[test]
        fn rates_monotone(bona in scores(), attack in scores()) {
            let c = det_curve(&set(&bona, &attack));
            for w in c.windows(2) {
                prop_assert!(w[0].apcer <= w[1].apcer);
                prop_assert!(w[0].bpcer >= w[1].bpcer);
            }
        }

        #[test]
        fn eer_invariant_under_increasing_transform(bona in scores(), attack in scores()) {
            let a = equal_error_rate(&set(&bona, &attack));
            let f = |v: &f64| (v * 0.7).exp() - 3.0;
            let tb: Vec<f64> = bona.iter().map(f).collect();
            let ta: Vec<f64> = attack.iter().map(f).collect();
            let b = equal_error_rate(&set(&tb, &ta));
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=100.0).contains(&a));
        }

        #[test]
        fn direct_bpcer_non_increasing_in_target(bona in scores(), attack in scores()) {
            let s = set(&bona, &attack);
            let mut prev = f64::INFINITY;
            for target in [1.0, 5.0, 10.0, 25.0, 50.0, 100.0] {
                let b = bpcer_at_apcer(&s, target, OperatingMode::Direct, None).unwrap();
                prop_assert!(b <= prev);
                prev = b;
            }
        }
    }
}
