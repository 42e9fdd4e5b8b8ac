//! End-to-end orchestration: split, pair, morph, vulnerability analysis and
//! detector training/evaluation, writing every intermediate artifact.

mod config;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ExperimentMode, RunConfig};

use crate::comparator::FaceComparator;
use crate::dataset::{
    parse_manifest, select_pairs, split_dataset, write_pairs, write_split, DatasetManifest, ManifestOptions, MorphPair,
    Partition, ProtocolSplit, BONA_FIDE_SESSION, MORPH_SESSION,
};
use crate::error::{Error, Result};
use crate::fileio;
use crate::iso::{self, det_report, DetectionScoreSet, Label, OperatingMode, ScoreRecord};
use crate::mad::{self, write_features, ExtractorConfig, LabeledFeature, MadModel};
use crate::morph::{generate_morphs, write_jobs, MorphRecord};
use crate::svg::{emit_box_svg, emit_scatter_svg, ScatterReport};
use crate::vuln::{
    build_vulnerability_report, calibrate_threshold, impostor_scores, score_morphs, split_by_alpha, CalibrationResult,
    VulnerabilityReport,
};

/// Enrols the image of `session` for every subject that has it, in
/// manifest order.
pub fn enrol_session<C: FaceComparator>(
    manifest: &DatasetManifest,
    comparator: &C,
    session: u32,
) -> Result<Vec<(String, C::Template)>> {
    manifest
        .subjects
        .par_iter()
        .filter_map(|s| s.session(session).map(|e| (s, e)))
        .map(|(s, e)| Ok((s.subject_id.clone(), comparator.enrol_path(&manifest.resolve(&e.image_path))?)))
        .collect()
}

/// Pairing threshold: impostor comparisons between morph-source images of
/// different subjects.
pub fn pairing_calibration<C: FaceComparator>(
    manifest: &DatasetManifest,
    comparator: &C,
    far_target: f64,
) -> Result<CalibrationResult> {
    let t = enrol_session(manifest, comparator, MORPH_SESSION)?;
    calibrate_threshold(&impostor_scores(&t, &t, |a, b| comparator.compare(a, b)), far_target)
}

/// Verification threshold: probe images against morph-source images of
/// other subjects.
pub fn verification_calibration<C: FaceComparator>(
    manifest: &DatasetManifest,
    comparator: &C,
    probe_sessions: &[u32],
    far_target: f64,
) -> Result<CalibrationResult> {
    let references = enrol_session(manifest, comparator, MORPH_SESSION)?;
    let mut probes = Vec::new();
    for &s in probe_sessions {
        probes.extend(enrol_session(manifest, comparator, s)?);
    }
    calibrate_threshold(&impostor_scores(&probes, &references, |a, b| comparator.compare(a, b)), far_target)
}

/// Image presented to a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct MadSample {
    pub id: String,
    pub label: Label,
    pub path: PathBuf,
}

/// Bona fide session images of the subjects in `part`, followed by the
/// morphs whose first subject belongs to `part`.
pub fn mad_samples(
    manifest: &DatasetManifest,
    split: &ProtocolSplit,
    morphs: &[MorphRecord],
    morph_dir: &Path,
    part: Partition,
) -> Vec<MadSample> {
    let mut out: Vec<MadSample> = manifest
        .subjects
        .iter()
        .filter(|s| split.partition_of(&s.subject_id) == Some(part))
        .filter_map(|s| {
            s.session(BONA_FIDE_SESSION).map(|e| MadSample {
                id: format!("{}_s{BONA_FIDE_SESSION}", s.subject_id),
                label: Label::BonaFide,
                path: manifest.resolve(&e.image_path),
            })
        })
        .collect();
    out.extend(
        morphs
            .iter()
            .filter(|m| split.partition_of(&m.pair.subject_a) == Some(part))
            .map(|m| MadSample {
                id: m.morph_id(),
                label: Label::Attack,
                path: morph_dir.join(&m.output_path),
            }),
    );
    out
}

pub fn extract_samples(config: &ExtractorConfig, samples: &[MadSample]) -> Result<Vec<LabeledFeature>> {
    samples
        .par_iter()
        .map(|s| {
            Ok(LabeledFeature {
                id: s.id.clone(),
                label: s.label,
                feature: config.extract(&crate::RasterImage::load(&s.path)?)?,
            })
        })
        .collect()
}

pub fn score_rows(model: &MadModel, rows: &[LabeledFeature]) -> Result<Vec<ScoreRecord>> {
    rows.iter()
        .map(|r| {
            Ok(ScoreRecord {
                id: r.id.clone(),
                label: r.label,
                score: mad::mad_score(model, &r.feature)?,
            })
        })
        .collect()
}

/// Share of samples on the correct side of the SVM decision boundary
/// (score >= 0 means attack).
pub fn decision_accuracy(scores: &[ScoreRecord]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let ok = scores
        .iter()
        .filter(|r| (r.score >= 0.0) == (r.label == Label::Attack))
        .count();
    ok as f64 / scores.len() as f64
}

/// Fails when the two manifests share a subject id.
pub fn check_cross_disjoint(train: &DatasetManifest, test: &DatasetManifest) -> Result<()> {
    let a: BTreeSet<&str> = train.subject_ids().into_iter().collect();
    let shared: Vec<&str> = test.subject_ids().into_iter().filter(|id| a.contains(id)).collect();
    if shared.is_empty() {
        return Ok(());
    }
    let shown: Vec<&str> = shared.iter().take(5).copied().collect();
    Err(Error::Protocol(format!(
        "cross-dataset run requires disjoint subjects; {} shared, e.g. {}",
        shared.len(),
        shown.join(", ")
    )))
}

/// Artifacts of the data and vulnerability stages for one manifest.
#[derive(Debug)]
pub struct DataStage {
    pub manifest: DatasetManifest,
    pub split: ProtocolSplit,
    pub pairing: CalibrationResult,
    pub pairs: Vec<MorphPair>,
    pub morphs: Vec<MorphRecord>,
    pub morph_dir: PathBuf,
    pub verification: CalibrationResult,
    pub vulnerability: VulnerabilityReport,
}

fn alpha_tag(a: f64) -> String {
    format!("{a}").replace('.', "_")
}

/// Split, pair, morph and score one manifest into `out`.
pub fn run_data_stage<C: FaceComparator>(
    manifest: DatasetManifest,
    cfg: &RunConfig,
    comparator: &C,
    out: &Path,
) -> Result<DataStage> {
    let split = split_dataset(&manifest, cfg.ratios, cfg.seed)?;
    write_split(&split, &out.join("split.txt"))?;
    let sizes = split.sizes();
    log::info!("split {}/{}/{} subjects", sizes[0], sizes[1], sizes[2]);

    let pairing = pairing_calibration(&manifest, comparator, cfg.pairing_far_target)?;
    pairing.save(&out.join("pairing_calibration.txt"))?;
    let selection = select_pairs(&manifest, &split, comparator, pairing.tau, cfg.max_pairs_per_subject)?;
    write_pairs(&selection.pairs, &out.join("pairs.txt"))?;
    log::info!("{} pairs at pairing threshold {}", selection.pairs.len(), pairing.tau);

    let morph_dir = out.join("morphs");
    let batch = generate_morphs(&manifest, &selection.pairs, &cfg.alphas, &morph_dir)?;
    write_jobs(&batch.records, &morph_dir.join("jobs.txt"))?;
    if !batch.failures.is_empty() {
        log::warn!("{} morphs failed", batch.failures.len());
    }

    let verification = verification_calibration(&manifest, comparator, &cfg.probe_sessions, cfg.verification_far_target)?;
    verification.save(&out.join("verification_calibration.txt"))?;
    let scored = score_morphs(&batch.records, &morph_dir, &manifest, comparator, &cfg.probe_sessions)?;
    scored.table.save(&out.join("vuln_scores.txt"))?;
    let by_alpha = split_by_alpha(&scored.table)?;
    let slots: Vec<(f64, Option<&crate::vuln::VulnerabilityScoreTable>)> = cfg
        .alphas
        .iter()
        .map(|&a| (a, by_alpha.iter().find(|(x, _)| *x == a).map(|(_, t)| t)))
        .collect();
    let report = build_vulnerability_report(&slots, verification.tau, comparator.name())?;
    fileio::write_atomic(&out.join("vuln_report.json"), report.to_json().as_bytes())?;

    let mut groups = Vec::new();
    for (alpha, table) in &by_alpha {
        let points: Vec<(f64, f64)> = table.attempts().map(|(_, _, s)| (s[0], s[1])).collect();
        groups.push((format!("a={alpha} S1"), points.iter().map(|p| p.0).collect()));
        groups.push((format!("a={alpha} S2"), points.iter().map(|p| p.1).collect()));
        let scatter = ScatterReport::new(points, verification.tau, &format!("alpha = {alpha} ({})", comparator.name()));
        emit_scatter_svg(&scatter, &out.join(format!("scatter_alpha_{}.svg", alpha_tag(*alpha))))?;
    }
    if !groups.is_empty() {
        emit_box_svg(&groups, "comparison scores per alpha", &out.join("vuln_box.svg"))?;
    }

    Ok(DataStage {
        manifest,
        split,
        pairing,
        pairs: selection.pairs,
        morphs: batch.records,
        morph_dir,
        verification,
        vulnerability: report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MadSummary {
    pub extractor: String,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_accuracy: f64,
    pub test_eer_percent: f64,
    pub mode: OperatingMode,
    pub bpcer_at_apcer: Vec<iso::BpcerAtApcer>,
}

/// Trains one detector on `train_src` (train and dev partitions) and
/// evaluates it on the test partition of `test_src`.
pub fn run_mad_stage(
    extractor: &ExtractorConfig,
    cfg: &RunConfig,
    train_src: &DataStage,
    test_src: &DataStage,
    out: &Path,
) -> Result<MadSummary> {
    let samples = |src: &DataStage, part| mad_samples(&src.manifest, &src.split, &src.morphs, &src.morph_dir, part);
    let train = extract_samples(extractor, &samples(train_src, Partition::Train))?;
    let dev = extract_samples(extractor, &samples(train_src, Partition::Dev))?;
    let test = extract_samples(extractor, &samples(test_src, Partition::Test))?;
    if cfg.write_features {
        write_features(extractor, &train, &out.join("features_train.txt"))?;
        write_features(extractor, &dev, &out.join("features_dev.txt"))?;
        write_features(extractor, &test, &out.join("features_test.txt"))?;
    }

    let feats: Vec<_> = train.iter().map(|r| r.feature.clone()).collect();
    let labels: Vec<Label> = train.iter().map(|r| r.label).collect();
    let mut model = mad::train_svm(extractor, &feats, &labels, cfg.train)?;
    let train_scores = score_rows(&model, &train)?;
    let train_accuracy = decision_accuracy(&train_scores);

    let dev_scores = score_rows(&model, &dev)?;
    iso::write_score_set(&dev_scores, &out.join("scores_dev.txt"))?;
    let dev_labeled: Vec<(Label, f64)> = dev_scores.iter().map(|r| (r.label, r.score)).collect();
    let mut mode = cfg.operating_mode;
    match mad::select_operating_thresholds(&model, &dev_labeled, &cfg.apcer_targets) {
        Ok(m) => model = m,
        Err(e) => {
            log::warn!("{}: no development thresholds ({e}); reporting direct operating points", extractor.id());
            mode = OperatingMode::Direct;
        }
    }
    model.save(&out.join("model.txt"))?;

    let test_scores = score_rows(&model, &test)?;
    iso::write_score_set(&test_scores, &out.join("scores_test.txt"))?;
    let set = DetectionScoreSet::from_labeled(&test_scores.iter().map(|r| (r.label, r.score)).collect::<Vec<_>>())?;
    let dev_thr: Vec<(f64, f64)> = model.thresholds.iter().map(|t| (t.apcer_target, t.threshold)).collect();
    let report = det_report(&set, &cfg.apcer_targets, mode, &dev_thr)?;
    fileio::write_atomic(&out.join("det_report.json"), report.to_json().as_bytes())?;
    fileio::write_atomic(&out.join("det_table.tsv"), report.det_table().as_bytes())?;
    Ok(MadSummary {
        extractor: extractor.spec_string(),
        train_samples: train.len(),
        test_samples: test.len(),
        train_accuracy,
        test_eer_percent: report.eer_percent,
        mode,
        bpcer_at_apcer: report.bpcer_at_apcer,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub subjects: usize,
    pub split_sizes: [usize; 3],
    pub pairing_tau: f64,
    pub pairs: usize,
    pub morphs: usize,
    pub verification_tau: f64,
    pub fmmpmr_percent: f64,
    pub mmpmr_percent: f64,
}

impl StageSummary {
    fn of(s: &DataStage) -> Self {
        Self {
            subjects: s.manifest.subjects.len(),
            split_sizes: s.split.sizes(),
            pairing_tau: s.pairing.tau,
            pairs: s.pairs.len(),
            morphs: s.morphs.len(),
            verification_tau: s.verification.tau,
            fmmpmr_percent: s.vulnerability.fmmpmr_percent,
            mmpmr_percent: s.vulnerability.mmpmr_percent,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub seed: u64,
    pub comparator: String,
    pub train_data: StageSummary,
    /// Only in cross mode.
    pub test_data: Option<StageSummary>,
    pub mad: Vec<MadSummary>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    parse_manifest(
        path,
        ManifestOptions {
            check_files: false,
            ..Default::default()
        },
    )
}

/// Runs every stage and writes `summary.json` under `cfg.output`.
pub fn run<C: FaceComparator>(cfg: &RunConfig, comparator: &C) -> Result<RunSummary> {
    cfg.validate()?;
    let out = &cfg.output;
    let (train_src, test_src) = match cfg.mode {
        ExperimentMode::Intra => {
            let m = load_manifest(cfg.manifest.as_deref().expect("validated"))?;
            crate::dataset::validate_files(&m)?;
            (run_data_stage(m, cfg, comparator, out)?, None)
        }
        ExperimentMode::Cross => {
            let a = load_manifest(cfg.train_manifest.as_deref().expect("validated"))?;
            let b = load_manifest(cfg.test_manifest.as_deref().expect("validated"))?;
            check_cross_disjoint(&a, &b)?;
            crate::dataset::validate_files(&a)?;
            crate::dataset::validate_files(&b)?;
            let a = run_data_stage(a, cfg, comparator, &out.join("train_data"))?;
            let b = run_data_stage(b, cfg, comparator, &out.join("test_data"))?;
            (a, Some(b))
        }
    };
    let test_ref = test_src.as_ref().unwrap_or(&train_src);
    let mut mad = Vec::new();
    for ext in &cfg.extractors {
        let dir = out.join("mad").join(ext.id().as_str());
        let s = run_mad_stage(ext, cfg, &train_src, test_ref, &dir)?;
        log::info!("{}: train accuracy {:.3}, test D-EER {:.2}%", s.extractor, s.train_accuracy, s.test_eer_percent);
        mad.push(s);
    }
    let summary = RunSummary {
        mode: cfg.mode.as_str().to_string(),
        seed: cfg.seed,
        comparator: comparator.name().to_string(),
        train_data: StageSummary::of(&train_src),
        test_data: test_src.as_ref().map(StageSummary::of),
        mad,
    };
    fileio::write_atomic(&out.join("summary.json"), summary.to_json().as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(ids: &[&str]) -> DatasetManifest {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let text: String = ids
            .iter()
            .map(|id| format!("{id};F;1;20;{id}.png;{id}.txt\n"))
            .collect();
        std::fs::write(&p, text).unwrap();
        load_manifest(&p).unwrap()
    }

    #[test]
    fn cross_guard() {
        check_cross_disjoint(&manifest(&["a", "b"]), &manifest(&["c"])).unwrap();
        let e = check_cross_disjoint(&manifest(&["a", "b"]), &manifest(&["c", "b"])).unwrap_err();
        assert!(matches!(e, Error::Protocol(_)));
    }

    #[test]
    fn accuracy_counts_sides() {
        let r = |label, score| ScoreRecord { id: String::new(), label, score };
        let s = [r(Label::Attack, 0.5), r(Label::Attack, -0.1), r(Label::BonaFide, -2.0), r(Label::BonaFide, 0.0)];
        assert_eq!(decision_accuracy(&s), 0.5);
    }
}
