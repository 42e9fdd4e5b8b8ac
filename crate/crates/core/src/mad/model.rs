use std::path::Path;

use super::svm::train_linear_svm;
use super::{ExtractorConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::fileio;
use crate::iso::{self, DetectionScoreSet, Label};

const MODEL_MAGIC: &str = "morphage-mad-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub c: f64,
    pub seed: u64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            seed: 0,
            max_epochs: 1000,
            tol: 1e-3,
        }
    }
}

/// Decision threshold chosen on development scores for one APCER target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingThreshold {
    /// Percent.
    pub apcer_target: f64,
    pub threshold: f64,
    pub dev_apcer: f64,
    pub dev_bpcer: f64,
}

/// Trained detector: standardization statistics, linear weights and
/// development-calibrated thresholds. Attack is the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct MadModel {
    pub extractor: ExtractorConfig,
    pub config_digest: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub thresholds: Vec<OperatingThreshold>,
    /// Dual objective per epoch; not persisted.
    pub objective_history: Vec<f64>,
}

impl MadModel {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn threshold_for(&self, apcer_target: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| t.apcer_target == apcer_target)
            .map(|t| t.threshold)
    }

    pub fn standardize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = format!(
            "{MODEL_MAGIC} {MODEL_VERSION}\nextractor={}\ndigest={}\ndim={}\nbias={}\nmean={}\nstd={}\nweights={}\n",
            self.extractor.spec_string(),
            self.config_digest,
            self.dimension(),
            self.bias,
            join(&self.mean),
            join(&self.std),
            join(&self.weights),
        );
        for t in &self.thresholds {
            out.push_str(&format!(
                "threshold={};{};{};{}\n",
                t.apcer_target, t.threshold, t.dev_apcer, t.dev_bpcer
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fileio::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<MadModel> {
        let text = fileio::read_to_string(path)?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, l)) if l == format!("{MODEL_MAGIC} {MODEL_VERSION}") => {}
            _ => return Err(Error::parse(path, 1, format!("expected `{MODEL_MAGIC} {MODEL_VERSION}` header"))),
        }
        let mut extractor = None;
        let mut digest = None;
        let mut dim = None;
        let mut bias = None;
        let mut mean = None;
        let mut std = None;
        let mut weights = None;
        let mut thresholds = Vec::new();
        let vec_of = |line: usize, v: &str| -> Result<Vec<f64>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| fileio::parse_f64(path, line, x, "value")).collect()
        };
        for (line, l) in lines.filter(|(_, l)| !l.is_empty()) {
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
            match key {
                "extractor" => extractor = Some(ExtractorConfig::parse(value)?),
                "digest" => digest = Some(value.to_string()),
                "dim" => dim = Some(value.parse::<usize>().map_err(|_| Error::parse(path, line, "invalid dim"))?),
                "bias" => bias = Some(fileio::parse_f64(path, line, value, "bias")?),
                "mean" => mean = Some(vec_of(line, value)?),
                "std" => std = Some(vec_of(line, value)?),
                "weights" => weights = Some(vec_of(line, value)?),
                "threshold" => {
                    let f = fileio::fields(path, line, value, 4)?;
                    // thresholds may be infinite sentinels
                    let num = |s: &str| -> Result<f64> {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| !v.is_nan())
                            .ok_or_else(|| Error::parse(path, line, format!("invalid number `{s}`")))
                    };
                    thresholds.push(OperatingThreshold {
                        apcer_target: num(f[0])?,
                        threshold: num(f[1])?,
                        dev_apcer: num(f[2])?,
                        dev_bpcer: num(f[3])?,
                    });
                }
                other => return Err(Error::parse(path, line, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::parse(path, 0, format!("missing `{k}`"));
        let extractor = extractor.ok_or_else(|| missing("extractor"))?;
        let config_digest = digest.ok_or_else(|| missing("digest"))?;
        if config_digest != extractor.digest() {
            return Err(Error::Integrity(format!(
                "model digest `{config_digest}` does not match its extractor configuration"
            )));
        }
        let dim = dim.ok_or_else(|| missing("dim"))?;
        let (mean, std, weights) = (
            mean.ok_or_else(|| missing("mean"))?,
            std.ok_or_else(|| missing("std"))?,
            weights.ok_or_else(|| missing("weights"))?,
        );
        if mean.len() != dim || std.len() != dim || weights.len() != dim {
            return Err(Error::Integrity(format!("model vectors do not all have dimension {dim}")));
        }
        Ok(MadModel {
            extractor,
            config_digest,
            mean,
            std,
            weights,
            bias: bias.ok_or_else(|| missing("bias"))?,
            thresholds,
            objective_history: Vec::new(),
        })
    }
}

/// Z-scores the training features (zero-variance dimensions keep std 1)
/// and fits a linear SVM with attacks as the positive class.
pub fn train_svm(
    extractor: &ExtractorConfig,
    features: &[FeatureVector],
    labels: &[Label],
    options: TrainOptions,
) -> Result<MadModel> {
    if features.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} features but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let has = |l: Label| labels.contains(&l);
    if !has(Label::Attack) || !has(Label::BonaFide) {
        return Err(Error::Training("training set must contain both bona fide and attack samples".into()));
    }
    let digest = extractor.digest();
    if let Some(f) = features.iter().find(|f| f.config_digest != digest) {
        return Err(Error::Contract(format!(
            "feature digest `{}` does not match extractor `{digest}`",
            f.config_digest
        )));
    }
    let dim = features[0].values.len();
    if features.iter().any(|f| f.values.len() != dim) {
        return Err(Error::Contract("inconsistent feature dimensions".into()));
    }

    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        mean.iter_mut().zip(&f.values).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; dim];
    for f in features {
        std.iter_mut()
            .zip(f.values.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    for (j, s) in std.iter_mut().enumerate() {
        let first = features[0].values[j];
        let constant = features.iter().all(|f| f.values[j] == first);
        *s = if constant { 1.0 } else { (*s / n).sqrt() };
    }

    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            f.values
                .iter()
                .zip(mean.iter().zip(&std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if *l == Label::Attack { 1.0 } else { -1.0 })
        .collect();
    let svm = train_linear_svm(&x, &y, options.c, options.max_epochs, options.tol, options.seed)?;
    Ok(MadModel {
        extractor: extractor.clone(),
        config_digest: digest,
        mean,
        std,
        weights: svm.weights,
        bias: svm.bias,
        thresholds: Vec::new(),
        objective_history: svm.objective_history,
    })
}

/// `w . standardize(x) + b`; higher is more attack-like.
pub fn mad_score(model: &MadModel, feature: &FeatureVector) -> Result<f64> {
    if feature.config_digest != model.config_digest {
        return Err(Error::Contract(format!(
            "feature digest `{}` does not match model `{}`",
            feature.config_digest, model.config_digest
        )));
    }
    if feature.values.len() != model.dimension() {
        return Err(Error::Contract(format!(
            "feature dimension {} does not match model {}",
            feature.values.len(),
            model.dimension()
        )));
    }
    let mut s = model.bias;
    for ((v, m), (sd, w)) in feature
        .values
        .iter()
        .zip(&model.mean)
        .zip(model.std.iter().zip(&model.weights))
    {
        s += w * (v - m) / sd;
    }
    Ok(s)
}

/// For each APCER target (percent) picks the development threshold with the
/// lowest BPCER among those whose APCER stays within the target.
pub fn select_operating_thresholds(model: &MadModel, dev_scores: &[(Label, f64)], apcer_targets: &[f64]) -> Result<MadModel> {
    let set = DetectionScoreSet::from_labeled(dev_scores)?;
    let mut thresholds = Vec::with_capacity(apcer_targets.len());
    for &t in apcer_targets {
        let p = iso::operating_point(&set, t)?;
        thresholds.push(OperatingThreshold {
            apcer_target: t,
            threshold: p.threshold,
            dev_apcer: p.apcer,
            dev_bpcer: p.bpcer,
        });
    }
    let mut out = model.clone();
    out.thresholds = thresholds;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mad::HogConfig;

    fn cfg() -> ExtractorConfig {
        ExtractorConfig::Hog(HogConfig::default())
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            values,
            extractor: crate::mad::ExtractorId::Hog,
            config_digest: cfg().digest(),
        }
    }

    fn toy() -> (Vec<FeatureVector>, Vec<Label>) {
        let pts = [
            ([3.0, 2.5], Label::Attack),
            ([2.5, 3.5], Label::Attack),
            ([4.0, 3.0], Label::Attack),
            ([-1.0, -2.0], Label::BonaFide),
            ([-2.0, -0.5], Label::BonaFide),
            ([-1.5, -1.5], Label::BonaFide),
        ];
        (pts.iter().map(|p| fv(p.0.to_vec())).collect(), pts.iter().map(|p| p.1).collect())
    }

    #[test]
    fn separable_toy_signs_match_labels() {
        let (f, l) = toy();
        let m = train_svm(&cfg(), &f, &l, TrainOptions::default()).unwrap();
        for (x, y) in f.iter().zip(&l) {
            let s = mad_score(&m, x).unwrap();
            assert_eq!(s > 0.0, *y == Label::Attack, "score {s}");
        }
    }

    #[test]
    fn zero_weights_score_is_bias() {
        let (f, l) = toy();
        let mut m = train_svm(&cfg(), &f, &l, TrainOptions::default()).unwrap();
        m.weights.iter_mut().for_each(|w| *w = 0.0);
        m.bias = 0.75;
        assert_eq!(mad_score(&m, &fv(m.mean.clone())).unwrap(), 0.75);
    }

    #[test]
    fn zero_variance_dimension_gets_unit_std() {
        let (mut f, l) = toy();
        f.iter_mut().for_each(|x| x.values.push(7.0));
        let m = train_svm(&cfg(), &f, &l, TrainOptions::default()).unwrap();
        assert_eq!(m.std[2], 1.0);
        assert!(m.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn single_class_and_digest_errors() {
        let (f, _) = toy();
        let l = vec![Label::Attack; f.len()];
        assert!(matches!(train_svm(&cfg(), &f, &l, TrainOptions::default()), Err(Error::Training(_))));
        let (f, l) = toy();
        let m = train_svm(&cfg(), &f, &l, TrainOptions::default()).unwrap();
        let mut other = fv(vec![0.0, 0.0]);
        other.config_digest = "lbp grid=4".into();
        assert!(matches!(mad_score(&m, &other), Err(Error::Contract(_))));
    }

    #[test]
    fn thresholds_by_exhaustive_sweep() {
        let (f, l) = toy();
        let m = train_svm(&cfg(), &f, &l, TrainOptions::default()).unwrap();
        let attack = [0.9, 0.8, 0.7, 0.1];
        let bona = [0.2, 0.3, 0.4, 0.85];
        let dev: Vec<(Label, f64)> = attack
            .iter()
            .map(|&s| (Label::Attack, s))
            .chain(bona.iter().map(|&s| (Label::BonaFide, s)))
            .collect();
        let m = select_operating_thresholds(&m, &dev, &[25.0, 100.0]).unwrap();

        // Oracle: every observed score and both sentinels, lowest BPCER with
        // APCER <= 25%, larger threshold on ties.
        let mut best: Option<(f64, f64)> = None;
        let mut cands: Vec<f64> = attack.iter().chain(&bona).copied().collect();
        cands.extend([f64::NEG_INFINITY, f64::INFINITY]);
        for &t in &cands {
            let apcer = attack.iter().filter(|&&s| s < t).count() as f64 / 4.0 * 100.0;
            let bpcer = bona.iter().filter(|&&s| s >= t).count() as f64 / 4.0 * 100.0;
            if apcer <= 25.0 && best.is_none_or(|(bt, bb)| bpcer < bb || (bpcer == bb && t > bt)) {
                best = Some((t, bpcer));
            }
        }
        let (t, b) = best.unwrap();
        assert_eq!((t, b), (0.7, 25.0));
        let op = m.thresholds[0];
        assert_eq!((op.threshold, op.dev_bpcer), (t, b));
        assert_eq!(op.dev_apcer, 25.0);

        let all = m.thresholds[1];
        assert_eq!(all.threshold, f64::INFINITY);
        assert_eq!(all.dev_bpcer, 0.0);
    }

    #[test]
    fn separated_dev_set_reaches_zero_errors() {
        let (f, l) = toy();
        let m = train_svm(&cfg(), &f, &l, TrainOptions::default()).unwrap();
        let dev = [(Label::Attack, 2.0), (Label::Attack, 3.0), (Label::BonaFide, -1.0), (Label::BonaFide, 0.5)];
        let m = select_operating_thresholds(&m, &dev, &[1.0, 5.0, 10.0]).unwrap();
        for t in &m.thresholds {
            assert_eq!((t.dev_apcer, t.dev_bpcer), (0.0, 0.0));
        }
        assert!(select_operating_thresholds(&m, &dev[..2], &[1.0]).is_err());
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (f, l) = toy();
        let m = train_svm(&cfg(), &f, &l, TrainOptions::default()).unwrap();
        let dev = [(Label::Attack, 2.0), (Label::BonaFide, 0.5)];
        let mut m = select_operating_thresholds(&m, &dev, &[1.0, 100.0]).unwrap();
        let p = dir.path().join("model.txt");
        m.save(&p).unwrap();
        let back = MadModel::load(&p).unwrap();
        m.objective_history.clear();
        assert_eq!(back, m);
    }
}
