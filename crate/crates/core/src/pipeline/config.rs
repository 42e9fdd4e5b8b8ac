use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fileio;
use crate::iso::OperatingMode;
use crate::mad::{ExtractorConfig, ExtractorId, TrainOptions};
use crate::morph::DEFAULT_ALPHAS;

/// Experiment-I trains and tests on one age bin; Experiment-II trains on
/// one manifest and tests on another with disjoint subjects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Intra,
    Cross,
}

impl FromStr for ExperimentMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "intra" => Ok(ExperimentMode::Intra),
            "cross" => Ok(ExperimentMode::Cross),
            other => Err(format!("unknown experiment mode `{other}` (expected intra or cross)")),
        }
    }
}

impl ExperimentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentMode::Intra => "intra",
            ExperimentMode::Cross => "cross",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: ExperimentMode,
    /// Intra mode input.
    pub manifest: Option<PathBuf>,
    /// Cross mode inputs.
    pub train_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub alphas: Vec<f64>,
    pub pairing_far_target: f64,
    pub max_pairs_per_subject: usize,
    pub verification_far_target: f64,
    pub probe_sessions: Vec<u32>,
    pub extractors: Vec<ExtractorConfig>,
    /// Percent.
    pub apcer_targets: Vec<f64>,
    pub train: TrainOptions,
    pub operating_mode: OperatingMode,
    pub write_features: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: ExperimentMode::Intra,
            manifest: None,
            train_manifest: None,
            test_manifest: None,
            output: PathBuf::from("out"),
            seed: 0,
            ratios: [0.25, 0.5, 0.25],
            alphas: DEFAULT_ALPHAS.to_vec(),
            pairing_far_target: 0.001,
            max_pairs_per_subject: 4,
            verification_far_target: 0.001,
            probe_sessions: vec![crate::dataset::PROBE_SESSION],
            extractors: [ExtractorId::Lbp, ExtractorId::Bsif, ExtractorId::Hog]
                .into_iter()
                .map(|id| ExtractorConfig::default_for(id).expect("default extractors are valid"))
                .collect(),
            apcer_targets: vec![1.0, 5.0, 10.0],
            train: TrainOptions::default(),
            operating_mode: OperatingMode::DevCalibrated,
            write_features: true,
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("{key}: invalid value `{}`", t.trim()))))
        .collect()
}

fn one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: invalid value `{v}`")))
}

impl RunConfig {
    /// Parses `key = value` lines grouped under `[section]` headers. Relative
    /// paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut section = String::new();
        for (line, l) in fileio::content_lines(text) {
            if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`")))?;
            let key = format!("{section}.{}", k.trim());
            if values.insert(key.clone(), (line, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {line}: `{key}` set twice")));
            }
        }
        let mut cfg = RunConfig::default();
        let path = |v: &str| base_dir.join(v);
        for (key, (line, v)) in &values {
            let v = v.as_str();
            match key.as_str() {
                "data.manifest" => cfg.manifest = Some(path(v)),
                "data.train_manifest" => cfg.train_manifest = Some(path(v)),
                "data.test_manifest" => cfg.test_manifest = Some(path(v)),
                "data.output" => cfg.output = path(v),
                "protocol.mode" => cfg.mode = v.parse().map_err(Error::Config)?,
                "protocol.seed" => cfg.seed = one(key, v)?,
                "protocol.ratios" => {
                    let r: Vec<f64> = list(key, v)?;
                    cfg.ratios = r
                        .try_into()
                        .map_err(|_| Error::Config(format!("{key}: expected three ratios")))?;
                }
                "pairs.far_target" => cfg.pairing_far_target = one(key, v)?,
                "pairs.max_per_subject" => cfg.max_pairs_per_subject = one(key, v)?,
                "morph.alphas" => cfg.alphas = list(key, v)?,
                "vulnerability.far_target" => cfg.verification_far_target = one(key, v)?,
                "vulnerability.probe_sessions" => cfg.probe_sessions = list(key, v)?,
                "mad.extractors" => {
                    cfg.extractors = v
                        .split(';')
                        .map(|s| ExtractorConfig::parse(&resolve_bank(s.trim(), base_dir)))
                        .collect::<Result<_>>()?
                }
                "mad.apcer_targets" => cfg.apcer_targets = list(key, v)?,
                "mad.c" => cfg.train.c = one(key, v)?,
                "mad.seed" => cfg.train.seed = one(key, v)?,
                "mad.max_epochs" => cfg.train.max_epochs = one(key, v)?,
                "mad.tol" => cfg.train.tol = one(key, v)?,
                "mad.operating_mode" => cfg.operating_mode = v.parse().map_err(Error::Config)?,
                "mad.write_features" => cfg.write_features = one(key, v)?,
                _ => return Err(Error::Config(format!("line {line}: unknown key `{key}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fileio::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Checks value ranges, mode requirements and that inputs exist.
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("at least one alpha required".into()));
        }
        for (name, far) in [("pairing", self.pairing_far_target), ("verification", self.verification_far_target)] {
            if !(far > 0.0 && far <= 1.0) {
                return Err(Error::Config(format!("{name} FAR target {far} outside (0, 1]")));
            }
        }
        if self.probe_sessions.is_empty() {
            return Err(Error::Config("at least one probe session required".into()));
        }
        if self.extractors.is_empty() {
            return Err(Error::Config("at least one extractor required".into()));
        }
        if let Some(t) = self.apcer_targets.iter().find(|t| !(0.0..=100.0).contains(*t)) {
            return Err(Error::Config(format!("APCER target {t}% outside [0, 100]")));
        }
        let needed: Vec<(&str, &Option<PathBuf>)> = match self.mode {
            ExperimentMode::Intra => vec![("manifest", &self.manifest)],
            ExperimentMode::Cross => vec![("train_manifest", &self.train_manifest), ("test_manifest", &self.test_manifest)],
        };
        for (name, p) in needed {
            let p = p
                .as_ref()
                .ok_or_else(|| Error::Config(format!("{} mode requires `{name}`", self.mode.as_str())))?;
            if !p.is_file() {
                return Err(Error::Config(format!("{name} `{}` does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Makes a relative `bank=` path in an extractor spec absolute.
fn resolve_bank(spec: &str, base_dir: &Path) -> String {
    spec.split_whitespace()
        .map(|t| match t.strip_prefix("bank=") {
            Some(p) => format!("bank={}", base_dir.join(p).display()),
            None => t.to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}
