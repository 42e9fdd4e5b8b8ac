//! Morphing attack detection: texture descriptors, a linear SVM and
//! development-set operating thresholds.

mod bsif;
mod hog;
mod lbp;
mod model;
mod svm;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use bsif::{bsif_codes, extract_bsif, generate_default_filterbank, FilterBank};
pub use hog::{cell_histograms, extract_hog, HogConfig};
pub use lbp::{extract_lbp, lbp_code, uniform_table, LbpMode};
pub use model::{mad_score, select_operating_thresholds, train_svm, MadModel, OperatingThreshold, TrainOptions};
pub use svm::{train_linear_svm, LinearSvm};

use crate::error::{Error, Result};
use crate::fileio;
use crate::image::RasterImage;
use crate::iso::Label;

/// Side of the square gray image every detector works on.
pub const PREPROCESS_SIZE: usize = 256;

/// Gray conversion followed by a bilinear resize to 256x256.
pub fn preprocess(image: &RasterImage) -> Result<RasterImage> {
    image.to_gray().resize_bilinear(PREPROCESS_SIZE, PREPROCESS_SIZE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtractorId {
    Lbp,
    Bsif,
    Hog,
}

impl ExtractorId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorId::Lbp => "lbp",
            ExtractorId::Bsif => "bsif",
            ExtractorId::Hog => "hog",
        }
    }
}

impl FromStr for ExtractorId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lbp" => Ok(ExtractorId::Lbp),
            "bsif" => Ok(ExtractorId::Bsif),
            "hog" => Ok(ExtractorId::Hog),
            other => Err(format!("unknown extractor `{other}` (expected lbp|bsif|hog)")),
        }
    }
}

impl fmt::Display for ExtractorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a BSIF filter bank comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BankSource {
    Generated { n: usize, size: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtractorConfig {
    Lbp { grid: usize, mode: LbpMode },
    Bsif { grid: usize, source: BankSource, bank: FilterBank },
    Hog(HogConfig),
}

impl ExtractorConfig {
    pub fn default_for(id: ExtractorId) -> Result<Self> {
        Ok(match id {
            ExtractorId::Lbp => ExtractorConfig::Lbp {
                grid: 4,
                mode: LbpMode::Full256,
            },
            ExtractorId::Bsif => Self::bsif_generated(4, 8, 11, 0)?,
            ExtractorId::Hog => ExtractorConfig::Hog(HogConfig::default()),
        })
    }

    pub fn bsif_generated(grid: usize, n: usize, size: usize, seed: u64) -> Result<Self> {
        Ok(ExtractorConfig::Bsif {
            grid,
            source: BankSource::Generated { n, size, seed },
            bank: generate_default_filterbank(n, size, seed)?,
        })
    }

    pub fn bsif_from_file(grid: usize, path: &Path) -> Result<Self> {
        Ok(ExtractorConfig::Bsif {
            grid,
            source: BankSource::File(path.to_path_buf()),
            bank: FilterBank::load(path)?,
        })
    }

    pub fn id(&self) -> ExtractorId {
        match self {
            ExtractorConfig::Lbp { .. } => ExtractorId::Lbp,
            ExtractorConfig::Bsif { .. } => ExtractorId::Bsif,
            ExtractorConfig::Hog(_) => ExtractorId::Hog,
        }
    }

    /// Parameters as `name key=value ...`; parsed back by [`ExtractorConfig::parse`].
    pub fn spec_string(&self) -> String {
        match self {
            ExtractorConfig::Lbp { grid, mode } => format!("lbp grid={grid} mode={}", mode.as_str()),
            ExtractorConfig::Bsif { grid, source, .. } => match source {
                BankSource::Generated { n, size, seed } => {
                    format!("bsif grid={grid} filters={n} size={size} seed={seed}")
                }
                BankSource::File(p) => format!("bsif grid={grid} bank={}", p.display()),
            },
            ExtractorConfig::Hog(c) => format!(
                "hog cell={} block={} stride={} bins={}",
                c.cell, c.block, c.stride, c.bins
            ),
        }
    }

    /// Identifies the feature space: two configurations with the same
    /// digest produce comparable vectors.
    pub fn digest(&self) -> String {
        let base = match self {
            ExtractorConfig::Bsif { grid, bank, .. } => format!(
                "bsif grid={grid} filters={} size={} bank={:016x}",
                bank.n_filters(),
                bank.size(),
                bank.fingerprint()
            ),
            other => other.spec_string(),
        };
        format!("{base} input={PREPROCESS_SIZE}")
    }

    pub fn parse(spec: &str) -> Result<Self> {
        let mut tokens = spec.split_whitespace();
        let id: ExtractorId = tokens
            .next()
            .ok_or_else(|| Error::Config("empty extractor specification".into()))?
            .parse()
            .map_err(Error::Config)?;
        let mut kv = std::collections::BTreeMap::new();
        for t in tokens {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, found `{t}`")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let num = |k: &str, default: usize| -> Result<usize> {
            kv.get(k).map_or(Ok(default), |v| {
                v.parse().map_err(|_| Error::Config(format!("invalid {k} `{v}`")))
            })
        };
        Ok(match id {
            ExtractorId::Lbp => ExtractorConfig::Lbp {
                grid: num("grid", 4)?,
                mode: kv
                    .get("mode")
                    .map_or(Ok(LbpMode::Full256), |m| m.parse())
                    .map_err(Error::Config)?,
            },
            ExtractorId::Bsif => {
                let grid = num("grid", 4)?;
                match kv.get("bank") {
                    Some(p) => Self::bsif_from_file(grid, Path::new(p))?,
                    None => Self::bsif_generated(grid, num("filters", 8)?, num("size", 11)?, num("seed", 0)? as u64)?,
                }
            }
            ExtractorId::Hog => ExtractorConfig::Hog(HogConfig {
                cell: num("cell", 8)?,
                block: num("block", 2)?,
                stride: num("stride", 1)?,
                bins: num("bins", 9)?,
            }),
        })
    }

    /// Extracts from an image that has already been through [`preprocess`].
    pub fn extract_preprocessed(&self, image: &RasterImage) -> Result<FeatureVector> {
        let values = match self {
            ExtractorConfig::Lbp { grid, mode } => extract_lbp(image, *grid, *mode)?,
            ExtractorConfig::Bsif { grid, bank, .. } => extract_bsif(image, bank, *grid)?,
            ExtractorConfig::Hog(c) => extract_hog(image, c)?,
        };
        Ok(FeatureVector {
            values,
            extractor: self.id(),
            config_digest: self.digest(),
        })
    }

    pub fn extract(&self, image: &RasterImage) -> Result<FeatureVector> {
        self.extract_preprocessed(&preprocess(image)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub extractor: ExtractorId,
    pub config_digest: String,
}

/// One row of a feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub id: String,
    pub label: Label,
    pub feature: FeatureVector,
}

/// Feature file: `# extractor=<spec>` and `# digest=<digest>` headers, then
/// `id;label;v1,v2,...` rows.
pub fn write_features(config: &ExtractorConfig, rows: &[LabeledFeature], path: &Path) -> Result<()> {
    let mut out = format!("# extractor={}\n# digest={}\n", config.spec_string(), config.digest());
    for r in rows {
        if r.feature.config_digest != config.digest() {
            return Err(Error::Contract(format!("feature `{}` has a foreign config digest", r.id)));
        }
        let vals: Vec<String> = r.feature.values.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{};{};{}\n", r.id, r.label, vals.join(",")));
    }
    fileio::write_atomic(path, out.as_bytes())
}

pub fn read_features(path: &Path) -> Result<(ExtractorConfig, Vec<LabeledFeature>)> {
    let text = fileio::read_to_string(path)?;
    let mut spec = None;
    let mut digest = None;
    for l in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(v) = l.strip_prefix("# extractor=") {
            spec = Some(v.trim().to_string());
        } else if let Some(v) = l.strip_prefix("# digest=") {
            digest = Some(v.trim().to_string());
        }
    }
    let spec = spec.ok_or_else(|| Error::parse(path, 1, "missing `# extractor=` header"))?;
    let config = ExtractorConfig::parse(&spec)?;
    if let Some(d) = digest {
        if d != config.digest() {
            return Err(Error::Integrity(format!(
                "{}: stored digest `{d}` does not match extractor `{spec}`",
                path.display()
            )));
        }
    }
    let mut rows = Vec::new();
    let mut dim = None;
    for (line, l) in fileio::content_lines(&text) {
        let f = fileio::fields(path, line, l, 3)?;
        let values: Vec<f64> = f[2]
            .split(',')
            .map(|v| fileio::parse_f64(path, line, v, "feature value"))
            .collect::<Result<_>>()?;
        if *dim.get_or_insert(values.len()) != values.len() {
            return Err(Error::parse(path, line, "inconsistent feature dimension"));
        }
        rows.push(LabeledFeature {
            id: f[0].to_string(),
            label: f[1].parse().map_err(|e: String| Error::parse(path, line, e))?,
            feature: FeatureVector {
                values,
                extractor: config.id(),
                config_digest: config.digest(),
            },
        });
    }
    Ok((config, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocess_cases() {
        let gray = RasterImage::from_fn_gray(256, 256, |x, y| (x ^ y) as u8).unwrap();
        assert_eq!(preprocess(&gray).unwrap(), gray);

        let red = RasterImage::new(10, 7, 3, [255u8, 0, 0].repeat(70)).unwrap();
        let p = preprocess(&red).unwrap();
        assert_eq!((p.width(), p.height(), p.channels()), (256, 256, 1));
        assert!(p.samples().iter().all(|&v| v == 76));

        let big = RasterImage::filled(512, 512, 1, 131).unwrap();
        assert!(preprocess(&big).unwrap().samples().iter().all(|&v| v == 131));
    }

    #[test]
    fn spec_strings_roundtrip() {
        for id in [ExtractorId::Lbp, ExtractorId::Bsif, ExtractorId::Hog] {
            let c = ExtractorConfig::default_for(id).unwrap();
            let back = ExtractorConfig::parse(&c.spec_string()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.digest(), c.digest());
        }
        let c = ExtractorConfig::parse("lbp grid=8 mode=uniform59").unwrap();
        assert_eq!(c, ExtractorConfig::Lbp { grid: 8, mode: LbpMode::Uniform59 });
        assert!(ExtractorConfig::parse("sift").is_err());
        assert!(ExtractorConfig::parse("bsif size=4").is_err());
    }

    #[test]
    fn feature_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExtractorConfig::Lbp { grid: 2, mode: LbpMode::Uniform59 };
        let img = RasterImage::from_fn_gray(40, 40, |x, y| ((x * 31 + y * 17) % 256) as u8).unwrap();
        let f = cfg.extract(&img).unwrap();
        let rows = vec![
            LabeledFeature { id: "a".into(), label: Label::Attack, feature: f.clone() },
            LabeledFeature { id: "b".into(), label: Label::BonaFide, feature: f },
        ];
        let p = dir.path().join("f.txt");
        write_features(&cfg, &rows, &p).unwrap();
        let (back_cfg, back) = read_features(&p).unwrap();
        assert_eq!(back_cfg, cfg);
        assert_eq!(back, rows);
    }
}
