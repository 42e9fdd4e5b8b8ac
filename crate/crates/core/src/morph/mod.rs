//! Landmark-based face morphing: triangulate the interpolated landmarks,
//! warp both faces onto them and blend.

mod delaunay;
mod landmarks;
mod warp;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use delaunay::{delaunay, in_circle, orient, TriangleMesh};
pub use landmarks::{LandmarkSet, Point};
pub use warp::{boundary_anchors, piecewise_warp, triangle_affine, Affine, WarpMesh};

use crate::dataset::{DatasetManifest, MorphPair, MORPH_SESSION};
use crate::error::{Error, Result};
use crate::fileio;
use crate::image::{round_to_u8, RasterImage};

/// Morphing factors used by default.
pub const DEFAULT_ALPHAS: [f64; 3] = [0.3, 0.5, 0.7];

/// Morphs two faces. `alpha` is the weight of the second subject:
/// landmarks `(1 - alpha) * a + alpha * b`, pixels
/// `round((1 - alpha) * warped_a + alpha * warped_b)`.
pub fn morph_pair(
    image_a: &RasterImage,
    landmarks_a: &LandmarkSet,
    image_b: &RasterImage,
    landmarks_b: &LandmarkSet,
    alpha: f64,
) -> Result<RasterImage> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Contract(format!("morphing factor {alpha} outside [0, 1]")));
    }
    if !image_a.same_shape(image_b) {
        return Err(Error::Contract(format!(
            "image shapes differ: {}x{}x{} vs {}x{}x{}",
            image_a.width(),
            image_a.height(),
            image_a.channels(),
            image_b.width(),
            image_b.height(),
            image_b.channels()
        )));
    }
    let target = landmarks_a.interpolate(landmarks_b, alpha)?;
    let mesh = WarpMesh::new(&target, image_a.width(), image_a.height())?;
    let (wa, wb) = rayon::join(|| mesh.warp(image_a, landmarks_a), || mesh.warp(image_b, landmarks_b));
    let (wa, wb) = (wa?, wb?);
    let keep = 1.0 - alpha;
    let samples = wa
        .samples()
        .iter()
        .zip(wb.samples())
        .map(|(&a, &b)| round_to_u8(keep * a as f64 + alpha * b as f64))
        .collect();
    RasterImage::new(image_a.width(), image_a.height(), image_a.channels(), samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphRecord {
    pub pair: MorphPair,
    pub alpha: f64,
    pub output_path: String,
}

impl MorphRecord {
    /// Stable identifier: `<a>__<b>__<alpha>`.
    pub fn morph_id(&self) -> String {
        morph_id(&self.pair.subject_a, &self.pair.subject_b, self.alpha)
    }
}

pub fn morph_id(a: &str, b: &str, alpha: f64) -> String {
    format!("{a}__{b}__{alpha}")
}

/// Morph job file: `subject_a;subject_b;alpha;output_path` per line.
pub fn write_jobs(records: &[MorphRecord], path: &Path) -> Result<()> {
    let mut out = String::from("# subject_a;subject_b;alpha;output_path\n");
    for r in records {
        out.push_str(&format!(
            "{};{};{};{}\n",
            r.pair.subject_a, r.pair.subject_b, r.alpha, r.output_path
        ));
    }
    fileio::write_atomic(path, out.as_bytes())
}

/// Reads a job file. Pair score and split are unknown there and default to
/// `0` and train; callers that need them should join with the pair file.
pub fn read_jobs(path: &Path) -> Result<Vec<MorphRecord>> {
    let text = fileio::read_to_string(path)?;
    fileio::content_lines(&text)
        .map(|(line, l)| {
            let f = fileio::fields(path, line, l, 4)?;
            let alpha = fileio::parse_f64(path, line, f[2], "alpha")?;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::parse(path, line, format!("alpha {alpha} outside [0, 1]")));
            }
            Ok(MorphRecord {
                pair: MorphPair {
                    subject_a: f[0].to_string(),
                    subject_b: f[1].to_string(),
                    pair_score: 0.0,
                    split: crate::dataset::Partition::Train,
                },
                alpha,
                output_path: f[3].to_string(),
            })
        })
        .collect()
}

/// Loads the image and landmarks of one subject session.
pub fn load_session(manifest: &DatasetManifest, subject: &str, session: u32) -> Result<(RasterImage, LandmarkSet)> {
    let s = manifest
        .subject(subject)
        .ok_or_else(|| Error::Integrity(format!("unknown subject `{subject}`")))?;
    let e = s
        .session(session)
        .ok_or_else(|| Error::Integrity(format!("subject `{subject}` has no session {session}")))?;
    let img = RasterImage::load(&manifest.resolve(&e.image_path))?;
    let lm = LandmarkSet::load(&manifest.resolve(&e.landmark_path))?;
    if lm.len() != manifest.landmark_count {
        return Err(Error::Integrity(format!(
            "subject `{subject}` session {session}: {} landmarks, expected {}",
            lm.len(),
            manifest.landmark_count
        )));
    }
    lm.check_within(img.width(), img.height())?;
    Ok((img, lm))
}

/// Outcome of [`generate_morphs`]: written morphs and per-job failures.
#[derive(Debug, Default)]
pub struct MorphBatch {
    pub records: Vec<MorphRecord>,
    pub failures: Vec<(String, String)>,
}

/// Morphs the morph-source session of every pair at every alpha and writes
/// PNGs named after the morph id into `out_dir`. Output paths in the
/// records are relative to `out_dir`.
pub fn generate_morphs(manifest: &DatasetManifest, pairs: &[MorphPair], alphas: &[f64], out_dir: &Path) -> Result<MorphBatch> {
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Contract(format!("morphing factor {a} outside [0, 1]")));
    }
    let jobs: Vec<(&MorphPair, f64)> = pairs
        .iter()
        .flat_map(|p| alphas.iter().map(move |&a| (p, a)))
        .collect();
    let results: Vec<(MorphRecord, Result<()>)> = jobs
        .par_iter()
        .map(|&(pair, alpha)| {
            let id = morph_id(&pair.subject_a, &pair.subject_b, alpha);
            let file = format!("{id}.png");
            let record = MorphRecord {
                pair: pair.clone(),
                alpha,
                output_path: file.clone(),
            };
            let run = || -> Result<()> {
                let (ia, la) = load_session(manifest, &pair.subject_a, MORPH_SESSION)?;
                let (ib, lb) = load_session(manifest, &pair.subject_b, MORPH_SESSION)?;
                morph_pair(&ia, &la, &ib, &lb, alpha)?.save(&out_dir.join(&file))
            };
            (record, run())
        })
        .collect();
    let mut batch = MorphBatch::default();
    for (record, r) in results {
        match r {
            Ok(()) => batch.records.push(record),
            Err(e) => {
                log::warn!("morph {} failed: {e}", record.morph_id());
                batch.failures.push((record.morph_id(), e.to_string()));
            }
        }
    }
    Ok(batch)
}

/// Resolves a job output path against the job file's directory.
pub fn resolve_output(job_file: &Path, output_path: &str) -> PathBuf {
    let p = Path::new(output_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        job_file.parent().unwrap_or(Path::new("")).join(p)
    }
}
