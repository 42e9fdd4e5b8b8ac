use std::path::Path;

use rayon::prelude::*;

use super::{ScoreEntry, VulnerabilityScoreTable};
use crate::comparator::FaceComparator;
use crate::dataset::DatasetManifest;
use crate::error::Result;
use crate::image::RasterImage;
use crate::morph::MorphRecord;

/// Scores and exclusions produced by [`score_morphs`].
#[derive(Debug)]
pub struct ScoringOutcome {
    pub table: VulnerabilityScoreTable,
    /// `(morph_id, reason)` for morphs left out of the table.
    pub excluded: Vec<(String, String)>,
}

fn probe_paths(manifest: &DatasetManifest, subject: &str, sessions: &[u32]) -> Vec<std::path::PathBuf> {
    manifest
        .subject(subject)
        .map(|s| {
            sessions
                .iter()
                .filter_map(|&i| s.session(i))
                .map(|e| manifest.resolve(&e.image_path))
                .collect()
        })
        .unwrap_or_default()
}

/// Compares every morph against the probe images of both contributing
/// subjects. Attempt `p` uses the `p`-th available probe session of each
/// subject; with unequal probe counts the surplus is ignored. Morph paths
/// are resolved against `morph_root`. Morphs whose image or probes cannot be
/// loaded are excluded and reported.
pub fn score_morphs<C: FaceComparator>(
    morphs: &[MorphRecord],
    morph_root: &Path,
    manifest: &DatasetManifest,
    comparator: &C,
    probe_sessions: &[u32],
) -> Result<ScoringOutcome> {
    let results: Vec<(String, Result<Vec<ScoreEntry>>)> = morphs
        .par_iter()
        .map(|m| {
            let id = m.morph_id();
            let run = || -> Result<Vec<ScoreEntry>> {
                let a = probe_paths(manifest, &m.pair.subject_a, probe_sessions);
                let b = probe_paths(manifest, &m.pair.subject_b, probe_sessions);
                let p = a.len().min(b.len());
                if p == 0 {
                    return Err(crate::Error::Integrity(format!(
                        "no probe image for {} among sessions {probe_sessions:?}",
                        if a.is_empty() { &m.pair.subject_a } else { &m.pair.subject_b }
                    )));
                }
                if a.len() != b.len() {
                    log::warn!("morph {id}: unequal probe counts {} / {}, using {p} attempts", a.len(), b.len());
                }
                let reference = comparator.enrol(&RasterImage::load(&morph_root.join(&m.output_path))?)?;
                let mut out = Vec::with_capacity(2 * p);
                for attempt in 0..p {
                    for (k, probes) in [&a, &b].into_iter().enumerate() {
                        let probe = comparator.enrol_path(&probes[attempt])?;
                        out.push(ScoreEntry {
                            morph_id: id.clone(),
                            attempt: attempt as u32 + 1,
                            subject: k as u32 + 1,
                            score: comparator.compare(&reference, &probe),
                        });
                    }
                }
                Ok(out)
            };
            let r = run();
            (id, r)
        })
        .collect();
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for (id, r) in results {
        match r {
            Ok(e) => entries.extend(e),
            Err(e) => {
                log::warn!("morph {id} excluded: {e}");
                excluded.push((id, e.to_string()));
            }
        }
    }
    Ok(ScoringOutcome {
        table: VulnerabilityScoreTable::new(entries, 2)?,
        excluded,
    })
}
