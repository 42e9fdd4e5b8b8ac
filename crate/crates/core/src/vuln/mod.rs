//! Verification threshold calibration and morph vulnerability rates.

mod calibrate;
mod metrics;
mod report;
mod score;
mod table;

pub use calibrate::{calibrate_threshold, impostor_scores, CalibrationResult};
pub use metrics::{compute_fmmpmr, compute_mmpmr, fully_mated_attempts, mated_morphs};
pub use report::{alpha_of_morph_id, build_vulnerability_report, split_by_alpha, AlphaRow, ScatterPoint, VulnerabilityReport};
pub use score::{score_morphs, ScoringOutcome};
pub use table::{ScoreEntry, VulnerabilityScoreTable};
