//! Dataset protocol: manifests, subject splits and morph pair selection.

mod manifest;
mod pairs;
mod split;

pub use manifest::{parse_manifest, validate_files, BinLabel, DatasetManifest, Gender, ManifestOptions, SessionEntry, SubjectRecord};
pub use pairs::{greedy_pairs, read_pairs, select_pairs, write_pairs, MorphPair, PairCandidate, PairSelection};
pub use split::{apportion, read_split, split_dataset, split_with_counts, write_split, Partition, ProtocolSplit};

/// Session used as the morphing source.
pub const MORPH_SESSION: u32 = 1;
/// Session used as bona fide sample for detection.
pub const BONA_FIDE_SESSION: u32 = 2;
/// Session used as probe for vulnerability analysis.
pub const PROBE_SESSION: u32 = 3;
