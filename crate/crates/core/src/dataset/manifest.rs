use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fileio;
use crate::morph::LandmarkSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    F,
    M,
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "F" | "f" => Ok(Gender::F),
            "M" | "m" => Ok(Gender::M),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::F => "F",
            Gender::M => "M",
        })
    }
}

/// Age bin of a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinLabel {
    MorphAgeI,
    MorphAgeII,
    Custom(String),
}

impl FromStr for BinLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "MorphAge-I" => BinLabel::MorphAgeI,
            "MorphAge-II" => BinLabel::MorphAgeII,
            other => BinLabel::Custom(other.to_string()),
        })
    }
}

impl fmt::Display for BinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinLabel::MorphAgeI => f.write_str("MorphAge-I"),
            BinLabel::MorphAgeII => f.write_str("MorphAge-II"),
            BinLabel::Custom(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionEntry {
    pub session_index: u32,
    pub capture_age: f64,
    pub image_path: String,
    pub landmark_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub gender: Gender,
    /// Sorted by session index.
    pub sessions: Vec<SessionEntry>,
}

impl SubjectRecord {
    pub fn session(&self, index: u32) -> Option<&SessionEntry> {
        self.sessions.iter().find(|s| s.session_index == index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub subjects: Vec<SubjectRecord>,
    pub bin_label: BinLabel,
    pub landmark_count: usize,
    /// Directory that relative image and landmark paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    pub fn subject_ids(&self) -> Vec<&str> {
        self.subjects.iter().map(|s| s.subject_id.as_str()).collect()
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Serializes back into the manifest text format, with the bin and
    /// landmark-count directives in the header.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# bin={}\n# landmark_count={}\n# subject_id;gender;session_index;capture_age;image_path;landmark_path\n",
            self.bin_label, self.landmark_count
        );
        for s in &self.subjects {
            for e in &s.sessions {
                out.push_str(&format!(
                    "{};{};{};{};{};{}\n",
                    s.subject_id, s.gender, e.session_index, e.capture_age, e.image_path, e.landmark_path
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ManifestOptions {
    /// Check that every image exists and that every landmark file holds
    /// exactly `landmark_count` points while parsing.
    pub check_files: bool,
    pub default_landmark_count: usize,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        Self {
            check_files: true,
            default_landmark_count: 68,
        }
    }
}

/// Parses a `;`-separated manifest. Lines starting with `#` are comments,
/// except `# bin=<label>` and `# landmark_count=<n>` directives.
pub fn parse_manifest(path: &Path, options: ManifestOptions) -> Result<DatasetManifest> {
    let text = fileio::read_to_string(path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut bin_label = BinLabel::Custom("custom".into());
    let mut landmark_count = options.default_landmark_count;
    let mut subjects: Vec<SubjectRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen_sessions: HashSet<(String, u32)> = HashSet::new();

    for (line, raw) in text.lines().enumerate() {
        let line = line + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(comment) = l.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                match key.trim() {
                    "bin" => bin_label = value.trim().parse().expect("infallible"),
                    "landmark_count" => {
                        landmark_count = value
                            .trim()
                            .parse()
                            .ok()
                            .filter(|&n: &usize| n > 0)
                            .ok_or_else(|| Error::parse(path, line, "landmark_count must be a positive integer"))?
                    }
                    _ => {}
                }
            }
            continue;
        }
        let f = fileio::fields(path, line, l, 6)?;
        let subject_id = f[0];
        if subject_id.is_empty() {
            return Err(Error::parse(path, line, "empty subject_id"));
        }
        let gender: Gender = f[1].parse().map_err(|e: String| Error::parse(path, line, e))?;
        let session_index: u32 = f[2]
            .parse()
            .ok()
            .filter(|s| (1..=3).contains(s))
            .ok_or_else(|| Error::parse(path, line, format!("session_index `{}` not in 1..=3", f[2])))?;
        let capture_age = fileio::parse_f64(path, line, f[3], "capture_age")?;
        if f[4].is_empty() || f[5].is_empty() {
            return Err(Error::parse(path, line, "empty image or landmark path"));
        }
        if !seen_sessions.insert((subject_id.to_string(), session_index)) {
            return Err(Error::Integrity(format!(
                "line {line}: duplicate subject_id `{subject_id}` for session {session_index}"
            )));
        }
        let entry = SessionEntry {
            session_index,
            capture_age,
            image_path: f[4].to_string(),
            landmark_path: f[5].to_string(),
        };
        match index.get(subject_id) {
            Some(&i) => {
                if subjects[i].gender != gender {
                    return Err(Error::Integrity(format!(
                        "line {line}: subject `{subject_id}` declared with conflicting genders"
                    )));
                }
                subjects[i].sessions.push(entry);
            }
            None => {
                index.insert(subject_id.to_string(), subjects.len());
                subjects.push(SubjectRecord {
                    subject_id: subject_id.to_string(),
                    gender,
                    sessions: vec![entry],
                });
            }
        }
    }

    for s in &mut subjects {
        s.sessions.sort_by_key(|e| e.session_index);
        for w in s.sessions.windows(2) {
            if w[1].capture_age < w[0].capture_age {
                return Err(Error::Integrity(format!(
                    "subject `{}`: capture age decreases from session {} to {}",
                    s.subject_id, w[0].session_index, w[1].session_index
                )));
            }
        }
    }

    let manifest = DatasetManifest {
        subjects,
        bin_label,
        landmark_count,
        base_dir,
    };
    if options.check_files {
        validate_files(&manifest)?;
    }
    Ok(manifest)
}

/// Checks that every referenced image exists and every landmark file
/// holds exactly `landmark_count` points.
pub fn validate_files(manifest: &DatasetManifest) -> Result<()> {
    for s in &manifest.subjects {
        for e in &s.sessions {
            let img = manifest.resolve(&e.image_path);
            if !img.is_file() {
                return Err(Error::Integrity(format!(
                    "subject `{}` session {}: image {} not found",
                    s.subject_id,
                    e.session_index,
                    img.display()
                )));
            }
            let lm = LandmarkSet::load(&manifest.resolve(&e.landmark_path))?;
            if lm.len() != manifest.landmark_count {
                return Err(Error::Integrity(format!(
                    "subject `{}` session {}: {} landmarks, expected {}",
                    s.subject_id,
                    e.session_index,
                    lm.len(),
                    manifest.landmark_count
                )));
            }
        }
    }
    Ok(())
}
