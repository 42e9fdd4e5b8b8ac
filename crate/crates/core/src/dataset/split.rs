use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetManifest;
use crate::error::{Error, Result};
use crate::fileio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Dev, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Disjoint train/dev/test subject sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSplit {
    pub train_ids: BTreeSet<String>,
    pub dev_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl ProtocolSplit {
    pub fn ids(&self, part: Partition) -> &BTreeSet<String> {
        match part {
            Partition::Train => &self.train_ids,
            Partition::Dev => &self.dev_ids,
            Partition::Test => &self.test_ids,
        }
    }

    pub fn partition_of(&self, id: &str) -> Option<Partition> {
        Partition::ALL.into_iter().find(|&p| self.ids(p).contains(id))
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train_ids.len(), self.dev_ids.len(), self.test_ids.len()]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "seed={}\nratios={},{},{}\n",
            self.seed, self.ratios[0], self.ratios[1], self.ratios[2]
        );
        for p in Partition::ALL {
            out.push_str(&format!("[{p}]\n"));
            for id in self.ids(p) {
                out.push_str(id);
                out.push('\n');
            }
        }
        out
    }
}

fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Contract(format!("ratios must be non-negative, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("ratios must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Largest-remainder apportionment of `n` items over `ratios`. Equal
/// remainders go to the earlier class.
pub fn apportion(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    check_ratios(ratios)?;
    let nonzero = ratios.iter().filter(|&&r| r > 0.0).count();
    if n < nonzero {
        return Err(Error::Sizing(format!(
            "{n} subjects cannot fill {nonzero} non-empty partitions"
        )));
    }
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, q) in counts.iter_mut().zip(&quotas) {
        *c = q.floor() as usize;
    }
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

fn shuffled_ids(manifest: &DatasetManifest, seed: u64) -> Vec<String> {
    let mut ids: Vec<String> = manifest.subjects.iter().map(|s| s.subject_id.clone()).collect();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids
}

fn assign(ids: Vec<String>, counts: [usize; 3], seed: u64, ratios: [f64; 3]) -> ProtocolSplit {
    let mut it = ids.into_iter();
    let train_ids = it.by_ref().take(counts[0]).collect();
    let dev_ids = it.by_ref().take(counts[1]).collect();
    let test_ids = it.collect();
    ProtocolSplit {
        train_ids,
        dev_ids,
        test_ids,
        seed,
        ratios,
    }
}

/// Seeded shuffle of the subject ids followed by largest-remainder sizing.
pub fn split_dataset(manifest: &DatasetManifest, ratios: [f64; 3], seed: u64) -> Result<ProtocolSplit> {
    let counts = apportion(manifest.subjects.len(), ratios)?;
    Ok(assign(shuffled_ids(manifest, seed), counts, seed, ratios))
}

/// Seeded split with explicit partition sizes, for protocols that publish
/// counts rather than ratios.
pub fn split_with_counts(manifest: &DatasetManifest, counts: [usize; 3], seed: u64) -> Result<ProtocolSplit> {
    let n = manifest.subjects.len();
    let total: usize = counts.iter().sum();
    if total != n {
        return Err(Error::Sizing(format!("counts {counts:?} sum to {total}, manifest has {n} subjects")));
    }
    let ratios = counts.map(|c| c as f64 / n as f64);
    Ok(assign(shuffled_ids(manifest, seed), counts, seed, ratios))
}

pub fn write_split(split: &ProtocolSplit, path: &Path) -> Result<()> {
    fileio::write_atomic(path, split.to_text().as_bytes())
}

pub fn read_split(path: &Path) -> Result<ProtocolSplit> {
    let text = fileio::read_to_string(path)?;
    let mut seed = None;
    let mut ratios = None;
    let mut sets: [BTreeSet<String>; 3] = Default::default();
    let mut current: Option<usize> = None;
    for (line, l) in fileio::content_lines(&text) {
        if let Some(v) = l.strip_prefix("seed=") {
            seed = Some(v.trim().parse::<u64>().map_err(|_| Error::parse(path, line, "invalid seed"))?);
        } else if let Some(v) = l.strip_prefix("ratios=") {
            let parts: Vec<&str> = v.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::parse(path, line, "ratios needs three values"));
            }
            let mut r = [0.0; 3];
            for (slot, p) in r.iter_mut().zip(parts) {
                *slot = fileio::parse_f64(path, line, p, "ratio")?;
            }
            ratios = Some(r);
        } else if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let p: Partition = name.parse().map_err(|e: String| Error::parse(path, line, e))?;
            current = Some(p as usize);
        } else {
            let Some(i) = current else {
                return Err(Error::parse(path, line, "subject id outside of a section"));
            };
            if sets.iter().any(|s| s.contains(l)) || !sets[i].insert(l.to_string()) {
                return Err(Error::Integrity(format!("line {line}: subject `{l}` listed twice")));
            }
        }
    }
    let [train_ids, dev_ids, test_ids] = sets;
    Ok(ProtocolSplit {
        train_ids,
        dev_ids,
        test_ids,
        seed: seed.ok_or_else(|| Error::parse(path, 0, "missing seed= line"))?,
        ratios: ratios.ok_or_else(|| Error::parse(path, 0, "missing ratios= line"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BinLabel, Gender, SubjectRecord};

    pub(crate) fn manifest_of(n: usize) -> DatasetManifest {
        DatasetManifest {
            subjects: (0..n)
                .map(|i| SubjectRecord {
                    subject_id: format!("s{i:04}"),
                    gender: if i % 2 == 0 { Gender::F } else { Gender::M },
                    sessions: vec![],
                })
                .collect(),
            bin_label: BinLabel::Custom("custom".into()),
            landmark_count: 68,
            base_dir: Default::default(),
        }
    }

    #[test]
    fn exact_division() {
        for seed in 0..5 {
            let s = split_dataset(&manifest_of(4), [0.25, 0.5, 0.25], seed).unwrap();
            assert_eq!(s.sizes(), [1, 2, 1]);
            assert!(s.train_ids.is_disjoint(&s.dev_ids));
            assert!(s.train_ids.is_disjoint(&s.test_ids));
            assert!(s.dev_ids.is_disjoint(&s.test_ids));
        }
    }

    #[test]
    fn largest_remainder_sizes() {
        assert_eq!(apportion(10, [0.25, 0.5, 0.25]).unwrap(), [3, 5, 2]);
        assert_eq!(apportion(7, [0.7, 0.2, 0.1]).unwrap(), [5, 1, 1]);
        assert_eq!(apportion(3, [1.0, 0.0, 0.0]).unwrap(), [3, 0, 0]);
        assert_eq!(apportion(1, [1.0, 0.0, 0.0]).unwrap(), [1, 0, 0]);
    }

    #[test]
    fn bad_ratios_and_sizing() {
        assert!(matches!(apportion(10, [0.5, 0.5, 0.5]), Err(Error::Contract(_))));
        assert!(matches!(apportion(10, [-0.5, 1.0, 0.5]), Err(Error::Contract(_))));
        assert!(matches!(apportion(2, [0.25, 0.5, 0.25]), Err(Error::Sizing(_))));
    }

    #[test]
    fn explicit_counts() {
        let s = split_with_counts(&manifest_of(516), [130, 257, 129], 3).unwrap();
        assert_eq!(s.sizes(), [130, 257, 129]);
        assert!(split_with_counts(&manifest_of(516), [130, 257, 128], 3).is_err());
    }

    #[test]
    fn split_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = split_dataset(&manifest_of(9), [0.25, 0.5, 0.25], 42).unwrap();
        let p = dir.path().join("split.txt");
        write_split(&s, &p).unwrap();
        assert_eq!(read_split(&p).unwrap(), s);
    }

    proptest::proptest! {
        #[test]
        fn disjoint_cover_and_deterministic(n in 3usize..200, seed: u64, a in 0.05f64..0.9) {
            let rest = 1.0 - a;
            let ratios = [a, rest / 2.0, rest / 2.0];
            let m = manifest_of(n);
            let s = split_dataset(&m, ratios, seed).unwrap();
            let again = split_dataset(&m, ratios, seed).unwrap();
            proptest::prop_assert_eq!(s.to_text(), again.to_text());
            proptest::prop_assert_eq!(s.sizes().iter().sum::<usize>(), n);
            let mut all: BTreeSet<String> = BTreeSet::new();
            for p in Partition::ALL {
                for id in s.ids(p) {
                    proptest::prop_assert!(all.insert(id.clone()));
                }
            }
            proptest::prop_assert_eq!(all.len(), n);
        }
    }
}
