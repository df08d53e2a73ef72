use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Label};
use crate::cpg::{build_cpg, PropertyGraph};
use crate::frontend::{parse_unit, FunctionAst};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Source file, relative to the manifest's directory.
    pub file: String,
    pub function: String,
    pub label: Label,
    pub cwe: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCounts {
    pub good: usize,
    pub bad: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub counts: ClassCounts,
    /// Directory entry paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        let counts = count(&entries);
        DatasetManifest { entries, counts, base_dir: PathBuf::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn derived(&self, entries: Vec<ManifestEntry>) -> Self {
        let mut m = DatasetManifest::new(entries);
        m.base_dir = self.base_dir.clone();
        m
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization is infallible")
    }

    pub fn from_json(text: &str, base_dir: &Path) -> crate::Result<Self> {
        let mut m: DatasetManifest = serde_json::from_str(text)?;
        let actual = count(&m.entries);
        if actual != m.counts {
            return Err(DataError::CountsMismatch { stated: m.counts, actual }.into());
        }
        m.base_dir = base_dir.to_path_buf();
        Ok(m)
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Parses every referenced function, reading each file once.
    pub fn functions(&self) -> crate::Result<Vec<(ManifestEntry, FunctionAst)>> {
        let mut cache: HashMap<PathBuf, Vec<FunctionAst>> = HashMap::new();
        let mut out = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let path = self.resolve(e);
            if !cache.contains_key(&path) {
                let text = fs::read_to_string(&path).map_err(|err| Error::io(&path, err))?;
                let parsed = parse_unit(&text).map_err(|err| Error::in_file(&path, err.into()))?;
                cache.insert(path.clone(), parsed);
            }
            let f = cache[&path]
                .iter()
                .find(|f| f.name == e.function)
                .ok_or_else(|| DataError::MissingFunction { file: e.file.clone(), function: e.function.clone() })?;
            out.push((e.clone(), f.clone()));
        }
        Ok(out)
    }

    /// Code property graphs of every referenced function.
    pub fn graphs(&self) -> crate::Result<Vec<(ManifestEntry, PropertyGraph)>> {
        self.functions()?
            .into_iter()
            .map(|(e, f)| {
                let g = build_cpg(&f).map_err(|err| Error::in_file(&self.resolve(&e), err.into()))?;
                Ok((e, g))
            })
            .collect()
    }
}

fn count(entries: &[ManifestEntry]) -> ClassCounts {
    let bad = entries.iter().filter(|e| e.label == Label::Bad).count();
    ClassCounts { good: entries.len() - bad, bad }
}

/// Seeded shuffle, then the first `⌊0.8·n⌋` entries train and the rest test.
pub fn split(manifest: &DatasetManifest, seed: u64) -> Result<(DatasetManifest, DatasetManifest), DataError> {
    let n = manifest.len();
    if n < 5 {
        return Err(DataError::TooSmall { needed: 5, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = n * 8 / 10;
    let pick = |idx: &[usize]| idx.iter().map(|&i| manifest.entries[i].clone()).collect();
    Ok((manifest.derived(pick(&order[..cut])), manifest.derived(pick(&order[cut..]))))
}

/// Subsamples the majority class, without replacement, to the minority count.
/// Surviving entries keep their original order.
pub fn downsample(manifest: &DatasetManifest, seed: u64) -> Result<DatasetManifest, DataError> {
    let ClassCounts { good, bad } = manifest.counts;
    if good == 0 || bad == 0 {
        return Err(DataError::MissingClass { good, bad });
    }
    let majority = if bad > good { Label::Bad } else { Label::Good };
    let keep = good.min(bad);
    let mut candidates: Vec<usize> =
        manifest.entries.iter().enumerate().filter(|(_, e)| e.label == majority).map(|(i, _)| i).collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let chosen: BTreeSet<usize> = candidates.into_iter().take(keep).collect();
    let entries = manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(i, e)| e.label != majority || chosen.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    Ok(manifest.derived(entries))
}
