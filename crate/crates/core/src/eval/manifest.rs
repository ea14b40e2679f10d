use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub subject_id: String,
    pub label: String,
    /// Relative paths resolve against the manifest's base directory.
    pub path: PathBuf,
}

/// Labelled corpus listing; CSV header `sample_id,subject_id,label,path`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    entries: Vec<ManifestEntry>,
    class_set: Vec<String>,
    base_dir: Option<PathBuf>,
}

impl CorpusManifest {
    /// Sample ids must be unique and non-empty; the class set is the sorted
    /// distinct labels.
    pub fn new(entries: Vec<ManifestEntry>, base_dir: Option<PathBuf>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidManifest("no entries".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.sample_id.is_empty() || e.subject_id.is_empty() || e.label.is_empty() {
                return Err(Error::InvalidManifest(format!("empty field in entry {:?}", e.sample_id)));
            }
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate sample_id {:?}", e.sample_id)));
            }
        }
        let class_set: Vec<String> = entries
            .iter()
            .map(|e| e.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self {
            entries,
            class_set,
            base_dir,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = rdr.headers()?.clone();
        for required in ["sample_id", "subject_id", "label", "path"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::InvalidManifest(format!("missing column {required:?}")));
            }
        }
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
        Self::new(entries, path.parent().map(Path::to_path_buf))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        match &self.base_dir {
            Some(base) if entry.path.is_relative() => base.join(&entry.path),
            _ => entry.path.clone(),
        }
    }

    /// Distinct subjects in sorted order.
    pub fn subjects(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.subject_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}
