use serde::{Deserialize, Serialize};

use super::manifest::CorpusManifest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Leave one subject out.
    Loso,
    /// Leave one video (sample) out.
    Lovo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Held-out subject id (LOSO) or sample id (LOVO).
    pub name: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// One fold per subject (sorted by subject id) or per sample (manifest
/// order); sample ids inside a fold keep manifest order.
pub fn make_folds(manifest: &CorpusManifest, protocol: Protocol) -> Result<Vec<Fold>> {
    let entries = manifest.entries();
    match protocol {
        Protocol::Loso => {
            let subjects = manifest.subjects();
            if subjects.len() < 2 {
                return Err(Error::InsufficientSubjects(subjects.len()));
            }
            Ok(subjects
                .into_iter()
                .map(|s| {
                    let (test, train): (Vec<_>, Vec<_>) = entries.iter().partition(|e| e.subject_id == s);
                    Fold {
                        name: s,
                        train: train.into_iter().map(|e| e.sample_id.clone()).collect(),
                        test: test.into_iter().map(|e| e.sample_id.clone()).collect(),
                    }
                })
                .collect())
        }
        Protocol::Lovo => {
            if entries.len() < 2 {
                return Err(Error::InsufficientSamples(entries.len()));
            }
            Ok(entries
                .iter()
                .map(|held| Fold {
                    name: held.sample_id.clone(),
                    train: entries
                        .iter()
                        .filter(|e| e.sample_id != held.sample_id)
                        .map(|e| e.sample_id.clone())
                        .collect(),
                    test: vec![held.sample_id.clone()],
                })
                .collect())
        }
    }
}
