use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, KernelRidge};
use super::folds::{make_folds, Fold, Protocol};
use super::manifest::CorpusManifest;
use super::metrics::{Confusion, MetricsReport};
use crate::error::{Error, Result};
use crate::features::{lbptop, LbptopConfig};
use crate::sampling::{self, SamplingConfig};
use crate::seqio::{load_sequence, resize, FrameSequence, SequenceFormat};

pub const AGGREGATION_NOTE: &str =
    "pooled: confusion counts summed over all folds, then per-class rates (primary); fold_averaged: mean of per-fold macro scores";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub sampling: SamplingConfig,
    /// Applied after sampling, before feature extraction.
    pub resize: Option<(usize, usize)>,
    pub lbp: LbptopConfig,
    pub protocol: Protocol,
    pub classifier: KernelRidge,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sampling: SamplingConfig::default(),
            resize: None,
            lbp: LbptopConfig::default(),
            protocol: Protocol::Loso,
            classifier: KernelRidge::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_id: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub sample_id: String,
    pub n_frames_in: usize,
    pub n_frames_out: usize,
    pub selected_gamma: Option<f64>,
    pub nnz: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub label: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAverage {
    pub n_folds: usize,
    pub macro_f1: f64,
    pub macro_rr: f64,
    pub macro_pr: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub aggregation: String,
    pub protocol: Protocol,
    /// Absent for imported predictions.
    pub config: Option<ExperimentConfig>,
    pub class_set: Vec<String>,
    pub n_samples: usize,
    pub pooled: MetricsReport,
    pub fold_averaged: FoldAverage,
    pub folds: Vec<FoldReport>,
    pub predictions: Vec<Prediction>,
    pub samples: Vec<SampleInfo>,
    pub failures: Vec<SampleFailure>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-class RR / PR / F1 table followed by the macro row and ACC.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let strategy = self
            .config
            .as_ref()
            .map_or("imported predictions".to_string(), |c| {
                format!("{} at {}%", c.sampling.strategy.name(), c.sampling.percent)
            });
        let _ = writeln!(s, "# {strategy}, {:?}\n", self.protocol);
        let _ = writeln!(s, "Aggregation: {}\n", self.aggregation);
        let _ = writeln!(s, "| Class | RR | PR | F1 |");
        let _ = writeln!(s, "|---|---|---|---|");
        for c in &self.pooled.per_class {
            let _ = writeln!(s, "| {} | {:.4} | {:.4} | {:.4} |", c.label, c.rr, c.pr, c.f1);
        }
        let p = &self.pooled;
        let _ = writeln!(s, "| Macro | {:.4} | {:.4} | {:.4} |", p.macro_rr, p.macro_pr, p.macro_f1);
        let _ = writeln!(s, "\nACC: {:.4} over {} test samples", p.acc, p.n_samples);
        let f = &self.fold_averaged;
        let _ = writeln!(
            s,
            "\nFold-averaged over {} folds: RR {:.4}, PR {:.4}, F1 {:.4}, ACC {:.4}",
            f.n_folds, f.macro_rr, f.macro_pr, f.macro_f1, f.acc
        );
        if !self.failures.is_empty() {
            let _ = writeln!(s, "\n{} sample(s) failed:", self.failures.len());
            for e in &self.failures {
                let _ = writeln!(s, "- {} ({}): {}", e.sample_id, e.stage, e.message);
            }
        }
        s
    }
}

fn failure(sample_id: &str, stage: &str, err: impl ToString) -> SampleFailure {
    SampleFailure {
        sample_id: sample_id.to_string(),
        stage: stage.to_string(),
        message: err.to_string(),
    }
}

/// Sampling, optional resize and LBP-TOP for one sequence. `index` perturbs
/// the random-sampling seed so clips do not share one index pattern.
pub fn sample_features(
    seq: &FrameSequence,
    cfg: &ExperimentConfig,
    index: usize,
) -> std::result::Result<(Vec<f64>, SampleInfo), (String, Error)> {
    let mut scfg = cfg.sampling.clone();
    scfg.seed = scfg.seed.wrapping_add(index as u64);
    let out = sampling::apply(seq, &scfg).map_err(|e| ("sampling".to_string(), e))?;
    let info = SampleInfo {
        sample_id: seq.source_id().to_string(),
        n_frames_in: out.report.n_in,
        n_frames_out: out.report.n_out,
        selected_gamma: out.report.selected_gamma,
        nnz: out.report.nnz,
    };
    let sampled = match cfg.resize {
        Some((r, c)) => resize(&out.sequence, r, c).map_err(|e| ("resize".to_string(), e))?,
        None => out.sequence,
    };
    let feat = lbptop(&sampled, &cfg.lbp).map_err(|e| ("features".to_string(), e))?;
    Ok((feat.vector, info))
}

type FeatureTable = Vec<Option<Vec<f64>>>;

fn extract(manifest: &CorpusManifest, cfg: &ExperimentConfig) -> (FeatureTable, Vec<SampleInfo>, Vec<SampleFailure>) {
    let results: Vec<_> = manifest
        .entries()
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let path = manifest.resolve(e);
            let seq = load_sequence(&path, SequenceFormat::infer(&path))
                .map_err(|err| failure(&e.sample_id, "load", err))?
                .with_source_id(e.sample_id.clone());
            sample_features(&seq, cfg, i).map_err(|(stage, err)| failure(&e.sample_id, &stage, err))
        })
        .collect();
    let mut table = Vec::with_capacity(results.len());
    let mut infos = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((f, info)) => {
                table.push(Some(f));
                infos.push(info);
            }
            Err(fail) => {
                log::warn!("sample {} failed at {}: {}", fail.sample_id, fail.stage, fail.message);
                table.push(None);
                failures.push(fail);
            }
        }
    }
    (table, infos, failures)
}

/// Full pipeline with the reference classifier.
pub fn run_experiment(manifest: &CorpusManifest, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(manifest, cfg, &cfg.classifier)
}

/// Sampling, resizing and feature extraction per sample (in parallel),
/// then per-fold training and prediction. Failing samples are reported and
/// left out of every fold.
pub fn run_experiment_with<C>(manifest: &CorpusManifest, cfg: &ExperimentConfig, classifier: &C) -> Result<ExperimentReport>
where
    C: Classifier + Sync,
{
    let folds = make_folds(manifest, cfg.protocol)?;
    let (features, samples, failures) = extract(manifest, cfg);
    let index: HashMap<&str, usize> = manifest
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.sample_id.as_str(), i))
        .collect();
    let entries = manifest.entries();

    let fold_outputs: Vec<(FoldReport, Vec<Prediction>)> = folds
        .par_iter()
        .map(|fold| {
            let usable = |ids: &[String]| -> Vec<usize> {
                ids.iter()
                    .map(|id| index[id.as_str()])
                    .filter(|&i| features[i].is_some())
                    .collect()
            };
            let train = usable(&fold.train);
            let test = usable(&fold.test);
            let mut report = FoldReport {
                name: fold.name.clone(),
                n_train: train.len(),
                n_test: test.len(),
                metrics: None,
                error: None,
            };
            let x_train: Vec<Vec<f64>> = train.iter().map(|&i| features[i].clone().unwrap()).collect();
            let y_train: Vec<String> = train.iter().map(|&i| entries[i].label.clone()).collect();
            let model = match classifier.fit(&x_train, &y_train) {
                Ok(m) => m,
                Err(e) => {
                    report.error = Some(e.to_string());
                    return (report, Vec::new());
                }
            };
            let x_test: Vec<Vec<f64>> = test.iter().map(|&i| features[i].clone().unwrap()).collect();
            let predicted = classifier.predict(&model, &x_test);
            let preds: Vec<Prediction> = test
                .iter()
                .zip(predicted)
                .map(|(&i, p)| Prediction {
                    sample_id: entries[i].sample_id.clone(),
                    label: entries[i].label.clone(),
                    predicted: p,
                })
                .collect();
            (report, preds)
        })
        .collect();

    let (fold_reports, preds): (Vec<_>, Vec<_>) = fold_outputs.into_iter().unzip();
    let mut report = assemble(manifest, cfg.protocol, &folds, fold_reports, preds.into_iter().flatten().collect())?;
    report.config = Some(cfg.clone());
    report.samples = samples;
    report.failures.extend(failures);
    Ok(report)
}

fn assemble(
    manifest: &CorpusManifest,
    protocol: Protocol,
    folds: &[Fold],
    mut fold_reports: Vec<FoldReport>,
    predictions: Vec<Prediction>,
) -> Result<ExperimentReport> {
    let class_set = manifest.class_set().to_vec();
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.sample_id.as_str(), p)).collect();
    let mut pooled = Confusion::new(&class_set);
    for (fold, fr) in folds.iter().zip(fold_reports.iter_mut()) {
        let (truth, pred): (Vec<String>, Vec<String>) = fold
            .test
            .iter()
            .filter_map(|id| by_id.get(id.as_str()))
            .map(|p| (p.label.clone(), p.predicted.clone()))
            .unzip();
        if truth.is_empty() {
            continue;
        }
        let conf = Confusion::from_labels(&truth, &pred, &class_set)?;
        pooled.merge(&conf)?;
        fr.metrics = Some(conf.report());
    }
    let scored: Vec<&MetricsReport> = fold_reports.iter().filter_map(|f| f.metrics.as_ref()).collect();
    let k = scored.len().max(1) as f64;
    let fold_averaged = FoldAverage {
        n_folds: scored.len(),
        macro_f1: scored.iter().map(|m| m.macro_f1).sum::<f64>() / k,
        macro_rr: scored.iter().map(|m| m.macro_rr).sum::<f64>() / k,
        macro_pr: scored.iter().map(|m| m.macro_pr).sum::<f64>() / k,
        acc: scored.iter().map(|m| m.acc).sum::<f64>() / k,
    };
    Ok(ExperimentReport {
        aggregation: AGGREGATION_NOTE.to_string(),
        protocol,
        config: None,
        class_set,
        n_samples: manifest.len(),
        pooled: pooled.report(),
        fold_averaged,
        folds: fold_reports,
        predictions,
        samples: Vec::new(),
        failures: Vec::new(),
    })
}

/// Scores externally produced predictions (`sample_id → label`) with the
/// same fold bookkeeping as [`run_experiment`]. Missing predictions are
/// reported as failures.
pub fn evaluate_predictions(
    manifest: &CorpusManifest,
    predicted: &HashMap<String, String>,
    protocol: Protocol,
) -> Result<ExperimentReport> {
    let folds = make_folds(manifest, protocol)?;
    let mut failures = Vec::new();
    let mut predictions = Vec::new();
    let order: HashMap<&str, usize> = folds
        .iter()
        .flat_map(|f| f.test.iter())
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut entries: Vec<_> = manifest.entries().iter().collect();
    entries.sort_by_key(|e| order[e.sample_id.as_str()]);
    for e in entries {
        match predicted.get(&e.sample_id) {
            Some(p) => predictions.push(Prediction {
                sample_id: e.sample_id.clone(),
                label: e.label.clone(),
                predicted: p.clone(),
            }),
            None => failures.push(failure(&e.sample_id, "import", "no prediction supplied")),
        }
    }
    let fold_reports = folds
        .iter()
        .map(|f| FoldReport {
            name: f.name.clone(),
            n_train: f.train.len(),
            n_test: f.test.iter().filter(|id| predicted.contains_key(*id)).count(),
            metrics: None,
            error: None,
        })
        .collect();
    let mut report = assemble(manifest, protocol, &folds, fold_reports, predictions)?;
    report.failures = failures;
    Ok(report)
}

/// CSV `sample_id,predicted_label`.
pub fn write_predictions_csv<W: Write>(predictions: &[Prediction], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "predicted_label"])?;
    for p in predictions {
        w.write_record([&p.sample_id, &p.predicted])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_predictions_csv<R: Read>(input: R) -> Result<HashMap<String, String>> {
    #[derive(Deserialize)]
    struct Row {
        sample_id: String,
        predicted_label: String,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = HashMap::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        if out.insert(row.sample_id.clone(), row.predicted_label).is_some() {
            return Err(Error::invalid(format!("duplicate prediction for {}", row.sample_id)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ManifestEntry;
    use std::path::PathBuf;

    fn manifest() -> CorpusManifest {
        let entries = (0..6)
            .map(|i| ManifestEntry {
                sample_id: format!("v{i}"),
                subject_id: format!("s{}", i / 2),
                label: if i % 2 == 0 { "a" } else { "b" }.into(),
                path: PathBuf::from("none"),
            })
            .collect();
        CorpusManifest::new(entries, None).unwrap()
    }

    #[test]
    fn imported_predictions_are_pooled() {
        let m = manifest();
        let preds: HashMap<String, String> = (0..5)
            .map(|i| (format!("v{i}"), if i == 1 || i % 2 == 0 { "a" } else { "b" }.to_string()))
            .collect();
        let r = evaluate_predictions(&m, &preds, Protocol::Loso).unwrap();
        assert_eq!(r.folds.len(), 3);
        assert_eq!(r.pooled.n_samples, 5);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.pooled.per_class[0].tp, 3);
        assert_eq!(r.pooled.per_class[0].fp, 1);
        assert!(r.to_markdown().contains("| Macro |"));
    }

    #[test]
    fn predictions_csv_round_trip() {
        let preds = vec![Prediction {
            sample_id: "v0".into(),
            label: "a".into(),
            predicted: "b".into(),
        }];
        let mut buf = Vec::new();
        write_predictions_csv(&preds, &mut buf).unwrap();
        let back = read_predictions_csv(buf.as_slice()).unwrap();
        assert_eq!(back.get("v0").map(String::as_str), Some("b"));
    }

    #[test]
    fn load_failures_are_reported_not_fatal() {
        let r = run_experiment(&manifest(), &ExperimentConfig::default()).unwrap();
        assert_eq!(r.failures.len(), 6);
        assert!(r.failures.iter().all(|f| f.stage == "load"));
        assert_eq!(r.pooled.n_samples, 0);
        assert!(r.folds.iter().all(|f| f.error.is_some()));
    }
}
