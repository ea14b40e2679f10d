use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class confusion counts; merging is plain addition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub class_set: Vec<String>,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl Confusion {
    pub fn new(class_set: &[String]) -> Self {
        let c = class_set.len();
        Self {
            class_set: class_set.to_vec(),
            tp: vec![0; c],
            fp: vec![0; c],
            fn_: vec![0; c],
        }
    }

    pub fn from_labels(truth: &[String], predicted: &[String], class_set: &[String]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                found: predicted.len(),
            });
        }
        let index: HashMap<&str, usize> = class_set.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let lookup = |l: &String| {
            index
                .get(l.as_str())
                .copied()
                .ok_or_else(|| Error::LabelOutsideClassSet(l.clone()))
        };
        let mut conf = Self::new(class_set);
        for (t, p) in truth.iter().zip(predicted) {
            let (ti, pi) = (lookup(t)?, lookup(p)?);
            if ti == pi {
                conf.tp[ti] += 1;
            } else {
                conf.fn_[ti] += 1;
                conf.fp[pi] += 1;
            }
        }
        Ok(conf)
    }

    pub fn merge(&mut self, other: &Confusion) -> Result<()> {
        if self.class_set != other.class_set {
            return Err(Error::invalid("cannot merge confusion counts over different class sets"));
        }
        for i in 0..self.tp.len() {
            self.tp[i] += other.tp[i];
            self.fp[i] += other.fp[i];
            self.fn_[i] += other.fn_[i];
        }
        Ok(())
    }

    pub fn n_samples(&self) -> u64 {
        self.tp.iter().sum::<u64>() + self.fn_.iter().sum::<u64>()
    }

    pub fn report(&self) -> MetricsReport {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let per_class: Vec<ClassMetrics> = (0..self.class_set.len())
            .map(|i| {
                let (tp, fp, fn_) = (self.tp[i], self.fp[i], self.fn_[i]);
                let rr = ratio(tp, tp + fn_);
                let pr = ratio(tp, tp + fp);
                let f1 = if rr + pr == 0.0 { 0.0 } else { 2.0 * rr * pr / (rr + pr) };
                ClassMetrics {
                    label: self.class_set[i].clone(),
                    tp,
                    fp,
                    fn_,
                    rr,
                    pr,
                    f1,
                }
            })
            .collect();
        let c = per_class.len().max(1) as f64;
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c;
        let n = self.n_samples();
        MetricsReport {
            macro_f1: mean(|m| m.f1),
            macro_rr: mean(|m| m.rr),
            macro_pr: mean(|m| m.pr),
            acc: ratio(self.tp.iter().sum(), n),
            n_samples: n,
            per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub rr: f64,
    pub pr: f64,
    pub f1: f64,
}

/// Per-class recognition rate, precision and F1 with unweighted macro
/// means; every rate is 0 when its denominator is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub macro_rr: f64,
    pub macro_pr: f64,
    pub acc: f64,
    pub n_samples: u64,
}

pub fn score(truth: &[String], predicted: &[String], class_set: &[String]) -> Result<MetricsReport> {
    Ok(Confusion::from_labels(truth, predicted, class_set)?.report())
}
