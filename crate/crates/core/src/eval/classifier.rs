use std::collections::BTreeSet;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supervised classifier over dense feature vectors.
pub trait Classifier {
    type Model;

    fn fit(&self, features: &[Vec<f64>], labels: &[String]) -> Result<Self::Model>;

    fn predict(&self, model: &Self::Model, features: &[Vec<f64>]) -> Vec<String>;
}

/// One-vs-rest kernel ridge regression with the kernel `exp(−g‖x−y‖²)`.
///
/// Targets are ±1 per class, the ridge is `1/c`, and prediction takes the
/// largest score with ties going to the lexicographically smallest label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRidge {
    pub gamma: f64,
    pub cost: f64,
}

impl Default for KernelRidge {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            cost: 1e4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelRidgeModel {
    support: Vec<Vec<f64>>,
    classes: Vec<String>,
    /// `n × C`.
    coefficients: Mat<f64>,
}

impl KernelRidgeModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }
}

impl KernelRidge {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-self.gamma * d2).exp()
    }
}

impl Classifier for KernelRidge {
    type Model = KernelRidgeModel;

    fn fit(&self, features: &[Vec<f64>], labels: &[String]) -> Result<KernelRidgeModel> {
        if features.is_empty() {
            return Err(Error::EmptyClass);
        }
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                found: labels.len(),
            });
        }
        if !(self.gamma > 0.0 && self.cost > 0.0) {
            return Err(Error::invalid("kernel bandwidth and cost must be positive"));
        }
        let dim = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::LengthMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let n = features.len();
        let lambda = 1.0 / self.cost;
        let mut k = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.kernel(&features[i], &features[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += lambda;
        }
        let targets = Mat::from_fn(n, classes.len(), |i, c| if labels[i] == classes[c] { 1.0 } else { -1.0 });
        let coefficients = k
            .llt(Side::Lower)
            .map_err(|e| Error::invalid(format!("kernel system not positive definite: {e:?}")))?
            .solve(&targets);
        Ok(KernelRidgeModel {
            support: features.to_vec(),
            classes,
            coefficients,
        })
    }

    fn predict(&self, model: &KernelRidgeModel, features: &[Vec<f64>]) -> Vec<String> {
        features
            .iter()
            .map(|x| {
                let kx: Vec<f64> = model.support.iter().map(|s| self.kernel(x, s)).collect();
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for c in 0..model.classes.len() {
                    let score: f64 = kx.iter().enumerate().map(|(i, v)| v * model.coefficients[(i, c)]).sum();
                    if score > best_score {
                        best = c;
                        best_score = score;
                    }
                }
                model.classes[best].clone()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};
    use rand::SeedableRng;

    #[test]
    fn separable_clusters_fit_perfectly() {
        let mut g = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(11);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let c = (i % 2) as f64 * 10.0;
            let a: f64 = StandardNormal.sample(&mut g);
            let b: f64 = StandardNormal.sample(&mut g);
            x.push(vec![c + a, b]);
            y.push(if i % 2 == 0 { "left" } else { "right" }.to_string());
        }
        let clf = KernelRidge::default();
        let model = clf.fit(&x, &y).unwrap();
        assert_eq!(clf.predict(&model, &x), y);
    }

    #[test]
    fn single_class_everywhere() {
        let clf = KernelRidge::default();
        let model = clf.fit(&[vec![0.0], vec![1.0]], &["only".to_string(), "only".to_string()]).unwrap();
        assert_eq!(clf.predict(&model, &[vec![-5.0], vec![100.0]]), vec!["only", "only"]);
    }

    #[test]
    fn ties_go_to_smallest_label() {
        // far from all training points every score is 0
        let clf = KernelRidge::default();
        let model = clf
            .fit(&[vec![0.0], vec![1.0]], &["zeta".to_string(), "alpha".to_string()])
            .unwrap();
        assert_eq!(clf.predict(&model, &[vec![1e6]]), vec!["alpha"]);
    }

    #[test]
    fn defaults_and_empty() {
        assert_eq!(KernelRidge::default(), KernelRidge { gamma: 0.5, cost: 1e4 });
        assert!(matches!(KernelRidge::default().fit(&[], &[]), Err(Error::EmptyClass)));
    }
}
