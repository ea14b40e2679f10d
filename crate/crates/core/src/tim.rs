//! Temporal interpolation on the path-graph embedding.
//!
//! Frame `i` of an `n`-frame clip sits at `t = i/n` on the curves
//! `f_kⁿ(t) = sin(πkt + π(n−k)/(2n))`, `k = 1..n−1`. Sampled at `t = i/n`
//! these are the nontrivial Laplacian eigenvectors of the path graph `P_n`.
//! A clip is modelled as `x(t) = x̄ + B f(t)` and resynthesized at any
//! equispaced grid.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::{clamp_unit, FrameSequence};

/// `f_kⁿ(t)`. Defined for `t ∈ [1/n, 1]`; evaluated as written elsewhere.
pub fn curve(n: usize, k: usize, t: f64) -> f64 {
    debug_assert!(n >= 1 && k < n);
    let (n, k) = (n as f64, k as f64);
    (PI * k * t + PI * (n - k) / (2.0 * n)).sin()
}

/// Curves `k = 1..n−1` at `t`.
pub fn curve_vector(n: usize, t: f64) -> Vec<f64> {
    (1..n).map(|k| curve(n, k, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimModel {
    mean_frame: Vec<f64>,
    /// `M × (n−1)`, stored row-major by pixel.
    basis_map: Vec<f64>,
    n: usize,
    dims: (usize, usize),
    fps: f64,
    residuals: Vec<f64>,
    degenerate: bool,
}

impl TimModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn mean_frame(&self) -> &[f64] {
        &self.mean_frame
    }

    /// Coefficient of curve `k` (1-based) at pixel `p`.
    pub fn basis(&self, pixel: usize, k: usize) -> f64 {
        self.basis_map[pixel * (self.n - 1) + (k - 1)]
    }

    pub fn basis_map(&self) -> Mat<f64> {
        let w = self.n - 1;
        Mat::from_fn(self.mean_frame.len(), w, |p, k| self.basis_map[p * w + k])
    }

    /// `‖x_i − x̄ − B f(i/n)‖` per source frame.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// All source frames were identical; the basis map is zero.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Unclamped `x̄ + B f(t)`.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let f = curve_vector(self.n, t);
        let w = self.n - 1;
        self.mean_frame
            .iter()
            .enumerate()
            .map(|(p, &m)| {
                let row = &self.basis_map[p * w..(p + 1) * w];
                m + row.iter().zip(&f).map(|(b, c)| b * c).sum::<f64>()
            })
            .collect()
    }
}

/// Least-squares fit of `x_i − x̄ ≈ B f(i/n)` over all source frames.
pub fn fit(seq: &FrameSequence) -> Result<TimModel> {
    let n = seq.n_frames();
    if n < 3 {
        return Err(Error::TooFewFrames { required: 3, found: n });
    }
    let m = seq.pixels_per_frame();
    let w = n - 1;

    let mut mean_frame = vec![0.0; m];
    for frame in seq.frames() {
        for (acc, &v) in mean_frame.iter_mut().zip(frame) {
            *acc += v;
        }
    }
    for v in &mut mean_frame {
        *v /= n as f64;
    }

    let first = seq.frame(0);
    let degenerate = seq.frames().all(|f| f == first);
    let basis_map = if degenerate {
        log::debug!("TIM fit on constant sequence {}", seq.source_id());
        vec![0.0; m * w]
    } else {
        // F is (n−1)×n; B = X Fᵀ (F Fᵀ)⁻¹, solved as Bᵀ = (F Fᵀ)⁻¹ F Xᵀ.
        let f = Mat::from_fn(w, n, |k, i| curve(n, k + 1, (i + 1) as f64 / n as f64));
        let xt = Mat::from_fn(n, m, |i, p| seq.frame(i)[p] - mean_frame[p]);
        let gram = &f * f.transpose();
        let llt = gram
            .llt(Side::Lower)
            .map_err(|e| Error::invalid(format!("curve Gram matrix not positive definite: {e:?}")))?;
        let bt = llt.solve(&f * &xt);
        let mut out = vec![0.0; m * w];
        for p in 0..m {
            for k in 0..w {
                out[p * w + k] = bt[(k, p)];
            }
        }
        out
    };

    let mut model = TimModel {
        mean_frame,
        basis_map,
        n,
        dims: (seq.rows(), seq.cols()),
        fps: seq.fps(),
        residuals: Vec::new(),
        degenerate,
    };
    model.residuals = (0..n)
        .map(|i| {
            let fitted = model.evaluate((i + 1) as f64 / n as f64);
            fitted
                .iter()
                .zip(seq.frame(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(model)
}

/// Frames at `t_j = j/n_out`, `j = 1..n_out`, clamped to `[0, 1]`, with the
/// frame rate scaled by `n_out/n` so the clip duration is unchanged.
pub fn synthesize(model: &TimModel, n_out: usize) -> Result<FrameSequence> {
    if n_out < 2 {
        return Err(Error::invalid(format!("TIM synthesis needs n_out >= 2, got {n_out}")));
    }
    let (rows, cols) = model.dims;
    let mut data = Vec::with_capacity(rows * cols * n_out);
    for j in 1..=n_out {
        data.extend(model.evaluate(j as f64 / n_out as f64).into_iter().map(clamp_unit));
    }
    let fps = model.fps * n_out as f64 / model.n as f64;
    FrameSequence::new(rows, cols, fps, data, format!("tim{n_out}"))
}

/// 1-based source positions of an `n_out`-frame grid over `n` frames:
/// `1 + ⌊(j−1)(n−1)/(n_out−1)⌋`.
pub fn grid_positions(n: usize, n_out: usize) -> Vec<usize> {
    match n_out {
        0 => Vec::new(),
        1 => vec![1],
        _ => (0..n_out)
            .map(|j| 1 + j * n.saturating_sub(1) / (n_out - 1))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn planted(rows: usize, cols: usize, n: usize, max_k: usize, seed: u64) -> (FrameSequence, Vec<f64>, Mat<f64>) {
        use rand::{RngExt, SeedableRng};
        let mut g = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
        let m = rows * cols;
        let mean: Vec<f64> = (0..m).map(|_| 0.4 + 0.2 * g.random::<f64>()).collect();
        let b = Mat::from_fn(m, n - 1, |_, k| {
            if k < max_k {
                0.1 * (g.random::<f64>() - 0.5) / (k + 1) as f64
            } else {
                0.0
            }
        });
        let mut data = Vec::new();
        for i in 1..=n {
            let f = curve_vector(n, i as f64 / n as f64);
            for p in 0..m {
                data.push(mean[p] + (0..n - 1).map(|k| b[(p, k)] * f[k]).sum::<f64>());
            }
        }
        (FrameSequence::new(rows, cols, 100.0, data, "planted").unwrap(), mean, b)
    }

    #[test]
    fn curve_identities() {
        for n in 1..40 {
            for t in [1.0 / n as f64, 0.37, 1.0] {
                assert_eq!(curve(n, 0, t), 1.0);
            }
        }
        assert!((curve(4, 1, 0.25) - (5.0 * PI / 8.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn plant_and_recover() {
        let n = 12;
        let (seq, _, b) = planted(4, 5, n, n - 1, 9);
        let model = fit(&seq).unwrap();
        let got = model.basis_map();
        let num: f64 = (0..b.nrows())
            .flat_map(|p| (0..b.ncols()).map(move |k| (p, k)))
            .map(|(p, k)| (got[(p, k)] - b[(p, k)]).powi(2))
            .sum();
        let den: f64 = b.squared_norm_l2();
        assert!((num / den).sqrt() < 1e-8);
        let out = synthesize(&model, n).unwrap();
        for (a, b) in out.data().iter().zip(seq.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(model.residuals().iter().all(|&r| r < 1e-9));
    }

    #[test]
    fn constant_sequence_is_degenerate() {
        let seq = FrameSequence::new(2, 2, 30.0, vec![0.25; 4 * 6], "c").unwrap();
        let model = fit(&seq).unwrap();
        assert!(model.is_degenerate());
        assert_eq!(model.mean_frame(), &[0.25; 4]);
        let out = synthesize(&model, 4).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(out.fps(), 20.0);
    }

    #[test]
    fn residuals_ignore_added_constant_image() {
        let (seq, _, _) = planted(3, 3, 8, 3, 1);
        let shifted: Vec<f64> = seq
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.01 * (i % 9) as f64)
            .collect();
        let shifted = FrameSequence::new(3, 3, 100.0, shifted, "s").unwrap();
        let a = fit(&seq).unwrap();
        let b = fit(&shifted).unwrap();
        for (x, y) in a.residuals().iter().zip(b.residuals()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_frames() {
        let seq = FrameSequence::new(1, 1, 10.0, vec![0.1, 0.2], "x").unwrap();
        assert!(matches!(fit(&seq), Err(Error::TooFewFrames { .. })));
    }

    #[test]
    fn grid_for_32_to_5() {
        assert_eq!(grid_positions(32, 5), vec![1, 8, 16, 24, 32]);
        assert_eq!(grid_positions(24, 24), (1..=24).collect::<Vec<_>>());
    }

    #[test]
    fn curves_are_path_laplacian_eigenvectors() {
        for n in 2..=16 {
            let lap = Mat::from_fn(n, n, |i, j| {
                if i == j {
                    if i == 0 || i == n - 1 {
                        1.0
                    } else {
                        2.0
                    }
                } else if i.abs_diff(j) == 1 {
                    -1.0
                } else {
                    0.0
                }
            });
            let eig: Vec<f64> = lap.self_adjoint_eigenvalues(Side::Lower).unwrap();
            let mut prev = -1.0;
            for k in 0..n {
                let v: Vec<f64> = (1..=n).map(|i| curve(n, k, i as f64 / n as f64)).collect();
                let norm: f64 = v.iter().map(|x| x * x).sum();
                let objective: f64 = v.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum::<f64>() / norm;
                assert!((objective - eig[k]).abs() < 1e-10, "n={n} k={k}");
                assert!(objective > prev);
                prev = objective;
                for i in 0..n {
                    let lv: f64 = (0..n).map(|j| lap[(i, j)] * v[j]).sum();
                    assert!((lv - eig[k] * v[i]).abs() < 1e-10);
                }
            }
        }
    }

    fn total_variation(seq: &FrameSequence) -> f64 {
        (1..seq.n_frames())
            .map(|t| {
                seq.frame(t)
                    .iter()
                    .zip(seq.frame(t - 1))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn curve_in_unit_range(n in 1usize..200, k_frac in 0.0f64..1.0, t_frac in 0.0f64..1.0) {
            let k = ((n as f64 * k_frac) as usize).min(n - 1);
            let t = 1.0 / n as f64 + t_frac * (1.0 - 1.0 / n as f64);
            let v = curve(n, k, t);
            prop_assert!((-1.0..=1.0).contains(&v));
        }

        #[test]
        fn downsampling_never_adds_variation(seed in 0u64..1000, n_out in 2usize..32) {
            let (seq, _, _) = planted(3, 4, 32, 1, seed);
            let model = fit(&seq).unwrap();
            let full = total_variation(&synthesize(&model, 32).unwrap());
            let short = total_variation(&synthesize(&model, n_out).unwrap());
            prop_assert!(short <= full + 1e-12);
        }

        #[test]
        fn synthesis_is_affine_in_basis(seed in 0u64..1000, s in -2.0f64..2.0) {
            let (seq, _, _) = planted(2, 2, 9, 8, seed);
            let a = fit(&seq).unwrap();
            let mut b = a.clone();
            for v in &mut b.basis_map {
                *v *= s;
            }
            for t in [0.2, 0.5, 0.9] {
                let ya = a.evaluate(t);
                let yb = b.evaluate(t);
                for p in 0..ya.len() {
                    let expected = a.mean_frame[p] + s * (ya[p] - a.mean_frame[p]);
                    prop_assert!((yb[p] - expected).abs() < 1e-12);
                }
            }
        }
    }
}
