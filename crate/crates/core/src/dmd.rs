//! Exact dynamic mode decomposition of a snapshot pair.
//!
//! `Ψ₀ = U Σ V*` (economy SVD, truncated at a relative threshold), the
//! projected operator `F = U* Ψ₁ V Σ⁻¹`, its eigendecomposition
//! `F = Y diag(μ) Z*` with `Z* Y = I`, modes `Φ = U Y`, and amplitudes `α`
//! minimizing `J(α) = ‖Ψ₀ − Φ diag(α) V_and‖²_F` where `V_and[i, k] = μ_iᵏ`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, frob_sq, frob_sq_real, real_times_complex};
use crate::seqio::SnapshotPair;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative eigen-residual above which the eigensolver result is rejected.
const EIG_RESIDUAL_TOL: f64 = 1e-8;

/// Temporal evolution matrix, entry `(i, k) = μ_iᵏ`.
#[derive(Debug, Clone)]
pub struct Vandermonde {
    pub matrix: Mat<c64>,
}

impl Vandermonde {
    pub fn new(eigenvalues: &[c64], n_cols: usize) -> Self {
        let mut matrix = Mat::zeros(eigenvalues.len(), n_cols);
        for (i, &mu) in eigenvalues.iter().enumerate() {
            let mut p = c64::new(1.0, 0.0);
            for k in 0..n_cols {
                matrix[(i, k)] = p;
                p *= mu;
            }
        }
        Self { matrix }
    }
}

/// Quadratic form of the amplitude objective,
/// `J(α) = α* P α − 2 Re(q* α) + s`.
#[derive(Debug, Clone)]
pub struct AmplitudeObjective {
    /// `P = (Y* Y) ∘ conj(V_and V_and*)`, Hermitian positive semidefinite.
    pub gram: Mat<c64>,
    /// `q = conj(diag(V_and V Σ* Y))`.
    pub linear: Vec<c64>,
    /// `s = ‖Ψ₀‖²_F`.
    pub constant: f64,
}

impl AmplitudeObjective {
    pub fn rank(&self) -> usize {
        self.linear.len()
    }

    /// Evaluates the quadratic form. Suffers cancellation near the optimum;
    /// prefer [`DmdDecomposition::loss`] for reporting.
    pub fn value(&self, alpha: &[c64]) -> f64 {
        let a = linalg::column(alpha);
        let pa = &self.gram * &a;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..alpha.len() {
            quad += (alpha[i].conj() * pa[(i, 0)]).re;
            lin += (self.linear[i].conj() * alpha[i]).re;
        }
        quad - 2.0 * lin + self.constant
    }
}

#[derive(Debug, Clone)]
pub struct DmdDecomposition {
    modes: Mat<c64>,
    eigenvalues: Vec<c64>,
    singular_values: Vec<f64>,
    left_basis: Mat<f64>,
    right_basis: Mat<f64>,
    eig_right: Mat<c64>,
    eig_left: Mat<c64>,
    amplitudes: Vec<c64>,
    fps: f64,
    n_snapshots: usize,
    frame_dims: (usize, usize),
    // U* Ψ₀, r×N
    projected: Mat<f64>,
    // ‖Ψ₀ − U U* Ψ₀‖²
    residual_energy: f64,
    data_energy: f64,
    amplitude_fallback: bool,
}

impl DmdDecomposition {
    /// Runs SVD, projected operator, eigensystem and amplitude fitting, then
    /// orders modes by descending `|α|` (ties by descending `|μ|`).
    pub fn decompose(snap: &SnapshotPair, rank_tol: f64) -> Result<Self> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::invalid(format!(
                "rank tolerance must lie in (0, 1), got {rank_tol}"
            )));
        }
        let psi0 = &snap.psi0;
        let psi1 = &snap.psi1;
        let (m, n) = (psi0.nrows(), psi0.ncols());
        if psi1.nrows() != m || psi1.ncols() != n {
            return Err(Error::LengthMismatch {
                expected: m * n,
                found: psi1.nrows() * psi1.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::TooFewFrames {
                required: 2,
                found: 1,
            });
        }

        let svd = psi0
            .thin_svd()
            .map_err(|e| Error::EigFailure(format!("svd did not converge: {e:?}")))?;
        let sigma: Vec<f64> = svd.S().column_vector().iter().copied().collect();
        let s_max = sigma.first().copied().unwrap_or(0.0);
        if !(s_max.is_finite() && s_max > f64::MIN_POSITIVE) {
            return Err(Error::DegenerateInput);
        }
        let r = sigma.iter().take_while(|&&s| s > rank_tol * s_max).count();
        let sigma: Vec<f64> = sigma[..r].to_vec();
        let u = svd.U().subcols(0, r).to_owned();
        let v = svd.V().subcols(0, r).to_owned();

        // F = U* Ψ₁ V Σ⁻¹
        let mut f = u.transpose() * psi1 * &v;
        for j in 0..r {
            for i in 0..r {
                f[(i, j)] /= sigma[j];
            }
        }

        let eig = f
            .eigen()
            .map_err(|e| Error::EigFailure(format!("{e:?}")))?;
        let mu: Vec<c64> = eig.S().column_vector().iter().copied().collect();
        let mut y = eig.U().to_owned();
        for j in 0..r {
            let norm = (0..r).map(|i| y[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::EigFailure(format!("eigenvector {j} has zero norm")));
            }
            for i in 0..r {
                y[(i, j)] /= norm;
            }
        }

        let f_c = linalg::to_complex(&f);
        let f_norm = frob_sq(&f_c).sqrt();
        if f_norm > 0.0 {
            let d = Mat::from_fn(r, r, |i, j| if i == j { mu[i] } else { c64::new(0.0, 0.0) });
            let resid = frob_sq(&(&f_c * &y - &y * &d)).sqrt() / f_norm;
            if !(resid <= EIG_RESIDUAL_TOL) {
                return Err(Error::EigFailure(format!(
                    "eigen-residual {resid:e} exceeds {EIG_RESIDUAL_TOL:e}"
                )));
            }
        }
        let z_star = linalg::inverse(&y).ok_or_else(|| {
            Error::EigFailure("eigenvectors are not linearly independent".into())
        })?;

        let modes = real_times_complex(&u, &y);
        let projected = u.transpose() * psi0;
        let residual_energy = frob_sq_real(&(psi0 - &u * &projected));
        let data_energy = frob_sq_real(psi0);

        let mut d = Self {
            modes,
            eigenvalues: mu,
            singular_values: sigma,
            left_basis: u,
            right_basis: v,
            eig_right: y,
            eig_left: z_star,
            amplitudes: vec![c64::new(0.0, 0.0); r],
            fps: snap.fps,
            n_snapshots: n,
            frame_dims: (snap.rows, snap.cols),
            projected,
            residual_energy,
            data_energy,
            amplitude_fallback: false,
        };
        let (alpha, fallback) = d.optimal_amplitudes();
        d.amplitudes = alpha;
        d.amplitude_fallback = fallback;
        d.sort_by_amplitude();
        Ok(d)
    }

    /// `α = P⁻¹ q`, falling back to the minimum-norm least-squares solution
    /// when `P` is numerically singular. The flag reports the fallback.
    pub fn optimal_amplitudes(&self) -> (Vec<c64>, bool) {
        let obj = self.objective();
        linalg::solve_hermitian_psd(&obj.gram, &obj.linear)
    }

    pub fn objective(&self) -> AmplitudeObjective {
        let r = self.rank();
        let vand = self.vandermonde(self.n_snapshots).matrix;
        let y = &self.eig_right;
        let g = y.adjoint() * y;
        let vv = &vand * vand.adjoint();
        let gram = Mat::from_fn(r, r, |i, j| g[(i, j)] * vv[(i, j)].conj());
        // V Σ = (U* Ψ₀)ᵀ
        let w = real_times_complex(&self.projected.transpose().to_owned(), y);
        let linear = (0..r)
            .map(|i| {
                let mut acc = c64::new(0.0, 0.0);
                for k in 0..self.n_snapshots {
                    acc += vand[(i, k)] * w[(k, i)];
                }
                acc.conj()
            })
            .collect();
        AmplitudeObjective {
            gram,
            linear,
            constant: self.data_energy,
        }
    }

    /// `J(α) = ‖Ψ₀ − Φ diag(α) V_and‖²_F`, evaluated as the in-subspace
    /// residual plus the (fixed) energy of `Ψ₀` outside the span of `U`.
    pub fn loss(&self, alpha: &[c64]) -> f64 {
        assert_eq!(alpha.len(), self.rank(), "amplitude vector length");
        let vand = self.vandermonde(self.n_snapshots).matrix;
        let r = self.rank();
        let y_alpha = Mat::from_fn(r, r, |i, j| self.eig_right[(i, j)] * alpha[j]);
        let fit = &y_alpha * &vand;
        let resid = Mat::from_fn(r, self.n_snapshots, |i, k| {
            c64::new(self.projected[(i, k)], 0.0) - fit[(i, k)]
        });
        frob_sq(&resid) + self.residual_energy
    }

    /// Real part of `Φ_s diag(α_s) V_and,s` over `n_out` time steps, where `s`
    /// are the modes selected by `mask`. Not clamped.
    pub fn reconstruct(&self, mask: &[bool], n_out: usize) -> Result<Mat<f64>> {
        self.reconstruct_with(&self.amplitudes, mask, n_out)
    }

    /// As [`reconstruct`](Self::reconstruct) with caller-supplied amplitudes.
    pub fn reconstruct_with(&self, alpha: &[c64], mask: &[bool], n_out: usize) -> Result<Mat<f64>> {
        let r = self.rank();
        if mask.len() != r {
            return Err(Error::LengthMismatch {
                expected: r,
                found: mask.len(),
            });
        }
        if alpha.len() != r {
            return Err(Error::LengthMismatch {
                expected: r,
                found: alpha.len(),
            });
        }
        if n_out == 0 {
            return Err(Error::invalid("reconstruction needs at least one frame"));
        }
        let sel: Vec<usize> = (0..r).filter(|&i| mask[i]).collect();
        if sel.is_empty() {
            return Err(Error::EmptyMask);
        }
        let mu: Vec<c64> = sel.iter().map(|&i| self.eigenvalues[i]).collect();
        let vand = Vandermonde::new(&mu, n_out).matrix;
        let coeff = Mat::from_fn(sel.len(), n_out, |i, k| alpha[sel[i]] * vand[(i, k)]);
        let m = self.modes.nrows();
        let phi_re = Mat::from_fn(m, sel.len(), |p, i| self.modes[(p, sel[i])].re);
        let phi_im = Mat::from_fn(m, sel.len(), |p, i| self.modes[(p, sel[i])].im);
        Ok(phi_re * linalg::real_part(&coeff) - phi_im * linalg::imag_part(&coeff))
    }

    /// Real part of `Σ_s α_s μ_sᵗ φ_s` at arbitrary (fractional) time steps,
    /// using the principal branch `μᵗ = exp(t ln μ)`. A negative real
    /// eigenvalue has no real fractional power; its real part is kept.
    pub fn reconstruct_at(&self, alpha: &[c64], mask: &[bool], times: &[f64]) -> Result<Mat<f64>> {
        let r = self.rank();
        if mask.len() != r || alpha.len() != r {
            return Err(Error::LengthMismatch {
                expected: r,
                found: if mask.len() != r { mask.len() } else { alpha.len() },
            });
        }
        if times.is_empty() {
            return Err(Error::invalid("reconstruction needs at least one frame"));
        }
        let sel: Vec<usize> = (0..r).filter(|&i| mask[i]).collect();
        if sel.is_empty() {
            return Err(Error::EmptyMask);
        }
        let coeff = Mat::from_fn(sel.len(), times.len(), |i, k| {
            let mu = self.eigenvalues[sel[i]];
            let t = times[k];
            let power = if t == 0.0 {
                c64::new(1.0, 0.0)
            } else if mu.norm() == 0.0 {
                c64::new(0.0, 0.0)
            } else {
                (mu.ln() * t).exp()
            };
            alpha[sel[i]] * power
        });
        let m = self.modes.nrows();
        let phi_re = Mat::from_fn(m, sel.len(), |p, i| self.modes[(p, sel[i])].re);
        let phi_im = Mat::from_fn(m, sel.len(), |p, i| self.modes[(p, sel[i])].im);
        Ok(phi_re * linalg::real_part(&coeff) - phi_im * linalg::imag_part(&coeff))
    }

    pub fn vandermonde(&self, n_cols: usize) -> Vandermonde {
        Vandermonde::new(&self.eigenvalues, n_cols)
    }

    fn sort_by_amplitude(&mut self) {
        let r = self.rank();
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| {
            let (aa, ab) = (self.amplitudes[a].norm(), self.amplitudes[b].norm());
            ab.total_cmp(&aa).then_with(|| {
                self.eigenvalues[b]
                    .norm()
                    .total_cmp(&self.eigenvalues[a].norm())
            })
        });
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return;
        }
        let m = self.modes.nrows();
        self.modes = Mat::from_fn(m, r, |p, j| self.modes[(p, order[j])]);
        self.eig_right = Mat::from_fn(r, r, |i, j| self.eig_right[(i, order[j])]);
        self.eig_left = Mat::from_fn(r, r, |i, j| self.eig_left[(order[i], j)]);
        self.eigenvalues = order.iter().map(|&i| self.eigenvalues[i]).collect();
        self.amplitudes = order.iter().map(|&i| self.amplitudes[i]).collect();
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Φ`, `M×r`.
    pub fn modes(&self) -> &Mat<c64> {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    /// Retained singular values of `Ψ₀` in nonincreasing order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `U`, `M×r`.
    pub fn left_basis(&self) -> &Mat<f64> {
        &self.left_basis
    }

    /// `V`, `N×r`.
    pub fn right_basis(&self) -> &Mat<f64> {
        &self.right_basis
    }

    /// `Y`, unit-norm right eigenvectors of `F` as columns.
    pub fn eig_right(&self) -> &Mat<c64> {
        &self.eig_right
    }

    /// `Z* = Y⁻¹`; row `i` is `z_i*`.
    pub fn eig_left(&self) -> &Mat<c64> {
        &self.eig_left
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    /// True if the amplitude system was singular and the least-squares
    /// pseudo-solution was used.
    pub fn amplitude_fallback(&self) -> bool {
        self.amplitude_fallback
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn n_snapshots(&self) -> usize {
        self.n_snapshots
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        self.frame_dims
    }

    /// `‖Ψ₀‖²_F`.
    pub fn data_energy(&self) -> f64 {
        self.data_energy
    }

    /// The projected operator `F`, rebuilt as `Y diag(μ) Z*`.
    pub fn reduced_operator(&self) -> Mat<c64> {
        let r = self.rank();
        let yd = Mat::from_fn(r, r, |i, j| self.eig_right[(i, j)] * self.eigenvalues[j]);
        &yd * &self.eig_left
    }

    /// `|Φ|` per mode, each of length `M`.
    pub fn mode_magnitudes(&self) -> Vec<Vec<f64>> {
        (0..self.rank())
            .map(|j| (0..self.modes.nrows()).map(|p| self.modes[(p, j)].norm()).collect())
            .collect()
    }

    pub fn manifest(&self) -> DmdManifest {
        let pair = |z: &c64| [z.re, z.im];
        DmdManifest {
            rank: self.rank(),
            fps: self.fps,
            eigenvalues: self.eigenvalues.iter().map(pair).collect(),
            amplitudes: self.amplitudes.iter().map(pair).collect(),
            singular_values: self.singular_values.clone(),
            amplitude_fallback: self.amplitude_fallback,
        }
    }
}

/// JSON export of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmdManifest {
    pub rank: usize,
    pub fps: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    pub amplitudes: Vec<[f64; 2]>,
    pub singular_values: Vec<f64>,
    pub amplitude_fallback: bool,
}

pub fn decompose(snap: &SnapshotPair, rank_tol: f64) -> Result<DmdDecomposition> {
    DmdDecomposition::decompose(snap, rank_tol)
}
