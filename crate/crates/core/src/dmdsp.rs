//! Sparsity-promoting amplitude selection.
//!
//! For a fixed `γ`, ADMM minimizes `J(α) + γ Σ|α_i|` through the splitting
//! `α = β`: a Cholesky solve with `P + ρ/2 I` for `α`, complex soft
//! thresholding for `β`, and a scaled dual ascent. The zero pattern of `β`
//! is then frozen and the amplitudes re-fit ("polished") by solving the
//! bordered KKT system
//!
//! ```text
//! [ P   E ] [ α ]   [ q ]
//! [ Eᵀ  0 ] [ ν ] = [ 0 ]
//! ```
//!
//! where the columns of `E` select the zeroed entries.

use std::io::Write;

use faer::linalg::solvers::{Llt, Solve};
use faer::{c64, Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmd::{AmplitudeObjective, DmdDecomposition};
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_ZERO_TOL: f64 = 1e-6;
pub const DEFAULT_GAMMA_MIN: f64 = 38.0;
pub const DEFAULT_GAMMA_MAX: f64 = 20000.0;
pub const DEFAULT_GAMMA_COUNT: usize = 400;

const KKT_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub rho: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 10_000,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutcome {
    /// The sparse iterate `β`; exact zeros where thresholded.
    pub alpha: Vec<c64>,
    pub iterations: usize,
    /// False when `max_iter` was reached; `alpha` is then the last iterate.
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// ADMM for one objective; the factorization of `P + ρ/2 I` is shared
/// across `γ` values.
pub struct AdmmSolver<'a> {
    objective: &'a AmplitudeObjective,
    params: AdmmParams,
    factor: Llt<c64>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(objective: &'a AmplitudeObjective, params: AdmmParams) -> Result<Self> {
        if !(params.rho > 0.0 && params.rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be positive, got {}", params.rho)));
        }
        if params.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        let r = objective.rank();
        let half_rho = c64::new(params.rho / 2.0, 0.0);
        let shifted = Mat::from_fn(r, r, |i, j| {
            let p = objective.gram[(i, j)];
            if i == j {
                p + half_rho
            } else {
                p
            }
        });
        let factor = shifted
            .llt(Side::Lower)
            .map_err(|e| Error::invalid(format!("P + rho/2 I is not positive definite: {e:?}")))?;
        Ok(Self {
            objective,
            params,
            factor,
        })
    }

    pub fn solve(&self, gamma: f64) -> Result<AdmmOutcome> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
        }
        let AdmmParams {
            rho,
            max_iter,
            eps_abs,
            eps_rel,
        } = self.params;
        let q = &self.objective.linear;
        let r = q.len();
        let sqrt_r = (r as f64).sqrt();
        let kappa = gamma / rho;
        let zero = c64::new(0.0, 0.0);

        let mut y = vec![zero; r];
        let mut lambda = vec![zero; r];
        let mut rhs = Mat::<c64>::zeros(r, 1);
        let mut outcome = AdmmOutcome {
            alpha: y.clone(),
            iterations: 0,
            converged: false,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        };
        for iter in 1..=max_iter {
            for i in 0..r {
                rhs[(i, 0)] = q[i] + (y[i] - lambda[i] / rho) * (rho / 2.0);
            }
            let x = self.factor.solve(&rhs);

            let mut prim = 0.0;
            let mut dual = 0.0;
            let (mut nx, mut ny, mut nl) = (0.0, 0.0, 0.0);
            for i in 0..r {
                let xi = x[(i, 0)];
                let yi = soft_threshold(xi + lambda[i] / rho, kappa);
                lambda[i] += (xi - yi) * rho;
                prim += (xi - yi).norm_sqr();
                dual += (yi - y[i]).norm_sqr();
                nx += xi.norm_sqr();
                ny += yi.norm_sqr();
                nl += lambda[i].norm_sqr();
                y[i] = yi;
            }
            let prim = prim.sqrt();
            let dual = rho * dual.sqrt();
            let eps_prim = sqrt_r * eps_abs + eps_rel * nx.sqrt().max(ny.sqrt());
            let eps_dual = sqrt_r * eps_abs + eps_rel * nl.sqrt();

            outcome.iterations = iter;
            outcome.primal_residual = prim;
            outcome.dual_residual = dual;
            if prim < eps_prim && dual < eps_dual {
                outcome.converged = true;
                break;
            }
        }
        if !outcome.converged {
            log::debug!("ADMM hit max_iter={max_iter} at gamma={gamma}");
        }
        outcome.alpha = y;
        Ok(outcome)
    }
}

#[inline]
fn soft_threshold(v: c64, kappa: f64) -> c64 {
    let mag = v.norm();
    if mag <= kappa {
        c64::new(0.0, 0.0)
    } else {
        v * (1.0 - kappa / mag)
    }
}

/// Approximately minimizes `J(α) + γ‖α‖₁` for the decomposition's
/// amplitude objective.
pub fn admm_solve(d: &DmdDecomposition, gamma: f64, params: &AdmmParams) -> Result<AdmmOutcome> {
    let obj = d.objective();
    AdmmSolver::new(&obj, *params)?.solve(gamma)
}

/// `true` marks an amplitude treated as zero: `|α_i| ≤ zero_tol · max|α|`.
pub fn extract_structure(alpha: &[c64], zero_tol: f64) -> Result<Vec<bool>> {
    if !(zero_tol >= 0.0) {
        return Err(Error::invalid(format!("zero_tol must be nonnegative, got {zero_tol}")));
    }
    let max = alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let structure: Vec<bool> = alpha.iter().map(|a| a.norm() <= zero_tol * max).collect();
    if structure.iter().all(|&z| z) {
        return Err(Error::AllZero);
    }
    Ok(structure)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolishOutcome {
    pub alpha: Vec<c64>,
    /// The KKT system was singular and the reduced system was solved instead.
    pub fallback: bool,
}

/// Optimal amplitudes under the fixed zero pattern `structure`.
pub fn polish(d: &DmdDecomposition, structure: &[bool]) -> Result<PolishOutcome> {
    polish_objective(&d.objective(), structure)
}

pub fn polish_objective(obj: &AmplitudeObjective, structure: &[bool]) -> Result<PolishOutcome> {
    let r = obj.rank();
    if structure.len() != r {
        return Err(Error::LengthMismatch {
            expected: r,
            found: structure.len(),
        });
    }
    if structure.iter().all(|&z| z) {
        return Err(Error::AllZero);
    }
    let zeroed: Vec<usize> = (0..r).filter(|&i| structure[i]).collect();
    let n = r + zeroed.len();
    let one = c64::new(1.0, 0.0);
    let mut kkt = Mat::<c64>::zeros(n, n);
    for j in 0..r {
        for i in 0..r {
            kkt[(i, j)] = obj.gram[(i, j)];
        }
    }
    for (col, &i) in zeroed.iter().enumerate() {
        kkt[(i, r + col)] = one;
        kkt[(r + col, i)] = one;
    }
    let mut rhs = obj.linear.clone();
    rhs.resize(n, c64::new(0.0, 0.0));

    let (mut alpha, fallback) = match linalg::solve_general(&kkt, &rhs, KKT_RESIDUAL_TOL) {
        Some(x) => (x[..r].to_vec(), false),
        None => (reduced_solve(obj, structure), true),
    };
    for &i in &zeroed {
        alpha[i] = c64::new(0.0, 0.0);
    }
    Ok(PolishOutcome { alpha, fallback })
}

fn reduced_solve(obj: &AmplitudeObjective, structure: &[bool]) -> Vec<c64> {
    let keep: Vec<usize> = (0..structure.len()).filter(|&i| !structure[i]).collect();
    let k = keep.len();
    let sub = Mat::from_fn(k, k, |i, j| obj.gram[(keep[i], keep[j])]);
    let q: Vec<c64> = keep.iter().map(|&i| obj.linear[i]).collect();
    let (x, _) = linalg::solve_hermitian_psd(&sub, &q);
    let mut alpha = vec![c64::new(0.0, 0.0); structure.len()];
    for (v, &i) in x.into_iter().zip(&keep) {
        alpha[i] = v;
    }
    alpha
}

/// One point of a `γ` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityRecord {
    pub gamma: f64,
    pub alpha_admm: Vec<c64>,
    /// `true` = amplitude constrained to zero.
    pub structure: Vec<bool>,
    pub alpha_polished: Vec<c64>,
    pub loss: f64,
    pub nnz: usize,
    pub percent_preserved: f64,
    pub performance_loss_pct: f64,
    pub admm_converged: bool,
    pub admm_iterations: usize,
    pub polish_fallback: bool,
    /// Every amplitude was thresholded away; the record carries the empty
    /// reconstruction.
    pub all_zero: bool,
}

impl SparsityRecord {
    pub fn retained_mask(&self) -> Vec<bool> {
        self.structure.iter().map(|&z| !z).collect()
    }
}

/// `count` points equispaced in log scale over `[min, max]`.
pub fn log_spaced_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && count >= 1) {
        return Err(Error::invalid(format!(
            "log grid needs 0 < min <= max and count >= 1, got [{min}, {max}] x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.ln(), max.ln());
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                min
            } else if i == count - 1 {
                max
            } else {
                (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// 400 log-spaced values in `[38, 20000]`.
pub fn default_gamma_grid() -> Vec<f64> {
    log_spaced_grid(DEFAULT_GAMMA_MIN, DEFAULT_GAMMA_MAX, DEFAULT_GAMMA_COUNT)
        .expect("static grid parameters are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub admm: AdmmParams,
    pub zero_tol: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            admm: AdmmParams::default(),
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }
}

/// ADMM, structure extraction, polishing and loss for each `γ`. Points are
/// solved independently (in parallel) and returned in grid order.
pub fn gamma_sweep(d: &DmdDecomposition, grid: &[f64], params: &SweepParams) -> Result<Vec<SparsityRecord>> {
    if grid.is_empty() {
        return Err(Error::invalid("gamma grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("gamma grid must be strictly increasing"));
    }
    let obj = d.objective();
    let solver = AdmmSolver::new(&obj, params.admm)?;
    grid.par_iter()
        .map(|&gamma| sweep_point(d, &obj, &solver, gamma, params.zero_tol))
        .collect()
}

fn sweep_point(
    d: &DmdDecomposition,
    obj: &AmplitudeObjective,
    solver: &AdmmSolver<'_>,
    gamma: f64,
    zero_tol: f64,
) -> Result<SparsityRecord> {
    let r = d.rank();
    let admm = solver.solve(gamma)?;
    let (structure, alpha_polished, polish_fallback, all_zero) =
        match extract_structure(&admm.alpha, zero_tol) {
            Ok(structure) => {
                let p = polish_objective(obj, &structure)?;
                (structure, p.alpha, p.fallback, false)
            }
            Err(Error::AllZero) => (vec![true; r], vec![c64::new(0.0, 0.0); r], false, true),
            Err(e) => return Err(e),
        };
    let nnz = structure.iter().filter(|&&z| !z).count();
    let loss = d.loss(&alpha_polished);
    let energy = d.data_energy();
    Ok(SparsityRecord {
        gamma,
        alpha_admm: admm.alpha,
        structure,
        alpha_polished,
        loss,
        nnz,
        percent_preserved: 100.0 * nnz as f64 / r as f64,
        performance_loss_pct: if energy > 0.0 {
            100.0 * (loss / energy).sqrt()
        } else {
            0.0
        },
        admm_converged: admm.converged,
        admm_iterations: admm.iterations,
        polish_fallback,
        all_zero,
    })
}

/// Record closest to `p_target` percent preserved; ties go to the smaller
/// loss, then the smaller `γ`.
pub fn select_percentage(records: &[SparsityRecord], p_target: f64) -> Result<&SparsityRecord> {
    if !(p_target > 0.0 && p_target <= 100.0) {
        return Err(Error::invalid(format!("target percentage must be in (0, 100], got {p_target}")));
    }
    records
        .iter()
        .min_by(|a, b| {
            let da = (a.percent_preserved - p_target).abs();
            let db = (b.percent_preserved - p_target).abs();
            da.total_cmp(&db)
                .then(a.loss.total_cmp(&b.loss))
                .then(a.gamma.total_cmp(&b.gamma))
        })
        .ok_or_else(|| Error::invalid("no sparsity records to select from"))
}

/// CSV with columns `gamma,nnz,percent_preserved,loss,performance_loss_pct`.
pub fn write_sweep_csv<W: Write>(records: &[SparsityRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "nnz", "percent_preserved", "loss", "performance_loss_pct"])?;
    for rec in records {
        w.write_record([
            rec.gamma.to_string(),
            rec.nnz.to_string(),
            rec.percent_preserved.to_string(),
            rec.loss.to_string(),
            rec.performance_loss_pct.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
