//! Reference implementations that share no code with the library.
#![allow(dead_code)]

use faer::{c64, Mat};

/// Dense complex least-squares problem `min ‖b − A x‖²` with real `b`.
pub struct VectorizedAmplitudes {
    /// Columns are `vec(φ_i v_iᵀ)` where `v_i[k] = μ_iᵏ`.
    pub a: Vec<Vec<c64>>,
    pub b: Vec<f64>,
}

/// Vectorizes `Ψ₀ ≈ Φ diag(α) V_and` column by column.
pub fn vectorize(modes: &Mat<c64>, eigenvalues: &[c64], psi0: &Mat<f64>) -> VectorizedAmplitudes {
    let (m, n) = (psi0.nrows(), psi0.ncols());
    let a = eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let mut col = Vec::with_capacity(m * n);
            let mut p = c64::new(1.0, 0.0);
            for _ in 0..n {
                for row in 0..m {
                    col.push(modes[(row, i)] * p);
                }
                p *= mu;
            }
            col
        })
        .collect();
    let mut b = Vec::with_capacity(m * n);
    for k in 0..n {
        for row in 0..m {
            b.push(psi0[(row, k)]);
        }
    }
    VectorizedAmplitudes { a, b }
}

impl VectorizedAmplitudes {
    pub fn residual(&self, x: &[c64]) -> f64 {
        (0..self.b.len())
            .map(|row| {
                let mut fit = c64::new(0.0, 0.0);
                for (col, xi) in self.a.iter().zip(x) {
                    fit += col[row] * xi;
                }
                (c64::new(self.b[row], 0.0) - fit).norm_sqr()
            })
            .sum()
    }

    pub fn objective(&self, x: &[c64], gamma: f64) -> f64 {
        self.residual(x) + gamma * x.iter().map(|v| v.norm()).sum::<f64>()
    }

    /// Least squares through the real embedding
    /// `[Re A, −Im A; Im A, Re A] [Re x; Im x] = [b; 0]`, solved by
    /// Householder QR.
    pub fn least_squares(&self) -> Vec<c64> {
        let r = self.a.len();
        let rows = self.b.len();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(2 * r);
        for c in &self.a {
            cols.push(c.iter().map(|v| v.re).chain(c.iter().map(|v| v.im)).collect());
        }
        for c in &self.a {
            cols.push(c.iter().map(|v| -v.im).chain(c.iter().map(|v| v.re)).collect());
        }
        let mut rhs: Vec<f64> = self.b.iter().copied().chain(std::iter::repeat_n(0.0, rows)).collect();
        let x = householder_lstsq(&mut cols, &mut rhs);
        (0..r).map(|i| c64::new(x[i], x[r + i])).collect()
    }

    /// FISTA on `‖b − Ax‖² + γ‖x‖₁` until successive iterates differ by less
    /// than `tol` (relative).
    pub fn proximal_gradient(&self, gamma: f64, tol: f64, max_iter: usize) -> Vec<c64> {
        let r = self.a.len();
        let gram: Vec<Vec<c64>> = (0..r)
            .map(|i| (0..r).map(|j| dot(&self.a[i], &self.a[j])).collect())
            .collect();
        let atb: Vec<c64> = self
            .a
            .iter()
            .map(|col| col.iter().zip(&self.b).map(|(a, &b)| a.conj() * b).sum())
            .collect();
        // Lipschitz constant of ∇ = 2(Gx − Aᵀb) via power iteration.
        let mut v = vec![c64::new(1.0, 0.0); r];
        let mut lmax = 0.0;
        for _ in 0..500 {
            let w = matvec(&gram, &v);
            let nrm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm == 0.0 {
                break;
            }
            lmax = nrm / v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v = w.into_iter().map(|z| z / nrm).collect();
        }
        let step = 1.0 / (2.0 * lmax * 1.01);
        let mut x = vec![c64::new(0.0, 0.0); r];
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..max_iter {
            let gy = matvec(&gram, &y);
            let x_new: Vec<c64> = (0..r)
                .map(|i| {
                    let z = y[i] - (gy[i] - atb[i]) * (2.0 * step);
                    let mag = z.norm();
                    let shrunk = (mag - gamma * step).max(0.0);
                    if mag == 0.0 {
                        z
                    } else {
                        z * (shrunk / mag)
                    }
                })
                .collect();
            let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let diff = x_new.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let scale = x_new.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
            y = (0..r).map(|i| x_new[i] + (x_new[i] - x[i]) * ((t - 1.0) / t_new)).collect();
            x = x_new;
            t = t_new;
            if diff <= tol * scale {
                break;
            }
        }
        x
    }
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn matvec(m: &[Vec<c64>], v: &[c64]) -> Vec<c64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Column-oriented Householder QR least squares for a tall real matrix.
fn householder_lstsq(cols: &mut [Vec<f64>], rhs: &mut [f64]) -> Vec<f64> {
    let n = cols.len();
    let m = rhs.len();
    for k in 0..n {
        let norm = cols[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for col in cols[k..].iter_mut() {
            let s: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vv;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        let s: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vv;
        for (c, vi) in rhs[k..m].iter_mut().zip(&v) {
            *c -= s * vi;
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= cols[j][k] * x[j];
        }
        x[k] = acc / cols[k][k];
    }
    x
}

/// Hungarian-free matching for small sets: greedy nearest pairs, returning
/// the largest matched distance.
pub fn match_eigenvalues(found: &[c64], planted: &[c64]) -> f64 {
    let mut used = vec![false; found.len()];
    let mut worst: f64 = 0.0;
    for p in planted {
        let (idx, dist) = found
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, f)| (i, (f - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("enough eigenvalues to match");
        used[idx] = true;
        worst = worst.max(dist);
    }
    worst
}

/// Is the 4-bit circular string uniform (at most two 0↔1 transitions)?
pub fn is_uniform4(code: usize) -> bool {
    let bits: Vec<char> = format!("{code:04b}").chars().collect();
    (0..4).filter(|&i| bits[i] != bits[(i + 1) % 4]).count() <= 2
}

/// Bin of a 4-bit code: rank among uniform codes, or 14 for the rest.
pub fn bin4(code: usize) -> usize {
    if is_uniform4(code) {
        (0..code).filter(|&c| is_uniform4(c)).count()
    } else {
        14
    }
}

/// Direct per-site LBP-TOP over a `t, y, x` indexed video, 4 neighbours per
/// plane, unnormalized. Every site is tested against its own block.
pub fn brute_force_lbptop(
    video: &dyn Fn(usize, usize, usize) -> f64,
    dims: (usize, usize, usize),
    n_b: usize,
    radii: (usize, usize, usize),
) -> Vec<f64> {
    let (n_t, rows, cols) = dims;
    let (rx, ry, rt) = (radii.0 as isize, radii.1 as isize, radii.2 as isize);
    let block_of = |pos: usize, len: usize| (0..n_b).find(|&b| pos >= b * len / n_b && pos < (b + 1) * len / n_b).unwrap();
    let mut out = vec![0.0; n_b * n_b * 45];
    for t in 0..n_t {
        for y in 0..rows {
            for x in 0..cols {
                let (by, bx) = (block_of(y, rows), block_of(x, cols));
                let inside = |yy: isize, xx: isize, tt: isize| {
                    yy >= 0
                        && xx >= 0
                        && tt >= 0
                        && (yy as usize) < rows
                        && (xx as usize) < cols
                        && (tt as usize) < n_t
                        && block_of(yy as usize, rows) == by
                        && block_of(xx as usize, cols) == bx
                };
                let (ti, yi, xi) = (t as isize, y as isize, x as isize);
                let planes: [[(isize, isize, isize); 4]; 3] = [
                    [(yi, xi + rx, ti), (yi - ry, xi, ti), (yi, xi - rx, ti), (yi + ry, xi, ti)],
                    [(yi, xi + rx, ti), (yi, xi, ti + rt), (yi, xi - rx, ti), (yi, xi, ti - rt)],
                    [(yi + ry, xi, ti), (yi, xi, ti + rt), (yi - ry, xi, ti), (yi, xi, ti - rt)],
                ];
                let centre = video(t, y, x);
                for (p, nbrs) in planes.iter().enumerate() {
                    if !nbrs.iter().all(|&(a, b, c)| inside(a, b, c)) {
                        continue;
                    }
                    let mut code = 0;
                    for (i, &(a, b, c)) in nbrs.iter().enumerate() {
                        if video(c as usize, a as usize, b as usize) >= centre {
                            code |= 1 << i;
                        }
                    }
                    out[(by * n_b + bx) * 45 + p * 15 + bin4(code)] += 1.0;
                }
            }
        }
    }
    out
}
