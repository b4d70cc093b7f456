//! Dense linear algebra kernels.
//!
//! The symmetric eigensolver is a cyclic Jacobi iteration. It is used for
//! every covariance in input space and for feature-space covariances up to
//! [`JACOBI_MAX_DIM`]; larger problems go through nalgebra's tridiagonal
//! QR solver (see [`sym_eigen`]). Least squares uses a Householder QR with
//! column pivoting so rank deficiency is reported instead of silently
//! producing huge coefficients.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Stopping rule: off-diagonal Frobenius norm below this fraction of `‖A‖_F`.
pub const JACOBI_TOL: f64 = 1e-14;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Above this size the cubic-per-sweep Jacobi iteration is replaced by
/// tridiagonal QR.
pub const JACOBI_MAX_DIM: usize = 128;
/// Symmetry tolerance accepted by [`sym_eigen`], relative to `max(1, ‖A‖_F)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix: values descending, vectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn check_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidMatrix(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix("matrix has non-finite entries".into()));
    }
    let scale = frobenius(a).max(1.0);
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let diff = (a[(i, j)] - a[(j, i)]).abs();
            if diff > tol * scale {
                return Err(Error::InvalidMatrix(format!(
                    "not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Raw cyclic Jacobi iteration. Returns unsorted eigenvalues and the
/// accumulated rotation matrix.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    // symmetrize so the column-only updates below stay consistent
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_TOL * frobenius(&m);

    let off_norm = |m: &DMatrix<f64>| {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&m) > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::InvalidMatrix(format!(
                "Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // columns p and q are contiguous in column-major storage
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    m[(p, k)] = m[(k, p)];
                    m[(q, k)] = m[(k, q)];
                }
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok((m.diagonal(), v))
}

/// Flip each column so its largest-magnitude entry is positive. Near-ties
/// (within 1e-12 relative) go to the lowest index.
pub fn apply_sign_convention(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let max = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max == 0.0 {
            continue;
        }
        let lead = col.iter().position(|x| x.abs() >= max * (1.0 - 1e-12)).unwrap_or(0);
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
}

fn sort_descending(values: DVector<f64>, vectors: DMatrix<f64>) -> Eigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable, so equal eigenvalues keep solver order
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let vectors = vectors.select_columns(&order);
    Eigen { values, vectors }
}

/// Symmetric eigendecomposition with descending eigenvalues and the sign
/// convention applied.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<Eigen> {
    check_symmetric(a, SYMMETRY_TOL)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    let (values, vectors) = if n <= JACOBI_MAX_DIM {
        jacobi_eigen(a)?
    } else {
        let sym = (a + a.transpose()) * 0.5;
        let e = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
            .ok_or_else(|| Error::InvalidMatrix("tridiagonal eigensolver did not converge".into()))?;
        (e.eigenvalues, e.eigenvectors)
    };
    let mut eig = sort_descending(values, vectors);
    apply_sign_convention(&mut eig.vectors);
    Ok(eig)
}

/// Leading eigenpairs of `C = Σ_m w_m r_mᵀ r_m` for a row set `rows` (M×N)
/// with more columns than rows, computed through the M×M Gram matrix.
///
/// Returns all N eigenvalues (the trailing N - M are exact zeros) and the
/// eigenvectors of the numerically nonzero part of the spectrum, i.e. those
/// with eigenvalue above `1e-8 · λ_max`, re-orthonormalized.
pub fn psd_eigen_wide(rows: &DMatrix<f64>, weights: &[f64]) -> Result<Eigen> {
    let (m, n) = rows.shape();
    debug_assert_eq!(weights.len(), m);
    let mut scaled = rows.clone();
    for (i, &w) in weights.iter().enumerate() {
        scaled.row_mut(i).scale_mut(w.sqrt());
    }
    let gram = &scaled * scaled.transpose();
    let g = sym_eigen(&gram)?;

    let lead = g.values[0].max(0.0);
    let mut values = DVector::zeros(n);
    let mut kept = Vec::new();
    for i in 0..m {
        let lam = g.values[i];
        values[i] = if lam.abs() <= 1e-12 * lead.max(1.0) && lam < 0.0 {
            0.0
        } else {
            lam
        };
        if lead > 0.0 && lam > 1e-8 * lead {
            kept.push(i);
        }
    }
    // v_i = Rᵀ u_i / √λ_i, orthonormal up to round-off amplified by λ_max / λ_i
    let mut u = g.vectors.select_columns(&kept);
    for (c, &i) in kept.iter().enumerate() {
        u.column_mut(c).scale_mut(1.0 / g.values[i].sqrt());
    }
    let mut vectors = scaled.transpose() * u;
    reorthonormalize(&mut vectors);
    apply_sign_convention(&mut vectors);
    Ok(Eigen { values, vectors })
}

/// Cholesky QR of a nearly orthonormal matrix: `V ← V L⁻ᵀ` with
/// `VᵀV = L Lᵀ`. Falls back to [`gram_schmidt`] if the Gram matrix is not
/// numerically positive definite.
fn reorthonormalize(v: &mut DMatrix<f64>) {
    let gram = v.transpose() * &*v;
    match gram.cholesky() {
        Some(ch) => {
            let mut vt = v.transpose();
            ch.l_dirty().solve_lower_triangular_mut(&mut vt);
            *v = vt.transpose();
        }
        None => gram_schmidt(v),
    }
}

/// In-place modified Gram-Schmidt with one reorthogonalization pass.
pub fn gram_schmidt(a: &mut DMatrix<f64>) {
    for j in 0..a.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = a.column(i).dot(&a.column(j));
                let qi = a.column(i).clone_owned();
                a.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = a.column(j).norm();
        if norm > 0.0 {
            a.column_mut(j).scale_mut(1.0 / norm);
        }
    }
}

/// Largest singular value of a symmetric matrix, i.e. `max |λ|`.
pub fn sym_spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let eig = sym_eigen(a)?;
    Ok(eig.values.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// `‖AᵀA - I‖_F`.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let k = a.ncols();
    frobenius(&(a.transpose() * a - DMatrix::<f64>::identity(k, k)))
}

/// Least-squares solution from a column-pivoted Householder QR.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut tau = vec![0.0; steps];
        let mut norms: Vec<f64> = (0..n).map(|j| qr.column(j).norm_squared()).collect();

        for k in 0..steps {
            // pivot: remaining column of largest norm (lowest index on ties)
            let mut best = k;
            for j in (k + 1)..n {
                if norms[j] > norms[best] {
                    best = j;
                }
            }
            if best != k {
                qr.swap_columns(k, best);
                perm.swap(k, best);
                norms.swap(k, best);
            }

            let alpha = qr.view((k, k), (m - k, 1)).norm();
            if alpha == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let x0 = qr[(k, k)];
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            let v0 = x0 - beta;
            for i in (k + 1)..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = (beta - x0) / beta;
            qr[(k, k)] = beta;

            for j in (k + 1)..n {
                let mut s = qr[(k, j)];
                for i in (k + 1)..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in (k + 1)..m {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= s * vik;
                }
                // recompute rather than downdate; sizes here are small
                norms[j] = qr.view((k + 1, j), (m - k - 1, 1)).norm_squared();
            }
        }
        Self { qr, tau, perm }
    }

    /// Magnitudes of the diagonal of R, in pivot order.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|k| self.qr[(k, k)].abs()).collect()
    }

    /// Whether every pivot is at least `rel_tol` times the largest and the
    /// system has at least as many rows as unknowns.
    pub fn is_full_rank(&self, rel_tol: f64) -> bool {
        let n = self.qr.ncols();
        if self.tau.len() < n {
            return false;
        }
        let piv = self.pivots();
        let largest = piv.first().copied().unwrap_or(0.0);
        largest > 0.0 && piv.iter().all(|&p| p >= rel_tol * largest)
    }

    /// Minimizer of `‖A x - b‖_2`, or `None` when rank deficient at `rel_tol`.
    pub fn solve(&self, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
        if !self.is_full_rank(rel_tol) {
            return None;
        }
        let (m, n) = self.qr.shape();
        let mut y = b.clone();
        for k in 0..n {
            let mut s = y[k];
            for i in (k + 1)..m {
                s += self.qr[(i, k)] * y[i];
            }
            s *= self.tau[k];
            y[k] -= s;
            for i in (k + 1)..m {
                y[i] -= s * self.qr[(i, k)];
            }
        }
        let mut z = DVector::zeros(n);
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in (k + 1)..n {
                s -= self.qr[(k, j)] * z[j];
            }
            z[k] = s / self.qr[(k, k)];
        }
        let mut x = DVector::zeros(n);
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        Some(x)
    }
}

/// Row vector `g · J⁺` for a tall matrix `J`, with the pseudoinverse taken
/// from the SVD and singular values below `rel_tol · σ_max` dropped.
/// `None` when every singular value is dropped.
pub fn pinv_row_action(j: &DMatrix<f64>, g: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    let svd = SVD::new(j.clone(), true, true);
    let u = svd.u.as_ref()?;
    let vt = svd.v_t.as_ref()?;
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    if !(smax > 0.0) {
        return None;
    }
    // J = U Σ Vᵀ, J⁺ = V Σ⁺ Uᵀ, so g J⁺ = ((g V) Σ⁺) Uᵀ
    let gv = vt * g;
    let mut coef = DVector::zeros(svd.singular_values.len());
    let mut any = false;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax {
            coef[i] = gv[i] / s;
            any = true;
        }
    }
    if !any {
        return None;
    }
    Some(u * coef)
}
