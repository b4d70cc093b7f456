//! Active subspaces: gradient covariance, its spectrum, the active/inactive
//! split and the maps between full and reduced coordinates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::domain::GradientSet;
use crate::error::{Error, Result};
use crate::linalg::{self, orthonormality_defect};
use crate::rng::RngStream;

/// Negative eigenvalues this close to zero (relative to `max(1, ‖C‖_F)`) are
/// treated as round-off and clamped.
pub const EIGVAL_CLAMP: f64 = 1e-12;
/// Maximum rejection-sampling attempts per point in [`Subspace::backward`].
pub const MAX_FIBER_ATTEMPTS: usize = 10_000;

/// `C = Σ_m w_m g_mᵀ g_m`, uniform weights `1/M` by default.
pub fn covariance_matrix(grads: &GradientSet, weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
    weighted_outer(grads.grads(), weights)
}

pub(crate) fn weighted_outer(rows: &DMatrix<f64>, weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
    let m = rows.nrows();
    let w = resolve_weights(m, weights)?;
    let mut scaled = rows.clone();
    for (i, wi) in w.iter().enumerate() {
        scaled.row_mut(i).scale_mut(wi.sqrt());
    }
    let c = scaled.transpose() * &scaled;
    Ok((&c + c.transpose()) * 0.5)
}

pub(crate) fn resolve_weights(m: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    match weights {
        None => Ok(vec![1.0 / m as f64; m]),
        Some(w) => {
            if w.len() != m {
                return Err(Error::InvalidWeights(format!(
                    "{} weights for {} gradient rows",
                    w.len(),
                    m
                )));
            }
            if let Some(bad) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidWeights(format!(
                    "weight {bad} is not a nonnegative number"
                )));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
            }
            Ok(w.to_vec())
        }
    }
}

/// Eigenpairs of a symmetric matrix, descending, with the sign convention
/// applied and round-off negatives clamped to zero.
pub fn eigendecompose(c: &DMatrix<f64>) -> Result<linalg::Eigen> {
    let mut eig = linalg::sym_eigen(c)?;
    let fro = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    clamp_round_off(&mut eig.values, fro);
    Ok(eig)
}

pub(crate) fn clamp_round_off(values: &mut DVector<f64>, scale: f64) {
    let tol = EIGVAL_CLAMP * scale.max(1.0);
    for v in values.iter_mut() {
        if *v < 0.0 && *v >= -tol {
            *v = 0.0;
        }
    }
}

/// How to choose the active dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    FixedDim(usize),
    /// Largest drop between consecutive eigenvalues on a log10 scale.
    SpectralGap,
}

/// Pick the active dimension `k` from a descending spectrum.
pub fn partition(eigvals: &[f64], criterion: Criterion) -> Result<usize> {
    let d = eigvals.len();
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 eigenvalues to partition, got {d}"
        )));
    }
    match criterion {
        Criterion::FixedDim(k) => {
            if k == 0 || k >= d {
                return Err(Error::InvalidArgument(format!(
                    "active dimension {k} outside [1, {}]",
                    d - 1
                )));
            }
            Ok(k)
        }
        Criterion::SpectralGap => {
            let lead = eigvals[0];
            if !(lead > 0.0) {
                return Err(Error::DegenerateSpectrum);
            }
            let floor = 1e-16 * lead;
            let logs: Vec<f64> = eigvals.iter().map(|&l| l.max(floor).log10()).collect();
            let mut best = 0;
            let mut best_gap = f64::NEG_INFINITY;
            for i in 0..d - 1 {
                let gap = logs[i] - logs[i + 1];
                if gap > best_gap {
                    best_gap = gap;
                    best = i;
                }
            }
            Ok(best + 1)
        }
    }
}

/// Spectrum of a gradient covariance split into active and inactive parts.
///
/// `eigvecs` is normally `d×d`. When the covariance was assembled from fewer
/// rows than dimensions (feature-space covariances), only the eigenvectors of
/// the numerically nonzero spectrum are stored; the rest of `R^d` is the
/// orthogonal complement and belongs to the inactive subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    k: usize,
}

impl Subspace {
    pub fn new(eigvals: DVector<f64>, eigvecs: DMatrix<f64>, k: usize) -> Result<Self> {
        let d = eigvals.len();
        if eigvecs.nrows() != d || eigvecs.ncols() > d {
            return Err(Error::ShapeMismatch(format!(
                "{} eigenvalues but eigenvector matrix is {}x{}",
                d,
                eigvecs.nrows(),
                eigvecs.ncols()
            )));
        }
        if k == 0 || k >= d || k > eigvecs.ncols() {
            return Err(Error::InvalidArgument(format!(
                "active dimension {k} outside [1, {}]",
                (d - 1).min(eigvecs.ncols())
            )));
        }
        if eigvals.iter().any(|v| *v < 0.0) || eigvals.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "eigenvalues must be nonnegative and descending".into(),
            ));
        }
        if orthonormality_defect(&eigvecs) > 1e-10 {
            return Err(Error::InvalidBasis("eigenvectors are not orthonormal".into()));
        }
        Ok(Self { eigvals, eigvecs, k })
    }

    /// Covariance, eigendecomposition and partition in one step.
    pub fn fit(grads: &GradientSet, weights: Option<&[f64]>, criterion: Criterion) -> Result<Self> {
        let c = covariance_matrix(grads, weights)?;
        Self::from_covariance(&c, criterion)
    }

    pub fn from_covariance(c: &DMatrix<f64>, criterion: Criterion) -> Result<Self> {
        let eig = eigendecompose(c)?;
        if !(eig.values[0] > 0.0) {
            return Err(Error::DegenerateSpectrum);
        }
        let k = partition(eig.values.as_slice(), criterion)?;
        Self::new(eig.values, eig.vectors, k)
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// A copy with a different active dimension.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.eigvals.clone(), self.eigvecs.clone(), k)
    }

    /// Active block, `d×k`.
    pub fn w1(&self) -> DMatrix<f64> {
        self.eigvecs.columns(0, self.k).into_owned()
    }

    /// Stored inactive block (columns `k..`).
    pub fn w2(&self) -> DMatrix<f64> {
        self.eigvecs.columns(self.k, self.eigvecs.ncols() - self.k).into_owned()
    }

    /// Active coordinates `Y = X · W1` of normalized points.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "points have {} columns, subspace dimension is {}",
                x.ncols(),
                self.dim()
            )));
        }
        Ok(x * self.eigvecs.columns(0, self.k))
    }

    /// Points `x ∈ [-1, 1]^d` with `W1ᵀ x = y`, sampled uniformly on the
    /// fiber by rejection from a box enclosing the feasible inactive
    /// coordinates.
    pub fn backward(&self, y: &[f64], n_points: usize, rng: &RngStream) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if y.len() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "reduced point has length {}, active dimension is {}",
                y.len(),
                self.k
            )));
        }
        if self.eigvecs.ncols() != d {
            return Err(Error::InvalidArgument(
                "backward mapping needs a complete eigenvector basis".into(),
            ));
        }
        let w1 = self.w1();
        let w2 = self.w2();
        let inactive = d - self.k;
        let base = &w1 * DVector::from_column_slice(y);
        let infeasible = || Error::InfeasibleFiber { y: y.to_vec() };
        let boxes = fiber_box(&base, &w2).ok_or_else(infeasible)?;

        let mut gen = rng.generator();
        let mut out = DMatrix::zeros(n_points, d);
        let mut z = DVector::zeros(inactive);
        let tol = crate::domain::DOMAIN_TOL;
        for p in 0..n_points {
            let mut accepted = false;
            for _ in 0..MAX_FIBER_ATTEMPTS {
                for (j, (lo, hi)) in boxes.iter().enumerate() {
                    z[j] = lo + (hi - lo) * gen.random::<f64>();
                }
                let x = &base + &w2 * &z;
                if x.iter().all(|v| v.abs() <= 1.0 + tol) {
                    for (j, v) in x.iter().enumerate() {
                        out[(p, j)] = v.clamp(-1.0, 1.0);
                    }
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(infeasible());
            }
        }
        Ok(out)
    }
}

/// Per-axis interval enclosing `{z : |base + W2 z|_∞ <= 1}`, tightened by
/// interval constraint propagation. `None` if the set is provably empty.
fn fiber_box(base: &DVector<f64>, w2: &DMatrix<f64>) -> Option<Vec<(f64, f64)>> {
    let (d, m) = w2.shape();
    // z = W2ᵀ x with x in the cube, so |z_j| <= ‖W2[:, j]‖₁
    let mut boxes: Vec<(f64, f64)> = (0..m)
        .map(|j| {
            let r = w2.column(j).iter().map(|v| v.abs()).sum::<f64>();
            (-r, r)
        })
        .collect();
    let slack = 1e-12;
    for _ in 0..50 {
        let mut changed = false;
        for i in 0..d {
            // -1 <= base_i + Σ_j w_ij z_j <= 1
            for j in 0..m {
                let a = w2[(i, j)];
                if a.abs() < 1e-14 {
                    continue;
                }
                let (mut rest_lo, mut rest_hi) = (base[i], base[i]);
                for l in 0..m {
                    if l == j {
                        continue;
                    }
                    let c = w2[(i, l)];
                    let (lo, hi) = boxes[l];
                    rest_lo += (c * lo).min(c * hi);
                    rest_hi += (c * lo).max(c * hi);
                }
                // a z_j in [-1 - rest_hi, 1 - rest_lo]
                let (mut lo, mut hi) = ((-1.0 - slack - rest_hi) / a, (1.0 + slack - rest_lo) / a);
                if a < 0.0 {
                    std::mem::swap(&mut lo, &mut hi);
                }
                let (cur_lo, cur_hi) = boxes[j];
                let new = (cur_lo.max(lo), cur_hi.min(hi));
                if new.0 > new.1 + 1e-12 {
                    return None;
                }
                let new = if new.0 > new.1 { (new.0, new.0) } else { new };
                if new.0 > cur_lo + 1e-15 || new.1 < cur_hi - 1e-15 {
                    changed = true;
                }
                boxes[j] = new;
            }
        }
        if !changed {
            break;
        }
    }
    Some(boxes)
}

/// `‖A Aᵀ - B Bᵀ‖_2`, the sine of the largest principal angle between the
/// spans of two orthonormal bases.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "bases have shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    for (name, m) in [("first", a), ("second", b)] {
        if orthonormality_defect(m) > 1e-8 {
            return Err(Error::InvalidBasis(format!("{name} basis is not orthonormal")));
        }
    }
    let diff = a * a.transpose() - b * b.transpose();
    let dist = linalg::sym_spectral_norm(&diff)?;
    Ok(dist.clamp(0.0, 1.0))
}

/// Per-eigenvalue extrema and mean subspace distances over bootstrap
/// replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub n_boot: usize,
    pub eigval_lo: DVector<f64>,
    pub eigval_hi: DVector<f64>,
    /// Entry `k - 1` is the mean distance between plug-in and replicate
    /// active subspaces of dimension `k`.
    pub subspace_dist: DVector<f64>,
}

/// Resample gradient rows with replacement `n_boot` times. Replicate `r`
/// draws from stream `rng.split(r)`.
pub fn bootstrap(grads: &GradientSet, n_boot: usize, rng: &RngStream) -> Result<BootstrapSummary> {
    if n_boot < 1 {
        return Err(Error::InvalidArgument("n_boot must be at least 1".into()));
    }
    let m = grads.len();
    let d = grads.dim();
    let plug = eigendecompose(&covariance_matrix(grads, None)?)?;
    let mut lo = plug.values.clone();
    let mut hi = plug.values.clone();
    let mut dist_sum = DVector::zeros(d.saturating_sub(1));

    for r in 0..n_boot {
        let mut gen = rng.split(r as u64).generator();
        let rows: Vec<usize> = (0..m).map(|_| gen.random_range(0..m)).collect();
        let rep = eigendecompose(&covariance_matrix(&grads.select_rows(&rows)?, None)?)?;
        for i in 0..d {
            lo[i] = lo[i].min(rep.values[i]);
            hi[i] = hi[i].max(rep.values[i]);
        }
        for k in 1..d {
            let a = plug.vectors.columns(0, k).into_owned();
            let b = rep.vectors.columns(0, k).into_owned();
            dist_sum[k - 1] += subspace_distance(&a, &b)?;
        }
    }
    Ok(BootstrapSummary {
        n_boot,
        eigval_lo: lo,
        eigval_hi: hi,
        subspace_dist: dist_sum / n_boot as f64,
    })
}
