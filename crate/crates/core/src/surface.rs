//! Response surfaces on reduced coordinates and the NRMSE yardstick used to
//! compare reductions.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::active::Subspace;
use crate::domain::{GradientSet, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::PivotedQr;
use crate::rng::RngStream;

pub const DEFAULT_RIDGE: f64 = 1e-8;
const POLY_RANK_TOL: f64 = 1e-12;

/// Exponent tuples of all monomials in `k` variables with total degree at
/// most `degree`, in graded lexicographic order.
pub fn monomial_exponents(k: usize, degree: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, k: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            fill(prefix, k, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree {
        fill(&mut Vec::with_capacity(k), k, total, &mut out);
    }
    out
}

/// `C(k + degree, degree)`.
pub fn monomial_count(k: usize, degree: usize) -> usize {
    let mut c: usize = 1;
    for i in 1..=degree {
        c = c * (k + i) / i;
    }
    c
}

fn design(y: &DMatrix<f64>, exps: &[Vec<usize>]) -> DMatrix<f64> {
    DMatrix::from_fn(y.nrows(), exps.len(), |r, c| {
        exps[c]
            .iter()
            .enumerate()
            .map(|(j, &e)| y[(r, j)].powi(e as i32))
            .product()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolySurface {
    degree: usize,
    k: usize,
    coeffs: DVector<f64>,
}

impl PolySurface {
    pub fn new(k: usize, degree: usize, coeffs: DVector<f64>) -> Result<Self> {
        if k == 0 || degree == 0 {
            return Err(Error::InvalidArgument("polynomial needs k >= 1 and degree >= 1".into()));
        }
        let want = monomial_count(k, degree);
        if coeffs.len() != want {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for {want} monomials",
                coeffs.len()
            )));
        }
        Ok(Self { degree, k, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn predict(&self, y: &DMatrix<f64>) -> Result<DVector<f64>> {
        if y.nrows() > 0 && y.ncols() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "surface takes {} coordinates, got {}",
                self.k,
                y.ncols()
            )));
        }
        if y.nrows() == 0 {
            return Ok(DVector::zeros(0));
        }
        Ok(design(y, &monomial_exponents(self.k, self.degree)) * &self.coeffs)
    }
}

/// Least-squares polynomial fit of `f` on `y`.
pub fn fit_poly(y: &DMatrix<f64>, f: &DVector<f64>, degree: usize) -> Result<PolySurface> {
    let (n, k) = y.shape();
    if k == 0 || degree == 0 {
        return Err(Error::InvalidArgument("polynomial needs k >= 1 and degree >= 1".into()));
    }
    if f.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} points but {} outputs", f.len())));
    }
    let count = monomial_count(k, degree);
    if n < count {
        return Err(Error::InsufficientData {
            required: count,
            got: n,
        });
    }
    let mut a = design(y, &monomial_exponents(k, degree));
    // equilibrate columns so the rank test is scale free
    let scales: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let s = c.norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let mut coeffs = PivotedQr::new(&a).solve(f, POLY_RANK_TOL).ok_or_else(|| {
        Error::IllConditioned(format!(
            "degree-{degree} polynomial design matrix is rank deficient; reduced coordinates do not determine {count} coefficients"
        ))
    })?;
    for (j, s) in scales.iter().enumerate() {
        coeffs[j] /= s;
    }
    PolySurface::new(k, degree, coeffs)
}

/// Gaussian-kernel ridge regression.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSurface {
    centers: DMatrix<f64>,
    weights: DVector<f64>,
    lengthscale: f64,
    ridge: f64,
}

fn gauss(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize, ell: f64) -> f64 {
    let mut d2 = 0.0;
    for c in 0..a.ncols() {
        let t = a[(i, c)] - b[(j, c)];
        d2 += t * t;
    }
    (-d2 / (2.0 * ell * ell)).exp()
}

impl KernelSurface {
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn predict(&self, y: &DMatrix<f64>) -> Result<DVector<f64>> {
        if y.nrows() > 0 && y.ncols() != self.centers.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "surface takes {} coordinates, got {}",
                self.centers.ncols(),
                y.ncols()
            )));
        }
        Ok(DVector::from_fn(y.nrows(), |r, _| {
            (0..self.centers.nrows())
                .map(|c| gauss(y, r, &self.centers, c, self.lengthscale) * self.weights[c])
                .sum()
        }))
    }
}

/// Solve `(K + ridge I) w = f` by Cholesky.
pub fn fit_kernel(y: &DMatrix<f64>, f: &DVector<f64>, lengthscale: f64, ridge: f64) -> Result<KernelSurface> {
    let n = y.nrows();
    if n == 0 {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    if f.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} points but {} outputs", f.len())));
    }
    if !(lengthscale > 0.0 && lengthscale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lengthscale must be positive, got {lengthscale}"
        )));
    }
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be positive, got {ridge}")));
    }
    let mut k = DMatrix::from_fn(n, n, |i, j| gauss(y, i, y, j, lengthscale));
    for i in 0..n {
        k[(i, i)] += ridge;
    }
    let chol = Cholesky::new(k).ok_or_else(|| {
        Error::IllConditioned(format!(
            "kernel matrix not positive definite at ridge {ridge}; try a larger ridge"
        ))
    })?;
    let weights = chol.solve(f);
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::IllConditioned(format!(
            "kernel weights are not finite at ridge {ridge}; try a larger ridge"
        )));
    }
    Ok(KernelSurface {
        centers: y.clone(),
        weights,
        lengthscale,
        ridge,
    })
}

/// Either surface family.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseSurface {
    Poly(PolySurface),
    Kernel(KernelSurface),
}

impl ResponseSurface {
    pub fn predict(&self, y: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            ResponseSurface::Poly(p) => p.predict(y),
            ResponseSurface::Kernel(k) => k.predict(y),
        }
    }
}

/// Surface family and hyperparameters, fit on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    Poly { degree: usize },
    Kernel { lengthscale: f64, ridge: f64 },
}

impl SurfaceKind {
    pub fn fit(&self, y: &DMatrix<f64>, f: &DVector<f64>) -> Result<ResponseSurface> {
        match *self {
            SurfaceKind::Poly { degree } => fit_poly(y, f, degree).map(ResponseSurface::Poly),
            SurfaceKind::Kernel { lengthscale, ridge } => {
                fit_kernel(y, f, lengthscale, ridge).map(ResponseSurface::Kernel)
            }
        }
    }
}

/// Root-mean-square error divided by the range of `truth`.
pub fn nrmse(pred: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} truth values",
            pred.len(),
            truth.len()
        )));
    }
    let range = truth.max() - truth.min();
    if !(range > 0.0) {
        return Err(Error::UndefinedNormalization);
    }
    let mse = (pred - truth).norm_squared() / truth.len() as f64;
    Ok(mse.sqrt() / range)
}

/// Held-out index sets for k-fold cross validation: a seeded shuffle of
/// `0..n` cut into `folds` contiguous slices (sizes differ by at most one).
pub fn kfold_indices(n: usize, folds: usize, rng: &RngStream) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!("need 2 <= folds <= {n}, got {folds}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng.generator());
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Complement of a held-out fold, in ascending order.
pub fn training_indices(n: usize, held_out: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in held_out {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

/// Rows `(y_1[, y_2], f)` of a sufficient summary plot.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub k: usize,
    /// `M × (k + 1)`, last column is `f`.
    pub rows: DMatrix<f64>,
}

impl SummaryTable {
    pub fn header(&self) -> String {
        let mut cols: Vec<String> = (1..=self.k).map(|i| format!("y{i}")).collect();
        cols.push("f".into());
        cols.join(",")
    }

    /// CSV with a header line; numbers carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for r in 0..self.rows.nrows() {
            let line: Vec<String> = self.rows.row(r).iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Pair each sample's reduced coordinates with its output.
pub fn summary_plot_data<R>(x: &DMatrix<f64>, f: &DVector<f64>, reducer: R, k: usize) -> Result<SummaryTable>
where
    R: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    if !(1..=2).contains(&k) {
        return Err(Error::UnsupportedPlot { k });
    }
    if f.len() != x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} points but {} outputs",
            x.nrows(),
            f.len()
        )));
    }
    let y = reducer(x)?;
    if y.nrows() != x.nrows() || y.ncols() < k {
        return Err(Error::ShapeMismatch(format!(
            "reducer returned {}x{} for {} points and k = {k}",
            y.nrows(),
            y.ncols(),
            x.nrows()
        )));
    }
    let mut rows = DMatrix::zeros(x.nrows(), k + 1);
    for r in 0..x.nrows() {
        for c in 0..k {
            rows[(r, c)] = y[(r, c)];
        }
        rows[(r, k)] = f[r];
    }
    Ok(SummaryTable { k, rows })
}

/// A fitted map from normalized inputs to reduced coordinates.
pub trait Reducer {
    fn reduce(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

/// Gradient rows belonging to the samples `rows`, re-indexed to positions
/// within `rows`.
pub fn restrict_gradients(grads: &GradientSet, rows: &[usize]) -> Result<GradientSet> {
    let mut position = std::collections::HashMap::with_capacity(rows.len());
    for (p, &r) in rows.iter().enumerate() {
        position.insert(r, p);
    }
    let mut keep = Vec::new();
    let mut indices = Vec::new();
    for (g, idx) in grads.indices().iter().enumerate() {
        if let Some(&p) = position.get(idx) {
            keep.push(g);
            indices.push(p);
        }
    }
    if keep.is_empty() {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    GradientSet::with_indices(grads.grads().select_rows(&keep), grads.source(), indices)
}

/// Mean held-out NRMSE over `folds`: for each fold, `fit` a reducer on the
/// remaining samples and their gradients, fit `surface` on the reduced
/// training coordinates, and score predictions on the held-out samples.
pub fn cross_validated_nrmse<F, R>(
    samples: &SampleSet,
    grads: &GradientSet,
    folds: &[Vec<usize>],
    surface: SurfaceKind,
    fit: F,
) -> Result<f64>
where
    F: Fn(&SampleSet, &GradientSet) -> Result<R>,
    R: Reducer,
{
    let f = samples.require_outputs()?;
    let n = samples.len();
    let mut total = 0.0;
    for held in folds {
        let train = training_indices(n, held);
        let train_set = samples.select_rows(&train)?;
        let train_grads = restrict_gradients(grads, &train)?;
        let reducer = fit(&train_set, &train_grads)?;
        let y_train = reducer.reduce(train_set.points())?;
        let model = surface.fit(&y_train, &f.select_rows(&train))?;
        let y_test = reducer.reduce(&samples.points().select_rows(held))?;
        let pred = model.predict(&y_test)?;
        total += nrmse(&pred, &f.select_rows(held))?;
    }
    Ok(total / folds.len() as f64)
}

impl Reducer for Subspace {
    fn reduce(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.forward(x)
    }
}
