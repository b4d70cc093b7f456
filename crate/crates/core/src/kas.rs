//! Kernel-based active subspaces.
//!
//! Inputs are lifted by random Fourier features
//! `φ(x) = √(2/D) cos(W x + b)`, with the rows of `W` drawn from the spectral
//! density of a shift-invariant kernel. Each input gradient `g` is carried
//! into feature space as the least-norm row `g J⁺`, where `J` is the
//! Jacobian of `φ`; the active subspace machinery then runs on those lifted
//! gradients in `R^D`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::active::{clamp_round_off, partition, resolve_weights, weighted_outer, Criterion, Subspace};
use crate::domain::{GradientSet, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::{self, pinv_row_action};
use crate::rng::{standard_laplace, standard_normal, uniform, RngStream};
use crate::surface::{cross_validated_nrmse, kfold_indices, Reducer, SurfaceKind};

/// Singular values of the feature Jacobian below this fraction of the
/// largest are dropped from the pseudoinverse.
pub const PINV_TOL: f64 = 1e-10;

/// Stream id of the fold split used by [`tune_sigma`]. Kept apart from the
/// evaluation split so a tuned score is not scored on its own selection.
pub const TUNING_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralDistribution {
    /// Normal(0, σ²) frequencies: Gaussian (RBF) kernel.
    Gaussian,
    /// Laplace(0, σ) frequencies: Cauchy kernel.
    Laplace,
}

impl SpectralDistribution {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectralDistribution::Gaussian => "gaussian",
            SpectralDistribution::Laplace => "laplace",
        }
    }
}

impl std::str::FromStr for SpectralDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            other => Err(Error::InvalidArgument(format!(
                "unknown spectral distribution `{other}` (expected gaussian or laplace)"
            ))),
        }
    }
}

/// Random Fourier feature map `R^d → R^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    weights: DMatrix<f64>,
    phases: DVector<f64>,
    sigma: f64,
    distribution: SpectralDistribution,
    seed: u64,
}

impl FeatureMap {
    /// Draw a feature map. Unit variates are drawn row by row and scaled by
    /// `sigma` afterwards, followed by the phases from U[0, 2π).
    pub fn build(
        d: usize,
        n_features: usize,
        sigma: f64,
        distribution: SpectralDistribution,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 || n_features < d {
            return Err(Error::InvalidArgument(format!(
                "feature dimension {n_features} must be at least the input dimension {d} >= 1"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        let mut gen = RngStream::new(seed, 0).generator();
        let mut unit = Vec::with_capacity(n_features * d);
        for _ in 0..n_features * d {
            unit.push(match distribution {
                SpectralDistribution::Gaussian => standard_normal(&mut gen),
                SpectralDistribution::Laplace => standard_laplace(&mut gen),
            });
        }
        let weights = DMatrix::from_row_slice(n_features, d, &unit) * sigma;
        let phases = DVector::from_fn(n_features, |_, _| uniform(&mut gen, 0.0, 2.0 * PI));
        Ok(Self {
            weights,
            phases,
            sigma,
            distribution,
            seed,
        })
    }

    /// A feature map with explicit frequencies and phases.
    pub fn from_parts(
        weights: DMatrix<f64>,
        phases: DVector<f64>,
        sigma: f64,
        distribution: SpectralDistribution,
        seed: u64,
    ) -> Result<Self> {
        if weights.nrows() != phases.len() || weights.nrows() < weights.ncols() || weights.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "frequency matrix {}x{} with {} phases",
                weights.nrows(),
                weights.ncols(),
                phases.len()
            )));
        }
        Ok(Self {
            weights,
            phases,
            sigma,
            distribution,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn phases(&self) -> &DVector<f64> {
        &self.phases
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn distribution(&self) -> SpectralDistribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn norm_const(&self) -> f64 {
        (2.0 / self.n_features() as f64).sqrt()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "feature map takes {} inputs, got {len}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn arguments(&self, x: &[f64]) -> DVector<f64> {
        &self.weights * DVector::from_column_slice(x) + &self.phases
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let c = self.norm_const();
        Ok(self.arguments(x).map(|a| c * a.cos()))
    }

    /// `J[r][c] = -√(2/D) sin(w_r·x + b_r) W[r][c]`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x.len())?;
        let c = self.norm_const();
        let s = self.arguments(x).map(|a| -c * a.sin());
        let mut j = self.weights.clone();
        for (r, sr) in s.iter().enumerate() {
            j.row_mut(r).scale_mut(*sr);
        }
        Ok(j)
    }

    /// Features of every row of `x`, `M × D`.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x.ncols())?;
        let c = self.norm_const();
        let mut args = x * self.weights.transpose();
        for mut row in args.row_iter_mut() {
            row += self.phases.transpose();
        }
        Ok(args.map(|a| c * a.cos()))
    }
}

/// Lift each gradient row to feature space as `g_m J_φ(x_m)⁺`.
pub fn lift_gradients(map: &FeatureMap, samples: &SampleSet, grads: &GradientSet) -> Result<DMatrix<f64>> {
    if grads.dim() != map.input_dim() || samples.dim() != map.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "feature map takes {} inputs, samples have {}, gradients {}",
            map.input_dim(),
            samples.dim(),
            grads.dim()
        )));
    }
    let mut lifted = DMatrix::zeros(grads.len(), map.n_features());
    let mut x = vec![0.0; map.input_dim()];
    for (row, &idx) in grads.indices().iter().enumerate() {
        if idx >= samples.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient row {row} refers to sample {idx}, only {} samples",
                samples.len()
            )));
        }
        let g = grads.grads().row(row).transpose();
        if g.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = samples.points()[(idx, j)];
        }
        let jac = map.jacobian(&x)?;
        let l = pinv_row_action(&jac, &g, PINV_TOL).ok_or(Error::DegenerateJacobian { sample: idx })?;
        lifted.row_mut(row).copy_from(&l.transpose());
    }
    Ok(lifted)
}

/// Active subspace of lifted gradient rows in `R^D`.
///
/// With fewer rows than features the spectrum is computed through the Gram
/// matrix and only the eigenvectors of its nonzero part are kept.
pub fn feature_subspace(lifted: &DMatrix<f64>, k: usize) -> Result<Subspace> {
    let (m, n) = lifted.shape();
    let w = resolve_weights(m, None)?;
    let eig = if m >= n {
        let c = weighted_outer(lifted, Some(&w))?;
        let mut e = linalg::sym_eigen(&c)?;
        clamp_round_off(&mut e.values, c.iter().map(|x| x * x).sum::<f64>().sqrt());
        e
    } else {
        linalg::psd_eigen_wide(lifted, &w)?
    };
    if !(eig.values[0] > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let k = partition(eig.values.as_slice(), Criterion::FixedDim(k))?;
    if k > eig.vectors.ncols() {
        return Err(Error::InvalidArgument(format!(
            "active dimension {k} exceeds the numerical rank {} of the feature covariance",
            eig.vectors.ncols()
        )));
    }
    Subspace::new(eig.values, eig.vectors, k)
}

/// Feature map plus the active subspace of the lifted gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct KasModel {
    map: FeatureMap,
    subspace: Subspace,
}

impl KasModel {
    pub fn feature_map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn feature_subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn k(&self) -> usize {
        self.subspace.k()
    }

    /// Reduced coordinates `φ(x) · W1`.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.map.transform(x)? * self.subspace.eigvecs().columns(0, self.k()))
    }
}

impl Reducer for KasModel {
    fn reduce(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.forward(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KasConfig {
    pub n_features: usize,
    pub sigma: f64,
    pub distribution: SpectralDistribution,
    pub k: usize,
    pub seed: u64,
}

pub fn fit_kas(samples: &SampleSet, grads: &GradientSet, cfg: &KasConfig) -> Result<KasModel> {
    samples.require_normalized()?;
    let map = FeatureMap::build(samples.dim(), cfg.n_features, cfg.sigma, cfg.distribution, cfg.seed)?;
    fit_with_map(map, samples, grads, cfg.k)
}

/// [`fit_kas`] with a caller-supplied feature map.
pub fn fit_with_map(map: FeatureMap, samples: &SampleSet, grads: &GradientSet, k: usize) -> Result<KasModel> {
    let lifted = lift_gradients(&map, samples, grads)?;
    let subspace = feature_subspace(&lifted, k)?;
    Ok(KasModel { map, subspace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub n_features: usize,
    pub distribution: SpectralDistribution,
    pub k: usize,
    pub sigma_grid: Vec<f64>,
    pub folds: usize,
    pub surface: SurfaceKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best_sigma: f64,
    pub best_score: f64,
    /// `(sigma, mean held-out NRMSE)` per distinct grid value, ascending in
    /// sigma.
    pub scores: Vec<(f64, f64)>,
}

/// Grid search over `sigma` by k-fold cross-validated NRMSE of a response
/// surface on the KAS coordinates.
///
/// Every candidate shares the fold split and the unit frequency draws
/// (only their scale differs), so duplicates and grid order cannot change
/// the outcome. Ties go to the smaller sigma.
pub fn tune_sigma(samples: &SampleSet, grads: &GradientSet, cfg: &TuneConfig) -> Result<TuneResult> {
    samples.require_normalized()?;
    samples.require_outputs()?;
    if cfg.sigma_grid.is_empty() {
        return Err(Error::InvalidArgument("sigma grid is empty".into()));
    }
    let mut grid = cfg.sigma_grid.clone();
    if let Some(bad) = grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {bad}")));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let folds = kfold_indices(samples.len(), cfg.folds, &RngStream::new(cfg.seed, TUNING_STREAM))?;

    let mut scores = Vec::with_capacity(grid.len());
    for &sigma in &grid {
        let kas = KasConfig {
            n_features: cfg.n_features,
            sigma,
            distribution: cfg.distribution,
            k: cfg.k,
            seed: cfg.seed,
        };
        let score = cross_validated_nrmse(samples, grads, &folds, cfg.surface, |s, g| fit_kas(s, g, &kas))?;
        scores.push((sigma, score));
    }
    let (best_sigma, best_score) =
        scores.iter().copied().fold(
            (f64::NAN, f64::INFINITY),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        );
    if best_sigma.is_nan() {
        return Err(Error::IllConditioned("no sigma produced a finite score".into()));
    }
    Ok(TuneResult {
        best_sigma,
        best_score,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Bounds, GradientSource};
    use crate::linalg::orthonormality_defect;

    fn cube(m: usize, d: usize, seed: u64) -> SampleSet {
        let mut gen = RngStream::new(seed, 0).generator();
        let pts = DMatrix::from_fn(m, d, |_, _| uniform(&mut gen, -1.0, 1.0));
        SampleSet::from_normalized(pts, None, Bounds::unit(d).unwrap()).unwrap()
    }

    #[test]
    fn build_is_deterministic_and_scale_family() {
        let a = FeatureMap::build(3, 16, 1.0, SpectralDistribution::Gaussian, 5).unwrap();
        let b = FeatureMap::build(3, 16, 1.0, SpectralDistribution::Gaussian, 5).unwrap();
        assert_eq!(a, b);
        let c = FeatureMap::build(3, 16, 2.0, SpectralDistribution::Gaussian, 5).unwrap();
        assert_eq!(c.weights(), &(a.weights() * 2.0));
        assert_eq!(c.phases(), a.phases());
        assert!(a.phases().iter().all(|p| (0.0..2.0 * PI).contains(p)));
        let l = FeatureMap::build(3, 16, 1.0, SpectralDistribution::Laplace, 5).unwrap();
        assert_ne!(l.weights(), a.weights());
    }

    #[test]
    fn build_validates() {
        assert!(FeatureMap::build(3, 2, 1.0, SpectralDistribution::Gaussian, 0).is_err());
        assert!(FeatureMap::build(3, 8, 0.0, SpectralDistribution::Gaussian, 0).is_err());
        assert!(FeatureMap::build(0, 8, 1.0, SpectralDistribution::Gaussian, 0).is_err());
        assert!("cauchy".parse::<SpectralDistribution>().is_err());
        assert_eq!(
            "Laplace".parse::<SpectralDistribution>().unwrap(),
            SpectralDistribution::Laplace
        );
    }

    #[test]
    fn gaussian_frequency_mean_within_standard_error() {
        let d = 3;
        let m = FeatureMap::build(d, 2048, 1.0, SpectralDistribution::Gaussian, 21).unwrap();
        let n = (2048 * d) as f64;
        let mean = m.weights().sum() / n;
        assert!(mean.abs() <= 3.0 / n.sqrt());
    }

    #[test]
    fn feature_map_examples() {
        let d = 2;
        let big_d = 4;
        let zero = FeatureMap::from_parts(
            DMatrix::zeros(big_d, d),
            DVector::zeros(big_d),
            1.0,
            SpectralDistribution::Gaussian,
            0,
        )
        .unwrap();
        let phi = zero.eval(&[0.3, -0.2]).unwrap();
        assert!(phi.iter().all(|v| (v - (2.0 / big_d as f64).sqrt()).abs() < 1e-15));
        assert!(zero.jacobian(&[0.3, -0.2]).unwrap().iter().all(|v| *v == 0.0));

        let quarter = FeatureMap::from_parts(
            DMatrix::zeros(big_d, d),
            DVector::from_element(big_d, PI / 2.0),
            1.0,
            SpectralDistribution::Gaussian,
            0,
        )
        .unwrap();
        assert!(quarter.eval(&[0.3, -0.2]).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(zero.eval(&[0.1]).is_err());
        assert!(zero.jacobian(&[0.1, 0.2, 0.3]).is_err());

        let one = FeatureMap::from_parts(
            DMatrix::from_element(1, 1, 0.7),
            DVector::zeros(1),
            1.0,
            SpectralDistribution::Gaussian,
            0,
        )
        .unwrap();
        assert_eq!(one.jacobian(&[0.0]).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn feature_norm_bounded() {
        let m = FeatureMap::build(4, 64, 3.0, SpectralDistribution::Laplace, 2).unwrap();
        let s = cube(50, 4, 1);
        let phi = m.transform(s.points()).unwrap();
        for r in 0..50 {
            assert!(phi.row(r).norm_squared() <= 2.0 + 1e-12);
            let direct = m.eval(&s.points().row(r).iter().copied().collect::<Vec<_>>()).unwrap();
            assert!((phi.row(r).transpose() - direct).amax() < 1e-15);
        }
    }

    #[test]
    fn lift_zero_and_square_invertible() {
        let s = cube(3, 2, 4);
        let m = FeatureMap::build(2, 2, 1.0, SpectralDistribution::Gaussian, 8).unwrap();
        let zero = GradientSet::new(DMatrix::zeros(3, 2), GradientSource::Exact).unwrap();
        assert!(lift_gradients(&m, &s, &zero).unwrap().iter().all(|v| *v == 0.0));

        let g = GradientSet::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.3, 0.0, 1.0]),
            GradientSource::Exact,
        )
        .unwrap();
        let lifted = lift_gradients(&m, &s, &g).unwrap();
        for r in 0..3 {
            let x: Vec<f64> = s.points().row(r).iter().copied().collect();
            let back = lifted.row(r) * m.jacobian(&x).unwrap();
            assert!((back - g.grads().row(r)).amax() < 1e-8);
        }
    }

    #[test]
    fn lift_degenerate_jacobian() {
        let s = cube(2, 2, 4);
        let m = FeatureMap::from_parts(
            DMatrix::zeros(3, 2),
            DVector::zeros(3),
            1.0,
            SpectralDistribution::Gaussian,
            0,
        )
        .unwrap();
        let g = GradientSet::new(DMatrix::from_element(2, 2, 1.0), GradientSource::Exact).unwrap();
        assert!(matches!(
            lift_gradients(&m, &s, &g),
            Err(Error::DegenerateJacobian { sample: 0 })
        ));
    }

    #[test]
    fn zero_gradients_degenerate() {
        let s = cube(10, 2, 1);
        let g = GradientSet::new(DMatrix::zeros(10, 2), GradientSource::Exact).unwrap();
        let cfg = KasConfig {
            n_features: 8,
            sigma: 1.0,
            distribution: SpectralDistribution::Gaussian,
            k: 1,
            seed: 0,
        };
        assert!(matches!(fit_kas(&s, &g, &cfg), Err(Error::DegenerateSpectrum)));
    }

    #[test]
    fn full_basis_preserves_feature_norm() {
        // M >= D gives a complete eigenbasis in feature space
        let s = cube(40, 2, 3);
        let g = GradientSet::new(
            DMatrix::from_fn(40, 2, |i, j| s.points()[(i, j)] * 2.0 + 0.1),
            GradientSource::Exact,
        )
        .unwrap();
        let map = FeatureMap::build(2, 6, 1.0, SpectralDistribution::Gaussian, 3).unwrap();
        let model = fit_with_map(map.clone(), &s, &g, 1).unwrap();
        let full = model.feature_subspace().eigvecs().clone();
        assert_eq!(full.shape(), (6, 6));
        assert!(orthonormality_defect(&full) < 1e-10);
        let phi = map.transform(s.points()).unwrap();
        let rotated = &phi * &full;
        for r in 0..40 {
            assert!((rotated.row(r).norm() - phi.row(r).norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn forward_is_feature_then_project() {
        let s = cube(20, 3, 9);
        let g = GradientSet::new(s.points().map(|v| v.sin()), GradientSource::Exact).unwrap();
        let cfg = KasConfig {
            n_features: 50,
            sigma: 1.5,
            distribution: SpectralDistribution::Gaussian,
            k: 2,
            seed: 4,
        };
        let model = fit_kas(&s, &g, &cfg).unwrap();
        assert_eq!(model, fit_kas(&s, &g, &cfg).unwrap());
        let y = model.forward(s.points()).unwrap();
        let w1 = model.feature_subspace().w1();
        for r in 0..20 {
            let x: Vec<f64> = s.points().row(r).iter().copied().collect();
            let explicit = model.feature_map().eval(&x).unwrap().transpose() * &w1;
            assert!((y.row(r) - explicit).amax() < 1e-12);
        }
        let twice = DMatrix::from_fn(2, 3, |_, j| s.points()[(0, j)]);
        let yy = model.forward(&twice).unwrap();
        assert_eq!(yy.row(0), yy.row(1));
    }
}
