use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use paramred::kas::{
    fit_kas, fit_with_map, lift_gradients, tune_sigma, FeatureMap, KasConfig, SpectralDistribution, TuneConfig,
};
use paramred::rng::uniform;
use paramred::surface::{cross_validated_nrmse, kfold_indices, SurfaceKind};
use paramred::testfns::{by_name, sample_uniform};
use paramred::{Bounds, Criterion, Error, GradientSet, GradientSource, RngStream, SampleSet, Subspace};

const GAUSS: SpectralDistribution = SpectralDistribution::Gaussian;

fn random_point(gen: &mut impl rand::Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| uniform(gen, -1.0, 1.0)).collect()
}

fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sigma * sigma * sq / 2.0).exp()
}

fn max_kernel_error(n_features: usize, seed: u64, pairs: usize) -> f64 {
    let map = FeatureMap::build(3, n_features, 1.0, GAUSS, seed).unwrap();
    let mut gen = RngStream::new(seed, 99).generator();
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = random_point(&mut gen, 3);
        let y = random_point(&mut gen, 3);
        let approx = map.eval(&x).unwrap().dot(&map.eval(&y).unwrap());
        worst = worst.max((approx - gaussian_kernel(&x, &y, 1.0)).abs());
    }
    worst
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn features_approximate_gaussian_kernel() {
    let map = FeatureMap::build(3, 4096, 1.0, GAUSS, 7).unwrap();
    let mut gen = RngStream::new(7, 50).generator();
    for _ in 0..50 {
        let x = random_point(&mut gen, 3);
        let y = random_point(&mut gen, 3);
        let approx = map.eval(&x).unwrap().dot(&map.eval(&y).unwrap());
        let exact = gaussian_kernel(&x, &y, 1.0);
        assert!((approx - exact).abs() < 0.05, "{approx} vs {exact}");
    }
}

#[test]
fn kernel_error_shrinks_as_features_double() {
    let medians: Vec<f64> = [1024, 2048, 4096]
        .iter()
        .map(|&n| median((0..5).map(|s| max_kernel_error(n, 100 + s, 50)).collect()))
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn jacobian_matches_finite_differences() {
    let h = 1e-6;
    for case in 0..20u64 {
        let d = 1 + (case as usize % 4);
        let map = FeatureMap::build(d, 8 + d, 0.5 + case as f64 * 0.1, GAUSS, case).unwrap();
        let mut gen = RngStream::new(case, 7).generator();
        let x = random_point(&mut gen, d);
        let jac = map.jacobian(&x).unwrap();
        for c in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let fd = (map.eval(&xp).unwrap() - map.eval(&xm).unwrap()) / (2.0 * h);
            let err = (jac.column(c) - fd).amax();
            assert!(err < 1e-6, "case {case} column {c}: {err}");
        }
    }
}

#[test]
fn lifted_gradients_pull_back_to_inputs() {
    let d = 4;
    let mut gen = RngStream::new(3, 0).generator();
    let pts = DMatrix::from_fn(30, d, |_, _| uniform(&mut gen, -1.0, 1.0));
    let grads = DMatrix::from_fn(30, d, |_, _| uniform(&mut gen, -2.0, 2.0));
    let samples = SampleSet::from_normalized(pts, None, Bounds::unit(d).unwrap()).unwrap();
    let gset = GradientSet::new(grads.clone(), GradientSource::Exact).unwrap();
    let map = FeatureMap::build(d, 64, 1.5, GAUSS, 11).unwrap();
    let lifted = lift_gradients(&map, &samples, &gset).unwrap();
    for m in 0..30 {
        let x: Vec<f64> = samples.points().row(m).iter().copied().collect();
        let jac = map.jacobian(&x).unwrap();
        let back = lifted.row(m) * &jac;
        assert!((back - grads.row(m)).amax() < 1e-8, "row {m}");
    }
}

#[test]
fn linear_function_with_identity_like_map_matches_active_subspaces() {
    // f(x) = a·x; features -√(2/d) sin(x_i) are monotone on [-1, 1].
    let d = 4;
    let a = [1.0, 0.5, -0.3, 0.2];
    let m = 200;
    let mut gen = RngStream::new(21, 0).generator();
    let pts = DMatrix::from_fn(m, d, |_, _| uniform(&mut gen, -1.0, 1.0));
    let f = DVector::from_fn(m, |r, _| (0..d).map(|c| a[c] * pts[(r, c)]).sum());
    let grads = DMatrix::from_fn(m, d, |_, c| a[c]);
    let samples = SampleSet::from_normalized(pts, Some(f), Bounds::unit(d).unwrap()).unwrap();
    let gset = GradientSet::new(grads, GradientSource::Exact).unwrap();
    let folds = kfold_indices(m, 5, &RngStream::new(21, 1)).unwrap();
    let surface = SurfaceKind::Poly { degree: 3 };

    let as_score = cross_validated_nrmse(&samples, &gset, &folds, surface, |_, g| {
        Subspace::fit(g, None, Criterion::FixedDim(1))
    })
    .unwrap();
    let map = FeatureMap::from_parts(
        DMatrix::identity(d, d),
        DVector::from_element(d, FRAC_PI_2),
        1.0,
        GAUSS,
        0,
    )
    .unwrap();
    let kas_score = cross_validated_nrmse(&samples, &gset, &folds, surface, |s, g| {
        fit_with_map(map.clone(), s, g, 1)
    })
    .unwrap();
    assert!(as_score < 1e-8, "{as_score}");
    assert!((kas_score - as_score).abs() <= 0.02, "kas {kas_score} vs as {as_score}");
}

#[test]
fn fit_is_deterministic() {
    let func = by_name("radial").unwrap();
    let samples = sample_uniform(&func, 60, 4).unwrap();
    let grads = func.gradients(&samples).unwrap();
    let cfg = KasConfig {
        n_features: 128,
        sigma: 1.0,
        distribution: SpectralDistribution::Laplace,
        k: 1,
        seed: 9,
    };
    let a = fit_kas(&samples, &grads, &cfg).unwrap();
    let b = fit_kas(&samples, &grads, &cfg).unwrap();
    assert_eq!(a.feature_subspace(), b.feature_subspace());
    assert_eq!(
        a.forward(samples.points()).unwrap(),
        b.forward(samples.points()).unwrap()
    );
}

fn tune_fixture() -> (SampleSet, GradientSet, TuneConfig) {
    let func = by_name("radial").unwrap();
    let samples = sample_uniform(&func, 120, 5).unwrap();
    let grads = func.gradients(&samples).unwrap();
    let cfg = TuneConfig {
        n_features: 128,
        distribution: GAUSS,
        k: 1,
        sigma_grid: vec![0.5, 1.0, 2.0],
        folds: 3,
        surface: SurfaceKind::Poly { degree: 3 },
        seed: 12,
    };
    (samples, grads, cfg)
}

#[test]
fn tune_selects_the_recorded_minimum() {
    let (samples, grads, cfg) = tune_fixture();
    let res = tune_sigma(&samples, &grads, &cfg).unwrap();
    assert_eq!(res.scores.len(), 3);
    assert!(res.scores.iter().all(|(_, s)| res.best_score <= *s));
    let (sigma, score) = res.scores.iter().find(|(s, _)| *s == res.best_sigma).unwrap();
    assert_eq!(*sigma, res.best_sigma);
    assert_eq!(*score, res.best_score);
}

#[test]
fn tune_grid_of_one_value() {
    let (samples, grads, mut cfg) = tune_fixture();
    cfg.sigma_grid = vec![0.7];
    assert_eq!(tune_sigma(&samples, &grads, &cfg).unwrap().best_sigma, 0.7);
}

#[test]
fn tune_ignores_duplicates_and_order() {
    let (samples, grads, cfg) = tune_fixture();
    let base = tune_sigma(&samples, &grads, &cfg).unwrap();
    let mut shuffled = cfg.clone();
    shuffled.sigma_grid = vec![2.0, 1.0, 0.5, 1.0, 2.0];
    assert_eq!(tune_sigma(&samples, &grads, &shuffled).unwrap(), base);
}

#[test]
fn tune_rejects_bad_input() {
    let (samples, grads, mut cfg) = tune_fixture();
    cfg.sigma_grid.clear();
    assert!(matches!(
        tune_sigma(&samples, &grads, &cfg),
        Err(Error::InvalidArgument(_))
    ));
    cfg.sigma_grid = vec![1.0, -1.0];
    assert!(tune_sigma(&samples, &grads, &cfg).is_err());
    cfg.sigma_grid = vec![1.0];
    cfg.folds = 1;
    assert!(tune_sigma(&samples, &grads, &cfg).is_err());
}
