//! Gradient sets from exact derivatives, central finite differences, or
//! scattered input/output data by local linear regression.

use nalgebra::{DMatrix, DVector};

use crate::domain::{chain_rule_scale, Bounds, GradientSet, GradientSource, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::PivotedQr;
use crate::rng::RngStream;

pub const DEFAULT_FD_STEP: f64 = 1e-6;
pub const MAX_FD_STEP: f64 = 1e-2;
/// Regression centers used by [`local_linear_gradients`] unless overridden.
pub const DEFAULT_MAX_CENTERS: usize = 100;
/// A local fit is singular when a QR pivot falls below this fraction of the
/// largest pivot.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    Exact,
    FiniteDifference,
    LocalLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientConfig {
    pub method: GradientMethod,
    pub fd_step: f64,
    pub n_neighbors: usize,
    pub max_centers: usize,
}

impl GradientConfig {
    /// Defaults for dimension `d`: step 1e-6, `2 (d + 1)` neighbors, 100
    /// centers.
    pub fn new(method: GradientMethod, d: usize) -> Self {
        Self {
            method,
            fd_step: DEFAULT_FD_STEP,
            n_neighbors: 2 * (d + 1),
            max_centers: DEFAULT_MAX_CENTERS,
        }
    }

    pub fn validate(&self, m: usize, d: usize) -> Result<()> {
        if !(self.fd_step > 0.0 && self.fd_step <= MAX_FD_STEP) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step {} outside (0, {MAX_FD_STEP}]",
                self.fd_step
            )));
        }
        if self.method == GradientMethod::LocalLinear {
            if self.n_neighbors < d + 1 || self.n_neighbors > m {
                return Err(Error::InvalidArgument(format!(
                    "n_neighbors {} outside [{}, {m}]",
                    self.n_neighbors,
                    d + 1
                )));
            }
            if self.max_centers == 0 {
                return Err(Error::InvalidArgument("max_centers must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` at every sample.
///
/// The callback sees points up to `step` outside the hypercube.
pub fn finite_difference_gradients<F>(f: F, samples: &SampleSet, step: f64) -> Result<GradientSet>
where
    F: Fn(&[f64]) -> f64,
{
    samples.require_normalized()?;
    if !(step > 0.0 && step <= MAX_FD_STEP) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {step} outside (0, {MAX_FD_STEP}]"
        )));
    }
    let (m, d) = samples.points().shape();
    let mut grads = DMatrix::zeros(m, d);
    let mut x = vec![0.0; d];
    for s in 0..m {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = samples.points()[(s, j)];
        }
        for i in 0..d {
            let orig = x[i];
            x[i] = orig + step;
            let fp = f(&x);
            x[i] = orig - step;
            let fm = f(&x);
            x[i] = orig;
            for v in [fp, fm] {
                if !v.is_finite() {
                    return Err(Error::NonFinite { sample: s, value: v });
                }
            }
            grads[(s, i)] = (fp - fm) / (2.0 * step);
        }
    }
    GradientSet::new(grads, GradientSource::FiniteDifference)
}

/// Indices of the `n` samples nearest to sample `center` (itself included),
/// ties broken by lower index.
fn nearest(points: &DMatrix<f64>, center: usize, n: usize) -> Vec<usize> {
    let c = points.row(center);
    let mut dist: Vec<(f64, usize)> = (0..points.nrows())
        .map(|i| ((points.row(i) - c).norm_squared(), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.into_iter().take(n).map(|(_, i)| i).collect()
}

/// Gradient estimates from an affine least-squares fit over the
/// `n_neighbors` nearest samples of each regression center.
///
/// Centers are every sample when `M <= max_centers`, otherwise a seeded
/// random subset of `max_centers` samples (listed in ascending order).
pub fn local_linear_gradients(
    samples: &SampleSet,
    n_neighbors: usize,
    max_centers: usize,
    rng: &RngStream,
) -> Result<GradientSet> {
    samples.require_normalized()?;
    let y = samples.require_outputs()?;
    let (m, d) = samples.points().shape();
    if m < d + 2 {
        return Err(Error::InsufficientData {
            required: d + 2,
            got: m,
        });
    }
    let mut cfg = GradientConfig::new(GradientMethod::LocalLinear, d);
    cfg.n_neighbors = n_neighbors;
    cfg.max_centers = max_centers;
    cfg.validate(m, d)?;

    let centers: Vec<usize> = if m <= max_centers {
        (0..m).collect()
    } else {
        let mut gen = rng.generator();
        let mut picked = rand::seq::index::sample(&mut gen, m, max_centers).into_vec();
        picked.sort_unstable();
        picked
    };

    let pts = samples.points();
    let mut grads = DMatrix::zeros(centers.len(), d);
    let mut design = DMatrix::zeros(n_neighbors, d + 1);
    let mut rhs = DVector::zeros(n_neighbors);
    for (row, &c) in centers.iter().enumerate() {
        let nbrs = nearest(pts, c, n_neighbors);
        for (r, &i) in nbrs.iter().enumerate() {
            design[(r, 0)] = 1.0;
            for j in 0..d {
                // centered at the regression point for conditioning
                design[(r, j + 1)] = pts[(i, j)] - pts[(c, j)];
            }
            rhs[r] = y[i];
        }
        let coef = PivotedQr::new(&design)
            .solve(&rhs, SINGULAR_PIVOT_TOL)
            .ok_or(Error::SingularFit { center: c })?;
        for j in 0..d {
            grads[(row, j)] = coef[j + 1];
        }
    }
    GradientSet::with_indices(grads, GradientSource::LocalLinear, centers)
}

/// Gradients supplied in original units, pulled back to normalized
/// coordinates.
pub fn assemble_exact(grads: &DMatrix<f64>, bounds: &Bounds, samples: Option<&SampleSet>) -> Result<GradientSet> {
    if let Some(s) = samples {
        if grads.shape() != s.points().shape() {
            return Err(Error::ShapeMismatch(format!(
                "gradient matrix is {:?}, samples are {:?}",
                grads.shape(),
                s.points().shape()
            )));
        }
    }
    GradientSet::new(chain_rule_scale(grads, bounds)?, GradientSource::Exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::uniform;

    fn cube_samples(m: usize, d: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> SampleSet {
        let mut gen = RngStream::new(seed, 0).generator();
        let pts = DMatrix::from_fn(m, d, |_, _| uniform(&mut gen, -1.0, 1.0));
        let out = DVector::from_fn(m, |i, _| {
            let row: Vec<f64> = pts.row(i).iter().copied().collect();
            f(&row)
        });
        SampleSet::from_normalized(pts, Some(out), Bounds::unit(d).unwrap()).unwrap()
    }

    #[test]
    fn fd_affine_exact() {
        let s = cube_samples(20, 2, 1, |_| 0.0);
        let g = finite_difference_gradients(|x| 3.0 * x[0] - 2.0 * x[1], &s, DEFAULT_FD_STEP).unwrap();
        for r in 0..20 {
            assert!((g.grads()[(r, 0)] - 3.0).abs() < 1e-9);
            assert!((g.grads()[(r, 1)] + 2.0).abs() < 1e-9);
        }
        assert_eq!(g.source(), GradientSource::FiniteDifference);
    }

    #[test]
    fn fd_constant_and_quadratic() {
        let s = cube_samples(5, 3, 2, |_| 0.0);
        let g = finite_difference_gradients(|_| 4.2, &s, DEFAULT_FD_STEP).unwrap();
        assert!(g.grads().iter().all(|&v| v == 0.0));

        let pts = DMatrix::from_row_slice(1, 1, &[0.3]);
        let s = SampleSet::from_normalized(pts, None, Bounds::unit(1).unwrap()).unwrap();
        let g = finite_difference_gradients(|x| x[0] * x[0], &s, 1e-6).unwrap();
        assert!((g.grads()[(0, 0)] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn fd_errors() {
        let s = cube_samples(3, 1, 2, |_| 0.0);
        assert!(finite_difference_gradients(|x| x[0], &s, 0.0).is_err());
        assert!(finite_difference_gradients(|x| x[0], &s, 0.1).is_err());
        let bad = finite_difference_gradients(|x| if x[0] > 0.0 { f64::NAN } else { 0.0 }, &s, 1e-6);
        assert!(matches!(bad, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn local_linear_affine_exact() {
        let s = cube_samples(60, 2, 3, |x| 3.0 * x[0] - 2.0 * x[1] + 7.0);
        for n in [3, 6, 10, 60] {
            let g = local_linear_gradients(&s, n, DEFAULT_MAX_CENTERS, &RngStream::new(0, 0)).unwrap();
            assert_eq!(g.len(), 60);
            for r in 0..60 {
                assert!((g.grads()[(r, 0)] - 3.0).abs() < 1e-8);
                assert!((g.grads()[(r, 1)] + 2.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn local_linear_constant_outputs() {
        let s = cube_samples(30, 3, 4, |_| 1.5);
        let g = local_linear_gradients(&s, 8, DEFAULT_MAX_CENTERS, &RngStream::new(0, 0)).unwrap();
        assert!(g.grads().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn local_linear_center_subset() {
        let s = cube_samples(300, 2, 5, |x| x[0] + x[1]);
        let g = local_linear_gradients(&s, 6, 100, &RngStream::new(9, 0)).unwrap();
        assert_eq!(g.len(), 100);
        assert!(g.indices().windows(2).all(|w| w[0] < w[1]));
        let again = local_linear_gradients(&s, 6, 100, &RngStream::new(9, 0)).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn local_linear_singular_neighborhood() {
        // all points on the line x2 = x1
        let pts = DMatrix::from_fn(10, 2, |i, _| -0.9 + 0.2 * i as f64);
        let out = DVector::from_fn(10, |i, _| i as f64);
        let s = SampleSet::from_normalized(pts, Some(out), Bounds::unit(2).unwrap()).unwrap();
        assert!(matches!(
            local_linear_gradients(&s, 4, 100, &RngStream::new(0, 0)),
            Err(Error::SingularFit { center: 0 })
        ));
    }

    #[test]
    fn local_linear_preconditions() {
        let s = cube_samples(3, 2, 1, |x| x[0]);
        assert!(matches!(
            local_linear_gradients(&s, 3, 100, &RngStream::new(0, 0)),
            Err(Error::InsufficientData { .. })
        ));
        let s = cube_samples(10, 2, 1, |x| x[0]);
        assert!(local_linear_gradients(&s, 2, 100, &RngStream::new(0, 0)).is_err());
        assert!(local_linear_gradients(&s, 11, 100, &RngStream::new(0, 0)).is_err());
        let no_out = SampleSet::from_normalized(s.points().clone(), None, Bounds::unit(2).unwrap()).unwrap();
        assert!(matches!(
            local_linear_gradients(&no_out, 4, 100, &RngStream::new(0, 0)),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn local_linear_permutation_equivariant() {
        let s = cube_samples(40, 2, 7, |x| (x[0] * 2.0).sin() + x[1] * x[1]);
        let g = local_linear_gradients(&s, 6, 100, &RngStream::new(0, 0)).unwrap();
        let perm: Vec<usize> = (0..40).rev().collect();
        let sp = s.select_rows(&perm).unwrap();
        let gp = local_linear_gradients(&sp, 6, 100, &RngStream::new(0, 0)).unwrap();
        for (new_row, &old_row) in perm.iter().enumerate() {
            for j in 0..2 {
                let a = gp.grads()[(new_row, j)];
                let b = g.grads()[(old_row, j)];
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn assemble_exact_scales_columns() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, -3.0]);
        let unit = assemble_exact(&g, &Bounds::unit(2).unwrap(), None).unwrap();
        assert_eq!(unit.grads(), &g);
        let b = Bounds::new(vec![0.0, -1.0], vec![4.0, 1.0]).unwrap();
        let scaled = assemble_exact(&g, &b, None).unwrap();
        assert_eq!(scaled.grads(), &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 4.0, -3.0]));
        let z = assemble_exact(&DMatrix::zeros(2, 2), &b, None).unwrap();
        assert!(z.grads().iter().all(|&v| v == 0.0));
        let s = SampleSet::from_normalized(DMatrix::zeros(3, 2), None, b.clone()).unwrap();
        assert!(assemble_exact(&g, &b, Some(&s)).is_err());
    }
}
