//! Analytic benchmark functions with known active structure.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::domain::{Bounds, GradientSet, GradientSource, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::gram_schmidt;
use crate::rng::{standard_normal, uniform, RngStream};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Seed of the orthogonal matrix rotating the QUAD spectrum.
pub const QUAD_SEED: u64 = 20_201_108;
/// Eigenvalues of the QUAD Hessian `A`.
pub const QUAD_SPECTRUM: [f64; 6] = [10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4];

#[derive(Clone)]
pub struct TestFunction {
    pub name: &'static str,
    pub d: usize,
    evaluate: ScalarFn,
    gradient: GradFn,
    /// Orthonormal basis of the true active subspace, when one exists.
    pub known_active: Option<DMatrix<f64>>,
    pub notes: &'static str,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("known_active", &self.known_active)
            .finish()
    }
}

impl TestFunction {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.evaluate)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    /// Exact gradients at every sample, in normalized coordinates.
    pub fn gradients(&self, samples: &SampleSet) -> Result<GradientSet> {
        if samples.dim() != self.d {
            return Err(Error::ShapeMismatch(format!(
                "{} expects dimension {}, samples have {}",
                self.name,
                self.d,
                samples.dim()
            )));
        }
        let pts = samples.points();
        let mut g = DMatrix::zeros(pts.nrows(), self.d);
        for i in 0..pts.nrows() {
            let row: Vec<f64> = pts.row(i).iter().copied().collect();
            for (j, v) in self.gradient(&row).into_iter().enumerate() {
                g[(i, j)] = v;
            }
        }
        GradientSet::new(g, GradientSource::Exact)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn basis(cols: &[&[f64]]) -> DMatrix<f64> {
    let d = cols[0].len();
    DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i])
}

fn ridge1() -> TestFunction {
    let s = 5f64.sqrt();
    let beta: Vec<f64> = vec![1.0 / s, 2.0 / s, 0.0, 0.0, 0.0];
    let b1 = beta.clone();
    let b2 = beta.clone();
    TestFunction {
        name: "RIDGE1",
        d: 5,
        evaluate: Arc::new(move |x| dot(&b1, x).powi(2)),
        gradient: Arc::new(move |x| {
            let t = 2.0 * dot(&b2, x);
            b2.iter().map(|b| t * b).collect()
        }),
        known_active: Some(basis(&[&beta])),
        notes: "(βᵀx)² with β = (1, 2, 0, 0, 0)/√5; one active direction",
    }
}

fn ridge2() -> TestFunction {
    let s = 8f64.sqrt();
    let beta: Vec<f64> = vec![1.0 / s; 8];
    let gamma: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 / s } else { -1.0 / s }).collect();
    let (b1, g1) = (beta.clone(), gamma.clone());
    let (b2, g2) = (beta.clone(), gamma.clone());
    TestFunction {
        name: "RIDGE2",
        d: 8,
        evaluate: Arc::new(move |x| dot(&b1, x).sin() + 0.5 * dot(&g1, x).cos()),
        gradient: Arc::new(move |x| {
            let a = dot(&b2, x).cos();
            let c = -0.5 * dot(&g2, x).sin();
            b2.iter().zip(&g2).map(|(b, g)| a * b + c * g).collect()
        }),
        known_active: Some(basis(&[&beta, &gamma])),
        notes: "sin(βᵀx) + cos(γᵀx)/2 with orthonormal β, γ; two active directions",
    }
}

fn radial() -> TestFunction {
    TestFunction {
        name: "RADIAL",
        d: 2,
        evaluate: Arc::new(|x| dot(x, x).sin()),
        gradient: Arc::new(|x| {
            let c = 2.0 * dot(x, x).cos();
            x.iter().map(|v| c * v).collect()
        }),
        known_active: None,
        notes: "sin(‖x‖²); level sets are circles, no linear active subspace",
    }
}

fn affine() -> TestFunction {
    let c: Vec<f64> = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.25];
    let norm = dot(&c, &c).sqrt();
    let unit: Vec<f64> = c.iter().map(|v| v / norm).collect();
    let (c1, c2) = (c.clone(), c);
    TestFunction {
        name: "AFFINE",
        d: 6,
        evaluate: Arc::new(move |x| dot(&c1, x) + 0.7),
        gradient: Arc::new(move |_| c2.clone()),
        known_active: Some(basis(&[&unit])),
        notes: "cᵀx + 0.7; constant gradient",
    }
}

/// Seeded orthogonal matrix used by QUAD.
pub fn quad_rotation() -> DMatrix<f64> {
    let d = QUAD_SPECTRUM.len();
    let mut gen = RngStream::new(QUAD_SEED, 0).generator();
    let mut v = DMatrix::from_fn(d, d, |_, _| standard_normal(&mut gen));
    gram_schmidt(&mut v);
    v
}

/// Hessian of QUAD, `V diag(QUAD_SPECTRUM) Vᵀ`.
pub fn quad_matrix() -> DMatrix<f64> {
    let v = quad_rotation();
    &v * DMatrix::from_diagonal(&DVector::from_column_slice(&QUAD_SPECTRUM)) * v.transpose()
}

fn quad() -> TestFunction {
    let a = quad_matrix();
    let a1 = a.clone();
    let a2 = a;
    TestFunction {
        name: "QUAD",
        d: QUAD_SPECTRUM.len(),
        evaluate: Arc::new(move |x| {
            let x = DVector::from_column_slice(x);
            0.5 * x.dot(&(&a1 * &x))
        }),
        gradient: Arc::new(move |x| (&a2 * DVector::from_column_slice(x)).as_slice().to_vec()),
        known_active: None,
        notes: "xᵀAx/2 with A = V diag(10, 1, 0.1, ...) Vᵀ; graded spectrum",
    }
}

pub fn catalog() -> Vec<TestFunction> {
    vec![ridge1(), ridge2(), radial(), affine(), quad()]
}

pub fn by_name(name: &str) -> Option<TestFunction> {
    catalog().into_iter().find(|f| f.name.eq_ignore_ascii_case(name))
}

pub fn names() -> Vec<&'static str> {
    catalog().iter().map(|f| f.name).collect()
}

/// `m` i.i.d. uniform points on `[-1, 1]^d` with evaluated outputs.
pub fn sample_uniform(func: &TestFunction, m: usize, seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    let mut gen = RngStream::new(seed, 0).generator();
    let pts = DMatrix::from_fn(m, func.d, |_, _| uniform(&mut gen, -1.0, 1.0));
    let out = DVector::from_fn(m, |i, _| {
        let row: Vec<f64> = pts.row(i).iter().copied().collect();
        func.evaluate(&row)
    });
    SampleSet::from_normalized(pts, Some(out), Bounds::unit(func.d)?)
}
