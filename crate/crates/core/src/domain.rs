//! Parameter domains, sample sets and the map to the reference hypercube.
//!
//! All analysis happens in normalized coordinates on `[-1, 1]^d`. Points are
//! mapped affinely per axis, `x_n = 2 (x - lower) / (upper - lower) - 1`, and
//! gradients given in original units are pulled back with the Jacobian of the
//! inverse map (see [`chain_rule_scale`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Outward tolerance, in normalized units, before a point counts as outside
/// the domain.
pub const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBounds("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidBounds(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidBounds(format!(
                    "axis {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The reference hypercube `[-1, 1]^d`.
    pub fn unit(d: usize) -> Result<Self> {
        Self::new(vec![-1.0; d], vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn half_width(&self, axis: usize) -> f64 {
        0.5 * (self.upper[axis] - self.lower[axis])
    }
}

/// Where a gradient set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSource {
    Exact,
    FiniteDifference,
    LocalLinear,
}

impl GradientSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            GradientSource::Exact => "exact",
            GradientSource::FiniteDifference => "finite_difference",
            GradientSource::LocalLinear => "local_linear",
        }
    }
}

/// Gradient rows in normalized coordinates, each tied to a sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    grads: DMatrix<f64>,
    source: GradientSource,
    indices: Vec<usize>,
}

impl GradientSet {
    /// One row per sample, in sample order.
    pub fn new(grads: DMatrix<f64>, source: GradientSource) -> Result<Self> {
        let indices = (0..grads.nrows()).collect();
        Self::with_indices(grads, source, indices)
    }

    pub fn with_indices(grads: DMatrix<f64>, source: GradientSource, indices: Vec<usize>) -> Result<Self> {
        if grads.nrows() == 0 || grads.ncols() == 0 {
            return Err(Error::ShapeMismatch("gradient set is empty".into()));
        }
        if indices.len() != grads.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradient rows but {} sample indices",
                grads.nrows(),
                indices.len()
            )));
        }
        check_finite_rows(&grads)?;
        Ok(Self { grads, source, indices })
    }

    pub fn grads(&self) -> &DMatrix<f64> {
        &self.grads
    }

    pub fn source(&self) -> GradientSource {
        self.source
    }

    /// Sample index of each gradient row.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.grads.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.grads.ncols()
    }

    /// Rows whose sample indices are listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let grads = self.grads.select_rows(rows);
        let indices = rows.iter().map(|&r| self.indices[r]).collect();
        Self::with_indices(grads, self.source, indices)
    }
}

/// Points (one per row), optional outputs, and the domain they live in.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: DMatrix<f64>,
    outputs: Option<DVector<f64>>,
    bounds: Bounds,
    normalized: bool,
}

impl SampleSet {
    /// Points in original units.
    pub fn new(points: DMatrix<f64>, outputs: Option<DVector<f64>>, bounds: Bounds) -> Result<Self> {
        Self::build(points, outputs, bounds, false)
    }

    /// Points already on `[-1, 1]^d`; `bounds` records the original domain.
    pub fn from_normalized(points: DMatrix<f64>, outputs: Option<DVector<f64>>, bounds: Bounds) -> Result<Self> {
        Self::build(points, outputs, bounds, true)
    }

    fn build(points: DMatrix<f64>, outputs: Option<DVector<f64>>, bounds: Bounds, normalized: bool) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::InsufficientData { required: 1, got: 0 });
        }
        if points.ncols() != bounds.dim() {
            return Err(Error::ShapeMismatch(format!(
                "points have {} columns, bounds have dimension {}",
                points.ncols(),
                bounds.dim()
            )));
        }
        check_finite_rows(&points)?;
        if let Some(f) = &outputs {
            if f.len() != points.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} outputs for {} points",
                    f.len(),
                    points.nrows()
                )));
            }
            if let Some((i, &v)) = f.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { sample: i, value: v });
            }
        }
        if normalized {
            check_in_cube(&points)?;
        }
        Ok(Self {
            points,
            outputs,
            bounds,
            normalized,
        })
    }

    /// The same samples mapped to `[-1, 1]^d`. A no-op when already normalized.
    pub fn normalized(&self) -> Result<Self> {
        if self.normalized {
            return Ok(self.clone());
        }
        Ok(Self {
            points: normalize(&self.points, &self.bounds)?,
            outputs: self.outputs.clone(),
            bounds: self.bounds.clone(),
            normalized: true,
        })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn outputs(&self) -> Option<&DVector<f64>> {
        self.outputs.as_ref()
    }

    /// Outputs, or a schema error for operations that need them.
    pub fn require_outputs(&self) -> Result<&DVector<f64>> {
        self.outputs
            .as_ref()
            .ok_or_else(|| Error::Schema("operation requires function outputs (column `f`)".into()))
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "sample set must be normalized to [-1, 1]^d first".into(),
            ))
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::build(
            self.points.select_rows(rows),
            self.outputs.as_ref().map(|f| f.select_rows(rows)),
            self.bounds.clone(),
            self.normalized,
        )
    }
}

fn check_finite_rows(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { sample: i, value: v });
            }
        }
    }
    Ok(())
}

fn check_in_cube(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v.abs() > 1.0 + DOMAIN_TOL {
                return Err(Error::DomainViolation {
                    row: i,
                    axis: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Map points in original units to `[-1, 1]^d`.
///
/// Values within [`DOMAIN_TOL`] outside the cube are clamped onto it; anything
/// further out is an error naming the offending row and axis.
pub fn normalize(points: &DMatrix<f64>, bounds: &Bounds) -> Result<DMatrix<f64>> {
    if points.ncols() != bounds.dim() {
        return Err(Error::ShapeMismatch(format!(
            "points have {} columns, bounds have dimension {}",
            points.ncols(),
            bounds.dim()
        )));
    }
    let mut out = points.clone();
    for j in 0..points.ncols() {
        let lo = bounds.lower[j];
        let w = bounds.upper[j] - lo;
        for i in 0..points.nrows() {
            let x = points[(i, j)];
            let z = 2.0 * (x - lo) / w - 1.0;
            if !(z.abs() <= 1.0 + DOMAIN_TOL) {
                return Err(Error::DomainViolation {
                    row: i,
                    axis: j,
                    value: x,
                });
            }
            out[(i, j)] = z.clamp(-1.0, 1.0);
        }
    }
    Ok(out)
}

/// Inverse of [`normalize`].
pub fn denormalize(points: &DMatrix<f64>, bounds: &Bounds) -> Result<DMatrix<f64>> {
    if points.ncols() != bounds.dim() {
        return Err(Error::ShapeMismatch(format!(
            "points have {} columns, bounds have dimension {}",
            points.ncols(),
            bounds.dim()
        )));
    }
    check_in_cube(points)?;
    let mut out = points.clone();
    for j in 0..points.ncols() {
        let lo = bounds.lower[j];
        let hw = bounds.half_width(j);
        for i in 0..points.nrows() {
            let z = points[(i, j)].clamp(-1.0, 1.0);
            out[(i, j)] = lo + (z + 1.0) * hw;
        }
    }
    Ok(out)
}

/// Express gradients taken in original units with respect to normalized
/// coordinates: column `i` is multiplied by `(upper[i] - lower[i]) / 2`.
pub fn chain_rule_scale(grads: &DMatrix<f64>, bounds: &Bounds) -> Result<DMatrix<f64>> {
    if grads.ncols() != bounds.dim() {
        return Err(Error::ShapeMismatch(format!(
            "gradients have {} columns, bounds have dimension {}",
            grads.ncols(),
            bounds.dim()
        )));
    }
    check_finite_rows(grads)?;
    let mut out = grads.clone();
    for j in 0..grads.ncols() {
        let hw = bounds.half_width(j);
        out.column_mut(j).scale_mut(hw);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(lo: &[f64], hi: &[f64]) -> Bounds {
        Bounds::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![], vec![]).is_err());
        assert!(Bounds::new(vec![0.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Bounds::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let x = DMatrix::from_row_slice(1, 1, &[0.5]);
        assert_eq!(normalize(&x, &b(&[0.0], &[1.0])).unwrap()[(0, 0)], 0.0);

        let x = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let z = normalize(&x, &b(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(z.as_slice(), &[-1.0, 1.0]);

        let x = DMatrix::from_row_slice(1, 2, &[2.0, 6.0]);
        let z = normalize(&x, &b(&[0.0, 2.0], &[4.0, 10.0])).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_out_of_bounds_with_location() {
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 1.5]);
        match normalize(&x, &b(&[0.0, 0.0], &[1.0, 1.0])) {
            Err(Error::DomainViolation { row, axis, .. }) => assert_eq!((row, axis), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_tolerates_round_off() {
        let x = DMatrix::from_row_slice(1, 1, &[1.0 + 1e-14]);
        let z = normalize(&x, &b(&[0.0], &[1.0])).unwrap();
        assert_eq!(z[(0, 0)], 1.0);
    }

    #[test]
    fn denormalize_examples() {
        let z = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_eq!(denormalize(&z, &b(&[0.0], &[1.0])).unwrap()[(0, 0)], 0.5);
        let z = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
        let x = denormalize(&z, &b(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 1.0]);
        let z = DMatrix::from_row_slice(1, 1, &[1.5]);
        assert!(matches!(
            denormalize(&z, &b(&[0.0], &[1.0])),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn chain_rule_examples() {
        let g = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert_eq!(chain_rule_scale(&g, &b(&[0.0], &[2.0])).unwrap()[(0, 0)], 1.0);
        let g = DMatrix::from_row_slice(1, 1, &[3.0]);
        assert_eq!(chain_rule_scale(&g, &b(&[0.0], &[4.0])).unwrap()[(0, 0)], 6.0);
        let g = DMatrix::zeros(1, 2);
        let s = chain_rule_scale(&g, &b(&[-3.0, 5.0], &[7.0, 5.5])).unwrap();
        assert_eq!(s, g);
        let g = DMatrix::from_row_slice(1, 1, &[f64::INFINITY]);
        assert!(chain_rule_scale(&g, &b(&[0.0], &[1.0])).is_err());
    }

    #[test]
    fn sample_set_invariants() {
        let bounds = b(&[0.0, 0.0], &[1.0, 1.0]);
        let pts = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        let s = SampleSet::new(pts.clone(), Some(DVector::from_vec(vec![1.0])), bounds.clone())
            .unwrap()
            .normalized()
            .unwrap();
        assert!(s.is_normalized());
        assert_eq!(s.points().as_slice(), &[0.0, 0.0]);
        assert!(SampleSet::new(pts.clone(), Some(DVector::from_vec(vec![1.0, 2.0])), bounds.clone()).is_err());
        assert!(SampleSet::new(pts.clone(), Some(DVector::from_vec(vec![f64::NAN])), bounds.clone()).is_err());
        assert!(SampleSet::from_normalized(DMatrix::from_row_slice(1, 2, &[0.0, 1.1]), None, bounds.clone()).is_err());
        assert!(SampleSet::new(DMatrix::zeros(0, 2), None, bounds).is_err());
    }

    #[test]
    fn gradient_set_rejects_non_finite_and_bad_indices() {
        let g = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert!(matches!(
            GradientSet::new(g, GradientSource::Exact),
            Err(Error::NonFinite { sample: 1, .. })
        ));
        let g = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(GradientSet::with_indices(g, GradientSource::LocalLinear, vec![0]).is_err());
    }

    proptest! {
        #[test]
        fn normalize_round_trip(
            (lo, width, t) in (1usize..6).prop_flat_map(|d| (
                prop::collection::vec(-100.0f64..100.0, d),
                prop::collection::vec(1e-3f64..50.0, d),
                prop::collection::vec(prop::collection::vec(0.0f64..=1.0, d), 1..8),
            ))
        ) {
            let d = lo.len();
            let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
            let bounds = Bounds::new(lo.clone(), hi).unwrap();
            let x = DMatrix::from_fn(t.len(), d, |i, j| lo[j] + t[i][j] * width[j]);
            let z = normalize(&x, &bounds).unwrap();
            prop_assert!(z.iter().all(|v| v.abs() <= 1.0));
            let back = denormalize(&z, &bounds).unwrap();
            for (a, b) in back.iter().zip(x.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }

        #[test]
        fn chain_rule_is_linear(
            g1 in prop::collection::vec(-10.0f64..10.0, 3),
            g2 in prop::collection::vec(-10.0f64..10.0, 3),
            a in -5.0f64..5.0,
            c in -5.0f64..5.0,
        ) {
            let bounds = Bounds::new(vec![0.0, -2.0, 3.0], vec![4.0, 1.0, 3.5]).unwrap();
            let m1 = DMatrix::from_row_slice(1, 3, &g1);
            let m2 = DMatrix::from_row_slice(1, 3, &g2);
            let lhs = chain_rule_scale(&(&m1 * a + &m2 * c), &bounds).unwrap();
            let rhs = chain_rule_scale(&m1, &bounds).unwrap() * a
                + chain_rule_scale(&m2, &bounds).unwrap() * c;
            for (x, y) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
