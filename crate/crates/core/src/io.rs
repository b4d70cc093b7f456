//! Sample files and bounds specifications.
//!
//! Sample CSVs carry a header naming every column: `x1..xd` (required),
//! `f` (optional) and `g1..gd` (optional exact gradients in original
//! units). Values use `.` as the decimal separator.

use nalgebra::{DMatrix, DVector};

use crate::domain::{chain_rule_scale, Bounds, GradientSet, GradientSource, SampleSet};
use crate::error::{Error, Result};

/// Where the original domain of the inputs comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundsSource {
    Explicit(Bounds),
    /// Inputs are already on `[-1, 1]^d`; anything outside is an error.
    AssumeNormalized,
}

/// Contents of a sample file after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSamples {
    pub samples: SampleSet,
    /// Exact gradients, chain-rule scaled to normalized coordinates.
    pub gradients: Option<GradientSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    X(usize),
    F,
    G(usize),
}

fn parse_column_name(name: &str) -> Option<Column> {
    if name == "f" {
        return Some(Column::F);
    }
    let (kind, idx) = name.split_at(name.char_indices().nth(1).map_or(name.len(), |(i, _)| i));
    if idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) || idx.starts_with('0') {
        return None;
    }
    let i: usize = idx.parse().ok()?;
    match kind {
        "x" => Some(Column::X(i - 1)),
        "g" => Some(Column::G(i - 1)),
        _ => None,
    }
}

#[derive(Debug)]
struct Layout {
    columns: Vec<Column>,
    d: usize,
    has_f: bool,
    has_g: bool,
}

fn parse_header(fields: &[String]) -> Result<Layout> {
    let header_err = |message: String| Error::Parse {
        line: 1,
        column: None,
        message,
    };
    if fields.iter().all(|f| f.parse::<f64>().is_ok()) {
        return Err(header_err(
            "missing header row (expected x1,...,xd[,f][,g1,...,gd])".into(),
        ));
    }
    let mut columns = Vec::with_capacity(fields.len());
    for name in fields {
        let col = parse_column_name(name).ok_or_else(|| Error::Parse {
            line: 1,
            column: Some(name.clone()),
            message: format!("unknown column `{name}` (expected x<i>, f or g<i>)"),
        })?;
        if columns.contains(&col) {
            return Err(Error::Schema(format!("duplicate column `{name}`")));
        }
        columns.push(col);
    }
    let xs: Vec<usize> = columns
        .iter()
        .filter_map(|c| if let Column::X(i) = c { Some(*i) } else { None })
        .collect();
    let gs: Vec<usize> = columns
        .iter()
        .filter_map(|c| if let Column::G(i) = c { Some(*i) } else { None })
        .collect();
    let d = xs.len();
    if d == 0 {
        return Err(Error::Schema("no input columns x1..xd".into()));
    }
    if let Some(i) = xs.iter().find(|&&i| i >= d) {
        return Err(Error::Schema(format!(
            "input columns must be x1..x{d}, found x{}",
            i + 1
        )));
    }
    if !gs.is_empty() {
        if gs.len() != d {
            return Err(Error::Schema(format!("{} gradient columns for {d} inputs", gs.len())));
        }
        if let Some(i) = gs.iter().find(|&&i| i >= d) {
            return Err(Error::Schema(format!(
                "gradient columns must be g1..g{d}, found g{}",
                i + 1
            )));
        }
    }
    Ok(Layout {
        has_f: columns.contains(&Column::F),
        has_g: !gs.is_empty(),
        columns,
        d,
    })
}

/// Parse sample CSV text and normalize it according to `bounds`.
pub fn parse_samples(text: &str, bounds: &BoundsSource) -> Result<LoadedSamples> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                column: None,
                message: "empty file (missing header row)".into(),
            })
        }
        Some(rec) => rec.map_err(csv_error)?.iter().map(str::to_owned).collect(),
    };
    let layout = parse_header(&header)?;
    let d = layout.d;

    let mut xs = Vec::new();
    let mut fs = Vec::new();
    let mut gs = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != layout.columns.len() {
            return Err(Error::Parse {
                line,
                column: None,
                message: format!("expected {} fields, found {}", layout.columns.len(), rec.len()),
            });
        }
        let mut x = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut f = 0.0;
        for ((cell, col), name) in rec.iter().zip(&layout.columns).zip(&header) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: Some(name.clone()),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: Some(name.clone()),
                    message: format!("non-finite value `{cell}`"),
                });
            }
            match *col {
                Column::X(i) => x[i] = v,
                Column::G(i) => g[i] = v,
                Column::F => f = v,
            }
        }
        xs.extend(x);
        gs.extend(g);
        fs.push(f);
    }
    let m = fs.len();
    if m == 0 {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    let points = DMatrix::from_row_slice(m, d, &xs);
    let outputs = layout.has_f.then(|| DVector::from_vec(fs));
    let samples = match bounds {
        BoundsSource::Explicit(b) => {
            if b.dim() != d {
                return Err(Error::Schema(format!(
                    "bounds have dimension {}, file has {d} inputs",
                    b.dim()
                )));
            }
            SampleSet::new(points, outputs, b.clone())?.normalized()?
        }
        BoundsSource::AssumeNormalized => SampleSet::from_normalized(points, outputs, Bounds::unit(d)?)?,
    };
    let gradients = if layout.has_g {
        let raw = DMatrix::from_row_slice(m, d, &gs);
        Some(GradientSet::new(
            chain_rule_scale(&raw, samples.bounds())?,
            GradientSource::Exact,
        )?)
    } else {
        None
    };
    Ok(LoadedSamples { samples, gradients })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        column: None,
        message: e.to_string(),
    }
}

/// Parse `lo:hi,lo:hi,...`, one pair per input dimension.
pub fn parse_bounds_list(text: &str) -> Result<Bounds> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (i, pair) in text.split(',').enumerate() {
        let (lo, hi) = pair
            .split_once(':')
            .ok_or_else(|| Error::InvalidBounds(format!("entry {} `{pair}` is not lo:hi", i + 1)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidBounds(format!("entry {} `{pair}`: `{s}` is not a number", i + 1)))
        };
        lower.push(parse(lo)?);
        upper.push(parse(hi)?);
    }
    Bounds::new(lower, upper)
}

/// Parse a bounds CSV with header `lower,upper` and one row per dimension.
pub fn parse_bounds_csv(text: &str) -> Result<Bounds> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.len() != 2 || &header[0] != "lower" || &header[1] != "upper" {
        return Err(Error::Parse {
            line: 1,
            column: None,
            message: "bounds file header must be `lower,upper`".into(),
        });
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        for (i, dest) in [&mut lower, &mut upper].into_iter().enumerate() {
            let cell = &rec[i];
            dest.push(cell.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: Some(header[i].to_owned()),
                message: format!("`{cell}` is not a number"),
            })?);
        }
    }
    if lower.is_empty() {
        return Err(Error::InvalidBounds("bounds file has no rows".into()));
    }
    Bounds::new(lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit2() -> BoundsSource {
        BoundsSource::Explicit(Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap())
    }

    #[test]
    fn single_row_with_bounds() {
        let l = parse_samples("x1,x2,f\n0.5,0.5,1.0\n", &unit2()).unwrap();
        assert_eq!(l.samples.len(), 1);
        assert_eq!(l.samples.points().as_slice(), &[0.0, 0.0]);
        assert_eq!(l.samples.outputs().unwrap()[0], 1.0);
        assert!(l.samples.is_normalized());
        assert!(l.gradients.is_none());
    }

    #[test]
    fn inputs_only() {
        let l = parse_samples("x1,x2\n0.1,0.2\n0.3,0.4\n", &BoundsSource::AssumeNormalized).unwrap();
        assert!(l.samples.outputs().is_none());
        assert!(matches!(l.samples.require_outputs(), Err(Error::Schema(_))));
    }

    #[test]
    fn gradients_are_chain_rule_scaled() {
        let b = BoundsSource::Explicit(Bounds::new(vec![0.0, 10.0], vec![2.0, 30.0]).unwrap());
        let l = parse_samples("x1,x2,f,g1,g2\n1,20,3,4,5\n", &b).unwrap();
        let g = l.gradients.unwrap();
        assert_eq!(g.source(), GradientSource::Exact);
        assert_eq!(g.grads().as_slice(), &[4.0, 50.0]);
    }

    #[test]
    fn column_order_is_free() {
        let a = parse_samples("x1,x2,f\n0.1,0.2,3\n", &BoundsSource::AssumeNormalized).unwrap();
        let b = parse_samples("f,x2,x1\n3,0.2,0.1\n", &BoundsSource::AssumeNormalized).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn header_errors() {
        let n = &BoundsSource::AssumeNormalized;
        assert!(matches!(parse_samples("", n), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_samples("0.1,0.2\n0.3,0.4\n", n),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_samples("x1,y\n0.1,0.2\n", n),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_samples("x1,x1\n0.1,0.2\n", n), Err(Error::Schema(_))));
        assert!(matches!(parse_samples("x1,x3\n0.1,0.2\n", n), Err(Error::Schema(_))));
        assert!(matches!(
            parse_samples("x1,x2,g1\n0.1,0.2,1\n", n),
            Err(Error::Schema(_))
        ));
        assert!(matches!(parse_samples("f\n1\n", n), Err(Error::Schema(_))));
        assert!(matches!(parse_samples("x01\n0.1\n", n), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_samples("x1,f\n", n),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn cell_errors_have_location() {
        let n = &BoundsSource::AssumeNormalized;
        match parse_samples("x1,x2,f\n0.1,0.2,1\n0.1,abc,1\n", n) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column.as_deref(), Some("x2"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_samples("x1,x2\n0.1,0.2,0.3\n", n),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_samples("x1,f\n0.1,NaN\n", n), Err(Error::Parse { .. })));
        assert!(matches!(parse_samples("x1,f\n0.1,1,5%\n", n), Err(Error::Parse { .. })));
    }

    #[test]
    fn assume_normalized_rejects_large_values() {
        let r = parse_samples("x1,x2\n0.1,1.5\n", &BoundsSource::AssumeNormalized);
        assert!(matches!(r, Err(Error::DomainViolation { row: 0, axis: 1, .. })));
        let r = parse_samples("x1,x2\n0.1,1.5\n", &unit2());
        assert!(matches!(r, Err(Error::DomainViolation { .. })));
        let r = parse_samples("x1\n0.1\n", &unit2());
        assert!(matches!(r, Err(Error::Schema(_))));
    }

    #[test]
    fn bounds_list() {
        let b = parse_bounds_list("0:1, -2:2").unwrap();
        assert_eq!(b.lower(), &[0.0, -2.0]);
        assert_eq!(b.upper(), &[1.0, 2.0]);
        assert!(parse_bounds_list("0:1,2").is_err());
        assert!(parse_bounds_list("1:0").is_err());
        assert!(parse_bounds_list("a:1").is_err());
        assert!(parse_bounds_list("").is_err());
    }

    #[test]
    fn bounds_csv() {
        let b = parse_bounds_csv("lower,upper\n0,1\n-3,5\n").unwrap();
        assert_eq!(b.upper(), &[1.0, 5.0]);
        assert!(parse_bounds_csv("lo,hi\n0,1\n").is_err());
        assert!(parse_bounds_csv("lower,upper\n").is_err());
        assert!(parse_bounds_csv("lower,upper\n0,x\n").is_err());
        assert!(parse_bounds_csv("lower,upper\n0\n").is_err());
    }

    proptest! {
        #[test]
        fn parsing_never_panics(text in "[x0-9gf.,:\\-\\n eE]{0,80}") {
            let _ = parse_samples(&text, &BoundsSource::AssumeNormalized);
            let _ = parse_bounds_list(&text);
            let _ = parse_bounds_csv(&text);
        }

        #[test]
        fn written_values_read_back(vals in proptest::collection::vec(-1.0f64..1.0, 1..20)) {
            let mut text = String::from("x1,f\n");
            for v in &vals {
                text.push_str(&format!("{v:.16e},{v:.16e}\n"));
            }
            let l = parse_samples(&text, &BoundsSource::AssumeNormalized).unwrap();
            prop_assert_eq!(l.samples.points().as_slice(), vals.as_slice());
        }
    }
}
