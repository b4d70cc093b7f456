use nalgebra::DMatrix;
use paramred::gradients::local_linear_gradients;
use paramred::io::{parse_samples, BoundsSource};
use paramred::testfns::{by_name, sample_uniform};
use paramred::{subspace_distance, Bounds, Criterion, RngStream, Subspace};

const LOWER: [f64; 5] = [0.0, -3.0, 1.0, 0.0, 0.0];
const UPPER: [f64; 5] = [2.0, 1.0, 5.0, 4.0, 1.0];

/// RIDGE1 samples written in original coordinates, gradients included.
fn ridge_csv(m: usize, seed: u64, with_gradients: bool) -> String {
    let func = by_name("ridge1").unwrap();
    let z = sample_uniform(&func, m, seed).unwrap();
    let mut text = String::from("x1,x2,x3,x4,x5,f");
    if with_gradients {
        text.push_str(",g1,g2,g3,g4,g5");
    }
    text.push('\n');
    for r in 0..m {
        let zr: Vec<f64> = z.points().row(r).iter().copied().collect();
        let half: Vec<f64> = (0..5).map(|j| (UPPER[j] - LOWER[j]) / 2.0).collect();
        let mut cells: Vec<String> = (0..5)
            .map(|j| format!("{:.17e}", LOWER[j] + (zr[j] + 1.0) * half[j]))
            .collect();
        cells.push(format!("{:.17e}", func.evaluate(&zr)));
        if with_gradients {
            let g = func.gradient(&zr);
            cells.extend((0..5).map(|j| format!("{:.17e}", g[j] / half[j])));
        }
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    text
}

fn bounds() -> BoundsSource {
    BoundsSource::Explicit(Bounds::new(LOWER.to_vec(), UPPER.to_vec()).unwrap())
}

#[test]
fn exact_gradients_from_file_recover_ridge() {
    let loaded = parse_samples(&ridge_csv(200, 1, true), &bounds()).unwrap();
    assert!(loaded.samples.is_normalized());
    let grads = loaded.gradients.unwrap();
    let sub = Subspace::fit(&grads, None, Criterion::FixedDim(1)).unwrap();
    let truth = by_name("ridge1").unwrap().known_active.unwrap();
    assert!(subspace_distance(&sub.w1(), &truth).unwrap() < 1e-10);
}

#[test]
fn local_linear_gradients_from_file_recover_ridge() {
    let loaded = parse_samples(&ridge_csv(400, 2, false), &bounds()).unwrap();
    assert!(loaded.gradients.is_none());
    let grads = local_linear_gradients(&loaded.samples, 12, 100, &RngStream::new(2, 3)).unwrap();
    let sub = Subspace::fit(&grads, None, Criterion::FixedDim(1)).unwrap();
    let truth = by_name("ridge1").unwrap().known_active.unwrap();
    let dist = subspace_distance(&sub.w1(), &truth).unwrap();
    assert!(dist < 0.1, "{dist}");
}

#[test]
fn backward_points_map_forward_to_target() {
    let loaded = parse_samples(&ridge_csv(100, 3, true), &bounds()).unwrap();
    let sub = Subspace::fit(&loaded.gradients.unwrap(), None, Criterion::FixedDim(1)).unwrap();
    let y = [0.4];
    let pts = sub.backward(&y, 25, &RngStream::new(3, 5)).unwrap();
    assert_eq!(pts.shape(), (25, 5));
    assert!(pts.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
    let reduced = sub.forward(&pts).unwrap();
    assert!((reduced - DMatrix::from_element(25, 1, 0.4)).amax() < 1e-10);
}
