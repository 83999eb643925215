//! Shared independent oracles for integration tests. Nothing here touches the
//! implementation paths it checks: the classifier oracle is a closed-form
//! least-squares fit, the gradient oracle is central finite differences.

use mdp_core::dataset::{Dataset, Image};
use mdp_core::forge::{feature_distance, DistanceKind};
use mdp_core::model::ModelParams;

/// Solves `A x = b` for each column of `b` by Gaussian elimination with
/// partial pivoting. `a` is row-major `dim x dim`, `b` row-major `dim x cols`.
fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>, dim: usize, cols: usize) -> Vec<f64> {
    for col in 0..dim {
        let mut pivot = col;
        for row in (col + 1)..dim {
            if a[row * dim + col].abs() > a[pivot * dim + col].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            for j in 0..dim {
                a.swap(col * dim + j, pivot * dim + j);
            }
            for j in 0..cols {
                b.swap(col * cols + j, pivot * cols + j);
            }
        }
        let diag = a[col * dim + col];
        assert!(diag.abs() > 1e-12, "singular system in least-squares oracle");
        for row in (col + 1)..dim {
            let factor = a[row * dim + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..dim {
                a[row * dim + j] -= factor * a[col * dim + j];
            }
            for j in 0..cols {
                b[row * cols + j] -= factor * b[col * cols + j];
            }
        }
    }
    // Back substitution.
    let mut x = vec![0.0f64; dim * cols];
    for col in (0..dim).rev() {
        for j in 0..cols {
            let mut acc = b[col * cols + j];
            for k in (col + 1)..dim {
                acc -= a[col * dim + k] * x[k * cols + j];
            }
            x[col * cols + j] = acc / a[col * dim + col];
        }
    }
    x
}

/// Fits a ridge-regularized linear classifier (pixels + bias -> one-hot
/// labels) in closed form and returns its train accuracy. Establishes
/// independently of any SGD code whether a dataset is linearly separable in
/// practice.
pub fn least_squares_train_accuracy(ds: &Dataset) -> f64 {
    let d = ds.shape().pixel_count();
    let k = ds.num_classes();
    let dim = d + 1;

    let mut xtx = vec![0.0f64; dim * dim];
    let mut xty = vec![0.0f64; dim * k];
    let mut row = vec![0.0f64; dim];
    for li in ds.images() {
        for (i, &p) in li.image.pixels().iter().enumerate() {
            row[i] = f64::from(p);
        }
        row[d] = 1.0;
        for i in 0..dim {
            for j in 0..dim {
                xtx[i * dim + j] += row[i] * row[j];
            }
            xty[i * k + li.label as usize] += row[i];
        }
    }
    for i in 0..dim {
        xtx[i * dim + i] += 1e-6;
    }
    let weights = solve_linear(xtx, xty, dim, k);

    let mut correct = 0usize;
    for li in ds.images() {
        for (i, &p) in li.image.pixels().iter().enumerate() {
            row[i] = f64::from(p);
        }
        row[d] = 1.0;
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for class in 0..k {
            let mut score = 0.0;
            for i in 0..dim {
                score += row[i] * weights[i * k + class];
            }
            if score > best_score {
                best_score = score;
                best = class;
            }
        }
        if best == li.label as usize {
            correct += 1;
        }
    }
    correct as f64 / ds.len() as f64
}

fn objective(model: &ModelParams, image: &Image, target: &[f64]) -> f64 {
    let features = model.forward_features(image).unwrap();
    feature_distance(&features, target, DistanceKind::L2).unwrap()
}

/// Central finite differences of the L2 feature-distance objective over every
/// pixel. Divides by the actual f32 spacing so storage rounding does not bias
/// the estimate. Pixels must sit in [h, 1-h].
pub fn fd_input_gradient(model: &ModelParams, image: &Image, target: &[f64], h: f64) -> Vec<f64> {
    let shape = image.shape();
    let pixels = image.pixels().to_vec();
    let mut grad = Vec::with_capacity(pixels.len());
    for i in 0..pixels.len() {
        let mut plus = pixels.clone();
        plus[i] = (f64::from(pixels[i]) + h) as f32;
        let mut minus = pixels.clone();
        minus[i] = (f64::from(pixels[i]) - h) as f32;
        let spacing = f64::from(plus[i]) - f64::from(minus[i]);
        let fp = objective(model, &Image::new(shape, plus).unwrap(), target);
        let fm = objective(model, &Image::new(shape, minus).unwrap(), target);
        grad.push((fp - fm) / spacing);
    }
    grad
}

/// Norm-wise relative error between two gradient vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|&x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}
