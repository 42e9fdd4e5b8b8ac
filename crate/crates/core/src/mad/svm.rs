//! Linear soft-margin SVM (hinge loss) trained by dual coordinate descent.
//!
//! The bias is learned as the weight of a constant feature fixed to 1, so
//! it is regularized together with the other weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual objective `0.5 |w|^2 - sum(alpha)` after each epoch.
    pub objective_history: Vec<f64>,
    pub epochs_run: usize,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on rows `x` with labels `y` in {-1, +1}. Coordinates are visited
/// in a fresh seeded permutation every epoch; training stops after
/// `max_epochs` or once the projected-gradient spread drops below `tol`.
pub fn train_linear_svm(x: &[Vec<f64>], y: &[f64], c: f64, max_epochs: usize, tol: f64, seed: u64) -> Result<LinearSvm> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::Training("no training samples".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Contract(format!("C must be positive, got {c}")));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Contract("inconsistent feature dimensions".into()));
    }
    if y.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::Contract("labels must be -1 or +1".into()));
    }

    let n = x.len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let q_diag: Vec<f64> = x.iter().map(|r| dot(r, r) + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::new();
    let mut epochs_run = 0;

    for _ in 0..max_epochs {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let g = y[i] * (dot(&w, &x[i]) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    w.iter_mut().zip(&x[i]).for_each(|(wj, xj)| *wj += step * xj);
                    b += step;
                }
            }
        }
        epochs_run += 1;
        history.push(0.5 * (dot(&w, &w) + b * b) - alpha.iter().sum::<f64>());
        if pg_max - pg_min < tol {
            break;
        }
    }
    Ok(LinearSvm {
        weights: w,
        bias: b,
        objective_history: history,
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let (cx, cy, l) = if i % 2 == 0 { (2.0, 2.0, 1.0) } else { (-2.0, -2.0, -1.0) };
            x.push(vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]);
            y.push(l);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_fit_exactly() {
        let (x, y) = blobs(3);
        let m = train_linear_svm(&x, &y, 1.0, 500, 1e-6, 11).unwrap();
        for (r, l) in x.iter().zip(&y) {
            assert!(l * m.decision(r) > 0.0);
        }
    }

    #[test]
    fn dual_objective_never_increases() {
        let (x, y) = blobs(5);
        let m = train_linear_svm(&x, &y, 0.3, 100, 0.0, 2).unwrap();
        assert_eq!(m.epochs_run, 100);
        for w in m.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn contradictory_duplicate_is_harmless() {
        let x = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let y = vec![1.0, -1.0];
        let m = train_linear_svm(&x, &y, 1.0, 50, 1e-9, 0).unwrap();
        assert!(m.objective_history.iter().all(|v| v.is_finite()));
        assert!(m.decision(&x[0]).abs() < 1e-9);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let (x, y) = blobs(8);
        let a = train_linear_svm(&x, &y, 1.0, 30, 0.0, 4).unwrap();
        let b = train_linear_svm(&x, &y, 1.0, 30, 0.0, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_linear_svm(&[vec![1.0]], &[1.0, -1.0], 1.0, 1, 0.0, 0).is_err());
        assert!(train_linear_svm(&[vec![1.0]], &[2.0], 1.0, 1, 0.0, 0).is_err());
        assert!(train_linear_svm(&[vec![1.0], vec![1.0, 2.0]], &[1.0, -1.0], 1.0, 1, 0.0, 0).is_err());
    }
}
