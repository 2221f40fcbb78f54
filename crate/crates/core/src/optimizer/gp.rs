//! Gaussian-process surrogate with a Matérn 5/2 kernel and the expected
//! improvement acquisition, on inputs scaled to the unit box.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

const LENGTH_SCALES: [f64; 8] = [0.02, 0.05, 0.1, 0.15, 0.25, 0.4, 0.7, 1.2];
const NOISE_LEVELS: [f64; 3] = [1e-6, 1e-4, 1e-2];

fn matern52(r: f64, length: f64) -> f64 {
    let s = 5f64.sqrt() * r / length;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Posterior of a zero-mean GP fitted to standardised observations.
pub struct GaussianProcess {
    xs: Vec<Vec<f64>>,
    length: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl GaussianProcess {
    /// Fits the GP, choosing length scale and noise level on a fixed grid by
    /// log marginal likelihood. `xs` must lie in the unit box.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64]) -> Option<Self> {
        let n = ys.len();
        if n == 0 || xs.len() != n {
            return None;
        }
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, ys.iter().map(|v| (v - y_mean) / y_scale));

        let mut best: Option<(f64, f64, Cholesky<f64, Dyn>, DVector<f64>)> = None;
        for &length in &LENGTH_SCALES {
            for &noise in &NOISE_LEVELS {
                let k = DMatrix::from_fn(n, n, |i, j| {
                    matern52(dist(&xs[i], &xs[j]), length) + if i == j { noise } else { 0.0 }
                });
                let Some(chol) = k.cholesky() else { continue };
                let alpha = chol.solve(&y);
                let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
                let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det;
                if best.as_ref().is_none_or(|b| lml > b.0) {
                    best = Some((lml, length, chol, alpha));
                }
            }
        }
        let (_, length, chol, alpha) = best?;
        Some(GaussianProcess {
            xs: xs.to_vec(),
            length,
            chol,
            alpha,
            y_mean,
            y_scale,
        })
    }

    /// Posterior mean and standard deviation in the original output units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.xs.len();
        let k = DVector::from_iterator(n, self.xs.iter().map(|xi| matern52(dist(x, xi), self.length)));
        let mean = k.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k)
            .expect("Cholesky factor is non-singular");
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }

    pub fn length_scale(&self) -> f64 {
        self.length
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement over `best` for a maximisation problem.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gain = mean - best;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    gain * normal_cdf(z) + sd * normal_pdf(z)
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv_b = 1.0 / b as f64;
    let mut f = inv_b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv_b;
    }
    out
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Halton point `i` (1-based index skips the origin) in `dim` dimensions,
/// rotated by `shift` modulo 1.
pub fn halton(i: u64, dim: usize, shift: &[f64]) -> Vec<f64> {
    (0..dim)
        .map(|d| (radical_inverse(i + 1, PRIMES[d % PRIMES.len()]) + shift[d]).fract())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_training_points() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let gp = GaussianProcess::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (m, s) = gp.predict(x);
            assert!((m - y).abs() < 0.05, "{m} vs {y}");
            assert!(s < 0.1);
        }
        let (_, far) = gp.predict(&[3.0]);
        assert!(far > 0.5);
    }

    #[test]
    fn constant_observations() {
        let xs = vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.9, 0.3]];
        let gp = GaussianProcess::fit(&xs, &[0.0, 0.0, 0.0]).unwrap();
        let (m, _) = gp.predict(&[0.3, 0.3]);
        assert!(m.abs() < 1e-9);
    }

    #[test]
    fn ei_properties() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5), 0.5);
        assert_eq!(expected_improvement(0.2, 0.0, 0.5), 0.0);
        let a = expected_improvement(0.0, 1.0, 0.0);
        assert!((a - normal_pdf(0.0)).abs() < 1e-12);
        assert!(expected_improvement(0.0, 2.0, 0.0) > a);
        assert!((normal_cdf(1.96) - 0.975_002_1).abs() < 1e-6);
    }

    #[test]
    fn halton_low_discrepancy() {
        let pts: Vec<Vec<f64>> = (0..16).map(|i| halton(i, 1, &[0.0])).collect();
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        for (i, x) in xs.iter().enumerate() {
            assert!((x - i as f64 / 16.0).abs() < 1.0 / 16.0 + 1e-12);
        }
        assert_eq!(halton(0, 2, &[0.0, 0.0]), vec![0.5, 1.0 / 3.0]);
    }
}
