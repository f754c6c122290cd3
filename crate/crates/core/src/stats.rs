//! Deterministic reductions, bootstrap intervals and small regression helpers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fixed-order pairwise summation, so reductions do not depend on how
/// the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let prod: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    pairwise_sum(&prod) / (xs.len() - 1) as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Point estimate with a confidence interval and a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0, lo: value, hi: value }
    }
}

/// Nonparametric percentile bootstrap with its own seeded generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
    /// Two-sided coverage of the reported interval.
    pub level: f64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self { resamples: 1000, seed: 0x5eed, level: 0.95 }
    }
}

impl Bootstrap {
    /// `stat` receives the resampled replica indices.
    pub fn estimate<F>(&self, n: usize, stat: F) -> Estimate
    where
        F: Fn(&[usize]) -> f64,
    {
        let all: Vec<usize> = (0..n).collect();
        let value = stat(&all);
        if n < 2 || self.resamples == 0 {
            return Estimate::exact(value);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut idx = vec![0usize; n];
        let mut draws: Vec<f64> = (0..self.resamples)
            .map(|_| {
                for v in idx.iter_mut() {
                    *v = rng.random_range(0..n);
                }
                stat(&idx)
            })
            .collect();
        let std_error = variance(&draws).sqrt();
        draws.sort_by(f64::total_cmp);
        let tail = (1.0 - self.level) / 2.0;
        Estimate {
            value,
            std_error,
            lo: quantile_sorted(&draws, tail),
            hi: quantile_sorted(&draws, 1.0 - tail),
        }
    }

    /// Bootstrap of a plain mean.
    pub fn mean(&self, xs: &[f64]) -> Estimate {
        self.estimate(xs.len(), |idx| {
            let picked: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
            mean(&picked)
        })
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let k = pos.floor() as usize;
    let w = pos - k as f64;
    if k + 1 < sorted.len() {
        sorted[k] * (1.0 - w) + sorted[k + 1] * w
    } else {
        sorted[k]
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n as f64 * m as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    (d, kolmogorov_survival(lambda))
}

fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Ordinary least squares through the normal equations.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub residual_variance: f64,
    /// `(XᵀX)⁻¹`
    pub normal_inverse: DMatrix<f64>,
    /// Heteroskedasticity-consistent (HC1) coefficient covariance.
    pub robust_covariance: DMatrix<f64>,
}

/// Fails with the numerical rank when the design is rank deficient.
/// Columns are scaled to unit norm before the rank decision.
pub fn least_squares(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<LeastSquares, usize> {
    let (n, p) = design.shape();
    let scale: Vec<f64> = design
        .column_iter()
        .map(|c| {
            let norm = c.norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, p, |r, c| design[(r, c)] * scale[c]);
    let gram = scaled.transpose() * &scaled;
    let rhs = scaled.transpose() * target;
    let svd = gram.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12 * p as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p || smax == 0.0 {
        return Err(rank);
    }
    let inv_scaled = svd.pseudo_inverse(tol).map_err(|_| rank)?;
    let raw = &inv_scaled * rhs;
    let coefficients = DVector::from_fn(p, |r, _| scale[r] * raw[r]);
    let normal_inverse = DMatrix::from_fn(p, p, |r, c| scale[r] * inv_scaled[(r, c)] * scale[c]);
    let resid = target - design * &coefficients;
    let dof = n.saturating_sub(p).max(1);
    let weighted = DMatrix::from_fn(n, p, |r, c| design[(r, c)] * resid[r]);
    let meat = weighted.transpose() * &weighted;
    let robust_covariance = &normal_inverse * meat * &normal_inverse * (n as f64 / dof as f64);
    Ok(LeastSquares {
        coefficients,
        residual_variance: resid.norm_squared() / dof as f64,
        normal_inverse,
        robust_covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn bootstrap_is_deterministic_and_covers() {
        let xs: Vec<f64> = (0..400).map(|k| ((k * 7919) % 101) as f64).collect();
        let b = Bootstrap::default();
        let e1 = b.mean(&xs);
        let e2 = b.mean(&xs);
        assert_eq!(e1, e2);
        assert!(e1.lo <= e1.value && e1.value <= e1.hi);
        assert!((e1.std_error - std_error(&xs)).abs() < 0.2 * std_error(&xs));
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..500).map(|k| k as f64 / 500.0).collect();
        let same: Vec<f64> = (0..500).map(|k| (k as f64 + 0.5) / 500.0).collect();
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &same).1 > 0.5);
        assert!(ks_two_sample(&a, &shifted).1 < 1e-6);
    }

    #[test]
    fn least_squares_recovers_plane_and_flags_rank() {
        let n = 50;
        let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { r as f64 });
        let y = DVector::from_fn(n, |r, _| 3.0 - 0.5 * r as f64);
        let fit = least_squares(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-9);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-9);
        let dup = DMatrix::from_fn(n, 2, |r, _| r as f64);
        assert_eq!(least_squares(&dup, &y).unwrap_err(), 1);
    }
}
