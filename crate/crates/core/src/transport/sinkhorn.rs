//! Entropic transport by log-domain Sinkhorn iterations with ε-scaling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{cost_matrix, SampleCloud, TransportMethod, TransportResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    /// L1 violation of the row marginal at which iterations stop.
    pub tol: f64,
    pub max_iterations: usize,
    /// Factor by which ε shrinks between warm-started stages.
    pub scaling: f64,
    /// Alternating-scaling sweeps per ε stage before switching to Newton
    /// steps on the dual.
    pub scaling_iterations: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: 20_000, scaling: 0.5, scaling_iterations: 200 }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + values.map(|v| (v - hi).exp()).sum::<f64>().ln()
}

struct State {
    n: usize,
    m: usize,
    /// Row-major `n x m` and its transpose.
    cost: Vec<f64>,
    cost_t: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    log_a: f64,
    log_b: f64,
}

impl State {
    fn new(cost: &DMatrix<f64>) -> Self {
        let (n, m) = cost.shape();
        let cost_t: Vec<f64> = cost.iter().copied().collect();
        let cost: Vec<f64> = cost.transpose().iter().copied().collect();
        Self {
            n,
            m,
            cost,
            cost_t,
            f: vec![0.0; n],
            g: vec![0.0; m],
            log_a: -(n as f64).ln(),
            log_b: -(m as f64).ln(),
        }
    }

    /// Exact soft c-transform: makes the row marginal exact.
    fn update_f(&mut self, eps: f64) {
        for i in 0..self.n {
            let row = &self.cost[i * self.m..(i + 1) * self.m];
            let lse = log_sum_exp(row.iter().zip(&self.g).map(|(c, g)| (g - c) / eps));
            self.f[i] = eps * (self.log_a - lse);
        }
    }

    fn update_g(&mut self, eps: f64) {
        for j in 0..self.m {
            let col = &self.cost_t[j * self.n..(j + 1) * self.n];
            let lse = log_sum_exp(col.iter().zip(&self.f).map(|(c, f)| (f - c) / eps));
            self.g[j] = eps * (self.log_b - lse);
        }
    }

    /// Dual objective `Σ a·f + Σ b·g` with `f` the exact soft c-transform of `g`.
    fn objective(&self) -> f64 {
        let a = self.log_a.exp();
        let b = self.log_b.exp();
        a * self.f.iter().sum::<f64>() + b * self.g.iter().sum::<f64>()
    }

    /// Damped Newton step on the semi-dual in `g` (with `f` re-solved
    /// exactly). Returns `false` when no ascent step could be found.
    fn newton_step(&mut self, eps: f64) -> bool {
        let (n, m) = (self.n, self.m);
        self.update_f(eps);
        let a = self.log_a.exp();
        let b = self.log_b.exp();
        let mut plan = DMatrix::<f64>::zeros(n, m);
        for i in 0..n {
            let row = &self.cost[i * m..(i + 1) * m];
            for (j, (c, g)) in row.iter().zip(&self.g).enumerate() {
                plan[(i, j)] = ((self.f[i] + g - c) / eps).exp();
            }
        }
        let cols: Vec<f64> = plan.column_iter().map(|c| c.sum()).collect();
        let grad = DVector::from_iterator(m, cols.iter().map(|c| b - c));
        // −Hessian·ε = diag(cols) − Pᵀ·diag(1/a)·P
        let mut neg_h = -(plan.transpose() * &plan) / a;
        for j in 0..m {
            neg_h[(j, j)] += cols[j];
        }
        neg_h /= eps;
        let scale = (0..m).map(|j| neg_h[(j, j)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut ridge = 1e-12 * scale;
        let step = loop {
            let mut h = neg_h.clone();
            for j in 0..m {
                h[(j, j)] += ridge;
            }
            if let Some(ch) = h.cholesky() {
                break ch.solve(&grad);
            }
            ridge *= 10.0;
            if ridge > scale {
                return false;
            }
        };
        let start = self.objective();
        let slope = grad.dot(&step);
        let g0 = self.g.clone();
        let f0 = self.f.clone();
        let mut t = 1.0;
        for _ in 0..40 {
            for j in 0..m {
                self.g[j] = g0[j] + t * step[j];
            }
            self.update_f(eps);
            if self.objective() >= start + 1e-4 * t * slope {
                return true;
            }
            t *= 0.5;
        }
        self.g = g0;
        self.f = f0;
        false
    }

    /// L1 violation of both marginals by the current plan.
    fn marginal_violation(&self, eps: f64) -> f64 {
        let a = self.log_a.exp();
        let b = self.log_b.exp();
        let mut cols = vec![0.0; self.m];
        let mut total = 0.0;
        for i in 0..self.n {
            let row = &self.cost[i * self.m..(i + 1) * self.m];
            let mut s = 0.0;
            for ((c, g), col) in row.iter().zip(&self.g).zip(cols.iter_mut()) {
                let p = ((self.f[i] + g - c) / eps).exp();
                s += p;
                *col += p;
            }
            total += (s - a).abs();
        }
        total + cols.iter().map(|c| (c - b).abs()).sum::<f64>()
    }

    fn plan_cost(&self, eps: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            let row = &self.cost[i * self.m..(i + 1) * self.m];
            for (c, g) in row.iter().zip(&self.g) {
                total += ((self.f[i] + g - c) / eps).exp() * c;
            }
        }
        total
    }

    /// Feasible dual value after a double c-transform of `f`.
    fn dual_bound(&self) -> f64 {
        let g: Vec<f64> = (0..self.m)
            .map(|j| {
                let col = &self.cost_t[j * self.n..(j + 1) * self.n];
                col.iter().zip(&self.f).map(|(c, f)| c - f).fold(f64::INFINITY, f64::min)
            })
            .collect();
        let f: Vec<f64> = (0..self.n)
            .map(|i| {
                let row = &self.cost[i * self.m..(i + 1) * self.m];
                row.iter().zip(&g).map(|(c, g)| c - g).fold(f64::INFINITY, f64::min)
            })
            .collect();
        f.iter().sum::<f64>() / self.n as f64 + g.iter().sum::<f64>() / self.m as f64
    }
}

/// Entropic `W₂` approximation at regularization `epsilon` (in squared-cost
/// units). Reports the plan's transport cost and a dual gap.
pub fn wasserstein2_entropic(
    a: &SampleCloud,
    b: &SampleCloud,
    epsilon: f64,
    options: &SinkhornOptions,
) -> Result<TransportResult> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("ε must be > 0, got {epsilon}")));
    }
    if !(options.scaling > 0.0 && options.scaling < 1.0) {
        return Err(Error::Domain("ε-scaling factor must lie in (0, 1)".into()));
    }
    let cost = cost_matrix(a, b)?;
    let mut state = State::new(&cost);
    let mut eps = cost.max().max(epsilon);
    let mut iterations = 0;
    loop {
        let last = eps <= epsilon;
        let stage_tol = if last { options.tol } else { options.tol.max(1e-6) };
        let mut residual = f64::INFINITY;
        // Plain scaling until the marginals are roughly right, then Newton
        // steps on the same dual to reach the tolerance.
        let mut plain = 0;
        while residual > stage_tol {
            if iterations >= options.max_iterations {
                return Err(Error::NoConvergence { iterations, residual });
            }
            if plain < options.scaling_iterations && residual > 1e-3 {
                state.update_f(eps);
                state.update_g(eps);
                plain += 1;
            } else if !state.newton_step(eps) {
                state.update_f(eps);
                state.update_g(eps);
            }
            iterations += 1;
            residual = state.marginal_violation(eps);
            if !residual.is_finite() {
                return Err(Error::NoConvergence { iterations, residual });
            }
        }
        if last {
            break;
        }
        eps = (eps * options.scaling).max(epsilon);
    }
    let primal = state.plan_cost(epsilon);
    let dual = state.dual_bound();
    Ok(TransportResult {
        w2: primal.max(0.0).sqrt(),
        method: TransportMethod::Entropic,
        epsilon: Some(epsilon),
        dual_gap: Some(primal - dual),
        iterations: Some(iterations),
        interval: None,
    })
}

#[cfg(test)]
mod tests {
    use super::super::wasserstein2_exact;
    use super::*;

    fn line(n: usize, shift: f64) -> SampleCloud {
        SampleCloud::euclidean((0..n).map(|k| vec![k as f64 / n as f64 + shift]).collect())
            .unwrap()
    }

    #[test]
    fn large_epsilon_tends_to_product_coupling() {
        let a = line(20, 0.0);
        let b = line(20, 0.3);
        let r = wasserstein2_entropic(&a, &b, 1e4, &SinkhornOptions::default()).unwrap();
        let cost = cost_matrix(&a, &b).unwrap();
        let mean_cost = cost.sum() / 400.0;
        assert!((r.w2 * r.w2 - mean_cost).abs() < 1e-3 * mean_cost);
    }

    fn gaussian_cloud(n: usize, dim: usize, seed: u64, shift: f64) -> SampleCloud {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z + shift
                    })
                    .collect()
            })
            .collect();
        SampleCloud::euclidean(pts).unwrap()
    }

    #[test]
    fn small_epsilon_brackets_exact() {
        let a = gaussian_cloud(128, 5, 1, 0.0);
        let b = gaussian_cloud(128, 5, 2, 0.4);
        let exact = wasserstein2_exact(&a, &b).unwrap().w2;
        let cost = cost_matrix(&a, &b).unwrap();
        let mut all: Vec<f64> = cost.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        let eps = 1e-3 * all[all.len() / 2];
        let r = wasserstein2_entropic(&a, &b, eps, &SinkhornOptions::default()).unwrap();
        let gap = r.dual_gap.unwrap();
        assert!(r.w2 * r.w2 >= exact * exact - 1e-8, "{} {}", r.w2, exact);
        assert!(r.w2 * r.w2 - gap <= exact * exact + 1e-8);
        assert!((r.w2 - exact).abs() < 0.02 * exact, "{} vs {exact}", r.w2);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = line(10, 0.0);
        let b = line(10, 0.5);
        let opts = SinkhornOptions { max_iterations: 1, ..SinkhornOptions::default() };
        assert!(matches!(
            wasserstein2_entropic(&a, &b, 1e-4, &opts),
            Err(Error::NoConvergence { .. })
        ));
    }
}
