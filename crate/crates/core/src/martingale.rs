//! Martingale representation on the discrete white-noise filtration.
//!
//! The spatial basis is `e_k = 1_{cell k}/√dx`, so the basis motions are
//! `W_k(t_i) = Σ_{i'<i} ΔW[i'][k]/√dx`, independent with `Var = t_i`.
//! Conditional expectations are least-squares projections on polynomial
//! features of the basis motions at the current time.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::NoiseSheet;
use crate::parallel::run_replicas;
use crate::rng::SeedSpec;
use crate::stats::{self, least_squares, mean, std_error, Bootstrap, Estimate};

/// `W_k(t_i)` for every basis index `k`, row-major `(nt+1) x nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMotions {
    nx: usize,
    values: Vec<f64>,
}

pub fn basis_motions(noise: &NoiseSheet) -> BasisMotions {
    use crate::noise::NoiseRows;
    let grid = *noise.grid();
    let nx = grid.nx();
    let scale = 1.0 / grid.dx().sqrt();
    let mut values = vec![0.0; (grid.nt() + 1) * nx];
    for i in 0..grid.nt() {
        let row = noise.row(i);
        for k in 0..nx {
            values[(i + 1) * nx + k] = values[i * nx + k] + row[k] * scale;
        }
    }
    BasisMotions { nx, values }
}

/// `Σ_j e_k(x_j)·e_l(x_j)·dx`; the identity for the indicator basis.
pub fn basis_gram(grid: &Grid) -> DMatrix<f64> {
    let e = |k: usize, j: usize| if k == j { 1.0 / grid.dx().sqrt() } else { 0.0 };
    DMatrix::from_fn(grid.nx(), grid.nx(), |k, l| {
        (0..grid.nx()).map(|j| e(k, j) * e(l, j) * grid.dx()).sum()
    })
}

impl BasisMotions {
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.nx..(i + 1) * self.nx]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.nx + k]
    }

    /// `ΔW_k(t_i) = W_k(t_{i+1}) − W_k(t_i)`
    pub fn increment(&self, i: usize, k: usize) -> f64 {
        self.value(i + 1, k) - self.value(i, k)
    }
}

/// Closed-form martingales used to exercise the representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MartingaleCase {
    /// `Σ_k w_k·W_{k+1}(t)`
    Linear { weights: Vec<f64> },
    /// `W_1(t)² − t`
    Quadratic,
    /// `W_1(t)² − t + W_1(t)·W_2(t)`
    Mixed,
}

impl MartingaleCase {
    pub fn linear() -> Self {
        MartingaleCase::Linear { weights: vec![1.0] }
    }

    /// Number of basis motions the martingale depends on.
    pub fn motions_used(&self) -> usize {
        match self {
            MartingaleCase::Linear { weights } => weights.len(),
            MartingaleCase::Quadratic => 1,
            MartingaleCase::Mixed => 2,
        }
    }

    pub fn value(&self, t: f64, w: &[f64]) -> f64 {
        match self {
            MartingaleCase::Linear { weights } => weights.iter().zip(w).map(|(a, b)| a * b).sum(),
            MartingaleCase::Quadratic => w[0] * w[0] - t,
            MartingaleCase::Mixed => w[0] * w[0] - t + w[0] * w[1],
        }
    }

    /// Continuous-time integrand `X_k(t)` given the motions at `t`.
    pub fn integrand(&self, k: usize, w: &[f64]) -> f64 {
        match self {
            MartingaleCase::Linear { weights } => weights.get(k).copied().unwrap_or(0.0),
            MartingaleCase::Quadratic => {
                if k == 0 {
                    2.0 * w[0]
                } else {
                    0.0
                }
            }
            MartingaleCase::Mixed => match k {
                0 => 2.0 * w[0] + w[1],
                1 => w[0],
                _ => 0.0,
            },
        }
    }
}

/// Replicas of a martingale together with the motions that generate its
/// filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleSample {
    pub grid: Grid,
    pub motions: Vec<BasisMotions>,
    /// `M(t_i)` per replica.
    pub values: Vec<Vec<f64>>,
}

impl MartingaleSample {
    pub fn simulate(
        case: &MartingaleCase,
        grid: &Grid,
        seed: u64,
        replicas: u32,
        threads: Option<usize>,
    ) -> Result<Self> {
        if case.motions_used() > grid.nx() {
            return Err(Error::Config(format!(
                "case needs {} basis motions, grid has {}",
                case.motions_used(),
                grid.nx()
            )));
        }
        let motions = run_replicas(replicas, threads, |r| {
            Ok(basis_motions(&NoiseSheet::sample(grid, SeedSpec::new(seed, r))))
        })?;
        let values = motions
            .iter()
            .map(|m| (0..=grid.nt()).map(|i| case.value(grid.time(i), m.at(i))).collect())
            .collect();
        Ok(Self { grid: *grid, motions, values })
    }

    pub fn with_values(&self, values: Vec<Vec<f64>>) -> Self {
        Self { grid: self.grid, motions: self.motions.clone(), values }
    }

    pub fn replicas(&self) -> usize {
        self.values.len()
    }
}

/// Monomials of `W_1..W_vars` at the current time, graded by total degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub vars: usize,
    pub degree: usize,
    exponents: Vec<Vec<usize>>,
}

impl Features {
    pub fn new(vars: usize, degree: usize) -> Self {
        let mut exponents = vec![vec![0; vars]];
        for d in 1..=degree {
            let mut current = Vec::new();
            monomials(vars, d, 0, &mut vec![0; vars], &mut current);
            exponents.extend(current);
        }
        Self { vars, degree, exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<usize>] {
        &self.exponents
    }

    pub fn eval(&self, w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.exponents.iter().map(|e| {
            e.iter().zip(w).map(|(&p, &x)| x.powi(p as i32)).product::<f64>()
        }));
    }
}

fn monomials(vars: usize, left: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if left == 0 {
        out.push(cur.clone());
        return;
    }
    for v in from..vars {
        cur[v] += 1;
        monomials(vars, left - 1, v, cur, out);
        cur[v] -= 1;
    }
}

/// Regression at one time step. Coefficients are indexed `k * features + l`;
/// dropped (constant-zero) columns have coefficient and variance zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFit {
    pub coefficients: Vec<f64>,
    pub kept: Vec<bool>,
    /// Covariance of the kept coefficients, embedded in the full index set.
    pub covariance: Vec<f64>,
}

/// Fitted integrands `X_k(t_i) = Σ_l β_{i,k,l}·φ_l(W(t_i))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub basis: usize,
    pub features: Features,
    pub steps: Vec<StepFit>,
}

impl Projection {
    pub fn integrand(&self, i: usize, k: usize, phi: &[f64]) -> f64 {
        let f = self.features.len();
        self.steps[i].coefficients[k * f..(k + 1) * f].iter().zip(phi).map(|(b, p)| b * p).sum()
    }

    pub fn coefficient(&self, i: usize, k: usize, l: usize) -> f64 {
        self.steps[i].coefficients[k * self.features.len() + l]
    }

    pub fn std_error(&self, i: usize, k: usize, l: usize) -> f64 {
        let p = self.basis * self.features.len();
        let idx = k * self.features.len() + l;
        self.steps[i].covariance[idx * p + idx].max(0.0).sqrt()
    }
}

/// Regress `M(t_{i+1}) − M(t_i)` on `ΔW_k(t_i)·φ_l(W(t_i))` for `k < basis`.
pub fn project_martingale(
    sample: &MartingaleSample,
    basis: usize,
    features: &Features,
) -> Result<Projection> {
    let grid = sample.grid;
    if basis == 0 || basis > grid.nx() || features.vars > grid.nx() {
        return Err(Error::Config(format!("basis size must lie in 1..={}", grid.nx())));
    }
    let n = sample.replicas();
    let f = features.len();
    let p = basis * f;
    let mut steps = Vec::with_capacity(grid.nt());
    let mut phi = Vec::with_capacity(f);
    for i in 0..grid.nt() {
        let mut design = DMatrix::<f64>::zeros(n, p);
        let mut target = DVector::<f64>::zeros(n);
        for (r, (m, v)) in sample.motions.iter().zip(&sample.values).enumerate() {
            features.eval(&m.at(i)[..features.vars], &mut phi);
            for k in 0..basis {
                let dw = m.increment(i, k);
                for l in 0..f {
                    design[(r, k * f + l)] = dw * phi[l];
                }
            }
            target[r] = v[i + 1] - v[i];
        }
        steps.push(fit_step(i, &design, &target, features)?);
    }
    Ok(Projection { basis, features: features.clone(), steps })
}

/// A column is dropped when its feature is constant zero at this step,
/// e.g. every non-constant monomial at `t_0` where all motions vanish.
fn fit_step(
    step: usize,
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    features: &Features,
) -> Result<StepFit> {
    let p = design.ncols();
    let f = features.len();
    let kept: Vec<bool> = (0..p)
        .map(|c| {
            let l = c % f;
            features.exponents()[l].iter().all(|&e| e == 0)
                || design.column(c).iter().any(|&x| x != 0.0)
        })
        .collect();
    let cols: Vec<usize> = (0..p).filter(|&c| kept[c]).collect();
    let reduced = design.select_columns(cols.iter());
    let fit = least_squares(&reduced, target)
        .map_err(|rank| Error::RankDeficient { step, rank, features: cols.len() })?;
    let mut coefficients = vec![0.0; p];
    let mut covariance = vec![0.0; p * p];
    for (a, &ca) in cols.iter().enumerate() {
        coefficients[ca] = fit.coefficients[a];
        for (b, &cb) in cols.iter().enumerate() {
            covariance[ca * p + cb] = fit.robust_covariance[(a, b)];
        }
    }
    Ok(StepFit { coefficients, kept, covariance })
}

/// `M̂(t_i) = M(t_0) + Σ_{i'<i} Σ_k X_k(t_{i'})·ΔW_k(t_{i'})`, with
/// `integrand(i, k, motions at t_i)`.
pub fn reconstruct<F>(sample: &MartingaleSample, basis: usize, integrand: F) -> Vec<Vec<f64>>
where
    F: Fn(usize, usize, &[f64]) -> f64,
{
    let nt = sample.grid.nt();
    sample
        .motions
        .iter()
        .zip(&sample.values)
        .map(|(m, v)| {
            let mut out = Vec::with_capacity(nt + 1);
            let mut acc = v[0];
            out.push(acc);
            for i in 0..nt {
                for k in 0..basis {
                    acc += integrand(i, k, m.at(i)) * m.increment(i, k);
                }
                out.push(acc);
            }
            out
        })
        .collect()
}

pub fn reconstruct_projection(sample: &MartingaleSample, projection: &Projection) -> Vec<Vec<f64>> {
    let features = &projection.features;
    reconstruct(sample, projection.basis, |i, k, w| {
        let mut phi = Vec::with_capacity(features.len());
        features.eval(&w[..features.vars], &mut phi);
        projection.integrand(i, k, &phi)
    })
}

/// `max_{r,i} |M̂ − M|` and the root-mean-square error at `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionError {
    pub max_abs: f64,
    pub rms_terminal: f64,
}

pub fn reconstruction_error(sample: &MartingaleSample, rebuilt: &[Vec<f64>]) -> ReconstructionError {
    let mut max_abs: f64 = 0.0;
    let mut terminal = Vec::with_capacity(rebuilt.len());
    for (a, b) in rebuilt.iter().zip(&sample.values) {
        for (x, y) in a.iter().zip(b) {
            max_abs = max_abs.max((x - y).abs());
        }
        let d = a.last().unwrap_or(&0.0) - b.last().unwrap_or(&0.0);
        terminal.push(d * d);
    }
    ReconstructionError { max_abs, rms_terminal: mean(&terminal).sqrt() }
}

/// Discrete Itô isometry `E[M̂(T)²] = Σ_k Σ_i E[X_k(t_i)²]·dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub variance: Estimate,
    pub predicted: Estimate,
    /// Paired difference `M̂(T)² − Σ X²·dt` averaged over replicas.
    pub difference: Estimate,
    pub passed: bool,
}

pub fn isometry_check(
    sample: &MartingaleSample,
    projection: &Projection,
    bootstrap: &Bootstrap,
) -> IsometryReport {
    let rebuilt = reconstruct_projection(sample, projection);
    let dt = sample.grid.dt();
    let features = &projection.features;
    let mut phi = Vec::with_capacity(features.len());
    let mut sq = Vec::with_capacity(rebuilt.len());
    let mut predicted = Vec::with_capacity(rebuilt.len());
    let terminal: Vec<f64> = rebuilt.iter().map(|r| *r.last().unwrap_or(&0.0) - r[0]).collect();
    for (m, t) in sample.motions.iter().zip(&terminal) {
        let mut s = 0.0;
        for i in 0..sample.grid.nt() {
            features.eval(&m.at(i)[..features.vars], &mut phi);
            for k in 0..projection.basis {
                let x = projection.integrand(i, k, &phi);
                s += x * x * dt;
            }
        }
        predicted.push(s);
        sq.push(t * t);
    }
    let variance = bootstrap.estimate(terminal.len(), |idx| {
        let picked: Vec<f64> = idx.iter().map(|&r| terminal[r]).collect();
        stats::variance(&picked)
    });
    let diff: Vec<f64> = sq.iter().zip(&predicted).map(|(a, b)| a - b).collect();
    let difference = Estimate {
        value: mean(&diff),
        std_error: std_error(&diff),
        lo: mean(&diff) - 1.96 * std_error(&diff),
        hi: mean(&diff) + 1.96 * std_error(&diff),
    };
    IsometryReport {
        variance,
        predicted: bootstrap.mean(&predicted),
        passed: difference.value.abs() <= 3.0 * difference.std_error.max(f64::MIN_POSITIVE),
        difference,
    }
}

/// Increment-regression martingale test with a Bonferroni correction over
/// time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTest {
    pub min_p_value: f64,
    pub adjusted_p_value: f64,
    pub alpha: f64,
    pub passed: bool,
}

/// Tests `E[M(t_{i+1}) − M(t_i) | W(t_i)] = 0` at every step with a robust
/// Wald test of the regression of increments on features of the past,
/// Bonferroni-combined across steps.
pub fn martingale_test(
    sample: &MartingaleSample,
    features: &Features,
    alpha: f64,
) -> Result<MartingaleTest> {
    let n = sample.replicas();
    let nt = sample.grid.nt();
    let mut min_p: f64 = 1.0;
    let mut phi = Vec::with_capacity(features.len());
    for i in 0..nt {
        let mut rows = Vec::with_capacity(n * features.len());
        let mut target = DVector::<f64>::zeros(n);
        for (r, (m, v)) in sample.motions.iter().zip(&sample.values).enumerate() {
            features.eval(&m.at(i)[..features.vars], &mut phi);
            rows.extend_from_slice(&phi);
            target[r] = v[i + 1] - v[i];
        }
        let full = DMatrix::from_row_slice(n, features.len(), &rows);
        let cols: Vec<usize> = (0..features.len())
            .filter(|&c| full.column(c).iter().any(|&x| x != 0.0))
            .collect();
        let design = full.select_columns(cols.iter());
        let p = cols.len();
        if p == 0 || n <= p {
            continue;
        }
        let fit = least_squares(&design, &target)
            .map_err(|rank| Error::RankDeficient { step: i, rank, features: p })?;
        // Robust Wald test of "all coefficients zero"; the increments of
        // most martingales are conditionally heteroskedastic.
        let cov = &fit.robust_covariance;
        let beta = &fit.coefficients;
        let stat = match cov.clone().try_inverse() {
            Some(inv) => (beta.transpose() * inv * beta)[(0, 0)],
            None if beta.amax() == 0.0 => 0.0,
            None => f64::INFINITY,
        };
        if stat.is_infinite() {
            min_p = 0.0;
            continue;
        }
        let dist = ChiSquared::new(p as f64)
            .map_err(|e| Error::Domain(format!("χ² distribution: {e}")))?;
        min_p = min_p.min(1.0 - dist.cdf(stat.max(0.0)));
    }
    let adjusted = (min_p * nt as f64).min(1.0);
    Ok(MartingaleTest { min_p_value: min_p, adjusted_p_value: adjusted, alpha, passed: adjusted >= alpha })
}

/// Tower-property check: projecting the fine fit's `X_1` onto the coarse
/// feature span reproduces the coarse fit's coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub max_z: f64,
    pub threshold: f64,
    pub comparisons: usize,
    pub passed: bool,
}

/// `coarse` must use one basis motion and features of `W_1` only.
pub fn consistency_check(
    sample: &MartingaleSample,
    coarse: &Projection,
    fine: &Projection,
    alpha: f64,
) -> Result<ConsistencyReport> {
    if coarse.features.vars != 1 || coarse.basis != 1 {
        return Err(Error::Config("coarse projection must use W_1 only".into()));
    }
    let n = sample.replicas();
    let fc = coarse.features.len();
    let ff = fine.features.len();
    let pf = fine.basis * ff;
    let mut max_z: f64 = 0.0;
    let mut comparisons = 0;
    let mut phi = Vec::new();
    for i in 1..sample.grid.nt() {
        let mut coarse_rows = Vec::with_capacity(n * fc);
        let mut fine_rows = Vec::with_capacity(n * ff);
        for m in &sample.motions {
            coarse.features.eval(&m.at(i)[..1], &mut phi);
            coarse_rows.extend_from_slice(&phi);
            fine.features.eval(&m.at(i)[..fine.features.vars], &mut phi);
            fine_rows.extend_from_slice(&phi);
        }
        let a = DMatrix::from_row_slice(n, fc, &coarse_rows);
        let b = DMatrix::from_row_slice(n, ff, &fine_rows);
        // β_proj = (AᵀA)⁻¹Aᵀ·B·β_fine = L·β_fine
        let gram = (a.transpose() * &a)
            .try_inverse()
            .ok_or(Error::RankDeficient { step: i, rank: 0, features: fc })?;
        let l = gram * a.transpose() * b;
        let beta = DVector::from_column_slice(&fine.steps[i].coefficients[..ff]);
        let cov = DMatrix::from_fn(ff, ff, |r, c| fine.steps[i].covariance[r * pf + c]);
        let proj = &l * beta;
        let proj_cov = &l * cov * l.transpose();
        for q in 0..fc {
            if !coarse.steps[i].kept[q] {
                continue;
            }
            let diff = proj[q] - coarse.coefficient(i, 0, q);
            let var = proj_cov[(q, q)].max(0.0) + coarse.std_error(i, 0, q).powi(2);
            // Below rounding level the difference says nothing, even when an
            // exact fit makes the standard errors vanish as well.
            let z = if diff.abs() <= 1e-9 * (1.0 + coarse.coefficient(i, 0, q).abs()) {
                0.0
            } else if var > 0.0 {
                diff.abs() / var.sqrt()
            } else {
                f64::INFINITY
            };
            max_z = max_z.max(z);
            comparisons += 1;
        }
    }
    let normal = Normal::standard();
    let threshold = normal.inverse_cdf(1.0 - alpha / (2.0 * comparisons.max(1) as f64));
    Ok(ConsistencyReport { max_z, threshold, comparisons, passed: max_z <= threshold })
}

/// Reconstruction error as the feature degree varies; at discrete scale the
/// representation is unique only up to the span of the features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanPoint {
    pub degree: usize,
    pub features: usize,
    pub rms_terminal: f64,
}

pub fn span_sensitivity(
    sample: &MartingaleSample,
    basis: usize,
    degrees: &[usize],
) -> Result<Vec<SpanPoint>> {
    degrees
        .iter()
        .map(|&degree| {
            let features = Features::new(basis, degree);
            let projection = project_martingale(sample, basis, &features)?;
            let rebuilt = reconstruct_projection(sample, &projection);
            Ok(SpanPoint {
                degree,
                features: features.len(),
                rms_terminal: reconstruction_error(sample, &rebuilt).rms_terminal,
            })
        })
        .collect()
}
