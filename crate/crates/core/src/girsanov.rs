//! Girsanov coupling experiments: entropy of the tilted law, the discrete
//! Radon–Nikodým exponent, the two transportation-cost checks and the
//! Gronwall diagnostics behind them.
//!
//! All experiments simulate directly under the tilted measure: the sampled
//! sheet plays the role of `W̃`, the drifted path `u` sees `W̃ + ∫X` and the
//! reference path `v` sees `W̃` alone.

use serde::{Deserialize, Serialize};

use crate::constants::{c_infinity, optimize_alpha, LipschitzData};
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::heat_kernel::KernelTable;
use crate::noise::{CounterNoise, NoiseRows, NoiseSheet};
use crate::parallel::run_replicas;
use crate::rng::SeedSpec;
use crate::solver::{CoupledPair, FieldPath, ModelSpec, Solver};
use crate::stats::{mean, pairwise_sum, std_error, Bootstrap, Estimate};

/// `½ Σ X²·dt·dx` for a drift that does not depend on the state.
pub fn deterministic_entropy(drift: &DriftSpec, grid: &Grid) -> Result<f64> {
    if !drift.is_deterministic() {
        return Err(Error::Domain("drift depends on the state; use replicas".into()));
    }
    let zeros = vec![0.0; (grid.nt() + 1) * grid.nx()];
    let cells = drift.evaluate_along(grid, &grid.centers(), &zeros)?;
    Ok(0.5 * energy(grid, &cells))
}

/// `Σ X²·dt·dx` over all cells.
pub fn energy(grid: &Grid, cells: &[f64]) -> f64 {
    let sq: Vec<f64> = cells.iter().map(|x| x * x).collect();
    pairwise_sum(&sq) * grid.cell_measure()
}

/// `ℋ(ℚ|ℙ) = ½·Ẽ‖X‖²` from the drift evaluated along `ℚ`-dynamics paths.
/// Exact, with zero-width interval, for deterministic drifts.
pub fn entropy(
    drift: &DriftSpec,
    paths: &[FieldPath],
    bootstrap: &Bootstrap,
) -> Result<Estimate> {
    let Some(first) = paths.first() else {
        return Err(Error::Domain("entropy needs at least one path".into()));
    };
    let grid = *first.grid();
    if drift.is_deterministic() {
        return Ok(Estimate::exact(deterministic_entropy(drift, &grid)?));
    }
    let points = grid.centers();
    let mut halves = Vec::with_capacity(paths.len());
    for path in paths {
        grid.ensure_same(path.grid(), "entropy")?;
        let cells = drift.evaluate_along(&grid, &points, path.values())?;
        halves.push(0.5 * energy(&grid, &cells));
    }
    Ok(bootstrap.mean(&halves))
}

/// `M(t_i) = exp(Σ_{i'<i,j} X·ΔW − ½ Σ_{i'<i,j} X²·dt·dx)` for `i = 0..=nt`,
/// with `X` given per cell and `ΔW` the raw sheet.
pub fn rn_exponent(drift_cells: &[f64], noise: &NoiseSheet) -> Result<Vec<f64>> {
    let grid = *noise.grid();
    let n = grid.nx();
    if drift_cells.len() != grid.nt() * n {
        return Err(Error::GridMismatch(format!(
            "drift has {} cells, noise {}",
            drift_cells.len(),
            grid.nt() * n
        )));
    }
    let measure = grid.cell_measure();
    let mut out = Vec::with_capacity(grid.nt() + 1);
    out.push(1.0);
    let mut log_m = 0.0;
    for i in 0..grid.nt() {
        let x = &drift_cells[i * n..(i + 1) * n];
        let dw = noise.row(i);
        let terms: Vec<f64> =
            x.iter().zip(dw).map(|(x, w)| x * w - 0.5 * x * x * measure).collect();
        log_m += pairwise_sum(&terms);
        if !log_m.is_finite() || log_m >= f64::MAX.ln() {
            return Err(Error::Overflow { what: "Radon–Nikodým exponent", exponent: log_m });
        }
        out.push(log_m.exp());
    }
    Ok(out)
}

/// Replica count, master seed and reduction settings of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub seed: u64,
    pub replicas: u32,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub bootstrap: Bootstrap,
}

impl RunSpec {
    pub fn new(seed: u64, replicas: u32) -> Self {
        Self { seed, replicas, threads: None, bootstrap: Bootstrap { seed, ..Bootstrap::default() } }
    }

    pub fn replica_seed(&self, replica: u32) -> SeedSpec {
        SeedSpec::new(self.seed, replica)
    }
}

/// Per-replica summaries of one coupled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRecord {
    pub drift_energy: f64,
    /// `max_{i,j} |u − v|²`
    pub sup_sq: f64,
    /// `‖u − v‖²_{T,2}`
    pub l2_sq: f64,
    /// `|u − v|²` on every node, row-major `(nt+1) x nx`.
    pub diff_sq: Vec<f64>,
}

impl ReplicaRecord {
    pub fn from_pair(pair: &CoupledPair) -> Result<Self> {
        let diff = pair.u.difference(&pair.v)?;
        let sup = diff.sup_norm();
        let l2 = diff.l2_norm();
        Ok(Self {
            drift_energy: pair.drift_energy,
            sup_sq: sup * sup,
            l2_sq: l2 * l2,
            diff_sq: diff.values().iter().map(|d| d * d).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSample {
    pub grid: Grid,
    pub drift: DriftSpec,
    pub records: Vec<ReplicaRecord>,
}

impl CouplingSample {
    pub fn drift_energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.drift_energy).collect()
    }

    pub fn entropy(&self, bootstrap: &Bootstrap) -> Estimate {
        if self.drift.is_deterministic() {
            Estimate::exact(0.5 * self.records.first().map_or(0.0, |r| r.drift_energy))
        } else {
            let halves: Vec<f64> = self.records.iter().map(|r| 0.5 * r.drift_energy).collect();
            bootstrap.mean(&halves)
        }
    }
}

/// Coupled pairs for every replica, in replica order.
pub fn simulate_pairs(solver: &Solver, drift: &DriftSpec, run: &RunSpec) -> Result<Vec<CoupledPair>> {
    run_replicas(run.replicas, run.threads, |r| {
        let noise = CounterNoise::new(*solver.grid(), run.replica_seed(r));
        solver.solve_pair(&noise, drift).map_err(|e| e.in_replica(r))
    })
}

/// Like [`simulate_pairs`] but keeps only the per-replica summaries.
pub fn simulate_coupling(solver: &Solver, drift: &DriftSpec, run: &RunSpec) -> Result<CouplingSample> {
    let records = run_replicas(run.replicas, run.threads, |r| {
        let noise = CounterNoise::new(*solver.grid(), run.replica_seed(r));
        let pair = solver.solve_pair(&noise, drift).map_err(|e| e.in_replica(r))?;
        ReplicaRecord::from_pair(&pair)
    })?;
    Ok(CouplingSample { grid: *solver.grid(), drift: drift.clone(), records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TciMode {
    Sup,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Upper confidence bound below the threshold.
    Pass,
    /// Interval straddles the threshold.
    Inconclusive,
    /// Lower confidence bound above the threshold.
    Fail,
}

impl Verdict {
    pub fn from_interval(lo: f64, hi: f64, threshold: f64) -> Self {
        if hi < threshold {
            Verdict::Pass
        } else if lo > threshold {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Constant entering the right-hand side of a transportation-cost check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantUsed {
    pub name: String,
    pub value: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// `true` for the α-optimized member of the family.
    pub optimized: bool,
}

/// Slack of one Gronwall-type inequality at one time slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceMargin {
    pub time: f64,
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl SliceMargin {
    fn within(&self, sigmas: f64) -> bool {
        self.slack >= -sigmas * self.lhs_std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    /// `m(t) = sup_{s≤t} sup_x Ẽ|u−v|²` against the three-term bound.
    pub mean_square: Vec<SliceMargin>,
    /// `Ẽν(t)` with `ν(t) = sup_{s≤t} sup_x |u−v|²` against the two-term
    /// bound; only defined for constant `σ`.
    pub pathwise_sup: Option<Vec<SliceMargin>>,
    /// `Ẽ‖u−v‖²_{T,2}` and `T·D·m(T)`.
    pub trivial: (f64, f64),
    /// Kernel constant used in the bounds: the larger of `𝒢_T` and its
    /// discrete Riemann-sum counterpart.
    pub g_used: f64,
    pub passed: bool,
}

/// Per-slice slack of the Gronwall chains on a coupling sample.
pub fn gronwall_diagnostics(
    sample: &CouplingSample,
    table: &KernelTable,
    data: &LipschitzData,
    sigma_constant: bool,
) -> Result<GronwallReport> {
    let grid = sample.grid;
    grid.ensure_same(table.grid(), "Gronwall diagnostics")?;
    if sample.records.is_empty() {
        return Err(Error::Domain("Gronwall diagnostics need replicas".into()));
    }
    let (nt, nx) = (grid.nt(), grid.nx());
    let (dt, length, horizon) = (grid.dt(), grid.length(), grid.horizon());
    let discrete_g = table.walsh_variance(nt).into_iter().fold(0.0, f64::max);
    let g = table.g_total().max(discrete_g);
    let h = table.h_function();
    let mass = table.mass_range().1.max(1.0);
    let x_energy = mean(&sample.drift_energies());
    let reps = sample.records.len();

    // m(t_i) with the replica values at its argmax cell for the error bar.
    let mut m = Vec::with_capacity(nt + 1);
    let mut m_se = Vec::with_capacity(nt + 1);
    let (mut best, mut best_se) = (0.0f64, 0.0f64);
    let mut column = vec![0.0; reps];
    for i in 0..=nt {
        for j in 0..nx {
            for (c, r) in column.iter_mut().zip(&sample.records) {
                *c = r.diff_sq[i * nx + j];
            }
            let e = mean(&column);
            if e > best {
                best = e;
                best_se = std_error(&column);
            }
        }
        m.push(best);
        m_se.push(best_se);
    }

    let mut mean_square = Vec::with_capacity(nt + 1);
    for n in 0..=nt {
        let conv: f64 = (1..=n).map(|lag| h[lag] * m[n - lag] * dt).sum();
        let integral: f64 = m[..n].iter().sum::<f64>() * dt;
        let rhs = 3.0 * data.l_sigma.powi(2) * conv
            + 3.0 * g * data.l_g.powi(2) * length * integral
            + 3.0 * data.k_sigma.powi(2) * g * x_energy;
        mean_square.push(SliceMargin {
            time: grid.time(n),
            lhs: m[n],
            lhs_std_error: m_se[n],
            rhs,
            slack: rhs - m[n],
        });
    }

    let pathwise_sup = sigma_constant.then(|| {
        let nu: Vec<Vec<f64>> = sample
            .records
            .iter()
            .map(|r| {
                let mut run = 0.0f64;
                (0..=nt)
                    .map(|i| {
                        run = r.diff_sq[i * nx..(i + 1) * nx].iter().fold(run, |a, &b| a.max(b));
                        run
                    })
                    .collect()
            })
            .collect();
        let mut e_nu = Vec::with_capacity(nt + 1);
        let mut out = Vec::with_capacity(nt + 1);
        for n in 0..=nt {
            let col: Vec<f64> = nu.iter().map(|v| v[n]).collect();
            let e = mean(&col);
            let integral: f64 = e_nu.iter().sum::<f64>() * dt;
            let rhs = 2.0 * data.l_g.powi(2) * horizon * mass * mass * integral
                + 2.0 * data.k_sigma.powi(2) * g * x_energy;
            out.push(SliceMargin {
                time: grid.time(n),
                lhs: e,
                lhs_std_error: std_error(&col),
                rhs,
                slack: rhs - e,
            });
            e_nu.push(e);
        }
        out
    });

    let l2 = mean(&sample.records.iter().map(|r| r.l2_sq).collect::<Vec<_>>());
    let trivial = (l2, horizon * length * m[nt]);
    let passed = mean_square.iter().all(|s| s.within(2.0))
        && pathwise_sup.as_ref().is_none_or(|v| v.iter().all(|s| s.within(2.0)))
        && trivial.0 <= trivial.1 * (1.0 + 1e-12);
    Ok(GronwallReport { mean_square, pathwise_sup, trivial, g_used: g, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TciReport {
    pub mode: TciMode,
    pub entropy: Estimate,
    /// `Ẽ‖X‖²_{T,2}`
    pub drift_norm_sq: Estimate,
    /// `sqrt(Ẽ sup|u−v|²)` or `sqrt(Ẽ‖u−v‖²_{T,2})`.
    pub lhs: Estimate,
    /// `sqrt(C·Ẽ‖X‖²_{T,2})`
    pub rhs: Estimate,
    /// `sqrt(2·C·ℋ)`; equal to `rhs` by the entropy formula.
    pub wasserstein_rhs: f64,
    pub ratio: Estimate,
    pub constant: ConstantUsed,
    pub replicas: u32,
    pub seed: u64,
    pub gronwall: GronwallReport,
    pub verdict: Verdict,
}

impl TciReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass && self.gronwall.passed
    }
}

/// Report plus the replica summaries it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct TciOutcome {
    pub report: TciReport,
    pub sample: CouplingSample,
}

/// Sup-norm check `Ẽ sup|u−v|² ≤ C_∞·Ẽ‖X‖²` for `σ ≡ 1`.
pub fn tci_experiment_sup(
    model: &ModelSpec,
    table: &KernelTable,
    drift: &DriftSpec,
    run: &RunSpec,
) -> Result<TciOutcome> {
    if model.sigma != (crate::presets::NoiseCoefficient::Constant { value: 1.0 }) {
        return Err(Error::Assumption("the sup-norm check requires σ ≡ 1".into()));
    }
    let data = model.validate(table.grid())?;
    let grid = table.grid();
    let value = c_infinity(table.g_total(), data.l_g, grid.horizon())?;
    let constant = ConstantUsed { name: "C_inf".into(), value, alpha: None, beta: None, optimized: false };
    tci_experiment(TciMode::Sup, model, table, drift, run, constant, &data)
}

/// `L²` check `Ẽ‖u−v‖²_{T,2} ≤ C_{2,α*}·Ẽ‖X‖²` with the α-optimized constant.
pub fn tci_experiment_l2(
    model: &ModelSpec,
    table: &KernelTable,
    drift: &DriftSpec,
    run: &RunSpec,
) -> Result<TciOutcome> {
    let data = model.validate(table.grid())?;
    let grid = table.grid();
    let opt = optimize_alpha(
        &data,
        table.g_total(),
        |a| table.g_const_alpha(a),
        grid.horizon(),
        grid.length(),
    )?;
    let constant = ConstantUsed {
        name: "C_2_alpha".into(),
        value: opt.value,
        alpha: Some(opt.alpha),
        beta: Some(opt.beta),
        optimized: true,
    };
    tci_experiment(TciMode::L2, model, table, drift, run, constant, &data)
}

fn tci_experiment(
    mode: TciMode,
    model: &ModelSpec,
    table: &KernelTable,
    drift: &DriftSpec,
    run: &RunSpec,
    constant: ConstantUsed,
    data: &LipschitzData,
) -> Result<TciOutcome> {
    if run.replicas == 0 {
        return Err(Error::Config("replicas must be ≥ 1".into()));
    }
    let solver = Solver::new(model, table)?;
    let sample = simulate_coupling(&solver, drift, run)?;
    let gronwall = gronwall_diagnostics(&sample, table, data, model.sigma.is_constant())?;
    let report = tci_report(mode, &sample, constant, run, gronwall);
    Ok(TciOutcome { report, sample })
}

/// Assemble the report from replica summaries.
pub fn tci_report(
    mode: TciMode,
    sample: &CouplingSample,
    constant: ConstantUsed,
    run: &RunSpec,
    gronwall: GronwallReport,
) -> TciReport {
    let distance: Vec<f64> = sample
        .records
        .iter()
        .map(|r| match mode {
            TciMode::Sup => r.sup_sq,
            TciMode::L2 => r.l2_sq,
        })
        .collect();
    let energies = sample.drift_energies();
    let pick = |xs: &[f64], idx: &[usize]| mean(&idx.iter().map(|&i| xs[i]).collect::<Vec<_>>());
    let c = constant.value;
    let bs = &run.bootstrap;
    let n = distance.len();
    let lhs = bs.estimate(n, |idx| pick(&distance, idx).sqrt());
    let rhs = if sample.drift.is_deterministic() {
        Estimate::exact((c * mean(&energies)).sqrt())
    } else {
        bs.estimate(n, |idx| (c * pick(&energies, idx)).sqrt())
    };
    let ratio = bs.estimate(n, |idx| {
        let r = (c * pick(&energies, idx)).sqrt();
        let l = pick(&distance, idx).sqrt();
        if r == 0.0 {
            if l == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            l / r
        }
    });
    let drift_norm_sq = if sample.drift.is_deterministic() {
        Estimate::exact(mean(&energies))
    } else {
        bs.mean(&energies)
    };
    let entropy = sample.entropy(bs);
    TciReport {
        mode,
        entropy,
        drift_norm_sq,
        lhs,
        rhs,
        wasserstein_rhs: (2.0 * c * entropy.value).sqrt(),
        ratio,
        constant,
        replicas: n as u32,
        seed: run.seed,
        verdict: Verdict::from_interval(ratio.lo, ratio.hi, 1.0),
        gronwall,
    }
}
