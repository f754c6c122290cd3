//! One pipeline per subcommand. Each builds its artifacts in memory and
//! reports the inequality checks it enabled.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use spdelab_core::constants::{c_infinity, concentration_threshold, TciConstants};
use spdelab_core::girsanov::{simulate_pairs, tci_experiment_l2, tci_experiment_sup, SliceMargin};
use spdelab_core::heat_kernel::SemigroupMethod;
use spdelab_core::martingale::{
    consistency_check, isometry_check, martingale_test, project_martingale,
    reconstruct_projection, reconstruction_error, span_sensitivity, Features, IsometryReport,
    MartingaleCase, MartingaleSample, MartingaleTest, ConsistencyReport, Projection,
    ReconstructionError, SpanPoint,
};
use spdelab_core::parallel::run_replicas;
use spdelab_core::solver::{audit_lipschitz, LipschitzAudit};
use spdelab_core::stats::{mean, median, Estimate};
use spdelab_core::transport::{
    cost_matrix, coupling_upper_bound, wasserstein2_entropic, wasserstein2_exact,
    concentration_profile, ConcentrationProfile, MetricKind, SampleCloud, SinkhornOptions,
    TransportResult, EXACT_CAP,
};
use spdelab_core::{
    Boundary, CounterNoise, FieldPath, Grid, KernelTable, LipschitzData, RunSpec, SeedSpec,
    Solver, TciMode, TciReport,
};

use crate::config::{is_unit_noise, LoadedConfig, TransportMethodChoice};
use crate::manifest::{Artifact, CheckRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Kernel,
    Constants,
    Simulate,
    VerifyTci,
    W2,
    ReprCheck,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Kernel => "kernel",
            Pipeline::Constants => "constants",
            Pipeline::Simulate => "simulate",
            Pipeline::VerifyTci => "verify-tci",
            Pipeline::W2 => "w2",
            Pipeline::ReprCheck => "repr-check",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<CheckRecord>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, name: &str, value: String, passed: bool) {
        self.checks.push(CheckRecord { name: name.into(), value, passed });
    }
}

pub fn run_pipeline(p: Pipeline, cfg: &LoadedConfig, threads: Option<usize>) -> Result<Outcome> {
    match p {
        Pipeline::Kernel => kernel(cfg),
        Pipeline::Constants => constants(cfg),
        Pipeline::Simulate => simulate(cfg, threads),
        Pipeline::VerifyTci => verify_tci(cfg, threads),
        Pipeline::W2 => w2(cfg, threads),
        Pipeline::ReprCheck => repr_check(cfg, threads),
    }
}

fn build_table(cfg: &LoadedConfig) -> Result<KernelTable> {
    KernelTable::build(&cfg.config.model.operator, &cfg.grid, cfg.config.kernel)
        .context("building the heat kernel")
}

fn run_spec(cfg: &LoadedConfig, replicas: u32, threads: Option<usize>) -> RunSpec {
    RunSpec { seed: cfg.config.seed, replicas, threads, bootstrap: cfg.bootstrap() }
}

fn fmt_estimate(e: &Estimate) -> String {
    format!("{:.4} [{:.4}, {:.4}]", e.value, e.lo, e.hi)
}

#[derive(Serialize)]
struct AlphaValue {
    alpha: f64,
    g_alpha: f64,
}

#[derive(Serialize)]
struct KernelSummary {
    grid: Grid,
    boundary: Boundary,
    semigroup_method: SemigroupMethod,
    mass_min: f64,
    mass_max: f64,
    chapman_kolmogorov_defect: f64,
    g_total: f64,
    h_integral: f64,
    g_alpha: Vec<AlphaValue>,
    /// `(t_i, H(t_i))`
    h: Vec<(f64, f64)>,
    small_time: spdelab_core::heat_kernel::SmallTimeCheck,
}

fn kernel(cfg: &LoadedConfig) -> Result<Outcome> {
    let table = build_table(cfg)?;
    let grid = cfg.grid;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let g_alpha = cfg
        .config
        .constants
        .alphas
        .iter()
        .map(|&alpha| Ok(AlphaValue { alpha, g_alpha: table.g_const_alpha(alpha)? }))
        .collect::<Result<Vec<_>>>()?;
    let (mass_min, mass_max) = table.mass_range();
    let half = (grid.nt() / 2).max(1);
    let summary = KernelSummary {
        grid,
        boundary: table.boundary(),
        semigroup_method: table.semigroup().method(),
        mass_min,
        mass_max,
        chapman_kolmogorov_defect: table.chapman_kolmogorov_defect(half, grid.nt() - half),
        g_total: table.g_total(),
        h_integral: table.h_integral(),
        g_alpha,
        h: grid.times().into_iter().zip(table.h_function()).collect(),
        small_time: table.small_time_check(),
    };
    let mut out = Outcome::default();
    out.check(
        "kernel mass ≤ 1",
        format!("{mass_max:.6}"),
        mass_max <= 1.0 + 1e-9 && mass_min >= -1e-12,
    );
    out.artifacts.push(Artifact { name: "kernel.csv".into(), bytes: csv });
    out.artifacts.push(Artifact::json("kernel.json", &summary)?);
    Ok(out)
}

#[derive(Serialize)]
struct AlphaRow {
    alpha: f64,
    g_alpha: f64,
    c_two_alpha: Option<f64>,
}

#[derive(Serialize)]
struct ConstantsOut {
    lipschitz: LipschitzData,
    horizon: f64,
    length: f64,
    g_total: f64,
    g_alpha_curve: Vec<AlphaRow>,
    c_infinity: Option<f64>,
    alpha_star: Option<f64>,
    beta_star: Option<f64>,
    c_two_star: Option<f64>,
    alpha_star_clamped: Option<bool>,
    r0_infinity: Option<f64>,
    r0_two: Option<f64>,
}

fn constants(cfg: &LoadedConfig) -> Result<Outcome> {
    let table = build_table(cfg)?;
    let c = TciConstants::compute(&table, &cfg.lipschitz, &cfg.config.constants.alphas)?;
    let star = c.alpha_star;
    let json = ConstantsOut {
        lipschitz: cfg.lipschitz,
        horizon: cfg.grid.horizon(),
        length: cfg.grid.length(),
        g_total: c.g_total,
        g_alpha_curve: c
            .c_two
            .iter()
            .map(|&(alpha, g_alpha, c_two_alpha)| AlphaRow { alpha, g_alpha, c_two_alpha })
            .collect(),
        c_infinity: c.c_infinity,
        alpha_star: star.map(|s| s.alpha),
        beta_star: star.map(|s| s.beta),
        c_two_star: star.map(|s| s.value),
        alpha_star_clamped: star.map(|s| s.clamped),
        r0_infinity: c.c_infinity.map(concentration_threshold),
        r0_two: star.map(|s| concentration_threshold(s.value)),
    };
    let mut out = Outcome::default();
    out.artifacts.push(Artifact::json("constants.json", &json)?);
    Ok(out)
}

/// `u(T, D/2)`: the centre cell, or the mean of the two central cells.
fn midpoint_value(path: &FieldPath) -> f64 {
    let grid = path.grid();
    let (nt, nx) = (grid.nt(), grid.nx());
    if nx % 2 == 1 {
        path.value(nt, nx / 2)
    } else {
        0.5 * (path.value(nt, nx / 2 - 1) + path.value(nt, nx / 2))
    }
}

#[derive(Serialize)]
struct NormRow {
    replica: u32,
    sup_norm: f64,
    l2_norm: f64,
    midpoint: f64,
}

#[derive(Serialize)]
struct MomentSummary {
    p: u32,
    sup_mean: f64,
    time: f64,
    x: f64,
}

#[derive(Serialize)]
struct ConstantInfo {
    name: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct SimulateOut {
    replicas: u32,
    seed: u64,
    mode: TciMode,
    drift_energy_mean: f64,
    mean_sup_sq: Estimate,
    mean_l2_sq: Estimate,
    moments: Vec<MomentSummary>,
    lipschitz_declared: LipschitzData,
    lipschitz_observed: LipschitzAudit,
    functional: &'static str,
    constant: Option<ConstantInfo>,
    concentration: Option<ConcentrationProfile>,
    concentration_note: Option<String>,
}

struct ReplicaSummary {
    row: NormRow,
    energy: f64,
    audit: LipschitzAudit,
    squares: Vec<f64>,
}

/// Replicas are processed in fixed-size chunks so that the node-wise moment
/// sums never need every path in memory; the chunking does not depend on
/// the thread count.
const CHUNK: u32 = 256;

fn simulate(cfg: &LoadedConfig, threads: Option<usize>) -> Result<Outcome> {
    let table = build_table(cfg)?;
    let model = &cfg.config.model;
    let solver = Solver::new(model, &table)?;
    let grid = cfg.grid;
    let npts = (grid.nt() + 1) * grid.nx();
    let n = cfg.config.replicas;
    let seed = cfg.config.seed;
    let drift = &cfg.config.drift;

    let mut rows = Vec::with_capacity(n as usize);
    let mut energies = Vec::with_capacity(n as usize);
    let mut audit = LipschitzAudit { l_g: 0.0, l_sigma: 0.0, k_sigma: 0.0 };
    let mut m2 = vec![0.0; npts];
    let mut m4 = vec![0.0; npts];
    let mut start = 0;
    while start < n {
        let len = CHUNK.min(n - start);
        let chunk = run_replicas(len, threads, |k| {
            let r = start + k;
            let noise = CounterNoise::new(grid, SeedSpec::new(seed, r));
            let (path, energy) = solver.solve_with_drift(&noise, drift).map_err(|e| e.in_replica(r))?;
            Ok(ReplicaSummary {
                row: NormRow {
                    replica: r,
                    sup_norm: path.sup_norm(),
                    l2_norm: path.l2_norm(),
                    midpoint: midpoint_value(&path),
                },
                energy,
                audit: audit_lipschitz(model, &path),
                squares: path.values().iter().map(|v| v * v).collect(),
            })
        })?;
        for s in chunk {
            for ((a2, a4), v) in m2.iter_mut().zip(m4.iter_mut()).zip(&s.squares) {
                *a2 += v;
                *a4 += v * v;
            }
            audit.l_g = audit.l_g.max(s.audit.l_g);
            audit.l_sigma = audit.l_sigma.max(s.audit.l_sigma);
            audit.k_sigma = audit.k_sigma.max(s.audit.k_sigma);
            energies.push(s.energy);
            rows.push(s.row);
        }
        start += len;
    }

    let moment = |sums: &[f64], p: u32| {
        let (k, s) = sums
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (k, &s)| if s > b.1 { (k, s) } else { b });
        MomentSummary {
            p,
            sup_mean: s / f64::from(n),
            time: grid.time(k / grid.nx()),
            x: grid.center(k % grid.nx()),
        }
    };
    let bs = cfg.bootstrap();
    let sup_sq: Vec<f64> = rows.iter().map(|r| r.sup_norm * r.sup_norm).collect();
    let l2_sq: Vec<f64> = rows.iter().map(|r| r.l2_norm * r.l2_norm).collect();

    let (functional, values): (&'static str, Vec<f64>) = match cfg.mode {
        TciMode::Sup => ("u(T, D/2)", rows.iter().map(|r| r.midpoint).collect()),
        TciMode::L2 => ("‖u‖_{T,2}", rows.iter().map(|r| r.l2_norm).collect()),
    };
    let (constant, note) = concentration_constant(cfg, &table);
    let conc = &cfg.config.concentration;
    let concentration = match (&constant, n >= 2) {
        (Some(c), true) => {
            Some(concentration_profile(&values, c.value, conc.a_points, conc.r_points, &bs)?)
        }
        _ => None,
    };

    let mut out = Outcome::default();
    out.check(
        "observed Lipschitz data within declared",
        format!("L_g {:.3}, L_σ {:.3}, K_σ {:.3}", audit.l_g, audit.l_sigma, audit.k_sigma),
        audit.within(&cfg.lipschitz),
    );
    if let Some(p) = &concentration {
        out.check("MGF ≤ exp(a²C/2)", format!("C = {:.4}", p.c), p.mgf_dominated);
        out.check("tails ≤ exp(−r²/(8C)), r ≥ r₀", format!("r₀ = {:.4}", p.r0), p.tails_dominated);
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        csv.serialize(r)?;
    }
    let json = SimulateOut {
        replicas: n,
        seed,
        mode: cfg.mode,
        drift_energy_mean: mean(&energies),
        mean_sup_sq: bs.mean(&sup_sq),
        mean_l2_sq: bs.mean(&l2_sq),
        moments: vec![moment(&m2, 2), moment(&m4, 4)],
        lipschitz_declared: cfg.lipschitz,
        lipschitz_observed: audit,
        functional,
        constant,
        concentration,
        concentration_note: note,
    };
    out.artifacts.push(Artifact { name: "norms.csv".into(), bytes: csv.into_inner()? });
    out.artifacts.push(Artifact::json("simulate.json", &json)?);
    Ok(out)
}

fn concentration_constant(
    cfg: &LoadedConfig,
    table: &KernelTable,
) -> (Option<ConstantInfo>, Option<String>) {
    let data = &cfg.lipschitz;
    let grid = cfg.grid;
    match cfg.mode {
        TciMode::Sup => {
            if !is_unit_noise(&cfg.config.model.sigma) {
                return (None, Some("C_inf applies to σ ≡ 1 only; check disabled".into()));
            }
            match c_infinity(table.g_total(), data.l_g, grid.horizon()) {
                Ok(value) => (Some(ConstantInfo { name: "C_inf", value }), None),
                Err(e) => (None, Some(format!("C_inf unavailable: {e}"))),
            }
        }
        TciMode::L2 => {
            let c = TciConstants::compute(table, data, &[]);
            match c.map(|c| c.alpha_star) {
                Ok(Some(s)) => (Some(ConstantInfo { name: "C_2_alpha", value: s.value }), None),
                Ok(None) => (None, Some("C_2_alpha unavailable (K_σ = 0 or overflow)".into())),
                Err(e) => (None, Some(format!("C_2_alpha unavailable: {e}"))),
            }
        }
    }
}

#[derive(Serialize)]
struct ReplicaCsvRow {
    replica: usize,
    drift_energy: f64,
    sup_sq: f64,
    l2_sq: f64,
}

#[derive(Serialize)]
struct GronwallCsvRow<'a> {
    series: &'a str,
    time: f64,
    lhs: f64,
    lhs_std_error: f64,
    rhs: f64,
    slack: f64,
}

#[derive(Serialize)]
struct TciOut<'a> {
    drift: &'a spdelab_core::DriftSpec,
    report: &'a TciReport,
}

fn verify_tci(cfg: &LoadedConfig, threads: Option<usize>) -> Result<Outcome> {
    let table = build_table(cfg)?;
    let run = run_spec(cfg, cfg.config.replicas, threads);
    let model = &cfg.config.model;
    let drift = &cfg.config.drift;
    let outcome = match cfg.mode {
        TciMode::Sup => tci_experiment_sup(model, &table, drift, &run),
        TciMode::L2 => tci_experiment_l2(model, &table, drift, &run),
    }
    .context("TCI experiment")?;
    let report = &outcome.report;

    let mut replicas = csv::Writer::from_writer(Vec::new());
    for (i, r) in outcome.sample.records.iter().enumerate() {
        replicas.serialize(ReplicaCsvRow {
            replica: i,
            drift_energy: r.drift_energy,
            sup_sq: r.sup_sq,
            l2_sq: r.l2_sq,
        })?;
    }
    let mut gronwall = csv::Writer::from_writer(Vec::new());
    let mut series = |name: &str, rows: &[SliceMargin]| -> Result<()> {
        for m in rows {
            gronwall.serialize(GronwallCsvRow {
                series: name,
                time: m.time,
                lhs: m.lhs,
                lhs_std_error: m.lhs_std_error,
                rhs: m.rhs,
                slack: m.slack,
            })?;
        }
        Ok(())
    };
    series("mean_square", &report.gronwall.mean_square)?;
    if let Some(p) = &report.gronwall.pathwise_sup {
        series("pathwise_sup", p)?;
    }

    let mut out = Outcome::default();
    out.check(
        "TCI ratio upper CI < 1",
        format!("{} ({:?})", fmt_estimate(&report.ratio), report.verdict),
        report.verdict == spdelab_core::Verdict::Pass,
    );
    out.check(
        "Gronwall slack ≥ −2 SE on every slice",
        format!("{} slices", report.gronwall.mean_square.len()),
        report.gronwall.passed,
    );
    out.artifacts.push(Artifact::json("report.json", &TciOut { drift, report })?);
    out.artifacts.push(Artifact { name: "replicas.csv".into(), bytes: replicas.into_inner()? });
    out.artifacts.push(Artifact { name: "gronwall.csv".into(), bytes: gronwall.into_inner()? });
    Ok(out)
}

/// Rows of comma-separated numbers; a non-numeric first row is a header.
pub fn read_cloud(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read cloud {}", path.display()))?;
    let mut points = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) => points.push(p),
            Err(_) if line == 0 => continue,
            Err(e) => bail!("{}: line {}: {e}", path.display(), line + 1),
        }
    }
    if points.is_empty() {
        bail!("{}: no points", path.display());
    }
    Ok(points)
}

#[derive(Serialize)]
struct W2Out {
    source: &'static str,
    metric: MetricKind,
    n_a: usize,
    n_b: usize,
    dim: usize,
    exact: Option<TransportResult>,
    entropic: Option<TransportResult>,
    coupling_bound: Option<TransportResult>,
}

fn entropic(a: &SampleCloud, b: &SampleCloud, factor: f64) -> Result<TransportResult> {
    let cost = cost_matrix(a, b)?;
    let scale = median(cost.as_slice());
    let eps = if scale > 0.0 { factor * scale } else { factor };
    Ok(wasserstein2_entropic(a, b, eps, &SinkhornOptions::default())?)
}

fn w2(cfg: &LoadedConfig, threads: Option<usize>) -> Result<Outcome> {
    let t = &cfg.config.transport;
    let mut out = Outcome::default();
    let json = if let Some((pa, pb)) = cfg.cloud_paths() {
        let a = SampleCloud::euclidean(read_cloud(&pa)?).context("cloud a")?;
        let b = SampleCloud::euclidean(read_cloud(&pb)?).context("cloud b")?;
        let exact_ok = a.len() == b.len() && a.len() <= EXACT_CAP;
        let (do_exact, do_entropic) = match t.method {
            TransportMethodChoice::Auto => (exact_ok, !exact_ok),
            TransportMethodChoice::Exact => (true, false),
            TransportMethodChoice::Entropic => (false, true),
        };
        let exact = if do_exact { Some(wasserstein2_exact(&a, &b)?) } else { None };
        let entropic = if do_entropic { Some(entropic(&a, &b, t.epsilon_factor)?) } else { None };
        W2Out {
            source: "files",
            metric: MetricKind::Euclidean,
            n_a: a.len(),
            n_b: b.len(),
            dim: a.dim(),
            exact,
            entropic,
            coupling_bound: None,
        }
    } else {
        let table = build_table(cfg)?;
        let solver = Solver::new(&cfg.config.model, &table)?;
        let replicas = cfg.config.replicas.min(EXACT_CAP as u32);
        let run = run_spec(cfg, replicas, threads);
        let pairs = simulate_pairs(&solver, &cfg.config.drift, &run)?;
        let kind = match cfg.mode {
            TciMode::Sup => MetricKind::Sup,
            TciMode::L2 => MetricKind::L2,
        };
        let u = SampleCloud::from_paths(pairs.iter().map(|p| &p.u), kind)?;
        let v = SampleCloud::from_paths(pairs.iter().map(|p| &p.v), kind)?;
        let exact = if t.method == TransportMethodChoice::Entropic {
            None
        } else {
            Some(wasserstein2_exact(&u, &v)?)
        };
        let entropic = if t.method == TransportMethodChoice::Entropic {
            Some(entropic(&u, &v, t.epsilon_factor)?)
        } else {
            None
        };
        let bound = coupling_upper_bound(&pairs, kind, &run.bootstrap)?;
        let w = exact.as_ref().or(entropic.as_ref()).map_or(0.0, |r| r.w2);
        // The identity matching is one feasible coupling of the two empirical
        // measures, so the optimum cannot exceed it.
        out.check(
            "exact W2 ≤ coupling bound",
            format!("{w:.5} ≤ {:.5}", bound.w2),
            exact.is_none() || w <= bound.w2 * (1.0 + 1e-12),
        );
        W2Out {
            source: "coupled-runs",
            metric: kind,
            n_a: u.len(),
            n_b: v.len(),
            dim: u.dim(),
            exact,
            entropic,
            coupling_bound: Some(bound),
        }
    };
    out.artifacts.push(Artifact::json("w2.json", &json)?);
    Ok(out)
}

#[derive(Serialize)]
struct CoefficientCheck {
    name: String,
    estimate: f64,
    expected: f64,
    error: f64,
}

#[derive(Serialize)]
struct ReprOut {
    case: MartingaleCase,
    replicas: u32,
    basis: usize,
    vars: usize,
    degree: usize,
    features: usize,
    coefficients: Vec<CoefficientCheck>,
    integrand_rms_error: f64,
    reconstruction: ReconstructionError,
    isometry: IsometryReport,
    martingale_test: MartingaleTest,
    consistency: Option<ConsistencyReport>,
    span: Vec<SpanPoint>,
}

fn feature_index(features: &Features, exponent: &[usize]) -> Option<usize> {
    features.exponents().iter().position(|e| e.as_slice() == exponent)
}

/// Step-averaged coefficients compared against the closed-form integrand.
/// Step 0 is skipped because every motion is zero there.
fn coefficient_checks(case: &MartingaleCase, proj: &Projection) -> Vec<CoefficientCheck> {
    let f = &proj.features;
    let nt = proj.steps.len();
    let unit = |v: usize| {
        let mut e = vec![0; f.vars];
        if v < f.vars {
            e[v] = 1;
        }
        e
    };
    let targets: Vec<(String, usize, Vec<usize>, f64)> = match case {
        MartingaleCase::Linear { weights } => weights
            .iter()
            .enumerate()
            .map(|(k, &w)| (format!("X_{} constant", k + 1), k, vec![0; f.vars], w))
            .collect(),
        MartingaleCase::Quadratic => vec![("X_1 slope in W_1".into(), 0, unit(0), 2.0)],
        MartingaleCase::Mixed => vec![
            ("X_1 slope in W_1".into(), 0, unit(0), 2.0),
            ("X_1 slope in W_2".into(), 0, unit(1), 1.0),
            ("X_2 slope in W_1".into(), 1, unit(0), 1.0),
        ],
    };
    targets
        .into_iter()
        .filter_map(|(name, k, e, expected)| {
            let l = feature_index(f, &e)?;
            let steps = if nt > 1 { 1..nt } else { 0..nt };
            let vals: Vec<f64> = steps.map(|i| proj.coefficient(i, k, l)).collect();
            let estimate = mean(&vals);
            Some(CoefficientCheck { name, estimate, expected, error: (estimate - expected).abs() })
        })
        .collect()
}

fn integrand_rms_error(case: &MartingaleCase, sample: &MartingaleSample, proj: &Projection) -> f64 {
    let mut phi = Vec::new();
    let mut sq = Vec::new();
    for m in &sample.motions {
        for i in 0..sample.grid.nt() {
            let w = m.at(i);
            proj.features.eval(&w[..proj.features.vars], &mut phi);
            for k in 0..proj.basis {
                let d = proj.integrand(i, k, &phi) - case.integrand(k, w);
                sq.push(d * d);
            }
        }
    }
    mean(&sq).sqrt()
}

fn repr_check(cfg: &LoadedConfig, threads: Option<usize>) -> Result<Outcome> {
    let r = &cfg.config.repr;
    let case = &r.case;
    let (basis, vars) = (r.basis(), r.vars());
    let n = cfg.config.replicas;
    let sample = MartingaleSample::simulate(case, &cfg.grid, cfg.config.seed, n, threads)?;
    let features = Features::new(vars, r.degree);
    let proj = project_martingale(&sample, basis, &features).context("fine projection")?;
    let bs = cfg.bootstrap();

    let coefficients = coefficient_checks(case, &proj);
    let rebuilt = reconstruct_projection(&sample, &proj);
    let reconstruction = reconstruction_error(&sample, &rebuilt);
    let isometry = isometry_check(&sample, &proj, &bs);
    let test = martingale_test(&sample.with_values(rebuilt), &features, r.alpha)?;
    let consistency = if basis > 1 || vars > 1 {
        let coarse = project_martingale(&sample, 1, &Features::new(1, r.degree))
            .context("coarse projection")?;
        Some(consistency_check(&sample, &coarse, &proj, r.alpha)?)
    } else {
        None
    };
    let span = span_sensitivity(&sample, basis, &r.span_degrees)?;

    let mut out = Outcome::default();
    for c in &coefficients {
        let (tol, rel) = match case {
            MartingaleCase::Linear { .. } => (1e-2, false),
            _ => (0.05, true),
        };
        let err = if rel { c.error / c.expected.abs() } else { c.error };
        out.check(&c.name, format!("{:.5} vs {}", c.estimate, c.expected), err < tol);
    }
    out.check(
        "Itô isometry within CI",
        fmt_estimate(&isometry.difference),
        isometry.passed,
    );
    out.check(
        "reconstruction is a martingale",
        format!("adjusted p = {:.4}", test.adjusted_p_value),
        test.passed,
    );
    if let Some(c) = &consistency {
        out.check(
            "coarse fit is the projection of the fine fit",
            format!("max z = {:.3} (threshold {:.3})", c.max_z, c.threshold),
            c.passed,
        );
    }
    let json = ReprOut {
        case: case.clone(),
        replicas: n,
        basis,
        vars,
        degree: r.degree,
        features: features.len(),
        integrand_rms_error: integrand_rms_error(case, &sample, &proj),
        coefficients,
        reconstruction,
        isometry,
        martingale_test: test,
        consistency,
        span,
    };
    out.artifacts.push(Artifact::json("repr.json", &json)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_failed_check_fails_the_run() {
        let mut out = Outcome::default();
        assert!(out.passed());
        out.check("a", String::new(), true);
        assert!(out.passed());
        out.check("b", String::new(), false);
        assert!(!out.passed());
    }

    #[test]
    fn cloud_csv_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "a,b\n1,2\n3, 4\n").unwrap();
        assert_eq!(read_cloud(&p).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        std::fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(read_cloud(&p).unwrap_err().to_string().contains("line 2"));
    }
}
