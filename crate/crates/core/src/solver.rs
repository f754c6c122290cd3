//! Exponential-Euler solver for
//! `∂u/∂t = L u + g(t,x,u) + σ(t,x,u)·(Ẇ + X)` on the cell-centred grid.
//!
//! One step is `u_{i+1} = P·[u_i + dt·g(u_i) + σ(u_i)·(ΔW_i/dx + X_i·dt)]`
//! with `P = G(dt)·dx`. For `g ≡ 0` and constant `σ` this reproduces the
//! discrete mild formulation exactly.

use serde::{Deserialize, Serialize};

use crate::constants::LipschitzData;
use crate::drift::{DriftSpec, PastView};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::heat_kernel::{Boundary, KernelTable, OperatorSpec};
use crate::noise::NoiseRows;
use crate::presets::{InitialCondition, NoiseCoefficient, Reaction};
use crate::stats::{Bootstrap, Estimate};

/// Magnitude beyond which a path is reported as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub operator: OperatorSpec,
    #[serde(default = "zero_reaction")]
    pub g: Reaction,
    pub sigma: NoiseCoefficient,
    #[serde(default = "zero_initial")]
    pub u0: InitialCondition,
    /// Declared constants; defaults to the closed forms of the presets.
    #[serde(default)]
    pub lipschitz: Option<LipschitzData>,
}

fn zero_reaction() -> Reaction {
    Reaction::Zero
}

fn zero_initial() -> InitialCondition {
    InitialCondition::Zero
}

impl ModelSpec {
    /// Heat equation with additive noise of strength `sigma`.
    pub fn additive(boundary: Boundary, sigma: f64) -> Self {
        Self {
            operator: OperatorSpec::heat(boundary),
            g: Reaction::Zero,
            sigma: NoiseCoefficient::Constant { value: sigma },
            u0: InitialCondition::Zero,
            lipschitz: None,
        }
    }

    pub fn closed_form_lipschitz(&self) -> LipschitzData {
        LipschitzData {
            l_g: self.g.lipschitz(),
            l_sigma: self.sigma.lipschitz(),
            k_sigma: self.sigma.bound(),
        }
    }

    /// Declared constants, checked against the closed forms. A declared value
    /// smaller than the closed form would make every bound built on it wrong.
    pub fn lipschitz_data(&self) -> Result<LipschitzData> {
        let exact = self.closed_form_lipschitz();
        let Some(declared) = self.lipschitz else {
            return Ok(exact);
        };
        declared.validate()?;
        for (name, d, e) in [
            ("L_g", declared.l_g, exact.l_g),
            ("L_σ", declared.l_sigma, exact.l_sigma),
            ("K_σ", declared.k_sigma, exact.k_sigma),
        ] {
            if d < e * (1.0 - 1e-12) {
                return Err(Error::Assumption(format!(
                    "declared {name} = {d} is below the preset's value {e}"
                )));
            }
        }
        Ok(declared)
    }

    pub fn validate(&self, grid: &Grid) -> Result<LipschitzData> {
        self.operator.validate(grid)?;
        self.lipschitz_data()
    }
}

/// Solution values on every time slice, row-major `(nt+1) x nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPath {
    grid: Grid,
    boundary: Boundary,
    values: Vec<f64>,
}

impl FieldPath {
    pub fn new(grid: &Grid, boundary: Boundary, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.nt() + 1) * grid.nx() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                (grid.nt() + 1) * grid.nx(),
                values.len()
            )));
        }
        Ok(Self { grid: *grid, boundary, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.grid.nx();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nx() + j]
    }

    /// `max_{i,j} |u(t_i, x_j)|`.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// `sqrt(Σ_{i=1}^{nt} Σ_j u(t_i,x_j)²·dt·dx)`.
    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.grid, &self.values)
    }

    pub fn difference(&self, other: &FieldPath) -> Result<FieldPath> {
        self.grid.ensure_same(&other.grid, "path difference")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(FieldPath { grid: self.grid, boundary: self.boundary, values })
    }

    /// Boundary data at time `t_i` implied by the ghost-cell closure:
    /// wall values for Dirichlet and periodic, one-sided wall derivatives
    /// for Neumann. Dirichlet gives `[0, 0]`, Neumann `[0, 0]` and periodic
    /// two equal numbers.
    pub fn boundary_values(&self, i: usize) -> [f64; 2] {
        let s = self.slice(i);
        let n = s.len();
        let dx = self.grid.dx();
        let (left, right) = (s[0], s[n - 1]);
        // Ghost cells beyond each wall.
        let (g_left, g_right) = match self.boundary {
            Boundary::Dirichlet => (-left, -right),
            Boundary::Neumann => (left, right),
            Boundary::Periodic => (right, left),
        };
        match self.boundary {
            Boundary::Neumann => [(left - g_left) / dx, (g_right - right) / dx],
            _ => [(g_left + left) / 2.0, (right + g_right) / 2.0],
        }
    }
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Space-time `L²` norm over slices `1..=nt` of a `(nt+1) x nx` array.
pub fn l2_norm(grid: &Grid, values: &[f64]) -> f64 {
    let n = grid.nx();
    let squares: Vec<f64> = values[n..].iter().map(|v| v * v).collect();
    (crate::stats::pairwise_sum(&squares) * grid.cell_measure()).sqrt()
}

/// Paired trajectories of the Girsanov coupling. `u` carries the drift,
/// `v` does not; both see the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub u: FieldPath,
    pub v: FieldPath,
    /// `Σ_{i,j} X_{ij}²·dt·dx`.
    pub drift_energy: f64,
}

/// Propagator and model evaluated on one grid, shared across replicas.
#[derive(Debug, Clone)]
pub struct Solver {
    grid: Grid,
    boundary: Boundary,
    model: ModelSpec,
    points: Vec<f64>,
    u0: Vec<f64>,
    /// `P(dt)` stored row-major.
    step: Vec<f64>,
}

impl Solver {
    pub fn new(model: &ModelSpec, table: &KernelTable) -> Result<Self> {
        let grid = *table.grid();
        model.validate(&grid)?;
        if model.operator.boundary != table.boundary() {
            return Err(Error::Config("kernel table and model disagree on the boundary".into()));
        }
        let points = table.points();
        let u0 = model.u0.sample(&points, grid.length());
        if let Some((j, v)) = u0.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { i: 0, j, value: *v });
        }
        let p = table.propagator(1);
        let n = grid.nx();
        let mut step = Vec::with_capacity(n * n);
        for r in 0..n {
            step.extend((0..n).map(|c| p[(r, c)]));
        }
        Ok(Self { grid, boundary: table.boundary(), model: model.clone(), points, u0, step })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn initial(&self) -> &[f64] {
        &self.u0
    }

    /// Solve without drift.
    pub fn solve<N: NoiseRows>(&self, noise: &N) -> Result<FieldPath> {
        self.solve_with_drift(noise, &DriftSpec::Zero).map(|(path, _)| path)
    }

    /// Solve `∂u = Lu + g + σ(Ẇ + X)`; also returns `Σ X²·dt·dx`.
    pub fn solve_with_drift<N: NoiseRows>(
        &self,
        noise: &N,
        drift: &DriftSpec,
    ) -> Result<(FieldPath, f64)> {
        self.grid.ensure_same(noise.grid(), "noise")?;
        let n = self.grid.nx();
        let mut values = Vec::with_capacity((self.grid.nt() + 1) * n);
        values.extend_from_slice(&self.u0);
        let mut dw = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut energy = Vec::with_capacity(self.grid.nt());
        for i in 0..self.grid.nt() {
            noise.fill_row(i, &mut dw);
            drift.evaluate(&self.grid, &self.points, PastView::new(&values, n), &mut x)?;
            energy.push(x.iter().map(|v| v * v).sum::<f64>());
            let current = &values[i * n..];
            self.forcing(i, &current[..n], &dw, &x, &mut rhs);
            self.advance(i + 1, &rhs, &mut values)?;
        }
        let energy = crate::stats::pairwise_sum(&energy) * self.grid.cell_measure();
        Ok((FieldPath { grid: self.grid, boundary: self.boundary, values }, energy))
    }

    /// The drifted path `u` and the undrifted path `v` driven by one noise
    /// sheet. The drift reads only the past of `u`.
    pub fn solve_pair<N: NoiseRows>(&self, noise: &N, drift: &DriftSpec) -> Result<CoupledPair> {
        self.grid.ensure_same(noise.grid(), "noise")?;
        let n = self.grid.nx();
        let cap = (self.grid.nt() + 1) * n;
        let mut u = Vec::with_capacity(cap);
        let mut v = Vec::with_capacity(cap);
        u.extend_from_slice(&self.u0);
        v.extend_from_slice(&self.u0);
        let zero = vec![0.0; n];
        let mut dw = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut energy = Vec::with_capacity(self.grid.nt());
        for i in 0..self.grid.nt() {
            noise.fill_row(i, &mut dw);
            drift.evaluate(&self.grid, &self.points, PastView::new(&u, n), &mut x)?;
            energy.push(x.iter().map(|v| v * v).sum::<f64>());
            self.forcing(i, &u[i * n..(i + 1) * n], &dw, &x, &mut rhs);
            self.advance(i + 1, &rhs, &mut u)?;
            self.forcing(i, &v[i * n..(i + 1) * n], &dw, &zero, &mut rhs);
            self.advance(i + 1, &rhs, &mut v)?;
        }
        let drift_energy = crate::stats::pairwise_sum(&energy) * self.grid.cell_measure();
        Ok(CoupledPair {
            u: FieldPath { grid: self.grid, boundary: self.boundary, values: u },
            v: FieldPath { grid: self.grid, boundary: self.boundary, values: v },
            drift_energy,
        })
    }

    fn forcing(&self, i: usize, u: &[f64], dw: &[f64], x: &[f64], out: &mut [f64]) {
        let t = self.grid.time(i);
        let dt = self.grid.dt();
        let inv_dx = 1.0 / self.grid.dx();
        for j in 0..u.len() {
            let y = self.points[j];
            let g = self.model.g.eval(t, y, u[j]);
            let s = self.model.sigma.eval(t, y, u[j]);
            out[j] = u[j] + dt * g + s * (dw[j] * inv_dx + x[j] * dt);
        }
    }

    /// Append `P·rhs` as slice `i`.
    fn advance(&self, i: usize, rhs: &[f64], values: &mut Vec<f64>) -> Result<()> {
        let n = rhs.len();
        for (j, row) in self.step.chunks_exact(n).enumerate() {
            let next: f64 = row.iter().zip(rhs).map(|(p, r)| p * r).sum();
            if !next.is_finite() {
                return Err(Error::NonFinite { i, j, value: next });
            }
            if next.abs() > BLOW_UP_THRESHOLD {
                return Err(Error::BlowUp { i, j, value: next.abs() });
            }
            values.push(next);
        }
        Ok(())
    }
}

/// Largest observed difference quotients of `g` and `σ` between neighbouring
/// samples along a path, and the largest `|σ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub l_g: f64,
    pub l_sigma: f64,
    pub k_sigma: f64,
}

impl LipschitzAudit {
    pub fn within(&self, declared: &LipschitzData) -> bool {
        let tol = 1.0 + 1e-9;
        self.l_g <= declared.l_g * tol + 1e-300
            && self.l_sigma <= declared.l_sigma * tol + 1e-300
            && self.k_sigma <= declared.k_sigma * tol + 1e-300
    }
}

pub fn audit_lipschitz(model: &ModelSpec, path: &FieldPath) -> LipschitzAudit {
    let grid = path.grid();
    let points = grid.centers();
    let mut audit = LipschitzAudit { l_g: 0.0, l_sigma: 0.0, k_sigma: 0.0 };
    for i in 0..=grid.nt() {
        let t = grid.time(i);
        let s = path.slice(i);
        for j in 0..s.len() {
            let y = points[j];
            audit.k_sigma = audit.k_sigma.max(model.sigma.eval(t, y, s[j]).abs());
            if j + 1 < s.len() {
                let (a, b) = (s[j], s[j + 1]);
                if (a - b).abs() > 1e-12 {
                    let dg = model.g.eval(t, y, a) - model.g.eval(t, y, b);
                    let ds = model.sigma.eval(t, y, a) - model.sigma.eval(t, y, b);
                    audit.l_g = audit.l_g.max((dg / (a - b)).abs());
                    audit.l_sigma = audit.l_sigma.max((ds / (a - b)).abs());
                }
            }
        }
    }
    audit
}

/// `sup_{t,x} E|u(t,x)|^p` estimated from replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    pub estimate: Estimate,
    pub argmax: (usize, usize),
}

pub fn moment_check(paths: &[FieldPath], p: f64, bootstrap: &Bootstrap) -> Result<MomentReport> {
    if paths.is_empty() {
        return Err(Error::Domain("moment check needs at least one path".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("moment order must be ≥ 1, got {p}")));
    }
    let grid = *paths[0].grid();
    for path in paths {
        grid.ensure_same(path.grid(), "moment check")?;
    }
    let npts = (grid.nt() + 1) * grid.nx();
    let powered: Vec<Vec<f64>> =
        paths.iter().map(|q| q.values().iter().map(|v| v.abs().powf(p)).collect()).collect();
    let sup_of_means = |idx: &[usize]| -> (f64, usize) {
        let mut acc = vec![0.0; npts];
        for &r in idx {
            for (a, v) in acc.iter_mut().zip(&powered[r]) {
                *a += v;
            }
        }
        let (k, s) = acc
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &s)| if s > best.1 { (k, s) } else { best });
        (s / idx.len() as f64, k)
    };
    let all: Vec<usize> = (0..paths.len()).collect();
    let (_, k) = sup_of_means(&all);
    let estimate = bootstrap.estimate(paths.len(), |idx| sup_of_means(idx).0);
    if !estimate.value.is_finite() {
        return Err(Error::NonFinite { i: k / grid.nx(), j: k % grid.nx(), value: estimate.value });
    }
    Ok(MomentReport { p, estimate, argmax: (k / grid.nx(), k % grid.nx()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat_kernel::KernelOptions;
    use crate::noise::NoiseSheet;
    use crate::rng::SeedSpec;

    fn setup(boundary: Boundary, nt: usize, nx: usize) -> (Grid, KernelTable) {
        let grid = Grid::new(1.0, 1.0, nt, nx).unwrap();
        let table =
            KernelTable::build(&OperatorSpec::heat(boundary), &grid, KernelOptions::default())
                .unwrap();
        (grid, table)
    }

    #[test]
    fn zero_noise_zero_data_stays_zero() {
        let (grid, table) = setup(Boundary::Dirichlet, 8, 8);
        let solver = Solver::new(&ModelSpec::additive(Boundary::Dirichlet, 1.0), &table).unwrap();
        let path = solver.solve(&NoiseSheet::zeros(&grid)).unwrap();
        assert_eq!(path.sup_norm(), 0.0);
    }

    #[test]
    fn deterministic_part_matches_initial_convolution() {
        let (grid, table) = setup(Boundary::Neumann, 10, 12);
        let mut model = ModelSpec::additive(Boundary::Neumann, 1.0);
        model.u0 = InitialCondition::CosineMode { amplitude: 1.0, mode: 2 };
        let solver = Solver::new(&model, &table).unwrap();
        let path = solver.solve(&NoiseSheet::zeros(&grid)).unwrap();
        let conv = table.initial_convolution(solver.initial()).unwrap();
        for (a, b) in path.values().iter().zip(&conv) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_drift_offset_is_deterministic() {
        let (grid, table) = setup(Boundary::Periodic, 8, 8);
        let solver = Solver::new(&ModelSpec::additive(Boundary::Periodic, 1.0), &table).unwrap();
        let noise = NoiseSheet::sample(&grid, SeedSpec::new(3, 0));
        let pair = solver.solve_pair(&noise, &DriftSpec::constant(0.5)).unwrap();
        let diff = pair.u.difference(&pair.v).unwrap();
        // periodic heat semigroup preserves constants: u − v = 0.5·t
        for i in 0..=grid.nt() {
            for &d in diff.slice(i) {
                assert!((d - 0.5 * grid.time(i)).abs() < 1e-12);
            }
        }
        assert!((pair.drift_energy - 0.25).abs() < 1e-12);
    }

    #[test]
    fn l2_norm_of_constant() {
        let grid = Grid::new(2.0, 3.0, 4, 5).unwrap();
        let path = FieldPath::new(&grid, Boundary::Neumann, vec![1.5; 25]).unwrap();
        assert!((path.l2_norm() - 1.5 * 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(path.sup_norm(), 1.5);
    }

    #[test]
    fn blow_up_is_reported() {
        let (grid, table) = setup(Boundary::Neumann, 50, 4);
        let mut model = ModelSpec::additive(Boundary::Neumann, 0.0);
        model.g = Reaction::Linear { rate: 80.0 };
        model.u0 = InitialCondition::Constant { value: 1.0 };
        let solver = Solver::new(&model, &table).unwrap();
        match solver.solve(&NoiseSheet::zeros(&grid)) {
            Err(Error::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn understated_lipschitz_is_rejected() {
        let mut model = ModelSpec::additive(Boundary::Dirichlet, 1.0);
        model.g = Reaction::Linear { rate: 2.0 };
        model.lipschitz = Some(LipschitzData { l_g: 1.0, l_sigma: 0.0, k_sigma: 1.0 });
        assert!(matches!(model.lipschitz_data(), Err(Error::Assumption(_))));
        model.lipschitz = Some(LipschitzData { l_g: 3.0, l_sigma: 0.5, k_sigma: 2.0 });
        assert!(model.lipschitz_data().is_ok());
    }
}
