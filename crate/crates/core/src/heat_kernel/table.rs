use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::heat_kernel::generator::{build_generator, Boundary, OperatorSpec};
use crate::heat_kernel::semigroup::{Semigroup, SemigroupMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelOptions {
    /// Negative kernel values below `-tol_neg * max(G)` are an error.
    #[serde(default = "default_tol_neg")]
    pub tol_neg: f64,
    /// Composite Simpson intervals in `s = sqrt(t/T)` for the time integrals.
    /// Defaults to `max(256, 8 * nx)`.
    #[serde(default)]
    pub quadrature_intervals: Option<usize>,
}

fn default_tol_neg() -> f64 {
    1e-10
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { tol_neg: default_tol_neg(), quadrature_intervals: None }
    }
}

/// `F(t, x) = Σ_k G(t,x,y_k)²·dx` sampled on the substitution nodes
/// `t = T·s²`, with weights that already include the Jacobian `2Ts`.
#[derive(Debug, Clone)]
struct TimeProfile {
    times: Vec<f64>,
    weights: Vec<f64>,
    rows: Vec<Vec<f64>>,
    first_panel_end: usize,
}

/// Small-time comparison of the first quadrature panel of `∫H dt` against
/// the whole-line asymptote `∫ 1/(2·a_min·sqrt(πt)) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallTimeCheck {
    pub panel_end: f64,
    pub numeric: f64,
    pub asymptote: f64,
}

/// Discrete heat kernel `G(t_i, x_j, y_k)` on cell centres plus the time
/// profile needed for `H`, `𝒢_T` and `𝒢_{T,α}`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid,
    boundary: Boundary,
    a_min: f64,
    semigroup: Semigroup,
    slices: Vec<DMatrix<f64>>,
    profile: TimeProfile,
}

impl KernelTable {
    pub fn build(op: &OperatorSpec, grid: &Grid, options: KernelOptions) -> Result<Self> {
        let generator = build_generator(op, grid)?;
        let (a_min, _) = op.a_range(grid);
        Self::from_generator(generator, op.boundary, a_min, grid, options)
    }

    pub fn from_generator(
        generator: DMatrix<f64>,
        boundary: Boundary,
        a_min: f64,
        grid: &Grid,
        options: KernelOptions,
    ) -> Result<Self> {
        if generator.nrows() != grid.nx() {
            return Err(Error::GridMismatch(format!(
                "generator is {}x{}, grid has {} cells",
                generator.nrows(),
                generator.ncols(),
                grid.nx()
            )));
        }
        let semigroup = Semigroup::new(generator)?;
        let dx = grid.dx();
        let n = grid.nx();

        let mut slices = Vec::with_capacity(grid.nt() + 1);
        let step = match semigroup.method() {
            SemigroupMethod::Spectral => None,
            SemigroupMethod::ScalingSquaring => Some(semigroup.propagator(grid.dt())?),
        };
        let mut current = DMatrix::<f64>::identity(n, n);
        for i in 0..=grid.nt() {
            let p = match &step {
                None => semigroup.propagator(grid.time(i))?,
                Some(step) => {
                    if i > 0 {
                        current = &current * step;
                    }
                    current.clone()
                }
            };
            let mut g = p / dx;
            floor_negative(&mut g, i, options.tol_neg)?;
            slices.push(g);
        }

        let profile = TimeProfile::build(&semigroup, grid, options)?;
        Ok(Self { grid: *grid, boundary, a_min, semigroup, slices, profile })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn semigroup(&self) -> &Semigroup {
        &self.semigroup
    }

    /// Positions of the solution points (cell centres).
    pub fn points(&self) -> Vec<f64> {
        self.grid.centers()
    }

    /// Kernel slice `G(t_i, ·, ·)` in units of 1/length.
    pub fn kernel(&self, i: usize) -> &DMatrix<f64> {
        &self.slices[i]
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.slices[i][(j, k)]
    }

    /// `G(t_i)·dx`, the matrix that maps point values at time 0 to time `t_i`.
    pub fn propagator(&self, i: usize) -> DMatrix<f64> {
        &self.slices[i] * self.grid.dx()
    }

    /// Kernel at an arbitrary time, straight from the semigroup.
    pub fn kernel_at(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.semigroup.propagator(t)? / self.grid.dx())
    }

    /// `max_{j} |Σ_k G(t_i,x_j,y_k)·dx − 1|` over all slices.
    pub fn mass_range(&self) -> (f64, f64) {
        let dx = self.grid.dx();
        self.slices
            .iter()
            .flat_map(|g| g.row_iter().map(move |r| r.sum() * dx).collect::<Vec<_>>())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m), hi.max(m)))
    }

    /// `max |G(t_i + t_l) − G(t_i)∘G(t_l)|` with the `dx`-weighted product.
    pub fn chapman_kolmogorov_defect(&self, i: usize, l: usize) -> f64 {
        let composed = &self.slices[i] * &self.slices[l] * self.grid.dx();
        (&self.slices[i + l] - composed).amax()
    }

    /// `H(t_i) = max_j Σ_k G(t_i,x_j,y_k)²·dx` on the grid times.
    pub fn h_function(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.slices
            .iter()
            .map(|g| g.row_iter().map(|r| r.norm_squared() * dx).fold(0.0, f64::max))
            .collect()
    }

    /// `∫_0^T Σ_k G(t,x,y_k)²·dx dt` for each solution point `x`.
    pub fn square_integral_by_point(&self) -> Vec<f64> {
        let p = &self.profile;
        let mut acc = vec![0.0; self.grid.nx()];
        for (w, row) in p.weights.iter().zip(&p.rows) {
            for (a, f) in acc.iter_mut().zip(row) {
                *a += w * f;
            }
        }
        acc
    }

    /// `𝒢_T = max_x ∫_0^T ∫ G(t,x,y)² dy dt`; time integral first, then the max.
    pub fn g_total(&self) -> f64 {
        self.square_integral_by_point().into_iter().fold(0.0, f64::max)
    }

    /// `∫_0^T H(t) dt`, the `α = 1` member of the `𝒢_{T,α}` family.
    pub fn h_integral(&self) -> f64 {
        self.h_power_integral(1.0)
    }

    /// `𝒢_{T,α} = ∫_0^T H(t)^α dt` for `α ∈ (1, 2)`.
    pub fn g_const_alpha(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::Domain(format!("α must lie in (1, 2), got {alpha}")));
        }
        Ok(self.h_power_integral(alpha))
    }

    fn h_power_integral(&self, alpha: f64) -> f64 {
        let p = &self.profile;
        p.weights
            .iter()
            .zip(&p.rows)
            .map(|(w, row)| w * row.iter().cloned().fold(0.0, f64::max).powf(alpha))
            .sum()
    }

    /// Variance of the discrete stochastic convolution at time `t_i` per
    /// solution point: `Σ_{l=1}^{i} Σ_k G(t_l,x,y_k)²·dx·dt`.
    pub fn walsh_variance(&self, i: usize) -> Vec<f64> {
        let dx = self.grid.dx();
        let dt = self.grid.dt();
        let mut acc = vec![0.0; self.grid.nx()];
        for g in &self.slices[1..=i] {
            for (a, row) in acc.iter_mut().zip(g.row_iter()) {
                *a += row.norm_squared() * dx * dt;
            }
        }
        acc
    }

    /// `I(t_i, x_j) = Σ_k G(t_i,x_j,y_k)·u0(y_k)·dx`, row-major `(nt+1) x nx`.
    pub fn initial_convolution(&self, u0: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.nx();
        if u0.len() != n {
            return Err(Error::GridMismatch(format!("u0 has {} values, grid {}", u0.len(), n)));
        }
        let v = nalgebra::DVector::from_column_slice(u0) * self.grid.dx();
        let mut out = Vec::with_capacity((self.grid.nt() + 1) * n);
        for g in &self.slices {
            out.extend((g * &v).iter());
        }
        Ok(out)
    }

    pub fn small_time_check(&self) -> SmallTimeCheck {
        let p = &self.profile;
        let end = p.first_panel_end;
        let numeric = (0..=end)
            .map(|m| {
                // Simpson weights of the first panel alone: 1, 4, 1.
                let w = match m {
                    0 => 1.0,
                    1 => 4.0,
                    _ => 1.0,
                };
                let h = p.times[end].sqrt() / 2.0;
                let s = p.times[m].sqrt();
                let hmax = p.rows[m].iter().cloned().fold(0.0, f64::max);
                w * h / 3.0 * 2.0 * s * hmax
            })
            .sum();
        let t1 = p.times[end];
        SmallTimeCheck {
            panel_end: t1,
            numeric,
            asymptote: t1.sqrt() / (self.a_min * std::f64::consts::PI.sqrt()),
        }
    }

    /// Rows `t,x,y,G` for every slice.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,y,G")?;
        let points = self.points();
        for (i, g) in self.slices.iter().enumerate() {
            let t = self.grid.time(i);
            for (j, x) in points.iter().enumerate() {
                for (k, y) in points.iter().enumerate() {
                    writeln!(out, "{t:.17e},{x:.17e},{y:.17e},{:.17e}", g[(j, k)])?;
                }
            }
        }
        Ok(())
    }
}

fn floor_negative(g: &mut DMatrix<f64>, i: usize, tol_neg: f64) -> Result<()> {
    let scale = g.max().max(f64::MIN_POSITIVE);
    let min = g.min();
    if min < -tol_neg * scale {
        return Err(Error::NegativeKernel { i, value: min, tol: tol_neg * scale });
    }
    g.apply(|v| *v = v.max(0.0));
    Ok(())
}

impl TimeProfile {
    fn build(semigroup: &Semigroup, grid: &Grid, options: KernelOptions) -> Result<Self> {
        let mut intervals = options.quadrature_intervals.unwrap_or((8 * grid.nx()).max(256));
        intervals += intervals % 2;
        let horizon = grid.horizon();
        let dx = grid.dx();
        let h = 1.0 / intervals as f64;
        let mut times = Vec::with_capacity(intervals + 1);
        let mut weights = Vec::with_capacity(intervals + 1);
        let mut rows = Vec::with_capacity(intervals + 1);
        for m in 0..=intervals {
            let s = m as f64 * h;
            let simpson = if m == 0 || m == intervals {
                1.0
            } else if m % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let t = horizon * s * s;
            times.push(t);
            weights.push(simpson * h / 3.0 * 2.0 * horizon * s);
            let sums = semigroup.row_square_sums(t)?;
            rows.push(sums.into_iter().map(|v| v / dx).collect());
        }
        Ok(Self { times, weights, rows, first_panel_end: 2 })
    }
}
