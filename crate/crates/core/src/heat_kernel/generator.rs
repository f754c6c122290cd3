//! Finite-difference generator of `L = ½a²∂² + b∂` on cell centres.
//!
//! The unknowns sit at the `nx` cell midpoints. Boundary conditions are
//! imposed through one ghost cell on each side: odd reflection for
//! Dirichlet (the wall value, the ghost/first-cell average, is zero), even
//! reflection for Neumann (zero one-sided difference) and wraparound for
//! periodic.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::presets::Coefficient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Neumann,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    #[default]
    Central,
    Upwind,
}

/// Coefficients `a`, `b` and boundary condition of the operator.
///
/// Outside `[0, D]` the coefficients are continued by their boundary
/// values, `a(x) = a(0)` for `x ≤ 0` and `a(x) = a(D)` for `x ≥ D`; this is
/// the convention used for whole-line comparison bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub a: Coefficient,
    pub b: Coefficient,
    pub boundary: Boundary,
    #[serde(default)]
    pub advection: Advection,
}

impl OperatorSpec {
    pub fn heat(boundary: Boundary) -> Self {
        Self {
            a: Coefficient::constant(1.0),
            b: Coefficient::constant(0.0),
            boundary,
            advection: Advection::Central,
        }
    }

    pub fn a_at(&self, x: f64, length: f64) -> f64 {
        self.a.eval(x.clamp(0.0, length), length)
    }

    pub fn b_at(&self, x: f64, length: f64) -> f64 {
        self.b.eval(x.clamp(0.0, length), length)
    }

    /// Minimum and maximum of `a` over grid nodes and cell centres.
    pub fn a_range(&self, grid: &Grid) -> (f64, f64) {
        let d = grid.length();
        (0..=grid.nx())
            .map(|j| grid.node(j))
            .chain(grid.centers())
            .map(|x| self.a_at(x, d))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Checks `0 < a_min ≤ a ≤ a_max < ∞` and finiteness of `b` on the grid.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.a.validate("a")?;
        self.b.validate("b")?;
        let d = grid.length();
        for x in (0..=grid.nx()).map(|j| grid.node(j)).chain(grid.centers()) {
            let a = self.a_at(x, d);
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Assumption(format!(
                    "diffusion coefficient a must be positive and finite, a({x}) = {a}"
                )));
            }
            let b = self.b_at(x, d);
            if !b.is_finite() {
                return Err(Error::Assumption(format!("drift coefficient b({x}) = {b}")));
            }
        }
        Ok(())
    }
}

/// Assemble the `nx x nx` generator matrix.
pub fn build_generator(op: &OperatorSpec, grid: &Grid) -> Result<DMatrix<f64>> {
    op.validate(grid)?;
    let n = grid.nx();
    let dx = grid.dx();
    let d = grid.length();
    let mut gen = DMatrix::<f64>::zeros(n, n);

    // Ghost index -1 / n resolves to (column, sign) per boundary condition.
    let resolve = |k: isize| -> (usize, f64) {
        if (0..n as isize).contains(&k) {
            return (k as usize, 1.0);
        }
        let mirror = if k < 0 { 0 } else { n - 1 };
        match op.boundary {
            Boundary::Dirichlet => (mirror, -1.0),
            Boundary::Neumann => (mirror, 1.0),
            Boundary::Periodic => ((k.rem_euclid(n as isize)) as usize, 1.0),
        }
    };

    for j in 0..n {
        let x = grid.center(j);
        let a = op.a_at(x, d);
        let b = op.b_at(x, d);
        let diff = 0.5 * a * a / (dx * dx);
        let (w_left, w_mid, w_right) = match op.advection {
            Advection::Central => {
                let adv = b / (2.0 * dx);
                (diff - adv, -2.0 * diff, diff + adv)
            }
            Advection::Upwind if b >= 0.0 => (diff, -2.0 * diff - b / dx, diff + b / dx),
            Advection::Upwind => (diff - b / dx, -2.0 * diff + b / dx, diff),
        };
        gen[(j, j)] += w_mid;
        let (col, sign) = resolve(j as isize - 1);
        gen[(j, col)] += sign * w_left;
        let (col, sign) = resolve(j as isize + 1);
        gen[(j, col)] += sign * w_right;
    }
    Ok(gen)
}
