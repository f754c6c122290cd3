//! Girsanov drift `X(t, x)` evaluated on the grid.
//!
//! A drift only ever sees a [`PastView`], which holds the solution slices up
//! to and including the current time index. That is what keeps every
//! evaluated drift adapted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Solution slices `0..=i` of one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct PastView<'a> {
    slices: &'a [f64],
    npts: usize,
}

impl<'a> PastView<'a> {
    /// `slices` must contain whole slices; the last one is the present.
    pub fn new(slices: &'a [f64], npts: usize) -> Self {
        debug_assert!(npts > 0 && slices.len().is_multiple_of(npts) && !slices.is_empty());
        Self { slices, npts }
    }

    pub fn index(&self) -> usize {
        self.slices.len() / self.npts - 1
    }

    pub fn current(&self) -> &'a [f64] {
        &self.slices[self.slices.len() - self.npts..]
    }

    pub fn slice(&self, k: usize) -> Option<&'a [f64]> {
        (k <= self.index()).then(|| &self.slices[k * self.npts..(k + 1) * self.npts])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Constant { value: f64 },
    /// `amplitude * sin(mode·π·x/D)`, constant in time.
    SineSpace { amplitude: f64, mode: u32 },
    /// State feedback `−cap·tanh(gain·u(t_i, x))`.
    Feedback { gain: f64, cap: f64 },
}

impl DriftSpec {
    pub fn constant(value: f64) -> Self {
        DriftSpec::Constant { value }
    }

    /// Magnitude cap `|X| ≤ cap`.
    pub fn cap(&self) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::Constant { value } => value.abs(),
            DriftSpec::SineSpace { amplitude, .. } => amplitude.abs(),
            DriftSpec::Feedback { cap, .. } => cap.abs(),
        }
    }

    /// The drift does not depend on the trajectory.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, DriftSpec::Feedback { .. })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DriftSpec::Zero => true,
            DriftSpec::Constant { value } => *value == 0.0,
            DriftSpec::SineSpace { amplitude, .. } => *amplitude == 0.0,
            DriftSpec::Feedback { gain, cap } => *gain == 0.0 || *cap == 0.0,
        }
    }

    /// Fill `out` with `X(t_i, x_j)` for the current time index of `past`.
    pub fn evaluate(
        &self,
        grid: &Grid,
        points: &[f64],
        past: PastView<'_>,
        out: &mut [f64],
    ) -> Result<()> {
        let i = past.index();
        let length = grid.length();
        match self {
            DriftSpec::Zero => out.fill(0.0),
            DriftSpec::Constant { value } => out.fill(*value),
            DriftSpec::SineSpace { amplitude, mode } => {
                let k = f64::from(*mode) * std::f64::consts::PI / length;
                for (o, &x) in out.iter_mut().zip(points) {
                    *o = amplitude * (k * x).sin();
                }
            }
            DriftSpec::Feedback { gain, cap } => {
                for (o, &u) in out.iter_mut().zip(past.current()) {
                    *o = -cap * (gain * u).tanh();
                }
            }
        }
        let cap = self.cap();
        for (j, &x) in out.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { i, j, value: x });
            }
            if x.abs() > cap * (1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "drift |X({i},{j})| = {} exceeds cap {cap}",
                    x.abs()
                )));
            }
        }
        Ok(())
    }

    /// Drift on every cell `(i, j)`, `i < nt`, read along a stored trajectory.
    pub fn evaluate_along(&self, grid: &Grid, points: &[f64], values: &[f64]) -> Result<Vec<f64>> {
        let n = points.len();
        let mut cells = vec![0.0; grid.nt() * n];
        for (i, row) in cells.chunks_exact_mut(n).enumerate() {
            self.evaluate(grid, points, PastView::new(&values[..(i + 1) * n], n), row)?;
        }
        Ok(cells)
    }
}
