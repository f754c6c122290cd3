//! Uniform space-time grid on `[0, T] x [0, D]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    length: f64,
    nt: usize,
    nx: usize,
}

impl Grid {
    pub fn new(horizon: f64, length: f64, nt: usize, nx: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("horizon T must be > 0, got {horizon}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("length D must be > 0, got {length}")));
        }
        if nt < 2 {
            return Err(Error::Config(format!("nt must be ≥ 2, got {nt}")));
        }
        if nx < 2 {
            return Err(Error::Config(format!("nx must be ≥ 2, got {nx}")));
        }
        Ok(Self { horizon, length, nt, nx })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    /// Measure `dt * dx` of one space-time cell.
    pub fn cell_measure(&self) -> f64 {
        self.dt() * self.dx()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Midpoint of space cell `j`. Solution values live here.
    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.center(j)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|i| self.time(i)).collect()
    }

    /// Same physical domain with both step counts multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.length, self.nt * factor, self.nx * factor)
    }

    pub fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_from_extent() {
        let g = Grid::new(1.0, 1.0, 10, 10).unwrap();
        assert!((g.dt() - 0.1).abs() < 1e-15);
        assert!((g.dx() - 0.1).abs() < 1e-15);

        let g = Grid::new(0.5, 2.0, 5, 8).unwrap();
        assert!((g.dt() - 0.1).abs() < 1e-15);
        assert!((g.dx() - 0.25).abs() < 1e-15);
        assert!((g.time(g.nt()) - 0.5).abs() < 1e-15);
        assert!((g.node(g.nx()) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(matches!(Grid::new(1.0, 1.0, 0, 10), Err(Error::Config(_))));
        assert!(Grid::new(1.0, 1.0, 10, 1).is_err());
        assert!(Grid::new(0.0, 1.0, 10, 10).is_err());
        assert!(Grid::new(1.0, -1.0, 10, 10).is_err());
        assert!(Grid::new(f64::NAN, 1.0, 10, 10).is_err());
    }
}
