//! Discretized space-time white noise.
//!
//! One increment per space-time cell, `ΔW[i][j] ~ N(0, dt·dx)`, stored
//! row-major by time index.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::{SeedSpec, Stream};

/// Anything that can hand the solver one time row of increments at a time.
pub trait NoiseRows {
    fn grid(&self) -> &Grid;
    fn fill_row(&self, i: usize, out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSheet {
    grid: Grid,
    seed: Option<SeedSpec>,
    increments: Vec<f64>,
}

impl NoiseSheet {
    /// Draw a full sheet. Cell `(i, j)` uses counter `i * nx + j`.
    pub fn sample(grid: &Grid, seed: SeedSpec) -> Self {
        let source = CounterNoise::new(*grid, seed);
        let nx = grid.nx();
        let mut increments = vec![0.0; grid.nt() * nx];
        for (i, row) in increments.chunks_exact_mut(nx).enumerate() {
            source.fill_row(i, row);
        }
        Self { grid: *grid, seed: Some(seed), increments }
    }

    pub fn from_increments(grid: &Grid, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.nt() * grid.nx() {
            return Err(Error::GridMismatch(format!(
                "expected {} increments, got {}",
                grid.nt() * grid.nx(),
                increments.len()
            )));
        }
        Ok(Self { grid: *grid, seed: None, increments })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, seed: None, increments: vec![0.0; grid.nt() * grid.nx()] }
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nx = self.grid.nx();
        &self.increments[i * nx..(i + 1) * nx]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.increments[i * self.grid.nx() + j]
    }

    /// Cumulative sheet `W(t_i, x_j)` on the `(nt+1) x (nx+1)` node lattice,
    /// zero on both axes.
    pub fn brownian_sheet(&self) -> Vec<f64> {
        let (nt, nx) = (self.grid.nt(), self.grid.nx());
        let w = nx + 1;
        let mut sheet = vec![0.0; (nt + 1) * w];
        for i in 0..nt {
            let mut running = 0.0;
            for j in 0..nx {
                running += self.get(i, j);
                sheet[(i + 1) * w + j + 1] = sheet[i * w + j + 1] + running;
            }
        }
        sheet
    }

    /// `ΔW̃ = ΔW − X·dt·dx`, with `drift` given per cell (row-major, `nt x nx`).
    pub fn tilt(&self, drift: &[f64]) -> Result<NoiseSheet> {
        if drift.len() != self.increments.len() {
            return Err(Error::GridMismatch(format!(
                "drift has {} cells, noise has {}",
                drift.len(),
                self.increments.len()
            )));
        }
        let nx = self.grid.nx();
        let cell = self.grid.cell_measure();
        let mut increments = Vec::with_capacity(drift.len());
        for (k, (&dw, &x)) in self.increments.iter().zip(drift).enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { i: k / nx, j: k % nx, value: x });
            }
            increments.push(dw - x * cell);
        }
        Ok(NoiseSheet { grid: self.grid, seed: self.seed, increments })
    }

    /// Little-endian dump: header `nt: u64, nx: u64, T: f64, D: f64,
    /// master seed: u64`, then `nt * nx` increments as `f64`, time-major.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.grid.nt() as u64).to_le_bytes())?;
        out.write_all(&(self.grid.nx() as u64).to_le_bytes())?;
        out.write_all(&self.grid.horizon().to_le_bytes())?;
        out.write_all(&self.grid.length().to_le_bytes())?;
        out.write_all(&self.seed.map_or(0, |s| s.master).to_le_bytes())?;
        for v in &self.increments {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`NoiseSheet::write_binary`]. Returns the sheet and the
    /// master seed from the header; the replica index is not recorded.
    pub fn read_binary<R: Read>(mut input: R) -> Result<(NoiseSheet, u64)> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input
                .read_exact(&mut word)
                .map_err(|e| Error::Config(format!("truncated noise dump: {e}")))?;
            Ok(word)
        };
        let nt = u64::from_le_bytes(next(&mut input)?) as usize;
        let nx = u64::from_le_bytes(next(&mut input)?) as usize;
        let horizon = f64::from_le_bytes(next(&mut input)?);
        let length = f64::from_le_bytes(next(&mut input)?);
        let master = u64::from_le_bytes(next(&mut input)?);
        let grid = Grid::new(horizon, length, nt, nx)?;
        let mut increments = Vec::with_capacity(nt * nx);
        for _ in 0..nt * nx {
            increments.push(f64::from_le_bytes(next(&mut input)?));
        }
        Ok((NoiseSheet { grid, seed: None, increments }, master))
    }
}

impl NoiseRows for NoiseSheet {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(i));
    }
}

/// Regenerate-from-counter noise: bit-identical to [`NoiseSheet::sample`]
/// without materializing the sheet.
#[derive(Debug, Clone, Copy)]
pub struct CounterNoise {
    grid: Grid,
    seed: SeedSpec,
}

impl CounterNoise {
    pub fn new(grid: Grid, seed: SeedSpec) -> Self {
        Self { grid, seed }
    }

    pub fn seed(&self) -> SeedSpec {
        self.seed
    }
}

impl NoiseRows for CounterNoise {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let nx = self.grid.nx();
        let sd = self.grid.cell_measure().sqrt();
        let base = (i * nx) as u64;
        for (j, v) in out.iter_mut().enumerate().take(nx) {
            *v = sd * self.seed.gaussian(Stream::Noise, base + j as u64);
        }
    }
}
