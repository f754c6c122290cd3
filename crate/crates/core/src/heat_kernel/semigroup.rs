//! Evaluation of `exp(t·A)` for a fixed generator `A`.
//!
//! Tridiagonal generators whose off-diagonal pairs have a positive product
//! are similar to a symmetric matrix through a diagonal scaling; those are
//! diagonalized once and every later time costs a couple of matrix
//! products. Everything else (periodic wrap with advection, sign changes in
//! the off-diagonals, a badly conditioned scaling) falls back to
//! scaling-and-squaring.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `max(d)/min(d)` accepted for the diagonal similarity.
const MAX_SCALING_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupMethod {
    Spectral,
    ScalingSquaring,
}

#[derive(Debug, Clone)]
struct Spectral {
    eigenvalues: DVector<f64>,
    /// `D·Q`
    left: DMatrix<f64>,
    /// `Qᵀ·D⁻¹`
    right: DMatrix<f64>,
    /// `D` is the identity up to rounding.
    orthogonal: bool,
}

#[derive(Debug, Clone)]
pub struct Semigroup {
    generator: DMatrix<f64>,
    spectral: Option<Spectral>,
}

impl Semigroup {
    pub fn new(generator: DMatrix<f64>) -> Result<Self> {
        if !generator.is_square() {
            return Err(Error::Config("generator must be square".into()));
        }
        let spectral = symmetrize(&generator).map(|(scale, sym)| {
            let eig = SymmetricEigen::new(sym);
            let n = scale.len();
            let mut left = eig.eigenvectors.clone();
            let mut right = eig.eigenvectors.transpose();
            for r in 0..n {
                left.row_mut(r).scale_mut(scale[r]);
                right.column_mut(r).scale_mut(1.0 / scale[r]);
            }
            let orthogonal = scale.iter().all(|&d| (d - 1.0).abs() < 1e-12);
            Spectral { eigenvalues: eig.eigenvalues, left, right, orthogonal }
        });
        Ok(Self { generator, spectral })
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn method(&self) -> SemigroupMethod {
        if self.spectral.is_some() {
            SemigroupMethod::Spectral
        } else {
            SemigroupMethod::ScalingSquaring
        }
    }

    pub fn eigenvalues(&self) -> Option<&DVector<f64>> {
        self.spectral.as_ref().map(|s| &s.eigenvalues)
    }

    /// `exp(t·A)`.
    pub fn propagator(&self, t: f64) -> Result<DMatrix<f64>> {
        let p = match &self.spectral {
            Some(s) => s.scaled_left(t) * &s.right,
            None => (&self.generator * t).exp(),
        };
        if p.iter().all(|v| v.is_finite()) {
            Ok(p)
        } else {
            Err(Error::Semigroup {
                attempted: match self.method() {
                    SemigroupMethod::Spectral => "eigendecomposition",
                    SemigroupMethod::ScalingSquaring => "scaling-and-squaring",
                },
                reason: format!("non-finite entries in exp({t}·A)"),
            })
        }
    }

    /// `Σ_k exp(t·A)[x, k]²` for every row `x`.
    pub fn row_square_sums(&self, t: f64) -> Result<Vec<f64>> {
        if let Some(s) = &self.spectral {
            if s.orthogonal {
                let r = s.scaled_left(t);
                return Ok(r.row_iter().map(|row| row.norm_squared()).collect());
            }
        }
        let p = self.propagator(t)?;
        Ok(p.row_iter().map(|row| row.norm_squared()).collect())
    }
}

impl Spectral {
    fn scaled_left(&self, t: f64) -> DMatrix<f64> {
        let mut r = self.left.clone();
        for (m, lambda) in self.eigenvalues.iter().enumerate() {
            r.column_mut(m).scale_mut((lambda * t).exp());
        }
        r
    }
}

/// Diagonal `d` with `D⁻¹·A·D` symmetric, if one exists and is well
/// conditioned.
fn symmetrize(a: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut d = DVector::from_element(n, 1.0);
    for j in 0..n.saturating_sub(1) {
        let (lo, up) = (a[(j + 1, j)], a[(j, j + 1)]);
        if lo > 0.0 && up > 0.0 {
            d[j + 1] = d[j] * (lo / up).sqrt();
        } else if lo == 0.0 && up == 0.0 {
            d[j + 1] = d[j];
        } else {
            return None;
        }
    }
    let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    if hi / lo > MAX_SCALING_CONDITION {
        return None;
    }
    let mut s = a.clone();
    for r in 0..n {
        for c in 0..n {
            s[(r, c)] *= d[c] / d[r];
        }
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    for r in 0..n {
        for c in r + 1..n {
            if (s[(r, c)] - s[(c, r)]).abs() > 1e-12 * scale {
                return None;
            }
        }
    }
    let sym = (&s + s.transpose()) * 0.5;
    Some((d, sym))
}
