//! Named coefficient families with closed-form Lipschitz data.
//!
//! Experiments pick `a`, `b`, `g`, `σ`, `u0` and the drift from these
//! registries so that the declared constants of the model can be checked
//! against the closed forms below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial coefficient of the generator (`a` or `b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Constant { value: f64 },
    /// `mean + amplitude * sin(2π·frequency·x/D)`
    Sinusoidal { mean: f64, amplitude: f64, frequency: f64 },
    /// Values at equally spaced points spanning `[0, D]`, linearly interpolated.
    Table { values: Vec<f64> },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Sinusoidal { mean, amplitude, frequency } => {
                mean + amplitude * (std::f64::consts::TAU * frequency * x / length).sin()
            }
            Coefficient::Table { values } => interpolate(values, x, length),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        match self {
            Coefficient::Table { values } if values.len() < 2 => Err(Error::Config(format!(
                "{name}: coefficient table needs at least 2 values"
            ))),
            Coefficient::Table { values } if values.iter().any(|v| !v.is_finite()) => {
                Err(Error::Config(format!("{name}: coefficient table has non-finite entries")))
            }
            _ => Ok(()),
        }
    }
}

fn interpolate(values: &[f64], x: f64, length: f64) -> f64 {
    let n = values.len() - 1;
    let pos = (x / length).clamp(0.0, 1.0) * n as f64;
    let k = (pos.floor() as usize).min(n - 1);
    let w = pos - k as f64;
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// Reaction term `g(t, x, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reaction {
    Zero,
    /// `rate * u`
    Linear { rate: f64 },
    /// `amplitude * sin(frequency * u)`
    Sine { amplitude: f64, frequency: f64 },
}

impl Reaction {
    pub fn eval(&self, _t: f64, _x: f64, u: f64) -> f64 {
        match self {
            Reaction::Zero => 0.0,
            Reaction::Linear { rate } => rate * u,
            Reaction::Sine { amplitude, frequency } => amplitude * (frequency * u).sin(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Reaction::Zero => 0.0,
            Reaction::Linear { rate } => rate.abs(),
            Reaction::Sine { amplitude, frequency } => (amplitude * frequency).abs(),
        }
    }
}

/// Noise coefficient `σ(t, x, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseCoefficient {
    Constant { value: f64 },
    /// `amplitude / (1 + exp(-slope * u))`
    BoundedSigmoid { amplitude: f64, slope: f64 },
    /// `amplitude / sqrt(1 + u²)`
    InverseSqrt { amplitude: f64 },
}

impl NoiseCoefficient {
    pub fn eval(&self, _t: f64, _x: f64, u: f64) -> f64 {
        match self {
            NoiseCoefficient::Constant { value } => *value,
            NoiseCoefficient::BoundedSigmoid { amplitude, slope } => {
                amplitude / (1.0 + (-slope * u).exp())
            }
            NoiseCoefficient::InverseSqrt { amplitude } => amplitude / (1.0 + u * u).sqrt(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            NoiseCoefficient::Constant { .. } => 0.0,
            NoiseCoefficient::BoundedSigmoid { amplitude, slope } => (amplitude * slope).abs() / 4.0,
            // sup |d/du (1+u²)^{-1/2}| is attained at u = 1/√2
            NoiseCoefficient::InverseSqrt { amplitude } => {
                amplitude.abs() * 2.0 / (3.0 * 3f64.sqrt())
            }
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            NoiseCoefficient::Constant { value } => value.abs(),
            NoiseCoefficient::BoundedSigmoid { amplitude, .. } => amplitude.abs(),
            NoiseCoefficient::InverseSqrt { amplitude } => amplitude.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, NoiseCoefficient::Constant { .. })
    }
}

/// Initial condition `u0(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    Constant { value: f64 },
    /// `amplitude * sin(mode·π·x/D)`
    SineMode { amplitude: f64, mode: u32 },
    /// `amplitude * cos(mode·π·x/D)`
    CosineMode { amplitude: f64, mode: u32 },
    Table { values: Vec<f64> },
}

impl InitialCondition {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Constant { value } => *value,
            InitialCondition::SineMode { amplitude, mode } => {
                amplitude * (f64::from(*mode) * PI * x / length).sin()
            }
            InitialCondition::CosineMode { amplitude, mode } => {
                amplitude * (f64::from(*mode) * PI * x / length).cos()
            }
            InitialCondition::Table { values } if values.len() >= 2 => {
                interpolate(values, x, length)
            }
            InitialCondition::Table { values } => values.first().copied().unwrap_or(0.0),
        }
    }

    pub fn sample(&self, points: &[f64], length: f64) -> Vec<f64> {
        points.iter().map(|&x| self.eval(x, length)).collect()
    }
}
