//! Closed-form transportation-cost constants and the concentration bounds
//! they imply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat_kernel::KernelTable;

/// Both endpoints of `(1, 2)` are excluded: `β` diverges at `α = 1` and
/// `𝒢_{T,α}` may diverge at `α = 2`.
pub const ALPHA_BRACKET: (f64, f64) = (1.0 + 1e-3, 2.0 - 1e-3);

/// Lipschitz and boundedness data of the reaction `g` and noise coefficient `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzData {
    pub l_g: f64,
    pub l_sigma: f64,
    pub k_sigma: f64,
}

impl LipschitzData {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("L_g", self.l_g), ("L_σ", self.l_sigma), ("K_σ", self.k_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Hölder conjugate of `α`: `1/α + 1/β = 1`.
pub fn beta(alpha: f64) -> f64 {
    alpha / (alpha - 1.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("α must lie in (1, 2), got {alpha}")))
    }
}

/// `C_∞ = 2·𝒢_T·exp(2·L_g²·T²)`.
pub fn c_infinity(g_total: f64, l_g: f64, horizon: f64) -> Result<f64> {
    if g_total < 0.0 || l_g < 0.0 || horizon < 0.0 {
        return Err(Error::Domain("C_∞ inputs must be nonnegative".into()));
    }
    let exponent = 2.0 * l_g * l_g * horizon * horizon;
    let log_value = (2.0 * g_total).ln() + exponent;
    if log_value >= f64::MAX.ln() || !exponent.is_finite() {
        return Err(Error::Overflow { what: "C_∞", exponent });
    }
    Ok(2.0 * g_total * exponent.exp())
}

/// `ln C_{2,α}` split into the prefactor logarithm and the exponent of the
/// Gronwall factor. The exponent may be `+∞`.
fn c_two_alpha_parts(
    data: &LipschitzData,
    g_total: f64,
    g_alpha: f64,
    horizon: f64,
    length: f64,
    alpha: f64,
) -> (f64, f64) {
    let b = beta(alpha);
    let ln3 = 3f64.ln();
    let prefactor = horizon.ln() + length.ln() + (2.0 - 1.0 / b) * ln3
        + 2.0 * data.k_sigma.ln()
        + g_total.ln();
    if data.l_sigma == 0.0 {
        return (prefactor, 0.0);
    }
    // ln(𝒢_{T,α}^{β/α} + 𝒢_T^β·T^{β/α}) by log-sum-exp
    let t1 = b / alpha * g_alpha.ln();
    let t2 = b * g_total.ln() + b / alpha * horizon.ln();
    let hi = t1.max(t2);
    let ln_sum = if hi == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        hi + ((t1 - hi).exp() + (t2 - hi).exp()).ln()
    };
    let ln_exponent = (horizon / b).ln() + (2.0 * b - 1.0) * ln3
        + 2.0 * b * data.l_sigma.ln()
        + ln_sum;
    (prefactor, ln_exponent.exp())
}

/// `C_{2,α} = T·D·3^{2−1/β}·K_σ²·𝒢_T·exp[T·β⁻¹·3^{2β−1}·L_σ^{2β}·(𝒢_{T,α}^{β/α} + 𝒢_T^β·T^{β/α})]`.
pub fn c_two_alpha(
    data: &LipschitzData,
    g_total: f64,
    g_alpha: f64,
    horizon: f64,
    length: f64,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    data.validate()?;
    if data.k_sigma <= 0.0 {
        return Err(Error::Domain("C_{2,α} needs K_σ > 0".into()));
    }
    if g_total < 0.0 || g_alpha < 0.0 || horizon <= 0.0 || length <= 0.0 {
        return Err(Error::Domain("C_{2,α} kernel functionals and extents must be ≥ 0".into()));
    }
    let (prefactor, exponent) =
        c_two_alpha_parts(data, g_total, g_alpha, horizon, length, alpha);
    let total = prefactor + exponent;
    if total.is_nan() || total >= f64::MAX.ln() {
        return Err(Error::Overflow { what: "C_{2,α}", exponent });
    }
    Ok((prefactor + exponent).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub beta: f64,
    pub value: f64,
    /// The minimizer sits on an end of [`ALPHA_BRACKET`].
    pub clamped: bool,
}

/// Minimize `C_{2,α}` over [`ALPHA_BRACKET`] by a coarse scan followed by
/// golden-section refinement of `ln C_{2,α}`.
pub fn optimize_alpha<F>(
    data: &LipschitzData,
    g_total: f64,
    g_alpha: F,
    horizon: f64,
    length: f64,
) -> Result<AlphaOptimum>
where
    F: Fn(f64) -> Result<f64>,
{
    let objective = |alpha: f64| -> f64 {
        match g_alpha(alpha) {
            Ok(ga) => {
                let (p, e) = c_two_alpha_parts(data, g_total, ga, horizon, length, alpha);
                let v = p + e;
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            }
            Err(_) => f64::INFINITY,
        }
    };
    data.validate()?;
    if data.k_sigma <= 0.0 {
        return Err(Error::Domain("C_{2,α} needs K_σ > 0".into()));
    }

    let (lo, hi) = ALPHA_BRACKET;
    const SCAN: usize = 64;
    let nodes: Vec<f64> = (0..=SCAN).map(|k| lo + (hi - lo) * k as f64 / SCAN as f64).collect();
    let values: Vec<f64> = nodes.iter().map(|&a| objective(a)).collect();
    let best = (0..=SCAN)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("scan is non-empty");
    if !values[best].is_finite() || values[best] >= f64::MAX.ln() {
        return Err(Error::Optimization(
            "C_{2,α} overflows or is undefined across the whole α-bracket".into(),
        ));
    }

    let mut a = nodes[best.saturating_sub(1)];
    let mut b = nodes[(best + 1).min(SCAN)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let interior = 0.5 * (a + b);
    let candidates = [(interior, objective(interior)), (lo, values[0]), (hi, values[SCAN])];
    let (alpha, log_value) = candidates
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("three candidates");
    let clamped = alpha == lo || alpha == hi || (alpha - lo) < 1e-9 || (hi - alpha) < 1e-9;
    Ok(AlphaOptimum { alpha, beta: beta(alpha), value: log_value.exp(), clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationBound {
    /// `exp(−r²/(8C))`
    pub bound: f64,
    /// `r₀ = 2·sqrt(2C·ln 2)`; the bound only holds for `r ≥ r₀`.
    pub r0: f64,
    pub valid: bool,
}

/// Concentration-function bound for a law in `T₁(C)`.
pub fn concentration_bound(c: f64, r: f64) -> Result<ConcentrationBound> {
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Domain(format!("C must be > 0, got {c}")));
    }
    let r0 = concentration_threshold(c);
    Ok(ConcentrationBound { bound: (-r * r / (8.0 * c)).exp(), r0, valid: r >= r0 })
}

pub fn concentration_threshold(c: f64) -> f64 {
    2.0 * (2.0 * c * std::f64::consts::LN_2).sqrt()
}

/// Sub-Gaussian moment-generating bound `exp(a²C/2)`.
pub fn mgf_bound(c: f64, a: f64) -> f64 {
    (a * a * c / 2.0).exp()
}

/// Constants reported for one model: the per-theorem values and the
/// `α`-optimized one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TciConstants {
    pub g_total: f64,
    /// `None` when the constant overflows.
    pub c_infinity: Option<f64>,
    /// `(α, 𝒢_{T,α}, C_{2,α})` on the requested α values.
    pub c_two: Vec<(f64, f64, Option<f64>)>,
    pub alpha_star: Option<AlphaOptimum>,
}

impl TciConstants {
    pub fn compute(table: &KernelTable, data: &LipschitzData, alphas: &[f64]) -> Result<Self> {
        data.validate()?;
        let grid = table.grid();
        let (horizon, length) = (grid.horizon(), grid.length());
        let g_total = table.g_total();
        let c_infinity = match c_infinity(g_total, data.l_g, horizon) {
            Ok(v) => Some(v),
            Err(Error::Overflow { .. }) => None,
            Err(e) => return Err(e),
        };
        let mut c_two = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let ga = table.g_const_alpha(alpha)?;
            let c = if data.k_sigma > 0.0 {
                c_two_alpha(data, g_total, ga, horizon, length, alpha).ok()
            } else {
                None
            };
            c_two.push((alpha, ga, c));
        }
        let alpha_star = if data.k_sigma > 0.0 {
            optimize_alpha(data, g_total, |a| table.g_const_alpha(a), horizon, length).ok()
        } else {
            None
        };
        Ok(Self { g_total, c_infinity, c_two, alpha_star })
    }
}
