//! Empirical moment-generating function and tails of a scalar functional
//! against the sub-Gaussian bounds implied by a transportation-cost
//! inequality with constant `C`.

use serde::{Deserialize, Serialize};

use crate::constants::{concentration_threshold, mgf_bound};
use crate::error::{Error, Result};
use crate::stats::{mean, median, Bootstrap, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfPoint {
    pub a: f64,
    pub empirical: Estimate,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub r: f64,
    /// Larger of the upper and lower exceedance fractions around the median.
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `r ≥ r₀`, where the bound applies.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub c: f64,
    pub mean: f64,
    pub median: f64,
    pub r0: f64,
    pub mgf: Vec<MgfPoint>,
    pub tails: Vec<TailPoint>,
    /// Empirical MGF at most 2 standard errors above the bound everywhere.
    pub mgf_dominated: bool,
    /// Empirical tails at most 2 standard errors above the bound for `r ≥ r₀`.
    pub tails_dominated: bool,
}

/// MGF on `a_points` nodes of `[−3/√C, 3/√C]` and tails on `r_points` radii
/// from `r₀` to the largest observed deviation (at least `3·r₀`).
pub fn concentration_profile(
    values: &[f64],
    c: f64,
    a_points: usize,
    r_points: usize,
    bootstrap: &Bootstrap,
) -> Result<ConcentrationProfile> {
    if values.len() < 2 {
        return Err(Error::Domain("concentration profile needs at least 2 samples".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("C must be finite and > 0, got {c}")));
    }
    if a_points < 2 || r_points < 1 {
        return Err(Error::Domain("need ≥ 2 MGF nodes and ≥ 1 tail radius".into()));
    }
    let n = values.len() as f64;
    let centre = mean(values);
    let med = median(values);
    let centred: Vec<f64> = values.iter().map(|v| v - centre).collect();

    let a_max = 3.0 / c.sqrt();
    let mgf: Vec<MgfPoint> = (0..a_points)
        .map(|k| {
            let a = -a_max + 2.0 * a_max * k as f64 / (a_points - 1) as f64;
            let e: Vec<f64> = centred.iter().map(|x| (a * x).exp()).collect();
            MgfPoint { a, empirical: bootstrap.mean(&e), bound: mgf_bound(c, a) }
        })
        .collect();

    let r0 = concentration_threshold(c);
    let spread = values.iter().fold(0.0f64, |m, v| m.max((v - med).abs()));
    let r_max = spread.max(3.0 * r0);
    let tails: Vec<TailPoint> = (0..r_points)
        .map(|k| {
            let r = if r_points == 1 {
                r0
            } else {
                r0 + (r_max - r0) * k as f64 / (r_points - 1) as f64
            };
            let up = values.iter().filter(|&&v| v > med + r).count() as f64 / n;
            let down = values.iter().filter(|&&v| v < med - r).count() as f64 / n;
            let p = up.max(down);
            TailPoint {
                r,
                empirical: p,
                std_error: (p * (1.0 - p) / n).sqrt(),
                bound: (-r * r / (8.0 * c)).exp(),
                valid: r >= r0,
            }
        })
        .collect();

    let mgf_dominated = mgf.iter().all(|m| m.empirical.value <= m.bound + 2.0 * m.empirical.std_error);
    let tails_dominated =
        tails.iter().filter(|t| t.valid).all(|t| t.empirical <= t.bound + 2.0 * t.std_error);
    Ok(ConcentrationProfile { c, mean: centre, median: med, r0, mgf, tails, mgf_dominated, tails_dominated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_unit_mgf() {
        let p = concentration_profile(&[2.5; 50], 1.0, 11, 5, &Bootstrap::default()).unwrap();
        for m in &p.mgf {
            assert!((m.empirical.value - 1.0).abs() < 1e-15);
            assert!(m.empirical.value <= m.bound);
        }
        assert!(p.mgf_dominated && p.tails_dominated);
        assert!(p.tails.iter().all(|t| t.empirical == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(concentration_profile(&[1.0], 1.0, 5, 5, &Bootstrap::default()).is_err());
        assert!(concentration_profile(&[1.0, 2.0], 0.0, 5, 5, &Bootstrap::default()).is_err());
    }
}
