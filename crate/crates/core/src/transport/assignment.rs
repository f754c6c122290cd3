//! Exact optimal assignment by the shortest augmenting path method with
//! row and column potentials, `O(n³)`.

use nalgebra::DMatrix;

use super::{cost_matrix, SampleCloud, TransportMethod, TransportResult};
use crate::error::{Error, Result};

/// Largest cloud size handled by the exact method.
pub const EXACT_CAP: usize = 512;

/// Minimum-cost perfect matching of a square cost matrix; `result[i]` is the
/// column assigned to row `i`.
pub fn assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square matrix");
    // 1-based arrays, index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for j in 1..=n {
        result[matched[j] - 1] = j - 1;
    }
    result
}

/// `W₂` between two equal-size equal-weight clouds by exact assignment.
pub fn wasserstein2_exact(a: &SampleCloud, b: &SampleCloud) -> Result<TransportResult> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "exact assignment needs equal sizes, got {} and {}; use the entropic method",
            a.len(),
            b.len()
        )));
    }
    if a.len() > EXACT_CAP {
        return Err(Error::Config(format!(
            "exact assignment is capped at n = {EXACT_CAP}, got {}; use the entropic method",
            a.len()
        )));
    }
    let cost = cost_matrix(a, b)?;
    let plan = assignment(&cost);
    // Summing the matched costs in sorted order makes the result independent
    // of which cloud comes first.
    let mut total: Vec<f64> = plan.iter().enumerate().map(|(i, &j)| cost[(i, j)]).collect();
    total.sort_by(f64::total_cmp);
    let w2 = (crate::stats::pairwise_sum(&total) / a.len() as f64).max(0.0).sqrt();
    Ok(TransportResult {
        w2,
        method: TransportMethod::ExactAssignment,
        epsilon: None,
        dual_gap: Some(0.0),
        iterations: None,
        interval: None,
    })
}
