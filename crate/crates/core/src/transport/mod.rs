//! Empirical Wasserstein-2 distances between equal-weight point clouds and
//! concentration checks for sampled laws.

mod assignment;
mod concentration;
mod sinkhorn;

pub use assignment::{assignment, wasserstein2_exact, EXACT_CAP};
pub use concentration::{concentration_profile, ConcentrationProfile, MgfPoint, TailPoint};
pub use sinkhorn::{wasserstein2_entropic, SinkhornOptions};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{CoupledPair, FieldPath};
use crate::stats::{mean, Bootstrap, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Max over all grid nodes.
    Sup,
    /// Space-time `L²` over slices `1..=nt`.
    L2,
    Euclidean,
}

/// A metric on flat vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    Sup,
    /// `sqrt(weight · Σ (a−b)²)`
    WeightedL2 { weight: f64 },
}

impl Metric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Metric::Sup => a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs())),
            Metric::WeightedL2 { weight } => {
                (weight * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sqrt()
            }
        }
    }
}

/// Equal-weight empirical measure in a metric space of flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    points: Vec<Vec<f64>>,
    metric: Metric,
}

impl SampleCloud {
    pub fn new(points: Vec<Vec<f64>>, metric: Metric) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Config("sample cloud is empty".into()));
        };
        let dim = first.len();
        if let Some(k) = points.iter().position(|p| p.len() != dim) {
            return Err(Error::GridMismatch(format!(
                "point {k} has dimension {}, expected {dim}",
                points[k].len()
            )));
        }
        Ok(Self { points, metric })
    }

    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(points, Metric::WeightedL2 { weight: 1.0 })
    }

    /// Field paths on one shared grid, compared without interpolation.
    pub fn from_paths<'a, I>(paths: I, kind: MetricKind) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FieldPath>,
    {
        let mut grid = None;
        let mut points = Vec::new();
        for path in paths {
            let g = *path.grid();
            match grid {
                None => grid = Some(g),
                Some(ref first) => first.ensure_same(&g, "sample cloud")?,
            }
            points.push(match kind {
                MetricKind::L2 => path.values()[g.nx()..].to_vec(),
                _ => path.values().to_vec(),
            });
        }
        let grid = grid.ok_or_else(|| Error::Config("sample cloud is empty".into()))?;
        Self::new(points, metric_for(kind, grid.cell_measure()))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn compatible(&self, other: &SampleCloud) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::GridMismatch(format!(
                "clouds have dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        if self.metric != other.metric {
            return Err(Error::Config("clouds use different metrics".into()));
        }
        Ok(())
    }
}

fn metric_for(kind: MetricKind, cell_measure: f64) -> Metric {
    match kind {
        MetricKind::Sup => Metric::Sup,
        MetricKind::L2 => Metric::WeightedL2 { weight: cell_measure },
        MetricKind::Euclidean => Metric::WeightedL2 { weight: 1.0 },
    }
}

/// Squared distances `ρ(a_i, b_j)²`, rows built in parallel.
pub fn cost_matrix(a: &SampleCloud, b: &SampleCloud) -> Result<DMatrix<f64>> {
    a.compatible(b)?;
    let rows: Vec<Vec<f64>> = a
        .points
        .par_iter()
        .map(|p| {
            b.points
                .iter()
                .map(|q| {
                    let d = a.metric.distance(p, q);
                    d * d
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportMethod {
    ExactAssignment,
    Entropic,
    CouplingUpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub w2: f64,
    pub method: TransportMethod,
    /// Entropic regularization.
    pub epsilon: Option<f64>,
    /// Primal transport cost minus a feasible dual value, in squared units.
    /// The exact `W₂²` lies within this distance below `w2²`.
    pub dual_gap: Option<f64>,
    pub iterations: Option<usize>,
    /// Bootstrap interval on `w2`, for the coupling bound.
    pub interval: Option<Estimate>,
}

/// `sqrt(Ẽ ρ(u, v)²)` over the pairs of a coupling, which bounds `W₂`
/// between the two marginals from above.
pub fn coupling_upper_bound(
    pairs: &[CoupledPair],
    kind: MetricKind,
    bootstrap: &Bootstrap,
) -> Result<TransportResult> {
    if pairs.is_empty() {
        return Err(Error::Config("coupling bound needs at least one pair".into()));
    }
    let mut sq = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let d = match kind {
            MetricKind::L2 => pair.u.difference(&pair.v)?.l2_norm(),
            _ => pair.u.difference(&pair.v)?.sup_norm(),
        };
        sq.push(d * d);
    }
    let interval = bootstrap.estimate(sq.len(), |idx| {
        mean(&idx.iter().map(|&i| sq[i]).collect::<Vec<_>>()).sqrt()
    });
    Ok(TransportResult {
        w2: interval.value,
        method: TransportMethod::CouplingUpperBound,
        epsilon: None,
        dual_gap: None,
        iterations: None,
        interval: Some(interval),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::heat_kernel::Boundary;

    #[test]
    fn path_metrics_match_norms() {
        let grid = Grid::new(1.0, 2.0, 3, 4).unwrap();
        let a = FieldPath::new(&grid, Boundary::Neumann, vec![1.0; 16]).unwrap();
        let b = FieldPath::new(&grid, Boundary::Neumann, vec![0.5; 16]).unwrap();
        let l2 = SampleCloud::from_paths([&a, &b], MetricKind::L2).unwrap();
        let d = l2.metric().distance(&l2.points()[0], &l2.points()[1]);
        assert!((d - a.difference(&b).unwrap().l2_norm()).abs() < 1e-14);
        let sup = SampleCloud::from_paths([&a, &b], MetricKind::Sup).unwrap();
        assert_eq!(sup.metric().distance(&sup.points()[0], &sup.points()[1]), 0.5);
    }

    #[test]
    fn constant_offset_coupling() {
        let grid = Grid::new(2.0, 3.0, 4, 5).unwrap();
        let u = FieldPath::new(&grid, Boundary::Neumann, vec![1.0; 25]).unwrap();
        let v = FieldPath::new(&grid, Boundary::Neumann, vec![0.25; 25]).unwrap();
        let pairs = vec![CoupledPair { u, v, drift_energy: 0.0 }; 3];
        let r = coupling_upper_bound(&pairs, MetricKind::L2, &Bootstrap::default()).unwrap();
        assert!((r.w2 - 0.75 * 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_clouds_are_rejected() {
        let a = SampleCloud::euclidean(vec![vec![0.0, 1.0]]).unwrap();
        let b = SampleCloud::euclidean(vec![vec![0.0]]).unwrap();
        assert!(cost_matrix(&a, &b).is_err());
        assert!(SampleCloud::euclidean(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }
}
