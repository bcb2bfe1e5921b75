//! Stencil graphs on the background and shortest-path distances under `g = f² g₀`.

mod field;
mod mesh;
mod pairs;
mod solver;

use serde::{Deserialize, Serialize};

pub use field::{DistanceField, FieldHeader, CSV_NODE_LIMIT};
pub use mesh::{build_mesh, metrication_factor, GridMesh};
pub use pairs::{halton_points, sample_pairs, SamplePairSet};
pub use solver::{Solver, BUMP_SIMPSON_NODES, DEFAULT_SIMPSON_NODES};


use crate::error::{Error, Result};
use crate::geometry::{MetricSpec, Point};
use crate::par::Execution;

/// Single-source distance field under `spec`.
pub fn solve_distance(spec: &MetricSpec, mesh: &GridMesh, source: &Point, simpson_nodes: usize) -> Result<DistanceField> {
    Solver::new(spec, mesh, simpson_nodes)?.solve(source)
}

/// Node-snapped discrete distance between `p` and `q`.
pub fn distance(spec: &MetricSpec, mesh: &GridMesh, p: &Point, q: &Point) -> Result<f64> {
    Solver::new(spec, mesh, DEFAULT_SIMPSON_NODES)?.distance(p, q)
}

/// Sampled diameter with the interval implied by the stencil factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterEstimate {
    /// Max over computed fields of the max node value.
    pub value: f64,
    /// `value / μ(k) − 2h·sup f`.
    pub lo: f64,
    /// `value + 2h·sup f`.
    pub hi: f64,
    pub sources: usize,
}

/// Max eccentricity over `sources` Halton-placed source fields.
pub fn diameter_estimate(spec: &MetricSpec, mesh: &GridMesh, sources: usize) -> Result<DiameterEstimate> {
    diameter_estimate_with(&Solver::new(spec, mesh, DEFAULT_SIMPSON_NODES)?, sources, Execution::default())
}

pub fn diameter_estimate_with(solver: &Solver, sources: usize, exec: Execution) -> Result<DiameterEstimate> {
    if sources < 4 {
        return Err(Error::param("sources", format!("must be >= 4, got {sources}")));
    }
    let mesh = solver.mesh();
    let points = halton_points(mesh.background(), sources);
    let nodes: Vec<usize> = points
        .iter()
        .map(|p| mesh.nearest_node(p))
        .collect::<Result<_>>()?;
    let maxima = crate::par::map_slice(exec, &nodes, |&s| solver.solve_node(s).into_iter().fold(0.0, f64::max));
    let value = maxima.into_iter().fold(0.0, f64::max);
    let slack = 2.0 * mesh.spacing() * solver.spec().factor.bounds().1;
    Ok(DiameterEstimate {
        value,
        lo: (value / mesh.metrication_factor() - slack).max(0.0),
        hi: value + slack,
        sources,
    })
}
