use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::examples::{ExampleId, ExampleParams};
use crate::geodesics::GridMesh;
use crate::geometry::Background;

pub const SCHEMA_VERSION: u32 = 1;

/// Reference metric for gap statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMetric {
    D0,
    Taxi,
}

impl TargetMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetMetric::D0 => "d0",
            TargetMetric::Taxi => "taxi",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub n: usize,
    pub stencil_order: u8,
    pub simpson_nodes: usize,
    /// Largest node count any single mesh may have.
    pub node_cap: usize,
    /// When set, the mesh at `j` has `2^(j + shift)` nodes per side.
    pub lattice_shift: Option<u32>,
    /// Halton sources for mesh diameter estimates.
    pub diameter_sources: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            n: 128,
            stencil_order: 3,
            simpson_nodes: 8,
            node_cap: 1 << 22,
            lattice_shift: None,
            diameter_sources: 8,
        }
    }
}

impl MeshConfig {
    pub fn n_for(&self, j: u64) -> Option<usize> {
        match self.lattice_shift {
            None => Some(self.n),
            Some(s) => {
                let e = j.checked_add(s as u64)?;
                (e < 40).then(|| 1usize << e)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub pair_count: usize,
    pub seed: u64,
    /// Points in almost-isometry witnesses.
    pub witness_points: usize,
    /// Snap sampled coordinates to multiples of `L · 2^-level`.
    pub lattice_level: Option<u32>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            pair_count: 200,
            seed: 1,
            witness_points: 16,
            lattice_level: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallVolConfig {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quantities {
    pub vol: bool,
    pub diam: bool,
    /// Exponents for `lp_dev` and `lp_norm` rows.
    pub lp: Vec<f64>,
    pub sup_dev: bool,
    pub eps_vs: Vec<TargetMetric>,
    pub gh_bound: bool,
    pub flat_proxy: bool,
    pub ball_vol: Option<BallVolConfig>,
    pub pointwise_ae: bool,
    pub envelope: bool,
    /// Equatorial antipodal distances (sphere only).
    pub equator: bool,
    pub construction: bool,
    pub packing: bool,
    /// Limit parameters `r` for spline radial distances.
    pub radial_distance: Vec<f64>,
}

impl Quantities {
    pub fn is_empty(&self) -> bool {
        *self == Quantities::default()
    }

    pub fn needs_mesh(&self, radial_diam: bool) -> bool {
        !self.eps_vs.is_empty()
            || self.gh_bound
            || self.flat_proxy
            || self.ball_vol.is_some()
            || self.pointwise_ae
            || self.envelope
            || self.equator
            || (self.diam && !radial_diam)
    }
}

/// One experiment: an example, a `j` schedule and the quantities to compute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub example_id: ExampleId,
    #[serde(default)]
    pub params: ExampleParams,
    pub j_schedule: Vec<u64>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    pub quantities: Quantities,
    /// Overrides the mesh tolerance `3(μ(k)−1)·Diam₀ + 8h`.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Grid resolution for non-radial volumes and norms.
    #[serde(default = "default_resolution")]
    pub quadrature_resolution: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_resolution() -> usize {
    512
}

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn new(example_id: ExampleId, j_schedule: Vec<u64>, quantities: Quantities) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            example_id,
            params: ExampleParams::default(),
            j_schedule,
            mesh: MeshConfig::default(),
            sampling: SamplingConfig::default(),
            quantities,
            tolerance: None,
            quadrature_resolution: default_resolution(),
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let path = e.span().map_or_else(|| "<document>".to_string(), |s| format!("byte {}..{}", s.start, s.end));
            cfg_err(&path, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash_hex(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        super::hex(&Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.j_schedule.len() < 4 {
            return Err(cfg_err(
                "j_schedule",
                format!("needs at least 4 values for trend verdicts, got {}", self.j_schedule.len()),
            ));
        }
        if self.j_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(cfg_err("j_schedule", "must be strictly increasing"));
        }
        if self.j_schedule[0] < 2 {
            return Err(cfg_err("j_schedule", "every j must be >= 2"));
        }
        if self.quantities.is_empty() {
            return Err(cfg_err("quantities", "select at least one quantity"));
        }
        self.params
            .validate(self.example_id)
            .map_err(|e| cfg_err("params", e.to_string()))?;
        let q = &self.quantities;
        if let Some(p) = q.lp.iter().find(|p| !(**p >= 1.0)) {
            return Err(cfg_err("quantities.lp", format!("exponent {p} must be >= 1")));
        }
        if let Some(b) = &q.ball_vol {
            if b.centers.is_empty() || b.radii.is_empty() {
                return Err(cfg_err("quantities.ball_vol", "needs centers and radii"));
            }
            if let Some(r) = b.radii.iter().find(|r| !(**r > 0.0)) {
                return Err(cfg_err("quantities.ball_vol.radii", format!("radius {r} must be positive")));
            }
        }
        if q.equator && !self.example_id.on_sphere() {
            return Err(cfg_err("quantities.equator", "equatorial distances need the sphere example"));
        }
        if q.packing && self.example_id != ExampleId::ManySplines {
            return Err(cfg_err("quantities.packing", "packing certificates need the multi-bump example"));
        }
        if q.construction && self.example_id != ExampleId::Bubble {
            return Err(cfg_err("quantities.construction", "the construction integral belongs to the bubble example"));
        }
        if !q.radial_distance.is_empty() && self.example_id != ExampleId::Spline {
            return Err(cfg_err("quantities.radial_distance", "radial spline distances belong to the spline example"));
        }
        if q.eps_vs.contains(&TargetMetric::Taxi) && self.example_id.on_sphere() {
            return Err(cfg_err("quantities.eps_vs", "taxi distance is defined on tori only"));
        }
        if q.pointwise_ae && self.sampling.pair_count < 100 {
            return Err(cfg_err("sampling.pair_count", "pointwise checks need >= 100 pairs"));
        }
        if self.sampling.pair_count == 0 {
            return Err(cfg_err("sampling.pair_count", "must be >= 1"));
        }
        if self.mesh.n < 16 {
            return Err(cfg_err("mesh.n", "must be >= 16"));
        }
        if !(1..=3).contains(&self.mesh.stencil_order) {
            return Err(cfg_err("mesh.stencil_order", "must be 1, 2 or 3"));
        }
        if self.mesh.diameter_sources < 4 {
            return Err(cfg_err("mesh.diameter_sources", "must be >= 4"));
        }
        if self.quadrature_resolution < 8 {
            return Err(cfg_err("quadrature_resolution", "must be >= 8"));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(cfg_err("tolerance", "must be positive"));
            }
        }
        Ok(())
    }

    /// Fails with a budget error naming the first `j` whose mesh is too large.
    pub fn check_budget(&self, bg: &Background) -> Result<()> {
        for &j in &self.j_schedule {
            let nodes = self
                .mesh
                .n_for(j)
                .map_or(usize::MAX, |n| GridMesh::planned_nodes(bg, n));
            if nodes > self.mesh.node_cap {
                return Err(Error::Budget {
                    j,
                    nodes,
                    cap: self.mesh.node_cap,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1
example_id = "bump_C0_3_2"
j_schedule = [4, 8, 16, 32]

[params]
K = 3.0

[mesh]
n = 64

[quantities]
vol = true
lp = [1.0, 2.0]
eps_vs = ["d0"]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.example_id, ExampleId::BumpC0);
        assert_eq!(cfg.mesh.n, 64);
        assert_eq!(cfg.mesh.stencil_order, 3);
        assert_eq!(cfg.quantities.eps_vs, vec![TargetMetric::D0]);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash_hex(), cfg.hash_hex());
    }

    #[test]
    fn rejects_short_schedule() {
        let text = SAMPLE.replace("[4, 8, 16, 32]", "[4, 8]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "j_schedule"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = SAMPLE.replace("vol = true", "vol = true\nvolume = true");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn rejects_bad_params() {
        let text = SAMPLE.replace("K = 3.0", "K = 0.5");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "params"));
    }

    #[test]
    fn budget_names_the_offending_j() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        cfg.mesh.lattice_shift = Some(5);
        cfg.mesh.node_cap = 1 << 20;
        let err = cfg.check_budget(&Background::standard_torus(2)).unwrap_err();
        assert!(matches!(err, Error::Budget { j: 8, .. }), "{err}");
    }
}
