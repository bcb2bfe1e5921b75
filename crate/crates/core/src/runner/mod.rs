//! Config-driven experiment runs: per-`j` diagnostics, claim verdicts and
//! emitted artifacts with a content-hashed manifest.

mod config;
mod report;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{BallVolConfig, ExperimentConfig, MeshConfig, Quantities, SamplingConfig, TargetMetric, SCHEMA_VERSION};
pub use report::{apply_claims, emit, ClaimVerdict, ConvergenceReport, Format, ReportRow, CSV_HEADER};

use crate::convergence::{
    bilipschitz_envelope, flat_bound_proxy, gh_bound_from_map, packing_certificate, pointwise_ae_check, trend_verdict,
    uniform_gap, AlmostIsometryWitness, BackgroundOracle, DistanceOracle, MeshOracle, TaxiOracle, Verdict,
};
use crate::error::{Error, Result};
use crate::examples::{
    claims_with, closed_form_diameter, construction_integral, make_example, spline_radial_distance, ExampleId,
};
use crate::geodesics::{build_mesh, diameter_estimate_with, halton_points, sample_pairs, SamplePairSet, Solver};
use crate::geometry::{Background, ConformalFactor, MetricSpec, Point};
use crate::par::{self, Execution};
use crate::quadrature::{self, RegionSpec};

/// Tolerance recorded on quadrature rows.
pub const QUADRATURE_TOL: f64 = 1e-6;

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowProvenance {
    pub j: u64,
    pub quantity: String,
    pub p_or_radius: Option<f64>,
    pub method: String,
    pub mesh: Option<String>,
    pub tolerance: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub example_id: ExampleId,
    pub config_hash: String,
    pub exit_code: i32,
    pub files: Vec<FileEntry>,
    pub rows: Vec<RowProvenance>,
    pub total_wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed_override: Option<u64>,
    pub exec: Execution,
    pub formats: Vec<Format>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: None,
            threads: None,
            seed_override: None,
            exec: Execution::default(),
            formats: Format::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: ConvergenceReport,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.manifest.exit_code
    }
}

/// Computes the report, writes the artifacts and `manifest.json`.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed_override {
        cfg.sampling.seed = seed;
    }
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.example_id.as_str()));
    let (report, provenance) = par::with_threads(opts.threads, || compute_report(&cfg, opts.exec))?;
    let written = emit(&report, &out_dir, &opts.formats)?;
    let mut files = Vec::with_capacity(written.len());
    for path in &written {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        files.push(FileEntry {
            path: relative(path, &out_dir),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        example_id: cfg.example_id,
        config_hash: report.config_hash.clone(),
        exit_code: report.exit_code(),
        files,
        rows: provenance,
        total_wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(RunOutcome {
        report,
        manifest,
        out_dir,
    })
}

fn relative(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned()
}

/// Pairs for gap statistics, optionally snapped to a coarse lattice.
pub fn experiment_pairs(bg: &Background, sampling: &SamplingConfig) -> Result<SamplePairSet> {
    let Some(level) = sampling.lattice_level else {
        return sample_pairs(bg, sampling.pair_count, sampling.seed);
    };
    if !bg.is_torus() {
        return Err(Error::param("sampling.lattice_level", "lattice snapping needs a torus"));
    }
    let step = bg.side / 2f64.powi(level as i32);
    let snap = |p: &Point| -> Result<Point> {
        let c: Vec<f64> = p.coords.iter().map(|x| (x / step).round() * step % bg.side).collect();
        bg.point(&c)
    };
    let raw = sample_pairs(bg, sampling.pair_count * 4, sampling.seed)?;
    let mut pairs = Vec::with_capacity(sampling.pair_count);
    for (p, q) in &raw.pairs {
        let (a, b) = (snap(p)?, snap(q)?);
        if a != b {
            pairs.push((a, b));
        }
        if pairs.len() == sampling.pair_count {
            break;
        }
    }
    if pairs.len() < sampling.pair_count {
        return Err(Error::param("sampling.lattice_level", "lattice too coarse for the requested pair count"));
    }
    Ok(SamplePairSet {
        pairs,
        seed: sampling.seed,
    })
}

/// Antipodal pairs on the equator at azimuths `kπ/4`, `k = 0..4`.
pub fn equator_pairs(bg: &Background) -> Result<Vec<(Point, Point)>> {
    (0..4)
        .map(|k| {
            let phi = k as f64 * PI / 4.0;
            Ok((bg.point(&[PI / 2.0, phi])?, bg.point(&[PI / 2.0, phi + PI])?))
        })
        .collect()
}

/// `3(μ(k) − 1)·Diam₀ + 8h`.
pub fn mesh_tolerance(bg: &Background, stencil_order: u8, h: f64) -> f64 {
    3.0 * (crate::geodesics::metrication_factor(stencil_order) - 1.0) * bg.diameter() + 8.0 * h
}

struct Row {
    row: ReportRow,
    mesh: Option<String>,
    wall_ms: f64,
}

struct JOutput {
    rows: Vec<Row>,
    oracle: Option<MeshOracle>,
    tol: f64,
}

fn radial_diameter_available(spec: &MetricSpec) -> bool {
    spec.background.is_torus()
        && matches!(spec.factor, ConformalFactor::RadialPiecewise { .. } | ConformalFactor::MultiBump { .. })
}

fn quad_method(spec: &MetricSpec) -> &'static str {
    quadrature::volume_method(spec).as_str()
}

fn target_oracle(t: TargetMetric, bg: Background) -> Box<dyn DistanceOracle> {
    match t {
        TargetMetric::D0 => Box::new(BackgroundOracle(bg)),
        TargetMetric::Taxi => Box::new(TaxiOracle(bg)),
    }
}

fn compute_j(cfg: &ExperimentConfig, j: u64, pairs: &SamplePairSet, exec: Execution) -> Result<JOutput> {
    let id = cfg.example_id;
    let spec = make_example(id, j, &cfg.params)?;
    let bg = spec.background;
    let q = &cfg.quantities;
    let res = cfg.quadrature_resolution;
    let radial_diam = radial_diameter_available(&spec);
    let mut rows: Vec<Row> = Vec::new();
    let mut mesh_desc = None;
    let mut tol = cfg.tolerance.unwrap_or(QUADRATURE_TOL);
    let mut oracle = None;
    if q.needs_mesh(radial_diam) {
        let n = cfg.mesh.n_for(j).ok_or(Error::Budget {
            j,
            nodes: usize::MAX,
            cap: cfg.mesh.node_cap,
        })?;
        let mesh = build_mesh(&bg, n, cfg.mesh.stencil_order)?;
        tol = cfg
            .tolerance
            .unwrap_or_else(|| mesh_tolerance(&bg, cfg.mesh.stencil_order, mesh.spacing()));
        mesh_desc = Some(format!(
            "{} n={} k={}",
            if bg.is_torus() { "torus" } else { "sphere" },
            n,
            cfg.mesh.stencil_order
        ));
        oracle = Some(MeshOracle::new(Solver::with_execution(&spec, &mesh, cfg.mesh.simpson_nodes, exec)?));
    }
    let mut push = |row: ReportRow, mesh: bool, started: Instant| {
        rows.push(Row {
            row,
            mesh: if mesh { mesh_desc.clone() } else { None },
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    };
    let row = |quantity: &str, value: f64, method: &str, tolerance: f64| ReportRow::new(id, j, quantity, value, method, tolerance);

    if q.vol {
        let t = Instant::now();
        let v = quadrature::volume(&spec, &RegionSpec::WholeManifold, res)?;
        push(row("vol", v, quad_method(&spec), QUADRATURE_TOL), false, t);
    }
    if q.diam {
        let t = Instant::now();
        if radial_diam {
            push(row("diam", closed_form_diameter(&spec)?, "radial-exact", QUADRATURE_TOL), false, t);
        } else {
            let o = oracle.as_ref().expect("mesh built for diameter");
            let est = diameter_estimate_with(o.solver(), cfg.mesh.diameter_sources, exec)?;
            push(row("diam", est.value, "mesh", tol).with_interval(est.lo, est.hi), true, t);
        }
    }
    for &p in &q.lp {
        let t = Instant::now();
        let dev = quadrature::lp_factor_deviation_power(&spec, p, res)?;
        let norm = quadrature::lp_factor_power(&spec, p, res)?;
        let method = quad_method(&spec);
        push(row("lp_dev", quadrature::lp_factor_deviation(&spec, p, res)?, method, QUADRATURE_TOL).with_param(p), false, t);
        push(row("lp_dev_power", dev, method, QUADRATURE_TOL).with_param(p), false, t);
        push(row("lp_norm", quadrature::lp_factor_norm(&spec, p, res)?, method, QUADRATURE_TOL).with_param(p), false, t);
        push(row("lp_norm_power", norm, method, QUADRATURE_TOL).with_param(p), false, t);
    }
    if q.sup_dev {
        let t = Instant::now();
        let v = quadrature::sup_deviation(&spec, res)?;
        let method = if spec.factor.radial().is_some() || matches!(spec.factor, ConformalFactor::MultiBump { .. }) {
            "radial-exact"
        } else {
            "grid"
        };
        push(row("sup_dev", v, method, QUADRATURE_TOL), false, t);
    }
    if let Some(o) = &oracle {
        let d0 = BackgroundOracle(bg);
        let mut eps_d0 = None;
        for &target in &q.eps_vs {
            let t = Instant::now();
            let other = target_oracle(target, bg);
            let gap = uniform_gap(o, other.as_ref(), pairs, exec)?;
            if target == TargetMetric::D0 {
                eps_d0 = Some(gap.eps);
            }
            push(row(&format!("eps_vs_{}", target.as_str()), gap.eps, "mesh", tol), true, t);
        }
        let mut hi_ratio = None;
        if q.envelope || q.flat_proxy {
            let t = Instant::now();
            let mut env_pairs = pairs.clone();
            if !bg.is_torus() {
                env_pairs.pairs.extend(equator_pairs(&bg)?);
            }
            let env = bilipschitz_envelope(o, &d0, &env_pairs, exec)?;
            hi_ratio = Some(env.hi);
            if q.envelope {
                push(row("envelope_lo", env.lo, "mesh", tol), true, t);
                push(row("envelope_hi", env.hi, "mesh", tol), true, t);
            }
        }
        if q.gh_bound {
            let t = Instant::now();
            let target = q.eps_vs.first().copied().unwrap_or(TargetMetric::D0);
            let other = target_oracle(target, bg);
            let pts = halton_points(&bg, cfg.sampling.witness_points);
            let w = AlmostIsometryWitness::identity(o, other.as_ref(), &pts, exec)?;
            push(row("gh_bound", gh_bound_from_map(&w), &format!("mesh:{}", target.as_str()), tol), true, t);
        }
        if q.flat_proxy {
            let t = Instant::now();
            let eps = match eps_d0 {
                Some(e) => e,
                None => uniform_gap(o, &d0, pairs, exec)?.eps,
            };
            let lambda = hi_ratio.expect("envelope computed").max(1.0);
            let v = flat_bound_proxy(eps, lambda, bg.volume(), bg.dim);
            push(row("flat_proxy", v, "mesh", tol), true, t);
        }
        if let Some(b) = &q.ball_vol {
            let h = o.solver().mesh().spacing();
            let mu = o.solver().mesh().metrication_factor();
            for (ci, c) in b.centers.iter().enumerate() {
                let t = Instant::now();
                let field = o.solver().solve(&bg.point(c)?)?;
                for &r in &b.radii {
                    let v = quadrature::ball_volume(&spec, &field, r)?;
                    let ball_tol = cfg
                        .tolerance
                        .unwrap_or(PI * r * r * (1.0 - 1.0 / (mu * mu)) + 4.0 * PI * r * h);
                    push(row(&format!("ball_vol_c{ci}"), v, "mesh", ball_tol).with_param(r), true, t);
                }
            }
        }
        if q.equator {
            let t = Instant::now();
            let d = o.distances(&equator_pairs(&bg)?, exec)?;
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
            push(row("equator_distance", hi, "mesh", tol).with_interval(lo, hi), true, t);
        }
    }
    if q.construction {
        let t = Instant::now();
        let v = construction_integral(j, &cfg.params)?;
        push(row("construction_integral", v, "simpson", QUADRATURE_TOL), false, t);
    }
    if q.packing {
        let t = Instant::now();
        let cert = packing_certificate(&spec)?;
        push(
            row("packing_count", cert.count as f64, "radial-exact", 0.0).with_interval(cert.radius, cert.min_separation),
            false,
            t,
        );
    }
    for &r in &q.radial_distance {
        let t = Instant::now();
        let v = spline_radial_distance(j, &cfg.params, r)?;
        push(row("radial_distance", v, "radial-exact", QUADRATURE_TOL).with_param(r), false, t);
    }
    Ok(JOutput { rows, oracle, tol })
}

/// Examples whose claimed limit has the background's ball volumes.
fn ball_limit_is_background(id: ExampleId) -> bool {
    matches!(id, ExampleId::BumpC0 | ExampleId::GrowingBump | ExampleId::Spline)
}

/// Computes every requested row and the claim verdicts without writing files.
pub fn compute_report(cfg: &ExperimentConfig, exec: Execution) -> Result<(ConvergenceReport, Vec<RowProvenance>)> {
    cfg.validate()?;
    let id = cfg.example_id;
    let bg = make_example(id, cfg.j_schedule[0], &cfg.params)?.background;
    cfg.check_budget(&bg)?;
    let pairs = experiment_pairs(&bg, &cfg.sampling)?;
    let outputs = par::try_map_slice(exec, &cfg.j_schedule, |&j| compute_j(cfg, j, &pairs, exec))?;
    let js = &cfg.j_schedule;
    let mut rows: Vec<Row> = Vec::new();
    let mut notes = Vec::new();
    let oracles: Vec<&MeshOracle> = outputs.iter().filter_map(|o| o.oracle.as_ref()).collect();
    let q = &cfg.quantities;
    if oracles.len() == js.len() {
        if !q.eps_vs.is_empty() {
            for (i, w) in oracles.windows(2).enumerate() {
                let t = Instant::now();
                let gap = uniform_gap(w[0], w[1], &pairs, exec)?;
                rows.push(Row {
                    row: ReportRow::new(id, js[i + 1], "eps_consecutive", gap.eps, "mesh", outputs[i + 1].tol),
                    mesh: None,
                    wall_ms: t.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
        if q.pointwise_ae {
            let t = Instant::now();
            let seq: Vec<&dyn DistanceOracle> = oracles.iter().map(|o| *o as &dyn DistanceOracle).collect();
            let d0 = BackgroundOracle(bg);
            let tol = outputs.last().unwrap().tol;
            let rep = pointwise_ae_check(&seq, &d0, &pairs, tol, exec)?;
            notes.push(format!(
                "pointwise_ae: pair tolerance {tol}, {} exceptional of {} pairs, hypothesis f >= 1 {}",
                rep.exceptional.len(),
                rep.pair_count,
                if rep.hypothesis_ok { "holds" } else { "violated" }
            ));
            rows.push(Row {
                row: ReportRow::new(id, *js.last().unwrap(), "pointwise_ae", rep.fraction, "mesh", 0.0),
                mesh: None,
                wall_ms: t.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    for o in outputs {
        rows.extend(o.rows);
    }
    rows.sort_by_key(|r| r.row.j);
    let (rows, provenance): (Vec<ReportRow>, Vec<RowProvenance>) = rows
        .into_iter()
        .map(|r| {
            let prov = RowProvenance {
                j: r.row.j,
                quantity: r.row.quantity.clone(),
                p_or_radius: r.row.p_or_radius,
                method: r.row.method.clone(),
                mesh: r.mesh,
                tolerance: r.row.tolerance,
                wall_ms: r.wall_ms,
            };
            (r.row, prov)
        })
        .unzip();
    let mut report = ConvergenceReport {
        example_id: id,
        config_hash: cfg.hash_hex(),
        rows,
        verdicts: Vec::new(),
        notes,
    };
    apply_claims(&mut report, &claims_with(id, &cfg.params));
    if let Some(b) = &q.ball_vol {
        ball_verdicts(&mut report, &bg, b, ball_limit_is_background(id))?;
    }
    Ok((report, provenance))
}

fn ball_verdicts(report: &mut ConvergenceReport, bg: &Background, b: &BallVolConfig, gated: bool) -> Result<()> {
    for ci in 0..b.centers.len() {
        let quantity = format!("ball_vol_c{ci}");
        for &r in &b.radii {
            let idx: Vec<usize> = (0..report.rows.len())
                .filter(|&i| report.rows[i].quantity == quantity && report.rows[i].p_or_radius == Some(r))
                .collect();
            if idx.len() < 4 {
                continue;
            }
            let js: Vec<f64> = idx.iter().map(|&i| report.rows[i].j as f64).collect();
            let vals: Vec<f64> = idx.iter().map(|&i| report.rows[i].value).collect();
            let tol = report.rows[idx[0]].tolerance;
            let limit = bg.ball_volume(r);
            let t = crate::convergence::ball_volume_convergence(bg, &js, &vals, r, limit, tol)
                .or_else(|_| trend_verdict(&js, &vals, limit, tol))?;
            for &i in &idx {
                report.rows[i].verdict = Some(t.verdict);
            }
            if gated {
                report.verdicts.push(ClaimVerdict {
                    claim: format!("{quantity}_r{r}"),
                    quantity: quantity.clone(),
                    label: format!("ball volume converges to {limit:.6}"),
                    verdict: t.verdict,
                    slope: Some(t.slope),
                    anchor: "Vol_j(B(p,r)) → H^m_{d_∞}(B(p,r))".into(),
                });
            } else {
                report.notes.push(format!("{quantity} r={r}: {} against the background ball", t.verdict));
            }
        }
    }
    Ok(())
}

/// Whether every verdict in the report supports its claim.
pub fn all_supported(report: &ConvergenceReport) -> bool {
    report.verdicts.iter().all(|v| v.verdict == Verdict::Supports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(id: ExampleId, js: Vec<u64>, q: Quantities) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(id, js, q);
        cfg.mesh.n = 32;
        cfg.sampling.pair_count = 100;
        cfg
    }

    #[test]
    fn diverging_volume_run_exits_zero() {
        let cfg = quick(
            ExampleId::Diverging,
            vec![10, 100, 1000, 10000],
            Quantities {
                vol: true,
                ..Default::default()
            },
        );
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let out = run(&cfg, &opts).unwrap();
        assert_eq!(out.exit_code(), 0);
        assert_eq!(out.report.verdict("vol").unwrap().line(), "diverges: supports");
        let names: Vec<&str> = out.manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, vec!["report.csv", "summary.json", "vol.dat"]);
        for f in &out.manifest.files {
            let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), f.sha256);
        }
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn mesh_run_is_deterministic_across_modes() {
        let cfg = quick(
            ExampleId::BumpC0,
            vec![4, 8, 16, 32],
            Quantities {
                vol: true,
                eps_vs: vec![TargetMetric::D0],
                envelope: true,
                ..Default::default()
            },
        );
        let (a, _) = compute_report(&cfg, Execution::Sequential).unwrap();
        let (b, _) = compute_report(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.rows.windows(2).all(|w| w[0].j <= w[1].j));
    }

    #[test]
    fn lattice_pairs_snap() {
        let bg = Background::flat_torus(2, 1.0).unwrap();
        let s = SamplingConfig {
            pair_count: 50,
            seed: 3,
            witness_points: 4,
            lattice_level: Some(3),
        };
        let pairs = experiment_pairs(&bg, &s).unwrap();
        assert_eq!(pairs.len(), 50);
        for (p, q) in &pairs.pairs {
            for x in p.coords.iter().chain(&q.coords) {
                assert!(((x * 8.0) - (x * 8.0).round()).abs() < 1e-9);
            }
            assert_ne!(p, q);
        }
    }
}
