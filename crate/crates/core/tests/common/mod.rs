//! Randomized property suites shared by the acceptance harness and the
//! per-property test target. Each suite runs `TRIALS` cases from a fixed seed.

#![allow(dead_code)]

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use conflab_core::convergence::{bilipschitz_envelope, det_trace_check, uniform_gap, BackgroundOracle, MeshOracle, TaxiOracle};
use conflab_core::examples::ExampleId;
use conflab_core::geodesics::{build_mesh, sample_pairs, GridMesh, Solver, DEFAULT_SIMPSON_NODES};
use conflab_core::geometry::{tensor_norm, Background, ConformalFactor, EigenSample, EigenvalueField, MetricSpec, Point, RadialPiece, RampShape};
use conflab_core::par::Execution;
use conflab_core::quadrature::{self, BallMetric, RegionSpec};
use conflab_core::runner::{compute_report, ExperimentConfig, Quantities, TargetMetric};

pub const TRIALS: u32 = 1000;

pub type Suite = fn() -> Result<(), String>;

pub const SUITES: [(&str, Suite); 8] = [
    ("determinant-trace inequality", det_trace),
    ("tensor norm of a conformal factor", conformal_tensor_norm),
    ("Lp reverse triangle inequality", reverse_triangle),
    ("volume lower bound", volume_lower_bound),
    ("edge-domination envelope", edge_domination),
    ("solver symmetry and triangle inequality", solver_metric),
    ("uniform gap triangle inequality", gap_triangle),
    ("pipeline determinism", pipeline_determinism),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn torus() -> Background {
    Background::standard_torus(2)
}

/// Plateau `height` on `[0, r]`, cubic ramp to 1 on `[r, 2r]`.
fn bump_spec(bg: Background, center: [f64; 2], r: f64, height: f64) -> MetricSpec {
    let pieces = vec![
        RadialPiece::constant(0.0, r, height),
        RadialPiece::ramp(r, 2.0 * r, height, 1.0, RampShape::Cubic),
        RadialPiece::constant(2.0 * r, bg.diameter(), 1.0),
    ];
    let factor = ConformalFactor::RadialPiecewise {
        center: Point::new(center.to_vec()),
        pieces,
    };
    MetricSpec::new(bg, factor, "bump").unwrap()
}

fn bump_strategy(lo: f64, hi: f64) -> impl Strategy<Value = ([f64; 2], f64, f64)> {
    let l = 2.0 * PI;
    ([0.0..l, 0.0..l], 0.2f64..1.2, lo..hi)
}

pub fn det_trace() -> Result<(), String> {
    let strat = (prop::collection::vec(0.01f64..100.0, 1..=5), 0.01f64..100.0);
    runner(TRIALS)
        .run(&strat, |(lams, c)| {
            let d = det_trace_check(&lams).map_err(|e| TestCaseError::fail(e.to_string()))?;
            check(d.ok && d.lhs <= d.rhs * (1.0 + 1e-12), || format!("{lams:?}: {d:?}"))?;
            let spread = lams.iter().cloned().fold(0.0, f64::max) / lams.iter().cloned().fold(f64::INFINITY, f64::min);
            check(d.equality == (spread - 1.0 <= 1e-12), || format!("equality flag on {lams:?}"))?;
            let flat = det_trace_check(&vec![c; lams.len()]).unwrap();
            check(flat.equality && (flat.lhs - flat.rhs).abs() <= 1e-12 * c, || format!("equal tuple {c}"))
        })
        .map_err(|e| e.to_string())
}

pub fn conformal_tensor_norm() -> Result<(), String> {
    runner(TRIALS)
        .run(&(0.01f64..10.0, 1usize..=6), |(f, m)| {
            let got = tensor_norm(&vec![f * f; m]).unwrap();
            let want = (m as f64).sqrt() * f * f;
            check((got - want).abs() <= 1e-12 * want, || format!("f={f} m={m}: {got} vs {want}"))
        })
        .map_err(|e| e.to_string())
}

pub fn reverse_triangle() -> Result<(), String> {
    let strat = (1usize..=4).prop_flat_map(|m| {
        (
            prop::collection::vec((0.01f64..1.0, prop::collection::vec(0.01f64..10.0, m)), 1..20),
            1.0f64..8.0,
        )
    });
    runner(TRIALS)
        .run(&strat, |(raw, p)| {
            let samples: Vec<EigenSample> = raw
                .iter()
                .map(|(w, e)| EigenSample {
                    weight: *w,
                    eigenvalues: e.clone(),
                })
                .collect();
            let ones: Vec<EigenSample> = raw
                .iter()
                .map(|(w, e)| EigenSample {
                    weight: *w,
                    eigenvalues: vec![1.0; e.len()],
                })
                .collect();
            let g = EigenvalueField::new(samples).unwrap();
            let g0 = EigenvalueField::new(ones).unwrap();
            let a = quadrature::lp_tensor_norm(&g, p, false).unwrap();
            let b = quadrature::lp_tensor_norm(&g0, p, false).unwrap();
            let dev = quadrature::lp_tensor_norm(&g, p, true).unwrap();
            check((a - b).abs() <= dev + 1e-12 * a.max(b), || format!("p={p}: |{a} - {b}| > {dev}"))
        })
        .map_err(|e| e.to_string())
}

pub fn volume_lower_bound() -> Result<(), String> {
    let bg = torus();
    let flat = MetricSpec::background_metric(bg);
    let strat = (2u64..1000).prop_flat_map(|j| {
        let floor = (1.0 - 1.0 / j as f64).sqrt();
        (Just(j), bump_strategy(floor, 3.0), [0.0..2.0 * PI, 0.0..2.0 * PI], 0.1f64..3.0)
    });
    runner(TRIALS)
        .run(&strat, |(j, (c, r, h), ball_c, ball_r)| {
            let spec = bump_spec(bg, c, r, h);
            let scale = (1.0 - 1.0 / j as f64).powf(bg.dim as f64 / 2.0);
            let ball = RegionSpec::MetricBall {
                center: Point::new(ball_c.to_vec()),
                radius: ball_r,
                under: BallMetric::Background,
            };
            for region in [RegionSpec::WholeManifold, ball] {
                let vj = quadrature::volume(&spec, &region, 64).unwrap();
                let v0 = quadrature::volume(&flat, &region, 64).unwrap();
                check(vj >= scale * v0 * (1.0 - 1e-12), || format!("j={j} h={h}: {vj} < {scale}·{v0}"))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn meshes() -> Vec<GridMesh> {
    (1..=3).map(|k| build_mesh(&torus(), 16, k).unwrap()).collect()
}

pub fn edge_domination() -> Result<(), String> {
    let bg = torus();
    let meshes = meshes();
    let flat: Vec<MeshOracle> = meshes
        .iter()
        .map(|m| MeshOracle::new(Solver::new(&MetricSpec::background_metric(bg), m, DEFAULT_SIMPSON_NODES).unwrap()))
        .collect();
    runner(TRIALS)
        .run(&(bump_strategy(1.0, 4.0), 0usize..3, any::<u64>()), |((c, r, h), k, seed)| {
            let spec = bump_spec(bg, c, r, h);
            let oracle = MeshOracle::new(Solver::new(&spec, &meshes[k], DEFAULT_SIMPSON_NODES).unwrap());
            let pairs = sample_pairs(&bg, 12, seed).unwrap();
            let env = bilipschitz_envelope(&oracle, &flat[k], &pairs, Execution::Sequential).unwrap();
            check(env.lo >= 1.0 - 1e-12 && env.hi <= h + 1e-9, || format!("k={} h={h}: {env:?}", k + 1))
        })
        .map_err(|e| e.to_string())
}

pub fn solver_metric() -> Result<(), String> {
    let bg = torus();
    let mesh = build_mesh(&bg, 16, 3).unwrap();
    let n = mesh.node_count();
    runner(TRIALS)
        .run(&(bump_strategy(0.3, 4.0), 0..n, 0..n, 0..n), |((c, r, h), a, b, x)| {
            let solver = Solver::new(&bump_spec(bg, c, r, h), &mesh, DEFAULT_SIMPSON_NODES).unwrap();
            let ab = solver.node_distance(a, b);
            let ba = solver.node_distance(b, a);
            check((ab - ba).abs() <= 1e-9 * ab.max(1.0), || format!("asymmetric {a},{b}: {ab} vs {ba}"))?;
            let ax = solver.node_distance(a, x);
            let xb = solver.node_distance(x, b);
            check(ab <= ax + xb + 1e-9, || format!("triangle {a},{x},{b}: {ab} > {ax} + {xb}"))
        })
        .map_err(|e| e.to_string())
}

pub fn gap_triangle() -> Result<(), String> {
    let bg = torus();
    let mesh = build_mesh(&bg, 16, 2).unwrap();
    let strat = (bump_strategy(0.3, 4.0), bump_strategy(0.3, 4.0), 0u8..3, any::<u64>());
    runner(TRIALS)
        .run(&strat, |((c1, r1, h1), (c2, r2, h2), third, seed)| {
            let a = MeshOracle::new(Solver::new(&bump_spec(bg, c1, r1, h1), &mesh, DEFAULT_SIMPSON_NODES).unwrap());
            let b = MeshOracle::new(Solver::new(&bump_spec(bg, c2, r2, h2), &mesh, DEFAULT_SIMPSON_NODES).unwrap());
            let d0 = BackgroundOracle(bg);
            let taxi = TaxiOracle(bg);
            let c: &dyn conflab_core::convergence::DistanceOracle = match third {
                0 => &d0,
                1 => &taxi,
                _ => &a,
            };
            let pairs = sample_pairs(&bg, 12, seed).unwrap();
            let gap = |x: &dyn conflab_core::convergence::DistanceOracle, y: &dyn conflab_core::convergence::DistanceOracle| {
                uniform_gap(x, y, &pairs, Execution::Sequential).unwrap().eps
            };
            let (ac, ab, bc) = (gap(&a, c), gap(&a, &b), gap(&b, c));
            check(ac <= ab + bc + 1e-12, || format!("{ac} > {ab} + {bc}"))
        })
        .map_err(|e| e.to_string())
}

pub fn pipeline_determinism() -> Result<(), String> {
    let ids = [ExampleId::BumpC0, ExampleId::GrowingBump, ExampleId::Bubble, ExampleId::Diverging];
    let strat = (0usize..ids.len(), prop::collection::btree_set(2u64..64, 4..=5), any::<u64>(), any::<bool>());
    runner(TRIALS)
        .run(&strat, |(which, js, seed, mesh)| {
            let q = Quantities {
                vol: true,
                lp: vec![1.0, 2.0],
                sup_dev: true,
                eps_vs: if mesh { vec![TargetMetric::D0] } else { Vec::new() },
                ..Default::default()
            };
            let mut cfg = ExperimentConfig::new(ids[which], js.into_iter().collect(), q);
            cfg.mesh.n = 16;
            cfg.sampling.pair_count = 20;
            cfg.sampling.seed = seed;
            cfg.quadrature_resolution = 64;
            let (a, pa) = compute_report(&cfg, Execution::Sequential).unwrap();
            let (b, pb) = compute_report(&cfg, Execution::Parallel).unwrap();
            let (c, _) = compute_report(&cfg, Execution::Parallel).unwrap();
            check(a.to_csv() == b.to_csv() && b.to_csv() == c.to_csv(), || "csv differs".into())?;
            check(a.to_json() == b.to_json() && b.to_json() == c.to_json(), || "json differs".into())?;
            check(pa.len() == pb.len() && a.plot_data() == b.plot_data(), || "artifacts differ".into())
        })
        .map_err(|e| e.to_string())
}
