//! Convergence diagnostics: uniform gaps, bi-Lipschitz envelopes, GH bounds
//! from almost isometries, the flat-distance proxy and trend verdicts.
//!
//! Sup-type statistics are maxima over sampled pairs and therefore lower
//! bounds on the true suprema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::{SamplePairSet, Solver};
use crate::geometry::{background_distance, check_eigenvalues, taxi_distance, Background, ConformalFactor, MetricSpec, Point};
use crate::numeric::loglog_slope;
use crate::par::{self, Execution};
use crate::quadrature::radial_distance;

/// |log-log slope| needed before a trend counts as convergence or divergence.
pub const SLOPE_THRESHOLD: f64 = 0.3;

/// A distance function on a fixed background.
pub trait DistanceOracle: Sync {
    fn background(&self) -> &Background;

    fn distance(&self, p: &Point, q: &Point) -> Result<f64>;

    /// Distances for many pairs; implementations may batch.
    fn distances(&self, pairs: &[(Point, Point)], exec: Execution) -> Result<Vec<f64>> {
        par::try_map_slice(exec, pairs, |(p, q)| self.distance(p, q))
    }

    /// Discretization length scale (`0` for closed forms).
    fn resolution(&self) -> f64 {
        0.0
    }

    /// Lower bound of the conformal factor, when known.
    fn factor_lower_bound(&self) -> Option<f64> {
        None
    }
}

/// Closed-form background distance `d₀`.
#[derive(Clone, Copy, Debug)]
pub struct BackgroundOracle(pub Background);

impl DistanceOracle for BackgroundOracle {
    fn background(&self) -> &Background {
        &self.0
    }

    fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        background_distance(&self.0, p, q)
    }

    fn factor_lower_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Closed-form taxi distance on a flat torus.
#[derive(Clone, Copy, Debug)]
pub struct TaxiOracle(pub Background);

impl DistanceOracle for TaxiOracle {
    fn background(&self) -> &Background {
        &self.0
    }

    fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        taxi_distance(&self.0, p, q)
    }
}

/// Node-snapped stencil distances. Batches group pairs by source node and
/// solve each group concurrently.
#[derive(Clone, Debug)]
pub struct MeshOracle {
    solver: Solver,
}

impl MeshOracle {
    pub fn new(solver: Solver) -> Self {
        MeshOracle { solver }
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }
}

impl DistanceOracle for MeshOracle {
    fn background(&self) -> &Background {
        self.solver.mesh().background()
    }

    fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.solver.distance(p, q)
    }

    fn distances(&self, pairs: &[(Point, Point)], exec: Execution) -> Result<Vec<f64>> {
        let mesh = self.solver.mesh();
        let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, (p, q)) in pairs.iter().enumerate() {
            let (a, b) = (mesh.nearest_node(p)?, mesh.nearest_node(q)?);
            groups.entry(a).or_default().push((i, b));
        }
        let groups: Vec<(usize, Vec<(usize, usize)>)> = groups.into_iter().collect();
        let solved = par::map_slice(exec, &groups, |(a, items)| {
            let targets: Vec<usize> = items.iter().map(|&(_, b)| b).collect();
            self.solver.node_distances(*a, &targets)
        });
        let mut out = vec![0.0; pairs.len()];
        for ((_, items), ds) in groups.iter().zip(solved) {
            for (&(i, _), d) in items.iter().zip(ds) {
                out[i] = d;
            }
        }
        Ok(out)
    }

    fn resolution(&self) -> f64 {
        self.solver.mesh().spacing() * self.solver.spec().factor.bounds().1
    }

    fn factor_lower_bound(&self) -> Option<f64> {
        Some(self.solver.spec().factor.bounds().0)
    }
}

fn same_background(a: &dyn DistanceOracle, b: &dyn DistanceOracle) -> Result<()> {
    if a.background() != b.background() {
        return Err(Error::Mismatch("oracles live on different backgrounds".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStatistic {
    pub eps: f64,
    pub argmax_pair: (Point, Point),
    pub pair_count: usize,
}

/// `max |d_A(p,q) − d_B(p,q)|` over the sampled pairs.
pub fn uniform_gap(a: &dyn DistanceOracle, b: &dyn DistanceOracle, pairs: &SamplePairSet, exec: Execution) -> Result<GapStatistic> {
    same_background(a, b)?;
    if pairs.is_empty() {
        return Err(Error::Empty("pair set".into()));
    }
    let da = a.distances(&pairs.pairs, exec)?;
    let db = b.distances(&pairs.pairs, exec)?;
    let mut best = (0.0, 0usize);
    for (i, (x, y)) in da.iter().zip(&db).enumerate() {
        let g = (x - y).abs();
        if g > best.0 {
            best = (g, i);
        }
    }
    Ok(GapStatistic {
        eps: best.0,
        argmax_pair: pairs.pairs[best.1].clone(),
        pair_count: pairs.len(),
    })
}

/// Gaps between consecutive members of a sequence on one pair set.
pub fn consecutive_gaps(seq: &[&dyn DistanceOracle], pairs: &SamplePairSet, exec: Execution) -> Result<Vec<GapStatistic>> {
    seq.windows(2).map(|w| uniform_gap(w[0], w[1], pairs, exec)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lo: f64,
    pub hi: f64,
    /// Pairs with `d₀ > 0`.
    pub used: usize,
}

/// `(min, max)` of `d_j / d₀` over pairs; coincident pairs are skipped.
pub fn bilipschitz_envelope(dj: &dyn DistanceOracle, d0: &dyn DistanceOracle, pairs: &SamplePairSet, exec: Execution) -> Result<Envelope> {
    same_background(dj, d0)?;
    let a = dj.distances(&pairs.pairs, exec)?;
    let b = d0.distances(&pairs.pairs, exec)?;
    let ratios: Vec<f64> = a.iter().zip(&b).filter(|(_, z)| **z > 0.0).map(|(x, z)| x / z).collect();
    if ratios.is_empty() {
        return Err(Error::Empty("every pair has d0 = 0".into()));
    }
    Ok(Envelope {
        lo: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        hi: ratios.iter().copied().fold(0.0, f64::max),
        used: ratios.len(),
    })
}

/// A map between two finite samples with its distortion and density defects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostIsometryWitness {
    /// `map[i]` is the target sample assigned to source sample `i`.
    pub map: Vec<usize>,
    pub delta_distortion: f64,
    pub delta_onto: f64,
}

impl AlmostIsometryWitness {
    /// Identity coordinate map on one sample set, compared under `d1` and `d2`.
    pub fn identity(d1: &dyn DistanceOracle, d2: &dyn DistanceOracle, points: &[Point], exec: Execution) -> Result<Self> {
        same_background(d1, d2)?;
        Self::from_map(d1, d2, points, points, (0..points.len()).collect(), exec)
    }

    /// General node map `source[i] ↦ target[map[i]]`.
    pub fn from_map(
        d1: &dyn DistanceOracle,
        d2: &dyn DistanceOracle,
        source: &[Point],
        target: &[Point],
        map: Vec<usize>,
        exec: Execution,
    ) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Empty("witness samples".into()));
        }
        if map.len() != source.len() || map.iter().any(|&t| t >= target.len()) {
            return Err(Error::param("map", "must assign a valid target to every source sample"));
        }
        let mut src_pairs = Vec::new();
        let mut img_pairs = Vec::new();
        for i in 0..source.len() {
            for k in i + 1..source.len() {
                src_pairs.push((source[i].clone(), source[k].clone()));
                img_pairs.push((target[map[i]].clone(), target[map[k]].clone()));
            }
        }
        let delta_distortion = if src_pairs.is_empty() {
            0.0
        } else {
            let a = d1.distances(&src_pairs, exec)?;
            let b = d2.distances(&img_pairs, exec)?;
            a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let mut image: Vec<usize> = map.clone();
        image.sort_unstable();
        image.dedup();
        let mut onto_pairs = Vec::new();
        let mut owner = Vec::new();
        for (t, p) in target.iter().enumerate() {
            if image.binary_search(&t).is_err() {
                for &s in &image {
                    onto_pairs.push((p.clone(), target[s].clone()));
                    owner.push(t);
                }
            }
        }
        let mut delta_onto = 0.0f64;
        if !onto_pairs.is_empty() {
            let d = d2.distances(&onto_pairs, exec)?;
            let mut nearest: BTreeMap<usize, f64> = BTreeMap::new();
            for (t, v) in owner.into_iter().zip(d) {
                let e = nearest.entry(t).or_insert(f64::INFINITY);
                *e = e.min(v);
            }
            delta_onto = nearest.values().copied().fold(0.0, f64::max);
        }
        Ok(AlmostIsometryWitness {
            map,
            delta_distortion,
            delta_onto,
        })
    }
}

/// `2 · max(δ_distortion, δ_onto)`.
pub fn gh_bound_from_map(witness: &AlmostIsometryWitness) -> f64 {
    2.0 * witness.delta_distortion.max(witness.delta_onto)
}

/// `2 ε λ^m Vol₀`, the flat-distance bound without its dimensional constant.
pub fn flat_bound_proxy(eps: f64, lambda: f64, vol0: f64, m: usize) -> f64 {
    2.0 * eps * lambda.powi(m as i32) * vol0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supports,
    Refutes,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Supports => "supports",
            Verdict::Refutes => "refutes",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Supports
        } else {
            Verdict::Refutes
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub verdict: Verdict,
    pub slope: f64,
    pub last: f64,
}

fn check_series(js: &[f64], values: &[f64]) -> Result<()> {
    if js.len() != values.len() {
        return Err(Error::Mismatch("series lengths differ".into()));
    }
    if js.len() < 4 {
        return Err(Error::param("rows", format!("trend needs >= 4 values of j, got {}", js.len())));
    }
    Ok(())
}

/// Convergence of `values` to `target`.
///
/// Supports when the final deviation is within `tol`, or the deviations
/// shrink with log-log slope ≤ −0.3. Refutes when the deviations stay bounded
/// away: slope above −0.3 and the final deviation more than half the first.
/// Inconclusive otherwise, e.g. a slow `1/ln j` decay.
pub fn trend_verdict(js: &[f64], values: &[f64], target: f64, tol: f64) -> Result<TrendVerdict> {
    check_series(js, values)?;
    let dev: Vec<f64> = values.iter().map(|v| (v - target).abs()).collect();
    let slope = loglog_slope(js, &dev);
    let last = *dev.last().unwrap();
    let verdict = if last <= tol || (slope <= -SLOPE_THRESHOLD && last < dev[0]) {
        Verdict::Supports
    } else if slope > -SLOPE_THRESHOLD && last > 0.5 * dev[0] {
        Verdict::Refutes
    } else {
        Verdict::Inconclusive
    };
    Ok(TrendVerdict { verdict, slope, last })
}

/// Volume convergence verdict; the same rule as [`trend_verdict`].
pub fn volume_convergence(js: &[f64], vols: &[f64], target: f64, tol: f64) -> Result<TrendVerdict> {
    trend_verdict(js, vols, target, tol)
}

/// Divergence: supports when `values` increase with log-log slope ≥ 0.3,
/// refutes when they stay bounded (slope below the threshold).
pub fn divergence_verdict(js: &[f64], values: &[f64]) -> Result<TrendVerdict> {
    check_series(js, values)?;
    let slope = loglog_slope(js, values);
    let increasing = values.windows(2).all(|w| w[1] >= w[0]);
    let verdict = if slope >= SLOPE_THRESHOLD && increasing {
        Verdict::Supports
    } else if slope < SLOPE_THRESHOLD {
        Verdict::Refutes
    } else {
        Verdict::Inconclusive
    };
    Ok(TrendVerdict {
        verdict,
        slope,
        last: *values.last().unwrap(),
    })
}

/// Ball-volume convergence for one ball whose per-j volumes were measured.
pub fn ball_volume_convergence(
    bg: &Background,
    js: &[f64],
    ball_volumes: &[f64],
    radius: f64,
    limit: f64,
    tol: f64,
) -> Result<TrendVerdict> {
    if bg.is_torus() && (radius - bg.side / 2.0).abs() < 0.1 {
        return Err(Error::param("radius", "must stay 0.1 away from the cut distance L/2"));
    }
    trend_verdict(js, ball_volumes, limit, tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetTrace {
    /// `Det^{1/m}`.
    pub lhs: f64,
    /// `Tr / m`.
    pub rhs: f64,
    pub det: f64,
    /// `|g|^m / m^{m/2}`.
    pub norm_bound: f64,
    pub ok: bool,
    /// All eigenvalues equal to within `1e−12` relative.
    pub equality: bool,
}

/// Determinant–trace (AM–GM) inequality for eigenvalues `λ_i²` of `g` rel. `g₀`.
pub fn det_trace_check(lams: &[f64]) -> Result<DetTrace> {
    check_eigenvalues(lams)?;
    let m = lams.len() as f64;
    let log_det: f64 = lams.iter().map(|l| l.ln()).sum();
    let lhs = (log_det / m).exp();
    let rhs = lams.iter().sum::<f64>() / m;
    let norm = lams.iter().map(|l| l * l).sum::<f64>().sqrt();
    let det = log_det.exp();
    let norm_bound = norm.powf(m) / m.powf(m / 2.0);
    let slack = 1e-12;
    let ok = lhs <= rhs * (1.0 + slack) && det <= norm_bound * (1.0 + 1e-9);
    let (lo, hi) = lams.iter().fold((f64::INFINITY, 0.0f64), |(a, b), l| (a.min(*l), b.max(*l)));
    Ok(DetTrace {
        lhs,
        rhs,
        det,
        norm_bound,
        ok,
        equality: hi - lo <= slack * hi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub fraction: f64,
    pub pair_count: usize,
    /// Indices of pairs that failed.
    pub exceptional: Vec<usize>,
    /// False when some member has a factor below 1 somewhere.
    pub hypothesis_ok: bool,
    pub tol: f64,
}

/// Fraction of pairs whose last gap to `d0` is below `tol` and whose gap
/// sequence never grows by more than `2·resolution` between consecutive `j`.
pub fn pointwise_ae_check(
    seq: &[&dyn DistanceOracle],
    d0: &dyn DistanceOracle,
    pairs: &SamplePairSet,
    tol: f64,
    exec: Execution,
) -> Result<PointwiseReport> {
    if seq.is_empty() {
        return Err(Error::Empty("oracle sequence".into()));
    }
    if pairs.len() < 100 {
        return Err(Error::param("pairs", format!("need >= 100 pairs, got {}", pairs.len())));
    }
    for o in seq {
        same_background(*o, d0)?;
    }
    let hypothesis_ok = seq.iter().all(|o| o.factor_lower_bound().map_or(true, |c| c >= 1.0 - 1e-12));
    let base = d0.distances(&pairs.pairs, exec)?;
    let mut gaps = Vec::with_capacity(seq.len());
    let mut slack = 0.0f64;
    for o in seq {
        let d = o.distances(&pairs.pairs, exec)?;
        gaps.push(d.iter().zip(&base).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>());
        slack = slack.max(2.0 * o.resolution());
    }
    let exceptional: Vec<usize> = (0..pairs.len())
        .filter(|&i| {
            let last = gaps[gaps.len() - 1][i];
            let monotone = gaps.windows(2).all(|w| w[1][i] <= w[0][i] + slack);
            !(last < tol && monotone)
        })
        .collect();
    Ok(PointwiseReport {
        fraction: 1.0 - exceptional.len() as f64 / pairs.len() as f64,
        pair_count: pairs.len(),
        exceptional,
        hypothesis_ok,
        tol,
    })
}

/// Packing lower bound for a multi-bump metric: balls of radius `radius`
/// around the bump centres are pairwise disjoint, so any ε-net with
/// `ε < radius` needs at least `count` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingCertificate {
    /// Distance from a centre to the edge of its innermost piece.
    pub radius: f64,
    pub count: usize,
    /// Certified lower bound on the distance between distinct centres.
    pub min_separation: f64,
}

/// Certifies `N(radius) ≥ k` for a [`ConformalFactor::MultiBump`] spec.
///
/// Any path between two centres leaves both bumps, so its length is at least
/// twice the radial distance across the innermost piece plus the flat gap
/// between supports.
pub fn packing_certificate(spec: &MetricSpec) -> Result<PackingCertificate> {
    let ConformalFactor::MultiBump { centers, pieces } = &spec.factor else {
        return Err(Error::Unsupported("packing certificate needs a multi-bump factor".into()));
    };
    let first = pieces.first().ok_or_else(|| Error::Empty("bump pieces".into()))?;
    let support = pieces.last().unwrap().end;
    let radius = radial_distance(pieces, first.end);
    let crossing = radial_distance(pieces, support);
    let bg = &spec.background;
    let mut min_separation = f64::INFINITY;
    for i in 0..centers.len() {
        for k in i + 1..centers.len() {
            let gap = bg.distance_raw(&centers[i].coords, &centers[k].coords) - 2.0 * support;
            min_separation = min_separation.min(2.0 * crossing + gap.max(0.0));
        }
    }
    let count = if centers.len() <= 1 || min_separation >= 2.0 * radius {
        centers.len()
    } else {
        1
    };
    Ok(PackingCertificate {
        radius,
        count,
        min_separation,
    })
}
