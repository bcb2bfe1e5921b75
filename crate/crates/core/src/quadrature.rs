//! Volumes, radial diameters, Lᵖ norms and ball volumes.
//!
//! Radial factors on tori (and on spheres, around a pole) go through exact
//! radial quadrature: constant and reciprocal-log pieces use their
//! antiderivatives, ramp pieces composite Simpson with [`RAMP_NODES`] nodes.
//! Everything else falls back to a midpoint cell sum.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::DistanceField;
use crate::geometry::{BackgroundKind, ConformalFactor, EigenvalueField, MetricSpec, Point, Profile, RadialPiece};
use crate::numeric::{simpson, unit_sphere_area};
use crate::par::{self, Execution};

pub const RAMP_NODES: usize = 256;
const LOG_NODES: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RadialExact,
    Grid,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::RadialExact => "radial-exact",
            Method::Grid => "grid",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallMetric {
    Background,
    Spec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    WholeManifold,
    MetricBall {
        center: Point,
        radius: f64,
        under: BallMetric,
    },
}

/// Lᵖ exponent: a finite `p ≥ 1`, `∞`, or `m/2` resolved against the dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    Finite(f64),
    Infinity,
    HalfDim,
}

impl Exponent {
    pub fn resolve(self, m: usize) -> Result<f64> {
        let p = match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
            Exponent::HalfDim => m as f64 / 2.0,
        };
        if !(p >= 1.0) {
            return Err(Error::param("p", format!("must be >= 1, got {p}")));
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormTarget {
    /// `‖f − 1‖_{Lᵖ}`
    FactorDeviation,
    /// `‖g‖_{Lᵖ}` with `|g|_{g₀}` pointwise
    TensorNorm,
    /// `‖g − g₀‖_{Lᵖ}`
    TensorDeviation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRequest {
    pub p: Exponent,
    pub target: NormTarget,
}

// ---------------------------------------------------------------------------
// radial machinery

#[derive(Clone, Copy)]
enum Integrand {
    /// `f^p − 1`
    PowerExcess(f64),
    /// `|f − 1|^p`
    DeviationPower(f64),
}

impl Integrand {
    fn eval(self, f: f64) -> f64 {
        match self {
            Integrand::PowerExcess(p) => f.powf(p) - 1.0,
            Integrand::DeviationPower(p) => (f - 1.0).abs().powf(p),
        }
    }
}

fn is_unit(piece: &RadialPiece) -> bool {
    matches!(piece.profile, Profile::Constant { value } if value == 1.0)
}

/// `∫_a^b F(f(r)) r^{m−1} dr` over one torus piece.
fn torus_piece_integral(piece: &RadialPiece, m: usize, what: Integrand) -> f64 {
    let (a, b) = (piece.start, piece.end);
    let mi = m as i32;
    let shell = (b.powi(mi) - a.powi(mi)) / m as f64;
    match (piece.profile, what) {
        (Profile::Constant { value }, w) => w.eval(value) * shell,
        (Profile::ReciprocalLog, Integrand::PowerExcess(p)) if p == m as f64 && m > 1 => {
            // r^{m-1} (r(1 - ln r))^{-m} = r^{-1} u^{-m},  u = 1 - ln r
            let ua = 1.0 - a.ln();
            let ub = 1.0 - b.ln();
            (ub.powi(1 - mi) - ua.powi(1 - mi)) / (m as f64 - 1.0) - shell
        }
        (Profile::ReciprocalLog, w) => {
            // log-spaced Simpson: r = e^t, dr = r dt
            let g = |t: f64| {
                let r = t.exp();
                w.eval(piece.value(r)) * r.powi(mi)
            };
            simpson(g, a.ln(), b.ln(), LOG_NODES)
        }
        (Profile::Ramp { .. }, w) => simpson(|r| w.eval(piece.value(r)) * r.powi(mi - 1), a, b, RAMP_NODES),
    }
}

/// `∫_a^b F(f(r)) sin^{m−1} r dr` over one sphere piece.
fn sphere_piece_integral(piece: &RadialPiece, m: usize, what: Integrand) -> f64 {
    let (a, b) = (piece.start, piece.end);
    let mi = m as i32;
    match piece.profile {
        Profile::Constant { value } if m == 2 => what.eval(value) * (a.cos() - b.cos()),
        _ => simpson(|r| what.eval(piece.value(r)) * r.sin().powi(mi - 1), a, b, RAMP_NODES),
    }
}

/// `∫_M F(f) dV₀` for a radial or multi-bump factor, or `None` when no radial
/// form applies.
fn radial_integral(spec: &MetricSpec, what: Integrand) -> Option<f64> {
    let bg = &spec.background;
    let m = bg.dim;
    let (pieces, copies) = match &spec.factor {
        ConformalFactor::RadialPiecewise { pieces, .. } => (pieces.as_slice(), 1usize),
        ConformalFactor::MultiBump { centers, pieces } if bg.is_torus() => (pieces.as_slice(), centers.len()),
        _ => return None,
    };
    let sphere_area = unit_sphere_area(m);
    match bg.kind {
        BackgroundKind::FlatTorus => {
            let (_, support) = spec.factor.bump_support()?;
            if support > bg.injectivity_radius() {
                return None;
            }
            let mut acc = 0.0;
            for p in pieces.iter().filter(|p| p.start < support && !is_unit(p)) {
                acc += torus_piece_integral(p, m, what);
            }
            Some(copies as f64 * sphere_area * acc)
        }
        BackgroundKind::RoundSphere => {
            // radial about the centre, which may be any point
            let sum: f64 = pieces
                .iter()
                .filter(|p| !is_unit(p))
                .map(|p| sphere_piece_integral(p, m, what))
                .sum();
            Some(sphere_area * sum)
        }
    }
}

/// Midpoint-rule `∫ F(f) dV₀` over the whole manifold, optionally restricted by `keep`.
fn grid_integral<G, K>(spec: &MetricSpec, resolution: usize, exec: Execution, value: G, keep: K) -> Result<f64>
where
    G: Fn(f64) -> f64 + Sync + Send,
    K: Fn(&[f64]) -> bool + Sync + Send,
{
    let bg = &spec.background;
    if resolution < 8 {
        return Err(Error::param("resolution", format!("must be >= 8, got {resolution}")));
    }
    match bg.kind {
        BackgroundKind::FlatTorus => {
            let m = bg.dim;
            let h = bg.side / resolution as f64;
            let cell = h.powi(m as i32);
            let total = resolution.checked_pow(m as u32).ok_or_else(|| Error::param("resolution", "too large"))?;
            let sum = par::sum_chunked(exec, total, |idx| {
                let mut x = [0.0f64; 16];
                let mut rest = idx;
                for c in x.iter_mut().take(m) {
                    *c = (rest % resolution) as f64 * h + h / 2.0;
                    rest /= resolution;
                }
                if keep(&x[..m]) {
                    value(spec.factor.eval_raw(bg, &x[..m]))
                } else {
                    0.0
                }
            });
            Ok(sum * cell)
        }
        BackgroundKind::RoundSphere => {
            if bg.dim != 2 {
                return Err(Error::Unsupported("sphere grid integration needs dim 2".into()));
            }
            let nr = resolution;
            let nphi = 2 * resolution;
            let dr = PI / nr as f64;
            let dphi = 2.0 * PI / nphi as f64;
            let sum = par::sum_chunked(exec, nr * nphi, |idx| {
                let i = idx / nphi;
                let k = idx % nphi;
                let r0 = i as f64 * dr;
                let area = dphi * (r0.cos() - (r0 + dr).cos());
                let x = [r0 + dr / 2.0, (k as f64 + 0.5) * dphi];
                if keep(&x) {
                    value(spec.factor.eval_raw(bg, &x)) * area
                } else {
                    0.0
                }
            });
            Ok(sum)
        }
    }
}

// ---------------------------------------------------------------------------
// public operations

/// Which method [`volume`] will use for the whole manifold.
pub fn volume_method(spec: &MetricSpec) -> Method {
    if matches!(spec.factor, ConformalFactor::Constant { .. }) || radial_integral(spec, Integrand::PowerExcess(1.0)).is_some() {
        Method::RadialExact
    } else {
        Method::Grid
    }
}

/// `∫_region f^m dV₀`.
pub fn volume(spec: &MetricSpec, region: &RegionSpec, resolution: usize) -> Result<f64> {
    volume_with(spec, region, resolution, Execution::default())
}

pub fn volume_with(spec: &MetricSpec, region: &RegionSpec, resolution: usize, exec: Execution) -> Result<f64> {
    let bg = &spec.background;
    let m = bg.dim as f64;
    match region {
        RegionSpec::WholeManifold => {
            if let ConformalFactor::Constant { value } = spec.factor {
                return Ok(value.powf(m) * bg.volume());
            }
            if let Some(excess) = radial_integral(spec, Integrand::PowerExcess(m)) {
                return Ok(bg.volume() + excess);
            }
            grid_integral(spec, resolution, exec, |f| f.powf(m), |_| true)
        }
        RegionSpec::MetricBall { center, radius, under } => {
            bg.check(center)?;
            match under {
                BallMetric::Spec => Err(Error::MissingDistanceField),
                BallMetric::Background => {
                    if *radius > bg.diameter() {
                        return Err(Error::param("radius", "exceeds the background diameter"));
                    }
                    let c = center.coords.clone();
                    let r = *radius;
                    grid_integral(spec, resolution, exec, |f| f.powf(m), move |x| bg.distance_raw(&c, x) < r)
                }
            }
        }
    }
}

/// `Vol_g(M) − Vol_{g₀}(M)` without cancellation for radial factors.
pub fn volume_excess(spec: &MetricSpec, resolution: usize) -> Result<f64> {
    let m = spec.dim() as f64;
    if let Some(excess) = radial_integral(spec, Integrand::PowerExcess(m)) {
        return Ok(excess);
    }
    Ok(volume(spec, &RegionSpec::WholeManifold, resolution)? - spec.background.volume())
}

/// `∫₀^{Diam₀} f dr` along a radial ray from the factor's centre.
pub fn radial_diameter(spec: &MetricSpec) -> Result<f64> {
    match &spec.factor {
        ConformalFactor::Constant { value } => Ok(value * spec.background.diameter()),
        ConformalFactor::RadialPiecewise { pieces, .. } => Ok(pieces.iter().map(piece_length).sum()),
        _ => Err(Error::Unsupported("radial diameter needs a single-centre radial factor".into())),
    }
}

/// `∫_a^b f dr` over one piece.
pub fn piece_length(piece: &RadialPiece) -> f64 {
    let (a, b) = (piece.start, piece.end);
    match piece.profile {
        Profile::Constant { value } => value * (b - a),
        Profile::ReciprocalLog => ((1.0 - a.ln()) / (1.0 - b.ln())).ln(),
        Profile::Ramp { .. } => simpson(|r| piece.value(r), a, b, RAMP_NODES),
    }
}

/// Radial distance `∫₀^ρ f dr` from the centre to radius `ρ`.
pub fn radial_distance(pieces: &[RadialPiece], rho: f64) -> f64 {
    let mut acc = 0.0;
    for p in pieces {
        if p.start >= rho {
            break;
        }
        if p.end <= rho {
            acc += piece_length(p);
        } else {
            acc += piece_length(&RadialPiece { end: rho, ..*p });
        }
    }
    acc
}

/// `∫ |f − 1|^p dV₀`, the un-rooted deviation integral. `p = ∞` returns `sup |f − 1|`.
pub fn lp_factor_deviation_power(spec: &MetricSpec, p: f64, resolution: usize) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return sup_deviation(spec, resolution);
    }
    if let ConformalFactor::Constant { value } = spec.factor {
        return Ok((value - 1.0).abs().powf(p) * spec.background.volume());
    }
    if let Some(v) = radial_integral(spec, Integrand::DeviationPower(p)) {
        return Ok(v);
    }
    grid_integral(spec, resolution, Execution::default(), |f| (f - 1.0).abs().powf(p), |_| true)
}

/// `‖f − 1‖_{Lᵖ(M, g₀)} = (∫ |f − 1|^p dV₀)^{1/p}`.
pub fn lp_factor_deviation(spec: &MetricSpec, p: f64, resolution: usize) -> Result<f64> {
    let v = lp_factor_deviation_power(spec, p, resolution)?;
    Ok(if p.is_infinite() { v } else { v.powf(1.0 / p) })
}

/// `∫ f^p dV₀`.
pub fn lp_factor_power(spec: &MetricSpec, p: f64, resolution: usize) -> Result<f64> {
    check_p_positive(p)?;
    if let ConformalFactor::Constant { value } = spec.factor {
        return Ok(value.powf(p) * spec.background.volume());
    }
    if let Some(excess) = radial_integral(spec, Integrand::PowerExcess(p)) {
        return Ok(spec.background.volume() + excess);
    }
    grid_integral(spec, resolution, Execution::default(), |f| f.powf(p), |_| true)
}

/// `‖f‖_{Lᵖ(M, g₀)}`.
pub fn lp_factor_norm(spec: &MetricSpec, p: f64, resolution: usize) -> Result<f64> {
    if p.is_infinite() {
        return Ok(spec.factor.bounds().1);
    }
    Ok(lp_factor_power(spec, p, resolution)?.powf(1.0 / p))
}

/// `ess sup |f − 1|`.
pub fn sup_deviation(spec: &MetricSpec, resolution: usize) -> Result<f64> {
    match &spec.factor {
        ConformalFactor::Constant { value } => Ok((value - 1.0).abs()),
        ConformalFactor::RadialPiecewise { pieces, .. } | ConformalFactor::MultiBump { pieces, .. } => {
            // monotone pieces: extremes sit at the endpoints
            Ok(pieces
                .iter()
                .flat_map(|p| [p.value(p.start), p.value(p.end)])
                .map(|v| (v - 1.0).abs())
                .fold(0.0, f64::max))
        }
        ConformalFactor::LatticeCorridor { .. } => {
            // lower bound on the essential sup from a dense midpoint sample
            let bg = &spec.background;
            let h = bg.side / resolution as f64;
            let n = resolution * resolution;
            let vals = par::map_range(Execution::default(), n, |idx| {
                let x = [(idx % resolution) as f64 * h + h / 2.0, (idx / resolution) as f64 * h + h / 2.0];
                (spec.factor.eval_raw(bg, &x) - 1.0).abs()
            });
            Ok(vals.into_iter().fold(0.0, f64::max))
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::param("p", format!("must be >= 1, got {p}")))
    }
}

fn check_p_positive(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param("p", format!("must be positive and finite, got {p}")))
    }
}

/// Weighted Lᵖ norm of `|g|_{g₀}` (or of `|g − g₀|_{g₀}` when `deviation`).
pub fn lp_tensor_norm(field: &EigenvalueField, p: f64, deviation: bool) -> Result<f64> {
    check_p(p)?;
    if field.is_empty() {
        return Err(Error::Empty("eigenvalue field".into()));
    }
    let mut values = Vec::with_capacity(field.samples.len());
    for s in &field.samples {
        crate::geometry::check_eigenvalues(&s.eigenvalues)?;
        let v = if deviation {
            crate::geometry::deviation_norm(&s.eigenvalues)?
        } else {
            crate::geometry::tensor_norm(&s.eigenvalues)?
        };
        values.push((s.weight, v));
    }
    if p.is_infinite() {
        return Ok(values.iter().filter(|(w, _)| *w > 0.0).map(|(_, v)| *v).fold(0.0, f64::max));
    }
    let sum: f64 = values.iter().map(|(w, v)| w * v.powf(p)).sum();
    Ok(sum.powf(1.0 / p))
}

/// Dispatches a [`NormRequest`] for a conformal metric.
pub fn evaluate_norm(spec: &MetricSpec, req: NormRequest, resolution: usize) -> Result<f64> {
    let m = spec.dim();
    let p = req.p.resolve(m)?;
    match req.target {
        NormTarget::FactorDeviation => lp_factor_deviation(spec, p, resolution),
        NormTarget::TensorNorm => {
            // |g|_{g₀} = √m f² pointwise
            if p.is_infinite() {
                let (_, hi) = spec.factor.bounds();
                return Ok((m as f64).sqrt() * hi * hi);
            }
            Ok((m as f64).sqrt() * lp_factor_power(spec, 2.0 * p, resolution)?.powf(1.0 / p))
        }
        NormTarget::TensorDeviation => {
            let field = EigenvalueField::from_conformal(spec, resolution)?;
            lp_tensor_norm(&field, p, true)
        }
    }
}

/// `Σ f^m · cell_area` over mesh nodes with `d_spec(source, node) < radius`.
pub fn ball_volume(spec: &MetricSpec, dist: &DistanceField, radius: f64) -> Result<f64> {
    let mesh = dist.mesh();
    if mesh.background() != &spec.background {
        return Err(Error::Mismatch("mesh background differs from the spec background".into()));
    }
    if dist.spec_hash() != spec.hash() {
        return Err(Error::Mismatch(format!("distance field was computed for `{}`", dist.spec_label())));
    }
    let m = spec.dim() as i32;
    let bg = &spec.background;
    let values = dist.values();
    let sum = par::sum_chunked(Execution::default(), values.len(), |i| {
        if values[i] < radius {
            let x = mesh.node_coords(i);
            spec.factor.eval_raw(bg, &x).powi(m) * mesh.cell_area(i)
        } else {
            0.0
        }
    });
    Ok(sum)
}
