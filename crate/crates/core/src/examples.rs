//! The eight example sequences as parameterized [`MetricSpec`] factories,
//! with the limits claimed for each.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Background, ConformalFactor, MetricSpec, Point, Profile, RadialPiece, RampShape};
use crate::numeric::{simpson, unit_ball_volume};
use crate::quadrature::{self, radial_distance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExampleId {
    #[serde(rename = "cinched_sphere_3_1")]
    CinchedSphere,
    #[serde(rename = "bump_C0_3_2")]
    BumpC0,
    #[serde(rename = "taxi_lattice_3_3")]
    TaxiLattice,
    #[serde(rename = "growing_bump_3_4")]
    GrowingBump,
    #[serde(rename = "bubble_3_5")]
    Bubble,
    #[serde(rename = "diverging_3_6")]
    Diverging,
    #[serde(rename = "spline_3_7")]
    Spline,
    #[serde(rename = "many_splines_3_8")]
    ManySplines,
}

impl ExampleId {
    pub const ALL: [ExampleId; 8] = [
        ExampleId::CinchedSphere,
        ExampleId::BumpC0,
        ExampleId::TaxiLattice,
        ExampleId::GrowingBump,
        ExampleId::Bubble,
        ExampleId::Diverging,
        ExampleId::Spline,
        ExampleId::ManySplines,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleId::CinchedSphere => "cinched_sphere_3_1",
            ExampleId::BumpC0 => "bump_C0_3_2",
            ExampleId::TaxiLattice => "taxi_lattice_3_3",
            ExampleId::GrowingBump => "growing_bump_3_4",
            ExampleId::Bubble => "bubble_3_5",
            ExampleId::Diverging => "diverging_3_6",
            ExampleId::Spline => "spline_3_7",
            ExampleId::ManySplines => "many_splines_3_8",
        }
    }

    /// Section number, e.g. `"3.4"`.
    pub fn number(&self) -> &'static str {
        match self {
            ExampleId::CinchedSphere => "3.1",
            ExampleId::BumpC0 => "3.2",
            ExampleId::TaxiLattice => "3.3",
            ExampleId::GrowingBump => "3.4",
            ExampleId::Bubble => "3.5",
            ExampleId::Diverging => "3.6",
            ExampleId::Spline => "3.7",
            ExampleId::ManySplines => "3.8",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            ExampleId::CinchedSphere => "cinched sphere",
            ExampleId::BumpC0 => "bounded bump, no C0 convergence",
            ExampleId::TaxiLattice => "dense lattice, taxi limit",
            ExampleId::GrowingBump => "growing bump with L^p convergence",
            ExampleId::Bubble => "bubbling disk",
            ExampleId::Diverging => "diverging volume and diameter",
            ExampleId::Spline => "spline of length ln(eta)",
            ExampleId::ManySplines => "many splines, no GH limit",
        }
    }

    pub fn on_sphere(&self) -> bool {
        *self == ExampleId::CinchedSphere
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    /// Accepts the full id, the section number (`3.2`) or `ex3.2`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().trim_start_matches("ex");
        ExampleId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.trim() || id.number() == key)
            .ok_or_else(|| Error::param("example_id", format!("unknown example `{s}`")))
    }
}

/// Free constants of the examples. Unused fields are ignored by factories
/// that do not need them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleParams {
    /// Torus dimension for 3.2 and 3.4–3.8.
    pub m: usize,
    /// Cinch depth for 3.1, in (0, 1).
    pub h0: f64,
    /// Bump height for 3.2, > 1.
    #[serde(rename = "K")]
    pub k: f64,
    /// Growth exponent for 3.4, in (0, 1).
    pub alpha: f64,
    /// Exponent for 3.6–3.8, > 1. Defaults to 2 for 3.6 and e for 3.7, 3.8.
    pub eta: Option<f64>,
    /// Bump count for 3.8; defaults to ⌊√ln j⌋.
    pub k_j: Option<usize>,
    /// Ramp shape on the transition annulus; 3.5 defaults to a concentrated
    /// ramp, everything else to the cubic smoothstep.
    pub ramp: Option<RampShape>,
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams {
            m: 2,
            h0: 0.5,
            k: 3.0,
            alpha: 0.5,
            eta: None,
            k_j: None,
            ramp: None,
        }
    }
}

impl ExampleParams {
    pub fn eta_for(&self, id: ExampleId) -> f64 {
        self.eta.unwrap_or(match id {
            ExampleId::Diverging => 2.0,
            _ => E,
        })
    }

    fn ramp_for(&self, id: ExampleId, j: u64) -> RampShape {
        self.ramp.unwrap_or(match id {
            ExampleId::Bubble => RampShape::Concentrated { rate: (j as f64).sqrt() },
            _ => RampShape::Cubic,
        })
    }

    /// Bump count for 3.8 at `j`.
    pub fn bumps_for(&self, j: u64) -> usize {
        self.k_j.unwrap_or_else(|| default_bump_count(j))
    }

    pub fn validate(&self, id: ExampleId) -> Result<()> {
        let open = |name: &str, v: f64, lo: f64, hi: f64| {
            if v > lo && v < hi {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} is outside ({lo}, {hi})")))
            }
        };
        match id {
            ExampleId::CinchedSphere => open("h0", self.h0, 0.0, 1.0)?,
            ExampleId::BumpC0 => open("K", self.k, 1.0, f64::INFINITY)?,
            ExampleId::GrowingBump => open("alpha", self.alpha, 0.0, 1.0)?,
            ExampleId::Diverging | ExampleId::Spline | ExampleId::ManySplines => {
                open("eta", self.eta_for(id), 1.0, f64::INFINITY)?
            }
            _ => {}
        }
        let fixed_dim = matches!(id, ExampleId::CinchedSphere | ExampleId::TaxiLattice);
        if fixed_dim && self.m != 2 {
            return Err(Error::param("m", format!("{} is two-dimensional", id)));
        }
        if self.m < 2 {
            return Err(Error::param("m", "must be >= 2"));
        }
        if let Some(RampShape::Concentrated { rate }) = self.ramp {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::param("ramp.rate", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// `⌊√ln j⌋`.
pub fn default_bump_count(j: u64) -> usize {
    (j as f64).ln().max(0.0).sqrt().floor() as usize
}

fn unit(start: f64, end: f64) -> RadialPiece {
    RadialPiece::constant(start, end, 1.0)
}

/// Bump centred piecewise profile `height` on `[0, 1/j]`, ramp to 1 on
/// `[1/j, 2/j]`, 1 up to `outer`.
fn plateau_bump(j: f64, height: f64, shape: RampShape, outer: f64) -> Vec<RadialPiece> {
    vec![
        RadialPiece::constant(0.0, 1.0 / j, height),
        RadialPiece::ramp(1.0 / j, 2.0 / j, height, 1.0, shape),
        unit(2.0 / j, outer),
    ]
}

/// Log-spline profile of 3.7/3.8 on `[0, 2/j]`.
fn spline_pieces(j: f64, eta: f64, shape: RampShape) -> Vec<RadialPiece> {
    let lj = j.ln();
    let core = j.powf(-eta);
    vec![
        RadialPiece::constant(0.0, core, j.powf(eta) / (1.0 + lj)),
        RadialPiece::new(core, 1.0 / j, Profile::ReciprocalLog).with_jump(),
        RadialPiece::ramp(1.0 / j, 2.0 / j, j / (1.0 + lj), 1.0, shape),
    ]
}

fn torus_center(bg: &Background) -> Point {
    Point::new(vec![bg.side / 2.0; bg.dim])
}

/// Centres of the 3.8 bumps: equally spaced on the circle `x₂ = … = x_m = π`.
pub fn spline_centers(bg: &Background, k: usize) -> Vec<Point> {
    (0..k)
        .map(|i| {
            let mut c = vec![bg.side / 2.0; bg.dim];
            c[0] = bg.side * i as f64 / k as f64;
            Point::new(c)
        })
        .collect()
}

/// The `j`-th metric of example `id`.
pub fn make_example(id: ExampleId, j: u64, params: &ExampleParams) -> Result<MetricSpec> {
    params.validate(id)?;
    if j < 2 {
        return Err(Error::param("j", format!("must be >= 2, got {j}")));
    }
    let jf = j as f64;
    let shape = params.ramp_for(id, j);
    let label = format!("{id} j={j}");
    let m = params.m;
    let torus = Background::standard_torus(m);
    let diam = torus.diameter();
    let radial = |height: f64| -> Result<MetricSpec> {
        let factor = ConformalFactor::RadialPiecewise {
            center: torus_center(&torus),
            pieces: plateau_bump(jf, height, shape, diam),
        };
        MetricSpec::new(torus, factor, label.clone())
    };
    match id {
        ExampleId::CinchedSphere => {
            let bg = Background::round_sphere(2)?;
            let (a, mid, b) = (PI / 2.0 - 1.0 / jf, PI / 2.0, PI / 2.0 + 1.0 / jf);
            let pieces = vec![
                unit(0.0, a),
                RadialPiece::ramp(a, mid, 1.0, params.h0, shape),
                RadialPiece::ramp(mid, b, params.h0, 1.0, reverse(shape)?),
                unit(b, PI),
            ];
            MetricSpec::new(
                bg,
                ConformalFactor::RadialPiecewise {
                    center: Point::north_pole(),
                    pieces,
                },
                label,
            )
        }
        ExampleId::BumpC0 => radial(params.k),
        ExampleId::TaxiLattice => {
            let level = u32::try_from(j).map_err(|_| Error::param("j", "too large for a lattice level"))?;
            if level > 30 {
                return Err(Error::param("j", "lattice level above 30 is not representable"));
            }
            let bg = Background::flat_torus(2, 1.0)?;
            let factor = ConformalFactor::LatticeCorridor {
                level,
                inner: 1.0,
                outer: 2f64.sqrt(),
            };
            MetricSpec::new(bg, factor, label)
        }
        ExampleId::GrowingBump => radial(jf.powf(params.alpha)),
        ExampleId::Bubble => radial(jf),
        ExampleId::Diverging => radial(jf.powf(params.eta_for(id))),
        ExampleId::Spline => {
            let mut pieces = spline_pieces(jf, params.eta_for(id), shape);
            pieces.push(unit(2.0 / jf, diam));
            MetricSpec::new(
                torus,
                ConformalFactor::RadialPiecewise {
                    center: torus_center(&torus),
                    pieces,
                },
                label,
            )
        }
        ExampleId::ManySplines => {
            let k = params.bumps_for(j);
            if k == 0 {
                return Err(Error::param("k_j", format!("no bumps at j = {j}; need j >= 3")));
            }
            if params.k_j.is_some() && k > default_bump_count(j) {
                return Err(Error::param("k_j", format!("{k} exceeds floor(sqrt(ln j)) = {}", default_bump_count(j))));
            }
            if 2.0 / jf >= torus.side / (2.0 * k as f64) {
                return Err(Error::param("j", format!("{k} bumps of radius 2/{j} are not disjoint")));
            }
            let factor = ConformalFactor::MultiBump {
                centers: spline_centers(&torus, k),
                pieces: spline_pieces(jf, params.eta_for(id), shape),
            };
            MetricSpec::new(torus, factor, label)
        }
    }
}

/// A rising ramp with the same shape as a falling one (`1 − w(1 − t)`).
/// Only the symmetric shapes qualify.
fn reverse(shape: RampShape) -> Result<RampShape> {
    match shape {
        RampShape::Linear | RampShape::Cubic => Ok(shape),
        RampShape::Concentrated { .. } => Err(Error::param("ramp", "the cinch profile needs a symmetric ramp")),
    }
}

/// `(1/j^m) ∫₁² h_j(s)^m s^{m−1} ds` for the transition profile of 3.5.
pub fn construction_integral(j: u64, params: &ExampleParams) -> Result<f64> {
    let spec = make_example(ExampleId::Bubble, j, params)?;
    let ConformalFactor::RadialPiecewise { pieces, .. } = &spec.factor else {
        unreachable!("3.5 is radial")
    };
    let ramp = pieces[1];
    let (jf, m) = (j as f64, params.m as i32);
    let integral = simpson(|s| ramp.value(s / jf).powi(m) * s.powi(m - 1), 1.0, 2.0, 4096);
    Ok(integral / jf.powi(m))
}

/// Radius `1/j^{η/e^r}` whose radial distance from a spline centre tends to `r`.
pub fn spline_target_radius(j: u64, eta: f64, r: f64) -> f64 {
    (j as f64).powf(-eta / r.exp())
}

/// `d_j(centre, ∂B(1/j^{η/e^r}))` for 3.7, by exact radial integration.
pub fn spline_radial_distance(j: u64, params: &ExampleParams, r: f64) -> Result<f64> {
    let spec = make_example(ExampleId::Spline, j, params)?;
    let (_, pieces) = spec.factor.radial().expect("3.7 is radial");
    let rho = spline_target_radius(j, params.eta_for(ExampleId::Spline), r);
    if rho > 1.0 / j as f64 {
        return Err(Error::param("r", format!("target radius {rho} lies outside the log region")));
    }
    Ok(radial_distance(pieces, rho))
}

/// What a claim expects of its quantity across `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimTarget {
    /// Converges to `value`.
    ToValue { value: f64 },
    /// Grows without bound.
    Diverges,
    /// Nondecreasing in `j` and larger at the last `j` than at the first.
    Grows,
    /// Stays at `value` for every `j`.
    Constant { value: f64 },
    /// Stays above `floor` for every `j`.
    BoundedAway { floor: f64 },
    /// Ends at or below `value`.
    AtMost { value: f64 },
    /// Ends strictly below `value`.
    Below { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    /// Stable id, unique within the example.
    pub id: String,
    /// Short statement used in verdict lines, e.g. `diverges`.
    pub label: String,
    /// Report quantity the claim reads, e.g. `vol` or `lp_dev`.
    pub quantity: String,
    pub target: ClaimTarget,
    /// Exponents the claim covers, `lo < p ≤ hi`, for Lᵖ quantities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_range: Option<[f64; 2]>,
    /// Quoted statement being tested.
    pub anchor: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimSet {
    pub example: ExampleId,
    pub claims: Vec<Claim>,
}

impl ClaimSet {
    pub fn get(&self, id: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.id == id)
    }
}

fn claim(id: &str, quantity: &str, target: ClaimTarget, anchor: &str) -> Claim {
    let label = match &target {
        ClaimTarget::ToValue { value } => format!("converges to {value:.6}"),
        ClaimTarget::Diverges => "diverges".into(),
        ClaimTarget::Grows => "grows".into(),
        ClaimTarget::Constant { value } => format!("constant {value:.6}"),
        ClaimTarget::BoundedAway { floor } => format!("bounded away from {floor}"),
        ClaimTarget::AtMost { value } => format!("at most {value:.6}"),
        ClaimTarget::Below { value } => format!("below {value:.6}"),
    };
    Claim {
        id: id.into(),
        label,
        quantity: quantity.into(),
        target,
        p_range: None,
        anchor: anchor.into(),
    }
}

fn with_p(mut c: Claim, lo: f64, hi: f64) -> Claim {
    c.p_range = Some([lo, hi]);
    c
}

/// Claims with default parameters.
pub fn claims(id: ExampleId) -> ClaimSet {
    claims_with(id, &ExampleParams::default())
}

pub fn claims_with(id: ExampleId, params: &ExampleParams) -> ClaimSet {
    use ClaimTarget::*;
    let m = params.m as f64;
    let vol0 = (2.0 * PI).powf(m);
    let diam0 = m.sqrt() * PI;
    let eta = params.eta_for(id);
    let inf = f64::INFINITY;
    let claims = match id {
        ExampleId::CinchedSphere => vec![
            claim("vol", "vol", ToValue { value: 4.0 * PI }, "It is also clear that the volume converges"),
            claim(
                "equator_shortcut",
                "equator_distance",
                AtMost { value: params.h0 * PI },
                "geodesics which run to the equator, and then around inside the cinched equator",
            ),
            claim("not_round", "envelope_lo", Below { value: 1.0 }, "M_∞ is not isometric to S^m"),
        ],
        ExampleId::BumpC0 => vec![
            claim("vol", "vol", ToValue { value: vol0 }, "M_j VF→ T^m"),
            claim("diam", "diam", ToValue { value: diam0 }, "Diam(M_j) → √2π"),
            claim("eps_d0", "eps_vs_d0", ToValue { value: 0.0 }, "M_j GH→ T^m"),
            with_p(
                claim("lp_dev", "lp_dev_power", ToValue { value: 0.0 }, "converges to T^m in L^p ∀p ∈ (0,∞)"),
                0.0,
                inf,
            ),
            claim("no_c0", "sup_dev", Constant { value: params.k - 1.0 }, "does not converge to T^m in C⁰"),
        ],
        ExampleId::TaxiLattice => vec![
            claim("eps_taxi", "eps_vs_taxi", ToValue { value: 0.0 }, "GH and F convergence to a torus with a taxi metric"),
            claim("eps_d0", "eps_vs_d0", BoundedAway { floor: 0.0 }, "torus with a taxi metric"),
            with_p(
                claim("lp_dev", "lp_dev_power", BoundedAway { floor: 0.0 }, "f_j → 1 pointwise on a dense set but no L^p convergence"),
                0.0,
                inf,
            ),
        ],
        ExampleId::GrowingBump => vec![
            claim("vol", "vol", ToValue { value: vol0 }, "M_j VF→ T^m"),
            claim("diam", "diam", ToValue { value: diam0 }, "Diam(M_j) → √2π"),
            with_p(
                claim("lp_dev", "lp_dev_power", ToValue { value: 0.0 }, "‖f_j − 1‖_{L^p} → 0 for p < m/α"),
                0.0,
                (m / params.alpha) * (1.0 - 1e-9),
            ),
            claim("eps_d0", "eps_vs_d0", ToValue { value: 0.0 }, "M_j mGH→ T^m"),
            claim("pointwise", "pointwise_ae", ToValue { value: 1.0 }, "M_j mGH→ T^m"),
        ],
        ExampleId::Bubble => vec![
            claim(
                "vol",
                "vol",
                ToValue { value: vol0 + unit_ball_volume(params.m) },
                "→ Vol(B^m(p,1)) + Vol(T^m)",
            ),
            claim("diam", "diam", ToValue { value: diam0 + 1.0 }, "Diam(M_j) → 1 + √m π"),
            with_p(claim("lp_norm", "lp_norm_power", Diverges, "f_j is not bounded in L^p norm for p > m"), m, inf),
            claim(
                "construction",
                "construction_integral",
                ToValue { value: 0.0 },
                "(1/j^m)∫₁² h_j(s)^m s^{m−1} ds → 0",
            ),
        ],
        ExampleId::Diverging => vec![
            claim("vol", "vol", Diverges, "Vol(M_j) → ∞"),
            claim("diam", "diam", Diverges, "Diam(M_j) → ∞"),
            with_p(claim("lp_norm", "lp_norm_power", Diverges, "‖f_j‖_{L^p} → ∞, p > m/η"), m / eta, inf),
        ],
        ExampleId::Spline => vec![
            claim("vol", "vol", ToValue { value: vol0 }, "M_j VF→ T^m"),
            claim("diam", "diam", ToValue { value: diam0 + eta.ln() }, "a line of length ln(η) attached"),
            with_p(
                claim("lp_dev", "lp_dev_power", ToValue { value: 0.0 }, "‖f_j − 1‖_{L^p(T^m)} → 0 for p ≤ m"),
                0.0,
                m,
            ),
            with_p(claim("lp_norm", "lp_norm_power", Diverges, "f_j is not bounded in L^p, p > m"), m, inf),
        ],
        ExampleId::ManySplines => vec![
            claim("vol", "vol", ToValue { value: vol0 }, "→ Vol(T^m)"),
            Claim {
                label: "no GH limit".into(),
                ..claim("packing", "packing_count", Grows, "has no GH limit")
            },
        ],
    };
    ClaimSet { example: id, claims }
}

/// Exact radial quantities for one `j`, bypassing meshes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRow {
    pub j: u64,
    pub vol: f64,
    pub diam: f64,
    /// `(p, ‖f − 1‖_{Lᵖ})`.
    pub lp_dev: Vec<(f64, f64)>,
    /// `(p, ∫ |f − 1|^p)`.
    pub lp_dev_power: Vec<(f64, f64)>,
    /// `(p, ‖f‖_{Lᵖ})`.
    pub lp_norm: Vec<(f64, f64)>,
    /// `(p, ∫ f^p)`.
    pub lp_norm_power: Vec<(f64, f64)>,
    pub sup_dev: f64,
}

/// Radial diameter `∫₀^{Diam₀} f dr`; for multi-bump factors the ray runs
/// from one bump centre to the antipode of that centre.
pub fn closed_form_diameter(spec: &MetricSpec) -> Result<f64> {
    match &spec.factor {
        ConformalFactor::MultiBump { pieces, .. } => {
            let support = pieces.last().map_or(0.0, |p| p.end);
            Ok(radial_distance(pieces, support) + spec.background.diameter() - support)
        }
        _ => quadrature::radial_diameter(spec),
    }
}

/// Resolution for the grid fallback; radial factors never reach it.
const CLOSED_FORM_RESOLUTION: usize = 64;

pub fn closed_form_row(id: ExampleId, j: u64, params: &ExampleParams, ps: &[f64]) -> Result<ClosedFormRow> {
    if id == ExampleId::TaxiLattice {
        return Err(Error::Unsupported("the taxi lattice has no radial form".into()));
    }
    let spec = make_example(id, j, params)?;
    let vol = spec.background.volume() + quadrature::volume_excess(&spec, CLOSED_FORM_RESOLUTION)?;
    let diam = closed_form_diameter(&spec)?;
    let mut row = ClosedFormRow {
        j,
        vol,
        diam,
        lp_dev: Vec::new(),
        lp_dev_power: Vec::new(),
        lp_norm: Vec::new(),
        lp_norm_power: Vec::new(),
        sup_dev: quadrature::sup_deviation(&spec, CLOSED_FORM_RESOLUTION)?,
    };
    for &p in ps {
        let dev = quadrature::lp_factor_deviation_power(&spec, p, CLOSED_FORM_RESOLUTION)?;
        let pow = quadrature::lp_factor_power(&spec, p, CLOSED_FORM_RESOLUTION)?;
        row.lp_dev_power.push((p, dev));
        row.lp_dev.push((p, dev.powf(1.0 / p)));
        row.lp_norm_power.push((p, pow));
        row.lp_norm.push((p, pow.powf(1.0 / p)));
    }
    Ok(row)
}
