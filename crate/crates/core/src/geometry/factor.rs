use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::background::{Background, Point};
use crate::error::{Error, Result};

/// Interpolation shape of a ramp piece, as a function of the normalized
/// position `t ∈ [0, 1]` across the piece.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RampShape {
    Linear,
    /// Cubic Hermite `3t² − 2t³`: monotone with zero slope at both ends.
    Cubic,
    /// `exp(−(rate·t)²) · (1 − 3t² + 2t³)` weight on the starting value.
    /// Monotone, flat at both ends, and concentrated near `t = 0` for large
    /// rates.
    Concentrated { rate: f64 },
}

impl RampShape {
    /// Fraction of the starting value that remains at `t`; 1 at `t = 0`, 0 at `t = 1`.
    pub fn weight(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let smooth = 1.0 - t * t * (3.0 - 2.0 * t);
        match *self {
            RampShape::Linear => 1.0 - t,
            RampShape::Cubic => smooth,
            RampShape::Concentrated { rate } => (-(rate * t).powi(2)).exp() * smooth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    Ramp { from: f64, to: f64, #[serde(flatten)] shape: RampShape },
    /// `r ↦ 1 / (r (1 − ln r))`, defined for `0 < r ≤ 1`.
    ReciprocalLog,
}

/// One radial interval `[start, end]` of a piecewise radial factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialPiece {
    pub start: f64,
    pub end: f64,
    pub profile: Profile,
    /// Marks an intentional jump discontinuity at `start`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub jump: bool,
}

impl RadialPiece {
    pub fn new(start: f64, end: f64, profile: Profile) -> Self {
        RadialPiece {
            start,
            end,
            profile,
            jump: false,
        }
    }

    pub fn constant(start: f64, end: f64, value: f64) -> Self {
        Self::new(start, end, Profile::Constant { value })
    }

    pub fn ramp(start: f64, end: f64, from: f64, to: f64, shape: RampShape) -> Self {
        Self::new(start, end, Profile::Ramp { from, to, shape })
    }

    pub fn with_jump(mut self) -> Self {
        self.jump = true;
        self
    }

    pub fn value(&self, r: f64) -> f64 {
        match self.profile {
            Profile::Constant { value } => value,
            Profile::Ramp { from, to, shape } => {
                let t = (r - self.start) / (self.end - self.start);
                to + (from - to) * shape.weight(t)
            }
            Profile::ReciprocalLog => reciprocal_log(r.clamp(self.start, self.end)),
        }
    }

    /// `(min, max)` of the profile over the piece. Every profile is monotone.
    pub fn range(&self) -> (f64, f64) {
        let a = self.value(self.start);
        let b = self.value(self.end);
        (a.min(b), a.max(b))
    }
}

pub fn reciprocal_log(r: f64) -> f64 {
    1.0 / (r * (1.0 - r.ln()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConformalFactor {
    Constant {
        value: f64,
    },
    /// `f(x) = profile(d₀(center, x))`; pieces tile `[0, Diam₀]`.
    RadialPiecewise {
        center: Point,
        pieces: Vec<RadialPiece>,
    },
    /// `inner` on the closed tube of radius `side · 2^{−(level+2)}` around the
    /// coordinate lines at multiples of `side · 2^{−level}`, `outer` elsewhere.
    LatticeCorridor {
        level: u32,
        inner: f64,
        outer: f64,
    },
    /// Disjoint radial bumps: `profile(d₀(c, x))` within the support of the
    /// nearest centre `c`, 1 elsewhere. Pieces tile `[0, support]` and end at 1.
    MultiBump {
        centers: Vec<Point>,
        pieces: Vec<RadialPiece>,
    },
}

impl ConformalFactor {
    pub fn constant(value: f64) -> Self {
        ConformalFactor::Constant { value }
    }

    /// Evaluates on canonical coordinates; no validation.
    pub fn eval_raw(&self, bg: &Background, x: &[f64]) -> f64 {
        match self {
            ConformalFactor::Constant { value } => *value,
            ConformalFactor::RadialPiecewise { center, pieces } => {
                radial_value(pieces, bg.distance_raw(&center.coords, x))
            }
            ConformalFactor::LatticeCorridor { level, inner, outer } => {
                let spacing = bg.side / 2f64.powi(*level as i32);
                let radius = bg.side / 2f64.powi(*level as i32 + 2);
                let on = x.iter().any(|&c| {
                    let m = c.rem_euclid(spacing);
                    m.min(spacing - m) <= radius
                });
                if on {
                    *inner
                } else {
                    *outer
                }
            }
            ConformalFactor::MultiBump { centers, pieces } => {
                let support = pieces.last().map_or(0.0, |p| p.end);
                let r = centers
                    .iter()
                    .map(|c| bg.distance_raw(&c.coords, x))
                    .fold(f64::INFINITY, f64::min);
                if r <= support {
                    radial_value(pieces, r)
                } else {
                    1.0
                }
            }
        }
    }

    /// Radial pieces when the factor is a single-centre radial profile.
    pub fn radial(&self) -> Option<(&Point, &[RadialPiece])> {
        match self {
            ConformalFactor::RadialPiecewise { center, pieces } => Some((center, pieces)),
            _ => None,
        }
    }

    /// Pointwise `(inf f, sup f)` bounds.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ConformalFactor::Constant { value } => (*value, *value),
            ConformalFactor::RadialPiecewise { pieces, .. } => pieces_range(pieces),
            ConformalFactor::LatticeCorridor { inner, outer, .. } => (inner.min(*outer), inner.max(*outer)),
            ConformalFactor::MultiBump { pieces, .. } => {
                let (lo, hi) = pieces_range(pieces);
                (lo.min(1.0), hi.max(1.0))
            }
        }
    }

    /// Centres and radius outside which the factor equals the constant 1, if
    /// such a compact support exists.
    pub fn bump_support(&self) -> Option<(Vec<Point>, f64)> {
        match self {
            ConformalFactor::RadialPiecewise { center, pieces } => {
                let mut end = 0.0;
                for p in pieces {
                    let unit = matches!(p.profile, Profile::Constant { value } if value == 1.0);
                    if !unit {
                        end = p.end;
                    }
                }
                Some((vec![center.clone()], end))
            }
            ConformalFactor::MultiBump { centers, pieces } => {
                Some((centers.clone(), pieces.last().map_or(0.0, |p| p.end)))
            }
            _ => None,
        }
    }
}

pub(crate) fn radial_value(pieces: &[RadialPiece], r: f64) -> f64 {
    for p in pieces {
        if r <= p.end {
            return p.value(r.max(p.start));
        }
    }
    pieces.last().map_or(1.0, |p| p.value(p.end))
}

fn pieces_range(pieces: &[RadialPiece]) -> (f64, f64) {
    pieces.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let (a, b) = p.range();
        (lo.min(a), hi.max(b))
    })
}

/// The conformal metric `g = f² g₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub background: Background,
    pub factor: ConformalFactor,
    #[serde(default)]
    pub label: String,
}

const TILE_TOL: f64 = 1e-12;
const CONTINUITY_TOL: f64 = 1e-9;

impl MetricSpec {
    pub fn new(background: Background, factor: ConformalFactor, label: impl Into<String>) -> Result<Self> {
        let spec = MetricSpec {
            background,
            factor,
            label: label.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The background metric itself, `f ≡ 1`.
    pub fn background_metric(background: Background) -> Self {
        MetricSpec {
            background,
            factor: ConformalFactor::constant(1.0),
            label: "background".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.background.dim
    }

    pub fn validate(&self) -> Result<()> {
        self.background.validate()?;
        let bg = &self.background;
        match &self.factor {
            ConformalFactor::Constant { value } => positive("value", *value)?,
            ConformalFactor::RadialPiecewise { center, pieces } => {
                bg.check(center)?;
                validate_pieces(pieces, bg.diameter())?;
            }
            ConformalFactor::LatticeCorridor { inner, outer, .. } => {
                if !bg.is_torus() || bg.dim != 2 {
                    return Err(Error::Unsupported("lattice corridors live on the flat 2-torus".into()));
                }
                positive("inner", *inner)?;
                positive("outer", *outer)?;
            }
            ConformalFactor::MultiBump { centers, pieces } => {
                if centers.is_empty() {
                    return Err(Error::Empty("multi-bump centers".into()));
                }
                for c in centers {
                    bg.check(c)?;
                }
                let support = pieces.last().map_or(0.0, |p| p.end);
                validate_pieces(pieces, support)?;
                let last = pieces.last().expect("validated nonempty");
                if (last.value(last.end) - 1.0).abs() > CONTINUITY_TOL {
                    return Err(Error::InvalidMetric("multi-bump profile must end at 1".into()));
                }
                for (i, a) in centers.iter().enumerate() {
                    for b in &centers[i + 1..] {
                        if bg.distance_raw(&a.coords, &b.coords) <= 2.0 * support {
                            return Err(Error::InvalidMetric(format!(
                                "bumps of radius {support} around {:?} and {:?} overlap",
                                a.coords, b.coords
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates `f(x)` after validating `x` against the background.
    pub fn eval(&self, x: &Point) -> Result<f64> {
        self.background.check(x)?;
        Ok(self.factor.eval_raw(&self.background, &x.coords))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("MetricSpec serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: MetricSpec = toml::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Positions where adjacent pieces disagree by more than the continuity
    /// tolerance, including declared jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match &self.factor {
            ConformalFactor::RadialPiecewise { pieces, .. } | ConformalFactor::MultiBump { pieces, .. } => pieces
                .windows(2)
                .filter(|w| !continuous_at(&w[0], &w[1]))
                .map(|w| w[1].start)
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// `f(x)` for a validated point; the public entry for factor evaluation.
pub fn eval_factor(spec: &MetricSpec, x: &Point) -> Result<f64> {
    spec.eval(x)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidMetric(format!("{name} must be positive and finite, got {v}")))
    }
}

fn continuous_at(a: &RadialPiece, b: &RadialPiece) -> bool {
    let l = a.value(a.end);
    let r = b.value(b.start);
    (l - r).abs() <= CONTINUITY_TOL * l.abs().max(r.abs()).max(1.0)
}

fn validate_pieces(pieces: &[RadialPiece], r_max: f64) -> Result<()> {
    let first = pieces.first().ok_or_else(|| Error::Empty("radial pieces".into()))?;
    if first.start != 0.0 {
        return Err(Error::InvalidMetric(format!("pieces must start at 0, got {}", first.start)));
    }
    for p in pieces {
        if !(p.end > p.start) {
            return Err(Error::InvalidMetric(format!("empty piece [{}, {}]", p.start, p.end)));
        }
        match p.profile {
            Profile::Constant { value } => positive("constant", value)?,
            Profile::Ramp { from, to, shape } => {
                positive("ramp.from", from)?;
                positive("ramp.to", to)?;
                if let RampShape::Concentrated { rate } = shape {
                    if !(rate >= 0.0 && rate.is_finite()) {
                        return Err(Error::InvalidMetric(format!("ramp rate must be >= 0, got {rate}")));
                    }
                }
            }
            Profile::ReciprocalLog => {
                if !(p.start > 0.0 && p.end <= 1.0) {
                    return Err(Error::InvalidMetric(format!(
                        "reciprocal-log piece needs 0 < r <= 1, got [{}, {}]",
                        p.start, p.end
                    )));
                }
            }
        }
    }
    for w in pieces.windows(2) {
        let gap = (w[0].end - w[1].start).abs();
        if gap > TILE_TOL * w[0].end.max(1.0) {
            return Err(Error::InvalidMetric(format!(
                "pieces do not tile: {} then {}",
                w[0].end, w[1].start
            )));
        }
        if !w[1].jump && !continuous_at(&w[0], &w[1]) {
            return Err(Error::InvalidMetric(format!(
                "factor jumps at r = {} ({} vs {})",
                w[1].start,
                w[0].value(w[0].end),
                w[1].value(w[1].start)
            )));
        }
    }
    let last = pieces.last().expect("nonempty");
    if (last.end - r_max).abs() > 1e-9 * r_max.max(1.0) {
        return Err(Error::InvalidMetric(format!(
            "pieces end at {} but must cover [0, {r_max}]",
            last.end
        )));
    }
    Ok(())
}
