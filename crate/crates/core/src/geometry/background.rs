use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{unit_ball_volume, unit_sphere_area};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    FlatTorus,
    RoundSphere,
}

/// The fixed background manifold `(M, g₀)`.
///
/// Flat tori are `[0, side)^dim` with periodic identification. Round spheres
/// have radius one and ignore `side`; their points are polar pairs `(r, φ)`
/// with `r` the distance from the north pole.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub kind: BackgroundKind,
    pub dim: usize,
    #[serde(default = "default_side")]
    pub side: f64,
}

fn default_side() -> f64 {
    2.0 * PI
}

impl Background {
    pub fn flat_torus(dim: usize, side: f64) -> Result<Self> {
        let bg = Background {
            kind: BackgroundKind::FlatTorus,
            dim,
            side,
        };
        bg.validate()?;
        Ok(bg)
    }

    pub fn round_sphere(dim: usize) -> Result<Self> {
        let bg = Background {
            kind: BackgroundKind::RoundSphere,
            dim,
            side: PI,
        };
        bg.validate()?;
        Ok(bg)
    }

    /// The 2π-periodic flat torus used by most of the example families.
    pub fn standard_torus(dim: usize) -> Self {
        Background {
            kind: BackgroundKind::FlatTorus,
            dim,
            side: 2.0 * PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::param("dim", format!("must be >= 2, got {}", self.dim)));
        }
        if self.kind == BackgroundKind::FlatTorus && !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::param("side", format!("must be positive, got {}", self.side)));
        }
        Ok(())
    }

    pub fn is_torus(&self) -> bool {
        self.kind == BackgroundKind::FlatTorus
    }

    /// `Vol_{g₀}(M)`.
    pub fn volume(&self) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => self.side.powi(self.dim as i32),
            BackgroundKind::RoundSphere => unit_sphere_area(self.dim + 1),
        }
    }

    /// `Diam_{g₀}(M)`: `√m · side / 2` on tori, `π` on spheres.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => (self.dim as f64).sqrt() * self.side / 2.0,
            BackgroundKind::RoundSphere => PI,
        }
    }

    /// Largest radius for which a metric ball is an embedded Euclidean ball
    /// (torus) or geodesic cap (sphere).
    pub fn injectivity_radius(&self) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => self.side / 2.0,
            BackgroundKind::RoundSphere => PI,
        }
    }

    /// `g₀`-volume of an embedded metric ball of radius `r`.
    pub fn ball_volume(&self, r: f64) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => unit_ball_volume(self.dim) * r.powi(self.dim as i32),
            BackgroundKind::RoundSphere => {
                // S^m cap: area(S^{m-1}) ∫₀^r sin^{m-1}
                let m = self.dim;
                let integrand = |t: f64| t.sin().powi(m as i32 - 1);
                unit_sphere_area(m) * crate::numeric::simpson(integrand, 0.0, r.min(PI), 512)
            }
        }
    }

    fn coords_len(&self) -> usize {
        match self.kind {
            BackgroundKind::FlatTorus => self.dim,
            BackgroundKind::RoundSphere => 2,
        }
    }

    /// Validates and canonicalizes a coordinate vector.
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.coords_len() {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.coords_len(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate in {coords:?}")));
        }
        match self.kind {
            BackgroundKind::FlatTorus => Ok(Point {
                coords: coords.iter().map(|&c| wrap(c, self.side)).collect(),
            }),
            BackgroundKind::RoundSphere => {
                if self.dim != 2 {
                    return Err(Error::Unsupported(format!(
                        "sphere points are polar pairs on S²; dim {} has closed-form radial operations only",
                        self.dim
                    )));
                }
                let r = coords[0];
                if !(0.0..=PI).contains(&r) {
                    return Err(Error::Domain(format!("polar radius {r} outside [0, π]")));
                }
                Ok(Point {
                    coords: vec![r, wrap(coords[1], 2.0 * PI)],
                })
            }
        }
    }

    /// Checks that `p` is already canonical for this background.
    pub fn check(&self, p: &Point) -> Result<()> {
        let canon = self.point(&p.coords)?;
        if canon.coords != p.coords {
            return Err(Error::Domain(format!("{:?} is not canonical", p.coords)));
        }
        Ok(())
    }

    /// Closed-form `d₀` on canonical coordinates; no validation.
    pub fn distance_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = circle_delta(*x, *y, self.side);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            BackgroundKind::RoundSphere => {
                let u = polar_to_unit(a[0], a[1]);
                let v = polar_to_unit(b[0], b[1]);
                angle_between(u, v)
            }
        }
    }

    /// Minimal-image displacement from `a` to `b` on a torus.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let l = self.side;
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let mut d = (y - x) % l;
                if d > l / 2.0 {
                    d -= l;
                } else if d < -l / 2.0 {
                    d += l;
                }
                d
            })
            .collect()
    }
}

/// A canonical point on a [`Background`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn north_pole() -> Self {
        Point {
            coords: vec![0.0, 0.0],
        }
    }
}

pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    let w = x.rem_euclid(period);
    if w >= period {
        0.0
    } else {
        w
    }
}

/// Per-coordinate distance on a circle of circumference `period`.
pub(crate) fn circle_delta(x: f64, y: f64, period: f64) -> f64 {
    let d = (x - y).abs() % period;
    d.min(period - d)
}

pub(crate) fn polar_to_unit(r: f64, phi: f64) -> [f64; 3] {
    let s = r.sin();
    [s * phi.cos(), s * phi.sin(), r.cos()]
}

pub(crate) fn unit_to_polar(u: [f64; 3]) -> (f64, f64) {
    let rho = (u[0] * u[0] + u[1] * u[1]).sqrt();
    let r = rho.atan2(u[2]);
    let phi = if rho == 0.0 { 0.0 } else { wrap(u[1].atan2(u[0]), 2.0 * PI) };
    (r, phi)
}

pub(crate) fn angle_between(u: [f64; 3], v: [f64; 3]) -> f64 {
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let c = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    c.atan2(dot)
}

/// Closed-form background distance `d₀(p, q)`.
pub fn background_distance(bg: &Background, p: &Point, q: &Point) -> Result<f64> {
    bg.check(p)?;
    bg.check(q)?;
    Ok(bg.distance_raw(&p.coords, &q.coords))
}

/// Taxi distance on a flat torus: the sum of per-coordinate circle distances.
pub fn taxi_distance(bg: &Background, p: &Point, q: &Point) -> Result<f64> {
    if !bg.is_torus() {
        return Err(Error::Unsupported("taxi distance is defined on flat tori only".into()));
    }
    bg.check(p)?;
    bg.check(q)?;
    Ok(taxi_raw(bg.side, &p.coords, &q.coords))
}

pub(crate) fn taxi_raw(side: f64, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| circle_delta(*x, *y, side)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn torus(l: f64) -> Background {
        Background::flat_torus(2, l).unwrap()
    }

    #[test]
    fn torus_antipode_and_wrap() {
        let bg = torus(2.0 * PI);
        let o = bg.point(&[0.0, 0.0]).unwrap();
        let a = bg.point(&[PI, PI]).unwrap();
        let b = bg.point(&[1.5 * PI, 0.0]).unwrap();
        assert_relative_eq!(background_distance(&bg, &o, &a).unwrap(), 2f64.sqrt() * PI);
        assert_relative_eq!(background_distance(&bg, &o, &b).unwrap(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sphere_polar_distance() {
        let bg = Background::round_sphere(2).unwrap();
        let n = Point::north_pole();
        let e = bg.point(&[PI / 2.0, 0.0]).unwrap();
        assert_relative_eq!(background_distance(&bg, &n, &e).unwrap(), PI / 2.0, epsilon = 1e-15);
        let w = bg.point(&[PI / 2.0, PI]).unwrap();
        assert_relative_eq!(background_distance(&bg, &e, &w).unwrap(), PI, epsilon = 1e-12);
    }

    #[test]
    fn taxi_examples() {
        let unit = torus(1.0);
        let p = |x: f64, y: f64| unit.point(&[x, y]).unwrap();
        assert_relative_eq!(taxi_distance(&unit, &p(0.0, 0.0), &p(0.5, 0.5)).unwrap(), 1.0);
        assert_relative_eq!(
            taxi_distance(&unit, &p(0.1, 0.0), &p(0.9, 0.0)).unwrap(),
            0.2,
            epsilon = 1e-12
        );
        let bg = torus(2.0 * PI);
        let o = bg.point(&[0.0, 0.0]).unwrap();
        let a = bg.point(&[PI, PI]).unwrap();
        assert_relative_eq!(taxi_distance(&bg, &o, &a).unwrap(), 2.0 * PI);
        let s = Background::round_sphere(2).unwrap();
        assert!(matches!(
            taxi_distance(&s, &Point::north_pole(), &Point::north_pole()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn point_validation() {
        let s = Background::round_sphere(2).unwrap();
        assert!(matches!(s.point(&[4.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(s.point(&[0.1]), Err(Error::Domain(_))));
        let t = torus(1.0);
        assert_eq!(t.point(&[-0.25, 1.5]).unwrap().coords, vec![0.75, 0.5]);
        assert!(matches!(t.point(&[f64::NAN, 0.0]), Err(Error::Domain(_))));
        assert!(t.check(&Point::new(vec![1.5, 0.0])).is_err());
    }

    #[test]
    fn diameters_and_volumes() {
        let t3 = Background::standard_torus(3);
        assert_relative_eq!(t3.diameter(), 3f64.sqrt() * PI);
        assert_relative_eq!(t3.volume(), (2.0 * PI).powi(3));
        let s = Background::round_sphere(2).unwrap();
        assert_relative_eq!(s.volume(), 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(s.ball_volume(PI / 2.0), 2.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn unit_round_trip() {
        let (r, phi) = unit_to_polar(polar_to_unit(1.2, 4.0));
        assert_relative_eq!(r, 1.2, epsilon = 1e-14);
        assert_relative_eq!(phi, 4.0, epsilon = 1e-14);
    }
}
