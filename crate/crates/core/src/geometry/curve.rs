use super::background::{angle_between, unit_to_polar, BackgroundKind, Point};
use super::factor::MetricSpec;
use crate::error::{Error, Result};
use crate::numeric::simpson;

const MAX_SEGMENT_DIM: usize = 16;

/// `∫ f ds` along the straight torus segment `start + s·disp`, `s ∈ [0, 1]`.
pub(crate) fn torus_segment(spec: &MetricSpec, start: &[f64], disp: &[f64], intervals: usize) -> f64 {
    let len = disp.iter().map(|d| d * d).sum::<f64>().sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let dim = start.len();
    assert!(dim <= MAX_SEGMENT_DIM, "segment integration supports dim <= {MAX_SEGMENT_DIM}");
    let f = |s: f64| {
        let mut x = [0.0; MAX_SEGMENT_DIM];
        for i in 0..dim {
            x[i] = start[i] + s * disp[i];
        }
        spec.factor.eval_raw(&spec.background, &x[..dim])
    };
    len * simpson(f, 0.0, 1.0, intervals)
}

/// `∫ f ds` along the minor great-circle arc between unit vectors `u` and `v`.
pub(crate) fn sphere_arc(spec: &MetricSpec, u: [f64; 3], v: [f64; 3], intervals: usize) -> f64 {
    let theta = angle_between(u, v);
    if theta == 0.0 {
        return 0.0;
    }
    let st = theta.sin();
    let f = |s: f64| {
        let a = ((1.0 - s) * theta).sin() / st;
        let b = (s * theta).sin() / st;
        let w = [a * u[0] + b * v[0], a * u[1] + b * v[1], a * u[2] + b * v[2]];
        let (r, phi) = unit_to_polar(w);
        spec.factor.eval_raw(&spec.background, &[r, phi])
    };
    theta * simpson(f, 0.0, 1.0, intervals)
}

/// Length `L_g` of a polyline under `g = f² g₀`, integrating `f` against
/// background arclength with composite Simpson on each segment.
///
/// Torus segments follow the minimal-image straight line, sphere segments the
/// minor great-circle arc.
pub fn curve_length(spec: &MetricSpec, polyline: &[Point], subdivisions: usize) -> Result<f64> {
    if polyline.len() < 2 {
        return Err(Error::Empty("polyline needs at least two points".into()));
    }
    if subdivisions == 0 {
        return Err(Error::param("subdivisions", "must be >= 1"));
    }
    let bg = &spec.background;
    for p in polyline {
        bg.check(p)?;
    }
    let mut total = 0.0;
    for w in polyline.windows(2) {
        let (a, b) = (&w[0].coords, &w[1].coords);
        total += match bg.kind {
            BackgroundKind::FlatTorus => {
                let disp = bg.displacement(a, b);
                torus_segment(spec, a, &disp, subdivisions)
            }
            BackgroundKind::RoundSphere => {
                let u = super::background::polar_to_unit(a[0], a[1]);
                let v = super::background::polar_to_unit(b[0], b[1]);
                if angle_between(u, v) > std::f64::consts::PI - 1e-12 {
                    return Err(Error::Domain(format!(
                        "segment {a:?} -> {b:?} joins antipodes; great circle is not unique"
                    )));
                }
                sphere_arc(spec, u, v, subdivisions)
            }
        };
    }
    Ok(total)
}
