//! Small numerical helpers shared across modules.

use std::f64::consts::PI;

/// Composite Simpson rule on `[a, b]` with `intervals` subintervals
/// (rounded up to the next even number, minimum 2).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    if a == b {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Γ(m/2 + 1) for a positive integer `m`, by exact recurrence from Γ(1) and Γ(3/2).
fn gamma_half_plus_one(m: usize) -> f64 {
    let (mut g, mut x) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt() / 2.0, 1.5)
    };
    let target = m as f64 / 2.0 + 1.0;
    while x + 0.5 < target {
        g *= x;
        x += 1.0;
    }
    g
}

/// Volume of the unit ball in ℝ^m, `π^{m/2} / Γ(m/2 + 1)`.
pub fn unit_ball_volume(m: usize) -> f64 {
    PI.powf(m as f64 / 2.0) / gamma_half_plus_one(m)
}

/// Area of the unit sphere S^{m−1} ⊂ ℝ^m, `m ω_m`.
pub fn unit_sphere_area(m: usize) -> f64 {
    m as f64 * unit_ball_volume(m)
}

/// Least-squares slope of `ln y` against `ln x`. Nonpositive `y` are clamped to
/// the smallest positive normal so that exact zeros read as "very small".
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Halton radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}
