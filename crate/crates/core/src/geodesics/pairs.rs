use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Background, BackgroundKind, Point};
use crate::numeric::halton;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePairSet {
    pub pairs: Vec<(Point, Point)>,
    pub seed: u64,
}

impl SamplePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Point uniform w.r.t. `g₀` from two numbers in `[0, 1)`.
pub(crate) fn uniform_point(bg: &Background, u: &[f64]) -> Point {
    match bg.kind {
        BackgroundKind::FlatTorus => Point::new(u.iter().map(|x| x * bg.side).collect()),
        BackgroundKind::RoundSphere => {
            let r = (1.0 - 2.0 * u[0]).clamp(-1.0, 1.0).acos();
            Point::new(vec![r, 2.0 * PI * u[1]])
        }
    }
}

fn random_point(bg: &Background, rng: &mut ChaCha8Rng) -> Point {
    let dim = if bg.is_torus() { bg.dim } else { 2 };
    let u: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    uniform_point(bg, &u)
}

/// `count` pseudo-random pairs, uniform w.r.t. `g₀`, never coincident.
pub fn sample_pairs(bg: &Background, count: usize, seed: u64) -> Result<SamplePairSet> {
    bg.validate()?;
    if count == 0 {
        return Err(Error::param("count", "must be >= 1"));
    }
    if !bg.is_torus() && bg.dim != 2 {
        return Err(Error::Unsupported("sphere sampling is implemented for m = 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        let p = random_point(bg, &mut rng);
        let q = random_point(bg, &mut rng);
        if p != q {
            pairs.push((p, q));
        }
    }
    Ok(SamplePairSet { pairs, seed })
}

/// First `count` points of the Halton sequence (bases 2, 3), mapped uniformly.
pub fn halton_points(bg: &Background, count: usize) -> Vec<Point> {
    const BASES: [u64; 4] = [2, 3, 5, 7];
    let dim = if bg.is_torus() { bg.dim.min(4) } else { 2 };
    (1..=count as u64)
        .map(|i| {
            let u: Vec<f64> = BASES[..dim].iter().map(|&b| halton(i, b)).collect();
            uniform_point(bg, &u)
        })
        .collect()
}
