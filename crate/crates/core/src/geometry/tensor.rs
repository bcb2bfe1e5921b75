use serde::{Deserialize, Serialize};

use super::factor::MetricSpec;
use crate::error::{Error, Result};

/// `|g|_{g₀} = √(Σ λ_i⁴)` given the eigenvalues `λ_i²` of `g` relative to `g₀`.
pub fn tensor_norm(lams: &[f64]) -> Result<f64> {
    check_eigenvalues(lams)?;
    Ok(norm_unchecked(lams))
}

fn norm_unchecked(lams: &[f64]) -> f64 {
    lams.iter().map(|l| l * l).sum::<f64>().sqrt()
}

/// `|g − g₀|_{g₀}`: the deviation tensor has eigenvalues `λ_i² − 1`.
pub fn deviation_norm(lams: &[f64]) -> Result<f64> {
    check_eigenvalues(lams)?;
    Ok(lams.iter().map(|l| (l - 1.0) * (l - 1.0)).sum::<f64>().sqrt())
}

pub(crate) fn check_eigenvalues(lams: &[f64]) -> Result<()> {
    if lams.is_empty() {
        return Err(Error::InvalidTensor("no eigenvalues".into()));
    }
    if let Some(bad) = lams.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidTensor(format!("eigenvalue {bad} is not positive")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSample {
    /// `g₀`-measure of the cell this sample stands for.
    pub weight: f64,
    /// `λ₁², …, λ_m²`.
    pub eigenvalues: Vec<f64>,
}

/// Sampled eigenvalues of a tensor field relative to `g₀`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueField {
    pub samples: Vec<EigenSample>,
}

impl EigenvalueField {
    pub fn new(samples: Vec<EigenSample>) -> Result<Self> {
        for s in &samples {
            check_eigenvalues(&s.eigenvalues)?;
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return Err(Error::InvalidTensor(format!("negative weight {}", s.weight)));
            }
        }
        Ok(EigenvalueField { samples })
    }

    /// Conformal field `g = f² g₀` sampled at the midpoints of a
    /// `resolution^m` grid on a flat torus.
    pub fn from_conformal(spec: &MetricSpec, resolution: usize) -> Result<Self> {
        let bg = &spec.background;
        if !bg.is_torus() {
            return Err(Error::Unsupported("grid eigenvalue sampling is implemented on tori".into()));
        }
        if resolution == 0 {
            return Err(Error::param("resolution", "must be positive"));
        }
        let m = bg.dim;
        let h = bg.side / resolution as f64;
        let weight = h.powi(m as i32);
        let total = resolution.pow(m as u32);
        let mut samples = Vec::with_capacity(total);
        let mut x = vec![0.0; m];
        for idx in 0..total {
            let mut rest = idx;
            for c in x.iter_mut() {
                *c = (rest % resolution) as f64 * h + h / 2.0;
                rest /= resolution;
            }
            let f = spec.factor.eval_raw(bg, &x);
            samples.push(EigenSample {
                weight,
                eigenvalues: vec![f * f; m],
            });
        }
        Ok(EigenvalueField { samples })
    }

    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
