//! Null-distribution ground truth that never touches data: exact moments
//! of Wₙ from multivariate gamma ratios, and the beta-product sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::NullLawSpec;
use crate::specfun::{multivariate_log_gamma, sample_log_beta};

/// `E(Wₙ^h)` query; requires `h > (p − n)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub spec: NullLawSpec,
    pub h: f64,
}

impl MomentQuery {
    pub fn new(spec: NullLawSpec, h: f64) -> Result<Self> {
        let bound = (spec.p() as f64 - spec.n() as f64) / 2.0;
        if !(h > bound) || !h.is_finite() {
            return Err(Error::domain(format!("moment order must exceed (p-n)/2 = {bound}, got {h}")));
        }
        Ok(Self { spec, h })
    }
}

/// log E(Wₙ^h) under the null.
pub fn exact_log_moment(query: &MomentQuery) -> Result<f64> {
    let half = (query.spec.n() as f64 - 1.0) / 2.0;
    let h = query.h;
    let ratio =
        |dim: usize| -> Result<f64> { Ok(multivariate_log_gamma(dim, half + h)? - multivariate_log_gamma(dim, half)?) };
    let mut total = ratio(query.spec.p())?;
    for &q in query.spec.partition().sizes() {
        total -= ratio(q)?;
    }
    Ok(total)
}

/// One null draw of log Wₙ = Σ_{i≥2} Σ_{j≤qᵢ} log Vᵢⱼ with
/// Vᵢⱼ ~ Beta((n − q*ᵢ − j)/2, q*ᵢ/2). `−n` times the result is a draw of
/// −2 log Λₙ.
pub fn sample_log_w<R: Rng + ?Sized>(spec: &NullLawSpec, rng: &mut R) -> f64 {
    let n = spec.n();
    let mut before = 0usize;
    let mut total = 0.0;
    for (i, &q) in spec.partition().sizes().iter().enumerate() {
        if i > 0 {
            let b = before as f64 / 2.0;
            for j in 1..=q {
                total += sample_log_beta((n - before - j) as f64 / 2.0, b, rng);
            }
        }
        before += q;
    }
    total.min(0.0)
}

/// Draw of −2 log Λₙ from the beta-product representation.
pub fn sample_neg2_log_lambda<R: Rng + ?Sized>(spec: &NullLawSpec, rng: &mut R) -> f64 {
    -(spec.n() as f64) * sample_log_w(spec, rng)
}

/// Monte Carlo estimate of E(Wₙ^h) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Average of `exp(h · log W)` over `log_w` draws.
pub fn estimate_moment(log_w: &[f64], h: f64) -> MomentEstimate {
    let m = log_w.len() as f64;
    let vals: Vec<f64> = log_w.iter().map(|&l| (h * l).exp()).collect();
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    MomentEstimate { mean, se: (var / m).sqrt() }
}
