//! Block partitions and every quantity that depends only on `(n, q₁…q_k)`:
//! the chi-square degrees of freedom, the Bartlett factor, the exact
//! digamma centering μₙ and its variance σₙ², the log-based alternatives
//! of Qi, Wang and Zhang, and the difference sums Ψ and βₙᵣ.
//!
//! Sums that compare `p` against the blocks are evaluated block-wise: with
//! `q*ᵢ = q₁ + … + qᵢ₋₁`,
//!
//! ```text
//! Σ_{j≤p} g((n−j)/2+x) − Σᵢ Σ_{j≤qᵢ} g((n−j)/2+x)
//!     = Σ_{i≥2} Σ_{j≤qᵢ} [ g((n−q*ᵢ−j)/2+x) − g((n−j)/2+x) ]
//! ```
//!
//! which avoids subtracting two large sums when `p` is in the thousands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::digamma_pos;

/// Ordered block sizes `q₁, …, q_k` with `k ≥ 2` and every `qᵢ ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupPartition {
    q: Vec<usize>,
}

impl GroupPartition {
    pub fn new(q: Vec<usize>) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::Partition(format!("need at least two blocks, got {}", q.len())));
        }
        if let Some(pos) = q.iter().position(|&s| s == 0) {
            return Err(Error::Partition(format!("block {} has size zero", pos + 1)));
        }
        Ok(Self { q })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.q
    }

    /// Total dimension p = Σ qᵢ.
    pub fn p(&self) -> usize {
        self.q.iter().sum()
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn q_max(&self) -> usize {
        *self.q.iter().max().expect("nonempty")
    }

    /// p − q_max, the `r` of the boundary regime.
    pub fn r_gap(&self) -> usize {
        self.p() - self.q_max()
    }

    /// Column ranges of each block, in order.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.q
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect()
    }

    /// `(q*ᵢ, qᵢ)` for blocks `i ≥ 2`, where `q*ᵢ` counts the columns before block `i`.
    fn trailing_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.q
            .iter()
            .scan(0usize, |before, &s| {
                let item = (*before, s);
                *before += s;
                Some(item)
            })
            .skip(1)
    }

    /// Partition with blocks in the given order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k()];
        if order.len() != self.k() {
            return Err(Error::Partition("permutation length mismatch".into()));
        }
        for &i in order {
            if i >= self.k() || seen[i] {
                return Err(Error::Partition("not a permutation".into()));
            }
            seen[i] = true;
        }
        Self::new(order.iter().map(|&i| self.q[i]).collect())
    }
}

impl TryFrom<Vec<usize>> for GroupPartition {
    type Error = Error;
    fn try_from(q: Vec<usize>) -> Result<Self> {
        Self::new(q)
    }
}

impl From<GroupPartition> for Vec<usize> {
    fn from(g: GroupPartition) -> Self {
        g.q
    }
}

impl FromStr for GroupPartition {
    type Err = Error;

    /// Parses `"q1,q2,...,qk"`.
    fn from_str(s: &str) -> Result<Self> {
        let q = s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<usize>().map_err(|_| Error::Partition(format!("invalid block size {tok:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(q)
    }
}

impl fmt::Display for GroupPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.q.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Sample size together with a partition; requires `p < n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NullLawSpec {
    n: usize,
    partition: GroupPartition,
}

impl NullLawSpec {
    pub fn new(n: usize, partition: GroupPartition) -> Result<Self> {
        let p = partition.p();
        if p >= n {
            return Err(Error::Domain(format!("likelihood ratio requires p < n, got p = {p}, n = {n}")));
        }
        Ok(Self { n, partition })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn p(&self) -> usize {
        self.partition.p()
    }

    /// v = n − p.
    pub fn v(&self) -> usize {
        self.n - self.p()
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

/// f = (p² − Σ qᵢ²)/2, the degrees of freedom of the classical limit.
pub fn degrees_f(partition: &GroupPartition) -> f64 {
    let p = partition.p() as f64;
    let sq: f64 = partition.sizes().iter().map(|&q| (q * q) as f64).sum();
    0.5 * (p * p - sq)
}

/// Bartlett correction factor ρₙ.
pub fn bartlett_rho(spec: &NullLawSpec) -> f64 {
    let p = spec.p() as f64;
    let (sq, cu) = spec.partition.sizes().iter().fold((0.0, 0.0), |(s, c), &q| {
        let q = q as f64;
        (s + q * q, c + q * q * q)
    });
    let d2 = p * p - sq;
    let d3 = p * p * p - cu;
    1.0 - (2.0 * d3 + 9.0 * d2) / (6.0 * spec.nf() * d2)
}

/// Δ_{g,n,q}(t) = Σ_{i=1}^{q} g((n−i)/2 + t).
pub fn delta_sum<G: Fn(f64) -> f64>(g: G, n: usize, q: usize, t: f64) -> Result<f64> {
    if q == 0 || q >= n {
        return Err(Error::domain(format!("delta_sum requires 1 <= q < n, got q = {q}, n = {n}")));
    }
    let lowest = (n - q) as f64 / 2.0 + t;
    if !(lowest > 0.0) {
        return Err(Error::domain(format!("delta_sum requires t > -(n-q)/2 = {}, got {t}", -((n - q) as f64) / 2.0)));
    }
    Ok((1..=q).map(|i| g((n - i) as f64 / 2.0 + t)).sum())
}

fn check_shift(spec: &NullLawSpec, x: f64) -> Result<()> {
    let bound = -(spec.v() as f64) / 2.0;
    if !(x > bound) {
        return Err(Error::domain(format!("argument must exceed -(n-p)/2 = {bound}, got {x}")));
    }
    Ok(())
}

/// Ψ_{g,n,p}(x) = Δ_{g,n,p}(x) − Σᵢ Δ_{g,n,qᵢ}(x).
pub fn psi_functional<G: Fn(f64) -> f64>(g: G, spec: &NullLawSpec, x: f64) -> Result<f64> {
    check_shift(spec, x)?;
    Ok(block_difference_sum(spec, |outer, inner| g(outer + x) - g(inner + x)))
}

/// Σ_{i≥2} Σ_{j≤qᵢ} term((n−q*ᵢ−j)/2, (n−j)/2).
fn block_difference_sum<T: Fn(f64, f64) -> f64>(spec: &NullLawSpec, term: T) -> f64 {
    let n = spec.n;
    spec.partition
        .trailing_blocks()
        .map(|(before, size)| {
            (1..=size).map(|j| term((n - before - j) as f64 / 2.0, (n - j) as f64 / 2.0)).sum::<f64>()
        })
        .sum()
}

/// βₙᵣ(x) = Ψ_{g,n,p}(x) with g(y) = y⁻ʳ; always nonnegative.
pub fn beta_nr(spec: &NullLawSpec, r: u32, x: f64) -> Result<f64> {
    if r == 0 {
        return Err(Error::domain("beta_nr requires order r >= 1"));
    }
    check_shift(spec, x)?;
    let r = r as i32;
    Ok(block_difference_sum(spec, |outer, inner| (outer + x).powi(-r) - (inner + x).powi(-r)))
}

/// Exact null mean of −2 log Λₙ: μₙ = −n Ψ_{ψ,n,p}(0).
pub fn mu_n(spec: &NullLawSpec) -> f64 {
    -spec.nf() * block_difference_sum(spec, |outer, inner| digamma_pos(outer) - digamma_pos(inner))
}

/// b(n, q) = Σ_{j=1}^{q} (n−j)⁻².
pub fn b_count(n: usize, q: usize) -> Result<f64> {
    if q == 0 || q >= n {
        return Err(Error::domain(format!("b_count requires 1 <= q < n, got q = {q}, n = {n}")));
    }
    Ok((1..=q).map(|j| ((n - j) as f64).powi(-2)).sum())
}

/// b(n, p) − Σᵢ b(n, qᵢ), evaluated block-wise.
fn b_difference(spec: &NullLawSpec) -> f64 {
    // (outer, inner) are halves of (n − q* − j, n − j)
    block_difference_sum(spec, |outer, inner| (2.0 * outer).powi(-2) - (2.0 * inner).powi(-2))
}

/// σ̄ₙ² = 2n²(Σ_{j≤p} 1/(n−j) − Σᵢ Σ_{j≤qᵢ} 1/(n−j)).
pub fn bar_sigma2_n(spec: &NullLawSpec) -> f64 {
    let n = spec.nf();
    let harmonic = block_difference_sum(spec, |outer, inner| 0.5 / outer - 0.5 / inner);
    2.0 * n * n * harmonic
}

/// σₙ² = σ̄ₙ² + 2n²(b(n,p) − Σᵢ b(n,qᵢ)).
pub fn sigma2_n(spec: &NullLawSpec) -> f64 {
    let n = spec.nf();
    bar_sigma2_n(spec) + 2.0 * n * n * b_difference(spec)
}

fn log1m_frac(q: usize, n: usize) -> f64 {
    (-(q as f64) / n as f64).ln_1p()
}

/// Closed-form centering μ̄ₙ built from logarithms.
pub fn bar_mu_n(spec: &NullLawSpec) -> f64 {
    let n = spec.nf();
    let nn = spec.n;
    let p = spec.p();
    let blocks: f64 = spec.partition.sizes().iter().map(|&q| (q as f64 - n + 1.5) * log1m_frac(q, nn)).sum();
    n * blocks - n * (p as f64 - n + 1.5) * log1m_frac(p, nn) + n / 3.0 * b_difference(spec)
}

/// Closed-form variance τₙ² built from logarithms.
pub fn tau2_n(spec: &NullLawSpec) -> f64 {
    let n = spec.nf();
    let nn = spec.n;
    let logs: f64 = spec.partition.sizes().iter().map(|&q| log1m_frac(q, nn)).sum::<f64>() - log1m_frac(spec.p(), nn);
    2.0 * n * n * logs + 2.0 * n * n * b_difference(spec)
}

/// The partition-only constants needed to calibrate −2 log Λₙ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullMoments {
    pub f: f64,
    pub rho: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub bar_mu: f64,
    pub tau2: f64,
}

impl NullMoments {
    pub fn new(spec: &NullLawSpec) -> Self {
        Self {
            f: degrees_f(&spec.partition),
            rho: bartlett_rho(spec),
            mu: mu_n(spec),
            sigma2: sigma2_n(spec),
            bar_mu: bar_mu_n(spec),
            tau2: tau2_n(spec),
        }
    }
}
