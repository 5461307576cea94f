//! Calibrated decision statistics.
//!
//! The likelihood-ratio family (Bartlett chi-square, T₀, T₁, Zₙ, LogChi)
//! are functions of a single value of −2 log Λₙ; the trace tests T₂ and T₃
//! need the scatter matrix itself. Every test rejects in the upper tail.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{logchi_sf, LogChiLimit};
use crate::lrt::{cholesky_pd, neg2_log_lambda, ScatterMatrix};
use crate::partition::{NullLawSpec, NullMoments};
use crate::specfun::{chisq_sf, std_normal_sf};

/// Above this value of r + v the log-chi limit is a poor approximation.
pub const LOGCHI_REGIME_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatisticName {
    #[serde(rename = "bartlett")]
    Bartlett,
    #[serde(rename = "clt_T0")]
    CltT0,
    #[serde(rename = "clt_T1")]
    CltT1,
    #[serde(rename = "alrt_Zn")]
    AlrtZn,
    #[serde(rename = "logchi")]
    LogChi,
    #[serde(rename = "trace_T2")]
    TraceT2,
    #[serde(rename = "trace_T3")]
    TraceT3,
}

impl StatisticName {
    pub const ALL: [StatisticName; 7] = [
        StatisticName::Bartlett,
        StatisticName::CltT0,
        StatisticName::CltT1,
        StatisticName::AlrtZn,
        StatisticName::LogChi,
        StatisticName::TraceT2,
        StatisticName::TraceT3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticName::Bartlett => "bartlett",
            StatisticName::CltT0 => "clt_T0",
            StatisticName::CltT1 => "clt_T1",
            StatisticName::AlrtZn => "alrt_Zn",
            StatisticName::LogChi => "logchi",
            StatisticName::TraceT2 => "trace_T2",
            StatisticName::TraceT3 => "trace_T3",
        }
    }

    /// True for statistics that are functions of −2 log Λₙ alone.
    pub fn is_lrt_family(&self) -> bool {
        !matches!(self, StatisticName::TraceT2 | StatisticName::TraceT3)
    }
}

impl fmt::Display for StatisticName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticName {
    type Err = Error;

    /// Accepts the canonical names and short aliases (`chisq`, `t0`, `t1`,
    /// `alrt`/`zn`, `t2`, `t3`), case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "bartlett" | "chisq" | "classic" => StatisticName::Bartlett,
            "clt_t0" | "t0" | "clt" => StatisticName::CltT0,
            "clt_t1" | "t1" => StatisticName::CltT1,
            "alrt_zn" | "alrt" | "zn" => StatisticName::AlrtZn,
            "logchi" => StatisticName::LogChi,
            "trace_t2" | "t2" => StatisticName::TraceT2,
            "trace_t3" | "t3" => StatisticName::TraceT3,
            other => return Err(Error::Domain(format!("unknown statistic {other:?}"))),
        })
    }
}

/// Reference distribution used to turn a value into a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law")]
pub enum ReferenceLaw {
    ChiSq { df: f64 },
    StdNormal,
    LogChiLimit { r: u32, v: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticReport {
    pub name: StatisticName,
    pub value: f64,
    pub reference_law: ReferenceLaw,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl StatisticReport {
    fn new(name: StatisticName, value: f64, reference_law: ReferenceLaw) -> Self {
        let p_value = match reference_law {
            ReferenceLaw::ChiSq { df } => chisq_sf(value, df).expect("df > 0"),
            ReferenceLaw::StdNormal => std_normal_sf(value),
            ReferenceLaw::LogChiLimit { r, v } => logchi_sf(LogChiLimit { r, v }, value),
        };
        Self { name, value, reference_law, p_value: p_value.clamp(0.0, 1.0), warning: None }
    }

    pub fn reject_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Calibration constants for one `(n, partition)`, computed once.
#[derive(Debug, Clone)]
pub struct LrtCalibration {
    spec: NullLawSpec,
    moments: NullMoments,
}

impl LrtCalibration {
    pub fn new(spec: &NullLawSpec) -> Self {
        Self { spec: spec.clone(), moments: NullMoments::new(spec) }
    }

    pub fn spec(&self) -> &NullLawSpec {
        &self.spec
    }

    pub fn moments(&self) -> &NullMoments {
        &self.moments
    }

    /// −2ρₙ log Λₙ against χ²_f.
    pub fn bartlett(&self, stat: f64) -> StatisticReport {
        let m = &self.moments;
        StatisticReport::new(StatisticName::Bartlett, m.rho * stat, ReferenceLaw::ChiSq { df: m.f })
    }

    /// T₀ = (stat − μₙ)/σₙ.
    pub fn clt_t0(&self, stat: f64) -> StatisticReport {
        let m = &self.moments;
        StatisticReport::new(StatisticName::CltT0, (stat - m.mu) / m.sigma2.sqrt(), ReferenceLaw::StdNormal)
    }

    /// T₁ = (stat − μ̄ₙ)/τₙ.
    pub fn clt_t1(&self, stat: f64) -> StatisticReport {
        let m = &self.moments;
        StatisticReport::new(StatisticName::CltT1, (stat - m.bar_mu) / m.tau2.sqrt(), ReferenceLaw::StdNormal)
    }

    /// Zₙ = fₙ + (stat − μₙ)·sqrt(2fₙ/σₙ²) against χ²_{fₙ}.
    pub fn alrt_zn(&self, stat: f64) -> StatisticReport {
        let m = &self.moments;
        let slope = (2.0 * m.f / m.sigma2).sqrt();
        StatisticReport::new(StatisticName::AlrtZn, stat * slope + m.f - m.mu * slope, ReferenceLaw::ChiSq { df: m.f })
    }

    /// (stat − r·n·log n)/n against the log-chi limit with r = p − q_max, v = n − p.
    pub fn logchi(&self, stat: f64) -> StatisticReport {
        let r = self.spec.partition().r_gap();
        let v = self.spec.v();
        let n = self.spec.n() as f64;
        let value = (stat - r as f64 * n * n.ln()) / n;
        let mut rep =
            StatisticReport::new(StatisticName::LogChi, value, ReferenceLaw::LogChiLimit { r: r as u32, v: v as u32 });
        if r + v > LOGCHI_REGIME_LIMIT {
            rep.warning = Some(format!(
                "r + v = {} exceeds {LOGCHI_REGIME_LIMIT}; the log-chi limit is unlikely to be accurate here",
                r + v
            ));
        }
        rep
    }

    /// Calibrates an already computed −2 log Λₙ. Trace statistics are rejected.
    pub fn lrt_report(&self, name: StatisticName, stat: f64) -> Result<StatisticReport> {
        Ok(match name {
            StatisticName::Bartlett => self.bartlett(stat),
            StatisticName::CltT0 => self.clt_t0(stat),
            StatisticName::CltT1 => self.clt_t1(stat),
            StatisticName::AlrtZn => self.alrt_zn(stat),
            StatisticName::LogChi => self.logchi(stat),
            StatisticName::TraceT2 | StatisticName::TraceT3 => {
                return Err(Error::Domain(format!("{name} is not a function of -2 log Lambda")))
            }
        })
    }

    /// Evaluates the requested statistics on one scatter matrix.
    pub fn evaluate(&self, a: &ScatterMatrix, names: &[StatisticName]) -> Result<Vec<StatisticReport>> {
        let mut stat = None;
        names
            .iter()
            .map(|&name| match name {
                StatisticName::TraceT2 => trace_t2(a, &self.spec),
                StatisticName::TraceT3 => trace_t3(a, &self.spec),
                _ => {
                    let s = match stat {
                        Some(s) => s,
                        None => {
                            let s = neg2_log_lambda(a, self.spec.partition(), self.spec.n())?;
                            stat = Some(s);
                            s
                        }
                    };
                    self.lrt_report(name, s)
                }
            })
            .collect()
    }
}

pub fn bartlett_test(stat: f64, spec: &NullLawSpec) -> StatisticReport {
    LrtCalibration::new(spec).bartlett(stat)
}

pub fn clt_t0(stat: f64, spec: &NullLawSpec) -> StatisticReport {
    LrtCalibration::new(spec).clt_t0(stat)
}

pub fn clt_t1(stat: f64, spec: &NullLawSpec) -> StatisticReport {
    LrtCalibration::new(spec).clt_t1(stat)
}

pub fn alrt_zn(stat: f64, spec: &NullLawSpec) -> StatisticReport {
    LrtCalibration::new(spec).alrt_zn(stat)
}

pub fn logchi_test(stat: f64, spec: &NullLawSpec) -> StatisticReport {
    LrtCalibration::new(spec).logchi(stat)
}

fn two_blocks(spec: &NullLawSpec, what: &str) -> Result<(usize, usize)> {
    match spec.partition().sizes() {
        &[q1, q2] => Ok((q1, q2)),
        other => Err(Error::Partition(format!("{what} requires exactly two blocks, got {}", other.len()))),
    }
}

/// Centering and variance (aₙ, bₙ) of Lₙ, closed form.
pub fn t2_moments(n: usize, q1: usize, q2: usize) -> (f64, f64) {
    let m = n as f64 - 1.0;
    let (q1, q2) = (q1 as f64, q2 as f64);
    let a = q1 * q2 / m;
    let b = 2.0 * q1 * q2 * (m - q1) * (m - q2) / m.powi(4);
    (a, b)
}

/// (aₙ, bₙ) from the ratio parametrization r₁ = q₂/q₁, r₂ = q₂/(n−1−q₁),
/// h² = r₁ + r₂ − r₁r₂: aₙ = q₂r₂/(r₁+r₂), bₙ = 2h²r₁²r₂²/(r₁+r₂)⁴.
pub fn t2_moments_ratio_form(n: usize, q1: usize, q2: usize) -> (f64, f64) {
    let (q1, q2) = (q1 as f64, q2 as f64);
    let r1 = q2 / q1;
    let r2 = q2 / (n as f64 - 1.0 - q1);
    let h2 = r1 + r2 - r1 * r2;
    let a = q2 * r2 / (r1 + r2);
    let b = 2.0 * h2 * r1 * r1 * r2 * r2 / (r1 + r2).powi(4);
    (a, b)
}

/// T₂ = (Lₙ − aₙ)/sqrt(bₙ) with Lₙ = tr(A₂₁A₁₁⁻¹A₁₂A₂₂⁻¹).
pub fn trace_t2(a: &ScatterMatrix, spec: &NullLawSpec) -> Result<StatisticReport> {
    let (q1, q2) = two_blocks(spec, "T2")?;
    a.check_partition(spec.partition())?;
    let part = spec.partition();
    let factor = |i: usize| cholesky_pd(a.block(part, i, i).clone_owned(), || format!("diagonal block {}", i + 1));
    let (c11, c22) = (factor(0)?, factor(1)?);
    let a12 = a.block(part, 0, 1).clone_owned();
    let a21 = a.block(part, 1, 0).clone_owned();
    let m = c11.solve(&a12); // A₁₁⁻¹A₁₂
    let k = c22.solve(&a21); // A₂₂⁻¹A₂₁
    let l_n = k.component_mul(&m.transpose()).sum();
    let (an, bn) = t2_moments(spec.n(), q1, q2);
    Ok(StatisticReport::new(StatisticName::TraceT2, (l_n - an) / bn.sqrt(), ReferenceLaw::StdNormal))
}

/// The 2×2 matrix (γᵢⱼ) behind T₃.
pub fn t3_gamma(a: &ScatterMatrix, spec: &NullLawSpec) -> Result<[[f64; 2]; 2]> {
    two_blocks(spec, "T3")?;
    a.check_partition(spec.partition())?;
    let n = spec.n() as f64;
    if spec.n() < 3 {
        return Err(Error::Domain("T3 requires n >= 3".into()));
    }
    let part = spec.partition();
    let tr = |i: usize| a.block(part, i, i).trace();
    let denom = (n - 2.0) * (n + 1.0);
    let mut g = [[0.0; 2]; 2];
    for (i, row) in g.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            // tr(AᵢⱼAⱼᵢ) = ‖Aᵢⱼ‖²_F since Aⱼᵢ = Aᵢⱼ′
            let cross = a.block(part, i, j).norm_squared();
            *cell = (cross - tr(i) * tr(j) / (n - 1.0)) / denom;
        }
    }
    Ok(g)
}

/// T₃ = sqrt((n−2)(n+1)/2)·γ₁₂/sqrt(γ₁₁γ₂₂).
pub fn trace_t3(a: &ScatterMatrix, spec: &NullLawSpec) -> Result<StatisticReport> {
    let g = t3_gamma(a, spec)?;
    if !(g[0][0] > 0.0) || !(g[1][1] > 0.0) {
        return Err(Error::Degenerate(format!("T3 needs positive diagonal gammas, got {} and {}", g[0][0], g[1][1])));
    }
    let n = spec.n() as f64;
    let value = ((n - 2.0) * (n + 1.0) / 2.0).sqrt() * g[0][1] / (g[0][0] * g[1][1]).sqrt();
    Ok(StatisticReport::new(StatisticName::TraceT3, value, ReferenceLaw::StdNormal))
}
