//! Monte Carlo harness: null histograms with reference densities and
//! size/power tables under the two-block alternatives.
//!
//! Every replicate draws from its own ChaCha stream `(seed, replicate)`,
//! so results do not depend on how replicates are spread over threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{logchi_cdf, logchi_density, logchi_smoothed_density, LogChiLimit};
use crate::lrt::{neg2_log_lambda, scatter, DataMatrix};
use crate::oracle::sample_neg2_log_lambda;
use crate::partition::NullLawSpec;
use crate::specfun::{chisq_cdf, chisq_pdf, std_normal_cdf, std_normal_pdf};
use crate::statistics::{LrtCalibration, StatisticName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// i.i.d. N_p(0, I) rows.
    NullGaussian,
    /// x = (1+c)z on block 1; x_{q₁+j} = z_{q₁+j} + c·z_j for j ≤ q₂.
    Model1,
    /// Model 1 with only q₂ − 1 coupled pairs and x_p = p^{−1/4} z_p.
    Model2,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::NullGaussian => "null_gaussian",
            Model::Model1 => "model1",
            Model::Model2 => "model2",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "null" | "null_gaussian" | "0" => Model::NullGaussian,
            "model1" | "1" => Model::Model1,
            "model2" | "2" => Model::Model2,
            other => return Err(Error::Domain(format!("unknown model {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: Model,
    pub c: f64,
    pub spec: NullLawSpec,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub methods: Vec<StatisticName>,
}

impl SimConfig {
    /// Checks the invariants and returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.reps == 0 {
            return Err(Error::Domain("reps must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !self.c.is_finite() {
            return Err(Error::Domain("effect size c must be finite".into()));
        }
        let mut warnings = Vec::new();
        if self.model != Model::NullGaussian {
            let q = self.spec.partition().sizes();
            if q.len() != 2 {
                return Err(Error::Partition(format!("{} requires exactly two blocks, got {}", self.model, q.len())));
            }
            if q[1] >= q[0] {
                warnings.push(format!("{} assumes q1 > q2, got q1 = {}, q2 = {}", self.model, q[0], q[1]));
            }
        }
        let k2 = self.spec.partition().k() == 2;
        for m in &self.methods {
            if !m.is_lrt_family() && !k2 {
                return Err(Error::Partition(format!("{m} requires exactly two blocks")));
            }
        }
        Ok(warnings)
    }
}

/// RNG for one replicate: stream `index` of the ChaCha generator seeded by `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn standard_normal_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // fill row by row so the draw order is the natural observation order
    let mut z = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    z
}

/// Data for one replicate.
pub fn generate_sample(config: &SimConfig, index: u64) -> Result<DataMatrix> {
    let mut rng = replicate_rng(config.seed, index);
    generate_with_rng(config, &mut rng)
}

fn generate_with_rng(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<DataMatrix> {
    let n = config.spec.n();
    let part = config.spec.partition();
    let p = part.p();
    let z = standard_normal_matrix(n, p, rng);
    if config.model == Model::NullGaussian {
        return DataMatrix::from_matrix(z);
    }
    let q = part.sizes();
    if q.len() != 2 {
        return Err(Error::Partition(format!("{} requires exactly two blocks", config.model)));
    }
    let (q1, q2) = (q[0], q[1]);
    let c = config.c;
    let coupled = match config.model {
        Model::Model1 => q2,
        _ => q2 - 1,
    };
    let mut x = z.clone();
    for mut col in x.columns_mut(0, q1).column_iter_mut() {
        col.scale_mut(1.0 + c);
    }
    for j in 0..coupled {
        // x_{q1+j} = z_{q1+j} + c z_j (zero-based)
        let src = z.column(j);
        x.column_mut(q1 + j).axpy(c, &src, 1.0);
    }
    if config.model == Model::Model2 {
        x.column_mut(p - 1).scale_mut((p as f64).powf(-0.25));
    }
    DataMatrix::from_matrix(x)
}

/// Rows x = L z with z ~ N(0, I); `factor` is a p×p matrix L (so Cov = LL′).
pub fn sample_gaussian(n: usize, factor: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<DataMatrix> {
    if factor.nrows() != factor.ncols() {
        return Err(Error::Data("covariance factor must be square".into()));
    }
    let z = standard_normal_matrix(n, factor.nrows(), rng);
    DataMatrix::from_matrix(z * factor.transpose())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRate {
    pub method: StatisticName,
    pub reject_rate: f64,
    /// Binomial standard error sqrt(f(1 − f)/reps).
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizePowerRow {
    pub config: SimConfig,
    pub rates: Vec<MethodRate>,
}

impl SizePowerRow {
    pub fn rate(&self, method: StatisticName) -> Option<f64> {
        self.rates.iter().find(|r| r.method == method).map(|r| r.reject_rate)
    }
}

fn replicate_rejections(config: &SimConfig, calib: &LrtCalibration, index: u64) -> Result<Vec<u64>> {
    let data = generate_sample(config, index)?;
    let a = scatter(&data)?;
    let reports = calib.evaluate(&a, &config.methods)?;
    Ok(reports.iter().map(|r| u64::from(r.reject_at(config.alpha))).collect())
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Empirical rejection frequency of each method over `reps` replicates.
pub fn estimate_size_power(config: &SimConfig) -> Result<SizePowerRow> {
    config.validate()?;
    let calib = LrtCalibration::new(&config.spec);
    let zero = vec![0u64; config.methods.len()];
    let counts = (0..config.reps as u64)
        .into_par_iter()
        .map(|i| replicate_rejections(config, &calib, i))
        .try_reduce(|| zero.clone(), |a, b| Ok(add_counts(a, b)))?;
    Ok(tabulate(config, counts))
}

/// Same as [`estimate_size_power`] on the current thread only.
pub fn estimate_size_power_serial(config: &SimConfig) -> Result<SizePowerRow> {
    config.validate()?;
    let calib = LrtCalibration::new(&config.spec);
    let mut counts = vec![0u64; config.methods.len()];
    for i in 0..config.reps as u64 {
        counts = add_counts(counts, replicate_rejections(config, &calib, i)?);
    }
    Ok(tabulate(config, counts))
}

fn tabulate(config: &SimConfig, counts: Vec<u64>) -> SizePowerRow {
    let reps = config.reps as f64;
    let rates = config
        .methods
        .iter()
        .zip(counts)
        .map(|(&method, k)| {
            let f = k as f64 / reps;
            MethodRate { method, reject_rate: f, se: (f * (1.0 - f) / reps).sqrt() }
        })
        .collect();
    SizePowerRow { config: config.clone(), rates }
}

pub const TABLE_HEADER: &str = "model,q1,q2,n,c,alpha,method,reject_rate,se,reps,seed";

/// Writes rows in the table CSV schema. With more than two blocks the
/// `q2` column lists blocks 2..k separated by `;`.
pub fn write_table_csv<W: Write>(rows: &[SizePowerRow], mut out: W) -> Result<()> {
    writeln!(out, "{TABLE_HEADER}")?;
    for row in rows {
        let cfg = &row.config;
        let q = cfg.spec.partition().sizes();
        let rest: Vec<String> = q[1..].iter().map(|s| s.to_string()).collect();
        for rate in &row.rates {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                cfg.model,
                q[0],
                rest.join(";"),
                cfg.spec.n(),
                cfg.c,
                cfg.alpha,
                rate.method,
                rate.reject_rate,
                rate.se,
                cfg.reps,
                cfg.seed
            )?;
        }
    }
    Ok(())
}

/// Statistics for which a null histogram with a reference density is defined.
pub const HISTOGRAM_STATISTICS: [StatisticName; 4] =
    [StatisticName::Bartlett, StatisticName::CltT0, StatisticName::AlrtZn, StatisticName::LogChi];

/// How null replicates of −2 log Λₙ are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullSource {
    /// Gaussian data → scatter matrix → determinants.
    Pipeline,
    /// Beta-product representation of Wₙ.
    BetaProduct,
}

/// `reps` null draws of −2 log Λₙ.
pub fn null_lrt_sample(spec: &NullLawSpec, reps: usize, seed: u64, source: NullSource) -> Result<Vec<f64>> {
    let config = SimConfig {
        model: Model::NullGaussian,
        c: 0.0,
        spec: spec.clone(),
        reps,
        seed,
        alpha: 0.05,
        methods: Vec::new(),
    };
    (0..reps as u64)
        .into_par_iter()
        .map(|i| match source {
            NullSource::Pipeline => {
                let data = generate_sample(&config, i)?;
                neg2_log_lambda(&scatter(&data)?, spec.partition(), spec.n())
            }
            NullSource::BetaProduct => Ok(sample_neg2_log_lambda(spec, &mut replicate_rng(seed, i))),
        })
        .collect()
}

/// `reps` null draws of a calibrated LRT-family statistic.
pub fn null_statistic_sample(
    spec: &NullLawSpec,
    stat: StatisticName,
    reps: usize,
    seed: u64,
    source: NullSource,
) -> Result<Vec<f64>> {
    if !stat.is_lrt_family() {
        return Err(Error::Domain(format!("{stat} has no null-histogram reference")));
    }
    let calib = LrtCalibration::new(spec);
    null_lrt_sample(spec, reps, seed, source)?.into_iter().map(|s| calib.lrt_report(stat, s).map(|r| r.value)).collect()
}

/// Reference limit law of a histogram statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    ChiSq(f64),
    StdNormal,
    LogChi(LogChiLimit),
}

impl Reference {
    pub fn for_statistic(stat: StatisticName, spec: &NullLawSpec) -> Result<Self> {
        let f = crate::partition::degrees_f(spec.partition());
        Ok(match stat {
            StatisticName::Bartlett | StatisticName::AlrtZn => Reference::ChiSq(f),
            StatisticName::CltT0 | StatisticName::CltT1 => Reference::StdNormal,
            StatisticName::LogChi => {
                Reference::LogChi(LogChiLimit::new(spec.partition().r_gap() as u32, spec.v() as u32)?)
            }
            other => return Err(Error::Domain(format!("{other} has no null-histogram reference"))),
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Reference::ChiSq(df) => chisq_cdf(x, df).expect("df > 0"),
            Reference::StdNormal => std_normal_cdf(x),
            Reference::LogChi(law) => logchi_cdf(law, x),
        }
    }

    pub fn densities(&self, xs: &[f64]) -> Vec<f64> {
        match *self {
            Reference::ChiSq(df) => xs.iter().map(|&x| chisq_pdf(x, df).expect("df > 0")).collect(),
            Reference::StdNormal => xs.iter().map(|&x| std_normal_pdf(x)).collect(),
            Reference::LogChi(law) if law.r == 1 => {
                xs.iter().map(|&x| logchi_density(law, x).expect("r = 1")).collect()
            }
            Reference::LogChi(law) => logchi_smoothed_density(law, xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramOutput {
    pub statistic: StatisticName,
    /// `bins + 1` increasing bin edges.
    pub edges: Vec<f64>,
    /// Counts divided by (reps × bin width).
    pub density: Vec<f64>,
    /// Reference density evaluated on a grid spanning the bins.
    pub curve: Vec<(f64, f64)>,
    /// The null draws the histogram was built from.
    pub sample: Vec<f64>,
}

pub const DEFAULT_BINS: usize = 60;
const CURVE_POINTS: usize = 200;

/// Null histogram of `stat` with its reference density overlay.
pub fn null_histogram(
    config: &SimConfig,
    stat: StatisticName,
    bins: usize,
    source: NullSource,
) -> Result<HistogramOutput> {
    if !HISTOGRAM_STATISTICS.contains(&stat) {
        return Err(Error::Domain(format!(
            "no null-histogram reference is defined for {stat}; use one of bartlett, clt_T0, alrt_Zn, logchi"
        )));
    }
    if bins == 0 {
        return Err(Error::Domain("bins must be at least 1".into()));
    }
    config.validate()?;
    let reference = Reference::for_statistic(stat, &config.spec)?;
    let sample = null_statistic_sample(&config.spec, stat, config.reps, config.seed, source)?;

    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &s in &sample {
        let idx = (((s - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let scale = 1.0 / (sample.len() as f64 * width);
    let density = counts.iter().map(|&c| c as f64 * scale).collect();

    let xs: Vec<f64> = (0..CURVE_POINTS).map(|i| lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64).collect();
    let ys = reference.densities(&xs);
    Ok(HistogramOutput { statistic: stat, edges, density, curve: xs.into_iter().zip(ys).collect(), sample })
}

pub const HISTOGRAM_HEADER: &str = "kind,x_left,x_right,density";

/// Writes `bin` rows followed by `curve` rows (curve rows leave `x_right` empty).
pub fn write_histogram_csv<W: Write>(hist: &HistogramOutput, mut out: W) -> Result<()> {
    writeln!(out, "{HISTOGRAM_HEADER}")?;
    for (i, d) in hist.density.iter().enumerate() {
        writeln!(out, "bin,{},{},{}", hist.edges[i], hist.edges[i + 1], d)?;
    }
    for (x, d) in &hist.curve {
        writeln!(out, "curve,{x},,{d}")?;
    }
    Ok(())
}
