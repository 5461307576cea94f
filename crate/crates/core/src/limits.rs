//! The boundary-regime limit law −Σ_{j=v}^{r+v−1} log Y_j with independent
//! Y_j ~ χ²_j.
//!
//! For `r = 1` the law is −log χ²_v and everything is closed form. For
//! `r > 1` the cdf is the empirical cdf of a cached sample of
//! [`CACHE_SIZE`] draws generated from a fixed seed, so p-values are
//! reproducible across runs and carry a standard error of at most
//! `0.5 / sqrt(CACHE_SIZE)` = 5e-4.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{chisq_cdf, chisq_pdf, chisq_quantile, chisq_sf, standard_gamma};

/// Number of draws in a cached sample.
pub const CACHE_SIZE: usize = 1_000_000;

/// Seed of every cached sample; the stream is selected by `(r, v)`.
pub const CACHE_SEED: u64 = 0x4C4F_4743_4849_0001;

/// Law of −Σ_{j=v}^{r+v−1} log Y_j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogChiLimit {
    pub r: u32,
    pub v: u32,
}

impl LogChiLimit {
    pub fn new(r: u32, v: u32) -> Result<Self> {
        if r == 0 || v == 0 {
            return Err(Error::domain(format!("log-chi limit needs r >= 1 and v >= 1, got r = {r}, v = {v}")));
        }
        Ok(Self { r, v })
    }

    /// E[−Σ log Y_j] = −Σ (ψ(j/2) + log 2).
    pub fn mean(&self) -> f64 {
        self.dofs().map(|j| -(crate::specfun::digamma_pos(j / 2.0) + std::f64::consts::LN_2)).sum()
    }

    fn dofs(&self) -> impl Iterator<Item = f64> {
        (self.v..self.v + self.r).map(f64::from)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Y_j = 2 G(j/2)
        self.dofs().map(|j| -(2.0 * standard_gamma(j / 2.0, rng)).ln()).sum()
    }
}

/// P(L ≤ x).
pub fn logchi_cdf(law: LogChiLimit, x: f64) -> f64 {
    if law.r == 1 {
        // P(−log Y ≤ x) = P(Y ≥ e^{−x})
        return chisq_sf((-x).exp(), law.v as f64).expect("v >= 1");
    }
    let sample = cached_sample(law);
    sample.partition_point(|&s| s <= x) as f64 / sample.len() as f64
}

/// P(L > x), the upper-tail p-value.
pub fn logchi_sf(law: LogChiLimit, x: f64) -> f64 {
    if law.r == 1 {
        return chisq_cdf((-x).exp(), law.v as f64).expect("v >= 1");
    }
    1.0 - logchi_cdf(law, x)
}

/// Quantile of the law; for `r > 1` the empirical quantile of the cached sample.
pub fn logchi_quantile(law: LogChiLimit, prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::domain(format!("quantile requires 0 < prob < 1, got {prob}")));
    }
    if law.r == 1 {
        return Ok(-chisq_quantile(1.0 - prob, law.v as f64)?.ln());
    }
    let sample = cached_sample(law);
    let idx = ((prob * sample.len() as f64).ceil() as usize).clamp(1, sample.len()) - 1;
    Ok(sample[idx])
}

/// Density for `r = 1`: f(x) = g_v(e^{−x}) e^{−x} with g_v the χ²_v density.
pub fn logchi_density(law: LogChiLimit, x: f64) -> Result<f64> {
    if law.r != 1 {
        return Err(Error::domain(format!("closed-form density is only available for r = 1, got r = {}", law.r)));
    }
    let y = (-x).exp();
    if y == 0.0 || !y.is_finite() {
        return Ok(0.0);
    }
    Ok(chisq_pdf(y, law.v as f64)? * y)
}

/// Gaussian kernel density estimate over (a prefix of) the cached sample.
///
/// Used to draw a reference curve when no closed form exists (`r > 1`).
pub fn logchi_smoothed_density(law: LogChiLimit, xs: &[f64]) -> Vec<f64> {
    const KDE_POINTS: usize = 50_000;
    let sample = cached_sample(law);
    // the cache is sorted; take an evenly strided subsample
    let stride = (sample.len() / KDE_POINTS).max(1);
    let sub: Vec<f64> = sample.iter().step_by(stride).copied().collect();
    let m = sub.len() as f64;
    let mean = sub.iter().sum::<f64>() / m;
    let sd = (sub.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let bw = 1.06 * sd * m.powf(-0.2);
    xs.iter()
        .map(|&x| {
            let lo = sub.partition_point(|&s| s < x - 8.0 * bw);
            let hi = sub.partition_point(|&s| s <= x + 8.0 * bw);
            sub[lo..hi].iter().map(|&s| crate::specfun::std_normal_pdf((x - s) / bw)).sum::<f64>() / (m * bw)
        })
        .collect()
}

/// `count` independent draws of the law.
pub fn logchi_sample<R: Rng + ?Sized>(law: LogChiLimit, count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| law.draw(rng)).collect()
}

type Cache = RwLock<HashMap<LogChiLimit, Arc<Vec<f64>>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Sorted cached sample of the law, generated on first use.
pub fn cached_sample(law: LogChiLimit) -> Arc<Vec<f64>> {
    if let Some(s) = cache().read().expect("cache lock").get(&law) {
        return Arc::clone(s);
    }
    let mut guard = cache().write().expect("cache lock");
    Arc::clone(guard.entry(law).or_insert_with(|| Arc::new(generate_sorted(law))))
}

fn generate_sorted(law: LogChiLimit) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(CACHE_SEED);
    rng.set_stream((u64::from(law.r) << 32) | u64::from(law.v));
    let mut s = logchi_sample(law, CACHE_SIZE, &mut rng);
    s.sort_by(f64::total_cmp);
    s
}

const MAGIC: &[u8; 4] = b"LCHI";
const FORMAT_VERSION: u32 = 1;

/// Writes the cached sample of `law` to `path`.
///
/// Layout (little endian): `"LCHI"`, version u32, r u32, v u32, seed u64,
/// count u64, then `count` sorted f64 values.
pub fn save_cached_sample(law: LogChiLimit, path: &Path) -> Result<()> {
    let sample = cached_sample(law);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&law.r.to_le_bytes())?;
    w.write_all(&law.v.to_le_bytes())?;
    w.write_all(&CACHE_SEED.to_le_bytes())?;
    w.write_all(&(sample.len() as u64).to_le_bytes())?;
    for v in sample.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a sample written by [`save_cached_sample`] into the cache.
///
/// Files produced with a different seed or size are rejected so that
/// p-values never depend on which file happened to be loaded.
pub fn load_cached_sample(path: &Path) -> Result<LogChiLimit> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io(format!("{} is not a log-chi sample file", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Io(format!("unsupported sample file version {version}")));
    }
    let law = LogChiLimit::new(read_u32(&mut r)?, read_u32(&mut r)?)?;
    let seed = read_u64(&mut r)?;
    let count = read_u64(&mut r)? as usize;
    if seed != CACHE_SEED || count != CACHE_SIZE {
        return Err(Error::Io(format!(
            "sample file has seed {seed:#x} and {count} draws; expected {CACHE_SEED:#x} and {CACHE_SIZE}"
        )));
    }
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Io("sample file is not sorted".into()));
    }
    cache().write().expect("cache lock").insert(law, Arc::new(values));
    Ok(law)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
