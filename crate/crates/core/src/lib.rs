//! Likelihood-ratio tests for independence of sub-vectors of a
//! multivariate normal vector.
//!
//! The crate covers three calibrations of −2 log Λₙ (fixed-dimension
//! chi-square with Bartlett correction, high-dimensional normal, and the
//! log-chi-square boundary limit), the adjusted statistic Zₙ, two trace
//! competitors for two blocks, exact null oracles, and a Monte Carlo
//! harness for size, power and null histograms.
//!
//! ```
//! use hdit_core::{GroupPartition, NullLawSpec, LrtCalibration};
//!
//! let spec = NullLawSpec::new(101, "6,4".parse::<GroupPartition>().unwrap()).unwrap();
//! let calib = LrtCalibration::new(&spec);
//! let z = calib.alrt_zn(calib.moments().mu);
//! assert!((z.value - 24.0).abs() < 1e-9);
//! ```

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod edf;
pub mod error;
pub mod limits;
pub mod lrt;
pub mod oracle;
pub mod partition;
pub mod sim;
pub mod specfun;
pub mod statistics;

pub use error::{Error, Result};
pub use limits::LogChiLimit;
pub use lrt::{neg2_log_lambda, scatter, DataMatrix, ScatterMatrix};
pub use oracle::{exact_log_moment, sample_log_w, MomentQuery};
pub use partition::{GroupPartition, NullLawSpec, NullMoments};
pub use sim::{Model, SimConfig};
pub use statistics::{LrtCalibration, ReferenceLaw, StatisticName, StatisticReport};
