//! `hdit`: independence tests, simulations, null histograms and moment oracles.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use hdit_core::oracle::{estimate_moment, exact_log_moment, sample_log_w, MomentQuery};
use hdit_core::sim::{
    estimate_size_power, null_histogram, write_histogram_csv, write_table_csv, Model, NullSource, SimConfig,
    DEFAULT_BINS,
};
use hdit_core::{scatter, DataMatrix, Error, GroupPartition, LrtCalibration, NullLawSpec, StatisticName};

#[derive(Parser, Debug)]
#[command(name = "hdit", version, about = "Likelihood-ratio tests for independence of normal sub-vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test block independence of a CSV data matrix (n rows, p columns).
    Test {
        #[arg(long)]
        data: PathBuf,
        /// Block sizes "q1,q2,...,qk" summing to the number of columns.
        #[arg(long)]
        groups: GroupPartition,
        /// Statistic(s) to report.
        #[arg(long = "method", value_delimiter = ',', num_args = 1.., default_value = "alrt_Zn")]
        methods: Vec<StatisticName>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// The first CSV row is a header.
        #[arg(long)]
        header: bool,
    },
    /// Estimate size or power by Monte Carlo and write the table CSV.
    Simulate {
        #[arg(long)]
        model: Model,
        #[arg(long)]
        groups: GroupPartition,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "alrt_Zn,trace_T2,trace_T3")]
        methods: Vec<StatisticName>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null histogram of a statistic with its reference density.
    Nulldist {
        #[arg(long)]
        groups: GroupPartition,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        stat: StatisticName,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Draw from the beta-product law instead of simulating data.
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact log E(W^h) under the null, optionally against Monte Carlo.
    Oracle {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        groups: GroupPartition,
        #[arg(long, allow_negative_numbers = true)]
        h: f64,
        /// Number of beta-product draws for a Monte Carlo comparison.
        #[arg(long)]
        compare: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_numerical() { 3 } else { 2 })
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("HDIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("HDIT_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

fn run(command: Command) -> hdit_core::Result<()> {
    match command {
        Command::Test { data, groups, methods, alpha, header } => cmd_test(&data, groups, &methods, alpha, header),
        Command::Simulate { model, groups, n, c, reps, alpha, seed, methods, out } => {
            let config = SimConfig { model, c, spec: NullLawSpec::new(n, groups)?, reps, seed, alpha, methods };
            for w in config.validate()? {
                eprintln!("warning: {w}");
            }
            let row = estimate_size_power(&config)?;
            write_table_csv(&[row], output(out.as_deref())?)
        }
        Command::Nulldist { groups, n, stat, reps, bins, fast, seed, out } => {
            let config = SimConfig {
                model: Model::NullGaussian,
                c: 0.0,
                spec: NullLawSpec::new(n, groups)?,
                reps,
                seed,
                alpha: 0.05,
                methods: Vec::new(),
            };
            let source = if fast { NullSource::BetaProduct } else { NullSource::Pipeline };
            let hist = null_histogram(&config, stat, bins, source)?;
            write_histogram_csv(&hist, output(out.as_deref())?)
        }
        Command::Oracle { n, groups, h, compare, seed } => cmd_oracle(n, groups, h, compare, seed),
    }
}

fn output(path: Option<&Path>) -> hdit_core::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_csv(path: &Path, header: bool) -> hdit_core::Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("row {}, column {}: {field:?} is not a number", i + 1, j + 1)))
            })
            .collect::<hdit_core::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DataMatrix::from_rows(&rows)
}

fn cmd_test(
    path: &Path,
    groups: GroupPartition,
    methods: &[StatisticName],
    alpha: f64,
    header: bool,
) -> hdit_core::Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let data = read_csv(path, header)?;
    if groups.p() != data.ncols() {
        return Err(Error::Partition(format!(
            "groups sum to {} but the data has {} columns",
            groups.p(),
            data.ncols()
        )));
    }
    let spec = NullLawSpec::new(data.nrows(), groups)?;
    if spec.partition().k() != 2 {
        if let Some(m) = methods.iter().find(|m| !m.is_lrt_family()) {
            return Err(Error::Partition(format!("{m} requires exactly two blocks")));
        }
    }
    let a = scatter(&data)?;
    let reports = LrtCalibration::new(&spec).evaluate(&a, methods)?;
    let mut out = io::stdout().lock();
    for r in reports {
        let mut value = serde_json::to_value(&r).map_err(|e| Error::Io(e.to_string()))?;
        value["alpha"] = json!(alpha);
        value["reject"] = json!(r.reject_at(alpha));
        writeln!(out, "{value}")?;
    }
    Ok(())
}

fn cmd_oracle(n: usize, groups: GroupPartition, h: f64, compare: Option<usize>, seed: u64) -> hdit_core::Result<()> {
    let spec = NullLawSpec::new(n, groups)?;
    let query = MomentQuery::new(spec.clone(), h)?;
    let log_moment = exact_log_moment(&query)?;
    let mut report = json!({
        "n": n,
        "groups": spec.partition().to_string(),
        "h": h,
        "log_moment": log_moment,
        "moment": log_moment.exp(),
    });
    if let Some(reps) = compare {
        if reps < 2 {
            return Err(Error::Domain("--compare needs at least 2 draws".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..reps).map(|_| sample_log_w(&spec, &mut rng)).collect();
        let est = estimate_moment(&draws, h);
        report["mc_mean"] = json!(est.mean);
        report["mc_se"] = json!(est.se);
        report["z"] = json!((est.mean - log_moment.exp()) / est.se);
        report["reps"] = json!(reps);
    }
    println!("{report}");
    Ok(())
}
