//! Command-line front end: `fit`, `simulate`, and `accuracy` subcommands.
//!
//! Exit codes: 0 = success (a Boundary classification is a statistical
//! outcome, not a failure), 2 = input or validation error, 3 = I/O error.
//! All floating-point output carries 17 significant digits.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{fit_joint_series, EstimateReport};
use crate::ingest::{
    annualize, build_joint_series, load_joint_csv, load_ohlc_csv, records_from_bars, GkMode,
    JointSchema, OhlcSchema,
};
use crate::montecarlo::{
    genericity_rate, normality_diagnostic, run_accuracy, sqrtn_constants, tail_probe,
    write_long_csv, write_wide_csv, AccuracyResult, AccuracySpec, NormalityReport, SqrtNFit,
    TailProbe, ESTIMATORS,
};
use crate::params::{CanonicalParams, HestonParams, SamplingGrid, VolParams};
use crate::simulate::{
    delta_warning, joint_euler_path, subsampled_vol_series, write_joint_csv, write_vol_csv,
    Dismissal, InitialState, PathConfig, Scheme,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "heston-mle",
    about = "Closed-form Heston parameter estimation, CIR path simulation, and Monte Carlo accuracy tables",
    version
)]
pub struct Cli {
    /// Worker-thread cap; falls back to HESTON_MLE_THREADS. Results do not
    /// depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate Heston parameters from a CSV file.
    Fit(FitArgs),
    /// Simulate a variance path (or a joint price/variance path) to CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo accuracy tables for the estimators.
    Accuracy(AccuracyArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV: `t,price,var` by default, `t,open,high,low,close` with --ohlc.
    pub input: PathBuf,

    /// Sub-sampling interval T between consecutive rows.
    #[arg(long)]
    pub dt: f64,

    /// Annualization factor A applied to the variance column (or to the
    /// Garman-Klass proxy) before fitting.
    #[arg(long)]
    pub annualization: Option<f64>,

    /// Treat the input as OHLC bars and build the variance proxy.
    #[arg(long)]
    pub ohlc: bool,

    /// Use the raw-difference Garman-Klass expression instead of the
    /// standard log-price form.
    #[arg(long = "paper-gk", requires = "ohlc")]
    pub paper_gk: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Euler,
    Exact,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub theta: f64,
    #[arg(long)]
    pub gamma2: f64,
    /// Price drift; with --rho, a joint price/variance path is produced.
    #[arg(long, requires = "rho")]
    pub mu: Option<f64>,
    /// Price/variance noise correlation.
    #[arg(long, requires = "mu", allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Sub-sampling interval T.
    #[arg(long)]
    pub dt: f64,
    /// Number of observations N (the path has N+1 values).
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Exact)]
    pub scheme: SchemeArg,
    /// Euler step; required with --scheme euler.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AccuracyArgs {
    #[arg(long)]
    pub zeta: f64,
    #[arg(long)]
    pub omega: f64,
    /// Canonical sub-sampling interval Tbar.
    #[arg(long)]
    pub tbar: f64,
    /// Comma-separated ascending observation counts, e.g. 500,1000,2500.
    #[arg(long = "n-list", value_delimiter = ',')]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 1100)]
    pub trajectories: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Exact)]
    pub scheme: SchemeArg,
    /// Euler step for --scheme euler.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version via "errors" that should exit 0
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("HESTON_MLE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        if n > 0 {
            // ignore AlreadyInitialized: first configuration wins
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads);
    let mut out: Box<dyn Write> = match &cli.output {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match cli.command {
        Command::Fit(args) => cmd_fit(&args, &mut out),
        Command::Simulate(args) => cmd_simulate(&args, &mut out),
        Command::Accuracy(args) => cmd_accuracy(&args, &mut out),
    }
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let report = fit_from_args(args)?;
    writeln!(out, "{}", to_json_17(&report))?;
    Ok(())
}

fn fit_from_args(args: &FitArgs) -> Result<EstimateReport> {
    let mut records = if args.ohlc {
        let bars = load_ohlc_csv(&args.input, &OhlcSchema::default(), args.dt)?;
        let mode = if args.paper_gk {
            GkMode::RawDifference
        } else {
            GkMode::LogPrice
        };
        let (records, clamped) = records_from_bars(&bars, mode)?;
        if clamped > 0 {
            eprintln!("warning: {clamped} Garman-Klass bars clamped at zero variance");
        }
        records
    } else {
        load_joint_csv(&args.input, &JointSchema::default())?
    };
    if let Some(a) = args.annualization {
        records = annualize(&records, a)?;
    }
    let series = build_joint_series(&records, args.dt)?;
    Ok(fit_joint_series(&series))
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let vol = VolParams::new(args.kappa, args.theta, args.gamma2)?;
    let grid = SamplingGrid::new(args.dt, args.n)?;
    let scheme = match (args.scheme, args.delta) {
        (SchemeArg::Exact, None) => Scheme::ExactTransition,
        (SchemeArg::Exact, Some(_)) => {
            return Err(Error::Config("--delta only applies to --scheme euler".to_string()))
        }
        (SchemeArg::Euler, Some(delta)) => {
            if let Some(w) = delta_warning(delta, args.dt) {
                eprintln!("warning: {w}");
            }
            Scheme::Euler { delta }
        }
        (SchemeArg::Euler, None) => {
            return Err(Error::Config("--scheme euler requires --delta".to_string()))
        }
    };
    let cfg = PathConfig {
        scheme,
        horizon: grid.horizon(),
        y0: InitialState::Stationary,
        dismissal: Dismissal::DiscardNegative,
        seed: args.seed,
        stream_id: 0,
    };
    cfg.validate()?;
    match (args.mu, args.rho) {
        (Some(mu), Some(rho)) => {
            if !matches!(scheme, Scheme::Euler { .. }) {
                return Err(Error::Config(
                    "joint simulation (--mu/--rho) requires --scheme euler".to_string(),
                ));
            }
            let hp = HestonParams::new(vol, mu, rho)?;
            let joint = joint_euler_path(&hp, grid, &cfg, 1.0)?;
            write_joint_csv(&joint, out)?;
        }
        _ => {
            let series = subsampled_vol_series(&vol, grid, &cfg)?;
            write_vol_csv(&series, out)?;
        }
    }
    Ok(())
}

/// Everything the accuracy subcommand reports, in one serializable bundle.
#[derive(Debug, Serialize)]
pub struct AccuracyReport {
    pub result: AccuracyResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sqrtn_constants: Option<Vec<SqrtNFit>>,
    pub genericity_rate: Vec<(usize, f64)>,
    /// Per-estimator normality diagnostics at the largest N.
    pub normality: Vec<(String, NormalityReport)>,
    /// Present only for zeta < 1; no pass/fail semantics attach.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploratory_tail: Option<Vec<(String, TailProbe)>>,
}

pub fn accuracy_report(args: &AccuracyArgs) -> Result<AccuracyReport> {
    let scheme = match (args.scheme, args.delta) {
        (SchemeArg::Exact, None) => Scheme::ExactTransition,
        (SchemeArg::Exact, Some(_)) => {
            return Err(Error::Config("--delta only applies to --scheme euler".to_string()))
        }
        (SchemeArg::Euler, Some(delta)) => Scheme::Euler { delta },
        (SchemeArg::Euler, None) => {
            return Err(Error::Config("--scheme euler requires --delta".to_string()))
        }
    };
    let spec = AccuracySpec {
        canonical: CanonicalParams::new(args.omega, args.zeta)?,
        tbar: args.tbar,
        n_values: args.n_list.clone(),
        trajectories: args.trajectories,
        scheme,
        seed: args.seed,
    };
    if args.trajectories < 30 {
        eprintln!(
            "warning: only {} trajectories; sampling error in the tables will be large",
            args.trajectories
        );
    }
    let result = run_accuracy(&spec)?;

    let sqrtn = sqrtn_constants(&result).ok();
    let rates = genericity_rate(&result);
    let n_max = *spec.n_values.last().unwrap();
    let mut normality = Vec::new();
    for name in ESTIMATORS {
        if let Some(errs) = result.errors_for(name, n_max) {
            if let Ok(rep) = normality_diagnostic(errs) {
                normality.push((name.to_string(), rep));
            }
        }
    }
    let exploratory_tail = if args.zeta < 1.0 {
        let mut probes = Vec::new();
        for name in ESTIMATORS {
            if let Some(errs) = result.errors_for(name, n_max) {
                if let Ok(p) = tail_probe(errs) {
                    probes.push((name.to_string(), p));
                }
            }
        }
        Some(probes)
    } else {
        None
    };

    Ok(AccuracyReport {
        result,
        sqrtn_constants: sqrtn,
        genericity_rate: rates,
        normality,
        exploratory_tail,
    })
}

pub fn cmd_accuracy(args: &AccuracyArgs, out: &mut dyn Write) -> Result<()> {
    let report = accuracy_report(args)?;
    match args.format {
        FormatArg::Json => {
            writeln!(out, "{}", to_json_17(&report))?;
        }
        FormatArg::Csv => {
            write_wide_csv(&report.result, &mut *out)?;
            writeln!(out)?;
            write_long_csv(&report.result, &mut *out)?;
            if let Some(fits) = &report.sqrtn_constants {
                writeln!(out)?;
                writeln!(out, "estimator,sqrtn_constant,fit_residual")?;
                for f in fits {
                    writeln!(out, "{},{:.16e},{:.16e}", f.estimator, f.c, f.residual)?;
                }
            }
            if let Some(probes) = &report.exploratory_tail {
                writeln!(out)?;
                writeln!(out, "estimator,tail_index,order_statistics,label")?;
                for (name, p) in probes {
                    writeln!(
                        out,
                        "{},{:.16e},{},{}",
                        name, p.index, p.order_statistics_used, p.label
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// JSON serialization with every f64 printed at 17 significant digits.
pub fn to_json_17<T: Serialize>(value: &T) -> String {
    struct Sci;
    impl serde_json::ser::Formatter for Sci {
        fn write_f64<W: std::io::Write + ?Sized>(
            &mut self,
            writer: &mut W,
            value: f64,
        ) -> std::io::Result<()> {
            write!(writer, "{value:.16e}")
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci);
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
