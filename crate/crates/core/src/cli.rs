//! Command-line front end.
//!
//! Every run writes either its result document (to stdout or `--out`) or a
//! structured error to stderr. Exit codes: 0 success, 1 invalid input,
//! 2 solver failure, 3 internal error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::integrate::{self, Method};
use crate::model::{Generator, Param, ProbabilityVector, RateMatrix};
use crate::monotonicity::{self, Axis, RegionMap};
use crate::pme;
use crate::qt;
use crate::yd::{self, YdParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

const RATES_SCHEMA: &str = "\
Rate-matrix JSON schema:
  {\"n\": <int>, \"rates\": [[row-major reals]]}
Rows are destinations and columns are sources: rates[i][j] is the rate of
the transition from state j+1 to state i+1. `rates` must be n×n, the
diagonal must be 0 and every off-diagonal rate must be nonnegative.
For n = 3 the named rates are a = rates[1][0], b = rates[2][0],
c = rates[0][1], d = rates[2][1], e = rates[0][2], f = rates[1][2].";

#[derive(Debug, Parser)]
#[command(
    name = "quasitherm",
    version,
    about = "Quasithermodynamic analysis of Pauli master equations",
    after_help = RATES_SCHEMA
)]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecomposeMethod {
    Closed,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimulateMethod {
    Exact,
    Rk4,
}

#[derive(Debug, Args)]
struct RatesArg {
    /// Rate-matrix JSON file (see the schema below).
    #[arg(long)]
    rates: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a rate matrix and echo it in normalized form.
    #[command(after_help = RATES_SCHEMA)]
    Validate(RatesArg),
    /// Stationary state, structural flags and spectrum of the generator.
    #[command(after_help = RATES_SCHEMA)]
    Analyze(RatesArg),
    /// Entropy matrix and antisymmetric part of the decomposition.
    #[command(after_help = RATES_SCHEMA)]
    Decompose {
        #[command(flatten)]
        rates: RatesArg,
        /// `closed` is available for n ≤ 3; defaults to closed there and numeric otherwise.
        #[arg(long, value_enum)]
        method: Option<DecomposeMethod>,
    },
    /// Integrate the master equation and emit the trajectory as CSV.
    #[command(after_help = RATES_SCHEMA)]
    Simulate {
        #[command(flatten)]
        rates: RatesArg,
        /// Initial probabilities, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        p0: String,
        #[arg(long = "t-end")]
        t_end: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value = "exact")]
        method: SimulateMethod,
        /// Append H, S and S_BS columns.
        #[arg(long)]
        monitor: bool,
    },
    /// Classify 3-state relaxation as monotonic (M), oscillatory (O) or boundary (B).
    #[command(after_help = RATES_SCHEMA)]
    Classify {
        #[command(flatten)]
        rates: RatesArg,
        /// Absolute half-width of the boundary band (default 1e-9·max(1, ξ²)).
        #[arg(long = "tol-b")]
        tol_b: Option<f64>,
    },
    /// Classify a grid over two named rates of a 3-state template.
    #[command(after_help = RATES_SCHEMA)]
    Sweep(SweepArgs),
    /// Arousal-dependent three-state learning model.
    Yd {
        #[command(subcommand)]
        command: YdCommand,
    },
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Template rate-matrix JSON file (n = 3).
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Axis as `name:lo:hi:points` with name in a..f; give exactly two.
    #[arg(long)]
    vary: Vec<String>,
    /// Worker threads; 0 or absent uses one per processor.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long = "tol-b")]
    tol_b: Option<f64>,
    /// JSON file with the keys `rates`, `vary`, `jobs` and `tol_b`; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    rates: Option<PathBuf>,
    #[serde(default)]
    vary: Vec<String>,
    jobs: Option<usize>,
    tol_b: Option<f64>,
}

#[derive(Debug, Args)]
struct YdArgs {
    #[arg(long)]
    a1: f64,
    #[arg(long)]
    f1: f64,
    #[arg(long)]
    d: f64,
    #[arg(long)]
    e: f64,
}

#[derive(Debug, Subcommand)]
enum YdCommand {
    /// Stationary probabilities over an arousal grid, as CSV.
    Curve {
        #[command(flatten)]
        params: YdArgs,
        #[arg(long = "k-min", default_value_t = 0.0)]
        k_min: f64,
        #[arg(long = "k-max", default_value_t = 10.0)]
        k_max: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// Arousal that maximizes the well-trained probability.
    Optimal {
        #[command(flatten)]
        params: YdArgs,
    },
    /// Balance condition between learning and forgetting rates.
    Check {
        #[command(flatten)]
        params: YdArgs,
    },
}

/// A failed run: exit code plus a message.
#[derive(Debug)]
struct Failure {
    code: i32,
    kind: String,
    message: String,
}

impl Failure {
    fn input(kind: &str, message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, kind: kind.into(), message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { code: EXIT_INTERNAL, kind: "Internal".into(), message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_INPUT };
        Self { code, kind: e.kind().into(), message: e.to_string() }
    }
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: &'a str,
    exit_code: i32,
}

/// Rate-matrix file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesFile {
    pub n: usize,
    pub rates: Vec<Vec<f64>>,
}

impl RatesFile {
    pub fn to_rate_matrix(&self) -> Result<RateMatrix, Error> {
        if self.rates.len() != self.n {
            return Err(Error::BadShape(format!(
                "\"n\" is {} but \"rates\" has {} rows",
                self.n,
                self.rates.len()
            )));
        }
        RateMatrix::from_rows(&self.rates)
    }
}

#[derive(Serialize)]
struct ClassifyDoc {
    class: &'static str,
    #[serde(rename = "D")]
    d: f64,
    xi: f64,
    q: f64,
    u: f64,
    v: f64,
    omega: f64,
}

#[derive(Serialize)]
struct AnalyzeDoc {
    structure: pme::StructureReportJson,
    spectrum: pme::SpectralInfoJson,
}

#[derive(Serialize)]
struct OptimalDoc(f64);

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => report(stderr, &Failure::input("Usage", rendered.trim_end())),
            };
        }
    };
    let out = cli.out.clone();
    let doc = match execute(cli.command) {
        Ok(doc) => doc,
        Err(f) => return report(stderr, &f),
    };
    let written = match out {
        Some(path) => fs::write(&path, doc.as_bytes())
            .map_err(|e| Failure::internal(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(doc.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| Failure::internal(format!("cannot write output: {e}"))),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(f) => report(stderr, &f),
    }
}

fn report(stderr: &mut dyn Write, f: &Failure) -> i32 {
    let doc = ErrorDoc { error: ErrorBody { kind: &f.kind, message: &f.message, exit_code: f.code } };
    let json = serde_json::to_string(&doc).unwrap_or_default();
    let _ = writeln!(stderr, "error: {}", f.message);
    let _ = writeln!(stderr, "{json}");
    f.code
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::internal(format!("cannot serialize output: {e}")))
}

fn read_rates(path: &Path) -> Result<RateMatrix, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input("Io", format!("cannot read {}: {e}", path.display())))?;
    let file: RatesFile = serde_json::from_str(&text)
        .map_err(|e| Failure::input("Json", format!("{}: {e}", path.display())))?;
    Ok(file.to_rate_matrix()?)
}

fn execute(command: Command) -> Result<String, Failure> {
    match command {
        Command::Validate(RatesArg { rates }) => {
            let w = read_rates(&rates)?;
            to_json(&RatesFile { n: w.n(), rates: w.to_rows() })
        }
        Command::Analyze(RatesArg { rates }) => {
            let w = read_rates(&rates)?;
            let structure = pme::classify_structure(&w)?;
            let spectrum = pme::spectrum(&Generator::from_rates(&w));
            to_json(&AnalyzeDoc { structure: structure.to_json(), spectrum: spectrum.to_json() })
        }
        Command::Decompose { rates, method } => {
            let w = read_rates(&rates.rates)?;
            let method = method.unwrap_or(if w.n() <= 3 { DecomposeMethod::Closed } else { DecomposeMethod::Numeric });
            let qt = match method {
                DecomposeMethod::Closed if w.n() > 3 => {
                    return Err(Failure::input(
                        "InvalidArgument",
                        format!("closed-form decomposition needs n ≤ 3, got n = {}", w.n()),
                    ))
                }
                DecomposeMethod::Closed => qt::decompose(&w)?,
                DecomposeMethod::Numeric => qt::decompose_nstate(&w)?,
            };
            to_json(&qt.to_json())
        }
        Command::Simulate { rates, p0, t_end, steps, method, monitor } => {
            let w = read_rates(&rates.rates)?;
            let p0 = parse_p0(&p0)?;
            let g = Generator::from_rates(&w);
            let method = match method {
                SimulateMethod::Exact => Method::Exact,
                SimulateMethod::Rk4 => Method::Rk4,
            };
            let traj = integrate::integrate(&g, &p0, t_end, steps, method)?;
            let series = if monitor {
                let qt = qt::decompose(&w)?;
                Some(integrate::monitor(&traj, Some(&qt))?)
            } else {
                None
            };
            Ok(trajectory_csv(&traj, series.as_ref()))
        }
        Command::Classify { rates, tol_b } => {
            let w = read_rates(&rates.rates)?;
            let class = monotonicity::discriminant_with_tol(&w, tol_b)?;
            let coords = monotonicity::uvw(&w)?;
            to_json(&ClassifyDoc {
                class: class.kind.code(),
                d: class.discriminant,
                xi: class.xi,
                q: class.q,
                u: coords.u,
                v: coords.v,
                omega: coords.omega,
            })
        }
        Command::Sweep(args) => run_sweep(args),
        Command::Yd { command } => run_yd(command),
    }
}

fn parse_p0(text: &str) -> Result<ProbabilityVector, Failure> {
    let entries = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::input("InvalidProbability", format!("cannot parse --p0 {text:?}: {e}")))?;
    Ok(ProbabilityVector::new(entries)?)
}

/// Fixed 17-significant-digit scientific notation.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn trajectory_csv(traj: &integrate::Trajectory, series: Option<&integrate::MonitorSeries>) -> String {
    let mut out = String::from("t");
    for i in 1..=traj.n() {
        let _ = write!(out, ",p{i}");
    }
    if series.is_some() {
        out.push_str(",H,S,S_BS");
    }
    out.push('\n');
    for (row, (t, state)) in traj.times.iter().zip(&traj.states).enumerate() {
        out.push_str(&csv_float(*t));
        for x in state {
            out.push(',');
            out.push_str(&csv_float(*x));
        }
        if let Some(m) = series {
            let s = m.s_vals.as_ref().map_or(f64::NAN, |s| s[row]);
            for x in [m.h_vals[row], s, m.s_bs_vals[row]] {
                out.push(',');
                out.push_str(&csv_float(x));
            }
        }
        out.push('\n');
    }
    out
}

fn parse_axis(text: &str) -> Result<Axis, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Failure::input("BadAxis", format!("--vary expects name:lo:hi:points, got {text:?}"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let param: Param = parts[0].parse()?;
    let lo: f64 = parts[1].parse().map_err(|_| bad())?;
    let hi: f64 = parts[2].parse().map_err(|_| bad())?;
    let points: usize = parts[3].parse().map_err(|_| bad())?;
    Ok(Axis { param, lo, hi, points })
}

fn run_sweep(args: SweepArgs) -> Result<String, Failure> {
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::input("Io", format!("cannot read {}: {e}", path.display())))?;
            let mut cfg: SweepConfig = serde_json::from_str(&text)
                .map_err(|e| Failure::input("Json", format!("{}: {e}", path.display())))?;
            // relative paths in a config file are relative to the file
            if let (Some(rates), Some(dir)) = (cfg.rates.as_mut(), path.parent()) {
                if rates.is_relative() {
                    *rates = dir.join(&*rates);
                }
            }
            cfg
        }
        None => SweepConfig::default(),
    };
    let rates = args
        .rates
        .or(config.rates)
        .ok_or_else(|| Failure::input("Usage", "sweep needs --rates (or \"rates\" in --config)"))?;
    let vary = if args.vary.is_empty() { config.vary } else { args.vary };
    if vary.len() != 2 {
        return Err(Failure::input("BadAxis", format!("sweep needs exactly two --vary axes, got {}", vary.len())));
    }
    let axis1 = parse_axis(&vary[0])?;
    let axis2 = parse_axis(&vary[1])?;
    let jobs = args.jobs.or(config.jobs).unwrap_or(0);
    let tol_b = args.tol_b.or(config.tol_b);
    let template = read_rates(&rates)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::internal(format!("cannot start worker pool: {e}")))?;
    let map = pool.install(|| monotonicity::sweep(&template, axis1, axis2, tol_b))?;
    Ok(region_csv(&map))
}

fn region_csv(map: &RegionMap) -> String {
    let mut out = format!("{},{},class,D\n", map.axis1, map.axis2);
    for (x, row) in map.grid1.iter().zip(&map.classes) {
        for (y, cell) in map.grid2.iter().zip(row) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_float(*x),
                csv_float(*y),
                cell.kind.code(),
                csv_float(cell.discriminant)
            );
        }
    }
    out
}

fn yd_params(p: &YdArgs) -> Result<YdParams, Failure> {
    Ok(YdParams::new(p.a1, p.f1, p.d, p.e)?)
}

fn run_yd(command: YdCommand) -> Result<String, Failure> {
    match command {
        YdCommand::Curve { params, k_min, k_max, steps } => {
            let curve = yd::yd_curve(&yd_params(&params)?, k_min, k_max, steps)?;
            let mut out = String::from("k,rho1,rho2,rho3\n");
            for i in 0..curve.k_grid.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    csv_float(curve.k_grid[i]),
                    csv_float(curve.rho1[i]),
                    csv_float(curve.rho2[i]),
                    csv_float(curve.rho3[i])
                );
            }
            Ok(out)
        }
        YdCommand::Optimal { params } => {
            let k = yd::yd_optimal_arousal(&yd_params(&params)?)?;
            to_json(&OptimalDoc(k))
        }
        YdCommand::Check { params } => to_json(&yd::yd_consistency(&yd_params(&params)?)?),
    }
}
