mod commands;
mod failure;

use clap::{Args, Parser, Subcommand};
use failure::Failure;
use sdm1::report::OutputFormat;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Parameter domain of the one-dimensional single-diode model from I–V
/// cardinal points, with measurement uncertainty.
#[derive(Debug, Parser)]
#[command(name = "sdm1", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// (A_max, R_s,min) corner of the feasible parameter domain.
    Domain {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Domain corners of the low and high realizations of uncertain cardinal points.
    Uncertainty {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        spread: SpreadArgs,
        /// Report all 16 sign combinations of the half-widths instead.
        #[arg(long, requires = "d_isc")]
        corners: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// The five model parameters at a given A.
    Params {
        #[command(flatten)]
        cardinal: CardinalArgs,
        #[command(flatten)]
        a: AArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sampled I–V curve of the reconstructed model at a given A.
    Curve {
        #[command(flatten)]
        cardinal: CardinalArgs,
        #[command(flatten)]
        a: AArgs,
        /// Number of points from V = 0 to the model's open-circuit voltage.
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// R_s^sh(A) and R_s^mp(A) traces on a grid, for external plotting.
    PlotData {
        #[command(flatten)]
        cardinal: CardinalArgs,
        #[command(flatten)]
        spread: SpreadArgs,
        /// Grid as `start:stop:count`, endpoints included.
        #[arg(long, value_parser = parse_grid)]
        a_grid: Grid,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Min/mean/max/sd of the percent uncertainties in a data file.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mapping: Option<String>,
        /// Decimal places of the reported statistics.
        #[arg(long, default_value_t = 1)]
        decimals: i32,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct CardinalArgs {
    /// Short-circuit current (A).
    #[arg(long, allow_negative_numbers = true)]
    isc: Option<f64>,
    /// Open-circuit voltage (V).
    #[arg(long, allow_negative_numbers = true)]
    voc: Option<f64>,
    /// Maximum-power current (A).
    #[arg(long, allow_negative_numbers = true)]
    imp: Option<f64>,
    /// Maximum-power voltage (V).
    #[arg(long, allow_negative_numbers = true)]
    vmp: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct InputArgs {
    /// Data file with one curve per row; replaces the inline flags.
    #[arg(long, conflicts_with_all = ["isc", "voc", "imp", "vmp"])]
    input: Option<PathBuf>,
    /// Column mapping: `native`, `nrel`, or a TOML profile path.
    #[arg(long, requires = "input")]
    mapping: Option<String>,
    #[command(flatten)]
    cardinal: CardinalArgs,
}

/// Uncertainty of inline cardinal points: symmetric half-widths or explicit
/// low and high realizations.
#[derive(Debug, Clone, Args)]
struct SpreadArgs {
    /// Half-width of I_sc (A).
    #[arg(long, conflicts_with_all = ["low", "high"])]
    d_isc: Option<f64>,
    /// Half-width of V_oc (V).
    #[arg(long, conflicts_with_all = ["low", "high"])]
    d_voc: Option<f64>,
    /// Half-width of I_mp (A).
    #[arg(long, conflicts_with_all = ["low", "high"])]
    d_imp: Option<f64>,
    /// Half-width of V_mp (V).
    #[arg(long, conflicts_with_all = ["low", "high"])]
    d_vmp: Option<f64>,
    /// Low realization as `isc,voc,imp,vmp`.
    #[arg(long, requires = "high", value_parser = parse_quad)]
    low: Option<[f64; 4]>,
    /// High realization as `isc,voc,imp,vmp`.
    #[arg(long, requires = "low", value_parser = parse_quad)]
    high: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, Args)]
#[group(required = true, multiple = false)]
struct AArgs {
    /// Diode factor A (V).
    #[arg(long)]
    a: Option<f64>,
    /// A as a fraction of this curve's A_max.
    #[arg(long)]
    a_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args)]
struct SolverArgs {
    /// Absolute residual tolerance of the root finder.
    #[arg(long, env = "SDM1_ABS_TOL_F")]
    abs_tol_f: Option<f64>,
    /// Absolute argument tolerance of the root finder.
    #[arg(long, env = "SDM1_ABS_TOL_X")]
    abs_tol_x: Option<f64>,
    /// Grid cells scanned for the first root in R_s.
    #[arg(long)]
    r_s_cells: Option<usize>,
    /// Grid cells scanned for sign changes in A.
    #[arg(long)]
    a_cells: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct OutputArgs {
    /// Write results here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

fn parse_quad(s: &str) -> Result<[f64; 4], String> {
    let values: Vec<f64> =
        s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"))).collect::<Result<_, _>>()?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected 4 comma-separated values, got {}", v.len()))
}

#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err("expected start:stop:count".to_owned());
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let (start, stop) = (num(start)?, num(stop)?);
    let count: usize = count.trim().parse().map_err(|e| format!("`{count}`: {e}"))?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err("count must be >= 1 and endpoints finite".to_owned());
    }
    if count == 1 {
        return Ok(Grid(vec![start]));
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok(Grid((0..count).map(|k| if k == count - 1 { stop } else { start + step * k as f64 }).collect()))
}

fn report_failure(err: &Failure, format: OutputFormat) {
    let stderr = std::io::stderr();
    let mut stderr = stderr.lock();
    let _ = match format {
        OutputFormat::Json => writeln!(stderr, "{}", serde_json::json!({ "error": err })),
        OutputFormat::Csv => writeln!(stderr, "error: {err}"),
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.command.output().format;
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report_failure(&err, format);
            ExitCode::from(err.exit_code)
        }
    }
}

impl Command {
    fn output(&self) -> &OutputArgs {
        match self {
            Command::Domain { output, .. }
            | Command::Uncertainty { output, .. }
            | Command::Params { output, .. }
            | Command::Curve { output, .. }
            | Command::PlotData { output, .. }
            | Command::Stats { output, .. } => output,
        }
    }
}
