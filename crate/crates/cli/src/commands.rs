use crate::failure::Failure;
use crate::{AArgs, CardinalArgs, Cli, Command, Grid, InputArgs, OutputArgs, SolverArgs, SpreadArgs};
use clap::error::ErrorKind;
use clap::CommandFactory;
use rayon::prelude::*;
use sdm1::domain::Sdm1Solver;
use sdm1::ingest::IngestError;
use sdm1::ingest::{format_timestamp, parse_records, to_uncertain, MappingProfile, ParseOutput, RowDiagnostic};
use sdm1::model::{sample_curve, CardinalPoints};
use sdm1::report::{
    write_results, CornerRow, CurveRow, DomainRow, IntervalRow, OutputFormat, ParamsRow, StatsRow, Tabular, TraceRow,
    STATUS_OK,
};
use sdm1::uncertainty::{
    corner_domains, domain_interval_between, domain_interval_with, summarize_uncertainties, Realization,
    UncertainCardinalPoints, UncertaintyError,
};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Domain { input, solver, output } => domain(&input, &solver.build()?, &output),
        Command::Uncertainty { input, spread, corners, solver, output } => {
            uncertainty(&input, &spread, corners, &solver.build()?, &output)
        }
        Command::Params { cardinal, a, solver, output } => {
            let solver = solver.build()?;
            let cp = cardinal.resolve("params")?;
            let p = solver.reduced_solution(&cp, a.resolve(&cp, &solver)?)?;
            emit(&[ParamsRow::from(&p)], &output)
        }
        Command::Curve { cardinal, a, points, solver, output } => {
            let solver = solver.build()?;
            let cp = cardinal.resolve("curve")?;
            let p = solver.reduced_solution(&cp, a.resolve(&cp, &solver)?)?;
            let rows: Vec<CurveRow> = sample_curve(&p, points)?.iter().map(CurveRow::from).collect();
            emit(&rows, &output)
        }
        Command::PlotData { cardinal, spread, a_grid, solver, output } => {
            plot_data(&cardinal, &spread, &a_grid, &solver.build()?, &output)
        }
        Command::Stats { input, mapping, decimals, output } => stats(&input, mapping.as_deref(), decimals, &output),
    }
}

impl SolverArgs {
    fn build(&self) -> Result<Sdm1Solver, Failure> {
        let mut solver = Sdm1Solver::default();
        if let Some(tol) = self.abs_tol_f {
            solver.root.abs_tol_f = tol;
        }
        if let Some(tol) = self.abs_tol_x {
            solver.root.abs_tol_x = tol;
        }
        solver.root.validate().map_err(Failure::input)?;
        for (cells, slot) in [(self.r_s_cells, &mut solver.r_s_cells), (self.a_cells, &mut solver.a_cells)] {
            match cells {
                Some(0) => return Err(Failure::input("grid cell counts must be >= 1")),
                Some(n) => *slot = n,
                None => {}
            }
        }
        Ok(solver)
    }
}

impl CardinalArgs {
    /// Validated cardinal points; a missing flag is a usage error.
    fn resolve(&self, subcommand: &str) -> Result<CardinalPoints, Failure> {
        let named = [("--isc", self.isc), ("--voc", self.voc), ("--imp", self.imp), ("--vmp", self.vmp)];
        let missing: Vec<&str> = named.iter().filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect();
        if !missing.is_empty() {
            usage_error(subcommand, format!("missing cardinal point flags: {}", missing.join(" ")));
        }
        let [isc, voc, imp, vmp] = named.map(|(_, v)| v.unwrap_or_default());
        Ok(CardinalPoints::new(isc, voc, imp, vmp)?)
    }
}

impl AArgs {
    fn resolve(&self, cp: &CardinalPoints, solver: &Sdm1Solver) -> Result<f64, Failure> {
        match (self.a, self.a_fraction) {
            (Some(a), _) => Ok(a),
            (None, Some(t)) => Ok(t * solver.compute_domain(cp)?.a_max),
            (None, None) => unreachable!("clap requires one of --a, --a-fraction"),
        }
    }
}

impl SpreadArgs {
    fn given(&self) -> bool {
        self.low.is_some() || [self.d_isc, self.d_voc, self.d_imp, self.d_vmp].iter().any(Option::is_some)
    }

    /// Low and high realizations around `nominal`; zero half-widths when
    /// nothing was given.
    fn realizations(&self, nominal: &CardinalPoints) -> Result<(CardinalPoints, CardinalPoints), Failure> {
        if let (Some(low), Some(high)) = (self.low, self.high) {
            let build = |which: Realization, [isc, voc, imp, vmp]: [f64; 4]| {
                CardinalPoints::new(isc, voc, imp, vmp).map_err(|source| UncertaintyError::Validation { which, source })
            };
            return Ok((build(Realization::Low, low)?, build(Realization::High, high)?));
        }
        let ucp = self.half_widths(nominal)?;
        Ok((ucp.realize(Realization::Low)?, ucp.realize(Realization::High)?))
    }

    fn half_widths(&self, nominal: &CardinalPoints) -> Result<UncertainCardinalPoints, Failure> {
        let d = |v: Option<f64>| v.unwrap_or(0.0);
        Ok(UncertainCardinalPoints::new(*nominal, d(self.d_isc), d(self.d_voc), d(self.d_imp), d(self.d_vmp))?)
    }
}

fn usage_error(subcommand: &str, message: String) -> ! {
    let mut cli = Cli::command();
    cli.build();
    let sub = cli.find_subcommand_mut(subcommand).expect("known subcommand");
    sub.error(ErrorKind::MissingRequiredArgument, message).exit()
}

fn emit<T: Tabular>(rows: &[T], output: &OutputArgs) -> Result<(), Failure> {
    match &output.output {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| IngestError::SinkWriteFailure(format!("{}: {e}", path.display())))?;
            write_results(rows, output.format, BufWriter::new(file))?;
        }
        None => write_results(rows, output.format, BufWriter::new(std::io::stdout().lock()))?,
    }
    Ok(())
}

fn load(path: &Path, mapping: Option<&str>, format: OutputFormat) -> Result<ParseOutput, Failure> {
    let profile = match mapping {
        None | Some("native") => MappingProfile::native(),
        Some("nrel") => MappingProfile::nrel(),
        Some(profile_path) => {
            let text =
                std::fs::read_to_string(profile_path).map_err(|e| Failure::input(format!("{profile_path}: {e}")))?;
            MappingProfile::from_toml(&text)?
        }
    };
    let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let parsed = parse_records(std::io::BufReader::new(file), &profile)?;
    report_diagnostics(&parsed.diagnostics, format);
    Ok(parsed)
}

/// Rejected rows go to stderr so that the data stream stays clean.
fn report_diagnostics(diagnostics: &[RowDiagnostic], format: OutputFormat) {
    if diagnostics.is_empty() {
        return;
    }
    let stderr = std::io::stderr();
    let mut err = stderr.lock();
    let _ = match format {
        OutputFormat::Json => {
            let items: Vec<_> =
                diagnostics.iter().map(|d| serde_json::json!({ "line": d.line, "reason": d.reason })).collect();
            writeln!(err, "{}", serde_json::json!({ "skipped_rows": diagnostics.len(), "diagnostics": items }))
        }
        OutputFormat::Csv => diagnostics
            .iter()
            .try_for_each(|d| writeln!(err, "skipped line {}: {}", d.line, d.reason))
            .and_then(|_| writeln!(err, "skipped {} rows", diagnostics.len())),
    };
}

fn domain(input: &InputArgs, solver: &Sdm1Solver, output: &OutputArgs) -> Result<(), Failure> {
    let Some(path) = &input.input else {
        let cp = input.cardinal.resolve("domain")?;
        let d = solver.compute_domain(&cp)?;
        return emit(&[DomainRow::new(None, &cp, Ok(&d))], output);
    };
    let parsed = load(path, input.mapping.as_deref(), output.format)?;
    let rows: Vec<DomainRow> = parsed
        .records
        .par_iter()
        .map(|rec| {
            let result = solver.compute_domain(&rec.cardinal);
            DomainRow::new(
                Some(format_timestamp(&rec.timestamp)),
                &rec.cardinal,
                result.as_ref().map_err(|e| e.to_string()),
            )
        })
        .collect();
    emit(&rows, output)
}

fn uncertainty(
    input: &InputArgs,
    spread: &SpreadArgs,
    corners: bool,
    solver: &Sdm1Solver,
    output: &OutputArgs,
) -> Result<(), Failure> {
    let Some(path) = &input.input else {
        let nominal = input.cardinal.resolve("uncertainty")?;
        if corners {
            let ucp = spread.half_widths(&nominal)?;
            let rows: Vec<CornerRow> = corner_domains(&ucp, solver).iter().map(CornerRow::from).collect();
            return emit(&rows, output);
        }
        let (low, high) = spread.realizations(&nominal)?;
        let interval = domain_interval_between(&low, &high, solver)?;
        return emit(&[IntervalRow::new(None, &nominal, Ok(&interval))], output);
    };
    if spread.given() || corners {
        return Err(Failure::input("--d-*, --low/--high and --corners apply to inline input only"));
    }
    let parsed = load(path, input.mapping.as_deref(), output.format)?;
    let rows: Vec<IntervalRow> = parsed
        .records
        .par_iter()
        .map(|rec| {
            let result = to_uncertain(rec).and_then(|ucp| domain_interval_with(&ucp, solver));
            IntervalRow::new(
                Some(format_timestamp(&rec.timestamp)),
                &rec.cardinal,
                result.as_ref().map_err(|e| e.to_string()),
            )
        })
        .collect();
    emit(&rows, output)
}

fn plot_data(
    cardinal: &CardinalArgs,
    spread: &SpreadArgs,
    grid: &Grid,
    solver: &Sdm1Solver,
    output: &OutputArgs,
) -> Result<(), Failure> {
    let nominal = cardinal.resolve("plot-data")?;
    let mut series = vec![("nominal", nominal)];
    if spread.given() {
        let (low, high) = spread.realizations(&nominal)?;
        series.extend([("low", low), ("high", high)]);
    }
    let rows: Vec<TraceRow> = series
        .iter()
        .flat_map(|(name, cp)| {
            grid.0.iter().map(move |&a| {
                let sh = solver.r_s_sh_of_a(cp, a);
                let mp = solver.r_s_mp_of_a(cp, a);
                let problems: Vec<String> =
                    [&sh, &mp].iter().filter_map(|r| r.as_ref().err()).map(|e| e.to_string()).collect();
                TraceRow {
                    series: (*name).to_owned(),
                    a_v: a,
                    r_s_sh_ohm: sh.ok(),
                    r_s_mp_ohm: mp.ok(),
                    status: if problems.is_empty() { STATUS_OK.to_owned() } else { problems.join("; ") },
                }
            })
        })
        .collect();
    emit(&rows, output)
}

fn stats(input: &Path, mapping: Option<&str>, decimals: i32, output: &OutputArgs) -> Result<(), Failure> {
    let parsed = load(input, mapping, output.format)?;
    let summary = summarize_uncertainties(&parsed.records)
        .map_err(|e| Failure::from(e).with_detail(format!("{} rows rejected", parsed.diagnostics.len())))?;
    let summary = summary.rounded(decimals);
    let rows: Vec<StatsRow> =
        summary.variables().iter().map(|(name, s)| StatsRow::new(name, summary.count, s)).collect();
    emit(&rows, output)
}
