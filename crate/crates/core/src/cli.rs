//! The `prosumer` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.
//! Output files are written to a temporary sibling and renamed into place,
//! so a failed run never leaves a partial file behind.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::decision::{cutoff_schedule, Window};
use crate::fitting::{
    cohort_report, read_traces, traces_to_csv, FitError, FitResult, Fitter, Metric, PredictionMode,
};
use crate::market::{
    dollars, generate_scenario, standard_price_distribution, GenerationDistribution,
    PriceDistribution, Scenario, ValidationError, DEFAULT_HORIZON,
};
use crate::service::{http, ServiceError, SessionStore};
use crate::simulation::{run_population, AgentSpec, SimulationError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "prosumer",
    version,
    about = "Sell/hold models for a simulated prosumer energy market"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a market scenario as JSON.
    GenScenario(GenScenarioArgs),
    /// Print cutoff prices and hold values.
    Cutoffs(CutoffsArgs),
    /// Run synthetic agents through a scenario and write their traces.
    Simulate(SimulateArgs),
    /// Fit the best time window for each participant in a trace CSV.
    Fit(FitArgs),
    /// Build a cohort report from saved fits.
    Report(ReportArgs),
    /// Serve the grid game over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    /// JSON array of single-day price probabilities; defaults to the
    /// fifteen-level table.
    #[arg(long)]
    pub distribution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenScenarioArgs {
    #[command(flatten)]
    pub dist: DistributionArgs,
    /// JSON array of probabilities for generating 0, 1 and 2 units.
    #[arg(long)]
    pub generation: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weekend/weekday price offset as a fraction of the price level.
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    #[arg(long)]
    pub initial_units: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CutoffsArgs {
    #[command(flatten)]
    pub dist: DistributionArgs,
    /// Largest days-remaining (or window) index to tabulate.
    #[arg(long, default_value_t = DEFAULT_HORIZON - 1)]
    pub max_index: u32,
    /// Print cutoff bands (`cutoff | days remaining`) instead of CSV.
    #[arg(long, alias = "table2")]
    pub bands: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dist: DistributionArgs,
    /// Scenario JSON; sampled from `--horizon`/`--seed` when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated windows, e.g. `1,5,unbounded`.
    #[arg(long, value_delimiter = ',', default_value = "unbounded")]
    pub windows: Vec<Window>,
    #[arg(long, default_value_t = 1)]
    pub agents_per_window: usize,
    /// Per-day decision flip probability.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Trace CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to save the sampled scenario.
    #[arg(long)]
    pub scenario_out: Option<PathBuf>,
    /// Per-agent profit and sell-day summary JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub dist: DistributionArgs,
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "md")]
    pub metric: Metric,
    #[arg(long, default_value = "self-consistent")]
    pub mode: PredictionMode,
    /// Fits JSON destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cohort report JSON destination.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub histogram_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub fits: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub histogram_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Event log; sessions live only in memory when omitted.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

macro_rules! data_errors {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_errors!(ValidationError, FitError, SimulationError, ServiceError);

type CliResult<T> = Result<T, CliError>;

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn require_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(CliError::Usage(format!(
            "output directory {} does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn load_distribution(args: &DistributionArgs) -> CliResult<PriceDistribution> {
    match &args.distribution {
        Some(p) => read_json(p),
        None => Ok(standard_price_distribution()),
    }
}

fn load_scenario(path: &Path, dist: &PriceDistribution) -> CliResult<Scenario> {
    let scenario: Scenario = read_json(path)?;
    scenario
        .validate(dist.max_level())
        .map_err(|e| data(format!("{}: {e}", path.display())))?;
    Ok(scenario)
}

/// Writes via a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(out: &mut dyn Write, dest: Option<&Path>, contents: &str) -> CliResult<()> {
    match dest {
        Some(p) => {
            write_atomic(p, contents.as_bytes()).map_err(|e| data(format!("{}: {e}", p.display())))
        }
        None => out
            .write_all(contents.as_bytes())
            .map_err(|e| data(e.to_string())),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn gen_scenario(args: &GenScenarioArgs, out: &mut dyn Write) -> CliResult<()> {
    for p in [&args.dist.distribution, &args.generation]
        .into_iter()
        .flatten()
    {
        require_file(p)?;
    }
    if let Some(p) = &args.out {
        require_parent(p)?;
    }
    let dist = load_distribution(&args.dist)?;
    let gen = match &args.generation {
        Some(p) => read_json(p)?,
        None => GenerationDistribution::standard(),
    };
    let mut scenario = generate_scenario(&dist, &gen, args.horizon, args.seed, args.offset)?;
    if let Some(units) = args.initial_units {
        scenario.initial_units = units;
    }
    emit(out, args.out.as_deref(), &to_json(&scenario))
}

fn cutoffs(args: &CutoffsArgs, out: &mut dyn Write) -> CliResult<()> {
    if let Some(p) = &args.dist.distribution {
        require_file(p)?;
    }
    if let Some(p) = &args.out {
        require_parent(p)?;
    }
    let dist = load_distribution(&args.dist)?;
    let schedule = cutoff_schedule(&dist, args.max_index);
    let text = if args.bands {
        schedule.banded_table()
    } else {
        schedule.to_csv()
    };
    emit(out, args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct AgentSummary {
    id: String,
    window: Window,
    noise: f64,
    profit: u64,
    profit_dollars: String,
    sell_days: usize,
    final_inventory: u32,
}

#[derive(Serialize)]
struct SimulationSummary {
    scenario_seed: Option<u64>,
    horizon: u32,
    agents: Vec<AgentSummary>,
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    for p in [&args.dist.distribution, &args.scenario]
        .into_iter()
        .flatten()
    {
        require_file(p)?;
    }
    require_parent(&args.out)?;
    for p in [&args.scenario_out, &args.summary].into_iter().flatten() {
        require_parent(p)?;
    }
    if args.windows.is_empty() || args.agents_per_window == 0 {
        return Err(CliError::Usage(
            "need at least one window and one agent per window".into(),
        ));
    }
    let dist = load_distribution(&args.dist)?;
    let scenario = match &args.scenario {
        Some(p) => load_scenario(p, &dist)?,
        None => generate_scenario(
            &dist,
            &GenerationDistribution::standard(),
            args.horizon,
            args.seed,
            0.0,
        )?,
    };
    let agents: Vec<AgentSpec> = args
        .windows
        .iter()
        .flat_map(|&w| {
            let label = match w {
                Window::Bounded(t) => format!("tw{t:03}"),
                Window::Unbounded => "eut".to_owned(),
            };
            (0..args.agents_per_window)
                .map(move |k| AgentSpec::new(format!("{label}-{k:03}"), w).with_noise(args.noise))
        })
        .collect();
    let outcome = run_population(&agents, &scenario, &dist, args.seed)?;

    let traces = outcome.traces();
    write_atomic(&args.out, traces_to_csv(&traces).as_bytes()).map_err(|e| data(e.to_string()))?;
    if let Some(p) = &args.scenario_out {
        write_atomic(p, to_json(&scenario).as_bytes()).map_err(|e| data(e.to_string()))?;
    }
    let summary = SimulationSummary {
        scenario_seed: scenario.seed,
        horizon: scenario.horizon,
        agents: agents
            .iter()
            .zip(&outcome.agents)
            .map(|(spec, o)| AgentSummary {
                id: spec.id.clone(),
                window: spec.window,
                noise: spec.noise,
                profit: o.profit,
                profit_dollars: dollars(o.profit),
                sell_days: o.sell_days,
                final_inventory: o.final_inventory,
            })
            .collect(),
    };
    match &args.summary {
        Some(p) => write_atomic(p, to_json(&summary).as_bytes()).map_err(|e| data(e.to_string())),
        None => writeln!(
            out,
            "simulated {} agents over {} days",
            agents.len(),
            scenario.horizon
        )
        .map_err(|e| data(e.to_string())),
    }
}

fn write_report(
    fits: &[FitResult],
    json: Option<&Path>,
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let report = cohort_report(fits)?;
    if let Some(p) = json {
        emit(out, Some(p), &to_json(&report))?;
    }
    if let Some(p) = csv {
        emit(out, Some(p), &report.histogram_csv())?;
    }
    Ok(())
}

fn fit(args: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    require_file(&args.traces)?;
    require_file(&args.scenario)?;
    if let Some(p) = &args.dist.distribution {
        require_file(p)?;
    }
    for p in [&args.out, &args.report, &args.histogram_csv]
        .into_iter()
        .flatten()
    {
        require_parent(p)?;
    }
    let dist = load_distribution(&args.dist)?;
    let scenario = load_scenario(&args.scenario, &dist)?;
    let file = fs::File::open(&args.traces).map_err(|e| data(e.to_string()))?;
    let traces = read_traces(file)?;
    if traces.is_empty() {
        return Err(data(format!("{} has no trace rows", args.traces.display())));
    }
    let fits = Fitter::new(&scenario, &dist, args.mode).fit_all(&traces, args.metric)?;
    // Build the report first so nothing is written if it fails.
    cohort_report(&fits)?;
    emit(out, args.out.as_deref(), &to_json(&fits))?;
    write_report(
        &fits,
        args.report.as_deref(),
        args.histogram_csv.as_deref(),
        out,
    )
}

fn report(args: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    require_file(&args.fits)?;
    for p in [&args.out, &args.histogram_csv].into_iter().flatten() {
        require_parent(p)?;
    }
    let fits: Vec<FitResult> = read_json(&args.fits)?;
    let report = cohort_report(&fits)?;
    emit(out, args.out.as_deref(), &to_json(&report))?;
    if let Some(p) = &args.histogram_csv {
        emit(out, Some(p), &report.histogram_csv())?;
    }
    Ok(())
}

fn serve(args: &ServeArgs, out: &mut dyn Write) -> CliResult<()> {
    let store = match &args.store {
        Some(p) => {
            require_parent(p)?;
            SessionStore::open(p)?
        }
        None => SessionStore::in_memory(),
    };
    writeln!(out, "listening on {}", args.addr).map_err(|e| data(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| data(e.to_string()))?;
    runtime
        .block_on(http::serve(Arc::new(store), &args.addr))
        .map_err(|e| data(format!("{}: {e}", args.addr)))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::GenScenario(a) => gen_scenario(a, out),
        Command::Cutoffs(a) => cutoffs(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Report(a) => report(a, out),
        Command::Serve(a) => serve(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}
