use std::path::PathBuf;
use std::process::ExitCode;

use bellmap::quantum::{NoiseModel, ObservableKind};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

/// Critical visibilities of two-qudit Bell experiments.
#[derive(Debug, Parser)]
#[command(name = "bellmap", version)]
struct Cli {
    /// File of `key = value` lines using the long flag names of the command.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the critical visibility of one state.
    #[command(args_override_self = true)]
    Optimize(OptimizeArgs),
    /// Critical-visibility map over the (alpha, beta) qutrit family.
    #[command(args_override_self = true)]
    Map(MapArgs),
    /// Line scan over alpha at fixed beta, one series per observable kind.
    #[command(args_override_self = true)]
    Line(LineArgs),
    /// Map of v_crit(kind, frozen angles) - v_crit(reference kind).
    #[command(args_override_self = true)]
    DiffMap(DiffMapArgs),
    /// Decide whether a probability table admits a local realistic model.
    #[command(args_override_self = true)]
    CheckData(CheckDataArgs),
    /// List the built-in states.
    #[command(args_override_self = true)]
    Catalog(CatalogArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Observable class: m1, m2, m3 or u.
    #[arg(long, default_value = "u", value_parser = parse_kind)]
    pub kind: ObservableKind,
    /// Settings per party.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Noise model: white, product or dephasing.
    #[arg(long, default_value = "white", value_parser = parse_noise)]
    pub noise: NoiseModel,
    /// Density-matrix file used as the noise instead of --noise.
    #[arg(long)]
    pub noise_file: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angle indices (0-based, comma separated) held at zero, or
    /// `restricted-m3` for the three-phase qutrit device.
    #[arg(long, value_parser = parse_freeze)]
    pub freeze: Option<Frozen>,
    /// Basin-hopping rounds per restart.
    #[arg(long, default_value_t = 0)]
    pub kicks: usize,
    #[arg(long, default_value_t = 0.5)]
    pub kick_scale: f64,
    /// Simplex restarts at the best vertex after convergence.
    #[arg(long, default_value_t = 3)]
    pub polish: usize,
    /// Worker threads (falls back to BELLMAP_THREADS, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Solve every LP from scratch and, in scans, start every point at random.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Scans only: rounds of re-descending each point from the settings of
    /// better grid neighbors.
    #[arg(long, default_value_t = 0)]
    pub neighbor_passes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frozen(pub Vec<usize>);

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Catalog state name (see `bellmap catalog`).
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Qutrit family angle alpha in degrees; selects the family state.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Qutrit family angle beta in degrees.
    #[arg(long, default_value_t = 45.0)]
    pub beta: f64,
    /// Density-matrix file.
    #[arg(long)]
    pub state_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Run an M1 (or other kind) search first and start from its optimum.
    #[arg(long, value_parser = parse_kind)]
    pub stage: Option<ObservableKind>,
    /// Also write the JSON record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the LP at the best settings in CPLEX LP format.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
    /// Write the signal probability table at the best settings.
    #[arg(long)]
    pub table_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Alpha range `start:end:step` in degrees (inclusive).
    #[arg(long, default_value = "0:90:2")]
    pub alphas: String,
    /// Beta range `start:end:step` in degrees (inclusive).
    #[arg(long, default_value = "0:90:2")]
    pub betas: String,
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// CSV output (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Heatmap output; the value range goes to `<pgm>.txt`.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LineArgs {
    /// Alpha range `start:end:step` in degrees (inclusive).
    #[arg(long, default_value = "0:90:1")]
    pub alphas: String,
    #[arg(long, default_value_t = 45.0)]
    pub beta: f64,
    /// Comma-separated kinds; `cglmp` adds the CGLMP-implied visibility
    /// under M1 settings.
    #[arg(long, default_value = "m1,m2,m3")]
    pub kinds: String,
    /// Sweep the line a second time backwards and keep the better value.
    #[arg(long)]
    pub reverse_pass: bool,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiffMapArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Kind subtracted from --kind (with --freeze applied to --kind only).
    #[arg(long, default_value = "u", value_parser = parse_kind)]
    pub reference: ObservableKind,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckDataArgs {
    /// Probability-table file, or a density-matrix file together with --settings.
    pub file: PathBuf,
    /// JSON file `{"alice": [...], "bob": [...]}` of observable specs.
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// Also compute the critical visibility against this noise.
    #[arg(long, value_parser = parse_noise)]
    pub noise: Option<NoiseModel>,
    /// Write the local model's atom weights here when one exists.
    #[arg(long)]
    pub witness: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CatalogArgs {
    /// Largest dimension listed.
    #[arg(long, default_value_t = 5)]
    pub max_d: usize,
}

fn parse_kind(s: &str) -> Result<ObservableKind, String> {
    s.parse().map_err(|e: bellmap::Error| e.to_string())
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    s.parse().map_err(|e: bellmap::Error| e.to_string())
}

fn parse_freeze(s: &str) -> Result<Frozen, String> {
    if s == "restricted-m3" {
        return Ok(Frozen(bellmap::scenarios::RESTRICTED_M3_FROZEN.to_vec()));
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| format!("bad angle index '{t}'"))
        })
        .collect::<Result<_, _>>()
        .map(Frozen)
}

fn parse_cli() -> Result<Cli, clap::Error> {
    let argv: Vec<String> = std::env::args().collect();
    let matches = Cli::command().try_get_matches_from(&argv)?;
    let first = Cli::from_arg_matches(&matches)?;
    let Some(path) = &first.config else {
        return Ok(first);
    };
    let sub = matches.subcommand_name().unwrap_or_default().to_string();
    let extra = match config::file_args(&Cli::command(), &sub, path) {
        Ok(x) => x,
        Err(e) => {
            return Err(Cli::command().error(clap::error::ErrorKind::InvalidValue, e.to_string()))
        }
    };
    let merged = config::splice(&argv, &sub, extra);
    Cli::try_parse_from(merged)
}

fn main() -> ExitCode {
    let cli = match parse_cli() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Optimize(a) => commands::optimize(a),
        Command::Map(a) => commands::map(a),
        Command::Line(a) => commands::line(a),
        Command::DiffMap(a) => commands::diff_map(a),
        Command::CheckData(a) => commands::check_data(a),
        Command::Catalog(a) => commands::catalog(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
