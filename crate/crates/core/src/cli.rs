//! Command-line front end: argument parsing, input loading and report
//! formatting for the `poplotto` binary.
//!
//! Every command reads one JSON file. Three shapes are accepted:
//! `{"subpopulations":[{"budget":..,"mass":..}]}`, `{"dice":[[..]]}` and a
//! solution `{"strategies":[..],"aggregate":..}` as written by `solve`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::equilibrium::{
    verify_linear_bounds, verify_nash, verify_subpop_consistency, EquilibriumReport, PrefixVerdict,
};
use crate::error::Error;
use crate::solver::{solve, DiscreteBudgetDistribution, EquilibriumSolution};
use crate::structure::{
    dice_to_population, export_digraph, league_rewire, leagues, outcome_matrix, plot_csv, sub_leagues,
    transitivity_report, DigraphFormat, LeaguePartition, OutcomeMatrix, SubLeagueReport, TransitivityReport,
};

/// Input masses further than this from summing to one draw a warning.
pub const MASS_WARN: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "poplotto",
    version,
    about = "Population Lotto equilibria and league structure"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Comparison tolerance for all checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,

    /// Output format; the default depends on the command.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write machine-readable output here instead of standard output.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the sub-population consistent equilibrium.
    Solve { input: PathBuf },
    /// Check a solution (or solve a population first) and exit 2 on failure.
    Verify { input: PathBuf },
    /// Leagues, sub-leagues, outcome matrix and transitivity.
    Analyze { input: PathBuf },
    /// Embed dice as budget groups and report their outcomes.
    Dice { input: PathBuf },
    /// Reshuffle strategies inside one league without changing `g`.
    Rewire {
        input: PathBuf,
        /// League index, weakest league first.
        #[arg(long, default_value_t = 0)]
        league: usize,
    },
    /// Outcome digraph (dot, json) or plot samples (csv).
    Export { input: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Verification(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpopulationEntry {
    pub budget: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationFile {
    pub subpopulations: Vec<SubpopulationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceFile {
    pub dice: Vec<Vec<u32>>,
}

/// A parsed input file.
#[derive(Debug, Clone)]
pub enum Input {
    Population(DiscreteBudgetDistribution),
    Dice(Vec<Vec<u32>>),
    Solution(EquilibriumSolution),
}

/// Everything a command reports; absent sections are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reports {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nash: Option<EquilibriumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_bounds: Option<EquilibriumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subpop_consistency: Option<Vec<PrefixVerdict>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leagues: Option<LeaguePartition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_leagues: Option<SubLeagueReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome_matrix: Option<OutcomeMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transitivity: Option<TransitivityReport>,
    /// Edges `[i, j]` (0-based) whose expected winner changed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flipped_edges: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub strategies: Vec<crate::density::PiecewiseDensity>,
    pub aggregate: crate::density::PiecewiseDensity,
    pub reports: Reports,
}

/// Machine output, human summary and the exit status they imply.
#[derive(Debug)]
pub struct Outcome {
    pub output: String,
    pub summary: String,
    pub warnings: Vec<String>,
    pub failure: Option<CliError>,
}

pub fn load(path: &Path) -> Result<(Input, Vec<String>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_input(&text)
}

/// Parses any of the three input shapes, returning warnings alongside.
pub fn parse_input(text: &str) -> Result<(Input, Vec<String>), CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
    let shape = |e: serde_json::Error| CliError::Input(e.to_string());
    let mut warnings = Vec::new();
    if value.get("subpopulations").is_some() {
        let file: PopulationFile = serde_json::from_value(value).map_err(shape)?;
        let total: f64 = file.subpopulations.iter().map(|s| s.mass).sum();
        if (total - 1.0).abs() > MASS_WARN {
            warnings.push(format!("masses sum to {total}; normalizing to 1"));
        }
        let dist = DiscreteBudgetDistribution::new(file.subpopulations.iter().map(|s| (s.budget, s.mass)))?;
        Ok((Input::Population(dist), warnings))
    } else if value.get("dice").is_some() {
        let file: DiceFile = serde_json::from_value(value).map_err(shape)?;
        Ok((Input::Dice(file.dice), warnings))
    } else if value.get("strategies").is_some() {
        let sol: EquilibriumSolution = serde_json::from_value(value).map_err(shape)?;
        if sol.strategies.is_empty() {
            return Err(CliError::Input("solution has no strategies".into()));
        }
        Ok((Input::Solution(sol), warnings))
    } else {
        Err(CliError::Input(
            "expected a `subpopulations`, `dice` or `strategies` field".into(),
        ))
    }
}

/// Parses arguments, runs the command, writes output and returns the exit
/// status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if let Err(e) = emit(&cli, &outcome) {
                eprintln!("error: {e}");
                return e.exit_code();
            }
            match outcome.failure {
                Some(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => {
            fs::write(path, &outcome.output).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            print!("{}", outcome.summary);
        }
        None => {
            print!("{}", outcome.output);
            eprint!("{}", outcome.summary);
        }
    }
    Ok(())
}

/// Runs one command without touching standard streams or files.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Input(format!("--tol must be positive, got {}", cli.tol)));
    }
    let tol = cli.tol;
    let (input, warnings) = match &cli.command {
        Command::Solve { input }
        | Command::Verify { input }
        | Command::Analyze { input }
        | Command::Dice { input }
        | Command::Rewire { input, .. }
        | Command::Export { input } => load(input)?,
    };
    let mut summary = String::new();
    let mut failure = None;
    let mut reports = Reports::default();

    let format = cli.format;
    let allow = |allowed: &[Format]| -> Result<Format, CliError> {
        let f = format.unwrap_or(allowed[0]);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(CliError::Input(
                format!("format {f:?} is not available for this command").to_lowercase(),
            ))
        }
    };

    let (sol, dist) = match (&cli.command, input) {
        (Command::Dice { .. }, Input::Dice(dice)) => (dice_to_population(&dice)?, None),
        (Command::Dice { .. }, _) => return Err(CliError::Input("dice expects a `dice` file".into())),
        (Command::Solve { .. }, Input::Population(d)) => (solve(&d)?, Some(d)),
        (Command::Solve { .. }, _) => return Err(CliError::Input("solve expects a `subpopulations` file".into())),
        (_, Input::Population(d)) => (solve(&d)?, Some(d)),
        (_, Input::Dice(dice)) => (dice_to_population(&dice)?, None),
        (_, Input::Solution(s)) => {
            let d = s.implied_distribution().ok();
            (s, d)
        }
    };

    let output = match &cli.command {
        Command::Solve { .. } => {
            let format = allow(&[Format::Json, Format::Csv])?;
            let nash = verify_nash(&sol, tol);
            write_check(&mut summary, "nash", &nash);
            if let Some(d) = &dist {
                reports.subpop_consistency = Some(verify_subpop_consistency(d, &sol, tol));
            }
            let part = leagues(&sol, tol)?;
            write_leagues(&mut summary, &part);
            reports.nash = Some(nash);
            reports.leagues = Some(part);
            render(format, &sol, reports)?
        }
        Command::Verify { .. } => {
            let format = allow(&[Format::Json])?;
            let nash = verify_nash(&sol, tol);
            let bounds = verify_linear_bounds(&sol, tol);
            write_check(&mut summary, "nash", &nash);
            write_check(&mut summary, "linear bounds", &bounds);
            if let Some(d) = &dist {
                let prefixes = verify_subpop_consistency(d, &sol, tol);
                let failed: Vec<usize> = prefixes.iter().filter(|v| !v.pass).map(|v| v.groups).collect();
                if failed.is_empty() {
                    let _ = writeln!(summary, "sub-population consistency: pass");
                } else {
                    let _ = writeln!(summary, "sub-population consistency: fail at prefix sizes {failed:?}");
                }
                reports.subpop_consistency = Some(prefixes);
            }
            if !(nash.pass && bounds.pass) {
                failure = Some(CliError::Verification(format!(
                    "monotone {:.3e}, flat {:.3e}, bound {:.3e}, mixture {:.3e}",
                    nash.monotone_violation,
                    nash.max_flat_violation(),
                    bounds.max_bound_violation(),
                    nash.mixture_gap
                )));
            }
            reports.nash = Some(nash);
            reports.linear_bounds = Some(bounds);
            render(format, &sol, reports)?
        }
        Command::Analyze { .. } | Command::Dice { .. } => {
            let format = allow(&[Format::Json, Format::Csv])?;
            let nash = verify_nash(&sol, tol);
            write_check(&mut summary, "nash", &nash);
            let part = leagues(&sol, tol)?;
            write_leagues(&mut summary, &part);
            if let (Command::Analyze { .. }, Some(d)) = (&cli.command, &dist) {
                let subs = sub_leagues(d, tol)?;
                for s in &subs.sub_leagues {
                    let _ = writeln!(
                        summary,
                        "sub-league {:?} of league {} (separate with {} groups)",
                        one_based(&s.members),
                        s.parent,
                        s.first_seen
                    );
                }
                reports.sub_leagues = Some(subs);
            }
            let w = outcome_matrix(&sol)?;
            let t = transitivity_report(&w, tol);
            write_transitivity(&mut summary, &t);
            reports.nash = Some(nash);
            reports.leagues = Some(part);
            reports.outcome_matrix = Some(w);
            reports.transitivity = Some(t);
            render(format, &sol, reports)?
        }
        Command::Rewire { league, .. } => {
            let format = allow(&[Format::Json, Format::Csv])?;
            let out = league_rewire(&sol, *league, cli.seed)?;
            let before = outcome_matrix(&sol)?;
            let after = outcome_matrix(&out)?;
            let flipped = flipped_edges(&before, &after);
            let _ = writeln!(summary, "flipped edges: {}", flipped.len());
            let nash = verify_nash(&out, tol);
            write_check(&mut summary, "nash", &nash);
            if let Some(d) = &dist {
                let prefixes = verify_subpop_consistency(d, &out, tol);
                let ok = prefixes.iter().all(|v| v.pass);
                let _ = writeln!(summary, "sub-population consistency: {}", verdict(ok));
                reports.subpop_consistency = Some(prefixes);
            }
            let t = transitivity_report(&after, tol);
            write_transitivity(&mut summary, &t);
            reports.nash = Some(nash);
            reports.outcome_matrix = Some(after);
            reports.transitivity = Some(t);
            reports.flipped_edges = Some(flipped);
            render(format, &out, reports)?
        }
        Command::Export { .. } => {
            let format = allow(&[Format::Dot, Format::Json, Format::Csv])?;
            let part = leagues(&sol, tol)?;
            write_leagues(&mut summary, &part);
            match format {
                Format::Csv => plot_csv(&sol),
                Format::Dot => export_digraph(&outcome_matrix(&sol)?, &part, DigraphFormat::Dot, tol),
                Format::Json => {
                    let mut s = export_digraph(&outcome_matrix(&sol)?, &part, DigraphFormat::Json, tol);
                    s.push('\n');
                    s
                }
            }
        }
    };
    Ok(Outcome {
        output,
        summary,
        warnings,
        failure,
    })
}

fn render(format: Format, sol: &EquilibriumSolution, reports: Reports) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(plot_csv(sol)),
        _ => {
            let doc = Document {
                strategies: sol.strategies.clone(),
                aggregate: sol.aggregate.clone(),
                reports,
            };
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numerical(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Pairs `[i, j]`, `i < j`, whose expected winner differs between matrices.
pub fn flipped_edges(before: &OutcomeMatrix, after: &OutcomeMatrix) -> Vec<[usize; 2]> {
    let n = before.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let side = |w: &OutcomeMatrix| (w.get(i, j) - 0.5).signum();
            if side(before) != side(after) {
                out.push([i, j]);
            }
        }
    }
    out
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn write_check(out: &mut String, name: &str, r: &EquilibriumReport) {
    let _ = writeln!(
        out,
        "{name}: {} (monotone {:.3e}, flat {:.3e}, bound {:.3e}, identity {:.3e})",
        verdict(r.pass),
        r.monotone_violation,
        r.max_flat_violation(),
        r.max_bound_violation(),
        r.max_identity_gap()
    );
    if let Some(d) = &r.best_deviation {
        let _ = writeln!(out, "  best dyad gain {:.3e} (group {})", d.best.gain, d.group + 1);
    }
}

fn write_leagues(out: &mut String, part: &LeaguePartition) {
    let _ = writeln!(out, "{:>6}  {:>12}  {:>21}  members", "league", "g", "budgets");
    for (l, league) in part.leagues.iter().enumerate() {
        let _ = writeln!(
            out,
            "{l:>6}  {:>12.6e}  {:>10.4} {:>10.4}  {:?}",
            league.value,
            league.span.0,
            league.span.1,
            one_based(&league.members)
        );
    }
}

fn write_transitivity(out: &mut String, t: &TransitivityReport) {
    let f = &t.flags;
    let names = [
        ("weak stochastic", f.weak_stochastic),
        ("strong stochastic", f.strong_stochastic),
        ("certainty", f.certainty),
        ("dominance", f.dominance),
        ("establishment", f.establishment),
    ];
    for ((name, ok), count) in names.iter().zip(t.violation_counts) {
        let _ = writeln!(out, "{name:>17}: {} ({count} violating triples)", verdict(*ok));
    }
}
