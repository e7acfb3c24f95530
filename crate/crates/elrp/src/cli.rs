//! Command-line entry point: generate, solve, check, export-lp, bench, sweep.
//!
//! Results go to files; diagnostics go to stderr. Exit codes: 0 success,
//! 1 infeasibility or checker violations, 2 usage errors. Defaults can be
//! overridden by a JSON config file named in `ELRP_CONFIG`, and flags
//! override the config file.

use crate::bench::{
    default_suite, plot_data_csv, report_csv, temperature_sweep, Algorithm, SolverConfig,
    SweepConfig,
};
use crate::error::{Error, Result};
use crate::feasibility::{check_solution, load_solution, save_solution, ModelVariant};
use crate::instance::{generate_with, load_instance, save_instance, GeneratorConfig, Instance};
use crate::milp::{build_ev_model, build_evl_model, export_lp};
use crate::soc::{self, ChargingModel, SocFormula};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Every tunable solver parameter reachable through `--set key=value`.
/// The doc-coverage test asserts each of these appears in the help text.
pub const DOCUMENTED_PARAMS: [&str; 16] = [
    "tsmcws.n_itr_small",
    "tsmcws.n_itr_large",
    "tsmcws.size_threshold",
    "tsmcws.tabu_tenure",
    "tsmcws.ts_max_iter",
    "tsmcws.cover_radius",
    "sigalns.iter_max",
    "sigalns.destroy_fraction",
    "sigalns.ig_destruct_d",
    "sigalns.sigma1",
    "sigalns.sigma2",
    "sigalns.sigma3",
    "sigalns.reaction_factor",
    "sigalns.segment_length",
    "sigalns.sa_start_accept_prob",
    "sigalns.sa_cooling",
];

const PARAM_HELP: &str = "Solver parameters for --set key=value:
  tsmcws.n_itr_small        non-improving increments tolerated (small instances)
  tsmcws.n_itr_large        non-improving increments tolerated (large instances)
  tsmcws.size_threshold     customer count separating small from large
  tsmcws.tabu_tenure        iterations a swapped pair stays tabu
  tsmcws.ts_max_iter        tabu iterations per location phase
  tsmcws.cover_radius       covering radius in km (default phi*soc_full/2)
  sigalns.iter_max          outer iterations
  sigalns.destroy_fraction  fraction of customers removed per step
  sigalns.ig_destruct_d     stations removed per IG step (0 = all)
  sigalns.sigma1            reward for new-best candidates
  sigalns.sigma2            reward for improving candidates
  sigalns.sigma3            reward for accepted candidates
  sigalns.reaction_factor   weight smoothing factor
  sigalns.segment_length    iterations per weight update
  sigalns.sa_start_accept_prob  initial worse-solution acceptance probability
  sigalns.sa_cooling        geometric cooling rate";

#[derive(Parser, Debug)]
#[command(
    name = "elrp",
    about = "Electric location-routing under ambient temperature",
    disable_version_flag = true
)]
struct Cli {
    /// Print the version and the frozen calibration hash.
    #[arg(long)]
    version: bool,
    /// Cap worker parallelism (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic instance file.
    Generate(GenerateArgs),
    /// Solve an instance with a metaheuristic and write the solution file.
    #[command(after_help = PARAM_HELP)]
    Solve(SolveArgs),
    /// Verify a solution file against an instance.
    Check(CheckArgs),
    /// Export a MILP model in LP format for external solvers.
    ExportLp(ExportLpArgs),
    /// Run the replication benchmark over an instance suite.
    #[command(after_help = PARAM_HELP)]
    Bench(BenchArgs),
    /// Run a temperature/charge-time sensitivity sweep on one instance.
    #[command(after_help = PARAM_HELP)]
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    customers: usize,
    #[arg(long)]
    stations: usize,
    #[arg(long, default_value_t = 60.0)]
    side: f64,
    #[arg(long)]
    fleet: usize,
    #[arg(long)]
    out: PathBuf,
    /// Customer demand range (integers).
    #[arg(long, default_value_t = 1)]
    demand_min: u32,
    #[arg(long, default_value_t = 10)]
    demand_max: u32,
    /// Station fixed-cost range.
    #[arg(long, default_value_t = 800.0)]
    fixed_cost_min: f64,
    #[arg(long, default_value_t = 1200.0)]
    fixed_cost_max: f64,
    #[arg(long, default_value_t = 100.0)]
    capacity: f64,
    #[arg(long, default_value_t = 1.0)]
    cost_rate: f64,
    #[arg(long, default_value_t = 2.0)]
    phi: f64,
    #[arg(long, default_value_t = 90.0)]
    soc0: f64,
    #[arg(long, default_value_t = 90.0)]
    soc_full: f64,
}

#[derive(Args, Debug, Clone)]
struct ChargingArgs {
    /// Ambient temperature in Celsius.
    #[arg(long)]
    temperature: Option<f64>,
    /// Charging time per station visit, minutes.
    #[arg(long)]
    charge_time: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Recharge map: "integrated" (default) or "uncorrected".
    #[arg(long)]
    soc_formula: Option<String>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    algorithm: String,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    charging: ChargingArgs,
    /// Solver parameter override, repeatable: --set key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    charging: ChargingArgs,
}

#[derive(Args, Debug)]
struct ExportLpArgs {
    /// Which formulation: "ev" or "evl".
    #[arg(long)]
    model: String,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    charging: ChargingArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Suite file (JSON list of instance paths); omitted = default ladder.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Seed for the default ladder when no suite file is given.
    #[arg(long, default_value_t = 1)]
    suite_seed: u64,
    /// Comma-separated algorithms.
    #[arg(long, default_value = "sigalns,tsmcws")]
    algorithms: String,
    /// Comma-separated temperatures in Celsius.
    #[arg(long, default_value = "-10,10,30")]
    temps: String,
    /// Comma-separated charging times in minutes.
    #[arg(long, default_value = "80")]
    charge_times: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Base seed; replication k uses seed + k.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    charging: ChargingArgs,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "sigalns,tsmcws")]
    algorithms: String,
    #[arg(long, default_value = "-10,10,30")]
    temps: String,
    #[arg(long, default_value = "40,80,120")]
    charge_times: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    charging: ChargingArgs,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// JSON config file pointed at by `ELRP_CONFIG`. Unknown keys are errors.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    lambda0: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    temperature: Option<f64>,
    charge_time: Option<f64>,
    soc_formula: Option<String>,
    jobs: Option<usize>,
    #[serde(default)]
    set: Vec<String>,
}

fn load_file_config() -> Result<FileConfig> {
    match std::env::var_os("ELRP_CONFIG") {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                context: format!("config file {}", Path::new(&path).display()),
                message: e.to_string(),
            })
        }
    }
}

fn parse_formula(name: &str) -> Result<SocFormula> {
    match name {
        "integrated" => Ok(SocFormula::Integrated),
        "uncorrected" => Ok(SocFormula::Uncorrected),
        other => Err(Error::InvalidArgument(format!(
            "unknown soc formula '{other}' (expected integrated or uncorrected)"
        ))),
    }
}

/// Effective charging settings after merging defaults, config file, flags.
#[derive(Debug, Clone)]
struct ChargingSettings {
    lambdas: (f64, f64, f64),
    temperature: f64,
    charge_time: f64,
    formula: SocFormula,
}

impl ChargingSettings {
    fn resolve(file: &FileConfig, flags: &ChargingArgs) -> Result<Self> {
        let formula = match flags.soc_formula.as_deref().or(file.soc_formula.as_deref()) {
            Some(name) => parse_formula(name)?,
            None => SocFormula::Integrated,
        };
        Ok(Self {
            lambdas: (
                flags.lambda0.or(file.lambda0).unwrap_or(soc::DEFAULT_LAMBDA0),
                flags.lambda1.or(file.lambda1).unwrap_or(soc::DEFAULT_LAMBDA1),
                flags.lambda2.or(file.lambda2).unwrap_or(soc::DEFAULT_LAMBDA2),
            ),
            temperature: flags.temperature.or(file.temperature).unwrap_or(10.0),
            charge_time: flags
                .charge_time
                .or(file.charge_time)
                .unwrap_or(soc::DEFAULT_CHARGE_TIME),
            formula,
        })
    }

    fn model(&self) -> ChargingModel {
        let (l0, l1, l2) = self.lambdas;
        ChargingModel::with_formula(self.formula, l0, l1, l2, self.charge_time, self.temperature)
    }
}

/// Applies one `key=value` override onto the solver parameter bundle.
pub fn apply_override(config: &mut SolverConfig, pair: &str) -> Result<()> {
    let (key, value) = pair.split_once('=').ok_or_else(|| {
        Error::InvalidArgument(format!("override '{pair}' is not of the form key=value"))
    })?;
    let parse_usize = |v: &str| -> Result<usize> {
        v.parse()
            .map_err(|_| Error::InvalidArgument(format!("'{v}' is not a count for {key}")))
    };
    let parse_f64 = |v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| Error::InvalidArgument(format!("'{v}' is not a number for {key}")))
    };
    match key {
        "tsmcws.n_itr_small" => config.tsmcws.n_itr_small = parse_usize(value)?,
        "tsmcws.n_itr_large" => config.tsmcws.n_itr_large = parse_usize(value)?,
        "tsmcws.size_threshold" => config.tsmcws.size_threshold = parse_usize(value)?,
        "tsmcws.tabu_tenure" => config.tsmcws.tabu_tenure = parse_usize(value)?,
        "tsmcws.ts_max_iter" => config.tsmcws.ts_max_iter = parse_usize(value)?,
        "tsmcws.cover_radius" => config.tsmcws.cover_radius = Some(parse_f64(value)?),
        "sigalns.iter_max" => config.sigalns.iter_max = parse_usize(value)?,
        "sigalns.destroy_fraction" => config.sigalns.destroy_fraction = parse_f64(value)?,
        "sigalns.ig_destruct_d" => {
            let d = parse_usize(value)?;
            config.sigalns.ig_destruct_d = if d == 0 { None } else { Some(d) };
        }
        "sigalns.sigma1" => config.sigalns.operator_scores.0 = parse_f64(value)?,
        "sigalns.sigma2" => config.sigalns.operator_scores.1 = parse_f64(value)?,
        "sigalns.sigma3" => config.sigalns.operator_scores.2 = parse_f64(value)?,
        "sigalns.reaction_factor" => config.sigalns.reaction_factor = parse_f64(value)?,
        "sigalns.segment_length" => config.sigalns.segment_length = parse_usize(value)?,
        "sigalns.sa_start_accept_prob" => {
            config.sigalns.sa_start_accept_prob = parse_f64(value)?
        }
        "sigalns.sa_cooling" => config.sigalns.sa_cooling = parse_f64(value)?,
        other => return Err(Error::UnknownParameter(other.to_string())),
    }
    Ok(())
}

fn solver_config(file: &FileConfig, overrides: &[String]) -> Result<SolverConfig> {
    let mut config = SolverConfig::default();
    for pair in file.set.iter().chain(overrides.iter()) {
        apply_override(&mut config, pair)?;
    }
    Ok(config)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} entry '{s}'")))
        })
        .collect()
}

fn parse_algorithms(text: &str) -> Result<Vec<Algorithm>> {
    text.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse())
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    instances: Vec<PathBuf>,
}

fn load_suite(path: &Path) -> Result<Vec<(String, Instance)>> {
    let text = std::fs::read_to_string(path)?;
    let suite: SuiteFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: format!("suite file {}", path.display()),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    suite
        .instances
        .iter()
        .map(|p| {
            let resolved = if p.is_absolute() { p.clone() } else { base.join(p) };
            let inst = load_instance(&resolved)?;
            let id = resolved
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".into());
            Ok((id, inst))
        })
        .collect()
}

fn run_sweep_command(
    suite: Vec<(String, Instance)>,
    algorithms: &str,
    temps: &str,
    charge_times: &str,
    reps: usize,
    seed: u64,
    out: &Path,
    settings: &ChargingSettings,
    solver: SolverConfig,
) -> Result<()> {
    let config = SweepConfig {
        algorithms: parse_algorithms(algorithms)?,
        temps: parse_list(temps, "temperature")?,
        charge_times: parse_list(charge_times, "charge time")?,
        reps,
        base_seed: seed,
        lambdas: settings.lambdas,
        formula: settings.formula,
        solver,
    };
    let report = temperature_sweep(&suite, &config)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.csv"), report_csv(&report))?;
    std::fs::write(out.join("plot_data.csv"), plot_data_csv(&report))?;
    let solutions_dir = out.join("solutions");
    std::fs::create_dir_all(&solutions_dir)?;
    for row in &report.rows {
        for rep in &row.stats.replications {
            let name = format!(
                "{}_{}_t{}_c{}_s{}.json",
                row.instance_id,
                row.algorithm.name(),
                row.temperature,
                row.charge_time,
                rep.seed
            );
            save_solution(&rep.solution, &solutions_dir.join(name))?;
        }
    }
    eprintln!(
        "wrote {} rows and {} aggregates to {}",
        report.rows.len(),
        report.aggregates.len(),
        out.display()
    );
    Ok(())
}

fn run(command: Command) -> Result<()> {
    let file_config = load_file_config()?;
    match command {
        Command::Generate(args) => {
            if args.demand_min > args.demand_max || args.fixed_cost_min > args.fixed_cost_max {
                return Err(Error::InvalidArgument("empty generator range".into()));
            }
            let cfg = GeneratorConfig {
                seed: args.seed,
                n_customers: args.customers,
                n_stations: args.stations,
                region_side: args.side,
                fleet_size: args.fleet,
                demand_range: (args.demand_min, args.demand_max),
                fixed_cost_range: (args.fixed_cost_min, args.fixed_cost_max),
                vehicle_capacity: args.capacity,
                vehicle_cost_rate: args.cost_rate,
                phi: args.phi,
                soc0: args.soc0,
                soc_full: args.soc_full,
            };
            let inst = generate_with(&cfg)?;
            save_instance(&inst, &args.out)?;
            eprintln!(
                "wrote instance with {} customers, {} stations to {}",
                inst.customers.len(),
                inst.stations.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::Solve(args) => {
            let settings = ChargingSettings::resolve(&file_config, &args.charging)?;
            let solver = solver_config(&file_config, &args.set)?;
            let algorithm: Algorithm = args.algorithm.parse()?;
            let instance = load_instance(&args.instance)?;
            let charging = settings.model();
            let solution =
                crate::bench::solve_once(&instance, algorithm, &charging, args.seed, &solver)?;
            save_solution(&solution, &args.out)?;
            eprintln!(
                "objective {:.3} (stations {:.3} + routing {:.3}); {} routes, {} stations opened",
                solution.objective.total,
                solution.objective.station_cost,
                solution.objective.routing_cost,
                solution.routes.len(),
                solution.opened.len()
            );
            Ok(())
        }
        Command::Check(args) => {
            let settings = ChargingSettings::resolve(&file_config, &args.charging)?;
            let instance = load_instance(&args.instance)?;
            let solution = load_solution(&args.solution)?;
            let report = check_solution(&instance, &settings.model(), &solution);
            print!("{report}");
            if report.is_clean() {
                Ok(())
            } else {
                Err(Error::Infeasible { unserved: vec![] })
            }
        }
        Command::ExportLp(args) => {
            let settings = ChargingSettings::resolve(&file_config, &args.charging)?;
            let instance = load_instance(&args.instance)?;
            let model = match args.model.as_str() {
                "ev" => build_ev_model(&instance),
                "evl" => build_evl_model(&instance, &settings.model()),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown model '{other}' (expected ev or evl)"
                    )))
                }
            };
            export_lp(&model, &args.out)?;
            eprintln!(
                "wrote {} variables, {} constraints to {}",
                model.variables.len(),
                model.constraints.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::Bench(args) => {
            let settings = ChargingSettings::resolve(&file_config, &args.charging)?;
            let solver = solver_config(&file_config, &args.set)?;
            let suite = match &args.suite {
                Some(path) => load_suite(path)?,
                None => default_suite(args.suite_seed)?,
            };
            run_sweep_command(
                suite,
                &args.algorithms,
                &args.temps,
                &args.charge_times,
                args.reps,
                args.seed,
                &args.out,
                &settings,
                solver,
            )
        }
        Command::Sweep(args) => {
            let settings = ChargingSettings::resolve(&file_config, &args.charging)?;
            let solver = solver_config(&file_config, &args.set)?;
            let instance = load_instance(&args.instance)?;
            let id = args
                .instance
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".into());
            run_sweep_command(
                vec![(id, instance)],
                &args.algorithms,
                &args.temps,
                &args.charge_times,
                args.reps,
                args.seed,
                &args.out,
                &settings,
                solver,
            )
        }
    }
}

/// Parses `argv` and runs the selected subcommand, mapping every outcome to
/// a process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.version {
        println!(
            "elrp {} (calibration {})",
            env!("CARGO_PKG_VERSION"),
            soc::calibration_hash()
        );
        return 0;
    }
    let jobs = if cli.jobs > 0 {
        cli.jobs
    } else {
        match load_file_config() {
            Ok(cfg) => cfg.jobs.unwrap_or(0),
            Err(_) => 0,
        }
    };
    if jobs > 0 {
        // Ignored if a global pool already exists (tests call dispatch twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (try --help)");
        return 2;
    };
    match run(command) {
        Ok(()) => 0,
        Err(e @ Error::Infeasible { .. }) => {
            eprintln!("{e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Exposed so tests can assert that the checker semantics used by `check`
/// match the solver's model variant.
pub fn variant_of(name: &str) -> Result<ModelVariant> {
    match name {
        "ev" => Ok(ModelVariant::Ev),
        "evl" => Ok(ModelVariant::Evl),
        other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_text_covers_every_documented_parameter() {
        let mut cmd = Cli::command();
        let mut rendered = String::new();
        rendered.push_str(&cmd.render_long_help().to_string());
        for sub in cmd.get_subcommands_mut() {
            rendered.push_str(&sub.render_long_help().to_string());
        }
        for param in DOCUMENTED_PARAMS {
            assert!(
                rendered.contains(param),
                "parameter {param} missing from help text"
            );
        }
    }

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let mut config = SolverConfig::default();
        apply_override(&mut config, "tsmcws.tabu_tenure=9").unwrap();
        assert_eq!(config.tsmcws.tabu_tenure, 9);
        apply_override(&mut config, "sigalns.iter_max=50").unwrap();
        assert_eq!(config.sigalns.iter_max, 50);
        apply_override(&mut config, "sigalns.ig_destruct_d=0").unwrap();
        assert_eq!(config.sigalns.ig_destruct_d, None);
        let err = apply_override(&mut config, "sigalns.bogus=1").unwrap_err();
        assert!(matches!(err, Error::UnknownParameter(_)));
        assert!(apply_override(&mut config, "no-equals-sign").is_err());
    }

    #[test]
    fn every_documented_parameter_is_settable() {
        let mut config = SolverConfig::default();
        for param in DOCUMENTED_PARAMS {
            let value = "1";
            apply_override(&mut config, &format!("{param}={value}"))
                .unwrap_or_else(|e| panic!("{param}: {e}"));
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!(variant_of("ev").unwrap(), ModelVariant::Ev);
        assert_eq!(variant_of("evl").unwrap(), ModelVariant::Evl);
        assert!(variant_of("x").is_err());
    }
}
