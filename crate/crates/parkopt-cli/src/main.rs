//! `parkopt` — plan park purchases and resident assignments from CSV data.
//!
//! Subcommands cover the whole workflow: `validate` checks an instance
//! directory, `solve` produces one optimal plan (JSON + CSV report + map
//! GeoJSON), the analysis commands (`sweep`, `horizon`, `emphasize`,
//! `thresholds`) re-solve under families of overrides and emit CSV series,
//! and `export-mps` hands the model to any MPS-speaking solver.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or usage error,
//! 3 solver limit or solver failure. Every output directory gets a
//! `run_manifest.json`; timestamps live only there, so all other outputs
//! are byte-deterministic given the same inputs and flags.

mod emit;

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use parkopt::instance::{
    load_instance, AccessConfig, InstanceError, ObjectiveKind, ParkInstance,
};
use parkopt::milp::build_model;
use parkopt::policy::{
    budget_sweep, calibrate_emphasis, plan_horizon, summarize, threshold_sensitivity, PlanMode,
    PolicyError,
};
use parkopt::solve::{
    mps_string, solve_enumerate, solve_via_external, ExternalError, MpsError, Provenance,
    Solution, SolveLimits, SolveStatus,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// A command failure carrying its exit code; `main` prints the message to
/// stderr and exits with the code.
pub(crate) struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_IO, message: message.into() }
    }

    pub(crate) fn io(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_IO, message: message.into() }
    }

    fn solver(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_SOLVER, message: message.into() }
    }
}

impl From<InstanceError> for Failure {
    fn from(err: InstanceError) -> Failure {
        let code = if err.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        Failure { code, message: err.to_string() }
    }
}

impl From<PolicyError> for Failure {
    fn from(err: PolicyError) -> Failure {
        let code = match &err {
            PolicyError::Solver { .. } => EXIT_SOLVER,
            // Bad grids, groups, or period counts come straight from flags.
            PolicyError::EmptyGrid
            | PolicyError::UnsortedGrid
            | PolicyError::UnknownGroup(_)
            | PolicyError::NoPeriods
            | PolicyError::NonpositiveThreshold(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure { code, message: err.to_string() }
    }
}

impl From<ExternalError> for Failure {
    fn from(err: ExternalError) -> Failure {
        let code = match &err {
            ExternalError::Io { .. } | ExternalError::BadTemplate => EXIT_IO,
            ExternalError::Mps(MpsError::Io { .. }) => EXIT_IO,
            _ => EXIT_SOLVER,
        };
        Failure { code, message: err.to_string() }
    }
}

#[derive(Parser)]
#[command(
    name = "parkopt",
    version,
    about = "Equity-weighted park siting: validate, solve, and analyze instances"
)]
struct Cli {
    /// Cap the worker threads used by the exhaustive solver.
    #[arg(long, global = true)]
    jobs: Option<NonZeroUsize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance directory and config without solving.
    Validate(InstanceArgs),
    /// Solve one instance and write solution.json, report.csv, and (when
    /// coordinates exist) selected_parks.geojson.
    Solve(SolveArgs),
    /// Re-solve across an ascending budget grid.
    Sweep(SweepArgs),
    /// Compare long-term (whole budget up front) with myopic per-period
    /// purchasing.
    Horizon(HorizonArgs),
    /// Sweep one group's emphasis multiplier and find where the plan moves.
    Emphasize(EmphasizeArgs),
    /// Re-solve under alternative walking-distance thresholds.
    Thresholds(ThresholdsArgs),
    /// Write the instance's model as a free-format MPS file.
    ExportMps(ExportArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Directory holding parks.csv, locations.csv, population.csv,
    /// distances.csv.
    instance_dir: PathBuf,
    /// Config JSON path (default: <instance_dir>/config.json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the purchase budget from the config.
    #[arg(long)]
    budget: Option<f64>,
    /// Override the objective from the config.
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    /// Override whether overcrowding is modeled.
    #[arg(long)]
    capacitated: Option<bool>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Minimize the worst group's weighted deviations.
    MinMax,
    /// Minimize the sum of weighted deviations over groups.
    MinAll,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(arg: ObjectiveArg) -> ObjectiveKind {
        match arg {
            ObjectiveArg::MinMax => ObjectiveKind::MinMax,
            ObjectiveArg::MinAll => ObjectiveKind::MinAll,
        }
    }
}

#[derive(Clone, Debug)]
enum Backend {
    Enumerate,
    External(String),
}

fn parse_backend(raw: &str) -> Result<Backend, String> {
    if raw == "enumerate" {
        return Ok(Backend::Enumerate);
    }
    match raw.strip_prefix("external:") {
        Some(template) if !template.trim().is_empty() => {
            Ok(Backend::External(template.to_string()))
        }
        Some(_) => Err("external backend needs a command template after the colon".into()),
        None => Err(format!("unknown backend '{raw}' (use 'enumerate' or 'external:<template>')")),
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    base: InstanceArgs,
    /// `enumerate` (built-in exact solver) or `external:<template>` where
    /// the template is a shell command with {mps} and {sol} placeholders.
    #[arg(long, default_value = "enumerate", value_parser = parse_backend)]
    backend: Backend,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: InstanceArgs,
    /// Top of the budget grid.
    #[arg(long, default_value_t = 3_000_000.0)]
    max_budget: f64,
    /// Grid increment.
    #[arg(long, default_value_t = 250_000.0)]
    step: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HorizonArgs {
    #[command(flatten)]
    base: InstanceArgs,
    /// Number of planning periods for the myopic discipline.
    #[arg(long, default_value_t = 10)]
    periods: usize,
    /// Budget for the whole horizon (default: the instance budget).
    #[arg(long)]
    total_budget: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmphasizeArgs {
    #[command(flatten)]
    base: InstanceArgs,
    /// Group whose emphasis multiplier is swept.
    #[arg(long)]
    group: String,
    /// Top of the multiplier grid.
    #[arg(long, default_value_t = 50.0)]
    max_weight: f64,
    /// Grid increment.
    #[arg(long, default_value_t = 5.0)]
    step: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ThresholdsArgs {
    #[command(flatten)]
    base: InstanceArgs,
    /// Walking-distance thresholds (miles) to test.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 1.5])]
    thresholds: Vec<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    base: InstanceArgs,
    /// Path of the MPS file to write.
    #[arg(long)]
    out: PathBuf,
}

/// The instance and config after flag overrides, plus provenance for the
/// manifest.
struct Loaded {
    instance: ParkInstance,
    config: AccessConfig,
    instance_dir: PathBuf,
    config_path: PathBuf,
}

fn load(args: &InstanceArgs) -> Result<Loaded, Failure> {
    let config_path =
        args.config.clone().unwrap_or_else(|| args.instance_dir.join("config.json"));
    let (mut instance, mut config) = load_instance(&args.instance_dir, &config_path)?;
    if let Some(budget) = args.budget {
        if !budget.is_finite() || budget < 0.0 {
            return Err(Failure::usage(format!("--budget must be nonnegative, got {budget}")));
        }
        instance = instance.with_budget(budget);
    }
    if let Some(objective) = args.objective {
        config = config.with_objective(objective.into());
    }
    if let Some(capacitated) = args.capacitated {
        config = config.with_capacitated(capacitated);
    }
    Ok(Loaded {
        instance,
        config,
        instance_dir: args.instance_dir.clone(),
        config_path,
    })
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    instance_dir: String,
    config_path: String,
    config_sha256: String,
    tool_version: String,
    timestamp_unix: u64,
    /// Solver provenance, for commands that solved something.
    solver: Option<Provenance>,
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    loaded: &Loaded,
    solver: Option<Provenance>,
) -> Result<(), Failure> {
    use sha2::{Digest, Sha256};
    let config_bytes = std::fs::read(&loaded.config_path).map_err(|err| {
        Failure::io(format!("cannot re-read {}: {err}", loaded.config_path.display()))
    })?;
    let digest = Sha256::digest(&config_bytes);
    let config_sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs();
    let manifest = RunManifest {
        command: command.to_string(),
        instance_dir: loaded.instance_dir.display().to_string(),
        config_path: loaded.config_path.display().to_string(),
        config_sha256,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix,
        solver,
    };
    emit::write_json(&out_dir.join("run_manifest.json"), &manifest)
}

fn create_out_dir(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out)
        .map_err(|err| Failure::io(format!("cannot create {}: {err}", out.display())))
}

/// Grid 0, step, 2·step, … up to `max` (multiples only).
fn step_grid(max: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Failure::usage(format!("--step must be positive, got {step}")));
    }
    if !max.is_finite() || max < 0.0 {
        return Err(Failure::usage(format!("grid top must be nonnegative, got {max}")));
    }
    if max / step > 10_000.0 {
        return Err(Failure::usage(format!("grid of {} points is too fine", max / step)));
    }
    let mut grid = Vec::new();
    let mut i = 0u32;
    loop {
        let value = f64::from(i) * step;
        if value > max * (1.0 + 1e-12) {
            break;
        }
        grid.push(value);
        i += 1;
    }
    Ok(grid)
}

fn require_optimal(solution: &Solution) -> Result<(), Failure> {
    match solution.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::LimitExceeded => Err(Failure::solver(
            "enumeration limits exceeded; export the model with export-mps and use an \
             external solver",
        )),
        SolveStatus::Infeasible => Err(Failure::solver("the model is infeasible")),
    }
}

#[derive(Serialize)]
struct SolveArtifact<'a> {
    objective_kind: ObjectiveKind,
    capacitated: bool,
    budget: f64,
    max_distance: f64,
    solution: &'a Solution,
}

fn cmd_validate(args: &InstanceArgs) -> Result<(), Failure> {
    let loaded = load(args)?;
    let candidates =
        loaded.instance.parks.iter().filter(|p| !p.existing).count();
    println!(
        "ok: {} parks ({} candidate), {} locations, {} groups, budget {}, threshold {} mi",
        loaded.instance.parks.len(),
        candidates,
        loaded.instance.locations.len(),
        loaded.instance.races.len(),
        loaded.instance.budget,
        loaded.instance.max_distance,
    );
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let loaded = load(&args.base)?;
    create_out_dir(&args.out)?;
    let solution = match &args.backend {
        Backend::Enumerate => {
            let solution =
                solve_enumerate(&loaded.instance, &loaded.config, &SolveLimits::default());
            require_optimal(&solution)?;
            solution
        }
        Backend::External(template) => {
            let model = build_model(&loaded.instance, &loaded.config);
            solve_via_external(&model, template, &args.out.join("external"))?
        }
    };
    // Re-price the plan from the instance; this also enforces the budget on
    // externally produced plans.
    let report = summarize(&loaded.instance, &loaded.config, &solution)?;
    let point = solution.best.as_ref().expect("optimal solutions carry a plan");

    let artifact = SolveArtifact {
        objective_kind: loaded.config.objective,
        capacitated: loaded.config.capacitated,
        budget: loaded.instance.budget,
        max_distance: loaded.instance.max_distance,
        solution: &solution,
    };
    emit::write_json(&args.out.join("solution.json"), &artifact)?;
    emit::write_report_csv(&args.out.join("report.csv"), &report)?;
    if let Some(collection) = emit::selected_parks_geojson(&loaded.instance, point) {
        emit::write_json(&args.out.join("selected_parks.geojson"), &collection)?;
    }
    write_manifest(&args.out, "solve", &loaded, Some(solution.provenance))?;
    println!(
        "objective {} ({:?}); opened: {}; outputs in {}",
        point.objective,
        solution.provenance,
        point.opened.join(", "),
        args.out.display(),
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let loaded = load(&args.base)?;
    create_out_dir(&args.out)?;
    let grid = step_grid(args.max_budget, args.step)?;
    let series =
        budget_sweep(&loaded.instance, &loaded.config, &grid, &SolveLimits::default())?;

    let races = &loaded.instance.races;
    let mut header = vec!["budget".to_string(), "objective".to_string(), "opened".to_string()];
    header.extend(emit::report_header(races));
    let mut rows = Vec::with_capacity(series.points.len());
    for (index, point) in series.points.iter().enumerate() {
        let best = point.solution.best.as_ref().expect("sweep keeps optimal points");
        let mut row = vec![
            point.budget.to_string(),
            best.objective.to_string(),
            best.opened.join(";"),
        ];
        row.extend(emit::report_columns(&point.report));
        rows.push(row);
        emit::write_json(
            &args.out.join(format!("solution_{index:03}.json")),
            &serde_json::json!({ "budget": point.budget, "solution": point.solution }),
        )?;
    }
    emit::write_series_csv(&args.out.join("series.csv"), &header, &rows)?;
    emit::write_json(&args.out.join("sweep.json"), &series)?;
    write_manifest(&args.out, "sweep", &loaded, Some(Provenance::DomainBruteForce))?;

    if let Some(budget) = series.truncated_at {
        let marker = format!(
            "sweep truncated at budget {budget}: solver limits exceeded; series.csv holds \
             the completed prefix\n"
        );
        std::fs::write(args.out.join("PARTIAL"), marker)
            .map_err(|err| Failure::io(format!("cannot write PARTIAL marker: {err}")))?;
        return Err(Failure::solver(format!(
            "sweep truncated at budget {budget}; partial outputs in {}",
            args.out.display()
        )));
    }
    println!("wrote {} budget levels to {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_horizon(args: &HorizonArgs) -> Result<(), Failure> {
    let loaded = load(&args.base)?;
    create_out_dir(&args.out)?;
    let total = match args.total_budget {
        Some(total) if !total.is_finite() || total < 0.0 => {
            return Err(Failure::usage(format!(
                "--total-budget must be nonnegative, got {total}"
            )));
        }
        Some(total) => total,
        None => loaded.instance.budget,
    };
    let limits = SolveLimits::default();
    let long_term = plan_horizon(
        &loaded.instance,
        &loaded.config,
        total,
        args.periods,
        PlanMode::LongTerm,
        &limits,
    )?;
    let myopic = plan_horizon(
        &loaded.instance,
        &loaded.config,
        total,
        args.periods,
        PlanMode::Myopic,
        &limits,
    )?;

    let races = &loaded.instance.races;
    let mut header = vec![
        "mode".to_string(),
        "period".to_string(),
        "budget_available".to_string(),
        "purchased".to_string(),
        "cumulative_opened".to_string(),
    ];
    header.extend(emit::report_header(races));
    let mut rows = Vec::new();
    for (mode, timeline) in [("long_term", &long_term), ("myopic", &myopic)] {
        for record in &timeline.records {
            let mut row = vec![
                mode.to_string(),
                record.period.to_string(),
                record.budget_available.to_string(),
                record.purchased.join(";"),
                record.cumulative_opened.join(";"),
            ];
            row.extend(emit::report_columns(&record.report));
            rows.push(row);
        }
    }
    emit::write_series_csv(&args.out.join("series.csv"), &header, &rows)?;
    emit::write_json(
        &args.out.join("horizon.json"),
        &serde_json::json!({
            "total_budget": total,
            "periods": args.periods,
            "long_term": long_term,
            "myopic": myopic,
        }),
    )?;
    emit::write_json(&args.out.join("solution_long_term.json"), &long_term.final_solution)?;
    emit::write_json(&args.out.join("solution_myopic.json"), &myopic.final_solution)?;
    write_manifest(&args.out, "horizon", &loaded, Some(Provenance::DomainBruteForce))?;
    println!(
        "long-term objective {} vs myopic {} over {} period(s); outputs in {}",
        long_term.final_solution.objective().expect("optimal"),
        myopic.final_solution.objective().expect("optimal"),
        args.periods,
        args.out.display(),
    );
    Ok(())
}

fn cmd_emphasize(args: &EmphasizeArgs) -> Result<(), Failure> {
    let loaded = load(&args.base)?;
    create_out_dir(&args.out)?;
    let grid = step_grid(args.max_weight, args.step)?;
    let limits = SolveLimits::default();
    let result =
        calibrate_emphasis(&loaded.instance, &loaded.config, &args.group, &grid, &limits)?;

    // Re-solve each grid point (and the all-ones baseline) to price it; the
    // solver is deterministic, so opened sets match `result` exactly.
    let mut uniform = loaded.config.clone();
    uniform.emphasis =
        loaded.instance.races.iter().map(|race| (race.clone(), 1.0)).collect();

    let races = &loaded.instance.races;
    let mut header = vec![
        "weight".to_string(),
        "opened".to_string(),
        "differs_from_baseline".to_string(),
    ];
    header.extend(emit::report_header(races));
    let mut rows = Vec::with_capacity(grid.len() + 1);

    let baseline_solution = solve_enumerate(&loaded.instance, &uniform, &limits);
    require_optimal(&baseline_solution)?;
    let baseline_report = summarize(&loaded.instance, &uniform, &baseline_solution)?;
    let mut row = vec![
        "baseline".to_string(),
        result.baseline_opened.join(";"),
        "0".to_string(),
    ];
    row.extend(emit::report_columns(&baseline_report));
    rows.push(row);
    emit::write_json(&args.out.join("solution_baseline.json"), &baseline_solution)?;

    for (index, &weight) in grid.iter().enumerate() {
        let mut scoped = uniform.clone();
        scoped.emphasis.insert(args.group.clone(), weight);
        let solution = solve_enumerate(&loaded.instance, &scoped, &limits);
        require_optimal(&solution)?;
        let report = summarize(&loaded.instance, &scoped, &solution)?;
        let opened = &solution.best.as_ref().expect("optimal").opened;
        let differs = opened != &result.baseline_opened;
        let mut row = vec![
            weight.to_string(),
            opened.join(";"),
            u8::from(differs).to_string(),
        ];
        row.extend(emit::report_columns(&report));
        rows.push(row);
        emit::write_json(&args.out.join(format!("solution_{index:03}.json")), &solution)?;
    }

    emit::write_series_csv(&args.out.join("series.csv"), &header, &rows)?;
    emit::write_json(&args.out.join("emphasize.json"), &result)?;
    write_manifest(&args.out, "emphasize", &loaded, Some(Provenance::DomainBruteForce))?;
    match result.threshold {
        Some(weight) => println!(
            "emphasis on {} first moves the plan at weight {weight}; outputs in {}",
            result.group,
            args.out.display()
        ),
        None => println!(
            "emphasis on {} never moves the plan on this grid; outputs in {}",
            result.group,
            args.out.display()
        ),
    }
    Ok(())
}

fn cmd_thresholds(args: &ThresholdsArgs) -> Result<(), Failure> {
    let loaded = load(&args.base)?;
    create_out_dir(&args.out)?;
    let mut thresholds = args.thresholds.clone();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    thresholds.dedup();
    let series = threshold_sensitivity(
        &loaded.instance,
        &loaded.config,
        &thresholds,
        &SolveLimits::default(),
    )?;

    let races = &loaded.instance.races;
    let mut header = vec![
        "max_distance".to_string(),
        "overlap_with_previous".to_string(),
        "objective".to_string(),
        "opened".to_string(),
    ];
    header.extend(emit::report_header(races));
    let mut rows = Vec::with_capacity(series.entries.len());
    for (index, entry) in series.entries.iter().enumerate() {
        let best = entry.solution.best.as_ref().expect("optimal");
        let overlap = match index {
            0 => String::new(),
            _ => series.consecutive_overlap[index - 1].to_string(),
        };
        let mut row = vec![
            entry.max_distance.to_string(),
            overlap,
            best.objective.to_string(),
            best.opened.join(";"),
        ];
        row.extend(emit::report_columns(&entry.report));
        rows.push(row);
        emit::write_json(
            &args.out.join(format!("solution_{index:03}.json")),
            &entry.solution,
        )?;
    }
    emit::write_series_csv(&args.out.join("series.csv"), &header, &rows)?;
    emit::write_json(&args.out.join("thresholds.json"), &series)?;
    write_manifest(&args.out, "thresholds", &loaded, Some(Provenance::DomainBruteForce))?;
    println!(
        "tested {} threshold(s); outputs in {}",
        series.entries.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_export_mps(args: &ExportArgs) -> Result<(), Failure> {
    let loaded = load(&args.base)?;
    let model = build_model(&loaded.instance, &loaded.config);
    let text = mps_string(&model);
    std::fs::write(&args.out, text)
        .map_err(|err| Failure::io(format!("cannot write {}: {err}", args.out.display())))?;
    let manifest_dir = match args.out.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    write_manifest(manifest_dir, "export-mps", &loaded, None)?;
    println!(
        "wrote {}: {} integer columns, {} continuous columns, {} rows",
        args.out.display(),
        model.num_binaries(),
        model.num_continuous(),
        model.constraints().len(),
    );
    Ok(())
}

fn run(command: &Command) -> Result<(), Failure> {
    match command {
        Command::Validate(args) => cmd_validate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Horizon(args) => cmd_horizon(args),
        Command::Emphasize(args) => cmd_emphasize(args),
        Command::Thresholds(args) => cmd_thresholds(args),
        Command::ExportMps(args) => cmd_export_mps(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Only fails if a pool already exists, which cannot happen this
        // early; ignore rather than crash.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.get()).build_global();
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
