use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use grbm_cli::checks::{run_check, run_gibbs_check, CheckConfig, GibbsCheckConfig};
use grbm_cli::inspect::write_inspection;
use grbm_cli::parallel::{self, thread_pool, THREADS_ENV};
use grbm_cli::table::{self, write_rows};
use grbm_cli::CliError;
use grbm_core::experiments::{trial_seeds, DEFAULT_SD_GRID};
use grbm_core::{sample_params, InstanceSpec, SampleSpace, SolverOptions, SweepMode, SweepSpec, VaryFamily};

/// Mean-field inference experiments on Gaussian restricted Boltzmann machines.
#[derive(Parser, Debug)]
#[command(name = "grbm", version, about)]
struct Cli {
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep one parameter family's standard deviation and write a table.
    Sweep(SweepArgs),
    /// Print one instance with its exact and mean-field results.
    Inspect(InspectArgs),
    /// Check the free-energy ordering and the exact cases on random instances.
    Check(CheckArgs),
    /// Compare block Gibbs estimates with exact enumeration.
    GibbsCheck(GibbsCheckArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    FreeEnergy,
    Mse,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Vary {
    W,
    B,
    C,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OutputFormat {
    Csv,
    Tsv,
}

/// `binary`, `ternary` or `custom:v1,v2,...`
fn parse_space(s: &str) -> Result<SampleSpace, String> {
    match s {
        "binary" => Ok(SampleSpace::binary()),
        "ternary" => Ok(SampleSpace::ternary()),
        _ => {
            let list = s
                .strip_prefix("custom:")
                .ok_or_else(|| format!("unknown space {s:?}; use binary, ternary or custom:v1,v2,..."))?;
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad value {v:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            SampleSpace::new(values).map_err(|e| e.to_string())
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Fraction of the previous iterate kept per update.
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 1.0)]
    init_scale: f64,
}

impl SolverArgs {
    fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
            n_restarts: self.restarts,
            init_scale: self.init_scale,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    #[arg(long)]
    n_visible: Option<usize>,
    #[arg(long)]
    n_hidden: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    sd_b: f64,
    #[arg(long, default_value_t = 0.1)]
    sd_c: f64,
    #[arg(long)]
    sd_w: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// binary, ternary or custom:v1,v2,...
    #[arg(long, default_value = "binary", value_parser = parse_space)]
    space: SampleSpace,
}

impl InstanceArgs {
    fn spec(&self, default_shape: (usize, usize), default_sd_w: f64) -> InstanceSpec {
        InstanceSpec {
            n_visible: self.n_visible.unwrap_or(default_shape.0),
            n_hidden: self.n_hidden.unwrap_or(default_shape.1),
            sd_b: self.sd_b,
            sd_c: self.sd_c,
            sd_w: self.sd_w.unwrap_or(default_sd_w),
            sigma2: self.sigma2,
            space: self.space.clone(),
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "free-energy")]
    mode: Mode,
    /// Parameter family whose standard deviation is swept.
    #[arg(long, value_enum)]
    vary: Vary,
    #[arg(long, default_value = "binary", value_parser = parse_space)]
    space: SampleSpace,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated, strictly increasing standard deviations.
    #[arg(long, value_delimiter = ',')]
    sd_grid: Option<Vec<f64>>,
    /// Standard deviation of the families not being swept.
    #[arg(long, default_value_t = 0.1)]
    fixed_sd: f64,
    #[arg(long, default_value_t = 24)]
    n_visible: usize,
    #[arg(long, default_value_t = 12)]
    n_hidden: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Leave trials with an unconverged solver out of the averages.
    #[arg(long)]
    strict: bool,
    /// Largest hidden state space to enumerate.
    #[arg(long, default_value_t = grbm_core::DEFAULT_STATE_CAP)]
    state_cap: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slack on the free-energy and KL orderings.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Allowed error in the exactly solvable cases.
    #[arg(long, default_value_t = 1e-12)]
    exact_tolerance: f64,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct GibbsCheckArgs {
    #[arg(long, default_value_t = 20)]
    repetitions: usize,
    #[arg(long, default_value_t = 100_000)]
    sweeps: usize,
    #[arg(long, default_value_t = 1000)]
    burnin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3.0)]
    sigmas: f64,
    #[arg(long, default_value_t = 0.95)]
    min_fraction: f64,
    #[command(flatten)]
    instance: InstanceArgs,
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let spec = SweepSpec {
        mode: match args.mode {
            Mode::FreeEnergy => SweepMode::FreeEnergy,
            Mode::Mse => SweepMode::Mse,
        },
        vary: match args.vary {
            Vary::W => VaryFamily::W,
            Vary::B => VaryFamily::B,
            Vary::C => VaryFamily::C,
        },
        sd_grid: args.sd_grid.clone().unwrap_or_else(|| DEFAULT_SD_GRID.to_vec()),
        fixed_sd: args.fixed_sd,
        n_visible: args.n_visible,
        n_hidden: args.n_hidden,
        space: args.space.clone(),
        trials: args.trials,
        sigma2: args.sigma2,
        solver: args.solver.options(0),
        seed: args.seed,
        strict: args.strict,
        state_cap: args.state_cap,
    };
    // reject bad flags before touching the output file
    spec.validate()?;
    let rows = parallel::run_sweep(&spec)?;
    let format = match args.format {
        OutputFormat::Csv => table::Format::Csv,
        OutputFormat::Tsv => table::Format::Tsv,
    };
    let unconverged: usize = rows.iter().map(|r| r.n_unconverged).sum();
    if unconverged > 0 {
        eprintln!("note: {unconverged} trials had an unconverged solver");
    }
    write_rows(open_output(args.out.as_ref())?, spec.mode, &rows, format)
}

fn inspect(args: &InspectArgs) -> Result<(), CliError> {
    let spec = args.instance.spec((24, 12), 0.1);
    let (instance_seed, solver_seed) = trial_seeds(args.seed, 0, 0);
    let params = sample_params(&spec, instance_seed)?;
    let mut out = open_output(args.out.as_ref())?;
    writeln!(out, "# instance seed {} (from --seed {})", instance_seed, args.seed)?;
    write_inspection(&mut out, &params, &args.solver.options(solver_seed))?;
    out.flush()?;
    Ok(())
}

fn check(args: &CheckArgs) -> Result<(), CliError> {
    let cfg = CheckConfig {
        instance: args.instance.spec((24, 12), 0.1),
        instances: args.instances,
        solver: args.solver.options(0),
        seed: args.seed,
        tolerance: args.tolerance,
        exact_tolerance: args.exact_tolerance,
    };
    let summary = run_check(&cfg)?;
    for line in summary.lines() {
        println!("{line}");
    }
    for v in summary.violations.iter().take(20) {
        eprintln!("{v}");
    }
    if summary.passed() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("{} failures", summary.violations.len())))
    }
}

fn gibbs_check(args: &GibbsCheckArgs) -> Result<(), CliError> {
    let cfg = GibbsCheckConfig {
        instance: args.instance.spec((6, 4), 0.3),
        repetitions: args.repetitions,
        sweeps: args.sweeps,
        burnin: args.burnin,
        seed: args.seed,
        sigmas: args.sigmas,
        min_fraction: args.min_fraction,
    };
    let summary = run_gibbs_check(&cfg)?;
    println!("{}", summary.line());
    if summary.passed() {
        Ok(())
    } else {
        Err(CliError::Violation("Gibbs estimates disagree with enumeration".into()))
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let pool = thread_pool(cli.threads)?;
    pool.install(|| match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Inspect(a) => inspect(a),
        Command::Check(a) => check(a),
        Command::GibbsCheck(a) => gibbs_check(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("grbm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
