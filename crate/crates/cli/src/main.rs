//! `hostcap` command-line front end.

mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hostcap::cia::{Direction, Weights};
use hostcap::feeder::{apply_scenario, extract_phase, generate_synthetic_feeder, read_feeder, serialize_feeder, ImpedanceMode, Scenario};
use hostcap::loadflow::{solve_three_phase, LoadFlowError};
use hostcap::methods::{
    compute_metrics_with_tolerance, run_method, run_modz_calibrated, MethodConfig, MethodError, MethodId, RunStatus, VoltageLimits,
    EPSILON_LADDER,
};
use hostcap::sensitivity::{build_sensitivity_matrices, write_matrices_csv};
use hostcap::{Feeder, Phase};

use output::{write_atomic, Format};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hostcap",
    version,
    about = "Guaranteed-feasible DER hosting capacity for radial feeders",
    allow_negative_numbers = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute hosting capacity with one method and validate it.
    Compute(ComputeArgs),
    /// Validate a set of injections with the three-phase load flow.
    Validate(ValidateArgs),
    /// Write a seeded synthetic feeder.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Up,
    Down,
    Both,
}

impl DirectionArg {
    fn directions(self) -> Vec<Direction> {
        match self {
            DirectionArg::Up => vec![Direction::Maximize],
            DirectionArg::Down => vec![Direction::Minimize],
            DirectionArg::Both => Direction::BOTH.to_vec(),
        }
    }
}

#[derive(Args)]
struct LimitArgs {
    /// Lower voltage limit (pu).
    #[arg(long, default_value_t = 0.95)]
    vmin: f64,
    /// Upper voltage limit (pu).
    #[arg(long, default_value_t = 1.05)]
    vmax: f64,
}

impl LimitArgs {
    fn limits(&self) -> Result<VoltageLimits> {
        if !(self.vmin > 0.0 && self.vmin < self.vmax) {
            bail!("voltage limits must satisfy 0 < vmin < vmax (got {} and {})", self.vmin, self.vmax);
        }
        Ok(VoltageLimits { min: self.vmin, max: self.vmax })
    }
}

#[derive(Args)]
struct ComputeArgs {
    #[arg(long)]
    feeder: PathBuf,
    /// 1i, 1ii, 2ia, 2ib, 2ic, 2ii, modz, iterative or random.
    #[arg(long, default_value = "2ii")]
    method: String,
    /// Mod-Z mismatch threshold (pu); `inf` disables every modification.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Mod-Z only: raise ε from its starting value until the validated
    /// result has no violations.
    #[arg(long)]
    calibrate_epsilon: bool,
    /// Iterative bound-update step.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[command(flatten)]
    limits: LimitArgs,
    /// Per-phase DER rating (kVA) applied to every bus, replacing ratings
    /// from the feeder file.
    #[arg(long)]
    smax_kva: Option<f64>,
    /// `uniform`, `leaf2x`, or a JSON file mapping bus ids to weights.
    #[arg(long, default_value = "uniform")]
    weights: String,
    #[arg(long, value_enum, default_value = "both")]
    direction: DirectionArg,
    /// Random-search seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Random-search sample count.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Report formats; repeat or comma-separate for several.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["json", "csv"])]
    format: Vec<Format>,
    /// Also write the sensitivity matrices of each per-phase model.
    #[arg(long)]
    dump_matrices: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    feeder: PathBuf,
    /// A JSON report from `compute`, or a CSV with `bus,phase,p_mw` columns
    /// (optional `direction` and `q_mvar`).
    #[arg(long)]
    injections: PathBuf,
    /// Which direction of a report (or CSV rows) to validate.
    #[arg(long, value_enum, default_value = "up")]
    direction: DirectionArg,
    /// Multiplies every injection.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[command(flatten)]
    limits: LimitArgs,
    /// Violations up to this size (pu) are not counted.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    buses: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-phase load spread in [0, 0.5].
    #[arg(long, default_value_t = 0.0)]
    unbalance: f64,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Compute(args) => compute(args),
        Command::Validate(args) => validate(args),
        Command::Generate(args) => generate(args).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load_feeder(path: &PathBuf) -> Result<Feeder> {
    read_feeder(path).with_context(|| format!("cannot load feeder {}", path.display()))
}

fn method_from_args(args: &ComputeArgs) -> Result<MethodId> {
    let mut method: MethodId = args.method.parse().map_err(anyhow::Error::msg)?;
    match &mut method {
        MethodId::ModZ { epsilon } => {
            if let Some(e) = args.epsilon {
                *epsilon = e;
            }
        }
        MethodId::Iterative { alpha, max_iter } => {
            if let Some(a) = args.alpha {
                *alpha = a;
            }
            if let Some(m) = args.max_iter {
                *max_iter = m;
            }
        }
        MethodId::RandomSearch { samples, seed } => {
            if let Some(s) = args.samples {
                *samples = s;
            }
            if let Some(s) = args.seed {
                *seed = s;
            }
        }
        _ => {}
    }
    if args.calibrate_epsilon && !matches!(method, MethodId::ModZ { .. }) {
        bail!("--calibrate-epsilon applies to modz only");
    }
    method.validate().map_err(anyhow::Error::msg)?;
    Ok(method)
}

fn compute(args: ComputeArgs) -> Result<u8> {
    let method = method_from_args(&args)?;
    let limits = args.limits.limits()?;
    let weights = inputs::parse_weights(&args.weights)?;
    if let Some(kva) = args.smax_kva {
        if !(kva > 0.0) {
            bail!("--smax-kva must be positive, got {kva}");
        }
    }
    let mut feeder = load_feeder(&args.feeder)?;
    if let Some(s) = args.scenario {
        feeder = apply_scenario(&feeder, s)?;
    }
    if let Some(kva) = args.smax_kva {
        feeder = feeder.with_uniform_s_max(Some(kva / 1000.0 / feeder.phase_base_mw()))?;
    }
    if let Weights::PerBus(map) = &weights {
        if let Some(id) = map.keys().find(|id| feeder.index_of(**id).is_none()) {
            bail!("weights file names bus {id}, which is not in the feeder");
        }
    }

    let mut cfg = MethodConfig {
        limits,
        directions: args.direction.directions(),
        ..MethodConfig::default()
    };
    cfg.cia.weights = weights;

    let started = Instant::now();
    let outcome = match method {
        MethodId::ModZ { epsilon } if args.calibrate_epsilon => {
            let ladder: Vec<f64> =
                std::iter::once(epsilon).chain(EPSILON_LADDER.into_iter().filter(|&e| e > epsilon)).collect();
            run_modz_calibrated(&feeder, &ladder, &cfg).map(|(e, r)| (MethodId::ModZ { epsilon: e }, r))
        }
        _ => run_method(&feeder, method, &cfg).map(|r| (method, r)),
    };
    let (method, report) = match outcome {
        Ok(r) => r,
        Err(MethodError::InfeasibleStart(d)) => {
            eprintln!("infeasible: the first {} solve of {method} has no feasible point", d.as_str());
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    let runtime = started.elapsed().as_secs_f64();

    let mut files = output::report_files(&feeder, &report, &args.format)?;
    if args.dump_matrices {
        for p in Phase::ALL {
            let sp = extract_phase(&feeder, p, ImpedanceMode::Diagonal)?;
            let mut buf = Vec::new();
            write_matrices_csv(&mut buf, &build_sensitivity_matrices(&sp))?;
            files.push((format!("matrices_{p}.csv"), buf));
        }
    }
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let metadata = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "feeder_path": args.feeder.display().to_string(),
        "method": method.to_string(),
        "runtime_seconds": runtime,
        "unix_time": stamp,
    });
    files.push(("metadata.json".into(), serde_json::to_vec_pretty(&metadata)?));

    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    for (name, bytes) in &files {
        write_atomic(&args.out.join(name), bytes)?;
    }
    print!("{}", output::summary_table(&feeder, &report));

    let statuses: Vec<RunStatus> = report.reports().map(|r| r.status).collect();
    if statuses.contains(&RunStatus::SolverError) {
        eprintln!("solver error; see the report notes");
        return Ok(EXIT_ERROR);
    }
    if statuses.contains(&RunStatus::Infeasible) {
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

fn validate(args: ValidateArgs) -> Result<u8> {
    let limits = args.limits.limits()?;
    let feeder = load_feeder(&args.feeder)?;
    let direction = match args.direction {
        DirectionArg::Up => Direction::Maximize,
        DirectionArg::Down => Direction::Minimize,
        DirectionArg::Both => bail!("validate takes a single direction"),
    };
    let injections = inputs::read_injections(&args.injections, &feeder, direction, args.scale)?;
    let result = match solve_three_phase(&feeder, &injections, &Default::default()) {
        Ok(r) => r,
        Err(e @ LoadFlowError::NonConvergence { .. }) => bail!("validation load flow failed: {e}"),
        Err(e) => return Err(e.into()),
    };
    let m = compute_metrics_with_tolerance(&result.voltages, limits, args.tolerance);
    println!("N_v  {}", m.n_v);
    println!("M_v  {:.6e} pu", m.m_v);
    println!("S_v  {:.6e} pu", m.s_v);
    println!("W_M  {:.6} pu", m.w_m);
    println!("VUF  {:.4} %", m.vuf);
    Ok(if m.n_v == 0 { 0 } else { EXIT_VIOLATION })
}

fn generate(args: GenerateArgs) -> Result<()> {
    let feeder = generate_synthetic_feeder(args.buses, args.seed, args.unbalance)?;
    let text = serialize_feeder(&feeder) + "\n";
    match args.out {
        Some(path) => write_atomic(&path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
