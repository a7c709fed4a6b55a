//! `sgfv`: command-line driver for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgfv::conv::FastConv;
use sgfv::harness::{run_experiment, ExperimentConfig, Mode, Outcome};
use sgfv::kernel::c_star_report;
use sgfv::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "sgfv", version, about = "Finite-volume solver for nonlocal cross-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation with per-step diagnostics.
    Run(Common),
    /// Spatial convergence study against a fine reference.
    ConvergeSpace(Common),
    /// Temporal convergence study against a small-step reference.
    ConvergeTime(Common),
    /// Run and record the entropy trajectory and inequality checks.
    Entropy(Common),
    /// Report the PSD verdict and the small-data constant of the kernel.
    CheckKernel(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Convolution backend.
    #[arg(long, value_enum)]
    fast_conv: Option<FastConvArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FastConvArg {
    On,
    Off,
    Auto,
}

impl From<FastConvArg> for FastConv {
    fn from(a: FastConvArg) -> Self {
        match a {
            FastConvArg::On => FastConv::On,
            FastConvArg::Off => FastConv::Off,
            FastConvArg::Auto => FastConv::Auto,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(command: Command) -> Result<u8, Error> {
    let (common, mode) = match command {
        Command::Run(c) => (c, Some(Mode::Run)),
        Command::ConvergeSpace(c) => (c, Some(Mode::ConvergeSpace)),
        Command::ConvergeTime(c) => (c, Some(Mode::ConvergeTime)),
        Command::Entropy(c) => (c, Some(Mode::Entropy)),
        Command::CheckKernel(c) => (c, None),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(f) = common.fast_conv {
        cfg.fast_conv = f.into();
    }
    let Some(mode) = mode else {
        return check_kernel(&cfg);
    };
    if cfg.mode != mode {
        // the subcommand decides what to run; a ladder is still required for studies
        log::info!("running '{}' as {:?} (config says {:?})", cfg.name, mode, cfg.mode);
        cfg.mode = mode;
        cfg.validate()?;
    }
    let out = common.out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    match run_experiment(&cfg, Some(&out))? {
        Outcome::Trajectory(t) => {
            let s = &t.stats;
            println!(
                "{}: {} steps, max mass drift {:.3e}, min value {:.3e}, failed entropy checks {}",
                cfg.name, s.steps, s.max_mass_drift, s.min_value, s.failed_checks
            );
            if let Some(c) = t.c_star {
                println!("c* = {:.6e} (threshold {:.6e}, small: {})", c.c_star, c.threshold, c.small);
            }
            if let Some(f) = &t.failure {
                log::error!("run stopped early: {f}");
                return Ok(EXIT_FAILURE);
            }
        }
        Outcome::Convergence(c) => {
            for row in &c.table.rows {
                let cols: Vec<String> = row
                    .errors
                    .iter()
                    .map(|e| format!("{:.3e} {:.3e}", e.linf, e.l1))
                    .collect();
                println!("{:>6} {:.4e}  {}", row.level, row.resolution, cols.join("  "));
            }
            for r in &c.rates {
                println!(
                    "species {} {:>4}: order {:.3} (last pair {:.3})",
                    r.species + 1,
                    r.norm.name(),
                    r.order,
                    r.last_pair
                );
            }
        }
    }
    println!("artifacts written to {}", out.display());
    Ok(0)
}

fn check_kernel(cfg: &ExperimentConfig) -> Result<u8, Error> {
    let (mesh, kernel, state) = sgfv::harness::experiment::setup(cfg, None)?;
    let psd = kernel.check_psd()?;
    println!(
        "psd: {} (min eigenvalue {:.6e}, max |eigenvalue| {:.6e})",
        psd.is_psd, psd.min_eigenvalue, psd.max_abs_eigenvalue
    );
    let c = c_star_report(&cfg.kernel, &mesh, &state.u, cfg.scheme.kappa, cfg.scheme.weight.alpha())?;
    println!("c* = {:.6e}, threshold {:.6e}, small data: {}", c.c_star, c.threshold, c.small);
    Ok(0)
}
