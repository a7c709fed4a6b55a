//! Running simulations and convergence studies described by an
//! [`ExperimentConfig`].

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::conv::{fft_nd, unravel};
use crate::diagnostics::StepReport;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Mode};
use crate::harness::convergence::{error_norms, fit_rate, transfer, ErrorRow, ErrorTable, Rate};
use crate::harness::initial::project_initial;
use crate::harness::output;
use crate::kernel::{c_star_report, CStarReport, DiscreteKernel, Extension, PsdReport, DENSE_PSD_LIMIT};
use crate::mesh::Mesh;
use crate::scheme::{self, SchemeConfig, State};

/// Structure-preservation statistics of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub initial_mass: Vec<f64>,
    /// Largest `|mass_k - mass_0| / mass_0` over steps and species.
    pub max_mass_drift: f64,
    /// Smallest cell value over all accepted steps (the initial state is
    /// excluded since box data vanish on part of the domain).
    pub min_value: f64,
    pub total_picard_iters: usize,
    pub max_picard_iters: usize,
    pub clamped: usize,
    /// Asserted entropy checks that failed.
    pub failed_checks: usize,
}

impl RunStats {
    fn new(initial_mass: Vec<f64>) -> Self {
        RunStats {
            steps: 0,
            initial_mass,
            max_mass_drift: 0.0,
            min_value: f64::INFINITY,
            total_picard_iters: 0,
            max_picard_iters: 0,
            clamped: 0,
            failed_checks: 0,
        }
    }

    pub fn positive(&self) -> bool {
        self.steps == 0 || self.min_value > 0.0
    }
}

/// Result of a single simulation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mesh: Mesh,
    pub dt: f64,
    /// Initial report followed by one report per step (empty when reports
    /// were not requested).
    pub reports: Vec<StepReport>,
    pub final_state: State,
    pub snapshots: Vec<State>,
    pub stats: RunStats,
    pub psd: Option<PsdReport>,
    pub c_star: Option<CStarReport>,
    /// Set when the run stopped early; the other fields hold the partial run.
    pub failure: Option<String>,
}

/// Result of a convergence study.
#[derive(Debug, Clone)]
pub struct Convergence {
    pub table: ErrorTable,
    pub rates: Vec<Rate>,
    /// Statistics of every ladder run followed by the reference run.
    pub runs: Vec<(usize, RunStats)>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Trajectory(Box<Trajectory>),
    Convergence(Convergence),
}

/// Options of [`simulate`].
#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    /// Compute a [`StepReport`] (entropies and inequality checks) per step.
    pub reports: bool,
    /// Steps after which the state is stored.
    pub snapshot_steps: Vec<usize>,
}

/// Builds the mesh, kernel and initial state for `cells` per axis (or the
/// configured mesh).
pub fn setup(cfg: &ExperimentConfig, cells: Option<usize>) -> Result<(Mesh, DiscreteKernel, State)> {
    let spec = match cells {
        Some(c) => cfg.mesh.with_cells(c),
        None => cfg.mesh.clone(),
    };
    let mesh = Mesh::new(spec)?;
    let kernel = DiscreteKernel::with_backend(&cfg.kernel, &mesh, cfg.fast_conv)?;
    let u0 = cfg
        .initial
        .iter()
        .map(|d| project_initial(d, &mesh))
        .collect::<Result<Vec<_>>>()?;
    Ok((mesh, kernel, State::new(u0)))
}

/// PSD verdict when it can be computed at reasonable cost.
fn psd_if_feasible(kernel: &DiscreteKernel) -> Option<PsdReport> {
    let feasible = kernel.spec().extension == Extension::PeriodicWrap
        || kernel.n_species() * kernel.mesh().n_cells() <= DENSE_PSD_LIMIT;
    if !feasible {
        log::warn!("kernel too large for a whole-space PSD check; Rao checks are reported only");
        return None;
    }
    kernel.check_psd().ok()
}

/// Runs one simulation, collecting statistics and optional reports.
pub fn simulate(initial: State, kernel: &DiscreteKernel, cfg: &SchemeConfig, opts: &SimulateOptions) -> Result<Trajectory> {
    let mesh = kernel.mesh().clone();
    initial.validate(&mesh)?;
    cfg.validate()?;
    let psd = if opts.reports { psd_if_feasible(kernel) } else { None };
    let psd_ok = psd.map(|r| r.is_psd).unwrap_or(false);
    let mut stats = RunStats::new(initial.masses(&mesh));
    let mut reports = Vec::new();
    if opts.reports {
        reports.push(StepReport::initial(&initial, kernel, cfg)?);
    }
    let mut snapshots = Vec::new();
    if opts.snapshot_steps.contains(&0) {
        snapshots.push(initial.clone());
    }
    let mut last = initial.clone();
    let result = scheme::run(initial, kernel, cfg, |prev, curr, info| {
        stats.steps += 1;
        stats.total_picard_iters += info.picard_iters;
        stats.max_picard_iters = stats.max_picard_iters.max(info.picard_iters);
        stats.clamped += info.clamped;
        for (u, m0) in curr.u.iter().zip(&stats.initial_mass) {
            let drift = (mesh.integrate(u) - m0).abs() / m0;
            stats.max_mass_drift = stats.max_mass_drift.max(drift);
            stats.min_value = u.iter().copied().fold(stats.min_value, f64::min);
        }
        if opts.reports {
            let r = StepReport::after_step(prev, curr, info, kernel, cfg, psd_ok)?;
            if let Some(v) = &r.verdicts {
                if !v.all_ok() {
                    stats.failed_checks += 1;
                    log::warn!("step {}: entropy check failed ({})", curr.step, v.code());
                }
            }
            reports.push(r);
        }
        if opts.snapshot_steps.contains(&curr.step) {
            snapshots.push(curr.clone());
        }
        last = curr.clone();
        Ok(())
    });
    let failure = match result {
        Ok(_) => None,
        Err(e) if e.is_config_error() => return Err(e),
        Err(e) => Some(e),
    };
    let c_star = None;
    Ok(Trajectory {
        mesh,
        dt: cfg.dt,
        reports,
        final_state: last,
        snapshots,
        stats,
        psd,
        c_star,
        failure: failure.map(|e| e.to_string()),
    })
}

/// Dominant nonzero Fourier mode of a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantMode {
    /// Spatial frequency per axis in cycles per unit length.
    pub frequency: Vec<f64>,
    pub wavelength: f64,
    pub amplitude: f64,
}

/// Argmax of `|DFT(f)|` over nonzero frequencies.
pub fn dominant_mode(mesh: &Mesh, field: &[f64]) -> Result<DominantMode> {
    mesh.check_field(field, "field")?;
    let dims = mesh.cells_per_axis().to_vec();
    let mut planner = FftPlanner::<f64>::new();
    let plans: Vec<_> = dims.iter().map(|&m| planner.plan_fft_forward(m)).collect();
    let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut buf, &dims, &plans);
    let d = dims.len();
    let mut idx = vec![0usize; d];
    let mut best: Option<(usize, f64)> = None;
    for (lin, c) in buf.iter().enumerate().skip(1) {
        let a = c.norm();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((lin, a));
        }
    }
    let (lin, amp) = best.ok_or_else(|| Error::usage("field has no nonzero frequencies"))?;
    unravel(lin, &dims, &mut idx);
    let frequency: Vec<f64> = (0..d)
        .map(|l| {
            let k = idx[l] as f64;
            let m = dims[l] as f64;
            let signed = if k > m / 2.0 { k - m } else { k };
            signed / mesh.period(l)
        })
        .collect();
    let norm = frequency.iter().map(|f| f * f).sum::<f64>().sqrt();
    Ok(DominantMode {
        frequency,
        wavelength: 1.0 / norm,
        amplitude: amp / mesh.n_cells() as f64,
    })
}

fn snapshot_steps(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.snapshots
        .iter()
        .map(|t| (t / cfg.scheme.dt).round() as usize)
        .collect()
}

/// Solves the convergence ladder and the reference, in parallel.
pub fn converge(cfg: &ExperimentConfig) -> Result<Convergence> {
    let reference = cfg
        .reference
        .ok_or_else(|| Error::config("convergence studies need a reference level"))?;
    let mut levels = cfg.ladder.clone();
    levels.push(reference);
    let space = match cfg.mode {
        Mode::ConvergeSpace => true,
        Mode::ConvergeTime => false,
        _ => return Err(Error::config("not a convergence experiment")),
    };
    let runs: Vec<Trajectory> = levels
        .par_iter()
        .map(|&level| {
            let (kernel, state, scheme) = if space {
                let (_, kernel, state) = setup(cfg, Some(level))?;
                (kernel, state, cfg.scheme.clone())
            } else {
                let (_, kernel, state) = setup(cfg, None)?;
                let mut s = cfg.scheme.clone();
                s.dt = cfg.scheme.t_end / level as f64;
                (kernel, state, s)
            };
            let traj = simulate(state, &kernel, &scheme, &SimulateOptions::default())?;
            if let Some(f) = &traj.failure {
                return Err(Error::Step {
                    step: traj.stats.steps + 1,
                    source: Box::new(Error::NumericalState(format!("level {level}: {f}"))),
                });
            }
            Ok(traj)
        })
        .collect::<Result<_>>()?;
    let (reference_run, ladder_runs) = runs.split_last().expect("ladder is not empty");
    let mut table = ErrorTable::default();
    for (run, &level) in ladder_runs.iter().zip(&cfg.ladder) {
        let errors = (0..cfg.n_species())
            .map(|i| {
                let r = if space {
                    transfer(&reference_run.final_state.u[i], &reference_run.mesh, &run.mesh, cfg.comparison)?
                } else {
                    reference_run.final_state.u[i].clone()
                };
                error_norms(&run.mesh, &run.final_state.u[i], &r)
            })
            .collect::<Result<Vec<_>>>()?;
        table.rows.push(ErrorRow {
            resolution: if space { run.mesh.h() } else { run.dt },
            level,
            errors,
        });
    }
    let rates = fit_rate(&table)?;
    Ok(Convergence {
        table,
        rates,
        runs: levels.iter().copied().zip(runs.into_iter().map(|r| r.stats)).collect(),
    })
}

/// Runs an experiment and, if `out` is given, writes its artifacts there.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    match cfg.mode {
        Mode::Run | Mode::Entropy => {
            let (mesh, kernel, state) = setup(cfg, None)?;
            let alpha = cfg.scheme.weight.alpha();
            let cstar = c_star_report(&cfg.kernel, &mesh, &state.u, cfg.scheme.kappa, alpha)?;
            let opts = SimulateOptions {
                reports: true,
                snapshot_steps: snapshot_steps(cfg),
            };
            let mut traj = simulate(state, &kernel, &cfg.scheme, &opts)?;
            traj.c_star = Some(cstar);
            if let Some(dir) = out {
                output::write_trajectory(dir, cfg, &traj)?;
            }
            Ok(Outcome::Trajectory(Box::new(traj)))
        }
        Mode::ConvergeSpace | Mode::ConvergeTime => {
            let conv = converge(cfg)?;
            if let Some(dir) = out {
                output::write_convergence(dir, cfg, &conv)?;
            }
            Ok(Outcome::Convergence(conv))
        }
    }
}
