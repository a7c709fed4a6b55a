//! Generalized Scharfetter-Gummel flux, per-species system assembly and the
//! Picard time stepper.
//!
//! With `s = D_{K,sigma} p = p_L - p_K` the flux from `K` through `sigma = K|L` is
//!
//! ```text
//! F_{K,sigma} = -tau ( B_kappa(|s|) (u_L - u_K) + u_hat s ),
//! u_hat = u_L if s >= 0, u_K otherwise,
//! ```
//!
//! and one implicit Euler step reads
//! `m(K)/dt (u_K - u_K^prev) + sum_sigma F_{K,sigma} = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DiscreteKernel;
use crate::linsys::{LinearConfig, LinearSystem};
use crate::mesh::{Dir, Edge, Mesh};
use crate::weights::WeightKind;

/// How the nonlocal potential enters the time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `p^k = W * u^k`; recommended for repulsive interactions.
    Implicit,
    /// `p^k = W * (u^k + u^{k-1})/2`; recommended for attractive interactions.
    Midpoint,
}

fn default_picard_tol() -> f64 {
    1e-10
}

fn default_picard_max_iter() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kappa: f64,
    pub dt: f64,
    pub t_end: f64,
    pub weight: WeightKind,
    pub coupling: Coupling,
    /// Absolute sup-norm tolerance on consecutive Picard iterates.
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
    #[serde(default)]
    pub linear: LinearConfig,
}

impl SchemeConfig {
    pub fn new(kappa: f64, dt: f64, t_end: f64, weight: WeightKind, coupling: Coupling) -> Self {
        SchemeConfig {
            kappa,
            dt,
            t_end,
            weight,
            coupling,
            picard_tol: default_picard_tol(),
            picard_max_iter: default_picard_max_iter(),
            linear: LinearConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::config("picard_tol must be positive"));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::config("picard_max_iter must be positive"));
        }
        self.linear.validate()?;
        self.n_steps().map(|_| ())
    }

    /// `N = T / dt`, which must be (close to) an integer.
    pub fn n_steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::config(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        if n > 1e9 {
            return Err(Error::config("too many time steps"));
        }
        Ok(n as usize)
    }
}

/// Densities of all species at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub step: usize,
    pub time: f64,
    pub u: Vec<Vec<f64>>,
}

impl State {
    pub fn new(u: Vec<Vec<f64>>) -> Self {
        State { step: 0, time: 0.0, u }
    }

    pub fn n_species(&self) -> usize {
        self.u.len()
    }

    pub fn masses(&self, mesh: &Mesh) -> Vec<f64> {
        self.u.iter().map(|f| mesh.integrate(f)).collect()
    }

    /// Checks lengths, finiteness and nonnegativity; every species needs
    /// positive mass.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.u.is_empty() {
            return Err(Error::usage("state has no species"));
        }
        for (i, f) in self.u.iter().enumerate() {
            mesh.check_field(f, "state")?;
            if let Some(v) = f.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::NumericalState(format!(
                    "species {i} has an invalid cell value {v}"
                )));
            }
            if !f.iter().any(|&v| v > 0.0) {
                return Err(Error::config(format!("species {i} has zero mass")));
            }
        }
        Ok(())
    }
}

/// Difference `v_L - v_K` across an edge seen from its owner.
#[inline]
fn diff(v: &[f64], e: &Edge) -> f64 {
    v[e.neighbor] - v[e.owner]
}

/// `F_{K,sigma}` for the edge's owner `K`.
pub fn edge_flux(mesh: &Mesh, u: &[f64], p: &[f64], edge: Edge, kappa: f64, weight: WeightKind) -> Result<f64> {
    mesh.check_field(u, "density")?;
    mesh.check_field(p, "potential")?;
    let (uk, ul, pk, pl) = (u[edge.owner], u[edge.neighbor], p[edge.owner], p[edge.neighbor]);
    if !(uk.is_finite() && ul.is_finite() && pk.is_finite() && pl.is_finite()) {
        return Err(Error::NumericalState("non-finite value in flux arguments".into()));
    }
    let s = diff(p, &edge);
    let b = weight.eval_scaled(kappa, s.abs())?;
    let u_hat = if s >= 0.0 { ul } else { uk };
    Ok(-mesh.transmissibility(edge.axis) * (b * diff(u, &edge) + u_hat * s))
}

/// Assembles `A(p) u = S(u_prev)` for one species.
pub fn assemble(mesh: &Mesh, u_prev: &[f64], p: &[f64], cfg: &SchemeConfig) -> Result<LinearSystem> {
    mesh.check_field(u_prev, "previous density")?;
    mesh.check_field(p, "potential")?;
    if u_prev.iter().any(|v| !v.is_finite() || *v < 0.0) || !u_prev.iter().any(|&v| v > 0.0) {
        return Err(Error::config("previous density must be nonnegative with positive mass"));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalState("non-finite potential".into()));
    }
    Ok(assemble_unchecked(mesh, u_prev, p, cfg))
}

pub(crate) fn assemble_unchecked(mesh: &Mesh, u_prev: &[f64], p: &[f64], cfg: &SchemeConfig) -> LinearSystem {
    let n = mesh.n_cells();
    let d = mesh.dim();
    let width = 2 * d;
    let m_dt = mesh.cell_measure() / cfg.dt;
    let mut diag = vec![m_dt; n];
    let mut off = vec![0.0; n * width];
    let mut cols = vec![0usize; n * width];
    for k in 0..n {
        for axis in 0..d {
            let tau = mesh.transmissibility(axis);
            for (slot, dir) in [(2 * axis, Dir::Forward), (2 * axis + 1, Dir::Backward)] {
                let l = mesh.step(k, axis, dir);
                let s = p[l] - p[k];
                let b = cfg.weight.eval_scaled_unchecked(cfg.kappa, s.abs());
                diag[k] += tau * (b + (-s).max(0.0));
                off[k * width + slot] = -tau * (b + s.max(0.0));
                cols[k * width + slot] = l;
            }
        }
    }
    let rhs = u_prev.iter().map(|v| m_dt * v).collect();
    LinearSystem::new(diag, off, cols, rhs).expect("assembled system is consistent")
}

/// Per-cell residual `m(K)/dt (u_K - u_K^prev) + sum_sigma F_{K,sigma}`.
pub fn scheme_residual(mesh: &Mesh, u_prev: &[f64], u: &[f64], p: &[f64], cfg: &SchemeConfig) -> Result<Vec<f64>> {
    mesh.check_field(u_prev, "previous density")?;
    let m_dt = mesh.cell_measure() / cfg.dt;
    let mut r: Vec<f64> = u.iter().zip(u_prev).map(|(a, b)| m_dt * (a - b)).collect();
    for e in mesh.edges() {
        let f = edge_flux(mesh, u, p, e, cfg.kappa, cfg.weight)?;
        r[e.owner] += f;
        r[e.neighbor] -= f;
    }
    Ok(r)
}

/// What one accepted time step did.
#[derive(Debug, Clone, Default)]
pub struct StepInfo {
    pub picard_iters: usize,
    /// `max_i ||u_i^{k,l} - u_i^{k,l-1}||_inf` for every Picard iteration.
    pub update_history: Vec<f64>,
    /// Potentials used in the final linear solves.
    pub potentials: Vec<Vec<f64>>,
    pub linear_iters: usize,
    pub max_linear_residual: f64,
    pub clamped: usize,
}

/// Advances one time step with the Picard iteration.
pub fn advance(prev: &State, kernel: &DiscreteKernel, cfg: &SchemeConfig) -> Result<(State, StepInfo)> {
    let mesh = kernel.mesh();
    let n = prev.n_species();
    if n != kernel.n_species() {
        return Err(Error::usage(format!(
            "state has {n} species, kernel has {}",
            kernel.n_species()
        )));
    }
    let step = prev.step + 1;
    let mut cur = prev.u.clone();
    let mut info = StepInfo::default();
    for it in 1..=cfg.picard_max_iter {
        let p = if kernel.is_zero() {
            vec![vec![0.0; mesh.n_cells()]; n]
        } else {
            match cfg.coupling {
                Coupling::Implicit => kernel.potential_implicit(&cur)?,
                Coupling::Midpoint => kernel.potential_midpoint(&cur, &prev.u)?,
            }
        };
        if p.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NumericalState(format!("step {step}: non-finite potential")));
        }
        let solved: Vec<(Vec<f64>, crate::linsys::SolveStats)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let sys = assemble_unchecked(mesh, &prev.u[i], &p[i], cfg);
                let mut x = cur[i].clone();
                let stats = sys.solve(&mut x, &cfg.linear)?;
                Ok((x, stats))
            })
            .collect::<Result<_>>()
            .map_err(|e| Error::Step {
                step,
                source: Box::new(e),
            })?;
        let mut e = 0.0f64;
        for (i, (x, stats)) in solved.into_iter().enumerate() {
            for (a, b) in x.iter().zip(&cur[i]) {
                e = e.max((a - b).abs());
            }
            info.linear_iters += stats.iterations;
            info.max_linear_residual = info.max_linear_residual.max(stats.relative_residual);
            info.clamped += stats.clamped;
            cur[i] = x;
        }
        info.update_history.push(e);
        if e <= cfg.picard_tol {
            info.picard_iters = it;
            info.potentials = p;
            if info.clamped > 0 {
                log::debug!("step {step}: {} cell values clamped to positive", info.clamped);
            }
            return Ok((
                State {
                    step,
                    time: step as f64 * cfg.dt,
                    u: cur,
                },
                info,
            ));
        }
    }
    log::debug!("step {step}: Picard update history {:?}", info.update_history);
    Err(Error::PicardFailure {
        step,
        iterations: cfg.picard_max_iter,
        last_update: *info.update_history.last().unwrap_or(&f64::NAN),
        update_history: info.update_history,
    })
}

/// Summary of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: State,
    pub steps: usize,
    pub total_picard_iters: usize,
    pub max_picard_iters: usize,
    pub total_clamped: usize,
}

/// Advances `N = T/dt` steps, calling `observer(prev, curr, info)` after each.
pub fn run<F>(initial: State, kernel: &DiscreteKernel, cfg: &SchemeConfig, mut observer: F) -> Result<RunSummary>
where
    F: FnMut(&State, &State, &StepInfo) -> Result<()>,
{
    cfg.validate()?;
    initial.validate(kernel.mesh())?;
    let n_steps = cfg.n_steps()?;
    let mut state = initial;
    let mut summary = RunSummary {
        final_state: state.clone(),
        steps: 0,
        total_picard_iters: 0,
        max_picard_iters: 0,
        total_clamped: 0,
    };
    for _ in 0..n_steps {
        let (next, info) = advance(&state, kernel, cfg).map_err(|e| match e {
            e @ (Error::Step { .. } | Error::PicardFailure { .. }) => e,
            other => Error::Step {
                step: state.step + 1,
                source: Box::new(other),
            },
        })?;
        observer(&state, &next, &info)?;
        summary.steps += 1;
        summary.total_picard_iters += info.picard_iters;
        summary.max_picard_iters = summary.max_picard_iters.max(info.picard_iters);
        summary.total_clamped += info.clamped;
        state = next;
    }
    summary.final_state = state;
    Ok(summary)
}
