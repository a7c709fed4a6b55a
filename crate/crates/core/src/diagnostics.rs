//! Discrete entropies, entropy production terms and runtime checks of the
//! entropy inequalities.
//!
//! All sums run over cells in index order and over edges in the order of
//! [`Mesh::edges`], so the results do not depend on thread counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::DiscreteKernel;
use crate::mesh::Mesh;
use crate::scheme::{Coupling, SchemeConfig, State, StepInfo};
use crate::weights::WeightKind;

/// `H_B = sum_i sum_K m(K) u (log u - 1)`, with `0 log 0 = 0`.
pub fn entropy_boltzmann(mesh: &Mesh, u: &[Vec<f64>]) -> Result<f64> {
    let mut h = 0.0;
    for f in u {
        mesh.check_field(f, "density")?;
        let mut acc = 0.0;
        for &v in f {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::usage(format!("Boltzmann entropy of invalid value {v}")));
            }
            if v > 0.0 {
                acc += v * (v.ln() - 1.0);
            }
        }
        h += mesh.cell_measure() * acc;
    }
    Ok(h)
}

/// `H_R = 1/2 sum_ij sum_KJ m(K) m(J) W_KJ^ij u_iK u_jJ`, evaluated through
/// the potentials `p = W * u`.
pub fn entropy_rao(kernel: &DiscreteKernel, u: &[Vec<f64>]) -> Result<f64> {
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let p = kernel.potential(u)?;
    Ok(rao_from_potential(kernel.mesh(), u, &p))
}

fn rao_from_potential(mesh: &Mesh, u: &[Vec<f64>], p: &[Vec<f64>]) -> f64 {
    let mut h = 0.0;
    for (f, q) in u.iter().zip(p) {
        h += f.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * mesh.cell_measure() * h
}

/// Entropy production terms at `(u, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Productions {
    /// `4 kappa sum tau B(|D p| / kappa) |D sqrt u|^2`.
    pub p_b: f64,
    /// `sum tau u_hat |D p|^2`.
    pub p_r: f64,
    /// `sum tau (D p)(D u)`.
    pub x: f64,
    /// `sum tau |D sqrt u|^2`.
    pub fisher: f64,
}

pub fn productions(mesh: &Mesh, u: &[Vec<f64>], p: &[Vec<f64>], kappa: f64, weight: WeightKind) -> Result<Productions> {
    if u.len() != p.len() {
        return Err(Error::usage("density and potential species counts differ"));
    }
    let mut out = Productions::default();
    for (f, q) in u.iter().zip(p) {
        mesh.check_field(f, "density")?;
        mesh.check_field(q, "potential")?;
        if let Some(v) = f.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::usage(format!("production terms of invalid density {v}")));
        }
        for e in mesh.edges() {
            let tau = mesh.transmissibility(e.axis);
            let (uk, ul) = (f[e.owner], f[e.neighbor]);
            let s = q[e.neighbor] - q[e.owner];
            let dsq = ul.sqrt() - uk.sqrt();
            let u_hat = if s >= 0.0 { ul } else { uk };
            out.p_b += 4.0 * tau * weight.eval_scaled_unchecked(kappa, s.abs()) * dsq * dsq;
            out.p_r += tau * u_hat * s * s;
            out.x += tau * s * (ul - uk);
            out.fisher += tau * dsq * dsq;
        }
    }
    Ok(out)
}

/// Fisher information through the discrete chain rule,
/// `sum tau |D u|^2 / (4 u_bar)` with the power mean
/// `u_bar = ((sqrt u_K + sqrt u_L)/2)^2`.
pub fn fisher_via_power_mean(mesh: &Mesh, u: &[f64]) -> Result<f64> {
    mesh.check_field(u, "density")?;
    let mut acc = 0.0;
    for e in mesh.edges() {
        let (a, b) = (u[e.owner], u[e.neighbor]);
        if a == b {
            continue;
        }
        let mean = 0.25 * (a.sqrt() + b.sqrt()).powi(2);
        acc += mesh.transmissibility(e.axis) * (b - a).powi(2) / (4.0 * mean);
    }
    Ok(acc)
}

/// `sum_K v_K sum_{sigma in E_K} F_{K,sigma}` for edge fluxes given in
/// [`Mesh::edges`] order (each seen from its owner).
pub fn flux_cell_pairing(mesh: &Mesh, flux: &[f64], v: &[f64]) -> Result<f64> {
    mesh.check_field(v, "cell field")?;
    if flux.len() != mesh.n_edges() {
        return Err(Error::usage("one flux per edge is required"));
    }
    let mut div = vec![0.0; mesh.n_cells()];
    for (e, f) in mesh.edges().zip(flux) {
        div[e.owner] += f;
        div[e.neighbor] -= f;
    }
    Ok(div.iter().zip(v).map(|(a, b)| a * b).sum())
}

/// `-sum_sigma F_{K,sigma} D_{K,sigma} v`, the edge side of discrete
/// integration by parts.
pub fn flux_edge_pairing(mesh: &Mesh, flux: &[f64], v: &[f64]) -> Result<f64> {
    mesh.check_field(v, "cell field")?;
    if flux.len() != mesh.n_edges() {
        return Err(Error::usage("one flux per edge is required"));
    }
    Ok(-mesh
        .edges()
        .zip(flux)
        .map(|(e, f)| f * (v[e.neighbor] - v[e.owner]))
        .sum::<f64>())
}

/// Outcome of one inequality check `lhs <= rhs + tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; negative values are violations before tolerance.
    pub slack: f64,
    pub tolerance: f64,
    /// Whether the hypotheses guaranteeing the inequality hold.
    pub asserted: bool,
    pub passed: bool,
}

impl Verdict {
    fn new(lhs: f64, rhs: f64, tolerance: f64, asserted: bool) -> Self {
        let slack = rhs - lhs;
        Verdict {
            lhs,
            rhs,
            slack,
            tolerance,
            asserted,
            passed: slack >= -tolerance,
        }
    }

    /// False only for an asserted check that failed.
    pub fn ok(&self) -> bool {
        self.passed || !self.asserted
    }
}

/// Checks (i) Boltzmann, (ii) Rao and (iii) Fisher inequalities for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdicts {
    pub boltzmann: Verdict,
    pub rao: Verdict,
    pub fisher: Verdict,
}

impl Verdicts {
    pub fn all_ok(&self) -> bool {
        self.boltzmann.ok() && self.rao.ok() && self.fisher.ok()
    }

    pub fn code(&self) -> String {
        [self.boltzmann, self.rao, self.fisher]
            .iter()
            .map(|v| match (v.asserted, v.passed) {
                (_, true) => 'P',
                (true, false) => 'F',
                (false, false) => 'f',
            })
            .collect()
    }
}

/// Tolerance for the entropy inequalities.
pub fn tolerance_scale(cfg: &SchemeConfig, h_b: f64, h_r: f64) -> f64 {
    100.0 * (cfg.picard_tol / cfg.dt + cfg.linear.rel_tol) * 1f64.max(h_b.abs()).max(h_r.abs())
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub masses: Vec<f64>,
    pub h_b: f64,
    pub h_r: f64,
    pub productions: Productions,
    pub picard_iters: usize,
    pub linear_residual: f64,
    pub verdicts: Option<Verdicts>,
}

impl StepReport {
    /// Diagnostics of the initial state, with productions at `p = W * u`.
    pub fn initial(state: &State, kernel: &DiscreteKernel, cfg: &SchemeConfig) -> Result<Self> {
        let mesh = kernel.mesh();
        let p = kernel.potential(&state.u)?;
        Ok(StepReport {
            step: state.step,
            time: state.time,
            masses: state.masses(mesh),
            h_b: entropy_boltzmann(mesh, &state.u)?,
            h_r: rao_from_potential(mesh, &state.u, &p),
            productions: productions(mesh, &state.u, &p, cfg.kappa, cfg.weight)?,
            picard_iters: 0,
            linear_residual: 0.0,
            verdicts: None,
        })
    }

    /// Diagnostics of an accepted step; `psd` is the kernel's PSD verdict.
    pub fn after_step(
        prev: &State,
        curr: &State,
        info: &StepInfo,
        kernel: &DiscreteKernel,
        cfg: &SchemeConfig,
        psd: bool,
    ) -> Result<Self> {
        let mesh = kernel.mesh();
        let h_b = entropy_boltzmann(mesh, &curr.u)?;
        let h_r = entropy_rao(kernel, &curr.u)?;
        let prod = productions(mesh, &curr.u, &info.potentials, cfg.kappa, cfg.weight)?;
        let verdicts = verify_step(prev, curr, &info.potentials, kernel, cfg, psd)?;
        Ok(StepReport {
            step: curr.step,
            time: curr.time,
            masses: curr.masses(mesh),
            h_b,
            h_r,
            productions: prod,
            picard_iters: info.picard_iters,
            linear_residual: info.max_linear_residual,
            verdicts: Some(verdicts),
        })
    }
}

/// Evaluates the three entropy inequalities for the step `prev -> curr`
/// taken with potentials `p`.
///
/// (i) and (iii) only use that `curr` solves the linear systems built from
/// `p`, so they are always asserted. (ii) additionally needs the potential to
/// come from the kernel, and holds for mid-point coupling or for implicit
/// coupling with a positive semidefinite kernel.
pub fn verify_step(
    prev: &State,
    curr: &State,
    p: &[Vec<f64>],
    kernel: &DiscreteKernel,
    cfg: &SchemeConfig,
    psd: bool,
) -> Result<Verdicts> {
    let mesh = kernel.mesh();
    let alpha = cfg.weight.alpha();
    let kappa = cfg.kappa;
    let hb0 = entropy_boltzmann(mesh, &prev.u)?;
    let hb1 = entropy_boltzmann(mesh, &curr.u)?;
    let hr0 = entropy_rao(kernel, &prev.u)?;
    let hr1 = entropy_rao(kernel, &curr.u)?;
    let pr = productions(mesh, &curr.u, p, kappa, cfg.weight)?;
    let tol = tolerance_scale(cfg, hb1, hr1);
    let boltzmann = Verdict::new((hb1 - hb0) / cfg.dt + pr.p_b, -pr.x, tol, true);
    let rao_asserted = match cfg.coupling {
        Coupling::Midpoint => true,
        Coupling::Implicit => psd,
    };
    let rao = Verdict::new((hr1 - hr0) / cfg.dt + (1.0 - alpha) * pr.p_r, -kappa * pr.x, tol, rao_asserted);
    let fisher = Verdict::new(
        kappa * (1.0 - alpha) * pr.fisher,
        0.25 * pr.p_b + (alpha / kappa) * pr.p_r - alpha * pr.x,
        tol,
        true,
    );
    Ok(Verdicts { boltzmann, rao, fisher })
}
