//! CSV and JSON artifacts. Floating-point values carry 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::StepReport;
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, Mode};
use crate::harness::convergence::ErrorTable;
use crate::harness::experiment::{dominant_mode, Convergence, DominantMode, RunStats, Trajectory};
use crate::kernel::{CStarReport, PsdReport};
use crate::mesh::Mesh;
use crate::scheme::State;

/// Formats a float with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV row per report.
pub fn steps_csv(reports: &[StepReport]) -> String {
    let n = reports.first().map_or(0, |r| r.masses.len());
    let mut s = String::from("step,time");
    for i in 0..n {
        let _ = write!(s, ",mass_{}", i + 1);
    }
    s.push_str(",H_B,H_R,fisher,P_B,P_R,X,picard_iters,slack_HB,slack_HR,slack_fisher,verdicts\n");
    for r in reports {
        let _ = write!(s, "{},{}", r.step, num(r.time));
        for m in &r.masses {
            let _ = write!(s, ",{}", num(*m));
        }
        let p = &r.productions;
        let _ = write!(
            s,
            ",{},{},{},{},{},{},{}",
            num(r.h_b),
            num(r.h_r),
            num(p.fisher),
            num(p.p_b),
            num(p.p_r),
            num(p.x),
            r.picard_iters
        );
        match &r.verdicts {
            Some(v) => {
                let _ = writeln!(
                    s,
                    ",{},{},{},{}",
                    num(v.boltzmann.slack),
                    num(v.rao.slack),
                    num(v.fisher.slack),
                    v.code()
                );
            }
            None => s.push_str(",,,,\n"),
        }
    }
    s
}

/// Cell centers and per-species values.
pub fn snapshot_csv(mesh: &Mesh, state: &State) -> String {
    let d = mesh.dim();
    let mut s = String::new();
    let axes = ["x", "y", "z"];
    for l in 0..d {
        if l > 0 {
            s.push(',');
        }
        s.push_str(axes.get(l).copied().unwrap_or("w"));
    }
    for i in 0..state.u.len() {
        let _ = write!(s, ",u{}", i + 1);
    }
    s.push('\n');
    for k in 0..mesh.n_cells() {
        let c = mesh.center(k);
        let row: Vec<String> = c
            .iter()
            .copied()
            .chain(state.u.iter().map(|u| u[k]))
            .map(num)
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn errors_csv(table: &ErrorTable) -> String {
    let mut s = String::from("level,resolution,species,linf,l1\n");
    for row in &table.rows {
        for (i, e) in row.errors.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", row.level, num(row.resolution), i + 1, num(e.linf), num(e.l1));
        }
    }
    s
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    name: &'a str,
    mode: Mode,
    steps: usize,
    dt: f64,
    stats: &'a RunStats,
    psd: Option<PsdReport>,
    c_star: Option<CStarReport>,
    dominant_modes: Vec<DominantMode>,
    failure: Option<&'a str>,
}

/// Copy of the configuration actually used.
fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

pub fn write_trajectory(dir: &Path, cfg: &ExperimentConfig, traj: &Trajectory) -> Result<()> {
    fs::write(dir.join("steps.csv"), steps_csv(&traj.reports))?;
    if cfg.mode == Mode::Entropy {
        let mut s = String::from("step,time,H_B,H_R\n");
        for r in &traj.reports {
            let _ = writeln!(s, "{},{},{},{}", r.step, num(r.time), num(r.h_b), num(r.h_r));
        }
        fs::write(dir.join("entropy.csv"), s)?;
    }
    for snap in &traj.snapshots {
        fs::write(
            dir.join(format!("snapshot_{:06}.csv", snap.step)),
            snapshot_csv(&traj.mesh, snap),
        )?;
    }
    fs::write(dir.join("final.csv"), snapshot_csv(&traj.mesh, &traj.final_state))?;
    let modes = traj
        .final_state
        .u
        .iter()
        .map(|u| dominant_mode(&traj.mesh, u))
        .collect::<Result<Vec<_>>>()?;
    let mut f = String::from("species,wavelength,amplitude");
    for l in 0..traj.mesh.dim() {
        let _ = write!(f, ",frequency_{}", l + 1);
    }
    f.push('\n');
    for (i, m) in modes.iter().enumerate() {
        let _ = write!(f, "{},{},{}", i + 1, num(m.wavelength), num(m.amplitude));
        for v in &m.frequency {
            let _ = write!(f, ",{}", num(*v));
        }
        f.push('\n');
    }
    fs::write(dir.join("dominant_modes.csv"), f)?;
    let summary = TrajectorySummary {
        name: &cfg.name,
        mode: cfg.mode,
        steps: traj.stats.steps,
        dt: traj.dt,
        stats: &traj.stats,
        psd: traj.psd,
        c_star: traj.c_star,
        dominant_modes: modes,
        failure: traj.failure.as_deref(),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    write_config(dir, cfg)
}

pub fn write_convergence(dir: &Path, cfg: &ExperimentConfig, conv: &Convergence) -> Result<()> {
    fs::write(dir.join("errors.csv"), errors_csv(&conv.table))?;
    let mut s = String::from("species,norm,order,last_pair,points\n");
    for r in &conv.rates {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.species + 1,
            r.norm.name(),
            num(r.order),
            num(r.last_pair),
            r.points
        );
    }
    fs::write(dir.join("rates.csv"), s)?;
    let mut runs = String::from("level,steps,max_mass_drift,min_value,max_picard_iters,clamped\n");
    for (level, st) in &conv.runs {
        let _ = writeln!(
            runs,
            "{},{},{},{},{},{}",
            level,
            st.steps,
            num(st.max_mass_drift),
            num(st.min_value),
            st.max_picard_iters,
            st.clamped
        );
    }
    fs::write(dir.join("runs.csv"), runs)?;
    write_config(dir, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = num(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }
}
