//! Experiment configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conv::FastConv;
use crate::error::{Error, Result};
use crate::harness::convergence::Comparison;
use crate::harness::initial::InitialData;
use crate::kernel::KernelSpec;
use crate::mesh::MeshSpec;
use crate::scheme::SchemeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One simulation with per-step diagnostics and snapshots.
    Run,
    /// Mesh ladder against a fine reference at fixed time step.
    ConvergeSpace,
    /// Time-step ladder against a small-step reference on a fixed mesh.
    ConvergeTime,
    /// Like `run`, additionally failing when an asserted entropy check fails.
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub mode: Mode,
    pub mesh: MeshSpec,
    pub kernel: KernelSpec,
    pub scheme: SchemeConfig,
    /// One descriptor per species.
    pub initial: Vec<InitialData>,
    /// Cells per axis (`converge_space`) or step counts (`converge_time`),
    /// coarsest first.
    #[serde(default)]
    pub ladder: Vec<usize>,
    /// Reference cells per axis or step count.
    #[serde(default)]
    pub reference: Option<usize>,
    #[serde(default)]
    pub comparison: Comparison,
    /// Times at which field snapshots are written (`run`/`entropy`).
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub fast_conv: FastConv,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn n_species(&self) -> usize {
        self.kernel.n_species()
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        self.kernel.validate()?;
        self.scheme.validate()?;
        if self.initial.len() != self.n_species() {
            return Err(Error::config(format!(
                "{} initial descriptors for {} species",
                self.initial.len(),
                self.n_species()
            )));
        }
        match self.mode {
            Mode::ConvergeSpace | Mode::ConvergeTime => {
                let reference = self
                    .reference
                    .ok_or_else(|| Error::config("convergence studies need a reference level"))?;
                if self.ladder.len() < 3 {
                    return Err(Error::config("convergence ladders need at least three levels"));
                }
                let mut prev = 0;
                for &level in &self.ladder {
                    if level <= prev {
                        return Err(Error::config("ladder levels must increase"));
                    }
                    if !level.is_power_of_two() || reference % level != 0 || reference == level {
                        return Err(Error::config(format!(
                            "ladder level {level} is not a power of two nested under the reference {reference}"
                        )));
                    }
                    prev = level;
                }
                if self.mode == Mode::ConvergeSpace && self.ladder[0] < 2 {
                    return Err(Error::config("meshes need at least two cells per axis"));
                }
            }
            Mode::Run | Mode::Entropy => {
                for &t in &self.snapshots {
                    if !(t >= 0.0 && t <= self.scheme.t_end) {
                        return Err(Error::config(format!("snapshot time {t} is outside [0, T]")));
                    }
                }
            }
        }
        Ok(())
    }
}
