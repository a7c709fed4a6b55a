//! Initial data descriptors and their projection onto cell averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::gauss_legendre;

/// Gauss-Legendre order per axis for smooth initial data.
pub const SMOOTH_QUADRATURE_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigFunction {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `amplitude` on the box `[lower, upper]`, zero elsewhere.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude * f(2 pi k.x + phase) + offset`.
    Trig {
        function: TrigFunction,
        wavevector: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Constant value.
    Constant { value: f64 },
}

fn one() -> f64 {
    1.0
}

/// One species' initial datum, optionally rescaled to a prescribed mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    #[serde(flatten)]
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_mass: Option<f64>,
}

impl InitialData {
    pub fn new(profile: Profile) -> Self {
        InitialData {
            profile,
            normalize_mass: None,
        }
    }
}

/// Cell averages `m(K)^{-1} int_K u^0`.
pub fn project_initial(data: &InitialData, mesh: &Mesh) -> Result<Vec<f64>> {
    let d = mesh.dim();
    let spec = mesh.spec();
    let mut field = match &data.profile {
        Profile::Constant { value } => vec![*value; mesh.n_cells()],
        Profile::Box {
            lower,
            upper,
            amplitude,
        } => {
            if lower.len() != d || upper.len() != d {
                return Err(Error::config("box corners must have one entry per axis"));
            }
            for l in 0..d {
                if !(lower[l] < upper[l]) || lower[l] < spec.lower[l] || upper[l] > spec.upper[l] {
                    return Err(Error::config(format!(
                        "box [{}, {}] on axis {l} is empty or outside the domain [{}, {})",
                        lower[l], upper[l], spec.lower[l], spec.upper[l]
                    )));
                }
            }
            (0..mesh.n_cells())
                .map(|k| {
                    let a = mesh.cell_lower(k);
                    let mut frac = 1.0;
                    for l in 0..d {
                        let b = a[l] + mesh.dx()[l];
                        let overlap = (b.min(upper[l]) - a[l].max(lower[l])).max(0.0);
                        frac *= overlap / mesh.dx()[l];
                    }
                    amplitude * frac
                })
                .collect()
        }
        Profile::Trig {
            function,
            wavevector,
            amplitude,
            offset,
            phase,
        } => {
            if wavevector.len() != d {
                return Err(Error::config("wavevector must have one entry per axis"));
            }
            let (nodes, weights) = gauss_legendre(SMOOTH_QUADRATURE_ORDER);
            let q = nodes.len();
            let total = q.pow(d as u32);
            let two_pi = 2.0 * std::f64::consts::PI;
            (0..mesh.n_cells())
                .map(|k| {
                    let c = mesh.center(k);
                    let mut acc = 0.0;
                    for t in 0..total {
                        let mut rest = t;
                        let mut w = 1.0;
                        let mut arg = *phase;
                        for l in (0..d).rev() {
                            let a = rest % q;
                            rest /= q;
                            w *= weights[a];
                            arg += two_pi * wavevector[l] * (c[l] + nodes[a] * mesh.dx()[l]);
                        }
                        let f = match function {
                            TrigFunction::Sin => arg.sin(),
                            TrigFunction::Cos => arg.cos(),
                        };
                        acc += w * f;
                    }
                    amplitude * acc + offset
                })
                .collect()
        }
    };
    if let Some(v) = field.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::config(format!("initial data takes the invalid cell value {v}")));
    }
    if let Some(mass) = data.normalize_mass {
        let current = mesh.integrate(&field);
        if !(current > 0.0) || !(mass > 0.0) {
            return Err(Error::config("mass normalization needs positive masses"));
        }
        let s = mass / current;
        field.iter_mut().for_each(|v| *v *= s);
    }
    if !field.iter().any(|&v| v > 0.0) {
        return Err(Error::config("initial data has zero mass"));
    }
    Ok(field)
}
