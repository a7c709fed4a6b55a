//! Transfer of reference solutions to coarse meshes, error norms and
//! convergence-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// How a fine reference solution is compared with a coarse one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Reference values at the coarse cell centers (fourth-order
    /// interpolation of the fine cell values).
    #[default]
    CellCenter,
    /// Measure-weighted averages of the fine cells inside each coarse cell.
    CellAverage,
}

/// Per-axis refinement ratios of `fine` over `coarse`; each must be a power
/// of two on the same box.
fn ratios(fine: &Mesh, coarse: &Mesh) -> Result<Vec<usize>> {
    let (fs, cs) = (fine.spec(), coarse.spec());
    if fs.dim() != cs.dim() || fs.lower != cs.lower || fs.upper != cs.upper {
        return Err(Error::usage("meshes do not cover the same box"));
    }
    fs.cells
        .iter()
        .zip(&cs.cells)
        .map(|(&f, &c)| {
            if f % c != 0 || !(f / c).is_power_of_two() {
                Err(Error::usage(format!("{f} cells are not a power-of-two refinement of {c}")))
            } else {
                Ok(f / c)
            }
        })
        .collect()
}

/// Applies a per-axis reduction from `fine` to `coarse` cell counts, one axis
/// at a time; `reduce(line, ratio, out)` maps a fine line to a coarse line.
fn reduce_axes(
    field: &[f64],
    fine_cells: &[usize],
    ratios: &[usize],
    reduce: impl Fn(&[f64], usize, &mut [f64]),
) -> Vec<f64> {
    let mut dims = fine_cells.to_vec();
    let mut cur = field.to_vec();
    for axis in 0..dims.len() {
        let r = ratios[axis];
        if r == 1 {
            continue;
        }
        let m = dims[axis];
        let mc = m / r;
        let inner: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut next = vec![0.0; outer * mc * inner];
        let mut line = vec![0.0; m];
        let mut out = vec![0.0; mc];
        for o in 0..outer {
            for i in 0..inner {
                for (k, v) in line.iter_mut().enumerate() {
                    *v = cur[(o * m + k) * inner + i];
                }
                reduce(&line, r, &mut out);
                for (k, v) in out.iter().enumerate() {
                    next[(o * mc + k) * inner + i] = *v;
                }
            }
        }
        dims[axis] = mc;
        cur = next;
    }
    cur
}

/// Coarse cell averages of a fine field; conserves mass.
pub fn coarsen(fine: &[f64], fine_mesh: &Mesh, coarse_mesh: &Mesh) -> Result<Vec<f64>> {
    fine_mesh.check_field(fine, "fine field")?;
    let r = ratios(fine_mesh, coarse_mesh)?;
    Ok(reduce_axes(fine, fine_mesh.cells_per_axis(), &r, |line, r, out| {
        for (k, o) in out.iter_mut().enumerate() {
            *o = line[k * r..(k + 1) * r].iter().sum::<f64>() / r as f64;
        }
    }))
}

/// Values of a fine field at coarse cell centers, by four-point cubic
/// interpolation along each axis. Stencils never wrap around the domain, so
/// kernels that are discontinuous across the periodic seam do not pollute the
/// first and last coarse cells.
pub fn sample_at_centers(fine: &[f64], fine_mesh: &Mesh, coarse_mesh: &Mesh) -> Result<Vec<f64>> {
    fine_mesh.check_field(fine, "fine field")?;
    let r = ratios(fine_mesh, coarse_mesh)?;
    Ok(reduce_axes(fine, fine_mesh.cells_per_axis(), &r, |line, r, out| {
        let m = line.len();
        for (k, o) in out.iter_mut().enumerate() {
            let a = k * r + r / 2 - 1;
            *o = if a == 0 {
                (5.0 * line[0] + 15.0 * line[1] - 5.0 * line[2] + line[3]) / 16.0
            } else if a + 2 == m {
                (line[m - 4] - 5.0 * line[m - 3] + 15.0 * line[m - 2] + 5.0 * line[m - 1]) / 16.0
            } else {
                (-line[a - 1] + 9.0 * line[a] + 9.0 * line[a + 1] - line[a + 2]) / 16.0
            };
        }
    }))
}

/// Transfers a reference field with the chosen comparison.
pub fn transfer(fine: &[f64], fine_mesh: &Mesh, coarse_mesh: &Mesh, how: Comparison) -> Result<Vec<f64>> {
    match how {
        Comparison::CellCenter => sample_at_centers(fine, fine_mesh, coarse_mesh),
        Comparison::CellAverage => coarsen(fine, fine_mesh, coarse_mesh),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub linf: f64,
    pub l1: f64,
}

/// Discrete `L^inf` and `L^1` norms of `a - b`.
pub fn error_norms(mesh: &Mesh, a: &[f64], b: &[f64]) -> Result<ErrorNorms> {
    mesh.check_field(a, "first field")?;
    mesh.check_field(b, "second field")?;
    let mut linf = 0.0f64;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let e = (x - y).abs();
        linf = linf.max(e);
        sum += e;
    }
    Ok(ErrorNorms {
        linf,
        l1: mesh.cell_measure() * sum,
    })
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    /// Mesh size or time step.
    pub resolution: f64,
    /// Cells per axis or number of time steps.
    pub level: usize,
    /// One entry per species.
    pub errors: Vec<ErrorNorms>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Linf,
    L1,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::Linf => "linf",
            Norm::L1 => "l1",
        }
    }
}

/// Fitted convergence order for one species and norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub species: usize,
    pub norm: Norm,
    /// Least-squares slope of `log(error)` against `log(resolution)`.
    pub order: f64,
    /// Two-point order of the two finest levels.
    pub last_pair: f64,
    /// Levels used (zero errors are left out).
    pub points: usize,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits orders for every species and both norms.
pub fn fit_rate(table: &ErrorTable) -> Result<Vec<Rate>> {
    let rows = &table.rows;
    if rows.len() < 3 {
        return Err(Error::usage("a rate fit needs at least three levels"));
    }
    if rows.windows(2).any(|w| !(w[1].resolution < w[0].resolution)) {
        return Err(Error::usage("resolutions must be strictly decreasing"));
    }
    let n = rows[0].errors.len();
    let mut out = Vec::new();
    for species in 0..n {
        for norm in [Norm::Linf, Norm::L1] {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for row in rows {
                let e = match norm {
                    Norm::Linf => row.errors[species].linf,
                    Norm::L1 => row.errors[species].l1,
                };
                if e > 0.0 {
                    x.push(row.resolution);
                    y.push(e);
                } else {
                    log::warn!(
                        "species {species}, {}: zero error at resolution {} left out of the fit",
                        norm.name(),
                        row.resolution
                    );
                }
            }
            let (order, last_pair) = if x.len() >= 2 {
                let k = x.len();
                (
                    log_slope(&x, &y),
                    (y[k - 2] / y[k - 1]).ln() / (x[k - 2] / x[k - 1]).ln(),
                )
            } else {
                (f64::NAN, f64::NAN)
            };
            out.push(Rate {
                species,
                norm,
                order,
                last_pair,
                points: x.len(),
            });
        }
    }
    Ok(out)
}
