//! Uniform Cartesian meshes of the periodic box `[a_1, b_1) x ... x [a_d, b_d)`.
//!
//! Cells are linearized row-major (the last axis varies fastest). Every
//! undirected edge is owned by the cell on its lower side along the edge's
//! axis, so `edges()` visits each edge exactly once, including the periodic
//! pairs that close the torus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a periodic tensor mesh before derived quantities are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

impl MeshSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let spec = MeshSpec { lower, upper, cells };
        spec.validate()?;
        Ok(spec)
    }

    /// The unit torus `[0,1)^d` with the given cell counts.
    pub fn unit(cells: &[usize]) -> Result<Self> {
        let d = cells.len();
        Self::new(vec![0.0; d], vec![1.0; d], cells.to_vec())
    }

    /// The same box with `cells` on every axis.
    pub fn with_cells(&self, cells: usize) -> Self {
        MeshSpec {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            cells: vec![cells; self.dim()],
        }
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.cells.len();
        if d == 0 {
            return Err(Error::config("mesh dimension must be at least 1"));
        }
        if self.lower.len() != d || self.upper.len() != d {
            return Err(Error::config(format!(
                "mesh extents have {} / {} entries for {} axes",
                self.lower.len(),
                self.upper.len(),
                d
            )));
        }
        for axis in 0..d {
            let (a, b) = (self.lower[axis], self.upper[axis]);
            if !(a.is_finite() && b.is_finite()) || b <= a {
                return Err(Error::config(format!(
                    "axis {axis}: degenerate extent [{a}, {b})"
                )));
            }
            if self.cells[axis] < 2 {
                return Err(Error::config(format!(
                    "axis {axis}: need at least 2 cells, got {}",
                    self.cells[axis]
                )));
            }
        }
        Ok(())
    }
}

/// Direction of a step along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    Forward,
    Backward,
}

/// An undirected edge `K|L` enumerated from its owner `K`, with `L = K + e_axis`
/// (periodically wrapped).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub owner: usize,
    pub neighbor: usize,
    pub axis: usize,
}

/// A periodic uniform Cartesian mesh with all derived geometric quantities.
#[derive(Debug, Clone)]
pub struct Mesh {
    spec: MeshSpec,
    dx: Vec<f64>,
    cell_measure: f64,
    edge_measure: Vec<f64>,
    transmissibility: Vec<f64>,
    strides: Vec<usize>,
    n_cells: usize,
}

impl Mesh {
    pub fn new(spec: MeshSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim();
        let dx: Vec<f64> = (0..d)
            .map(|l| (spec.upper[l] - spec.lower[l]) / spec.cells[l] as f64)
            .collect();
        let cell_measure: f64 = dx.iter().product();
        // In 1D the edge is a point; m(K)/dx keeps tau = m(sigma)/d_sigma = 1/dx.
        let edge_measure: Vec<f64> = dx.iter().map(|h| cell_measure / h).collect();
        let transmissibility: Vec<f64> = edge_measure.iter().zip(&dx).map(|(m, h)| m / h).collect();
        let mut strides = vec![1usize; d];
        for l in (0..d.saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * spec.cells[l + 1];
        }
        let n_cells = spec.cells.iter().product();
        Ok(Mesh {
            spec,
            dx,
            cell_measure,
            edge_measure,
            transmissibility,
            strides,
            n_cells,
        })
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.spec.cells
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_edges(&self) -> usize {
        self.dim() * self.n_cells
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    /// Mesh size `h = max_l dx_l`.
    pub fn h(&self) -> f64 {
        self.dx.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn edge_measure(&self, axis: usize) -> f64 {
        self.edge_measure[axis]
    }

    pub fn transmissibility(&self, axis: usize) -> f64 {
        self.transmissibility[axis]
    }

    /// Measure of the whole torus.
    pub fn domain_measure(&self) -> f64 {
        (0..self.dim())
            .map(|l| self.spec.upper[l] - self.spec.lower[l])
            .product()
    }

    pub fn period(&self, axis: usize) -> f64 {
        self.spec.upper[axis] - self.spec.lower[axis]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.multi_index_into(cell, &mut out);
        out
    }

    pub(crate) fn multi_index_into(&self, mut cell: usize, out: &mut [usize]) {
        for (l, s) in self.strides.iter().enumerate() {
            out[l] = cell / s;
            cell %= s;
        }
    }

    /// Index of the cell one step away from `cell` along `axis`, wrapping
    /// around the torus.
    pub fn neighbor(&self, cell: usize, axis: usize, dir: Dir) -> Result<usize> {
        if axis >= self.dim() {
            return Err(Error::usage(format!(
                "axis {axis} out of range for a {}-dimensional mesh",
                self.dim()
            )));
        }
        if cell >= self.n_cells {
            return Err(Error::usage(format!("cell {cell} out of range")));
        }
        Ok(self.step(cell, axis, dir))
    }

    /// Unchecked variant of [`Mesh::neighbor`] for inner loops.
    #[inline]
    pub(crate) fn step(&self, cell: usize, axis: usize, dir: Dir) -> usize {
        let m = self.spec.cells[axis];
        let s = self.strides[axis];
        let i = (cell / s) % m;
        match dir {
            Dir::Forward if i + 1 == m => cell + s - m * s,
            Dir::Forward => cell + s,
            Dir::Backward if i == 0 => cell + (m - 1) * s,
            Dir::Backward => cell - s,
        }
    }

    /// Signed-axis form of [`Mesh::neighbor`]: `ell` in `{±1, ..., ±d}`.
    pub fn neighbor_signed(&self, cell: usize, ell: i32) -> Result<usize> {
        if ell == 0 {
            return Err(Error::usage("signed axis 0 is not valid"));
        }
        let axis = ell.unsigned_abs() as usize - 1;
        let dir = if ell > 0 { Dir::Forward } else { Dir::Backward };
        self.neighbor(cell, axis, dir)
    }

    /// All edges in lexicographic order: by owner cell, then by axis.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let d = self.dim();
        (0..self.n_cells).flat_map(move |owner| {
            (0..d).map(move |axis| Edge {
                owner,
                neighbor: self.step(owner, axis, Dir::Forward),
                axis,
            })
        })
    }

    /// Center of a cell, `a_l + (i_l + 1/2) dx_l`.
    pub fn center(&self, cell: usize) -> Vec<f64> {
        let idx = self.multi_index(cell);
        idx.iter()
            .enumerate()
            .map(|(l, &i)| self.spec.lower[l] + (i as f64 + 0.5) * self.dx[l])
            .collect()
    }

    /// Lower corner of a cell.
    pub fn cell_lower(&self, cell: usize) -> Vec<f64> {
        let idx = self.multi_index(cell);
        idx.iter()
            .enumerate()
            .map(|(l, &i)| self.spec.lower[l] + i as f64 * self.dx[l])
            .collect()
    }

    /// True when both meshes discretize the same box with the same cells.
    pub fn same_as(&self, other: &Mesh) -> bool {
        self.spec == other.spec
    }

    pub(crate) fn check_field(&self, field: &[f64], what: &str) -> Result<()> {
        if field.len() != self.n_cells {
            return Err(Error::usage(format!(
                "{what} has {} values, mesh has {} cells",
                field.len(),
                self.n_cells
            )));
        }
        Ok(())
    }

    /// `sum_K m(K) f_K`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        self.cell_measure * field.iter().sum::<f64>()
    }
}
