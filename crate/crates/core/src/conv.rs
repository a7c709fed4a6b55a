//! Discrete convolution of cell fields with translation-invariant offset
//! tables, `g_K = sum_J m(J) w[K - J] f_J`.
//!
//! A table is stored in circulant layout over an *embedding* grid. For
//! periodic kernels the embedding equals the mesh and offsets are taken
//! modulo `M`. For whole-space kernels the embedding has `2M` points per axis,
//! offsets range over `-(M-1)..=M-1`, and the field is zero-padded, so the
//! same circular convolution evaluates the non-periodic (Toeplitz) sum.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which evaluation path to use for convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FastConv {
    /// Always use the Fourier path.
    On,
    /// Always use the direct double sum.
    Off,
    /// Fourier path for meshes with more than [`FastConv::AUTO_THRESHOLD`] cells.
    #[default]
    Auto,
}

impl FastConv {
    pub const AUTO_THRESHOLD: usize = 64;

    pub fn use_fast(self, n_cells: usize) -> bool {
        match self {
            FastConv::On => true,
            FastConv::Off => false,
            FastConv::Auto => n_cells > Self::AUTO_THRESHOLD,
        }
    }
}

impl std::str::FromStr for FastConv {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" => Ok(FastConv::On),
            "off" => Ok(FastConv::Off),
            "auto" => Ok(FastConv::Auto),
            other => Err(Error::config(format!("unknown fast-conv mode '{other}'"))),
        }
    }
}

/// Translation-invariant table `w[Delta]` in circulant layout.
#[derive(Debug, Clone)]
pub struct OffsetTable {
    dims: Vec<usize>,
    embed: Vec<usize>,
    values: Vec<f64>,
    cell_measure: f64,
}

impl OffsetTable {
    /// Builds a table from values laid out row-major over `embed`. Each
    /// `embed[l]` must be either `dims[l]` (periodic) or `2 * dims[l]`
    /// (zero-padded whole-space layout).
    pub fn new(dims: Vec<usize>, embed: Vec<usize>, values: Vec<f64>, cell_measure: f64) -> Result<Self> {
        if dims.len() != embed.len() || dims.is_empty() {
            return Err(Error::usage("table dimensions do not match"));
        }
        for (m, e) in dims.iter().zip(&embed) {
            if *e != *m && *e != 2 * *m {
                return Err(Error::usage(format!("embedding length {e} incompatible with {m} cells")));
            }
        }
        if values.len() != embed.iter().product::<usize>() {
            return Err(Error::usage("table has the wrong number of entries"));
        }
        Ok(OffsetTable {
            dims,
            embed,
            values,
            cell_measure,
        })
    }

    /// A periodic table from values indexed by `Delta mod M`.
    pub fn periodic(dims: Vec<usize>, values: Vec<f64>, cell_measure: f64) -> Result<Self> {
        let embed = dims.clone();
        Self::new(dims, embed, values, cell_measure)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn embed(&self) -> &[usize] {
        &self.embed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn is_periodic(&self) -> bool {
        self.dims == self.embed
    }

    /// `w[Delta]` for a signed offset; `Delta_l` must lie in `-(M_l-1)..=M_l-1`
    /// (any integer for periodic tables).
    pub fn at(&self, delta: &[isize]) -> f64 {
        let mut idx = 0usize;
        for (l, &d) in delta.iter().enumerate() {
            let e = self.embed[l] as isize;
            idx = idx * self.embed[l] + d.rem_euclid(e) as usize;
        }
        self.values[idx]
    }

    /// `sum_Delta w[Delta]` over the offsets reachable on the mesh for a
    /// given row, i.e. the row sum of the cell-pair matrix without `m(J)`.
    pub fn row_sum(&self, row: &[usize]) -> f64 {
        let n: usize = self.dims.iter().product();
        let d = self.dims.len();
        let mut j = vec![0usize; d];
        let mut delta = vec![0isize; d];
        let mut s = 0.0;
        for lin in 0..n {
            unravel(lin, &self.dims, &mut j);
            for l in 0..d {
                delta[l] = row[l] as isize - j[l] as isize;
            }
            s += self.at(&delta);
        }
        s
    }
}

pub(crate) fn unravel(mut lin: usize, dims: &[usize], out: &mut [usize]) {
    for l in (0..dims.len()).rev() {
        out[l] = lin % dims[l];
        lin /= dims[l];
    }
}

/// Reference `O(N^2)` evaluation of `g_K = sum_J m(J) w[K - J] f_J`.
pub fn convolve_direct(table: &OffsetTable, f: &[f64]) -> Result<Vec<f64>> {
    let dims = &table.dims;
    let n: usize = dims.iter().product();
    if f.len() != n {
        return Err(Error::usage("field length does not match the table's mesh"));
    }
    let d = dims.len();
    let idx: Vec<Vec<usize>> = (0..n)
        .map(|lin| {
            let mut v = vec![0; d];
            unravel(lin, dims, &mut v);
            v
        })
        .collect();
    let mut g = vec![0.0; n];
    let mut delta = vec![0isize; d];
    for (k, gk) in g.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (jj, fj) in f.iter().enumerate() {
            if *fj == 0.0 {
                continue;
            }
            for l in 0..d {
                delta[l] = idx[k][l] as isize - idx[jj][l] as isize;
            }
            acc += table.at(&delta) * fj;
        }
        *gk = table.cell_measure * acc;
    }
    Ok(g)
}

/// Evaluates one table against one field with the chosen backend.
pub fn convolve(table: &OffsetTable, f: &[f64], fast: bool) -> Result<Vec<f64>> {
    if fast {
        let conv = Convolver::new(table.dims.clone(), table.embed.clone());
        let spec = conv.table_spectrum(table);
        let fh = conv.forward_field(f)?;
        let prod: Vec<Complex64> = spec.iter().zip(&fh).map(|(a, b)| a * b).collect();
        Ok(conv.inverse_restrict(prod))
    } else {
        convolve_direct(table, f)
    }
}

/// FFT plans for one mesh/embedding pair.
#[derive(Clone)]
pub struct Convolver {
    dims: Vec<usize>,
    embed: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("dims", &self.dims)
            .field("embed", &self.embed)
            .finish()
    }
}

impl Convolver {
    pub fn new(dims: Vec<usize>, embed: Vec<usize>) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let forward = embed.iter().map(|&e| planner.plan_fft_forward(e)).collect();
        let inverse = embed.iter().map(|&e| planner.plan_fft_inverse(e)).collect();
        Convolver {
            dims,
            embed,
            forward,
            inverse,
        }
    }

    pub fn embed(&self) -> &[usize] {
        &self.embed
    }

    /// Spectrum of `m(J) * w` on the embedding grid.
    pub fn table_spectrum(&self, table: &OffsetTable) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = table
            .values
            .iter()
            .map(|&v| Complex64::new(table.cell_measure * v, 0.0))
            .collect();
        fft_nd(&mut buf, &self.embed, &self.forward);
        buf
    }

    /// Zero-padded forward transform of a cell field.
    pub fn forward_field(&self, f: &[f64]) -> Result<Vec<Complex64>> {
        let n: usize = self.dims.iter().product();
        if f.len() != n {
            return Err(Error::usage("field length does not match the convolver's mesh"));
        }
        let total: usize = self.embed.iter().product();
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        let d = self.dims.len();
        let mut idx = vec![0usize; d];
        for (lin, &v) in f.iter().enumerate() {
            unravel(lin, &self.dims, &mut idx);
            let mut e = 0usize;
            for l in 0..d {
                e = e * self.embed[l] + idx[l];
            }
            buf[e] = Complex64::new(v, 0.0);
        }
        fft_nd(&mut buf, &self.embed, &self.forward);
        Ok(buf)
    }

    /// Inverse transform, normalization, and restriction to the mesh cells.
    pub fn inverse_restrict(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        fft_nd(&mut buf, &self.embed, &self.inverse);
        let total: usize = self.embed.iter().product();
        let scale = 1.0 / total as f64;
        let n: usize = self.dims.iter().product();
        let d = self.dims.len();
        let mut idx = vec![0usize; d];
        let mut out = vec![0.0; n];
        for (lin, o) in out.iter_mut().enumerate() {
            unravel(lin, &self.dims, &mut idx);
            let mut e = 0usize;
            for l in 0..d {
                e = e * self.embed[l] + idx[l];
            }
            *o = buf[e].re * scale;
        }
        out
    }
}

/// In-place multi-dimensional FFT over a row-major buffer.
pub(crate) fn fft_nd(buf: &mut [Complex64], dims: &[usize], plans: &[Arc<dyn Fft<f64>>]) {
    let d = dims.len();
    let total: usize = dims.iter().product();
    for axis in 0..d {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let stride: usize = dims[axis + 1..].iter().product();
        let plan = &plans[axis];
        if stride == 1 {
            plan.process(buf);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let block = len * stride;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, c) in line.iter_mut().enumerate() {
                    *c = buf[base + i * stride];
                }
                plan.process(&mut line);
                for (i, c) in line.iter().enumerate() {
                    buf[base + i * stride] = *c;
                }
            }
        }
    }
}
