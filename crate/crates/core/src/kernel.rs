//! Interaction kernels, their cell-pair averages `W_KJ^ij`, nonlocal
//! potentials, and kernel diagnostics (positive semidefiniteness and the
//! small-data constant `c*`).
//!
//! All built-in shapes are even and separable, so a cell-pair average is a
//! product of one-dimensional double averages over the cell-center offset.
//! The tables are therefore translation invariant and depend only on the
//! index offset `K - J`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{self, unravel, Convolver, FastConv, OffsetTable};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::gauss_legendre;

/// Largest `n * N` for which the whole-space PSD check builds a dense matrix.
pub const DENSE_PSD_LIMIT: usize = 4096;

/// Relative eigenvalue threshold used to call a kernel positive semidefinite.
pub const PSD_REL_TOL: f64 = 1e-10;

fn default_quadrature_order() -> usize {
    4
}

/// Profile of one interaction kernel; the strength `alpha_ij` is stored
/// separately in [`KernelSpec::strength`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelShape {
    /// `alpha / sqrt(2 pi eps^2) * exp(-|x|^2 / (2 eps^2))`.
    Gaussian { width: f64 },
    /// `alpha / (2R)` on the box `[-R, R]^d`, zero outside.
    TopHat { radius: f64 },
    /// `W = alpha` everywhere.
    Constant,
}

impl KernelShape {
    fn validate(&self) -> Result<()> {
        match *self {
            KernelShape::Gaussian { width } if !(width > 0.0 && width.is_finite()) => {
                Err(Error::config(format!("gaussian width must be positive, got {width}")))
            }
            KernelShape::TopHat { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(Error::config(format!("top-hat radius must be positive, got {radius}")))
            }
            _ => Ok(()),
        }
    }

    /// Prefactor multiplying the product of per-axis profiles.
    fn prefactor(&self) -> f64 {
        match *self {
            KernelShape::Gaussian { width } => 1.0 / (2.0 * std::f64::consts::PI * width * width).sqrt(),
            KernelShape::TopHat { radius } => 1.0 / (2.0 * radius),
            KernelShape::Constant => 1.0,
        }
    }
}

/// How a kernel defined on `R^d` is brought onto the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Evaluate at the raw difference of cell coordinates inside one
    /// fundamental domain; the discrete operator is Toeplitz, not circulant.
    WholeSpace,
    /// Periodize the kernel, `sum_k W(x + k P)`.
    PeriodicWrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Shape shared by all pairs unless `pair_shapes` is given.
    pub shape: KernelShape,
    /// Optional per-pair shapes (must be symmetric).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_shapes: Option<Vec<Vec<KernelShape>>>,
    /// Symmetric strength matrix `alpha_ij`; its size fixes the species count.
    pub strength: Vec<Vec<f64>>,
    pub extension: Extension,
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, strength: Vec<Vec<f64>>, extension: Extension) -> Self {
        KernelSpec {
            shape,
            pair_shapes: None,
            strength,
            extension,
            quadrature_order: default_quadrature_order(),
        }
    }

    /// The zero kernel for `n` species.
    pub fn zero(n: usize) -> Self {
        Self::new(KernelShape::Constant, vec![vec![0.0; n]; n], Extension::PeriodicWrap)
    }

    pub fn n_species(&self) -> usize {
        self.strength.len()
    }

    pub fn shape_of(&self, i: usize, j: usize) -> KernelShape {
        match &self.pair_shapes {
            Some(s) => s[i][j],
            None => self.shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.strength.len();
        if n == 0 {
            return Err(Error::config("strength matrix is empty"));
        }
        if self.quadrature_order == 0 {
            return Err(Error::config("quadrature order must be positive"));
        }
        self.shape.validate()?;
        for (i, row) in self.strength.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config("strength matrix must be square"));
            }
            for (j, a) in row.iter().enumerate() {
                if !a.is_finite() {
                    return Err(Error::config(format!("strength ({i},{j}) is not finite")));
                }
                if *a != self.strength[j][i] {
                    return Err(Error::config(format!("strength matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        if let Some(shapes) = &self.pair_shapes {
            if shapes.len() != n || shapes.iter().any(|r| r.len() != n) {
                return Err(Error::config("pair_shapes must be an n x n matrix"));
            }
            for i in 0..n {
                for j in 0..n {
                    shapes[i][j].validate()?;
                    if shapes[i][j] != shapes[j][i] {
                        return Err(Error::config(format!("pair_shapes is not symmetric at ({i},{j})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `||W_ij||_{L^inf}` of the kernel as seen on the mesh's torus.
    pub fn sup_norm(&self, i: usize, j: usize, mesh: &Mesh) -> f64 {
        let a = self.strength[i][j].abs();
        if a == 0.0 {
            return 0.0;
        }
        let shape = self.shape_of(i, j);
        let mut s = a * shape.prefactor();
        if self.extension == Extension::PeriodicWrap {
            for axis in 0..mesh.dim() {
                let p = mesh.period(axis);
                s *= match shape {
                    KernelShape::Gaussian { width } => {
                        let kmax = (10.0 * width / p).ceil() as i64 + 1;
                        (-kmax..=kmax)
                            .map(|k| (-((k as f64 * p).powi(2)) / (2.0 * width * width)).exp())
                            .sum::<f64>()
                    }
                    KernelShape::TopHat { radius } => (2.0 * radius / p).ceil().max(1.0),
                    KernelShape::Constant => 1.0,
                };
            }
        }
        s
    }
}

/// Cumulative distribution of `xi - eta` for independent uniforms on
/// `[-h/2, h/2]` (triangular on `[-h, h]`).
fn triangular_cdf(x: f64, h: f64) -> f64 {
    if x <= -h {
        0.0
    } else if x <= 0.0 {
        (x + h) * (x + h) / (2.0 * h * h)
    } else if x < h {
        1.0 - (h - x) * (h - x) / (2.0 * h * h)
    } else {
        1.0
    }
}

/// One-dimensional double average of a shape's profile over two cells whose
/// centers differ by `s`.
struct AxisRule<'a> {
    h: f64,
    nodes: &'a [f64],
    weights: &'a [f64],
}

impl AxisRule<'_> {
    fn average(&self, shape: KernelShape, s: f64) -> f64 {
        match shape {
            KernelShape::Gaussian { width } => {
                let c = 1.0 / (2.0 * width * width);
                let mut acc = 0.0;
                for (xa, wa) in self.nodes.iter().zip(self.weights) {
                    let mut inner = 0.0;
                    for (xb, wb) in self.nodes.iter().zip(self.weights) {
                        let z = s + (xa - xb) * self.h;
                        inner += wb * (-c * z * z).exp();
                    }
                    acc += wa * inner;
                }
                acc
            }
            KernelShape::TopHat { radius } => {
                triangular_cdf(radius - s, self.h) - triangular_cdf(-radius - s, self.h)
            }
            KernelShape::Constant => 1.0,
        }
    }

    /// Periodized average, summing images `s + kP` in a fixed order.
    fn periodic_average(&self, shape: KernelShape, s: f64, period: f64) -> f64 {
        let reach = match shape {
            KernelShape::Gaussian { width } => 10.0 * width,
            KernelShape::TopHat { radius } => radius,
            KernelShape::Constant => return 1.0,
        };
        let kmax = ((reach + self.h) / period).ceil() as i64 + 1;
        (-kmax..=kmax)
            .map(|k| self.average(shape, s + k as f64 * period))
            .sum()
    }
}

/// Per-axis factor table in circulant layout over `embed` entries.
fn axis_factors(shape: KernelShape, extension: Extension, m: usize, h: f64, period: f64, q: usize) -> Vec<f64> {
    let (nodes, weights) = gauss_legendre(q);
    let rule = AxisRule {
        h,
        nodes: &nodes,
        weights: &weights,
    };
    match extension {
        Extension::WholeSpace => {
            let mut f = vec![0.0; 2 * m];
            for delta in 0..m {
                let v = rule.average(shape, delta as f64 * h);
                f[delta] = v;
                if delta > 0 {
                    f[2 * m - delta] = v;
                }
            }
            f
        }
        Extension::PeriodicWrap => {
            let mut f = vec![0.0; m];
            for delta in 0..=m / 2 {
                let v = rule.periodic_average(shape, delta as f64 * h, period);
                f[delta] = v;
                f[(m - delta) % m] = v;
            }
            f
        }
    }
}

fn pair_index(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Result of [`DiscreteKernel::check_psd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    pub max_abs_eigenvalue: f64,
}

/// Result of [`c_star`] with its comparison against the small-data threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CStarReport {
    pub c_star: f64,
    pub threshold: f64,
    pub small: bool,
}

/// Cell-pair averaged kernel tables for all species pairs on one mesh.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    spec: KernelSpec,
    mesh: Mesh,
    n: usize,
    /// Upper-triangular pair tables, `None` for zero strengths.
    tables: Vec<Option<OffsetTable>>,
    fast: Option<FastPath>,
}

#[derive(Debug, Clone)]
struct FastPath {
    convolver: Convolver,
    spectra: Vec<Option<Vec<Complex64>>>,
}

impl DiscreteKernel {
    /// Discretizes `spec` on `mesh`, choosing the convolution backend by size.
    pub fn discretize(spec: &KernelSpec, mesh: &Mesh) -> Result<Self> {
        Self::with_backend(spec, mesh, FastConv::Auto)
    }

    pub fn with_backend(spec: &KernelSpec, mesh: &Mesh, mode: FastConv) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_species();
        let d = mesh.dim();
        let dims = mesh.cells_per_axis().to_vec();
        let embed: Vec<usize> = match spec.extension {
            Extension::WholeSpace => dims.iter().map(|m| 2 * m).collect(),
            Extension::PeriodicWrap => dims.clone(),
        };
        let total: usize = embed.iter().product();
        let mut tables = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if j < i || spec.strength[i][j] == 0.0 {
                    tables.push(None);
                    continue;
                }
                let shape = spec.shape_of(i, j);
                let factors: Vec<Vec<f64>> = (0..d)
                    .map(|l| {
                        axis_factors(
                            shape,
                            spec.extension,
                            dims[l],
                            mesh.dx()[l],
                            mesh.period(l),
                            spec.quadrature_order,
                        )
                    })
                    .collect();
                let pre = spec.strength[i][j] * shape.prefactor();
                let mut idx = vec![0usize; d];
                let values: Vec<f64> = (0..total)
                    .map(|lin| {
                        unravel(lin, &embed, &mut idx);
                        let mut v = pre;
                        for l in 0..d {
                            v *= factors[l][idx[l]];
                        }
                        v
                    })
                    .collect();
                tables.push(Some(OffsetTable::new(
                    dims.clone(),
                    embed.clone(),
                    values,
                    mesh.cell_measure(),
                )?));
            }
        }
        let mut dk = DiscreteKernel {
            spec: spec.clone(),
            mesh: mesh.clone(),
            n,
            tables,
            fast: None,
        };
        dk.set_backend(mode);
        Ok(dk)
    }

    /// Switches between direct and Fourier evaluation of the potentials.
    pub fn set_backend(&mut self, mode: FastConv) {
        if !mode.use_fast(self.mesh.n_cells()) {
            self.fast = None;
            return;
        }
        if self.fast.is_some() {
            return;
        }
        let embed = self
            .tables
            .iter()
            .flatten()
            .next()
            .map(|t| t.embed().to_vec())
            .unwrap_or_else(|| self.mesh.cells_per_axis().to_vec());
        let convolver = Convolver::new(self.mesh.cells_per_axis().to_vec(), embed);
        let spectra = self
            .tables
            .iter()
            .map(|t| t.as_ref().map(|t| convolver.table_spectrum(t)))
            .collect();
        self.fast = Some(FastPath { convolver, spectra });
    }

    pub fn uses_fast_path(&self) -> bool {
        self.fast.is_some()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_species(&self) -> usize {
        self.n
    }

    /// True when every pair has zero strength.
    pub fn is_zero(&self) -> bool {
        self.tables.iter().all(Option::is_none)
    }

    /// Offset table of pair `(i, j)`; `None` if `alpha_ij = 0`. The table for
    /// `(j, i)` is the same object, which makes `w_ij[D] = w_ji[-D]` exact
    /// for the even built-in shapes.
    pub fn table(&self, i: usize, j: usize) -> Option<&OffsetTable> {
        let (a, b) = pair_index(i, j);
        self.tables[a * self.n + b].as_ref()
    }

    /// `W_KJ^ij` for two cells.
    pub fn entry(&self, i: usize, j: usize, k: usize, jcell: usize) -> f64 {
        match self.table(i, j) {
            None => 0.0,
            Some(t) => {
                let a = self.mesh.multi_index(k);
                let b = self.mesh.multi_index(jcell);
                let delta: Vec<isize> = a.iter().zip(&b).map(|(x, y)| *x as isize - *y as isize).collect();
                t.at(&delta)
            }
        }
    }

    fn check_state(&self, u: &[Vec<f64>], what: &str) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::usage(format!(
                "{what} has {} species, kernel has {}",
                u.len(),
                self.n
            )));
        }
        for f in u {
            self.mesh.check_field(f, what)?;
        }
        Ok(())
    }

    /// `p_i = sum_j sum_J m(J) W_KJ^ij f_j`.
    pub fn potential(&self, f: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_state(f, "state")?;
        let n = self.n;
        let nc = self.mesh.n_cells();
        match &self.fast {
            Some(fp) => {
                let active: Vec<bool> = (0..n).map(|j| (0..n).any(|i| self.table(i, j).is_some())).collect();
                let hats: Vec<Option<Vec<Complex64>>> = f
                    .par_iter()
                    .enumerate()
                    .map(|(j, fj)| {
                        if active[j] {
                            fp.convolver.forward_field(fj).map(Some)
                        } else {
                            Ok(None)
                        }
                    })
                    .collect::<Result<_>>()?;
                Ok((0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut acc: Option<Vec<Complex64>> = None;
                        for (j, hj) in hats.iter().enumerate() {
                            let (a, b) = pair_index(i, j);
                            let (Some(spec), Some(hj)) = (&fp.spectra[a * n + b], hj) else {
                                continue;
                            };
                            let acc = acc.get_or_insert_with(|| vec![Complex64::new(0.0, 0.0); hj.len()]);
                            for ((o, w), x) in acc.iter_mut().zip(spec).zip(hj) {
                                *o += w * x;
                            }
                        }
                        match acc {
                            Some(buf) => fp.convolver.inverse_restrict(buf),
                            None => vec![0.0; nc],
                        }
                    })
                    .collect())
            }
            None => (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut p = vec![0.0; nc];
                    for (j, fj) in f.iter().enumerate() {
                        if let Some(t) = self.table(i, j) {
                            let g = conv::convolve_direct(t, fj)?;
                            for (pk, gk) in p.iter_mut().zip(g) {
                                *pk += gk;
                            }
                        }
                    }
                    Ok(p)
                })
                .collect(),
        }
    }

    /// Potentials of the fully implicit coupling, evaluated at `u`.
    pub fn potential_implicit(&self, u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.potential(u)
    }

    /// Potentials of the mid-point coupling, evaluated at `(u_curr + u_prev)/2`.
    pub fn potential_midpoint(&self, u_curr: &[Vec<f64>], u_prev: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_state(u_curr, "current state")?;
        self.check_state(u_prev, "previous state")?;
        let avg: Vec<Vec<f64>> = u_curr
            .iter()
            .zip(u_prev)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
            .collect();
        self.potential(&avg)
    }

    /// Checks whether `sum_ij sum_KJ m(K) m(J) W_KJ^ij f_iK f_jJ >= 0` for all
    /// fields. Reported eigenvalues are those of the operator
    /// `f -> sum_J m(J) W_KJ f_J`.
    pub fn check_psd(&self) -> Result<PsdReport> {
        let n = self.n;
        if self.is_zero() {
            return Ok(PsdReport {
                is_psd: true,
                min_eigenvalue: 0.0,
                max_abs_eigenvalue: 0.0,
            });
        }
        let eigs = match self.spec.extension {
            Extension::PeriodicWrap => self.periodic_eigenvalues(),
            Extension::WholeSpace => {
                let nc = self.mesh.n_cells();
                if n * nc > DENSE_PSD_LIMIT {
                    return Err(Error::usage(format!(
                        "whole-space PSD check needs a dense {0}x{0} matrix; limit is {DENSE_PSD_LIMIT}",
                        n * nc
                    )));
                }
                let m = self.mesh.cell_measure();
                let mut a = DMatrix::<f64>::zeros(n * nc, n * nc);
                for i in 0..n {
                    for j in 0..n {
                        if self.table(i, j).is_none() {
                            continue;
                        }
                        for k in 0..nc {
                            for jc in 0..nc {
                                a[(i * nc + k, j * nc + jc)] = m * self.entry(i, j, k, jc);
                            }
                        }
                    }
                }
                let sym = (&a + a.transpose()) * 0.5;
                sym.symmetric_eigen().eigenvalues.iter().copied().collect()
            }
        };
        let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        let max_abs = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        Ok(PsdReport {
            is_psd: min >= -PSD_REL_TOL * max_abs,
            min_eigenvalue: min,
            max_abs_eigenvalue: max_abs,
        })
    }

    fn periodic_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let dims = self.mesh.cells_per_axis().to_vec();
        let convolver = Convolver::new(dims.clone(), dims.clone());
        let spectra: Vec<Option<Vec<Complex64>>> = self
            .tables
            .iter()
            .map(|t| t.as_ref().map(|t| convolver.table_spectrum(t)))
            .collect();
        let nf: usize = dims.iter().product();
        let mut eigs = Vec::with_capacity(n * nf);
        for xi in 0..nf {
            // Hermitian n x n symbol, embedded as a real symmetric 2n x 2n matrix.
            let mut h = DMatrix::<Complex64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if let Some(s) = &spectra[pair_index(i, j).0 * n + pair_index(i, j).1] {
                        h[(i, j)] = s[xi];
                    }
                }
            }
            let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
            let mut r = DMatrix::<f64>::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    let (re, im) = (h[(i, j)].re, h[(i, j)].im);
                    r[(i, j)] = re;
                    r[(i + n, j + n)] = re;
                    r[(i, j + n)] = -im;
                    r[(i + n, j)] = im;
                }
            }
            // every eigenvalue of the embedding appears twice
            let e = r.symmetric_eigen().eigenvalues;
            eigs.extend(e.iter().copied());
        }
        eigs
    }
}

/// `c* = max_j sum_i ||W_ij||_inf ||u_i^0||_1`.
pub fn c_star(spec: &KernelSpec, mesh: &Mesh, u0: &[Vec<f64>]) -> Result<f64> {
    spec.validate()?;
    let n = spec.n_species();
    if u0.len() != n {
        return Err(Error::usage("initial state has the wrong number of species"));
    }
    let l1: Vec<f64> = u0
        .iter()
        .map(|u| {
            mesh.check_field(u, "initial state")?;
            Ok(mesh.cell_measure() * u.iter().map(|x| x.abs()).sum::<f64>())
        })
        .collect::<Result<_>>()?;
    Ok((0..n)
        .map(|j| (0..n).map(|i| spec.sup_norm(i, j, mesh) * l1[i]).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Smallness threshold `kappa (1-alpha)^2 / (4 (alpha (1-alpha) + 1))`.
pub fn small_data_threshold(kappa: f64, alpha: f64) -> f64 {
    kappa * (1.0 - alpha).powi(2) / (4.0 * (alpha * (1.0 - alpha) + 1.0))
}

pub fn c_star_report(spec: &KernelSpec, mesh: &Mesh, u0: &[Vec<f64>], kappa: f64, alpha: f64) -> Result<CStarReport> {
    let c = c_star(spec, mesh, u0)?;
    let threshold = small_data_threshold(kappa, alpha);
    Ok(CStarReport {
        c_star: c,
        threshold,
        small: c < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;

    fn mesh1(a: f64, b: f64, m: usize) -> Mesh {
        Mesh::new(MeshSpec::new(vec![a], vec![b], vec![m]).unwrap()).unwrap()
    }

    #[test]
    fn triangular_cdf_limits() {
        let h = 0.3;
        assert_eq!(triangular_cdf(-1.0, h), 0.0);
        assert_eq!(triangular_cdf(1.0, h), 1.0);
        assert!((triangular_cdf(0.0, h) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_kernel_table() {
        let mesh = mesh1(0.0, 1.0, 8);
        for ext in [Extension::WholeSpace, Extension::PeriodicWrap] {
            let spec = KernelSpec::new(KernelShape::Constant, vec![vec![2.5]], ext);
            let w = DiscreteKernel::discretize(&spec, &mesh).unwrap();
            let t = w.table(0, 0).unwrap();
            for delta in -7..8 {
                assert_eq!(t.at(&[delta]), 2.5);
            }
        }
    }

    #[test]
    fn top_hat_covering_the_torus_is_constant() {
        let mesh = mesh1(0.0, 1.0, 16);
        let spec = KernelSpec::new(KernelShape::TopHat { radius: 0.5 }, vec![vec![1.0]], Extension::PeriodicWrap);
        let w = DiscreteKernel::discretize(&spec, &mesh).unwrap();
        for v in w.table(0, 0).unwrap().values() {
            assert!((v - 1.0).abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn zero_kernel_gives_zero_potential() {
        let mesh = mesh1(0.0, 1.0, 8);
        let w = DiscreteKernel::discretize(&KernelSpec::zero(2), &mesh).unwrap();
        assert!(w.is_zero());
        let p = w.potential(&[vec![1.0; 8], vec![3.0; 8]]).unwrap();
        assert!(p.iter().flatten().all(|&x| x == 0.0));
        let r = w.check_psd().unwrap();
        assert!(r.is_psd);
        assert_eq!(r.min_eigenvalue, 0.0);
    }

    #[test]
    fn midpoint_potential_is_average() {
        let mesh = mesh1(-2.0, 2.0, 16);
        let spec = KernelSpec::new(KernelShape::Gaussian { width: 0.5 }, vec![vec![1.0]], Extension::WholeSpace);
        let w = DiscreteKernel::discretize(&spec, &mesh).unwrap();
        let u: Vec<f64> = (0..16).map(|k| 1.0 + (k as f64).cos()).collect();
        let p = w.potential_implicit(std::slice::from_ref(&u)).unwrap();
        let pm = w.potential_midpoint(std::slice::from_ref(&u), std::slice::from_ref(&u)).unwrap();
        let half = w.potential_midpoint(std::slice::from_ref(&u), &[vec![0.0; 16]]).unwrap();
        for k in 0..16 {
            assert!((p[0][k] - pm[0][k]).abs() < 1e-15);
            assert!((0.5 * p[0][k] - half[0][k]).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_mass_potential_is_table_column() {
        let mesh = mesh1(0.0, 1.0, 10);
        let spec = KernelSpec::new(KernelShape::Gaussian { width: 0.2 }, vec![vec![1.5]], Extension::WholeSpace);
        let w = DiscreteKernel::discretize(&spec, &mesh).unwrap();
        let mut u = vec![0.0; 10];
        u[3] = 1.0;
        let p = w.potential(&[u]).unwrap();
        for (k, pk) in p[0].iter().enumerate() {
            let expect = mesh.cell_measure() * w.entry(0, 0, k, 3);
            assert!((pk - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_asymmetric_strengths() {
        let spec = KernelSpec::new(
            KernelShape::Gaussian { width: 1.0 },
            vec![vec![1.0, 2.0], vec![3.0, 1.0]],
            Extension::WholeSpace,
        );
        assert!(spec.validate().is_err());
        let bad = KernelSpec::new(KernelShape::TopHat { radius: -1.0 }, vec![vec![1.0]], Extension::WholeSpace);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn c_star_single_top_hat() {
        let mesh = mesh1(-10.0, 10.0, 100);
        let spec = KernelSpec::new(KernelShape::TopHat { radius: 1.0 }, vec![vec![-1.0]], Extension::PeriodicWrap);
        let u = vec![1.0 / 20.0; 100];
        assert!((c_star(&spec, &mesh, &[u]).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(c_star(&spec, &mesh, &[vec![0.0; 100]]).unwrap(), 0.0);
    }

    #[test]
    fn threshold_formula() {
        // alpha = 0: kappa / 4
        assert_eq!(small_data_threshold(1.0, 0.0), 0.25);
        let t = small_data_threshold(0.01, 0.5);
        assert!((t - 0.01 * 0.25 / (4.0 * 1.25)).abs() < 1e-18);
    }
}
