//! Sparse per-species linear systems `A u = S` and their iterative solvers.
//!
//! Storage is a fixed-width row format: one diagonal entry and `2d`
//! off-diagonal slots per row (slot `2l` is the forward neighbor along axis
//! `l`, slot `2l+1` the backward one). With two cells on an axis both slots
//! point at the same column; products simply add both contributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearMethod {
    /// Jacobi-preconditioned BiCGStab.
    #[default]
    Bicgstab,
    /// Forward Gauss-Seidel sweeps; always convergent for these matrices.
    GaussSeidel,
}

fn default_rel_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    20_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    #[serde(default)]
    pub method: LinearMethod,
    /// Stop when `||A u - S||_inf <= rel_tol * ||S||_inf`.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            method: LinearMethod::default(),
            rel_tol: default_rel_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl LinearConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::config(format!("linear rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("linear max_iter must be positive"));
        }
        Ok(())
    }
}

/// Sparse matrix with at most `width` off-diagonal entries per row, plus a
/// right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    n: usize,
    width: usize,
    diag: Vec<f64>,
    off: Vec<f64>,
    cols: Vec<usize>,
    rhs: Vec<f64>,
}

/// What a successful solve did.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `||A u - S||_inf / ||S||_inf`.
    pub relative_residual: f64,
    /// Entries that came out nonpositive by roundoff and were reset.
    pub clamped: usize,
}

impl LinearSystem {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, cols: Vec<usize>, rhs: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || rhs.len() != n || off.len() != cols.len() || !off.len().is_multiple_of(n) {
            return Err(Error::usage("inconsistent sparse system dimensions"));
        }
        if cols.iter().any(|&c| c >= n) {
            return Err(Error::usage("column index out of range"));
        }
        let width = off.len() / n;
        Ok(LinearSystem {
            n,
            width,
            diag,
            off,
            cols,
            rhs,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Off-diagonal `(column, value)` pairs of a row (columns may repeat).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let s = r * self.width;
        self.cols[s..s + self.width]
            .iter()
            .copied()
            .zip(self.off[s..s + self.width].iter().copied())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (r, row) in a.iter_mut().enumerate() {
            row[r] += self.diag[r];
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        a
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = self.diag.clone();
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                s[c] += v;
            }
        }
        s
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = self.diag[r] * x[r];
            let s = r * self.width;
            for k in s..s + self.width {
                acc += self.off[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    /// `||A x - S||_inf`.
    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y.iter().zip(&self.rhs).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn rhs_inf(&self) -> f64 {
        self.rhs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn gauss_seidel_sweep(&self, x: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = self.rhs[r];
            let s = r * self.width;
            for k in s..s + self.width {
                let c = self.cols[k];
                if c != r {
                    acc -= self.off[k] * x[c];
                }
            }
            let mut d = self.diag[r];
            for k in s..s + self.width {
                if self.cols[k] == r {
                    d += self.off[k];
                }
            }
            x[r] = acc / d;
        }
    }

    /// Solves in place starting from the guess in `x`. A BiCGStab run that
    /// exhausts its budget is continued with Gauss-Seidel.
    ///
    /// For the M-matrices produced by the scheme the exact solution is
    /// positive when `S` is nonnegative and nonzero. Entries that an
    /// iterative method leaves at or below zero are reset to the smallest
    /// positive float, after which one Gauss-Seidel sweep (which maps
    /// positive vectors to positive vectors) restores consistency with the
    /// system.
    pub fn solve(&self, x: &mut [f64], cfg: &LinearConfig) -> Result<SolveStats> {
        if x.len() != self.n {
            return Err(Error::usage("initial guess has the wrong length"));
        }
        let scale = self.rhs_inf();
        if scale == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(SolveStats::default());
        }
        let tol = cfg.rel_tol * scale;
        let mut iterations = match cfg.method {
            LinearMethod::Bicgstab => {
                let guess = x.to_vec();
                match self.bicgstab(x, tol, cfg.max_iter) {
                    Ok(it) => it,
                    Err(Error::SolverFailure {
                        iterations,
                        last_residual,
                        ..
                    }) => {
                        log::debug!(
                            "BiCGStab stopped at relative residual {last_residual:e} after {iterations} iterations; \
                             continuing with Gauss-Seidel"
                        );
                        let res = self.residual_inf(x);
                        if !(res <= self.residual_inf(&guess)) {
                            x.copy_from_slice(&guess);
                        }
                        iterations + self.gauss_seidel(x, tol, cfg.max_iter)?
                    }
                    Err(e) => return Err(e),
                }
            }
            LinearMethod::GaussSeidel => self.gauss_seidel(x, tol, cfg.max_iter)?,
        };
        let positive_rhs = self.rhs.iter().all(|&v| v >= 0.0) && self.rhs.iter().any(|&v| v > 0.0);
        let mut clamped = 0;
        if positive_rhs {
            for v in x.iter_mut() {
                if !(*v > 0.0) {
                    *v = f64::MIN_POSITIVE;
                    clamped += 1;
                }
            }
            if clamped > 0 {
                self.gauss_seidel_sweep(x);
                iterations += 1;
                for v in x.iter_mut() {
                    if !(*v > 0.0) {
                        *v = f64::MIN_POSITIVE;
                    }
                }
            }
        }
        let res = self.residual_inf(x);
        if !res.is_finite() || res > tol {
            return Err(Error::SolverFailure {
                iterations,
                last_residual: res / scale,
                residual_history: vec![res / scale],
            });
        }
        Ok(SolveStats {
            iterations,
            relative_residual: res / scale,
            clamped,
        })
    }

    fn gauss_seidel(&self, x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
        let scale = self.rhs_inf();
        let mut history = Vec::new();
        let mut res = self.residual_inf(x);
        let mut it = 0;
        while res > tol {
            if it == max_iter {
                return Err(Error::SolverFailure {
                    iterations: it,
                    last_residual: res / scale,
                    residual_history: history,
                });
            }
            self.gauss_seidel_sweep(x);
            it += 1;
            res = self.residual_inf(x);
            history.push(res / scale);
        }
        Ok(it)
    }

    fn bicgstab(&self, x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
        let n = self.n;
        let scale = self.rhs_inf();
        let inv_d: Vec<f64> = self.diag.iter().map(|d| 1.0 / d).collect();
        let mut history = Vec::new();
        let mut r = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut it = 0;
        let mut restarts = 0;
        'restart: loop {
            self.matvec(x, &mut tmp);
            for k in 0..n {
                r[k] = self.rhs[k] - tmp[k];
            }
            let res = inf(&r);
            if res <= tol {
                return Ok(it);
            }
            if restarts > 20 {
                return Err(Error::SolverFailure {
                    iterations: it,
                    last_residual: res / scale,
                    residual_history: history,
                });
            }
            restarts += 1;
            let r_hat = r.clone();
            let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
            let mut v = vec![0.0; n];
            let mut p = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut s = vec![0.0; n];
            let mut z = vec![0.0; n];
            let mut t = vec![0.0; n];
            loop {
                if it >= max_iter {
                    return Err(Error::SolverFailure {
                        iterations: it,
                        last_residual: inf(&r) / scale,
                        residual_history: history,
                    });
                }
                it += 1;
                let rho_new = dot(&r_hat, &r);
                if rho_new == 0.0 || omega == 0.0 {
                    continue 'restart;
                }
                let beta = (rho_new / rho) * (alpha / omega);
                rho = rho_new;
                for k in 0..n {
                    p[k] = r[k] + beta * (p[k] - omega * v[k]);
                    y[k] = inv_d[k] * p[k];
                }
                self.matvec(&y, &mut v);
                let denom = dot(&r_hat, &v);
                if denom == 0.0 || !denom.is_finite() {
                    continue 'restart;
                }
                alpha = rho / denom;
                for k in 0..n {
                    s[k] = r[k] - alpha * v[k];
                }
                if inf(&s) <= tol {
                    for k in 0..n {
                        x[k] += alpha * y[k];
                    }
                    history.push(inf(&s) / scale);
                    // confirm with the true residual
                    continue 'restart;
                }
                for k in 0..n {
                    z[k] = inv_d[k] * s[k];
                }
                self.matvec(&z, &mut t);
                let tt = dot(&t, &t);
                omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
                for k in 0..n {
                    x[k] += alpha * y[k] + omega * z[k];
                    r[k] = s[k] - omega * t[k];
                }
                let res = inf(&r);
                history.push(res / scale);
                if res <= tol {
                    continue 'restart;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize, rhs: Vec<f64>) -> LinearSystem {
        LinearSystem::new(vec![1.0; n], vec![0.0; n], (0..n).collect(), rhs).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let rhs = vec![0.5, -2.0, 3.0];
        for method in [LinearMethod::Bicgstab, LinearMethod::GaussSeidel] {
            let sys = identity(3, rhs.clone());
            let mut x = vec![0.0; 3];
            let cfg = LinearConfig {
                method,
                ..Default::default()
            };
            sys.solve(&mut x, &cfg).unwrap();
            for (a, b) in x.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let sys = identity(2, vec![0.0, 0.0]);
        let mut x = vec![5.0, 1.0];
        sys.solve(&mut x, &LinearConfig::default()).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn bicgstab_falls_back_to_gauss_seidel() {
        // lower bidiagonal: one forward sweep is exact, one Krylov step is not
        let n = 6;
        let off: Vec<f64> = (0..n).map(|r| if r == 0 { 0.0 } else { -0.9 }).collect();
        let cols: Vec<usize> = (0..n).map(|r: usize| r.saturating_sub(1)).collect();
        let rhs: Vec<f64> = (0..n).map(|k| 1.0 + k as f64).collect();
        let sys = LinearSystem::new(vec![1.0; n], off, cols, rhs).unwrap();
        let mut x = vec![0.0; n];
        let cfg = LinearConfig {
            method: LinearMethod::Bicgstab,
            rel_tol: 1e-14,
            max_iter: 1,
        };
        let stats = sys.solve(&mut x, &cfg).unwrap();
        assert!(stats.relative_residual <= 1e-14);
        let mut expected = 0.0;
        for (k, v) in x.iter().enumerate() {
            expected = 1.0 + k as f64 + 0.9 * expected;
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn exhausted_budget_reports_history() {
        // 1D periodic Laplacian-like system with a tiny budget
        let n = 16;
        let mut off = Vec::new();
        let mut cols = Vec::new();
        for r in 0..n {
            off.extend([-1.0, -1.0]);
            cols.extend([(r + 1) % n, (r + n - 1) % n]);
        }
        let rhs: Vec<f64> = (0..n).map(|k| 1.0 + (k % 3) as f64).collect();
        let sys = LinearSystem::new(vec![2.01; n], off, cols, rhs).unwrap();
        let mut x = vec![0.0; n];
        let cfg = LinearConfig {
            method: LinearMethod::GaussSeidel,
            rel_tol: 1e-14,
            max_iter: 3,
        };
        match sys.solve(&mut x, &cfg) {
            Err(Error::SolverFailure {
                iterations,
                residual_history,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(residual_history.len(), 3);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = LinearConfig {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let cfg: LinearConfig = serde_json::from_str(r#"{"method":"gauss_seidel"}"#).unwrap();
        assert_eq!(cfg.method, LinearMethod::GaussSeidel);
        assert_eq!(cfg.rel_tol, 1e-12);
    }
}
