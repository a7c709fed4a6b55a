//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgfv::kernel::DiscreteKernel;
use sgfv::mesh::{Mesh, MeshSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mesh_1d(lower: f64, upper: f64, cells: usize) -> Mesh {
    Mesh::new(MeshSpec::new(vec![lower], vec![upper], vec![cells]).unwrap()).unwrap()
}

pub fn mesh_2d(cells: [usize; 2]) -> Mesh {
    Mesh::new(MeshSpec::new(vec![0.0, -1.0], vec![1.0, 0.5], cells.to_vec()).unwrap()).unwrap()
}

pub fn positive_field(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn signed_field(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `x / (e^x - 1)` from `expm1`, with the removable singularity filled in.
pub fn bernoulli_ref(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x / x.exp_m1()
    }
}

/// Error-free transformation `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Double-double accumulator.
#[derive(Default, Clone, Copy)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let lo = self.lo + e;
        let (hi, lo) = two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    /// Adds the exact product `a * b`.
    pub fn add_product(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(p);
        self.add(e);
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Dense `p_iK = sum_j sum_J m(J) W_KJ^ij f_jJ` from kernel entries.
pub fn potential_dense(kernel: &DiscreteKernel, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mesh = kernel.mesh();
    let nc = mesh.n_cells();
    let m = mesh.cell_measure();
    let n = f.len();
    (0..n)
        .map(|i| {
            (0..nc)
                .map(|k| {
                    let mut acc = DoubleDouble::default();
                    for (j, fj) in f.iter().enumerate() {
                        for jc in 0..nc {
                            acc.add_product(m * kernel.entry(i, j, k, jc), fj[jc]);
                        }
                    }
                    acc.value()
                })
                .collect()
        })
        .collect()
}

/// `1/2 sum_ij sum_KJ m(K) m(J) W_KJ^ij u_iK u_jJ` as an explicit double sum.
pub fn rao_double_sum(kernel: &DiscreteKernel, u: &[Vec<f64>]) -> f64 {
    let mesh = kernel.mesh();
    let nc = mesh.n_cells();
    let m = mesh.cell_measure();
    let mut acc = DoubleDouble::default();
    for (i, ui) in u.iter().enumerate() {
        for (j, uj) in u.iter().enumerate() {
            for k in 0..nc {
                for jc in 0..nc {
                    acc.add_product(m * m * kernel.entry(i, j, k, jc) * ui[k], uj[jc]);
                }
            }
        }
    }
    0.5 * acc.value()
}

/// Dense symmetric matrix of the quadratic form `sum m(K) m(J) W_KJ^ij f_iK f_jJ`.
pub fn quadratic_form_matrix(kernel: &DiscreteKernel) -> Vec<Vec<f64>> {
    let mesh = kernel.mesh();
    let nc = mesh.n_cells();
    let n = kernel.n_species();
    let m = mesh.cell_measure();
    let mut a = vec![vec![0.0; n * nc]; n * nc];
    for i in 0..n {
        for j in 0..n {
            for k in 0..nc {
                for jc in 0..nc {
                    a[i * nc + k][j * nc + jc] = m * m * kernel.entry(i, j, k, jc);
                }
            }
        }
    }
    a
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    x
}
