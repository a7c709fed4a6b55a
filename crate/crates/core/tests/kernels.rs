mod common;

use common::*;
use sgfv::kernel::{c_star, small_data_threshold, DiscreteKernel, Extension, KernelShape, KernelSpec, PSD_REL_TOL};
use sgfv::mesh::Mesh;

fn oracle_is_psd(kernel: &DiscreteKernel) -> (bool, f64) {
    let eig = jacobi_eigenvalues(quadratic_form_matrix(kernel));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max_abs = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    (min >= -PSD_REL_TOL * max_abs, min)
}

#[test]
fn repulsive_gaussian_pair_is_psd() {
    let spec = KernelSpec::new(
        KernelShape::Gaussian { width: 1.0 },
        vec![vec![10.0, 5.0], vec![5.0, 3.0]],
        Extension::PeriodicWrap,
    );
    let report = DiscreteKernel::discretize(&spec, &mesh_1d(-10.0, 10.0, 64))
        .unwrap()
        .check_psd()
        .unwrap();
    assert!(report.is_psd, "{report:?}");
    let small = DiscreteKernel::discretize(&spec, &mesh_1d(-10.0, 10.0, 16)).unwrap();
    assert!(small.check_psd().unwrap().is_psd);
    assert!(oracle_is_psd(&small).0);
}

#[test]
fn attractive_top_hat_is_not_psd() {
    let spec = KernelSpec::new(KernelShape::TopHat { radius: 1.0 }, vec![vec![-1.0]], Extension::PeriodicWrap);
    let kernel = DiscreteKernel::discretize(&spec, &mesh_1d(-10.0, 10.0, 128)).unwrap();
    let report = kernel.check_psd().unwrap();
    assert!(!report.is_psd);
    // the constant field is a witness
    let ones = vec![vec![1.0; 128]];
    let p = kernel.potential(&ones).unwrap();
    let q: f64 = p[0].iter().sum::<f64>() * kernel.mesh().cell_measure();
    assert!(q < 0.0);
    let small = DiscreteKernel::discretize(&spec, &mesh_1d(-10.0, 10.0, 16)).unwrap();
    assert!(!small.check_psd().unwrap().is_psd);
    assert!(!oracle_is_psd(&small).0);
}

#[test]
fn psd_verdicts_agree_with_quadratic_form() {
    let meshes = [mesh_1d(-10.0, 10.0, 16), mesh_1d(0.0, 1.0, 12), mesh_2d([4, 4])];
    let shapes = [
        KernelShape::Gaussian { width: 1.0 },
        KernelShape::Gaussian { width: 0.15 },
        KernelShape::TopHat { radius: 1.0 },
        KernelShape::TopHat { radius: 0.3 },
    ];
    let strengths = [
        vec![vec![1.0]],
        vec![vec![10.0, 5.0], vec![5.0, 3.0]],
        vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        vec![vec![-20.0, -10.0], vec![-10.0, -6.0]],
    ];
    let mut seen = [0usize; 2];
    for mesh in &meshes {
        for shape in shapes {
            for ext in [Extension::PeriodicWrap, Extension::WholeSpace] {
                for s in &strengths {
                    let kernel = DiscreteKernel::discretize(&KernelSpec::new(shape, s.clone(), ext), mesh).unwrap();
                    let report = kernel.check_psd().unwrap();
                    let (oracle, min) = oracle_is_psd(&kernel);
                    assert_eq!(report.is_psd, oracle, "{shape:?} {ext:?} {s:?}: {report:?} vs oracle min {min}");
                    seen[oracle as usize] += 1;
                }
            }
        }
    }
    // both outcomes are exercised
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}

#[test]
fn discrete_kernels_are_symmetric() {
    let spec = KernelSpec {
        pair_shapes: Some(vec![
            vec![KernelShape::Gaussian { width: 0.2 }, KernelShape::TopHat { radius: 0.3 }],
            vec![KernelShape::TopHat { radius: 0.3 }, KernelShape::Gaussian { width: 0.4 }],
        ]),
        ..KernelSpec::new(
            KernelShape::Constant,
            vec![vec![1.0, -2.0], vec![-2.0, 0.5]],
            Extension::PeriodicWrap,
        )
    };
    for ext in [Extension::PeriodicWrap, Extension::WholeSpace] {
        let spec = KernelSpec { extension: ext, ..spec.clone() };
        let mesh = mesh_2d([7, 5]);
        let kernel = DiscreteKernel::discretize(&spec, &mesh).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..mesh.n_cells() {
                    for l in 0..mesh.n_cells() {
                        assert_eq!(kernel.entry(i, j, k, l), kernel.entry(j, i, l, k));
                    }
                }
            }
        }
    }
}

fn gaussian_point(x: f64, eps: f64) -> f64 {
    (-x * x / (2.0 * eps * eps)).exp() / (2.0 * std::f64::consts::PI * eps * eps).sqrt()
}

fn quadrature_gap(cells: usize) -> f64 {
    let mesh = mesh_1d(-4.0, 4.0, cells);
    let base = KernelSpec::new(KernelShape::Gaussian { width: 0.5 }, vec![vec![1.0]], Extension::WholeSpace);
    let q = DiscreteKernel::discretize(&base, &mesh).unwrap();
    let q_ref = DiscreteKernel::discretize(
        &KernelSpec {
            quadrature_order: base.quadrature_order + 4,
            ..base.clone()
        },
        &mesh,
    )
    .unwrap();
    let peak = q_ref.entry(0, 0, 0, 0);
    (0..cells)
        .map(|k| (q.entry(0, 0, k, 0) - q_ref.entry(0, 0, k, 0)).abs() / peak)
        .fold(0.0, f64::max)
}

#[test]
fn gaussian_quadrature_converges_at_order_2q() {
    // h / eps = 1/4 at 64 cells
    let (a, b) = (quadrature_gap(32), quadrature_gap(64));
    assert!(b <= 1e-11, "{b}");
    assert!(a / b >= 128.0, "{a} {b}");
}

/// Largest gap between cell-pair averages and point values at center offsets.
fn averaging_gap(cells: usize) -> f64 {
    let eps = 0.5;
    let mesh = Mesh::new(sgfv::mesh::MeshSpec::new(vec![-4.0], vec![4.0], vec![cells]).unwrap()).unwrap();
    let spec = KernelSpec {
        quadrature_order: 8,
        ..KernelSpec::new(KernelShape::Gaussian { width: eps }, vec![vec![1.0]], Extension::WholeSpace)
    };
    let kernel = DiscreteKernel::discretize(&spec, &mesh).unwrap();
    (0..cells)
        .map(|k| (kernel.entry(0, 0, k, 0) - gaussian_point(k as f64 * mesh.h(), eps)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn cell_averaging_is_second_order() {
    let gaps: Vec<f64> = [32, 64, 128, 256].iter().map(|&c| averaging_gap(c)).collect();
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio} from {gaps:?}");
    }
}

#[test]
fn c_star_for_two_species() {
    let mesh = mesh_1d(0.0, 1.0, 20);
    let spec = KernelSpec::new(
        KernelShape::TopHat { radius: 0.25 },
        vec![vec![2.0, -1.0], vec![-1.0, 3.0]],
        Extension::PeriodicWrap,
    );
    let u = vec![vec![0.5; 20], (0..20).map(|k| if k < 10 { 0.0 } else { 2.0 }).collect()];
    // ||W_ij||_inf = |alpha_ij| / (2R), masses 0.5 and 1
    let col0: f64 = 2.0 * 2.0 * 0.5 + 1.0 * 2.0 * 1.0;
    let col1 = 1.0 * 2.0 * 0.5 + 3.0 * 2.0 * 1.0;
    let c = c_star(&spec, &mesh, &u).unwrap();
    assert!((c - col0.max(col1)).abs() < 1e-12, "{c}");
    let thr = small_data_threshold(0.25, 0.5);
    assert!((thr - 0.25 * 0.25 / (4.0 * 1.25)).abs() < 1e-15);
}
