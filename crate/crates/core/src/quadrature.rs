//! Gauss-Legendre rules on the reference cell `[-1/2, 1/2]`.

/// Nodes and weights of the `q`-point Gauss-Legendre rule mapped to
/// `[-1/2, 1/2]`; the weights sum to one. Nodes come in symmetric pairs
/// (`nodes[q-1-i] == -nodes[i]` exactly).
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let half = q.div_ceil(2);
    for i in 0..half {
        // Chebyshev initial guess, then Newton on P_q.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [-1/2, 1/2], weights scaled to sum to 1
        nodes[i] = -0.5 * x;
        nodes[q - 1 - i] = 0.5 * x;
        weights[i] = 0.5 * w;
        weights[q - 1 - i] = 0.5 * w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one_and_nodes_symmetric() {
        for q in 1..=12 {
            let (x, w) = gauss_legendre(q);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "q={q} sum={s}");
            for i in 0..q {
                assert_eq!(x[q - 1 - i], -x[i]);
                assert!(x[i].abs() < 0.5);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2q_minus_1() {
        for q in 1..=8 {
            let (x, w) = gauss_legendre(q);
            for deg in 0..(2 * q) {
                let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                // int_{-1/2}^{1/2} x^deg dx
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 * 0.5f64.powi(deg as i32 + 1) / (deg as f64 + 1.0)
                };
                assert!((approx - exact).abs() < 1e-14, "q={q} deg={deg}");
            }
        }
    }
}
