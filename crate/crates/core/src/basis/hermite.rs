//! Orthonormal Hermite functions on the real line and the matching
//! Gauss quadrature.
//!
//! h_0(y) = pi^{-1/4} exp(-y^2/2), and
//! h_{n+1}(y) = sqrt(2/(n+1)) y h_n(y) - sqrt(n/(n+1)) h_{n-1}(y).
//!
//! These are L2(R)-orthonormal with plain Lebesgue measure; the Gaussian
//! factor is baked into the recurrence, so no separate weight juggling is
//! needed anywhere downstream. Derivatives come from the ladder identity
//! h_n'(y) = sqrt(2n) h_{n-1}(y) - y h_n(y).

use crate::error::{CoreError, Result};
use nalgebra::DMatrix;

/// Fills `vals[n] = h_n(y)` for n = 0..vals.len().
pub fn hermite_eval_all(y: f64, vals: &mut [f64]) {
    if vals.is_empty() {
        return;
    }
    vals[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp();
    if vals.len() == 1 {
        return;
    }
    vals[1] = std::f64::consts::SQRT_2 * y * vals[0];
    for n in 1..vals.len() - 1 {
        let nf = n as f64;
        vals[n + 1] =
            (2.0 / (nf + 1.0)).sqrt() * y * vals[n] - (nf / (nf + 1.0)).sqrt() * vals[n - 1];
    }
}

/// Values and derivatives together, via the ladder identity.
pub fn hermite_eval_all_with_deriv(y: f64, vals: &mut [f64], ders: &mut [f64]) {
    debug_assert_eq!(vals.len(), ders.len());
    hermite_eval_all(y, vals);
    for n in 0..vals.len() {
        let lower = if n == 0 { 0.0 } else { vals[n - 1] };
        ders[n] = (2.0 * n as f64).sqrt() * lower - y * vals[n];
    }
}

/// Gauss-Hermite rule in the reference variable, with weights modified
/// for plain Lebesgue integrals: sum_k w_k f(y_k) is exact whenever
/// f(y) = (polynomial of degree <= 2Q-1) * exp(-y^2).
///
/// Nodes are the eigenvalues of the Jacobi matrix (Golub-Welsch),
/// polished by two Newton steps on h_Q; weights are the Christoffel sums
/// w_k = 1 / sum_{n<Q} h_n(y_k)^2, which stay O(1) out to the edge nodes
/// instead of underflowing like the classical polynomial weights.
pub fn gauss_hermite_reference(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 0 {
        return Err(CoreError::Domain {
            context: "gauss_hermite_reference",
            message: "quadrature size must be at least 1".into(),
        });
    }
    if q > 500 {
        return Err(CoreError::Unsupported(format!(
            "quadrature size {q} exceeds the supported maximum of 500"
        )));
    }
    let mut jac = DMatrix::<f64>::zeros(q, q);
    for k in 1..q {
        let off = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = off;
        jac[(k, k - 1)] = off;
    }
    let mut nodes: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    // Newton polish: h_Q'(y) = sqrt(2Q) h_{Q-1}(y) - y h_Q(y).
    let mut vals = vec![0.0; q + 1];
    for y in nodes.iter_mut() {
        for _ in 0..2 {
            hermite_eval_all(*y, &mut vals);
            let dp = (2.0 * q as f64).sqrt() * vals[q - 1] - *y * vals[q];
            if dp != 0.0 {
                *y -= vals[q] / dp;
            }
        }
    }
    for k in 0..q / 2 {
        let m = 0.5 * (nodes[q - 1 - k] - nodes[k]);
        nodes[k] = -m;
        nodes[q - 1 - k] = m;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let mut weights = vec![0.0; q];
    let mut head = vec![0.0; q];
    for k in 0..q {
        hermite_eval_all(nodes[k], &mut head);
        let sum: f64 = head.iter().map(|v| v * v).sum();
        weights[k] = 1.0 / sum;
    }
    Ok((nodes, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "actual {actual:e}, expected {expected:e}"
        );
    }

    #[test]
    fn ground_state_peak() {
        let mut vals = [0.0; 1];
        hermite_eval_all(0.0, &mut vals);
        assert_close(vals[0], std::f64::consts::PI.powf(-0.25), 1e-15);
    }

    #[test]
    fn ladder_derivative_matches_finite_differences() {
        let h = 1e-6;
        let n = 9;
        let mut v = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut vp = vec![0.0; n];
        let mut vm = vec![0.0; n];
        for &y in &[-2.3, -0.5, 0.0, 1.1, 3.4] {
            hermite_eval_all_with_deriv(y, &mut v, &mut d);
            hermite_eval_all(y + h, &mut vp);
            hermite_eval_all(y - h, &mut vm);
            for k in 0..n {
                let fd = (vp[k] - vm[k]) / (2.0 * h);
                assert_close(d[k], fd, 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn multiplication_ladder() {
        // y h_n = sqrt((n+1)/2) h_{n+1} + sqrt(n/2) h_{n-1}.
        let mut v = vec![0.0; 12];
        for &y in &[-1.7, 0.4, 2.2] {
            hermite_eval_all(y, &mut v);
            for n in 1..11 {
                let nf = n as f64;
                let lhs = y * v[n];
                let rhs = ((nf + 1.0) / 2.0).sqrt() * v[n + 1] + (nf / 2.0).sqrt() * v[n - 1];
                assert_close(lhs, rhs, 1e-13);
            }
        }
    }

    #[test]
    fn two_point_rule() {
        // Zeros of h_2 are +-1/sqrt(2); both weights sqrt(pi) e^{1/2} / 2.
        let (nodes, weights) = gauss_hermite_reference(2).unwrap();
        let g = 1.0 / std::f64::consts::SQRT_2;
        assert_close(nodes[0], -g, 1e-14);
        assert_close(nodes[1], g, 1e-14);
        let expected = std::f64::consts::PI.sqrt() * 0.5_f64.exp() / 2.0;
        assert_close(weights[0], expected, 1e-13);
        assert_close(weights[1], expected, 1e-13);
    }

    #[test]
    fn rule_is_orthonormal_on_the_basis() {
        let q = 40;
        let (nodes, weights) = gauss_hermite_reference(q).unwrap();
        let n_basis = 20;
        let mut vals = vec![0.0; n_basis];
        let mut gram = vec![vec![0.0; n_basis]; n_basis];
        for (y, w) in nodes.iter().zip(&weights) {
            hermite_eval_all(*y, &mut vals);
            for i in 0..n_basis {
                for j in 0..n_basis {
                    gram[i][j] += w * vals[i] * vals[j];
                }
            }
        }
        for i in 0..n_basis {
            for j in 0..n_basis {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_close(gram[i][j], expected, 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_integral_via_modified_weights() {
        // integral of exp(-y^2) dy = sqrt(pi); integrand = 1 * exp(-y^2).
        let (nodes, weights) = gauss_hermite_reference(14).unwrap();
        let total: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(y, w)| w * (-y * y).exp())
            .sum();
        assert_close(total, std::f64::consts::PI.sqrt(), 1e-13);
    }

    #[test]
    fn large_rule_edge_weights_stay_finite() {
        let (nodes, weights) = gauss_hermite_reference(300).unwrap();
        assert!(nodes.windows(2).all(|p| p[1] > p[0]));
        assert!(weights.iter().all(|w| w.is_finite() && *w > 0.0));
    }
}
