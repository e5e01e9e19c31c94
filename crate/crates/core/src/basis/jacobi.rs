//! Jacobi polynomials on [-1, 1]: standard and orthonormalized
//! three-term recurrences, weighted norms, endpoint values, and
//! Gauss-Jacobi quadrature in the reference variable.
//!
//! The orthonormal recurrence is the workhorse: basis evaluation,
//! derivative tables, and the quadrature node solve all run on it. The
//! standard (unnormalized) polynomial is kept as an independent path so
//! the two can be cross-checked in tests.

use crate::error::{CoreError, Result};
use crate::specfun::gamma_fn;

/// Standard Jacobi polynomial P_n^{(a1,a2)}(xi) by the classical
/// three-term recurrence.
pub fn jacobi_poly(n: usize, a1: f64, a2: f64, xi: f64) -> f64 {
    let s = a1 + a2;
    if n == 0 {
        return 1.0;
    }
    let mut pm = 1.0;
    let mut p = 0.5 * ((s + 2.0) * xi + (a1 - a2));
    for k in 1..n {
        let kf = k as f64;
        let c0 = 2.0 * (kf + 1.0) * (kf + s + 1.0) * (2.0 * kf + s);
        let c1 = (2.0 * kf + s + 1.0) * (a1 * a1 - a2 * a2);
        let c2 = (2.0 * kf + s + 1.0) * (2.0 * kf + s) * (2.0 * kf + s + 2.0);
        let c3 = 2.0 * (kf + a1) * (kf + a2) * (2.0 * kf + s + 2.0);
        let next = ((c1 + c2 * xi) * p - c3 * pm) / c0;
        pm = p;
        p = next;
    }
    p
}

/// Squared weighted L2 norm of P_n^{(a1,a2)} against (1-xi)^a1 (1+xi)^a2.
///
/// The n = 0 case is kept separate: the general formula contains
/// Gamma(n + a1 + a2 + 1), which sits on a pole when a1 + a2 = -1.
pub fn norm_gamma(n: usize, a1: f64, a2: f64) -> f64 {
    let s = a1 + a2;
    let g = |x: f64| gamma_fn(x).expect("gamma argument positive for valid Jacobi exponents");
    if n == 0 {
        return 2f64.powf(s + 1.0) * g(a1 + 1.0) * g(a2 + 1.0) / g(s + 2.0);
    }
    let nf = n as f64;
    2f64.powf(s + 1.0) / (2.0 * nf + s + 1.0) * g(nf + a1 + 1.0) * g(nf + a2 + 1.0)
        / (g(nf + 1.0) * g(nf + s + 1.0))
}

/// Endpoint value P_n^{(a1,a2)}(1) = Gamma(n+a1+1) / (Gamma(a1+1) n!).
pub fn jacobi_at_one(n: usize, a1: f64) -> f64 {
    let mut v = 1.0;
    for k in 1..=n {
        v *= (k as f64 + a1) / k as f64;
    }
    v
}

/// Endpoint derivative P_n'(1) = (n+a1+a2+1)/2 * Gamma(n+a1+1) / (Gamma(a1+2) (n-1)!).
pub fn jacobi_deriv_at_one(n: usize, a1: f64, a2: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // P_n' = (n+s+1)/2 * P_{n-1}^{(a1+1, a2+1)}, evaluated at 1.
    0.5 * (n as f64 + a1 + a2 + 1.0) * jacobi_at_one(n - 1, a1 + 1.0)
}

/// Recurrence data for the orthonormal family
/// p_n = P_n^{(a1,a2)} / sqrt(norm_gamma(n)):
/// xi p_n = a[n+1] p_{n+1} + b[n] p_n + a[n] p_{n-1}.
#[derive(Debug, Clone)]
pub struct OrthoRecurrence {
    /// Diagonal coefficients b[0..=n_max].
    pub b: Vec<f64>,
    /// Off-diagonal coefficients; a[0] is unused, a[n] couples p_{n-1} and p_n.
    pub a: Vec<f64>,
    /// Value of p_0 = norm_gamma(0)^{-1/2}.
    pub p0: f64,
}

impl OrthoRecurrence {
    pub fn new(a1: f64, a2: f64, n_max: usize) -> Self {
        let s = a1 + a2;
        let mut b = Vec::with_capacity(n_max + 1);
        let mut a = Vec::with_capacity(n_max + 1);
        b.push((a2 - a1) / (s + 2.0));
        a.push(0.0);
        for n in 1..=n_max {
            let nf = n as f64;
            let t = 2.0 * nf + s;
            b.push((a2 * a2 - a1 * a1) / (t * (t + 2.0)));
            if n == 1 {
                // The generic expression below is 0/0 at a1 + a2 = -1;
                // this is the algebraically cancelled form.
                a.push(2.0 / (s + 2.0) * ((a1 + 1.0) * (a2 + 1.0) / (s + 3.0)).sqrt());
            } else {
                a.push(
                    2.0 / t
                        * (nf * (nf + a1) * (nf + a2) * (nf + s) / ((t + 1.0) * (t - 1.0))).sqrt(),
                );
            }
        }
        let p0 = 1.0 / norm_gamma(0, a1, a2).sqrt();
        OrthoRecurrence { b, a, p0 }
    }

    /// Degree covered by the stored coefficients.
    pub fn n_max(&self) -> usize {
        self.b.len() - 1
    }

    /// Fills `vals[n] = p_n(xi)` for n = 0..vals.len().
    pub fn eval_all(&self, xi: f64, vals: &mut [f64]) {
        debug_assert!(vals.len() <= self.b.len() + 1);
        if vals.is_empty() {
            return;
        }
        vals[0] = self.p0;
        if vals.len() == 1 {
            return;
        }
        vals[1] = (xi - self.b[0]) * self.p0 / self.a[1];
        for n in 1..vals.len() - 1 {
            vals[n + 1] = ((xi - self.b[n]) * vals[n] - self.a[n] * vals[n - 1]) / self.a[n + 1];
        }
    }

    /// Fills values and first derivatives simultaneously.
    pub fn eval_all_with_deriv(&self, xi: f64, vals: &mut [f64], ders: &mut [f64]) {
        debug_assert_eq!(vals.len(), ders.len());
        if vals.is_empty() {
            return;
        }
        vals[0] = self.p0;
        ders[0] = 0.0;
        if vals.len() == 1 {
            return;
        }
        vals[1] = (xi - self.b[0]) * self.p0 / self.a[1];
        ders[1] = self.p0 / self.a[1];
        for n in 1..vals.len() - 1 {
            let inv = 1.0 / self.a[n + 1];
            vals[n + 1] = ((xi - self.b[n]) * vals[n] - self.a[n] * vals[n - 1]) * inv;
            ders[n + 1] = ((xi - self.b[n]) * ders[n] + vals[n] - self.a[n] * ders[n - 1]) * inv;
        }
    }

    /// Value and derivative of the single polynomial p_q.
    fn eval_one_with_deriv(&self, q: usize, xi: f64) -> (f64, f64) {
        let mut vals = vec![0.0; q + 1];
        let mut ders = vec![0.0; q + 1];
        self.eval_all_with_deriv(xi, &mut vals, &mut ders);
        (vals[q], ders[q])
    }
}

/// Gauss-Jacobi nodes and weights on (-1, 1) for the weight
/// (1-xi)^a1 (1+xi)^a2: eigenvalues of the symmetric tridiagonal
/// recurrence matrix seed a Newton iteration on the orthonormal
/// recurrence (tolerance 1e-14), weights come from the Christoffel sum
/// w_k = 1 / sum_{n<Q} p_n(xi_k)^2.
///
/// Plain Chebyshev-angle seeds were tried first and misconverge for
/// asymmetric exponents (two seeds fall into one basin already at
/// Q = 16 with (a1, a2) = (0.3, 0.7)), so the eigenvalue seeding is
/// load-bearing, not a luxury. Nodes are returned in ascending order.
pub fn gauss_jacobi_reference(q: usize, a1: f64, a2: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 0 {
        return Err(CoreError::Domain {
            context: "gauss_jacobi_reference",
            message: "quadrature size must be at least 1".into(),
        });
    }
    if q > 500 {
        return Err(CoreError::Unsupported(format!(
            "quadrature size {q} exceeds the supported maximum of 500"
        )));
    }
    let rec = OrthoRecurrence::new(a1, a2, q);
    let mut jac = nalgebra::DMatrix::<f64>::zeros(q, q);
    for n in 0..q {
        jac[(n, n)] = rec.b[n];
        if n > 0 {
            jac[(n - 1, n)] = rec.a[n];
            jac[(n, n - 1)] = rec.a[n];
        }
    }
    let mut nodes: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    for xi in nodes.iter_mut() {
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = rec.eval_one_with_deriv(q, *xi);
            let delta = p / dp;
            *xi -= delta;
            if delta.abs() <= 1e-14 * (1.0 + xi.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(CoreError::Accuracy {
                name: "gauss_jacobi_reference",
                estimate: *xi,
                steps: 100,
            });
        }
    }
    // Enforce exact reflection symmetry for symmetric weights; Newton
    // residues otherwise leave the two halves differing in the last bit.
    if a1 == a2 {
        for k in 0..q / 2 {
            let m = 0.5 * (nodes[q - 1 - k] - nodes[k]);
            nodes[k] = -m;
            nodes[q - 1 - k] = m;
        }
        if q % 2 == 1 {
            nodes[q / 2] = 0.0;
        }
    }
    for k in 1..q {
        if nodes[k] <= nodes[k - 1] {
            return Err(CoreError::Accuracy {
                name: "gauss_jacobi_reference",
                estimate: nodes[k],
                steps: k,
            });
        }
    }
    let mut weights = vec![0.0; q];
    let mut vals = vec![0.0; q];
    for k in 0..q {
        rec.eval_all(nodes[k], &mut vals);
        let sum: f64 = vals.iter().map(|v| v * v).sum();
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
            "actual {actual:e}, expected {expected:e}, diff {:e}",
            (actual - expected).abs()
        );
    }

    #[test]
    fn degree_zero_and_legendre_linear() {
        assert_close(jacobi_poly(0, 0.3, -0.4, 0.8), 1.0, 0.0);
        assert_close(jacobi_poly(1, 0.0, 0.0, 0.5), 0.5, 1e-15);
    }

    #[test]
    fn chebyshev_proportionality() {
        // P_n^{(-1/2,-1/2)}(x) = (Gamma(n+1/2) / (sqrt(pi) n!)) T_n(x).
        let x: f64 = 0.3;
        let t3 = (3.0 * x.acos()).cos();
        let scale = 5.0 / 16.0; // Gamma(3.5)/(sqrt(pi) 3!)
        assert_close(jacobi_poly(3, -0.5, -0.5, x), scale * t3, 1e-14);
    }

    #[test]
    fn norm_gamma_known_values() {
        assert_close(norm_gamma(0, 0.0, 0.0), 2.0, 1e-14);
        assert_close(norm_gamma(0, -0.5, -0.5), std::f64::consts::PI, 1e-13);
        assert_close(norm_gamma(2, 0.0, 0.0), 0.4, 1e-14);
    }

    #[test]
    fn norm_gamma_matches_quadrature() {
        // gamma_n = sum_k omega_k P_n(xi_k)^2, exact for 2n <= 2Q - 1.
        for &(a1, a2) in &[(-0.5, -0.5), (0.0, 0.0), (-0.5, 0.0), (0.3, 0.7)] {
            let (nodes, weights) = gauss_jacobi_reference(16, a1, a2).unwrap();
            for n in 0..8 {
                let quad: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(xi, w)| {
                        let p = jacobi_poly(n, a1, a2, *xi);
                        w * p * p
                    })
                    .sum();
                let formula = norm_gamma(n, a1, a2);
                assert_close(formula, quad, 1e-12 * quad.abs());
            }
        }
    }

    #[test]
    fn orthonormal_recurrence_matches_standard_polynomial() {
        for &(a1, a2) in &[(-0.5, -0.5), (0.0, 0.0), (-0.5, 0.0), (0.3, 0.7)] {
            let rec = OrthoRecurrence::new(a1, a2, 12);
            let mut vals = vec![0.0; 13];
            for &xi in &[-0.9, -0.2, 0.0, 0.35, 0.99] {
                rec.eval_all(xi, &mut vals);
                for n in 0..=12 {
                    let expected = jacobi_poly(n, a1, a2, xi) / norm_gamma(n, a1, a2).sqrt();
                    assert_close(vals[n], expected, 1e-10 * expected.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn derivative_recurrence_matches_finite_differences() {
        let rec = OrthoRecurrence::new(-0.5, 0.0, 10);
        let h = 1e-6;
        let mut v = vec![0.0; 11];
        let mut d = vec![0.0; 11];
        let mut vp = vec![0.0; 11];
        let mut vm = vec![0.0; 11];
        for &xi in &[-0.7, 0.1, 0.6] {
            rec.eval_all_with_deriv(xi, &mut v, &mut d);
            rec.eval_all(xi + h, &mut vp);
            rec.eval_all(xi - h, &mut vm);
            for n in 0..=10 {
                let fd = (vp[n] - vm[n]) / (2.0 * h);
                assert_close(d[n], fd, 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn endpoint_values() {
        // Legendre: P_n(1) = 1, P_n'(1) = n(n+1)/2.
        for n in 0..8 {
            assert_close(jacobi_at_one(n, 0.0), 1.0, 1e-14);
            let expected = 0.5 * n as f64 * (n as f64 + 1.0);
            assert_close(jacobi_deriv_at_one(n, 0.0, 0.0), expected, 1e-12);
        }
        // Cross-check against the recurrence slightly inside the interval.
        let n = 6;
        let (a1, a2) = (-0.5, -0.5);
        let h = 1e-6;
        let fd = (jacobi_poly(n, a1, a2, 1.0 - h) - jacobi_poly(n, a1, a2, 1.0 - 3.0 * h))
            / (2.0 * h);
        assert_close(jacobi_deriv_at_one(n, a1, a2), fd, 1e-3 * fd.abs());
    }

    #[test]
    fn gauss_legendre_two_point() {
        let (nodes, weights) = gauss_jacobi_reference(2, 0.0, 0.0).unwrap();
        let g = 1.0 / 3f64.sqrt();
        assert_close(nodes[0], -g, 1e-14);
        assert_close(nodes[1], g, 1e-14);
        assert_close(weights[0], 1.0, 1e-14);
        assert_close(weights[1], 1.0, 1e-14);
    }

    #[test]
    fn gauss_chebyshev_weights_are_uniform() {
        let q = 9;
        let (nodes, weights) = gauss_jacobi_reference(q, -0.5, -0.5).unwrap();
        for k in 0..q {
            let expected = (std::f64::consts::PI * (2.0 * (q - 1 - k) as f64 + 1.0)
                / (2.0 * q as f64))
                .cos();
            assert_close(nodes[k], expected, 1e-13);
            assert_close(weights[k], std::f64::consts::PI / q as f64, 1e-13);
        }
    }

    #[test]
    fn quadrature_integrates_moments_exactly() {
        // Weight (1-xi)^{-1/2} (1+xi)^0: moments against polynomials of
        // degree <= 2Q-1 must be exact; compare degree 0..5 moments with
        // a dense reference rule.
        let (n5, w5) = gauss_jacobi_reference(5, -0.5, 0.0).unwrap();
        let (n60, w60) = gauss_jacobi_reference(60, -0.5, 0.0).unwrap();
        for deg in 0..=5 {
            let coarse: f64 = n5
                .iter()
                .zip(&w5)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            let fine: f64 = n60
                .iter()
                .zip(&w60)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            assert_close(coarse, fine, 1e-12 * fine.abs().max(1.0));
        }
    }

    #[test]
    fn orthonormality_under_own_rule() {
        for &(a1, a2) in &[(-0.5, -0.5), (0.0, 0.0), (0.0, -0.5)] {
            let q = 24;
            let (nodes, weights) = gauss_jacobi_reference(q, a1, a2).unwrap();
            let rec = OrthoRecurrence::new(a1, a2, q - 1);
            let n_basis = 12;
            let mut gram = vec![vec![0.0; n_basis]; n_basis];
            let mut vals = vec![0.0; n_basis];
            for (xi, w) in nodes.iter().zip(&weights) {
                rec.eval_all(*xi, &mut vals);
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
    }

    #[test]
    fn large_rule_stays_monotone() {
        let (nodes, weights) = gauss_jacobi_reference(500, -0.5, 0.0).unwrap();
        assert_eq!(nodes.len(), 500);
        assert!(nodes.windows(2).all(|p| p[1] > p[0]));
        assert!(weights.iter().all(|w| *w > 0.0));
        assert!(gauss_jacobi_reference(501, 0.0, 0.0).is_err());
    }
}
