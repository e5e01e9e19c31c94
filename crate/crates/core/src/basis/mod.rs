//! One-dimensional orthonormal basis families on the real line.
//!
//! Two families share one interface:
//!
//! * mapped Jacobi functions: a Jacobi polynomial composed with a map
//!   from R onto (-1, 1), times the square root of (weight * map
//!   derivative) so the family is orthonormal in L2(R);
//! * Hermite functions scaled by beta and shifted by x0.
//!
//! Both carry a scaling factor `beta` (spatial width) and a displacement
//! `x0` (center). All downstream code works with the orthonormal values
//! only, so the two families are interchangeable everywhere.

pub mod hermite;
pub mod jacobi;
pub mod map;

pub use jacobi::{jacobi_poly, norm_gamma};
pub use map::{map_forward, map_inverse, map_jacobian};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    MappedJacobi,
    Hermite,
}

/// Parameters pinning down one 1D basis family.
///
/// `alpha1`, `alpha2` (Jacobi exponents) and `r` (mapping order) are
/// ignored by the Hermite family but kept in the struct so a parameter
/// set is always a plain value type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisParams {
    pub family: BasisFamily,
    pub alpha1: f64,
    pub alpha2: f64,
    pub r: u8,
    pub beta: f64,
    pub x0: f64,
}

impl BasisParams {
    pub fn mapped_jacobi(alpha1: f64, alpha2: f64, r: u8, beta: f64, x0: f64) -> Result<Self> {
        let p = BasisParams {
            family: BasisFamily::MappedJacobi,
            alpha1,
            alpha2,
            r,
            beta,
            x0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn hermite(beta: f64, x0: f64) -> Result<Self> {
        let p = BasisParams {
            family: BasisFamily::Hermite,
            alpha1: 0.0,
            alpha2: 0.0,
            r: 0,
            beta,
            x0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(CoreError::Domain {
                context: "BasisParams",
                message: format!("beta = {} must be positive and finite", self.beta),
            });
        }
        if !self.x0.is_finite() {
            return Err(CoreError::Domain {
                context: "BasisParams",
                message: "x0 must be finite".into(),
            });
        }
        if self.family == BasisFamily::MappedJacobi {
            if self.alpha1 <= -1.0 || self.alpha2 <= -1.0 {
                return Err(CoreError::Domain {
                    context: "BasisParams",
                    message: format!(
                        "Jacobi exponents ({}, {}) must exceed -1",
                        self.alpha1, self.alpha2
                    ),
                });
            }
            if self.r > 1 {
                return Err(CoreError::Unsupported(format!(
                    "mapping order r = {}, only 0 and 1 are implemented",
                    self.r
                )));
            }
        }
        Ok(())
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }
}

/// Gauss rule in physical coordinates: sum_k weights[k] J_m(nodes[k]) J_n(nodes[k])
/// equals the Kronecker delta exactly for m + n <= 2Q - 1.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub params: BasisParams,
}

impl QuadratureRule {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }
}

/// Dense table of basis values, row n holding J_n at every point.
#[derive(Debug, Clone)]
pub struct BasisTable {
    n_count: usize,
    n_points: usize,
    vals: Vec<f64>,
}

impl BasisTable {
    fn zeros(n_count: usize, n_points: usize) -> Self {
        BasisTable {
            n_count,
            n_points,
            vals: vec![0.0; n_count * n_points],
        }
    }

    pub fn n_count(&self) -> usize {
        self.n_count
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.vals[n * self.n_points..(n + 1) * self.n_points]
    }

    fn set(&mut self, n: usize, k: usize, v: f64) {
        self.vals[n * self.n_points + k] = v;
    }
}

/// Shared evaluation core. Computes J_0..J_{n_count-1} and optionally the
/// derivatives at one point, writing into the scratch slices.
fn eval_point(
    params: &BasisParams,
    x: f64,
    vals: &mut [f64],
    ders: Option<&mut [f64]>,
    rec: Option<&jacobi::OrthoRecurrence>,
    scratch_d: &mut [f64],
) {
    let y = x - params.x0;
    match params.family {
        BasisFamily::Hermite => {
            let by = params.beta * y;
            match ders {
                None => {
                    hermite::hermite_eval_all(by, vals);
                    let s = params.beta.sqrt();
                    for v in vals.iter_mut() {
                        *v *= s;
                    }
                }
                Some(d) => {
                    hermite::hermite_eval_all_with_deriv(by, vals, d);
                    let s = params.beta.sqrt();
                    let sd = params.beta * s;
                    for v in vals.iter_mut() {
                        *v *= s;
                    }
                    for v in d.iter_mut() {
                        *v *= sd;
                    }
                }
            }
        }
        BasisFamily::MappedJacobi => {
            let owned;
            let rec = match rec {
                Some(r) => r,
                None => {
                    owned = jacobi::OrthoRecurrence::new(
                        params.alpha1,
                        params.alpha2,
                        vals.len().saturating_sub(1),
                    );
                    &owned
                }
            };
            let xi = map::map_forward(params.beta, params.r, y)
                .expect("validated mapping order");
            let rh = params.r as f64 / 2.0;
            let e1 = params.alpha1 + 1.0 + rh;
            let e2 = params.alpha2 + 1.0 + rh;
            let m = params.beta.sqrt()
                * (1.0 - xi).powf(0.5 * e1)
                * (1.0 + xi).powf(0.5 * e2);
            match ders {
                None => {
                    rec.eval_all(xi, vals);
                    for v in vals.iter_mut() {
                        *v *= m;
                    }
                }
                Some(d) => {
                    rec.eval_all_with_deriv(xi, vals, scratch_d);
                    let one_m = (1.0 - xi) * (1.0 + xi);
                    let hp = params.beta * one_m * one_m.powf(rh);
                    // m'(xi) h'(xi), with the boundary-singular factors
                    // cancelled algebraically so the expression stays
                    // finite as |xi| -> 1.
                    let wfac =
                        params.beta * one_m.powf(rh) * (0.5 * e2 * (1.0 - xi) - 0.5 * e1 * (1.0 + xi));
                    for n in 0..vals.len() {
                        let p = vals[n];
                        let dp = scratch_d[n];
                        vals[n] = p * m;
                        d[n] = m * (dp * hp + p * wfac);
                    }
                }
            }
        }
    }
}

/// Table of J_n(x_k) for n < n_count over the given points.
pub fn value_table(params: &BasisParams, n_count: usize, xs: &[f64]) -> BasisTable {
    let mut table = BasisTable::zeros(n_count, xs.len());
    let rec = match params.family {
        BasisFamily::MappedJacobi => Some(jacobi::OrthoRecurrence::new(
            params.alpha1,
            params.alpha2,
            n_count.saturating_sub(1),
        )),
        BasisFamily::Hermite => None,
    };
    let mut vals = vec![0.0; n_count];
    let mut scratch = vec![0.0; n_count];
    for (k, &x) in xs.iter().enumerate() {
        eval_point(params, x, &mut vals, None, rec.as_ref(), &mut scratch);
        for n in 0..n_count {
            table.set(n, k, vals[n]);
        }
    }
    table
}

/// Value and derivative tables over the given points.
pub fn value_and_deriv_tables(
    params: &BasisParams,
    n_count: usize,
    xs: &[f64],
) -> (BasisTable, BasisTable) {
    let mut tv = BasisTable::zeros(n_count, xs.len());
    let mut td = BasisTable::zeros(n_count, xs.len());
    let rec = match params.family {
        BasisFamily::MappedJacobi => Some(jacobi::OrthoRecurrence::new(
            params.alpha1,
            params.alpha2,
            n_count.saturating_sub(1),
        )),
        BasisFamily::Hermite => None,
    };
    let mut vals = vec![0.0; n_count];
    let mut ders = vec![0.0; n_count];
    let mut scratch = vec![0.0; n_count];
    for (k, &x) in xs.iter().enumerate() {
        eval_point(
            params,
            x,
            &mut vals,
            Some(&mut ders),
            rec.as_ref(),
            &mut scratch,
        );
        for n in 0..n_count {
            tv.set(n, k, vals[n]);
            td.set(n, k, ders[n]);
        }
    }
    (tv, td)
}

/// Single basis function value J_n(x).
pub fn basis_eval(n: usize, params: &BasisParams, x: f64) -> f64 {
    let mut vals = vec![0.0; n + 1];
    let mut scratch = vec![0.0; n + 1];
    eval_point(params, x, &mut vals, None, None, &mut scratch);
    vals[n]
}

/// Single basis function derivative dJ_n/dx.
pub fn basis_deriv(n: usize, params: &BasisParams, x: f64) -> f64 {
    let mut vals = vec![0.0; n + 1];
    let mut ders = vec![0.0; n + 1];
    let mut scratch = vec![0.0; n + 1];
    eval_point(params, x, &mut vals, Some(&mut ders), None, &mut scratch);
    ders[n]
}

/// Gauss rule of size Q in physical coordinates for the given family.
pub fn quad_rule(q: usize, params: &BasisParams) -> Result<QuadratureRule> {
    params.validate()?;
    match params.family {
        BasisFamily::Hermite => {
            let (ys, ws) = hermite::gauss_hermite_reference(q)?;
            let nodes: Vec<f64> = ys.iter().map(|y| params.x0 + y / params.beta).collect();
            let weights: Vec<f64> = ws.iter().map(|w| w / params.beta).collect();
            Ok(QuadratureRule {
                nodes,
                weights,
                params: *params,
            })
        }
        BasisFamily::MappedJacobi => {
            let (xis, oms) = gauss_jacobi_reference_for(params, q)?;
            let rh = params.r as f64 / 2.0;
            let e1 = params.alpha1 + 1.0 + rh;
            let e2 = params.alpha2 + 1.0 + rh;
            let mut nodes = vec![0.0; q];
            let mut weights = vec![0.0; q];
            for k in 0..q {
                let xi = xis[k];
                nodes[k] = params.x0 + map::map_inverse(params.beta, params.r, xi)?;
                // Physical weight = reference weight / (w(xi) h'(xi)).
                let wh = params.beta * (1.0 - xi).powf(e1) * (1.0 + xi).powf(e2);
                weights[k] = oms[k] / wh;
            }
            Ok(QuadratureRule {
                nodes,
                weights,
                params: *params,
            })
        }
    }
}

fn gauss_jacobi_reference_for(params: &BasisParams, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    jacobi::gauss_jacobi_reference(q, params.alpha1, params.alpha2)
}

/// The inverse-inequality constant
/// 2N(N + a1 + a2 + 1) + 2(1 + a1 + a2 + r/2)^2.
pub fn inv_const(n: usize, alpha1: f64, alpha2: f64, r: u8) -> f64 {
    let nf = n as f64;
    let s = alpha1 + alpha2;
    2.0 * nf * (nf + s + 1.0) + 2.0 * (1.0 + s + r as f64 / 2.0).powi(2)
}

/// Largest absolute deviation of the quadrature Gram matrix from the
/// identity over m, n < n_count. Diagnostic used by the verification
/// suite; 1e-10 is the working bar.
pub fn orthonormality_defect(params: &BasisParams, n_count: usize, q: usize) -> Result<f64> {
    let rule = quad_rule(q, params)?;
    let table = value_table(params, n_count, &rule.nodes);
    let mut worst = 0.0_f64;
    for m in 0..n_count {
        let rm = table.row(m);
        for n in m..n_count {
            let rn = table.row(n);
            let mut acc = 0.0;
            for k in 0..rule.size() {
                acc += rule.weights[k] * rm[k] * rn[k];
            }
            let target = if m == n { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).abs());
        }
    }
    Ok(worst)
}
