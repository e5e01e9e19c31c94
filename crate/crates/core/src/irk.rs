//! Implicit Runge-Kutta stepping for the coefficient system
//! du/dt = F(u, t) - A u.
//!
//! The stage system is solved by Newton iteration on the stacked stage
//! vector with the Jacobian frozen at the step's start state, factored
//! once per step (or once per operator change when the right-hand side
//! is affine) and reused across iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Butcher tableau. `a[s][r]` is the weight of stage r in stage s's
/// combination, so row sums of `a` equal `c` for collocation schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct IRKTableau {
    pub stages: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl IRKTableau {
    /// Checks the weight sum and the collocation identity. Steps do not
    /// call this, so diagnostic runs may corrupt a tableau on purpose.
    pub fn validate(&self) -> Result<()> {
        let q = self.stages;
        if q == 0 || self.a.len() != q || self.b.len() != q || self.c.len() != q {
            return Err(CoreError::Domain {
                context: "tableau",
                message: "inconsistent stage count".into(),
            });
        }
        let bsum: f64 = self.b.iter().sum();
        if (bsum - 1.0).abs() > 1e-12 {
            return Err(CoreError::Domain {
                context: "tableau",
                message: format!("weights sum to {bsum}, expected 1"),
            });
        }
        for (s, row) in self.a.iter().enumerate() {
            let rs: f64 = row.iter().sum();
            if (rs - self.c[s]).abs() > 1e-12 {
                return Err(CoreError::Domain {
                    context: "tableau",
                    message: format!("row {s} sums to {rs}, abscissa is {}", self.c[s]),
                });
            }
        }
        Ok(())
    }
}

/// Gauss-Legendre collocation tableau with `q` stages (quadrature order
/// 2q, stage order q). Supported for q in {1, 2, 3}.
pub fn gauss_tableau(q: usize) -> Result<IRKTableau> {
    let t = match q {
        1 => IRKTableau {
            stages: 1,
            a: vec![vec![0.5]],
            b: vec![1.0],
            c: vec![0.5],
        },
        2 => {
            let s3 = 3.0_f64.sqrt();
            IRKTableau {
                stages: 2,
                a: vec![
                    vec![0.25, 0.25 - s3 / 6.0],
                    vec![0.25 + s3 / 6.0, 0.25],
                ],
                b: vec![0.5, 0.5],
                c: vec![0.5 - s3 / 6.0, 0.5 + s3 / 6.0],
            }
        }
        3 => {
            let s15 = 15.0_f64.sqrt();
            IRKTableau {
                stages: 3,
                a: vec![
                    vec![5.0 / 36.0, 2.0 / 9.0 - s15 / 15.0, 5.0 / 36.0 - s15 / 30.0],
                    vec![5.0 / 36.0 + s15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - s15 / 24.0],
                    vec![5.0 / 36.0 + s15 / 30.0, 2.0 / 9.0 + s15 / 15.0, 5.0 / 36.0],
                ],
                b: vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
                c: vec![0.5 - s15 / 10.0, 0.5, 0.5 + s15 / 10.0],
            }
        }
        _ => {
            return Err(CoreError::Unsupported(format!(
                "Gauss tableau with {q} stages (supported: 1, 2, 3)"
            )))
        }
    };
    Ok(t)
}

/// Algebraic-stability matrix M[s][r] = a[s][r] b[s] + a[r][s] b[r]
/// - b[s] b[r], together with its smallest eigenvalue. Gauss methods
/// give exactly M = 0.
pub fn stability_matrix(tableau: &IRKTableau) -> (DMatrix<f64>, f64) {
    let q = tableau.stages;
    let m = DMatrix::from_fn(q, q, |s, r| {
        tableau.a[s][r] * tableau.b[s] + tableau.a[r][s] * tableau.b[r]
            - tableau.b[s] * tableau.b[r]
    });
    let min_eig = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &e| acc.min(e));
    (m, min_eig)
}

/// Step-size bound c0 / (4 sqrt(2) L (C0 + L) C_ab) with
/// C_ab^2 = sum a[s][r]^2 b[s] / b[r]. Diagnostic only; returns
/// infinity when the Lipschitz constant vanishes.
pub fn dt_bound(c0: f64, cap_c0: f64, lip: f64, tableau: &IRKTableau) -> f64 {
    if lip <= 0.0 {
        return f64::INFINITY;
    }
    let mut cab2 = 0.0;
    for s in 0..tableau.stages {
        for r in 0..tableau.stages {
            cab2 += tableau.a[s][r] * tableau.a[s][r] * tableau.b[s] / tableau.b[r];
        }
    }
    c0 / (4.0 * 2.0_f64.sqrt() * lip * (cap_c0 + lip) * cab2.sqrt())
}

/// Newton controls for the stage solve.
#[derive(Debug, Clone, Copy)]
pub struct NewtonControl {
    pub abs_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for NewtonControl {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_iters: 50,
            damping: 1.0,
        }
    }
}

/// The stepped system du/dt = F(u, t) - A u. Either part may be absent.
/// `affine` declares that F has no state dependence worth a Jacobian
/// (pure source, or identically zero), letting the stage factorization
/// survive across steps.
pub struct StageSystem<'a> {
    pub linear: Option<&'a DMatrix<f64>>,
    pub rhs: Option<&'a dyn Fn(&[f64], f64) -> Result<Vec<f64>>>,
    pub affine: bool,
}

impl StageSystem<'_> {
    fn g(&self, w: &[f64], t: f64, out: &mut DVector<f64>) -> Result<()> {
        out.fill(0.0);
        if let Some(f) = self.rhs {
            let fv = f(w, t)?;
            for (o, v) in out.iter_mut().zip(&fv) {
                *o = *v;
            }
        }
        if let Some(a) = self.linear {
            let wv = DVector::from_column_slice(w);
            *out -= a * wv;
        }
        Ok(())
    }
}

/// Caller-owned scratch holding the stacked stage factorization. Reused
/// across steps while the key (dimension, stage count, dt, affinity)
/// matches; callers must call `invalidate` whenever the operator matrix
/// or the projection set changes.
#[derive(Default)]
pub struct StepWorkspace {
    lu: Option<nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    key: Option<(usize, usize, u64)>,
}

impl StepWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn invalidate(&mut self) {
        self.lu = None;
        self.key = None;
    }
}

/// One IRK step's result.
#[derive(Debug)]
pub struct StepOutcome {
    pub u_next: Vec<f64>,
    pub newton_iters: usize,
}

fn stage_jacobian(
    system: &StageSystem,
    u: &[f64],
    t: f64,
    dt: f64,
    tableau: &IRKTableau,
) -> Result<DMatrix<f64>> {
    let n = u.len();
    let q = tableau.stages;
    // J_G = -A + J_F, with J_F by forward differences unless affine.
    let mut jg = match system.linear {
        Some(a) => -a.clone(),
        None => DMatrix::zeros(n, n),
    };
    if !system.affine {
        if let Some(f) = system.rhs {
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let h = 1e-7 * (1.0 + norm);
            let base = f(u, t)?;
            let mut pert = u.to_vec();
            for j in 0..n {
                pert[j] += h;
                let fj = f(&pert, t)?;
                pert[j] = u[j];
                for i in 0..n {
                    jg[(i, j)] += (fj[i] - base[i]) / h;
                }
            }
        }
    }
    // Stacked Newton matrix I - dt (a (x) J_G).
    let mut jac = DMatrix::identity(q * n, q * n);
    for s in 0..q {
        for r in 0..q {
            let scale = dt * tableau.a[s][r];
            if scale == 0.0 {
                continue;
            }
            for j in 0..n {
                for i in 0..n {
                    jac[(s * n + i, r * n + j)] -= scale * jg[(i, j)];
                }
            }
        }
    }
    Ok(jac)
}

/// Advances u(t) to u(t + dt) by solving the coupled stage system
/// w_s = u + dt sum_r a[s][r] G(w_r, t + c_r dt) with Newton iteration,
/// then combining u+ = u + dt sum_s b[s] G(w_s, ..).
pub fn step(
    system: &StageSystem,
    u: &[f64],
    t: f64,
    dt: f64,
    tableau: &IRKTableau,
    control: &NewtonControl,
    ws: &mut StepWorkspace,
) -> Result<StepOutcome> {
    let n = u.len();
    let q = tableau.stages;
    if dt <= 0.0 {
        return Err(CoreError::Domain {
            context: "irk step",
            message: format!("dt = {dt} must be positive"),
        });
    }

    let key = (n, q, dt.to_bits());
    let reusable = system.affine && ws.key == Some(key) && ws.lu.is_some();
    if !reusable {
        let jac = stage_jacobian(system, u, t, dt, tableau)?;
        ws.lu = Some(jac.lu());
        ws.key = Some(key);
    }

    let mut stages: Vec<DVector<f64>> =
        (0..q).map(|_| DVector::from_column_slice(u)).collect();
    let mut gvals: Vec<DVector<f64>> = (0..q).map(|_| DVector::zeros(n)).collect();
    let mut residual = DVector::zeros(q * n);
    let mut iters = 0usize;
    let mut prev_norm = f64::INFINITY;
    let mut refreshed = reusable;

    loop {
        for r in 0..q {
            let wr: Vec<f64> = stages[r].iter().copied().collect();
            let mut g = std::mem::take(&mut gvals[r]);
            system.g(&wr, t + tableau.c[r] * dt, &mut g)?;
            gvals[r] = g;
        }
        for s in 0..q {
            for i in 0..n {
                let mut acc = stages[s][i] - u[i];
                for r in 0..q {
                    acc -= dt * tableau.a[s][r] * gvals[r][i];
                }
                residual[s * n + i] = acc;
            }
        }
        let norm = residual.norm();
        if norm < control.abs_tol {
            break;
        }
        if iters >= control.max_iters {
            return Err(CoreError::SolveFailed {
                t,
                residual: norm,
                iters,
            });
        }
        // A stalled contraction means the frozen Jacobian has drifted;
        // rebuild once at the current stage-one state before giving up.
        if norm > 0.5 * prev_norm && !refreshed {
            let w0: Vec<f64> = stages[0].iter().copied().collect();
            let jac = stage_jacobian(system, &w0, t, dt, tableau)?;
            ws.lu = Some(jac.lu());
            refreshed = true;
        }
        prev_norm = norm;
        let delta = ws
            .lu
            .as_ref()
            .expect("factorization present")
            .solve(&(-&residual))
            .ok_or(CoreError::SolveFailed {
                t,
                residual: norm,
                iters,
            })?;
        for s in 0..q {
            for i in 0..n {
                stages[s][i] += control.damping * delta[s * n + i];
            }
        }
        iters += 1;
    }

    let mut u_next = u.to_vec();
    for s in 0..q {
        for (i, un) in u_next.iter_mut().enumerate() {
            *un += dt * tableau.b[s] * gvals[s][i];
        }
    }
    Ok(StepOutcome {
        u_next,
        newton_iters: iters,
    })
}
