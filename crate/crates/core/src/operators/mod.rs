//! Galerkin operators on hyperbolic-cross spaces.
//!
//! Every operator here is a dense matrix over the index set, with the
//! convention A[i][j] = a(J_{n^j}, J_{n^i}): the column indexes the
//! trial function, the row the test function. Separable bilinear forms
//! are assembled from one-dimensional factor matrices computed by
//! Gauss quadrature sized to the maximal order in the set.

pub mod bessel;
pub mod cache;
pub mod fourier;
pub mod fractional;

use nalgebra::DMatrix;

use crate::basis::{quad_rule, value_and_deriv_tables, BasisParams, BasisTable, QuadratureRule};
use crate::error::{CoreError, Result};
use crate::field::{analyze_values, SpectralField, TensorGrid};
use crate::sparse_index::CrossIndexSet;

pub use fractional::{
    assemble_fractional, assemble_fractional_cached, fractional_apply, fractional_apply_galerkin,
};

/// A bilinear form assembled over an index set.
#[derive(Debug, Clone)]
pub struct GalerkinOperator {
    matrix: DMatrix<f64>,
    symmetric: bool,
    term: String,
}

impl GalerkinOperator {
    pub(crate) fn from_parts(matrix: DMatrix<f64>, symmetric: bool, term: String) -> Self {
        Self {
            matrix,
            symmetric,
            term,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn term(&self) -> &str {
        &self.term
    }

    /// Matrix-vector product in coefficient space.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.matrix.ncols(), "coefficient length");
        let n = self.matrix.nrows();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..coeffs.len() {
                acc += self.matrix[(i, j)] * coeffs[j];
            }
            out[i] = acc;
        }
        out
    }
}

/// One-dimensional quadrature and basis tables for a factor matrix.
struct DimTables {
    rule: QuadratureRule,
    vals: BasisTable,
    ders: BasisTable,
}

fn dim_tables(set: &CrossIndexSet, params: &[BasisParams]) -> Result<Vec<DimTables>> {
    if params.len() != set.d() {
        return Err(CoreError::Domain {
            context: "operator assembly",
            message: format!(
                "{} parameter sets for a {}-dimensional index set",
                params.len(),
                set.d()
            ),
        });
    }
    let m = set.max_entry() + 1;
    let q = 2 * (m + 1);
    let mut out = Vec::with_capacity(set.d());
    for p in params {
        let rule = quad_rule(q, p)?;
        let (vals, ders) = value_and_deriv_tables(p, m, &rule.nodes);
        out.push(DimTables { rule, vals, ders });
    }
    Ok(out)
}

/// Weighted Gram-type factor: F[a][b] = sum_k w_k c(x_k) fa(x_k) fb(x_k)
/// with fa drawn from `rows_a` and fb from `rows_b`.
fn factor_matrix<C: Fn(f64) -> f64>(
    dt: &DimTables,
    rows_a: &BasisTable,
    rows_b: &BasisTable,
    coeff: C,
) -> DMatrix<f64> {
    let m = rows_a.n_count();
    let q = dt.rule.size();
    let mut f = DMatrix::zeros(m, m);
    for a in 0..m {
        let va = rows_a.row(a);
        for b in 0..m {
            let vb = rows_b.row(b);
            let mut acc = 0.0;
            for k in 0..q {
                acc += dt.rule.weights[k] * coeff(dt.rule.nodes[k]) * va[k] * vb[k];
            }
            f[(a, b)] = acc;
        }
    }
    f
}

fn grams(tables: &[DimTables]) -> Vec<DMatrix<f64>> {
    tables
        .iter()
        .map(|dt| factor_matrix(dt, &dt.vals, &dt.vals, |_| 1.0))
        .collect()
}

/// Entry of a pure product form: prod_d gram_d[m_d][n_d].
fn product_entry(gram: &[DMatrix<f64>], m: &[usize], n: &[usize]) -> f64 {
    let mut p = 1.0;
    for (d, g) in gram.iter().enumerate() {
        p *= g[(m[d], n[d])];
    }
    p
}

/// Entry of a sum-of-products form: one special factor per summand, the
/// Gram factor everywhere else.
fn sum_entry(
    gram: &[DMatrix<f64>],
    special: &[DMatrix<f64>],
    coeffs: &[f64],
    m: &[usize],
    n: &[usize],
) -> f64 {
    let mut acc = 0.0;
    for d in 0..gram.len() {
        if coeffs[d] == 0.0 {
            continue;
        }
        let mut p = coeffs[d] * special[d][(m[d], n[d])];
        for (e, g) in gram.iter().enumerate() {
            if e != d {
                p *= g[(m[e], n[e])];
            }
        }
        acc += p;
    }
    acc
}

fn assemble_product(set: &CrossIndexSet, gram: &[DMatrix<f64>], term: &str) -> GalerkinOperator {
    let l = set.len();
    let mut a = DMatrix::zeros(l, l);
    for i in 0..l {
        let m = set.index(i);
        for j in 0..l {
            a[(i, j)] = product_entry(gram, m, set.index(j));
        }
    }
    GalerkinOperator::from_parts(a, true, term.to_string())
}

fn assemble_sum(
    set: &CrossIndexSet,
    gram: &[DMatrix<f64>],
    special: &[DMatrix<f64>],
    coeffs: &[f64],
    term: &str,
    symmetric: bool,
) -> GalerkinOperator {
    let l = set.len();
    let mut a = DMatrix::zeros(l, l);
    for i in 0..l {
        let m = set.index(i);
        for j in 0..l {
            a[(i, j)] = sum_entry(gram, special, coeffs, m, set.index(j));
        }
    }
    GalerkinOperator::from_parts(a, symmetric, term.to_string())
}

/// Mass matrix (J_n, J_m); the identity up to quadrature error.
pub fn assemble_mass(set: &CrossIndexSet, params: &[BasisParams]) -> Result<GalerkinOperator> {
    let tables = dim_tables(set, params)?;
    Ok(assemble_product(set, &grams(&tables), "mass"))
}

/// Stiffness form nu (grad u, grad w), the Galerkin image of -nu Lap.
pub fn assemble_diffusion(
    set: &CrossIndexSet,
    params: &[BasisParams],
    nu: f64,
) -> Result<GalerkinOperator> {
    let tables = dim_tables(set, params)?;
    let gram = grams(&tables);
    let stiff: Vec<_> = tables
        .iter()
        .map(|dt| factor_matrix(dt, &dt.ders, &dt.ders, |_| 1.0))
        .collect();
    let coeffs = vec![nu; set.d()];
    Ok(assemble_sum(set, &gram, &stiff, &coeffs, "diffusion", true))
}

/// Advection form (v . grad u, w) for a constant velocity v.
pub fn assemble_advection(
    set: &CrossIndexSet,
    params: &[BasisParams],
    velocity: &[f64],
) -> Result<GalerkinOperator> {
    if velocity.len() != set.d() {
        return Err(CoreError::Domain {
            context: "advection assembly",
            message: format!(
                "velocity has {} components in {} dimensions",
                velocity.len(),
                set.d()
            ),
        });
    }
    let tables = dim_tables(set, params)?;
    let gram = grams(&tables);
    // Trial function carries the derivative: C[a][b] = int J_b' J_a.
    let conv: Vec<_> = tables
        .iter()
        .map(|dt| factor_matrix(dt, &dt.vals, &dt.ders, |_| 1.0))
        .collect();
    Ok(assemble_sum(
        set, &gram, &conv, velocity, "advection", false,
    ))
}

/// Quadratic potential form c (|x|^2 u, w).
pub fn assemble_potential(
    set: &CrossIndexSet,
    params: &[BasisParams],
    c: f64,
) -> Result<GalerkinOperator> {
    let tables = dim_tables(set, params)?;
    let gram = grams(&tables);
    let moment: Vec<_> = tables
        .iter()
        .map(|dt| factor_matrix(dt, &dt.vals, &dt.vals, |x| x * x))
        .collect();
    let coeffs = vec![c; set.d()];
    Ok(assemble_sum(set, &gram, &moment, &coeffs, "potential", true))
}

/// Antiderivative kernel K(x_k) = sum_j sign(x_k - x_j) w_j u_j over a
/// sorted quadrature grid: K = 2 int_{-inf}^{x} u - int u with the node's
/// own mass dropped (the sign convention at coincidence is zero).
pub fn conv_gradient(nodes: &[f64], weights: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(nodes.len(), weights.len());
    assert_eq!(nodes.len(), values.len());
    debug_assert!(nodes.windows(2).all(|w| w[0] <= w[1]), "nodes must ascend");
    let n = nodes.len();
    let mut prefix = Vec::with_capacity(n);
    let mut run = 0.0;
    for k in 0..n {
        run += weights[k] * values[k];
        prefix.push(run);
    }
    let total = run;
    (0..n)
        .map(|k| {
            let below = if k == 0 { 0.0 } else { prefix[k - 1] };
            below + prefix[k] - total
        })
        .collect()
}

/// Pointwise closure (t, x, u) -> value.
pub type PointwiseFn = Box<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;

enum RhsKind {
    /// Plain pointwise reaction and source terms projected onto the set.
    Pointwise(PointwiseFn),
    /// Pointwise part plus the aggregation flux (u K_u, J_i') with
    /// K_u the antiderivative kernel of u (one dimension only).
    ChemotaxisFlux(PointwiseFn),
}

/// Projected right-hand side evaluations: synthesize the state on a
/// quadrature grid, apply the pointwise law, project back.
pub struct NonlinearRhs {
    grid: TensorGrid,
    set: CrossIndexSet,
    params: Vec<BasisParams>,
    kind: RhsKind,
}

impl NonlinearRhs {
    pub fn pointwise(
        set: &CrossIndexSet,
        params: &[BasisParams],
        oversample: f64,
        f: PointwiseFn,
    ) -> Result<Self> {
        Ok(Self {
            grid: TensorGrid::new(set, params, oversample)?,
            set: set.clone(),
            params: params.to_vec(),
            kind: RhsKind::Pointwise(f),
        })
    }

    pub fn chemotaxis(
        set: &CrossIndexSet,
        params: &[BasisParams],
        oversample: f64,
        f: PointwiseFn,
    ) -> Result<Self> {
        if set.d() != 1 {
            return Err(CoreError::Domain {
                context: "aggregation flux",
                message: format!("defined in one dimension, set has {}", set.d()),
            });
        }
        Ok(Self {
            grid: TensorGrid::new(set, params, oversample)?,
            set: set.clone(),
            params: params.to_vec(),
            kind: RhsKind::ChemotaxisFlux(f),
        })
    }

    pub fn set(&self) -> &CrossIndexSet {
        &self.set
    }

    /// Coefficients of the projected right-hand side at state `coeffs`.
    pub fn eval(&self, coeffs: &[f64], t: f64) -> Result<Vec<f64>> {
        let field = SpectralField::from_coeffs(
            self.set.clone(),
            self.params.clone(),
            coeffs.to_vec(),
        )?;
        let u = field.grid_values(&self.grid, None);
        let f = match &self.kind {
            RhsKind::Pointwise(f) | RhsKind::ChemotaxisFlux(f) => f,
        };
        let mut vals = Vec::with_capacity(u.len());
        for (flat, &uk) in u.iter().enumerate() {
            let x = self.grid.node(flat);
            let v = f(t, &x, uk);
            if !v.is_finite() {
                return Err(CoreError::NonFiniteSample { coords: x });
            }
            vals.push(v);
        }
        let mut out = analyze_values(&self.grid, &vals, &self.set, &self.params)?
            .coeffs()
            .to_vec();
        if let RhsKind::ChemotaxisFlux(_) = &self.kind {
            let rule = self.grid.rule(0);
            let kernel = conv_gradient(&rule.nodes, &rule.weights, &u);
            let ders = self.grid.deriv_table(0);
            for (i, c) in out.iter_mut().enumerate() {
                let mode = self.set.index(i)[0];
                let row = ders.row(mode);
                let mut acc = 0.0;
                for k in 0..rule.size() {
                    acc += rule.weights[k] * u[k] * kernel[k] * row[k];
                }
                *c += acc;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_index::{build, GammaSpec};

    fn mj_params(r: u8, beta: f64, d: usize) -> Vec<BasisParams> {
        let a = if r == 1 { -0.5 } else { 0.0 };
        vec![BasisParams::mapped_jacobi(a, a, r, beta, 0.0).unwrap(); d]
    }

    #[test]
    fn mass_is_the_identity() {
        let set = build(2, 6, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = mj_params(1, 0.7, 2);
        let mass = assemble_mass(&set, &params).unwrap();
        let l = set.len();
        let mut worst = 0.0_f64;
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((mass.matrix()[(i, j)] - want).abs());
            }
        }
        assert!(worst < 1e-10, "mass defect {worst}");

        let hermite = vec![BasisParams::hermite(1.1, 0.4).unwrap(); 2];
        let mass_h = assemble_mass(&set, &hermite).unwrap();
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((mass_h.matrix()[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn advection_is_antisymmetric() {
        // Integration by parts with vanishing boundary terms flips the
        // sign, so C + C^T should vanish to quadrature accuracy.
        let set = build(2, 8, GammaSpec::Value(-1.0), usize::MAX).unwrap();
        let params = mj_params(0, 0.8, 2);
        let adv = assemble_advection(&set, &params, &[0.7, -0.3]).unwrap();
        let a = adv.matrix();
        let mut worst = 0.0_f64;
        for i in 0..set.len() {
            for j in 0..set.len() {
                worst = worst.max((a[(i, j)] + a[(j, i)]).abs());
            }
        }
        assert!(worst < 1e-8, "symmetric part {worst}");
        assert!(!adv.is_symmetric());
    }

    #[test]
    fn hermite_potential_is_tridiagonal_in_even_steps() {
        // With y = beta x the moment is x^2 = y^2 / beta^2 and
        // y^2 h_n couples only n and n +- 2:
        // diagonal (n + 1/2), two off (sqrt((n+1)(n+2))/2).
        let beta = 1.3;
        let set = build(1, 8, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = vec![BasisParams::hermite(beta, 0.0).unwrap()];
        let pot = assemble_potential(&set, &params, 1.0).unwrap();
        let a = pot.matrix();
        let b2 = beta * beta;
        for n in 0..=8usize {
            let want = (n as f64 + 0.5) / b2;
            assert!((a[(n, n)] - want).abs() < 1e-10, "diag {n}");
            if n + 2 <= 8 {
                let nf = n as f64;
                let want = ((nf + 1.0) * (nf + 2.0)).sqrt() / 2.0 / b2;
                assert!((a[(n, n + 2)] - want).abs() < 1e-10, "super {n}");
                assert!((a[(n + 2, n)] - want).abs() < 1e-10, "sub {n}");
            }
            if n + 1 <= 8 {
                assert!(a[(n, n + 1)].abs() < 1e-10, "odd coupling {n}");
            }
        }
    }

    #[test]
    fn hermite_diffusion_matches_the_ladder_formula() {
        // int h_m' h_n' dy has diagonal (n + 1/2) and off-diagonal
        // -sqrt((n+1)(n+2))/2; the beta scaling contributes beta^2.
        let beta = 1.3;
        let set = build(1, 7, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = vec![BasisParams::hermite(beta, 0.2).unwrap()];
        let diff = assemble_diffusion(&set, &params, 1.0).unwrap();
        let a = diff.matrix();
        let b2 = beta * beta;
        for n in 0..=7usize {
            let want = (n as f64 + 0.5) * b2;
            assert!((a[(n, n)] - want).abs() < 1e-9, "diag {n}: {}", a[(n, n)]);
            if n + 2 <= 7 {
                let nf = n as f64;
                let want = -((nf + 1.0) * (nf + 2.0)).sqrt() / 2.0 * b2;
                assert!((a[(n, n + 2)] - want).abs() < 1e-9, "super {n}");
            }
        }
    }

    #[test]
    fn diffusion_is_positive_semidefinite() {
        use rand::{Rng, SeedableRng};
        let set = build(2, 6, GammaSpec::Value(-0.5), usize::MAX).unwrap();
        let params = mj_params(1, 0.6, 2);
        let diff = assemble_diffusion(&set, &params, 0.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v: Vec<f64> = (0..set.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let av = diff.apply(&v);
            let quad: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
            assert!(quad > -1e-8, "negative energy {quad}");
        }
    }

    #[test]
    fn diffusion_matches_projected_second_derivative() {
        // For u in the span, (grad u, grad J_m) = -(u'', J_m) by parts;
        // check against a finite-difference second derivative of the
        // synthesized field, projected numerically.
        let set = build(1, 6, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = mj_params(0, 0.9, 1);
        let diff = assemble_diffusion(&set, &params, 1.0).unwrap();
        let coeffs: Vec<f64> = (0..set.len()).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let field = SpectralField::from_coeffs(set.clone(), params.clone(), coeffs.clone()).unwrap();
        let got = diff.apply(&coeffs);
        let grid = TensorGrid::new(&set, &params, 3.0).unwrap();
        let rule = grid.rule(0).clone();
        let h = 1e-4;
        for i in [0usize, 2, 5] {
            let mode = set.index(i)[0];
            let mut acc = 0.0;
            for k in 0..rule.size() {
                let x = rule.nodes[k];
                let upp = (field.eval_at(&[x + h]).unwrap()
                    - 2.0 * field.eval_at(&[x]).unwrap()
                    + field.eval_at(&[x - h]).unwrap())
                    / (h * h);
                let basis = crate::basis::basis_eval(mode, &params[0], x);
                acc += rule.weights[k] * (-upp) * basis;
            }
            assert!(
                (got[i] - acc).abs() < 1e-4 * (1.0 + acc.abs()),
                "mode {mode}: {} vs {acc}",
                got[i]
            );
        }
    }

    #[test]
    fn conv_gradient_prefix_properties() {
        // Unit-mass even bump: kernel is odd, vanishes at the center
        // node, approaches +-1 at the ends.
        let set = build(1, 20, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = mj_params(0, 1.0, 1);
        let grid = TensorGrid::new(&set, &params, 2.0).unwrap();
        let rule = grid.rule(0);
        let density: Vec<f64> = rule
            .nodes
            .iter()
            .map(|&x| (-x * x).exp() / std::f64::consts::PI.sqrt())
            .collect();
        let k = conv_gradient(&rule.nodes, &rule.weights, &density);
        let n = rule.size();
        assert!(k[0] < -0.99 && k[n - 1] > 0.99, "ends {} {}", k[0], k[n - 1]);
        for j in 0..n {
            // Antisymmetry of the kernel under x -> -x for even data.
            let mirrored = -k[n - 1 - j];
            assert!((k[j] - mirrored).abs() < 1e-10);
        }

        // Linearity in the density.
        let doubled: Vec<f64> = density.iter().map(|v| 2.0 * v).collect();
        let k2 = conv_gradient(&rule.nodes, &rule.weights, &doubled);
        for j in 0..n {
            assert!((k2[j] - 2.0 * k[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_rhs_of_identity_returns_the_coefficients() {
        let set = build(2, 5, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = mj_params(1, 0.8, 2);
        let rhs = NonlinearRhs::pointwise(&set, &params, 2.0, Box::new(|_, _, u| u)).unwrap();
        let coeffs: Vec<f64> = (0..set.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let out = rhs.eval(&coeffs, 0.0).unwrap();
        for (a, b) in coeffs.iter().zip(&out) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn pointwise_rhs_projects_a_pure_source() {
        let set = build(1, 12, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = vec![BasisParams::hermite(1.0, 0.0).unwrap()];
        let g = |x: f64| (-0.5 * x * x).exp() * x;
        let rhs =
            NonlinearRhs::pointwise(&set, &params, 2.0, Box::new(move |_, x, _| g(x[0]))).unwrap();
        let zero = vec![0.0; set.len()];
        let got = rhs.eval(&zero, 1.0).unwrap();
        let want = crate::field::analyze(|x| g(x[0]), &set, &params, 2.0).unwrap();
        for (a, b) in got.iter().zip(want.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_rhs_values_are_reported() {
        let set = build(1, 4, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = mj_params(0, 1.0, 1);
        let rhs = NonlinearRhs::pointwise(
            &set,
            &params,
            2.0,
            Box::new(|_, _, u| (u - 0.0).ln()),
        )
        .unwrap();
        let zero = vec![0.0; set.len()];
        match rhs.eval(&zero, 0.0) {
            Err(CoreError::NonFiniteSample { .. }) => {}
            other => panic!("expected a non-finite report, got {other:?}"),
        }
    }

    #[test]
    fn aggregation_flux_converges_to_the_direct_quadrature() {
        // Independent oracle: dense trapezoid evaluation of
        // int u(x) K_u(x) J_i'(x) dx with K_u from cumulative sums. The
        // exponentially mapped family keeps the oracle's truncation to
        // [-60, 60] far below the comparison tolerance. The discrete
        // kernel has a kink at each rule node, so the projected flux
        // approaches the true integral only at first order in the rule
        // size; assert the limit and the decay rather than tight equality
        // at a single resolution.
        let set = build(1, 8, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = mj_params(0, 0.7, 1);
        let coeffs: Vec<f64> = (0..set.len())
            .map(|i| if i % 3 == 0 { 0.5 / (1.0 + i as f64) } else { 0.1 })
            .collect();
        let field =
            SpectralField::from_coeffs(set.clone(), params.clone(), coeffs.clone()).unwrap();

        let m = 12000usize;
        let (lo, hi) = (-60.0, 60.0);
        let h = (hi - lo) / m as f64;
        let xs: Vec<f64> = (0..=m).map(|k| lo + k as f64 * h).collect();
        let u: Vec<f64> = xs.iter().map(|&x| field.eval_at(&[x]).unwrap()).collect();
        // Cumulative trapezoid for the antiderivative kernel.
        let mut cum = vec![0.0; xs.len()];
        for k in 1..xs.len() {
            cum[k] = cum[k - 1] + 0.5 * h * (u[k - 1] + u[k]);
        }
        let total = cum[m];
        let mut exact = vec![0.0; set.len()];
        for i in 0..set.len() {
            let mode = set.index(i)[0];
            let mut acc = 0.0;
            for k in 0..=m {
                let kernel = 2.0 * cum[k] - total;
                let dj = crate::basis::basis_deriv(mode, &params[0], xs[k]);
                let w = if k == 0 || k == m { 0.5 * h } else { h };
                acc += w * u[k] * kernel * dj;
            }
            exact[i] = acc;
        }

        let worst_at = |oversample: f64| -> f64 {
            let rhs =
                NonlinearRhs::chemotaxis(&set, &params, oversample, Box::new(|_, _, _| 0.0))
                    .unwrap();
            let got = rhs.eval(&coeffs, 0.0).unwrap();
            got.iter()
                .zip(&exact)
                .map(|(g, e)| (g - e).abs() / (1.0 + e.abs()))
                .fold(0.0_f64, f64::max)
        };
        let coarse = worst_at(4.0);
        let fine = worst_at(16.0);
        assert!(fine < 5e-3, "flux error {fine} at the fine rule");
        assert!(
            fine < 0.35 * coarse,
            "no decay: coarse {coarse} vs fine {fine}"
        );
    }

    #[test]
    fn assembly_is_bit_deterministic() {
        let set = build(2, 7, GammaSpec::Value(-1.5), usize::MAX).unwrap();
        let params = vec![
            BasisParams::mapped_jacobi(-0.5, -0.5, 1, 0.9, 0.1).unwrap(),
            BasisParams::hermite(1.2, -0.3).unwrap(),
        ];
        let a = assemble_advection(&set, &params, &[1.0, 2.0]).unwrap();
        let b = assemble_advection(&set, &params, &[1.0, 2.0]).unwrap();
        for i in 0..set.len() {
            for j in 0..set.len() {
                assert_eq!(
                    a.matrix()[(i, j)].to_bits(),
                    b.matrix()[(i, j)].to_bits()
                );
            }
        }
    }

    #[test]
    fn mixed_family_mass_stays_orthonormal() {
        let set = build(2, 5, GammaSpec::Value(0.0), usize::MAX).unwrap();
        let params = vec![
            BasisParams::mapped_jacobi(0.0, 0.0, 0, 0.8, 0.0).unwrap(),
            BasisParams::hermite(0.9, 0.0).unwrap(),
        ];
        let mass = assemble_mass(&set, &params).unwrap();
        for i in 0..set.len() {
            for j in 0..set.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((mass.matrix()[(i, j)] - want).abs() < 1e-10);
            }
        }
    }
}
