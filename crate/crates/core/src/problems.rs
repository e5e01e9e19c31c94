//! Built-in benchmark problems.
//!
//! Each problem bundles its linear operator terms, pointwise reaction,
//! manufactured source, initial datum, reference solution, recommended
//! basis tuning and adaptation thresholds. The module also provides the
//! relative L2 error against the reference and a residual check that
//! drives the manufactured solution through the assembled operators.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::adaptive::AdaptiveConfig;
use crate::basis::BasisParams;
use crate::error::{CoreError, Result};
use crate::field::{analyze, SpectralField, TensorGrid};
use crate::operators::{
    assemble_advection, assemble_diffusion, assemble_fractional_cached, assemble_potential,
    fractional_apply_galerkin, NonlinearRhs, PointwiseFn,
};
use crate::sparse_index::{build, CrossIndexSet, GammaSpec};
use crate::specfun::{gamma_fn, hyp2f1, SeriesControl};

/// Space-time scalar law (x, t) -> value.
pub type SpaceTimeFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;
/// State law (t, x, u) -> value, in the same argument order as the
/// pointwise RHS closures of the operator module.
pub type StateFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

/// One constant-coefficient linear term on the equation's left side.
#[derive(Debug, Clone, PartialEq)]
pub enum TermSpec {
    /// v . grad u
    Advection { velocity: Vec<f64> },
    /// -nu Lap u
    Diffusion { nu: f64 },
    /// c |x|^2 u
    Potential { c: f64 },
    /// (-Lap)^{s/2} u
    Fractional { s: f64 },
}

/// A source contribution (-Lap)^{s/2} g(., t) with no usable closed
/// form: g is analyzed on a fixed reference basis and the fractional
/// form is applied in coefficient space; the transformed expansion is
/// cached per time stamp.
#[derive(Clone)]
pub struct FractionalSource {
    s: f64,
    factor: Arc<SpaceTimeFn>,
    params: Vec<BasisParams>,
    order: usize,
    gamma: GammaSpec,
    cache: Arc<Mutex<HashMap<u64, Arc<SpectralField>>>>,
}

impl FractionalSource {
    fn image(&self, t: f64) -> Result<Arc<SpectralField>> {
        let mut cache = self.cache.lock().expect("source cache lock");
        if let Some(hit) = cache.get(&t.to_bits()) {
            return Ok(hit.clone());
        }
        let set = build(self.params.len(), self.order, self.gamma, usize::MAX)?;
        let factor = self.factor.clone();
        let field = analyze(move |x| factor(x, t), &set, &self.params, 2.0)?;
        let coeffs = fractional_apply_galerkin(&field, self.s)?;
        let image = Arc::new(SpectralField::from_coeffs(
            set,
            self.params.clone(),
            coeffs,
        )?);
        if cache.len() >= 256 {
            cache.clear();
        }
        cache.insert(t.to_bits(), image.clone());
        Ok(image)
    }

    pub fn eval_at(&self, x: &[f64], t: f64) -> Result<f64> {
        self.image(t)?.eval_at(x)
    }
}

/// Right-hand-side forcing g(x, t).
#[derive(Clone)]
pub struct Source {
    pointwise: Arc<SpaceTimeFn>,
    fractional: Option<FractionalSource>,
}

/// A complete problem description: the equation
/// `d_t u + (linear terms) u + f(u) + flux = g` together with data,
/// reference solution and recommended numerical tuning.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub blurb: &'static str,
    pub dim: usize,
    pub terms: Vec<TermSpec>,
    /// Pointwise reaction f on the left side, arguments (t, x, u).
    pub reaction: Option<Arc<StateFn>>,
    /// One-dimensional aggregation flux d/dx (u K_u) on the left side,
    /// with K_u the antiderivative kernel of u.
    pub aggregation_flux: bool,
    pub source: Option<Source>,
    pub initial: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub analytic: Option<Arc<SpaceTimeFn>>,
    /// Recommended starting basis, one parameter set per dimension.
    pub params: Vec<BasisParams>,
    /// Recommended starting expansion order.
    pub order: usize,
    pub gamma: GammaSpec,
    /// Recommended final time.
    pub final_time: f64,
    pub adaptive: AdaptiveConfig,
}

impl ProblemSpec {
    /// True when the right-hand side depends on the state only through
    /// the assembled linear terms.
    pub fn is_linear(&self) -> bool {
        self.reaction.is_none() && !self.aggregation_flux
    }
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("terms", &self.terms)
            .field("order", &self.order)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

/// Names accepted by [`builtin`], in presentation order.
pub fn problem_names() -> &'static [&'static str] {
    &[
        "ex1",
        "ex2",
        "ex3",
        "ex4",
        "ex5",
        "ex1-hermite",
        "ex2-hermite",
        "ex5-hermite",
    ]
}

/// Constant in (-Lap)^s (1+|x|^2)^{-nu} =
/// c (1+|x|^2)^{-nu-s} 2F1(nu+s, -s; d/2; |x|^2/(1+|x|^2)).
fn inverse_power_constant(d: usize, nu: f64, s: f64) -> f64 {
    let d2 = d as f64 / 2.0;
    let g = |x: f64| gamma_fn(x).expect("gamma of a positive argument");
    4.0_f64.powf(s) * g(nu + s) * g(d2 + s) / (g(nu) * g(d2))
}

fn hyp(a: f64, b: f64, c: f64, w: f64) -> f64 {
    hyp2f1(a, b, c, w, SeriesControl::default()).unwrap_or(f64::NAN)
}

fn chebyshev_like(r: u8, beta: f64) -> BasisParams {
    BasisParams::mapped_jacobi(-0.5, -0.5, r, beta, 0.0).expect("valid mapped family")
}

/// 1D reaction-diffusion of fractional order 1/2 with an algebraically
/// decaying bump that spreads linearly in time.
fn spreading_bump(params: BasisParams, name: &'static str) -> ProblemSpec {
    let c_half = inverse_power_constant(1, 6.0, 0.5);
    let analytic = Arc::new(|x: &[f64], t: f64| {
        let td = 1.0 + t;
        td.powi(12) / (td * td + x[0] * x[0]).powi(6)
    });
    let source = move |x: &[f64], t: f64| {
        let td = 1.0 + t;
        let z2 = (x[0] / td) * (x[0] / td);
        let b = 1.0 + z2;
        // time derivative of the dilation, the cubic reaction, and the
        // half-Laplacian of (1+z^2)^{-6} in its hypergeometric form
        12.0 * z2 / (td * b.powi(7))
            + (b.powi(12) - 1.0) / b.powi(18)
            + c_half / td * b.powf(-6.5) * hyp(6.5, -0.5, 0.5, z2 / b)
    };
    let mut adaptive = AdaptiveConfig::defaults(1);
    adaptive.enable_move = false;
    ProblemSpec {
        name,
        blurb: "1D fractional reaction-diffusion, spreading algebraic bump",
        dim: 1,
        terms: vec![TermSpec::Fractional { s: 1.0 }],
        reaction: Some(Arc::new(|_t, _x, u| u * (1.0 - u * u))),
        aggregation_flux: false,
        source: Some(Source {
            pointwise: Arc::new(source),
            fractional: None,
        }),
        initial: Arc::new(|x: &[f64]| 1.0 / (1.0 + x[0] * x[0]).powi(6)),
        analytic: Some(analytic),
        params: vec![params],
        order: 50,
        gamma: GammaSpec::Value(0.0),
        final_time: 1.0,
        adaptive,
    }
}

/// 1D aggregation equation with drift and diffusion whose solution is a
/// traveling wave.
fn traveling_wave(params: BasisParams, name: &'static str) -> ProblemSpec {
    let profile = |y: f64| {
        let c = (y / 4.0).cosh();
        0.125 / (c * c)
    };
    let mut adaptive = AdaptiveConfig::defaults(1);
    adaptive.enable_order = false;
    adaptive.d_max = vec![0.2];
    ProblemSpec {
        name,
        blurb: "1D aggregation-drift-diffusion, traveling wave",
        dim: 1,
        terms: vec![
            TermSpec::Advection {
                velocity: vec![2.0],
            },
            TermSpec::Diffusion { nu: 0.5 },
        ],
        reaction: None,
        aggregation_flux: true,
        source: None,
        initial: Arc::new(move |x: &[f64]| profile(x[0])),
        analytic: Some(Arc::new(move |x: &[f64], t: f64| profile(x[0] - 2.0 * t))),
        params: vec![params],
        order: 50,
        gamma: GammaSpec::Value(0.0),
        final_time: 1.0,
        adaptive,
    }
}

/// 2D advection plus half-Laplacian with a logistic reaction; the bump
/// is carried along a fixed direction while it spreads.
fn advected_bump() -> ProblemSpec {
    let v = [(PI / 3.0).cos(), (PI / 3.0).sin()];
    let c_half = inverse_power_constant(2, 7.0, 0.5);
    let bump = move |x: &[f64], t: f64| {
        let td = 1.0 + t;
        let dx = x[0] - v[0] * t;
        let dy = x[1] - v[1] * t;
        let z2 = (dx * dx + dy * dy) / (td * td);
        1.0 / ((1.0 + z2).powi(7) * td)
    };
    let source = move |x: &[f64], t: f64| {
        let td = 1.0 + t;
        let dx = x[0] - v[0] * t;
        let dy = x[1] - v[1] * t;
        let z2 = (dx * dx + dy * dy) / (td * td);
        let b = 1.0 + z2;
        let lin = (14.0 * z2 / b.powi(8) - 1.0 / b.powi(7)
            + c_half * b.powf(-7.5) * hyp(7.5, -0.5, 1.0, z2 / b))
            / (td * td);
        let u = 1.0 / (b.powi(7) * td);
        lin + u * (1.0 - u)
    };
    let mut adaptive = AdaptiveConfig::defaults(2);
    adaptive.enable_order = false;
    adaptive.d_max = vec![0.06, 0.09];
    ProblemSpec {
        name: "ex3",
        blurb: "2D fractional advection-reaction, drifting bump",
        dim: 2,
        terms: vec![
            TermSpec::Advection {
                velocity: v.to_vec(),
            },
            TermSpec::Fractional { s: 1.0 },
        ],
        reaction: Some(Arc::new(|_t, _x, u| u * (1.0 - u))),
        aggregation_flux: false,
        source: Some(Source {
            pointwise: Arc::new(source),
            fractional: None,
        }),
        initial: Arc::new(move |x: &[f64]| {
            let z2 = x[0] * x[0] + x[1] * x[1];
            1.0 / (1.0 + z2).powi(7)
        }),
        analytic: Some(Arc::new(bump)),
        params: vec![chebyshev_like(1, 0.9), chebyshev_like(1, 0.9)],
        order: 30,
        gamma: GammaSpec::Value(-5.0),
        final_time: 1.0,
        adaptive,
    }
}

/// 3D diffusion of fractional order 3/4 with an oscillatory Gaussian
/// that widens over time. The source's own fractional term has no
/// closed form and is evaluated spectrally on the recommended basis.
fn oscillatory_gaussian() -> ProblemSpec {
    let wave = |x: &[f64]| x[0] + 1.2 * x[1] + 0.5 * x[2];
    let u = move |x: &[f64], t: f64| {
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        wave(x).sin() * (3.0 * t + 1.0).powf(-1.5) * (-r2 / (6.0 * t + 2.0)).exp()
    };
    let params = vec![
        chebyshev_like(0, 0.4),
        chebyshev_like(0, 0.37),
        chebyshev_like(0, 0.3),
    ];
    let mut adaptive = AdaptiveConfig::defaults(3);
    adaptive.enable_move = false;
    adaptive.n_max = 5;
    adaptive.sigma = 1.1;
    ProblemSpec {
        name: "ex4",
        blurb: "3D fractional diffusion, widening oscillatory Gaussian",
        dim: 3,
        terms: vec![TermSpec::Fractional { s: 1.5 }],
        reaction: None,
        aggregation_flux: false,
        source: Some(Source {
            pointwise: Arc::new(move |x: &[f64], t: f64| {
                let r2 = x.iter().map(|v| v * v).sum::<f64>();
                let w = 6.0 * t + 2.0;
                u(x, t) * (6.0 * r2 / (w * w) - 9.0 / w)
            }),
            fractional: Some(FractionalSource {
                s: 1.5,
                factor: Arc::new(u),
                params: params.clone(),
                order: 25,
                gamma: GammaSpec::Value(-10.0),
                cache: Arc::new(Mutex::new(HashMap::new())),
            }),
        }),
        initial: Arc::new(move |x: &[f64]| {
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            wave(x).sin() * (-r2 / 2.0).exp()
        }),
        analytic: Some(Arc::new(u)),
        params,
        order: 25,
        gamma: GammaSpec::Value(-10.0),
        final_time: 1.0,
        adaptive,
    }
}

/// 4D diffusion in a quadratic trap with a cosine-modulated Gaussian
/// that flattens over time.
fn harmonic_trap() -> ProblemSpec {
    let u = |x: &[f64], t: f64| {
        let td = 1.0 + t;
        let p = x.iter().sum::<f64>();
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        p.cos() / (td * td) * (-r2 / td).exp()
    };
    let source = move |x: &[f64], t: f64| {
        let td = 1.0 + t;
        let p = x.iter().sum::<f64>();
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        let h = (-r2 / td).exp() / (td * td);
        h * (p.cos() * (2.0 + 2.0 / td + r2 * (1.0 - 1.0 / (td * td)))
            - 2.0 * p * p.sin() / td)
    };
    let mut adaptive = AdaptiveConfig::defaults(4);
    adaptive.enable_move = false;
    adaptive.n_max = 5;
    ProblemSpec {
        name: "ex5",
        blurb: "4D diffusion in a quadratic trap, flattening Gaussian",
        dim: 4,
        terms: vec![
            TermSpec::Diffusion { nu: 0.5 },
            TermSpec::Potential { c: 1.0 },
        ],
        reaction: None,
        aggregation_flux: false,
        source: Some(Source {
            pointwise: Arc::new(source),
            fractional: None,
        }),
        initial: Arc::new(|x: &[f64]| {
            let p = x.iter().sum::<f64>();
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            p.cos() * (-r2).exp()
        }),
        analytic: Some(Arc::new(u)),
        params: vec![BasisParams::hermite(1.05, 0.0).expect("valid width"); 4],
        order: 11,
        gamma: GammaSpec::Value(-3.0),
        final_time: 1.0,
        adaptive,
    }
}

/// Looks up a problem by registry name. The `-hermite` variants run the
/// same equations on the Gaussian-weighted family for comparison.
pub fn builtin(name: &str) -> Result<ProblemSpec> {
    match name {
        "ex1" => Ok(spreading_bump(chebyshev_like(1, 0.6), "ex1")),
        "ex1-hermite" => Ok(spreading_bump(
            BasisParams::hermite(2.5, 0.0)?,
            "ex1-hermite",
        )),
        "ex2" => Ok(traveling_wave(
            BasisParams::mapped_jacobi(0.0, 0.0, 1, 0.4, 0.0)?,
            "ex2",
        )),
        "ex2-hermite" => Ok(traveling_wave(
            BasisParams::hermite(1.2, 0.0)?,
            "ex2-hermite",
        )),
        "ex3" => Ok(advected_bump()),
        "ex4" => Ok(oscillatory_gaussian()),
        "ex5" => Ok(harmonic_trap()),
        "ex5-hermite" => {
            let mut spec = harmonic_trap();
            spec.name = "ex5-hermite";
            Ok(spec)
        }
        other => Err(CoreError::Domain {
            context: "problem registry",
            message: format!(
                "unknown problem {other:?}; valid names are {}",
                problem_names().join(", ")
            ),
        }),
    }
}

/// Combined Galerkin matrix of the problem's linear terms, with the
/// left-hand-side sign convention: the semidiscrete system reads
/// dc/dt = -A c + F(c, t).
pub fn assemble_linear(
    spec: &ProblemSpec,
    set: &CrossIndexSet,
    params: &[BasisParams],
) -> Result<DMatrix<f64>> {
    let l = set.len();
    let mut acc = DMatrix::zeros(l, l);
    for term in &spec.terms {
        let op = match term {
            TermSpec::Advection { velocity } => assemble_advection(set, params, velocity)?,
            TermSpec::Diffusion { nu } => assemble_diffusion(set, params, *nu)?,
            TermSpec::Potential { c } => assemble_potential(set, params, *c)?,
            TermSpec::Fractional { s } => assemble_fractional_cached(set, params, *s)?,
        };
        acc += op.matrix();
    }
    Ok(acc)
}

struct FractionalRhsTerm {
    s: f64,
    factor: Arc<SpaceTimeFn>,
    set: CrossIndexSet,
    params: Vec<BasisParams>,
    oversample: f64,
    cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl FractionalRhsTerm {
    fn coeffs(&self, t: f64) -> Result<Arc<Vec<f64>>> {
        let mut cache = self.cache.lock().expect("rhs cache lock");
        if let Some(hit) = cache.get(&t.to_bits()) {
            return Ok(hit.clone());
        }
        let factor = self.factor.clone();
        let field = analyze(move |x| factor(x, t), &self.set, &self.params, self.oversample)?;
        let coeffs = Arc::new(fractional_apply_galerkin(&field, self.s)?);
        if cache.len() >= 256 {
            cache.clear();
        }
        cache.insert(t.to_bits(), coeffs.clone());
        Ok(coeffs)
    }
}

/// Projected right-hand side of the semidiscrete system on a concrete
/// basis: reaction and source projections, the aggregation flux where
/// the problem has one, and any spectrally evaluated source part.
pub struct ProblemRhs {
    base: Option<NonlinearRhs>,
    len: usize,
    fractional: Option<FractionalRhsTerm>,
}

impl ProblemRhs {
    /// Coefficients of F(c, t).
    pub fn eval(&self, coeffs: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = match &self.base {
            Some(rhs) => rhs.eval(coeffs, t)?,
            None => vec![0.0; self.len],
        };
        if let Some(term) = &self.fractional {
            let image = term.coeffs(t)?;
            for (o, v) in out.iter_mut().zip(image.iter()) {
                *o += v;
            }
        }
        Ok(out)
    }
}

/// Builds the forcing evaluator for a problem on the given basis.
pub fn build_rhs(
    spec: &ProblemSpec,
    set: &CrossIndexSet,
    params: &[BasisParams],
    oversample: f64,
) -> Result<ProblemRhs> {
    if spec.dim != set.d() {
        return Err(CoreError::Domain {
            context: "problem RHS",
            message: format!("{}-dimensional set for problem {}", set.d(), spec.name),
        });
    }
    let reaction = spec.reaction.clone();
    let source_pt = spec.source.as_ref().map(|s| s.pointwise.clone());
    let base = if reaction.is_some() || source_pt.is_some() || spec.aggregation_flux {
        let f: PointwiseFn = Box::new(move |t, x, u| {
            let mut v = 0.0;
            if let Some(r) = &reaction {
                v -= r(t, x, u);
            }
            if let Some(g) = &source_pt {
                v += g(x, t);
            }
            v
        });
        Some(if spec.aggregation_flux {
            NonlinearRhs::chemotaxis(set, params, oversample, f)?
        } else {
            NonlinearRhs::pointwise(set, params, oversample, f)?
        })
    } else {
        None
    };
    let fractional = spec
        .source
        .as_ref()
        .and_then(|s| s.fractional.as_ref())
        .map(|fs| FractionalRhsTerm {
            s: fs.s,
            factor: fs.factor.clone(),
            set: set.clone(),
            params: params.to_vec(),
            oversample,
            cache: Mutex::new(HashMap::new()),
        });
    Ok(ProblemRhs {
        base,
        len: set.len(),
        fractional,
    })
}

/// Analyzes the initial datum on the given basis.
pub fn initial_field(
    spec: &ProblemSpec,
    set: &CrossIndexSet,
    params: &[BasisParams],
    oversample: f64,
) -> Result<SpectralField> {
    let f = spec.initial.clone();
    analyze(move |x| f(x), set, params, oversample)
}

/// Evaluates the source term at one point.
pub fn source_eval(spec: &ProblemSpec, x: &[f64], t: f64) -> Result<f64> {
    let src = spec.source.as_ref().ok_or(CoreError::Domain {
        context: "source evaluation",
        message: format!("problem {} has no source term", spec.name),
    })?;
    if x.len() != spec.dim {
        return Err(CoreError::Domain {
            context: "source evaluation",
            message: format!("{}-dimensional point for problem {}", x.len(), spec.name),
        });
    }
    let mut v = (src.pointwise)(x, t);
    if let Some(fr) = &src.fractional {
        v += fr.eval_at(x, t)?;
    }
    if !v.is_finite() {
        return Err(CoreError::NonFiniteSample { coords: x.to_vec() });
    }
    Ok(v)
}

/// Maximum over the grid of |d_t u + (operators) u + f(u) - g| with u
/// the reference solution analyzed at expansion order `order`, operator
/// actions taken through the assembled machinery, and the time
/// derivative by central differences.
pub fn residual_check(
    spec: &ProblemSpec,
    grid: &[Vec<f64>],
    t: f64,
    order: usize,
) -> Result<f64> {
    let reference = spec.analytic.clone().ok_or(CoreError::Domain {
        context: "residual check",
        message: format!("problem {} has no reference solution", spec.name),
    })?;
    let set = build(spec.dim, order, spec.gamma, usize::MAX)?;
    let params = spec.params.clone();
    let at_t = reference.clone();
    let field = analyze(move |x| at_t(x, t), &set, &params, 2.0)?;

    // Coefficients of the projected left-side operator action, one term
    // at a time so only a single dense form is alive at once.
    let mut op_c = vec![0.0; set.len()];
    for term in &spec.terms {
        let image = match term {
            TermSpec::Fractional { s } => fractional_apply_galerkin(&field, *s)?,
            TermSpec::Advection { velocity } => {
                assemble_advection(&set, &params, velocity)?.apply(field.coeffs())
            }
            TermSpec::Diffusion { nu } => {
                assemble_diffusion(&set, &params, *nu)?.apply(field.coeffs())
            }
            TermSpec::Potential { c } => {
                assemble_potential(&set, &params, *c)?.apply(field.coeffs())
            }
        };
        for (a, b) in op_c.iter_mut().zip(&image) {
            *a += b;
        }
    }
    if spec.aggregation_flux {
        let flux = NonlinearRhs::chemotaxis(&set, &params, 2.0, Box::new(|_, _, _| 0.0))?;
        let rhs = flux.eval(field.coeffs(), t)?;
        // The flux evaluator carries the right-hand-side sign.
        for (a, b) in op_c.iter_mut().zip(&rhs) {
            *a -= b;
        }
    }
    let image = SpectralField::from_coeffs(set, params, op_c)?;

    let h = 1e-6;
    let mut worst = 0.0_f64;
    for p in grid {
        if p.len() != spec.dim {
            return Err(CoreError::Domain {
                context: "residual check",
                message: format!("{}-dimensional grid point", p.len()),
            });
        }
        let dudt = (reference(p, t + h) - reference(p, t - h)) / (2.0 * h);
        let mut r = dudt + image.eval_at(p)?;
        if let Some(f) = &spec.reaction {
            r += f(t, p, reference(p, t));
        }
        if spec.source.is_some() {
            r -= source_eval(spec, p, t)?;
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Relative L2 error of a field against the reference solution at time
/// t, with both norms taken by quadrature at twice the field's order.
pub fn relative_error(field: &SpectralField, spec: &ProblemSpec, t: f64) -> Result<f64> {
    let reference = spec.analytic.as_ref().ok_or(CoreError::Domain {
        context: "relative error",
        message: format!("problem {} has no reference solution", spec.name),
    })?;
    let grid = TensorGrid::new(field.set(), field.params(), 2.0)?;
    let approx = field.grid_values(&grid, None);
    let exact = grid.sample(|x| reference(x, t))?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (flat, (a, e)) in approx.iter().zip(&exact).enumerate() {
        let w = grid.weight(flat);
        num += w * (a - e) * (a - e);
        den += w * e * e;
    }
    if den == 0.0 {
        return Err(CoreError::Domain {
            context: "relative error",
            message: "reference norm vanishes on the quadrature grid".into(),
        });
    }
    Ok((num / den).sqrt())
}
