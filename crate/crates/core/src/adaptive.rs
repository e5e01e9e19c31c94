//! Runtime adaptation of the basis: moving (displacement), scaling
//! (width), and order adjustment, driven by coefficient-space frequency
//! indicators and quadrature-space exterior indicators.
//!
//! The three techniques follow their reference listings step for step,
//! including the quirks: probes during moving always reproject the
//! original field, scaling descends by chained reprojection and rewrites
//! its own reference on the way down, and the order reference is
//! refreshed unconditionally at the end of every order step.

use std::collections::HashMap;

use crate::basis::{quad_rule, value_and_deriv_tables, BasisParams};
use crate::error::{CoreError, Result};
use crate::field::SpectralField;
use crate::sparse_index::build;

/// Which truncation shape the frequency indicators measure against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorMode {
    /// Subsets shaped like the cross itself (scaled cross, lowered order).
    Hyperbolic,
    /// Plain coordinate cutoffs n_i <= (2/3) N.
    DirectTruncation,
}

/// Thresholds and switches for the adaptation pipeline.
#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    /// Smallest displacement change.
    pub delta: f64,
    /// Per-dimension cap on the displacement change per call.
    pub d_max: Vec<f64>,
    /// Moving activation threshold (relative to the reference).
    pub mu: f64,
    /// Scaling ratio, strictly inside (0, 1).
    pub q_ratio: f64,
    /// Scaling activation threshold.
    pub nu: f64,
    /// Maximum order increase per call.
    pub n_max: usize,
    /// Initial order threshold; the running threshold starts here.
    pub eta0: f64,
    /// Multiplier applied to the running threshold after an increase.
    pub sigma: f64,
    /// Hard cap on the index-set size when the order grows.
    pub budget: usize,
    pub indicator_mode: IndicatorMode,
    pub enable_move: bool,
    pub enable_scale: bool,
    pub enable_order: bool,
}

impl AdaptiveConfig {
    /// Conservative defaults for a d-dimensional problem.
    pub fn defaults(d: usize) -> Self {
        AdaptiveConfig {
            delta: 0.01,
            d_max: vec![0.1; d],
            mu: 1.0005,
            q_ratio: 0.99,
            nu: 1.01,
            n_max: 3,
            eta0: 1.2,
            sigma: 1.2,
            budget: usize::MAX,
            indicator_mode: IndicatorMode::Hyperbolic,
            enable_move: true,
            enable_scale: true,
            enable_order: true,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |message: String| {
            Err(CoreError::Domain {
                context: "adaptive config",
                message,
            })
        };
        if !(self.q_ratio > 0.0 && self.q_ratio < 1.0) {
            return bad(format!("q = {} must lie in (0, 1)", self.q_ratio));
        }
        if self.mu < 1.0 || self.nu < 1.0 || self.eta0 < 1.0 || self.sigma < 1.0 {
            return bad("thresholds mu, nu, eta0, sigma must be >= 1".into());
        }
        if self.delta <= 0.0 {
            return bad(format!("delta = {} must be positive", self.delta));
        }
        if self.d_max.len() != d {
            return bad(format!(
                "d_max has {} entries for a {d}-dimensional problem",
                self.d_max.len()
            ));
        }
        Ok(())
    }
}

/// Reference indicator values the thresholds compare against, plus the
/// running order threshold. Initialized from the first adapted field.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    pub f0: Vec<f64>,
    pub fp0: f64,
    pub e0_l: Vec<f64>,
    pub e0_r: Vec<f64>,
    pub eta: f64,
    initialized: bool,
}

impl AdaptiveState {
    pub fn new() -> Self {
        AdaptiveState {
            f0: Vec::new(),
            fp0: 0.0,
            e0_l: Vec::new(),
            e0_r: Vec::new(),
            eta: 0.0,
            initialized: false,
        }
    }

    /// References taken from the field itself (the bootstrap rule).
    pub fn from_field(field: &SpectralField, config: &AdaptiveConfig) -> Result<Self> {
        let mut s = AdaptiveState::new();
        s.ensure(field, config)?;
        Ok(s)
    }

    fn ensure(&mut self, field: &SpectralField, config: &AdaptiveConfig) -> Result<()> {
        if self.initialized {
            return Ok(());
        }
        let d = field.d();
        self.f0 = (0..d)
            .map(|i| freq_indicator_in_mode(field, i, config.indicator_mode))
            .collect::<Result<_>>()?;
        self.fp0 = order_indicator_in_mode(field, config.indicator_mode)?;
        self.e0_l = Vec::with_capacity(d);
        self.e0_r = Vec::with_capacity(d);
        for i in 0..d {
            let (l, r) = exterior_indicators(field, i)?;
            self.e0_l.push(l);
            self.e0_r.push(r);
        }
        self.eta = config.eta0;
        self.initialized = true;
        Ok(())
    }
}

impl Default for AdaptiveState {
    fn default() -> Self {
        Self::new()
    }
}

fn dropped_ratio(field: &SpectralField, kept: &[usize]) -> Result<f64> {
    let coeffs = field.coeffs();
    let total: f64 = coeffs.iter().map(|c| c * c).sum();
    if total == 0.0 {
        return Err(CoreError::Domain {
            context: "frequency indicator",
            message: "undefined for the zero field".into(),
        });
    }
    let inside: f64 = kept.iter().map(|&p| coeffs[p] * coeffs[p]).sum();
    Ok(((total - inside).max(0.0) / total).sqrt())
}

/// Fraction of the field's norm carried by modes outside the scaled
/// cross of dimension `dim` (cross-shaped subset).
pub fn freq_indicator(field: &SpectralField, dim: usize) -> Result<f64> {
    dropped_ratio(field, &field.set().scaling_subset(dim))
}

/// As `freq_indicator` with the plain coordinate cutoff subset.
pub fn dt_freq_indicator(field: &SpectralField, dim: usize) -> Result<f64> {
    dropped_ratio(field, &field.set().dt_scaling_subset(dim))
}

/// Fraction of the field's norm outside the cross of order (2/3) N.
pub fn order_indicator(field: &SpectralField) -> Result<f64> {
    dropped_ratio(field, &field.set().order_subset())
}

/// As `order_indicator` with the coordinate-cutoff subset.
pub fn dt_order_indicator(field: &SpectralField) -> Result<f64> {
    dropped_ratio(field, &field.set().dt_order_subset())
}

pub fn freq_indicator_in_mode(
    field: &SpectralField,
    dim: usize,
    mode: IndicatorMode,
) -> Result<f64> {
    match mode {
        IndicatorMode::Hyperbolic => freq_indicator(field, dim),
        IndicatorMode::DirectTruncation => dt_freq_indicator(field, dim),
    }
}

pub fn order_indicator_in_mode(field: &SpectralField, mode: IndicatorMode) -> Result<f64> {
    match mode {
        IndicatorMode::Hyperbolic => order_indicator(field),
        IndicatorMode::DirectTruncation => dt_order_indicator(field),
    }
}

/// Fraction of the derivative's L2 mass lying left of node [N/3] and
/// right of node [(2N+2)/3] of the (N+1)-point rule in dimension `dim`
/// (zero-based ascending nodes). Both norms use a 4(N+1)-point rule with
/// the mask applied nodewise; a vanishing derivative gives (0, 0).
pub fn exterior_indicators(field: &SpectralField, dim: usize) -> Result<(f64, f64)> {
    let set = field.set();
    let n_ord = set.order();
    let params = &field.params()[dim];
    let marks = quad_rule(n_ord + 1, params)?;
    let x_l = marks.nodes[n_ord / 3];
    let x_r = marks.nodes[(2 * n_ord + 2) / 3];
    let fine = quad_rule(4 * (n_ord + 1), params)?;
    let k = fine.nodes.len();

    let max_entry = set.iter().map(|nt| nt[dim]).max().unwrap_or(0);
    let (_, ders) = value_and_deriv_tables(params, max_entry + 1, &fine.nodes);

    // The derivative hits only dimension `dim`; the remaining factors are
    // orthonormal, so the squared mass splits into one 1D integral per
    // complementary index group.
    let mut groups: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    for (pos, nt) in set.iter().enumerate() {
        let c = field.coeffs()[pos];
        if c == 0.0 {
            continue;
        }
        let mut key = nt.to_vec();
        key.remove(dim);
        let row = ders.row(nt[dim]);
        let acc = groups.entry(key).or_insert_with(|| vec![0.0; k]);
        for (a, r) in acc.iter_mut().zip(row) {
            *a += c * r;
        }
    }

    let mut total = 0.0;
    let mut left = 0.0;
    let mut right = 0.0;
    for (j, (&x, &w)) in fine.nodes.iter().zip(&fine.weights).enumerate() {
        let mut g = 0.0;
        for acc in groups.values() {
            g += acc[j] * acc[j];
        }
        let mass = w * g;
        total += mass;
        if x < x_l {
            left += mass;
        }
        if x > x_r {
            right += mass;
        }
    }
    if total == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok(((left / total).sqrt(), (right / total).sqrt()))
}

fn params_with_x0(params: &[BasisParams], dim: usize, x0: f64) -> Vec<BasisParams> {
    let mut p = params.to_vec();
    p[dim] = p[dim].with_x0(x0);
    p
}

fn params_with_beta(params: &[BasisParams], dim: usize, beta: f64) -> Vec<BasisParams> {
    let mut p = params.to_vec();
    p[dim] = p[dim].with_beta(beta);
    p
}

/// Displacement adaptation. Per dimension, walks a left and a right
/// boundary candidate outward by `delta` while the matching exterior
/// indicator exceeds mu times its reference and the walked distance
/// stays within d_max; every probe reprojects the original field. The
/// combined displacement is x_R + x_L - x0; references refresh from the
/// moved field in every dimension that changed.
pub fn move_step(
    field: &SpectralField,
    config: &AdaptiveConfig,
    state: &mut AdaptiveState,
) -> Result<SpectralField> {
    state.ensure(field, config)?;
    let d = field.d();
    let set = field.set();
    let mut new_x0 = Vec::with_capacity(d);
    for i in 0..d {
        let x0_i = field.params()[i].x0;

        let (mut e_l, _) = exterior_indicators(field, i)?;
        let mut x_l = x0_i;
        while e_l > config.mu * state.e0_l[i] && (x_l - x0_i).abs() <= config.d_max[i] {
            x_l -= config.delta;
            let probe = field.reproject(&params_with_x0(field.params(), i, x_l), set)?;
            e_l = exterior_indicators(&probe, i)?.0;
        }

        let (_, mut e_r) = exterior_indicators(field, i)?;
        let mut x_r = x0_i;
        while e_r > config.mu * state.e0_r[i] && (x_r - x0_i).abs() <= config.d_max[i] {
            x_r += config.delta;
            let probe = field.reproject(&params_with_x0(field.params(), i, x_r), set)?;
            e_r = exterior_indicators(&probe, i)?.1;
        }

        new_x0.push(x_r + x_l - x0_i);
    }

    let mut params = field.params().to_vec();
    for (i, p) in params.iter_mut().enumerate() {
        *p = p.with_x0(new_x0[i]);
    }
    let moved = field.reproject(&params, set)?;
    for i in 0..d {
        if new_x0[i] != field.params()[i].x0 {
            let (l, r) = exterior_indicators(&moved, i)?;
            state.e0_l[i] = l;
            state.e0_r[i] = r;
        }
    }
    Ok(moved)
}

/// Width adaptation. Per dimension, when the frequency indicator
/// exceeds nu times its reference, probes a contraction by q; if that
/// helps, keeps contracting while the indicator falls (chaining each
/// probe off the previous one and dragging the reference along, as the
/// listing does), otherwise runs the mirrored expansion loop. The final
/// field is the original reprojected onto the accepted widths.
pub fn scale_step(
    field: &SpectralField,
    config: &AdaptiveConfig,
    state: &mut AdaptiveState,
) -> Result<SpectralField> {
    state.ensure(field, config)?;
    let d = field.d();
    let set = field.set();
    let mode = config.indicator_mode;
    let q = config.q_ratio;
    let mut new_beta = Vec::with_capacity(d);
    for i in 0..d {
        let beta_i = field.params()[i].beta;
        let mut f_i = freq_indicator_in_mode(field, i, mode)?;
        if f_i <= config.nu * state.f0[i] {
            new_beta.push(beta_i);
            continue;
        }
        let mut accepted = beta_i;
        let mut probe = field.reproject(&params_with_beta(field.params(), i, beta_i * q), set)?;
        let mut f_probe = freq_indicator_in_mode(&probe, i, mode)?;
        if f_probe < f_i {
            while f_probe < f_i {
                accepted *= q;
                state.f0[i] = f_i;
                f_i = f_probe;
                probe =
                    probe.reproject(&params_with_beta(probe.params(), i, accepted * q), set)?;
                f_probe = freq_indicator_in_mode(&probe, i, mode)?;
            }
        } else {
            probe = field.reproject(&params_with_beta(field.params(), i, beta_i / q), set)?;
            f_probe = freq_indicator_in_mode(&probe, i, mode)?;
            while f_probe < f_i {
                accepted /= q;
                state.f0[i] = f_i;
                f_i = f_probe;
                probe =
                    probe.reproject(&params_with_beta(probe.params(), i, accepted / q), set)?;
                f_probe = freq_indicator_in_mode(&probe, i, mode)?;
            }
        }
        new_beta.push(accepted);
    }

    let mut params = field.params().to_vec();
    for (i, p) in params.iter_mut().enumerate() {
        *p = p.with_beta(new_beta[i]);
    }
    field.reproject(&params, set)
}

/// Order adaptation. Raises the order one step at a time while the
/// order indicator exceeds eta times its reference (bounded by n_max
/// and the set budget), or lowers it under the hysteresis band; the
/// reference is rewritten with the final indicator either way, and the
/// running threshold stiffens by sigma after any increase.
pub fn order_step(
    field: &SpectralField,
    config: &AdaptiveConfig,
    state: &mut AdaptiveState,
) -> Result<SpectralField> {
    state.ensure(field, config)?;
    let set = field.set();
    let (d, n, gamma) = (set.d(), set.order(), set.gamma());
    let mode = config.indicator_mode;
    let mut f_p = order_indicator_in_mode(field, mode)?;
    let mut n_new = n;
    if f_p > state.eta * state.fp0 {
        while f_p > state.eta * state.fp0 && n_new < n + config.n_max {
            n_new += 1;
            let bigger = build(d, n_new, gamma, config.budget)?;
            let probe = field.reproject(field.params(), &bigger)?;
            f_p = order_indicator_in_mode(&probe, mode)?;
        }
    } else if f_p < state.fp0 / config.eta0 {
        while f_p < state.fp0 && n_new > 0 {
            n_new -= 1;
            let smaller = build(d, n_new, gamma, config.budget)?;
            let probe = field.reproject(field.params(), &smaller)?;
            f_p = order_indicator_in_mode(&probe, mode)?;
        }
    }
    state.fp0 = f_p;
    if n_new > n {
        state.eta *= config.sigma;
    }
    if n_new == n {
        return Ok(field.clone());
    }
    let final_set = build(d, n_new, gamma, config.budget)?;
    field.reproject(field.params(), &final_set)
}

/// Full pipeline in flow-chart order: move, scale, order, each feeding
/// the next. References bootstrap from the incoming field on the first
/// call. Disabled stages pass the field through untouched.
pub fn adapt(
    field: &SpectralField,
    config: &AdaptiveConfig,
    state: &mut AdaptiveState,
) -> Result<SpectralField> {
    config.validate(field.d())?;
    state.ensure(field, config)?;
    let mut current = field.clone();
    if config.enable_move {
        current = move_step(&current, config, state)?;
    }
    if config.enable_scale {
        current = scale_step(&current, config, state)?;
    }
    if config.enable_order {
        current = order_step(&current, config, state)?;
    }
    Ok(current)
}
