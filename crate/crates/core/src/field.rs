//! Spectral fields over a hyperbolic cross: transforms, evaluation,
//! norms, derivatives, and reprojection between bases.
//!
//! A field is a coefficient vector aligned with the dictionary order of
//! its index set, one basis parameter block per dimension. The forward
//! transform (analyze) integrates against the orthonormal basis with a
//! tensor Gauss rule, the backward transform (synthesize) evaluates the
//! expansion. Both factor dimension by dimension over rectangular
//! staging arrays, so the cost is O(Q^d N) rather than the naive
//! O(Q^d |set| d).

use std::io::{BufRead, Write};

use crate::basis::{
    quad_rule, value_and_deriv_tables, BasisFamily, BasisParams, BasisTable, QuadratureRule,
};
use crate::error::{CoreError, Result};
use crate::sparse_index::{self, CrossIndexSet, GammaSpec};

/// Tensor quadrature grid with per-dimension basis tables cached for
/// the transforms.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    rules: Vec<QuadratureRule>,
    values: Vec<BasisTable>,
    derivs: Vec<BasisTable>,
}

impl TensorGrid {
    /// Grid sized for transforms of fields over `set`: Q = ceil(oversample*(N+1))
    /// points per dimension, tables up to the largest entry used per dimension.
    pub fn new(set: &CrossIndexSet, params: &[BasisParams], oversample: f64) -> Result<Self> {
        if oversample < 1.0 || !oversample.is_finite() {
            return Err(CoreError::Domain {
                context: "TensorGrid::new",
                message: format!("oversample factor {oversample} must be at least 1"),
            });
        }
        let q = (oversample * (set.order() as f64 + 1.0)).ceil() as usize;
        Self::with_points(set, params, q)
    }

    /// Grid with an explicit per-dimension point count.
    pub fn with_points(set: &CrossIndexSet, params: &[BasisParams], q: usize) -> Result<Self> {
        check_params(set, params)?;
        let mut rules = Vec::with_capacity(params.len());
        let mut values = Vec::with_capacity(params.len());
        let mut derivs = Vec::with_capacity(params.len());
        for (i, p) in params.iter().enumerate() {
            let rule = quad_rule(q, p)?;
            let m = max_entry_in(set, i);
            let (v, d) = value_and_deriv_tables(p, m + 1, &rule.nodes);
            rules.push(rule);
            values.push(v);
            derivs.push(d);
        }
        Ok(TensorGrid {
            rules,
            values,
            derivs,
        })
    }

    pub fn dims(&self) -> usize {
        self.rules.len()
    }

    pub fn rule(&self, i: usize) -> &QuadratureRule {
        &self.rules[i]
    }

    pub fn value_table(&self, i: usize) -> &BasisTable {
        &self.values[i]
    }

    pub fn deriv_table(&self, i: usize) -> &BasisTable {
        &self.derivs[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.rules.iter().map(|r| r.size()).collect()
    }

    pub fn total_points(&self) -> usize {
        self.rules.iter().map(|r| r.size()).product()
    }

    /// Coordinates of the flat-indexed node (first dimension slowest).
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let d = self.dims();
        let mut out = vec![0.0; d];
        let mut rem = flat;
        for i in (0..d).rev() {
            let q = self.rules[i].size();
            out[i] = self.rules[i].nodes[rem % q];
            rem /= q;
        }
        out
    }

    /// Product quadrature weight of the flat-indexed node.
    pub fn weight(&self, flat: usize) -> f64 {
        let d = self.dims();
        let mut w = 1.0;
        let mut rem = flat;
        for i in (0..d).rev() {
            let q = self.rules[i].size();
            w *= self.rules[i].weights[rem % q];
            rem /= q;
        }
        w
    }

    /// Samples a function on every grid node, rejecting non-finite values.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        let total = self.total_points();
        let d = self.dims();
        let sizes = self.sizes();
        let mut out = Vec::with_capacity(total);
        let mut coords = vec![0.0; d];
        let mut counters = vec![0usize; d];
        for i in 0..d {
            coords[i] = self.rules[i].nodes[0];
        }
        for _ in 0..total {
            let v = f(&coords);
            if !v.is_finite() {
                return Err(CoreError::NonFiniteSample {
                    coords: coords.clone(),
                });
            }
            out.push(v);
            // Odometer increment, last dimension fastest.
            for i in (0..d).rev() {
                counters[i] += 1;
                if counters[i] < sizes[i] {
                    coords[i] = self.rules[i].nodes[counters[i]];
                    break;
                }
                counters[i] = 0;
                coords[i] = self.rules[i].nodes[0];
            }
        }
        Ok(out)
    }
}

/// A truncated spectral expansion: coefficients over an index set with
/// one basis parameter block per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    set: CrossIndexSet,
    params: Vec<BasisParams>,
    coeffs: Vec<f64>,
}

fn check_params(set: &CrossIndexSet, params: &[BasisParams]) -> Result<()> {
    if params.len() != set.d() {
        return Err(CoreError::Domain {
            context: "field",
            message: format!(
                "got {} parameter blocks for a {}-dimensional set",
                params.len(),
                set.d()
            ),
        });
    }
    let family = params[0].family;
    for p in params {
        p.validate()?;
        if p.family != family {
            return Err(CoreError::Domain {
                context: "field",
                message: "all dimensions must share one basis family".into(),
            });
        }
    }
    Ok(())
}

fn max_entry_in(set: &CrossIndexSet, dim: usize) -> usize {
    set.iter().map(|nt| nt[dim]).max().unwrap_or(0)
}

/// Contracts `data` (flat, row-major over `shape`) along `dim` with the
/// row-major `rows x shape[dim]` matrix, replacing that axis by `rows`.
fn contract_dim(shape: &mut Vec<usize>, data: &[f64], dim: usize, mat: &[f64], rows: usize) -> Vec<f64> {
    let cols = shape[dim];
    let inner: usize = shape[dim + 1..].iter().product();
    let outer: usize = shape[..dim].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let in_base = o * cols * inner;
        let out_base = o * rows * inner;
        for a in 0..rows {
            let row = &mat[a * cols..(a + 1) * cols];
            let out_row = &mut out[out_base + a * inner..out_base + (a + 1) * inner];
            for (b, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let in_row = &data[in_base + b * inner..in_base + (b + 1) * inner];
                for (t, &v) in in_row.iter().enumerate() {
                    out_row[t] += c * v;
                }
            }
        }
    }
    shape[dim] = rows;
    out
}

/// Forward transform of grid samples: coefficients c_n = <u, J_n> by
/// per-dimension quadrature contraction.
pub fn analyze_values(
    grid: &TensorGrid,
    samples: &[f64],
    set: &CrossIndexSet,
    params: &[BasisParams],
) -> Result<SpectralField> {
    check_params(set, params)?;
    let d = set.d();
    let mut shape = grid.sizes();
    assert_eq!(
        samples.len(),
        shape.iter().product::<usize>(),
        "sample count does not match the grid"
    );
    let mut data = samples.to_vec();
    for dim in 0..d {
        let table = grid.value_table(dim);
        let rule = grid.rule(dim);
        let q = rule.size();
        let rows = table.n_count();
        // A[n][k] = w_k J_n(x_k).
        let mut mat = vec![0.0; rows * q];
        for n in 0..rows {
            let vals = table.row(n);
            for k in 0..q {
                mat[n * q + k] = rule.weights[k] * vals[k];
            }
        }
        data = contract_dim(&mut shape, &data, dim, &mat, rows);
    }
    // Gather the sparse subset out of the rectangular result.
    let strides = strides_of(&shape);
    let coeffs = set
        .iter()
        .map(|nt| {
            let flat: usize = nt.iter().zip(&strides).map(|(&n, &s)| n * s).sum();
            data[flat]
        })
        .collect();
    SpectralField::from_coeffs(set.clone(), params.to_vec(), coeffs)
}

/// Forward transform of a function: samples on a fresh tensor grid with
/// Q = ceil(oversample*(N+1)) points per dimension, then quadrature.
pub fn analyze<F: Fn(&[f64]) -> f64>(
    sampler: F,
    set: &CrossIndexSet,
    params: &[BasisParams],
    oversample: f64,
) -> Result<SpectralField> {
    let grid = TensorGrid::new(set, params, oversample)?;
    let samples = grid.sample(sampler)?;
    analyze_values(&grid, &samples, set, params)
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl SpectralField {
    pub fn zero(set: CrossIndexSet, params: Vec<BasisParams>) -> Result<Self> {
        let coeffs = vec![0.0; set.len()];
        Self::from_coeffs(set, params, coeffs)
    }

    pub fn from_coeffs(
        set: CrossIndexSet,
        params: Vec<BasisParams>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        check_params(&set, &params)?;
        if coeffs.len() != set.len() {
            return Err(CoreError::Domain {
                context: "SpectralField",
                message: format!(
                    "coefficient vector length {} does not match set size {}",
                    coeffs.len(),
                    set.len()
                ),
            });
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(CoreError::Domain {
                context: "SpectralField",
                message: format!("non-finite coefficient {bad}"),
            });
        }
        Ok(SpectralField { set, params, coeffs })
    }

    pub fn set(&self) -> &CrossIndexSet {
        &self.set
    }

    pub fn params(&self) -> &[BasisParams] {
        &self.params
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn d(&self) -> usize {
        self.set.d()
    }

    /// Euclidean norm of the coefficients; equals the L2 norm of the
    /// expansion because the basis is orthonormal.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Evaluates the expansion at a list of points.
    pub fn synthesize(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.point_values(points, None, false)
    }

    pub fn eval_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.point_values(std::slice::from_ref(&x.to_vec()), None, false)?[0])
    }

    /// Pointwise partial derivative along one dimension.
    pub fn deriv_values(&self, dim: usize, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        assert!(dim < self.d(), "dimension out of range");
        self.point_values(points, Some(dim), false)
    }

    /// x_i-weighted partial derivative, x_i * dU/dx_i pointwise.
    pub fn xderiv_values(&self, dim: usize, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        assert!(dim < self.d(), "dimension out of range");
        self.point_values(points, Some(dim), true)
    }

    fn point_values(
        &self,
        points: &[Vec<f64>],
        deriv_dim: Option<usize>,
        x_weight: bool,
    ) -> Result<Vec<f64>> {
        let d = self.d();
        let p_count = points.len();
        if p_count == 0 {
            return Ok(Vec::new());
        }
        for (i, pt) in points.iter().enumerate() {
            if pt.len() != d {
                return Err(CoreError::Domain {
                    context: "synthesize",
                    message: format!("point {i} has {} coordinates, expected {d}", pt.len()),
                });
            }
        }
        // One basis table per dimension over that dimension's coordinates.
        let mut tables = Vec::with_capacity(d);
        for i in 0..d {
            let xs: Vec<f64> = points.iter().map(|p| p[i]).collect();
            let m = max_entry_in(&self.set, i);
            let (v, dv) = value_and_deriv_tables(&self.params[i], m + 1, &xs);
            if deriv_dim == Some(i) {
                tables.push(dv);
            } else {
                tables.push(v);
            }
        }
        let mut out = vec![0.0; p_count];
        for (pos, nt) in self.set.iter().enumerate() {
            let c = self.coeffs[pos];
            if c == 0.0 {
                continue;
            }
            for k in 0..p_count {
                let mut prod = c;
                for i in 0..d {
                    prod *= tables[i].row(nt[i])[k];
                }
                out[k] += prod;
            }
        }
        if x_weight {
            let wd = deriv_dim.expect("x-weighted derivative needs a dimension");
            for (k, v) in out.iter_mut().enumerate() {
                *v *= points[k][wd];
            }
        }
        Ok(out)
    }

    /// Expansion values on every node of a tensor grid, sum factorized.
    /// `deriv_dim` swaps in the derivative table along that dimension.
    pub fn grid_values(&self, grid: &TensorGrid, deriv_dim: Option<usize>) -> Vec<f64> {
        let d = self.d();
        assert_eq!(grid.dims(), d, "grid dimension mismatch");
        // Scatter the sparse coefficients into the rectangular box.
        let box_shape: Vec<usize> = (0..d).map(|i| max_entry_in(&self.set, i) + 1).collect();
        let strides = strides_of(&box_shape);
        let mut data = vec![0.0; box_shape.iter().product()];
        for (pos, nt) in self.set.iter().enumerate() {
            let flat: usize = nt.iter().zip(&strides).map(|(&n, &s)| n * s).sum();
            data[flat] = self.coeffs[pos];
        }
        let mut shape = box_shape;
        for dim in 0..d {
            let table = if deriv_dim == Some(dim) {
                grid.deriv_table(dim)
            } else {
                grid.value_table(dim)
            };
            let q = table.n_points();
            let orders = shape[dim];
            assert!(
                table.n_count() >= orders,
                "grid tables shorter than the field's orders"
            );
            // S[k][n] = J_n(x_k).
            let mut mat = vec![0.0; q * orders];
            for n in 0..orders {
                let vals = table.row(n);
                for k in 0..q {
                    mat[k * orders + n] = vals[k];
                }
            }
            data = contract_dim(&mut shape, &data, dim, &mat, q);
        }
        data
    }

    /// Projects onto a new basis and set. Identical parameters reduce to
    /// exact coefficient transfer (truncation and zero padding); anything
    /// else goes through synthesize/analyze on the destination grid.
    pub fn reproject(
        &self,
        new_params: &[BasisParams],
        new_set: &CrossIndexSet,
    ) -> Result<SpectralField> {
        check_params(new_set, new_params)?;
        if new_params == self.params && new_set.d() == self.set.d() {
            let coeffs = new_set
                .iter()
                .map(|nt| match self.set.position_of(nt) {
                    Some(p) => self.coeffs[p],
                    None => 0.0,
                })
                .collect();
            return SpectralField::from_coeffs(new_set.clone(), new_params.to_vec(), coeffs);
        }
        // Destination-grid quadrature against the new basis; the source
        // field is evaluated on the destination nodes dimension by
        // dimension, so the whole reprojection stays sum factorized.
        let grid = TensorGrid::new(new_set, new_params, 2.0)?;
        let nodes: Vec<Vec<f64>> = (0..new_set.d())
            .map(|i| grid.rule(i).nodes.clone())
            .collect();
        let src_grid = self.grid_over_nodes(&nodes)?;
        let samples = self.grid_values(&src_grid, None);
        analyze_values(&grid, &samples, new_set, new_params)
    }

    /// Builds a grid over explicit per-dimension nodes using this
    /// field's own basis tables (weights unused).
    fn grid_over_nodes(&self, nodes: &[Vec<f64>]) -> Result<TensorGrid> {
        let mut rules = Vec::with_capacity(self.d());
        let mut values = Vec::with_capacity(self.d());
        let mut derivs = Vec::with_capacity(self.d());
        for (i, xs) in nodes.iter().enumerate() {
            let m = max_entry_in(&self.set, i);
            let (v, dv) = value_and_deriv_tables(&self.params[i], m + 1, xs);
            rules.push(QuadratureRule {
                nodes: xs.clone(),
                weights: vec![0.0; xs.len()],
                params: self.params[i],
            });
            values.push(v);
            derivs.push(dv);
        }
        Ok(TensorGrid {
            rules,
            values,
            derivs,
        })
    }

    /// Writes the snapshot text format: header lines, then one
    /// `index-tuple coefficient` line per member in dictionary order.
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "d {}", self.d())?;
        writeln!(w, "N {}", self.set.order())?;
        writeln!(w, "gamma {}", gamma_text(self.set.gamma()))?;
        for (i, p) in self.params.iter().enumerate() {
            let family = match p.family {
                BasisFamily::MappedJacobi => "mapped_jacobi",
                BasisFamily::Hermite => "hermite",
            };
            writeln!(
                w,
                "dim {i} {family} {:.16e} {:.16e} {} {:.16e} {:.16e}",
                p.alpha1, p.alpha2, p.r, p.beta, p.x0
            )?;
        }
        for (pos, nt) in self.set.iter().enumerate() {
            for v in nt {
                write!(w, "{v} ")?;
            }
            writeln!(w, "{:.16e}", self.coeffs[pos])?;
        }
        Ok(())
    }

    /// Parses the snapshot format written by `write_snapshot`.
    pub fn read_snapshot<R: BufRead>(r: &mut R) -> Result<SpectralField> {
        let mut lines = Vec::new();
        for line in r.lines() {
            lines.push(line?);
        }
        let path = "snapshot".to_string();
        let fail = |line: usize, message: String| CoreError::Parse {
            path: path.clone(),
            line,
            message,
        };
        let mut cursor = 0usize;
        let mut next = |prefix: &str| -> Result<(usize, Vec<String>)> {
            while cursor < lines.len() && lines[cursor].trim().is_empty() {
                cursor += 1;
            }
            if cursor >= lines.len() {
                return Err(fail(lines.len(), format!("missing `{prefix}` line")));
            }
            let lineno = cursor + 1;
            let toks: Vec<String> = lines[cursor]
                .split_whitespace()
                .map(|s| s.to_string())
                .collect();
            cursor += 1;
            if toks.first().map(String::as_str) != Some(prefix) {
                return Err(fail(lineno, format!("expected `{prefix}` line")));
            }
            Ok((lineno, toks))
        };
        let (dl, dt) = next("d")?;
        let d: usize = dt
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail(dl, "bad dimension".into()))?;
        let (nl, ntoks) = next("N")?;
        let n: usize = ntoks
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail(nl, "bad order".into()))?;
        let (gl, gt) = next("gamma")?;
        let gamma = match gt.get(1).map(String::as_str) {
            Some("full_tensor") => GammaSpec::FullTensor,
            Some(s) => GammaSpec::Value(
                s.parse()
                    .map_err(|_| fail(gl, format!("bad gamma `{s}`")))?,
            ),
            None => return Err(fail(gl, "missing gamma".into())),
        };
        let mut params = Vec::with_capacity(d);
        for i in 0..d {
            let (pl, pt) = next("dim")?;
            if pt.len() != 8 {
                return Err(fail(pl, "dim line needs 8 tokens".into()));
            }
            if pt[1].parse::<usize>().ok() != Some(i) {
                return Err(fail(pl, format!("expected dim {i}")));
            }
            let parse_f = |idx: usize| -> Result<f64> {
                pt[idx]
                    .parse::<f64>()
                    .map_err(|_| fail(pl, format!("bad float `{}`", pt[idx])))
            };
            let p = match pt[2].as_str() {
                "mapped_jacobi" => {
                    let r: u8 = pt[5]
                        .parse()
                        .map_err(|_| fail(pl, format!("bad mapping order `{}`", pt[5])))?;
                    BasisParams::mapped_jacobi(parse_f(3)?, parse_f(4)?, r, parse_f(6)?, parse_f(7)?)?
                }
                "hermite" => BasisParams::hermite(parse_f(6)?, parse_f(7)?)?,
                other => return Err(fail(pl, format!("unknown family `{other}`"))),
            };
            params.push(p);
        }
        let set = sparse_index::build_unbounded(d, n, gamma)?;
        let mut coeffs = vec![0.0; set.len()];
        let mut seen = 0usize;
        while cursor < lines.len() {
            if lines[cursor].trim().is_empty() {
                cursor += 1;
                continue;
            }
            let lineno = cursor + 1;
            let toks: Vec<&str> = lines[cursor].split_whitespace().collect();
            cursor += 1;
            if toks.len() != d + 1 {
                return Err(fail(lineno, format!("expected {} tokens", d + 1)));
            }
            let mut nt = vec![0usize; d];
            for (j, t) in toks[..d].iter().enumerate() {
                nt[j] = t
                    .parse()
                    .map_err(|_| fail(lineno, format!("bad index `{t}`")))?;
            }
            let pos = set
                .position_of(&nt)
                .ok_or_else(|| fail(lineno, format!("index {nt:?} not in the set")))?;
            coeffs[pos] = toks[d]
                .parse()
                .map_err(|_| fail(lineno, format!("bad coefficient `{}`", toks[d])))?;
            seen += 1;
        }
        if seen != set.len() {
            return Err(fail(
                lines.len(),
                format!("{seen} coefficient lines for a set of {}", set.len()),
            ));
        }
        SpectralField::from_coeffs(set, params, coeffs)
    }
}

fn gamma_text(g: GammaSpec) -> String {
    match g {
        GammaSpec::Value(v) => format!("{v:.16e}"),
        GammaSpec::FullTensor => "full_tensor".into(),
    }
}
