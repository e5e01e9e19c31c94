//! Hyperbolic cross multi-index sets and their indicator subsets.
//!
//! A multi-index n = (n_1, ..., n_d) of nonnegative integers belongs to
//! the cross of order N with shape parameter gamma < 1 when
//! `|n|_mix * |n|_inf^{-gamma} <= N^{1 - gamma}`,
//! where |n|_mix is the product of max(1, n_i) and |n|_inf the largest
//! entry. The all-zero index is a member by convention (the formula is
//! 0^{-gamma} there). gamma = -infinity is the full tensor box, kept as
//! an explicit sentinel so no power ever overflows.
//!
//! Membership is decided in exact u128 arithmetic whenever gamma is a
//! nonpositive integer (every shipped configuration) and falls back to
//! log space otherwise. The four indicator subsets used by the adaptive
//! machinery are provided as position lists into the parent set.

use crate::error::{CoreError, Result};

/// Shape parameter of the cross: a real gamma < 1, or the full tensor box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Value(f64),
    FullTensor,
}

impl std::fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaSpec::Value(g) => write!(f, "{g}"),
            GammaSpec::FullTensor => write!(f, "full_tensor"),
        }
    }
}

impl GammaSpec {
    /// Returns gamma as a nonpositive integer magnitude when exact
    /// integer evaluation applies.
    fn integer_magnitude(&self) -> Option<u32> {
        match self {
            GammaSpec::Value(g) if *g <= 0.0 && g.floor() == *g && *g >= -64.0 => {
                Some((-g) as u32)
            }
            _ => None,
        }
    }
}

/// Product of max(1, n_i).
pub fn mix_norm(n: &[usize]) -> u128 {
    n.iter().map(|&v| (v.max(1)) as u128).product()
}

/// Largest entry.
pub fn inf_norm(n: &[usize]) -> usize {
    n.iter().copied().max().unwrap_or(0)
}

/// Exact membership test; `scale_dim` applies the 3/2 factor to one
/// coordinate (the scaling-indicator subsets) and `shrink_order` replaces
/// the bound N by (2/3)N (the order-indicator subset). Both rescalings
/// are cleared of fractions by multiplying through with 2 or 3, so the
/// integer path stays exact.
fn member_general(
    nt: &[usize],
    n_bound: usize,
    gamma: GammaSpec,
    scale_dim: Option<usize>,
    shrink_order: bool,
) -> bool {
    // The all-zero index: always a member of the plain set; subsets
    // decide by the formula (which it passes except for tiny-N order
    // subsets, where the exclusion is genuine).
    let all_zero = nt.iter().all(|&v| v == 0);
    if all_zero && scale_dim.is_none() && !shrink_order {
        return true;
    }
    match gamma {
        GammaSpec::FullTensor => {
            // Box: every (possibly scaled) entry at most N.
            nt.iter().enumerate().all(|(j, &v)| {
                if Some(j) == scale_dim {
                    3 * v <= 2 * n_bound
                } else if shrink_order {
                    3 * v <= 2 * n_bound
                } else {
                    v <= n_bound
                }
            })
        }
        GammaSpec::Value(g) => {
            if let Some(mag) = gamma.integer_magnitude() {
                if let Some(r) = member_integer(nt, n_bound, mag, scale_dim, shrink_order) {
                    return r;
                }
            }
            member_logspace(nt, n_bound, g, scale_dim, shrink_order)
        }
    }
}

/// u128 membership; returns None when an intermediate product overflows.
fn member_integer(
    nt: &[usize],
    n_bound: usize,
    g: u32,
    scale_dim: Option<usize>,
    shrink_order: bool,
) -> Option<bool> {
    // Work doubled when a coordinate carries the 3/2 factor, so the
    // comparison stays in integers:
    //   mix' * inf'^g <= N^{g+1}
    //   <=> (2 mix') (2 inf')^g <= (2N)^{g+1}.
    let doubled = scale_dim.is_some();
    let mut mix: u128 = 1;
    let mut inf: u128 = 0;
    for (j, &v) in nt.iter().enumerate() {
        let (m, i) = if Some(j) == scale_dim {
            ((3 * v).max(2) as u128, (3 * v) as u128)
        } else if doubled {
            (v.max(1) as u128, (2 * v) as u128)
        } else {
            (v.max(1) as u128, v as u128)
        };
        mix = mix.checked_mul(m)?;
        inf = inf.max(i);
    }
    let base = if doubled {
        2 * n_bound as u128
    } else {
        n_bound as u128
    };
    let mut lhs = mix.checked_mul(inf.checked_pow(g)?)?;
    if shrink_order {
        // Bound (2/3)N: multiply the left side by 3^{g+1} and compare
        // against (2N)^{g+1}. Never combined with scale_dim.
        lhs = lhs.checked_mul(3u128.checked_pow(g + 1)?)?;
        let rhs = (2 * n_bound as u128).checked_pow(g + 1)?;
        return Some(lhs <= rhs);
    }
    let rhs = base.checked_pow(g + 1)?;
    Some(lhs <= rhs)
}

fn member_logspace(
    nt: &[usize],
    n_bound: usize,
    g: f64,
    scale_dim: Option<usize>,
    shrink_order: bool,
) -> bool {
    let mut log_mix = 0.0_f64;
    let mut inf = 0.0_f64;
    for (j, &v) in nt.iter().enumerate() {
        let val = if Some(j) == scale_dim {
            1.5 * v as f64
        } else {
            v as f64
        };
        log_mix += val.max(1.0).ln();
        inf = inf.max(val);
    }
    if inf == 0.0 {
        // Zero index inside a subset check. For g < 0 the left side is
        // mix * 0^{-g} = 0, a member of anything; at g >= 0 the order
        // bound itself can exclude it when (2/3)N drops below 1.
        if shrink_order && g >= 0.0 {
            return 0.0 <= (1.0 - g) * (2.0 / 3.0 * n_bound as f64).ln();
        }
        return true;
    }
    let bound = if shrink_order {
        2.0 / 3.0 * n_bound as f64
    } else {
        n_bound as f64
    };
    log_mix - g * inf.ln() <= (1.0 - g) * bound.ln()
}

fn member(nt: &[usize], n_bound: usize, gamma: GammaSpec) -> bool {
    member_general(nt, n_bound, gamma, None, false)
}

/// A hyperbolic cross index set in dictionary order.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossIndexSet {
    d: usize,
    n: usize,
    gamma: GammaSpec,
    /// Flat storage, d entries per index, dictionary order.
    indices: Vec<usize>,
}

impl CrossIndexSet {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> GammaSpec {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, i: usize) -> &[usize] {
        &self.indices[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.indices.chunks_exact(self.d)
    }

    /// Dictionary-order rank of the index, if present.
    pub fn position_of(&self, nt: &[usize]) -> Option<usize> {
        if nt.len() != self.d {
            return None;
        }
        let mut lo = 0usize;
        let mut hi = self.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.index(mid).cmp(nt) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn contains(&self, nt: &[usize]) -> bool {
        self.position_of(nt).is_some()
    }

    /// Largest entry used in any dimension; the per-dimension basis
    /// tables need rows up to this order.
    pub fn max_entry(&self) -> usize {
        self.indices.iter().copied().max().unwrap_or(0)
    }

    /// Positions whose index survives the 3/2 scaling of dimension `dim`.
    pub fn scaling_subset(&self, dim: usize) -> Vec<usize> {
        assert!(dim < self.d, "dimension out of range");
        (0..self.len())
            .filter(|&i| member_general(self.index(i), self.n, self.gamma, Some(dim), false))
            .collect()
    }

    /// Positions whose index sits inside the cross of order (2/3)N.
    pub fn order_subset(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| member_general(self.index(i), self.n, self.gamma, None, true))
            .collect()
    }

    /// Positions with n_dim <= (2/3)N (direct-truncation scaling subset).
    pub fn dt_scaling_subset(&self, dim: usize) -> Vec<usize> {
        assert!(dim < self.d, "dimension out of range");
        (0..self.len())
            .filter(|&i| 3 * self.index(i)[dim] <= 2 * self.n)
            .collect()
    }

    /// Positions with every entry <= (2/3)N (direct-truncation order subset).
    pub fn dt_order_subset(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.index(i).iter().all(|&v| 3 * v <= 2 * self.n))
            .collect()
    }
}

/// Enumerates the cross of order N in dimension d. Fails with a capacity
/// error as soon as the member count passes `budget`.
pub fn build(d: usize, n: usize, gamma: GammaSpec, budget: usize) -> Result<CrossIndexSet> {
    if d == 0 {
        return Err(CoreError::Domain {
            context: "sparse_index::build",
            message: "dimension must be at least 1".into(),
        });
    }
    if n == 0 {
        return Err(CoreError::Domain {
            context: "sparse_index::build",
            message: "order N must be at least 1".into(),
        });
    }
    if let GammaSpec::Value(g) = gamma {
        if !(g < 1.0) {
            return Err(CoreError::Domain {
                context: "sparse_index::build",
                message: format!("gamma = {g} must be below 1"),
            });
        }
    }
    let mut indices = Vec::new();
    let mut prefix = vec![0usize; d];
    let mut count = 0usize;
    // Depth-first in dictionary order. Membership is monotone in every
    // coordinate (gamma < 1), so a failing prefix padded with zeros
    // prunes the whole branch.
    fn rec(
        depth: usize,
        d: usize,
        n: usize,
        gamma: GammaSpec,
        prefix: &mut Vec<usize>,
        indices: &mut Vec<usize>,
        count: &mut usize,
        budget: usize,
    ) -> Result<()> {
        if depth == d {
            *count += 1;
            if *count > budget {
                return Err(CoreError::Capacity {
                    needed: *count,
                    budget,
                });
            }
            indices.extend_from_slice(prefix);
            return Ok(());
        }
        for v in 0..=n {
            prefix[depth] = v;
            // Zero out the tail and test the prefix; the tail extension
            // can only grow the left-hand side.
            for slot in prefix[depth + 1..].iter_mut() {
                *slot = 0;
            }
            if !member(&prefix[..], n, gamma) {
                break;
            }
            rec(depth + 1, d, n, gamma, prefix, indices, count, budget)?;
        }
        prefix[depth] = 0;
        Ok(())
    }
    rec(0, d, n, gamma, &mut prefix, &mut indices, &mut count, budget)?;
    Ok(CrossIndexSet {
        d,
        n,
        gamma,
        indices,
    })
}

/// Unlimited-budget convenience wrapper.
pub fn build_unbounded(d: usize, n: usize, gamma: GammaSpec) -> Result<CrossIndexSet> {
    build(d, n, gamma, usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuples(set: &CrossIndexSet) -> Vec<Vec<usize>> {
        set.iter().map(|s| s.to_vec()).collect()
    }

    fn brute_force(d: usize, n: usize, gamma: GammaSpec) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let total = (n + 1).pow(d as u32);
        for code in 0..total {
            let mut nt = vec![0usize; d];
            let mut c = code;
            // Decode with the first coordinate most significant so the
            // scan itself runs in dictionary order.
            for j in (0..d).rev() {
                nt[j] = c % (n + 1);
                c /= n + 1;
            }
            if member(&nt, n, gamma) {
                out.push(nt);
            }
        }
        out
    }

    #[test]
    fn norms() {
        assert_eq!(mix_norm(&[0, 0, 0]), 1);
        assert_eq!(inf_norm(&[0, 0, 0]), 0);
        assert_eq!(mix_norm(&[1, 2]), 2);
        assert_eq!(inf_norm(&[1, 2]), 2);
        assert_eq!(mix_norm(&[3, 0, 2]), 6);
        assert_eq!(inf_norm(&[3, 0, 2]), 3);
    }

    #[test]
    fn one_dimensional_cross_is_a_range() {
        let set = build_unbounded(1, 5, GammaSpec::Value(-2.0)).unwrap();
        assert_eq!(
            tuples(&set),
            (0..=5).map(|v| vec![v]).collect::<Vec<_>>()
        );
    }

    #[test]
    fn two_dimensional_order_two_cross() {
        let set = build_unbounded(2, 2, GammaSpec::Value(0.0)).unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![0, 2],
            vec![1, 0],
            vec![1, 1],
            vec![1, 2],
            vec![2, 0],
            vec![2, 1],
        ];
        assert_eq!(tuples(&set), expected);
    }

    #[test]
    fn full_tensor_is_the_whole_box() {
        let set = build_unbounded(2, 2, GammaSpec::FullTensor).unwrap();
        assert_eq!(set.len(), 9);
    }

    #[test]
    fn matches_brute_force() {
        for d in 1..=3 {
            for n in [2, 5, 8] {
                for gamma in [
                    GammaSpec::Value(0.0),
                    GammaSpec::Value(-1.0),
                    GammaSpec::Value(-5.0),
                    GammaSpec::Value(0.5),
                    GammaSpec::Value(-2.5),
                    GammaSpec::FullTensor,
                ] {
                    let set = build_unbounded(d, n, gamma).unwrap();
                    assert_eq!(
                        tuples(&set),
                        brute_force(d, n, gamma),
                        "d={d} n={n} gamma={gamma}"
                    );
                }
            }
        }
    }

    #[test]
    fn four_dimensional_reference_cardinality() {
        let set = build_unbounded(4, 11, GammaSpec::Value(-3.0)).unwrap();
        assert_eq!(set.len(), 2218);
        assert!(set.len() < 12usize.pow(4));
    }

    #[test]
    fn downward_closure() {
        for d in 1..=3 {
            for n in [4, 10] {
                for gamma in [
                    GammaSpec::Value(0.0),
                    GammaSpec::Value(-1.0),
                    GammaSpec::Value(-5.0),
                ] {
                    let set = build_unbounded(d, n, gamma).unwrap();
                    for idx in set.iter() {
                        for j in 0..d {
                            if idx[j] > 0 {
                                let mut lower = idx.to_vec();
                                lower[j] -= 1;
                                assert!(
                                    set.contains(&lower),
                                    "closure broken below {idx:?} in d={d} n={n} gamma={gamma}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn nesting_in_order() {
        for gamma in [GammaSpec::Value(0.0), GammaSpec::Value(-5.0)] {
            let small = build_unbounded(3, 6, gamma).unwrap();
            let large = build_unbounded(3, 7, gamma).unwrap();
            for idx in small.iter() {
                assert!(large.contains(idx));
            }
        }
    }

    #[test]
    fn strict_sparsity_against_the_box() {
        for d in 2..=3 {
            for n in [4, 6, 10] {
                for g in [0.0, -1.0, -5.0] {
                    let set = build_unbounded(d, n, GammaSpec::Value(g)).unwrap();
                    assert!(
                        set.len() < (n + 1).pow(d as u32),
                        "no sparsity at d={d} n={n} gamma={g}"
                    );
                }
            }
        }
    }

    #[test]
    fn scaling_subset_one_dimensional_cutoff() {
        let set = build_unbounded(1, 6, GammaSpec::Value(0.0)).unwrap();
        let subset = set.scaling_subset(0);
        let values: Vec<usize> = subset.iter().map(|&p| set.index(p)[0]).collect();
        assert_eq!(values, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn scaling_subset_matches_brute_force() {
        let set = build_unbounded(2, 2, GammaSpec::Value(0.0)).unwrap();
        let subset = set.scaling_subset(0);
        let expected: Vec<usize> = (0..set.len())
            .filter(|&p| {
                let idx = set.index(p);
                // Scaled first coordinate, exact in halves: the product
                // max(1, 1.5 n_0) * max(1, n_1) <= 2 with gamma = 0.
                let m0 = (1.5 * idx[0] as f64).max(1.0);
                let m1 = (idx[1] as f64).max(1.0);
                m0 * m1 <= 2.0
            })
            .collect();
        assert_eq!(subset, expected);
    }

    #[test]
    fn order_subset_cutoffs() {
        let set = build_unbounded(1, 6, GammaSpec::Value(0.0)).unwrap();
        let subset = set.order_subset();
        let values: Vec<usize> = subset.iter().map(|&p| set.index(p)[0]).collect();
        assert_eq!(values, vec![0, 1, 2, 3, 4]);

        // Brute force at d=2, N=3, gamma=-1.
        let set = build_unbounded(2, 3, GammaSpec::Value(-1.0)).unwrap();
        let subset = set.order_subset();
        let expected: Vec<usize> = (0..set.len())
            .filter(|&p| {
                let idx = set.index(p);
                let mix = mix_norm(idx) as f64;
                let inf = inf_norm(idx) as f64;
                mix * inf <= 2.0_f64.powi(2)
            })
            .collect();
        assert_eq!(subset, expected);
    }

    #[test]
    fn order_subset_is_contained_in_the_set() {
        let set = build_unbounded(3, 9, GammaSpec::Value(-2.0)).unwrap();
        for &p in &set.order_subset() {
            assert!(p < set.len());
        }
    }

    #[test]
    fn dt_subsets_match_hyperbolic_on_full_tensor() {
        let set = build_unbounded(2, 6, GammaSpec::FullTensor).unwrap();
        assert_eq!(set.dt_scaling_subset(0), set.scaling_subset(0));
        assert_eq!(set.dt_scaling_subset(1), set.scaling_subset(1));
        assert_eq!(set.dt_order_subset(), set.order_subset());
    }

    #[test]
    fn dt_scaling_subset_brute_force() {
        let set = build_unbounded(2, 3, GammaSpec::Value(-1.0)).unwrap();
        let subset = set.dt_scaling_subset(1);
        let expected: Vec<usize> = (0..set.len())
            .filter(|&p| set.index(p)[1] as f64 <= 2.0 / 3.0 * 3.0)
            .collect();
        assert_eq!(subset, expected);
    }

    #[test]
    fn zero_index_memberships() {
        let set = build_unbounded(3, 4, GammaSpec::Value(-5.0)).unwrap();
        assert_eq!(set.position_of(&[0, 0, 0]), Some(0));
        assert!(set.scaling_subset(1).contains(&0));
        assert!(set.dt_order_subset().contains(&0));
        // Small-N order subset genuinely excludes the zero index at
        // gamma = 0 (the shrunken bound drops below 1).
        let tiny = build_unbounded(1, 1, GammaSpec::Value(0.0)).unwrap();
        assert!(!tiny.order_subset().contains(&0));
    }

    #[test]
    fn position_round_trip_and_misses() {
        let set = build_unbounded(3, 7, GammaSpec::Value(-1.0)).unwrap();
        for p in 0..set.len() {
            assert_eq!(set.position_of(set.index(p)), Some(p));
        }
        assert_eq!(set.position_of(&[7, 7, 7]), None);
        assert_eq!(set.position_of(&[1, 1]), None);
    }

    #[test]
    fn budget_trips_capacity_error() {
        match build(2, 10, GammaSpec::Value(0.0), 5) {
            Err(CoreError::Capacity { needed, budget }) => {
                assert_eq!(budget, 5);
                assert!(needed > 5);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_unbounded(0, 3, GammaSpec::Value(0.0)).is_err());
        assert!(build_unbounded(2, 0, GammaSpec::Value(0.0)).is_err());
        assert!(build_unbounded(2, 3, GammaSpec::Value(1.0)).is_err());
        assert!(build_unbounded(2, 3, GammaSpec::Value(2.0)).is_err());
    }

    #[test]
    fn dictionary_order_is_strict() {
        let set = build_unbounded(3, 6, GammaSpec::Value(-1.0)).unwrap();
        for p in 1..set.len() {
            assert!(set.index(p - 1) < set.index(p));
        }
    }
}
