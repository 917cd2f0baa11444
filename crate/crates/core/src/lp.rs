//! The covering LP that lower-bounds the optimal adaptive cost:
//!
//! ```text
//! min Σ c_i y_i   s.t.  Σ_{i∉A} F_A(i) y_i ≥ Q̃ − 2F(A)   for all A ⊆ [m],   0 ≤ y ≤ 1
//! ```
//!
//! with `Q̃ = Q` and `F` the expected coverage.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use num_traits::{One, Signed, Zero};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::expectation::expected_coverage_closed_form;
use crate::instance::Instance;
use crate::policies::Expectimax;
use crate::rational::{int, Rational};
use crate::simplex::{minimize, LinearProgram, Relation};

/// Largest item count for which all `2^m` rows are materialized.
pub const LP_MAX_ITEMS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    /// Bitmask of `A`.
    pub subset: u32,
    /// `F_A(i)` for `i ∉ A`, zero for `i ∈ A`.
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverLp {
    pub costs: Vec<u64>,
    pub q_tilde: u64,
    /// Indexed by subset bitmask.
    pub rows: Vec<LpRow>,
}

impl CoverLp {
    pub fn m(&self) -> usize {
        self.costs.len()
    }

    pub fn objective(&self, y: &[Rational]) -> Rational {
        y.iter().zip(&self.costs).map(|(v, &c)| v * int(c)).sum()
    }

    /// Plain-text dump, one row per line: subset bitmask, the `m`
    /// coefficients, then the right-hand side.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let costs: Vec<String> = self.costs.iter().map(|c| c.to_string()).collect();
        writeln!(w, "# m={} q={} costs={}", self.m(), self.q_tilde, costs.join(","))?;
        for row in &self.rows {
            write!(w, "{}", row.subset)?;
            for c in &row.coeffs {
                write!(w, " {c}")?;
            }
            writeln!(w, " {}", row.rhs)?;
        }
        Ok(())
    }
}

/// `F(A)` for every subset mask of `[m]`.
pub fn expected_coverage_table(inst: &Instance) -> Result<Vec<Rational>> {
    let m = inst.m();
    let need = inst.ground_points();
    (0u32..1 << m)
        .map(|mask| {
            let a: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            expected_coverage_closed_form(inst, &a, need)
        })
        .collect()
}

pub fn build_lp(inst: &Instance) -> Result<CoverLp> {
    let m = inst.m();
    if m > LP_MAX_ITEMS {
        return Err(Error::Capacity(format!(
            "the covering LP is materialized for at most {LP_MAX_ITEMS} items, got {m}"
        )));
    }
    let f = expected_coverage_table(inst)?;
    let q = int(inst.q());
    let rows = (0u32..1 << m)
        .map(|mask| {
            let a = mask as usize;
            let coeffs = (0..m)
                .map(|i| {
                    if a >> i & 1 == 1 {
                        Rational::zero()
                    } else {
                        &f[a | 1 << i] - &f[a]
                    }
                })
                .collect();
            LpRow {
                subset: mask,
                coeffs,
                rhs: &q - int(2) * &f[a],
            }
        })
        .collect();
    Ok(CoverLp {
        costs: inst.items().iter().map(|it| it.cost()).collect(),
        q_tilde: inst.q(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpViolation {
    /// Row of subset `A` (bitmask).
    Row(u32),
    /// Box constraint of variable `i`.
    Bound(usize),
}

/// First violated constraint, if any; exact.
pub fn check_feasible(lp: &CoverLp, y: &[Rational]) -> Result<Option<LpViolation>> {
    if y.len() != lp.m() {
        return Err(Error::Domain(format!(
            "vector has {} entries for {} variables",
            y.len(),
            lp.m()
        )));
    }
    if let Some(i) = y.iter().position(|v| v.is_negative() || v > &Rational::one()) {
        return Ok(Some(LpViolation::Bound(i)));
    }
    for row in &lp.rows {
        let lhs: Rational = row.coeffs.iter().zip(y).map(|(a, b)| a * b).sum();
        if lhs < row.rhs {
            return Ok(Some(LpViolation::Row(row.subset)));
        }
    }
    Ok(None)
}

/// `w_i = Pr(the optimal policy picks item i)`, pushed exactly through the
/// policy's decisions.
pub fn opt_policy_to_w(inst: &Instance, ex: &Expectimax<'_>) -> Result<Vec<Rational>> {
    let m = inst.m();
    let all = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
    let mut w = vec![Rational::zero(); m];
    // states ordered by number of unchosen items, most first
    let mut frontier: BTreeMap<(Reverse<u32>, u128), HashMap<Bitset, Rational>> = BTreeMap::new();
    frontier
        .entry((Reverse(all.count_ones()), all))
        .or_default()
        .insert(Bitset::new(inst.universe_size()), Rational::one());
    while let Some(((_, unchosen), states)) = frontier.pop_first() {
        for (covered, p) in states {
            if inst.ground_points().is_subset(&covered) {
                continue;
            }
            let i = ex
                .decide(&covered, unchosen)
                .ok_or_else(|| Error::ContractViolation("optimal policy undefined on a reachable state".into()))?;
            w[i] += &p;
            let it = inst.item(i);
            let rest = unchosen & !(1u128 << i);
            let bucket = frontier.entry((Reverse(rest.count_ones()), rest)).or_default();
            for (o, &ow) in it.support().iter().zip(it.weights()) {
                let mut c = covered.clone();
                c.union_with(&o.covers);
                *bucket.entry(c).or_insert_with(Rational::zero) += &p * Rational::new(ow.into(), it.scale().into());
            }
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Optimum `P`.
    pub value: Rational,
    pub y: Vec<Rational>,
}

/// Exact optimum of the covering LP.
///
/// Solved through its dual `max Σ_A b_A u_A − Σ_i v_i` s.t.
/// `Σ_A F_A(i) u_A − v_i ≤ c_i`, which has one row per item and the origin as
/// a starting vertex. Rows with `b_A ≤ 0` are dropped, as no optimal dual
/// uses them. The primal vector is read from the dual multipliers and
/// certified: it is checked feasible and its cost must equal the dual value.
pub fn solve_lp(lp: &CoverLp) -> Result<LpSolution> {
    let m = lp.m();
    if m > LP_MAX_ITEMS {
        return Err(Error::Capacity(format!(
            "LP solving supports at most {LP_MAX_ITEMS} items"
        )));
    }
    let active: Vec<&LpRow> = lp.rows.iter().filter(|r| r.rhs.is_positive()).collect();
    let n_u = active.len();
    let mut objective: Vec<Rational> = active.iter().map(|r| -r.rhs.clone()).collect();
    objective.extend((0..m).map(|_| Rational::one()));
    let rows = (0..m)
        .map(|i| {
            let mut coef: Vec<Rational> = active.iter().map(|r| r.coeffs[i].clone()).collect();
            coef.extend((0..m).map(|j| if i == j { -Rational::one() } else { Rational::zero() }));
            (coef, Relation::Le, int(lp.costs[i]))
        })
        .collect();
    let dual = minimize(&LinearProgram { objective, rows })?;
    debug_assert_eq!(dual.x.len(), n_u + m);
    let value = -dual.value;
    let y: Vec<Rational> = dual.duals.iter().map(|p| -p.clone()).collect();
    if let Some(v) = check_feasible(lp, &y)? {
        return Err(Error::ContractViolation(format!("recovered LP vector violates {v:?}")));
    }
    if lp.objective(&y) != value {
        return Err(Error::ContractViolation("LP primal and dual values differ".into()));
    }
    Ok(LpSolution { value, y })
}
