//! Reference policies and exact oracles.
//!
//! - [`Expectimax`]: the optimal fully adaptive policy and its exact expected cost;
//! - [`adaptive_greedy`]: pick the best expected marginal per unit cost, observe, repeat;
//! - [`exec_nonadaptive`] and [`expected_stopping_cost`]: one fixed ordering,
//!   sampled or exact;
//! - [`best_nonadaptive_bruteforce`]: the cheapest fixed ordering.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::gate::ObservationGate;
use crate::instance::{Instance, Realization};
use crate::rational::{int, Rational};

/// Default state budget of the expectimax oracle.
pub const EXPECTIMAX_STATES: usize = 2_000_000;

type StateKey = (Bitset, u128);

/// Memoized optimal adaptive policy.
///
/// A state is the covered set together with the unchosen items that can
/// still add something; items whose every outcome is already covered are
/// dropped from the key since no optimal policy pays for them.
pub struct Expectimax<'a> {
    inst: &'a Instance,
    memo: HashMap<StateKey, (Rational, Option<usize>)>,
    budget: usize,
    value: Rational,
}

impl<'a> Expectimax<'a> {
    pub fn solve(inst: &'a Instance) -> Result<Self> {
        Self::with_budget(inst, EXPECTIMAX_STATES)
    }

    pub fn with_budget(inst: &'a Instance, budget: usize) -> Result<Self> {
        if inst.m() > 128 {
            return Err(Error::Capacity(format!(
                "expectimax supports at most 128 items, got {}",
                inst.m()
            )));
        }
        let mut ex = Self {
            inst,
            memo: HashMap::new(),
            budget,
            value: Rational::zero(),
        };
        let all = if inst.m() == 128 {
            u128::MAX
        } else {
            (1u128 << inst.m()) - 1
        };
        let root = Bitset::new(inst.universe_size());
        ex.value = ex.visit(root, all)?;
        Ok(ex)
    }

    /// `E[cost(OPT)]`.
    pub fn value(&self) -> &Rational {
        &self.value
    }

    pub fn states(&self) -> usize {
        self.memo.len()
    }

    fn useful(&self, covered: &Bitset, mask: u128) -> u128 {
        let mut out = 0u128;
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if !self.inst.item(i).reach().is_subset(covered) {
                out |= 1 << i;
            }
        }
        out
    }

    // Any completion needs ⌈deficit / best single gain⌉ more items.
    fn lower_bound(&self, covered: &Bitset, mask: u128) -> u64 {
        let deficit = self.inst.ground_points().count_and_not(covered) as u64;
        if deficit == 0 {
            return 0;
        }
        let (mut min_cost, mut max_gain) = (u64::MAX, 0u64);
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let it = self.inst.item(i);
            min_cost = min_cost.min(it.cost());
            for o in it.support() {
                max_gain = max_gain.max(o.covers.count_and_not(covered) as u64);
            }
        }
        if max_gain == 0 {
            return u64::MAX;
        }
        deficit.div_ceil(max_gain) * min_cost
    }

    fn visit(&mut self, covered: Bitset, mask: u128) -> Result<Rational> {
        if self.inst.ground_points().is_subset(&covered) {
            return Ok(Rational::zero());
        }
        let mask = self.useful(&covered, mask);
        let key = (covered, mask);
        if let Some((v, _)) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if self.memo.len() >= self.budget {
            return Err(Error::Capacity(format!(
                "expectimax exceeded its budget of {} states",
                self.budget
            )));
        }
        let (covered, mask) = key;
        let mut best: Option<(Rational, usize)> = None;
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let it = self.inst.item(i);
            let child_mask = mask & !(1u128 << i);
            let children: Vec<Bitset> = it
                .support()
                .iter()
                .map(|o| {
                    let mut c = covered.clone();
                    c.union_with(&o.covers);
                    c
                })
                .collect();
            if let Some((b, _)) = &best {
                let mut lb = Rational::from_integer(it.cost().into());
                for (c, &w) in children.iter().zip(it.weights()) {
                    let l = self.lower_bound(c, self.useful(c, child_mask));
                    if l == u64::MAX {
                        lb = b.clone();
                        break;
                    }
                    lb += Rational::new((l as u128 * w as u128).into(), it.scale().into());
                }
                if &lb >= b {
                    continue;
                }
            }
            let mut v = int(it.cost());
            for (c, &w) in children.into_iter().zip(it.weights()) {
                let sub = self.visit(c, child_mask)?;
                v += sub * Rational::new(w.into(), it.scale().into());
            }
            if best.as_ref().is_none_or(|(b, _)| &v < b) {
                best = Some((v, i));
            }
        }
        let Some((v, i)) = best else {
            return Err(Error::ContractViolation(
                "uncovered state with no useful item left; instance is infeasible".into(),
            ));
        };
        self.memo.insert((covered, mask), (v.clone(), Some(i)));
        Ok(v)
    }

    /// Optimal next item in the state `(covered, unchosen)`, if uncovered.
    pub fn decide(&self, covered: &Bitset, unchosen: u128) -> Option<usize> {
        let mask = self.useful(covered, unchosen);
        self.memo.get(&(covered.clone(), mask)).and_then(|(_, d)| *d)
    }

    /// Plays the optimal policy through the gate; returns the realized cost.
    pub fn run(&self, gate: &mut ObservationGate<'_>) -> Result<u64> {
        while !gate.is_covered() {
            let unchosen = gate.remaining().iter().fold(0u128, |m, &i| m | 1 << i);
            let i = self
                .decide(gate.covered(), unchosen)
                .ok_or_else(|| Error::ContractViolation("expectimax policy reached an unexplored state".into()))?;
            gate.pick(i)?;
        }
        Ok(gate.cost())
    }
}

/// Adaptive greedy: repeatedly picks the unchosen item with the largest
/// `E[new coverage]/c_i` given what has been observed (ties to the lowest
/// index), until everything is covered.
pub fn adaptive_greedy(gate: &mut ObservationGate<'_>) -> Result<u64> {
    let inst = gate.instance();
    while !gate.is_covered() {
        // best ratio as (numerator, denominator)
        let mut best: Option<(u128, u128, usize)> = None;
        for i in gate.remaining() {
            let it = inst.item(i);
            let num: u128 = it
                .support()
                .iter()
                .zip(it.weights())
                .map(|(o, &w)| w as u128 * o.covers.count_and_not(gate.covered()) as u128)
                .sum();
            if num == 0 {
                continue;
            }
            let den = it.scale() as u128 * it.cost() as u128;
            if best.is_none_or(|(bn, bd, _)| num * bd > bn * den) {
                best = Some((num, den, i));
            }
        }
        let Some((_, _, i)) = best else {
            return Err(Error::ContractViolation(
                "no remaining item can extend the cover; instance is infeasible".into(),
            ));
        };
        gate.pick(i)?;
    }
    Ok(gate.cost())
}

/// Consumes `ordering` until the cover is complete; returns the cost paid.
pub fn exec_nonadaptive(gate: &mut ObservationGate<'_>, ordering: &[usize]) -> Result<u64> {
    let q = gate.instance().q();
    let before = gate.cost();
    gate.commit(ordering, q)?;
    gate.execute()?;
    if !gate.is_covered() {
        return Err(Error::ContractViolation(
            "ordering ended before the cover was complete".into(),
        ));
    }
    Ok(gate.cost() - before)
}

/// Cost of `ordering` on a fixed realization.
pub fn nonadaptive_cost_on(inst: &Instance, ordering: &[usize], real: &Realization) -> Result<u64> {
    let mut gate = ObservationGate::new(inst, real.clone())?;
    exec_nonadaptive(&mut gate, ordering)
}

fn check_permutation(inst: &Instance, ordering: &[usize]) -> Result<()> {
    let mut seen = vec![false; inst.m()];
    for &i in ordering {
        if i >= inst.m() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Domain(format!("ordering repeats or exceeds item {i}")));
        }
    }
    if ordering.len() != inst.m() {
        return Err(Error::Domain("ordering must list every item".into()));
    }
    Ok(())
}

/// Default budget on distinct cover states tracked by the exact evaluators.
pub const STOPPING_STATES: usize = 1_000_000;

/// Exact `E[cost]` of consuming `ordering` until the cover is complete:
/// `Σ_t c_{π_t} · Pr(f(X_{π_{<t}}) < Q)`.
pub fn expected_stopping_cost(inst: &Instance, ordering: &[usize]) -> Result<Rational> {
    check_permutation(inst, ordering)?;
    let ground = inst.ground_points();
    // uncovered states with integer weights over a common denominator
    let mut dist: HashMap<Bitset, BigUint> = HashMap::new();
    dist.insert(Bitset::new(inst.universe_size()), BigUint::one());
    let mut scale = BigUint::one();
    let mut total = Rational::zero();
    for &i in ordering {
        if dist.is_empty() {
            break;
        }
        let alive: BigUint = dist.values().sum();
        total += Rational::new((alive * inst.item(i).cost()).into(), scale.clone().into());
        let it = inst.item(i);
        let mut next: HashMap<Bitset, BigUint> = HashMap::with_capacity(dist.len());
        for (cover, w) in dist {
            for (o, &ow) in it.support().iter().zip(it.weights()) {
                let mut c = cover.clone();
                c.union_with(&o.covers);
                if ground.is_subset(&c) {
                    continue;
                }
                *next.entry(c).or_default() += &w * ow;
            }
        }
        if next.len() > STOPPING_STATES {
            return Err(Error::Capacity(format!(
                "stopping-cost evaluation exceeded {STOPPING_STATES} cover states"
            )));
        }
        scale *= it.scale();
        dist = next;
    }
    if !dist.is_empty() {
        return Err(Error::ContractViolation(
            "ordering leaves some realizations uncovered".into(),
        ));
    }
    Ok(total)
}

/// Largest instance the brute force accepts.
pub const BRUTEFORCE_MAX_ITEMS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct BestOrdering {
    pub ordering: Vec<usize>,
    pub expected_cost: Rational,
}

/// Cheapest fixed ordering and its exact expected cost; ties go to the
/// lexicographically smallest ordering.
///
/// The stopping cost of an ordering charges `c_{π_t}` with the probability
/// that the items placed before it leave the cover incomplete, a quantity
/// that depends only on the set of those items. A dynamic program over
/// placed sets therefore finds the optimum over all `m!` orderings.
pub fn best_nonadaptive_bruteforce(inst: &Instance) -> Result<BestOrdering> {
    let m = inst.m();
    if m > BRUTEFORCE_MAX_ITEMS {
        return Err(Error::Capacity(format!(
            "brute-force ordering search supports at most {BRUTEFORCE_MAX_ITEMS} items, got {m}"
        )));
    }
    let full = (1usize << m) - 1;
    let fail = failure_probabilities(inst)?;
    // g[A]: cheapest completion once A is placed
    let mut g: Vec<Rational> = vec![Rational::zero(); 1 << m];
    for a in (0..full).rev() {
        let mut best: Option<Rational> = None;
        for i in (0..m).filter(|i| a >> i & 1 == 0) {
            let v = &fail[a] * int(inst.item(i).cost()) + &g[a | 1 << i];
            if best.as_ref().is_none_or(|b| &v < b) {
                best = Some(v);
            }
        }
        g[a] = best.unwrap_or_else(Rational::zero);
    }
    let mut ordering = Vec::with_capacity(m);
    let mut a = 0usize;
    while a != full {
        let i = (0..m)
            .filter(|i| a >> i & 1 == 0)
            .find(|&i| &fail[a] * int(inst.item(i).cost()) + &g[a | 1 << i] == g[a])
            .expect("dynamic program has a minimizer");
        ordering.push(i);
        a |= 1 << i;
    }
    Ok(BestOrdering {
        ordering,
        expected_cost: g[0].clone(),
    })
}

/// `Pr(X_A does not cover E)` for every subset `A` (bitmask index).
fn failure_probabilities(inst: &Instance) -> Result<Vec<Rational>> {
    let m = inst.m();
    let mut out = vec![Rational::zero(); 1 << m];
    let mut budget = STOPPING_STATES * 16;
    let root: HashMap<Bitset, BigUint> = [(Bitset::new(inst.universe_size()), BigUint::one())].into();
    fail_dfs(inst, 0, 0, &root, &BigUint::one(), &mut out, &mut budget)?;
    Ok(out)
}

// Visits subsets by extending with indices ≥ `from`; `dist` is the cover
// distribution of `set` (incomplete covers only) over denominator `scale`.
fn fail_dfs(
    inst: &Instance,
    set: usize,
    from: usize,
    dist: &HashMap<Bitset, BigUint>,
    scale: &BigUint,
    out: &mut [Rational],
    budget: &mut usize,
) -> Result<()> {
    let alive: BigUint = dist.values().sum();
    out[set] = Rational::new(alive.into(), scale.clone().into());
    let ground = inst.ground_points();
    for i in from..inst.m() {
        let it = inst.item(i);
        let mut next: HashMap<Bitset, BigUint> = HashMap::new();
        for (cover, w) in dist {
            for (o, &ow) in it.support().iter().zip(it.weights()) {
                let mut c = cover.clone();
                c.union_with(&o.covers);
                if !ground.is_subset(&c) {
                    *next.entry(c).or_default() += w * ow;
                }
            }
        }
        let work = dist.len() * it.support().len();
        if work > *budget {
            return Err(Error::Capacity(
                "brute-force ordering search exceeded its enumeration budget".into(),
            ));
        }
        *budget -= work;
        fail_dfs(inst, set | 1 << i, i + 1, &next, &(scale * it.scale()), out, budget)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_singleton_gap, Metadata, StochasticItem};
    use crate::rational::ratio;

    #[test]
    fn gap_oracle_values() {
        let inst = gen_singleton_gap(4).unwrap();
        assert_eq!(Expectimax::solve(&inst).unwrap().value(), &int(2));
        let best = best_nonadaptive_bruteforce(&inst).unwrap();
        assert_eq!(best.expected_cost, ratio(7, 2));
        assert_eq!(best.ordering, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn gap_twenty_canonical_ordering() {
        let inst = gen_singleton_gap(20).unwrap();
        let ord: Vec<usize> = (0..21).collect();
        assert_eq!(expected_stopping_cost(&inst, &ord).unwrap(), ratio(23, 2));
        assert_eq!(Expectimax::solve(&inst).unwrap().value(), &int(2));
    }

    #[test]
    fn single_full_item() {
        let item = StochasticItem::deterministic(5, Bitset::full(3)).unwrap();
        let inst = Instance::new(3, vec![item], Metadata::default()).unwrap();
        assert_eq!(Expectimax::solve(&inst).unwrap().value(), &int(5));
        assert_eq!(best_nonadaptive_bruteforce(&inst).unwrap().expected_cost, int(5));
    }

    #[test]
    fn budget_is_capacity_error() {
        let inst = gen_singleton_gap(6).unwrap();
        assert!(matches!(Expectimax::with_budget(&inst, 1), Err(Error::Capacity(_))));
    }

    #[test]
    fn adaptive_greedy_on_gap_costs_two() {
        let inst = gen_singleton_gap(7).unwrap();
        for e in 0..7u32 {
            let mut real = vec![e];
            real.extend(std::iter::repeat_n(0, 7));
            let mut g = ObservationGate::new(&inst, Realization(real)).unwrap();
            assert_eq!(adaptive_greedy(&mut g).unwrap(), 2);
        }
    }

    #[test]
    fn oracle_plays_through_gate() {
        let inst = gen_singleton_gap(5).unwrap();
        let ex = Expectimax::solve(&inst).unwrap();
        let mut real = vec![3u32];
        real.extend([0; 5]);
        let mut g = ObservationGate::new(&inst, Realization(real)).unwrap();
        assert_eq!(ex.run(&mut g).unwrap(), 2);
        assert!(g.violations().is_empty());
    }

    #[test]
    fn bad_orderings_rejected() {
        let inst = gen_singleton_gap(3).unwrap();
        assert!(expected_stopping_cost(&inst, &[0, 1, 2]).is_err());
        assert!(expected_stopping_cost(&inst, &[0, 1, 2, 2]).is_err());
    }
}
