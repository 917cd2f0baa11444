//! `Select` and `Reduce`: non-adaptive item selection that shrinks the expected
//! deficit of a partially realized cover.
//!
//! `Select` draws `Ξ = ⌈6α⌉` realizations of a base set and, for each, runs the
//! greedy maximizer on the deficit that realization leaves behind. `Reduce`
//! chains `Λ` calls to `Select` per phase for `Γ` phases; each phase samples
//! the previous phases' items conditioned on the failure event
//! `E_k(S) = [Q_k − f_{T_{k−1}}(S) ≥ Q_k / Q^{1/r}]`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::greedy::{non_adapt_greedy, EvalMode};
use crate::instance::Instance;
use crate::rng;

/// Algorithm constants. Defaults are `Λ = 12·⌈log Q⌉`, `Γ = 2·⌈log mC⌉`,
/// `Ξ = ⌈6α⌉`, `α = 2·Q^{1/r}` with base-2 logarithms, and a rejection cap of
/// `64·(mC)²` draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    pub gamma: f64,
    pub xi: f64,
    pub alpha: f64,
    pub log_base: f64,
    pub rejection: u64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            lambda: 12.0,
            gamma: 2.0,
            xi: 6.0,
            alpha: 2.0,
            log_base: 2.0,
            rejection: 64,
        }
    }
}

impl Constants {
    /// `⌈log_b x⌉`, with `0` for `x ≤ 1`.
    pub fn ceil_log(&self, x: u64) -> u64 {
        if x <= 1 {
            return 0;
        }
        let b = self.log_base;
        if b.fract() == 0.0 && b >= 2.0 {
            let b = b as u128;
            let (mut t, mut p) = (0u64, 1u128);
            while p < x as u128 {
                p *= b;
                t += 1;
            }
            t
        } else {
            ((x as f64).ln() / b.ln()).ceil() as u64
        }
    }

    /// Select calls per phase.
    pub fn lambda_iters(&self, q: u64) -> usize {
        ((self.lambda * self.ceil_log(q) as f64).ceil() as usize).max(1)
    }

    /// Phases per round.
    pub fn gamma_phases(&self, m: usize, c: u64) -> usize {
        ((self.gamma * self.ceil_log(m as u64 * c) as f64).ceil() as usize).max(1)
    }

    /// Samples per Select call.
    pub fn xi_iters(&self, alpha: f64) -> usize {
        ((self.xi * alpha).ceil() as usize).max(1)
    }

    /// Select parameter used by Reduce.
    pub fn reduce_alpha(&self, q: u64, r: usize) -> f64 {
        self.alpha * q_pow(q, 1, r as u32)
    }

    /// Rejection-sampling cap per conditional draw.
    pub fn max_trials(&self, m: usize, c: u64) -> u64 {
        let mc = m as u64 * c;
        self.rejection.saturating_mul(mc.saturating_mul(mc)).max(1)
    }
}

/// `q^{num/den}` in floating point, exact whenever the result is an integer.
pub fn q_pow(q: u64, num: u32, den: u32) -> f64 {
    if den == 0 {
        return f64::NAN;
    }
    let v = (q as f64).powf(num as f64 / den as f64);
    let rv = v.round();
    if (0.0..1e12).contains(&rv) {
        let lhs = (rv as u128).checked_pow(den);
        let rhs = (q as u128).checked_pow(num);
        if lhs.is_some() && lhs == rhs {
            return rv;
        }
    }
    v
}

/// Round-`k` deficit bookkeeping: `Q_k = Q − f(T_{k−1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeficitState {
    /// Cover of the realized items from earlier rounds.
    pub covered: Bitset,
    pub q_k: u64,
    pub k: usize,
    pub r: usize,
}

impl DeficitState {
    pub fn new(inst: &Instance, covered: Bitset, k: usize, r: usize) -> Self {
        let q_k = inst.ground_points().count_and_not(&covered) as u64;
        Self { covered, q_k, k, r }
    }

    /// Deficit left after additionally covering `extra`.
    pub fn deficit_with(&self, inst: &Instance, extra: &Bitset) -> u64 {
        let mut c = self.covered.clone();
        c.union_with(extra);
        inst.ground_points().count_and_not(&c) as u64
    }

    /// `Q_k / Q^{1/r}`: the smallest deficit for which `E_k` holds.
    pub fn event_threshold(&self, q: u64) -> f64 {
        self.q_k as f64 / q_pow(q, 1, self.r as u32)
    }

    /// `E_k(S)` for a realized set `S` with cover `extra`.
    pub fn event_holds(&self, inst: &Instance, extra: &Bitset) -> bool {
        self.deficit_with(inst, extra) as f64 >= self.event_threshold(inst.q())
    }
}

type Predicate<'a> = Arc<dyn Fn(&[u32], &Bitset) -> bool + Send + Sync + 'a>;

/// Draws realizations of `conditioned ∪ free`, where the `conditioned` items
/// follow their joint law given the predicate and the `free` items are
/// independent of it.
#[derive(Clone)]
pub struct ConditionalSampler<'a> {
    inst: &'a Instance,
    conditioned: Vec<usize>,
    free: Vec<usize>,
    predicate: Predicate<'a>,
    max_trials: u64,
}

/// One accepted draw of the conditioned items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalDraw {
    pub outcomes: Vec<u32>,
    pub cover: Bitset,
    pub trials: u64,
}

impl<'a> ConditionalSampler<'a> {
    /// The predicate receives the conditioned items' outcomes (in the order
    /// of `conditioned`) and the union of their realized sets.
    pub fn new<P>(inst: &'a Instance, conditioned: Vec<usize>, predicate: P, max_trials: u64) -> Self
    where
        P: Fn(&[u32], &Bitset) -> bool + Send + Sync + 'a,
    {
        Self {
            inst,
            conditioned,
            free: Vec::new(),
            predicate: Arc::new(predicate),
            max_trials,
        }
    }

    pub fn unconditional(inst: &'a Instance, items: Vec<usize>) -> Self {
        Self::new(inst, Vec::new(), |_, _| true, 1).with_free(items)
    }

    pub fn with_free(mut self, free: Vec<usize>) -> Self {
        self.free = free;
        self
    }

    pub fn conditioned(&self) -> &[usize] {
        &self.conditioned
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn max_trials(&self) -> u64 {
        self.max_trials
    }

    pub fn base(&self) -> impl Iterator<Item = usize> + '_ {
        self.conditioned.iter().chain(&self.free).copied()
    }

    /// Cover of a full base draw and the rejection trials it took.
    pub fn draw_cover<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Bitset, u64)> {
        let d = conditional_sample(self, rng)?;
        let mut cover = d.cover;
        for &i in &self.free {
            let it = self.inst.item(i);
            cover.union_with(it.covers(it.sample(rng)));
        }
        Ok((cover, d.trials))
    }
}

/// Rejection sampling: draws the conditioned items unconditionally until the
/// predicate holds, giving up after `max_trials` draws.
pub fn conditional_sample<R: Rng + ?Sized>(sampler: &ConditionalSampler<'_>, rng: &mut R) -> Result<ConditionalDraw> {
    let inst = sampler.inst;
    let mut outcomes = vec![0u32; sampler.conditioned.len()];
    let mut cover = Bitset::new(inst.universe_size());
    let cap = sampler.max_trials.max(1);
    for trial in 1..=cap {
        cover.clear();
        for (slot, &i) in outcomes.iter_mut().zip(&sampler.conditioned) {
            let it = inst.item(i);
            *slot = it.sample(rng);
            cover.union_with(it.covers(*slot));
        }
        if (sampler.predicate)(&outcomes, &cover) {
            return Ok(ConditionalDraw {
                outcomes,
                cover,
                trials: trial,
            });
        }
    }
    Err(Error::RejectionFailure { trials: cap })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectOutput {
    /// Selected items, in draw order, without repeats.
    pub items: Vec<usize>,
    pub iterations: usize,
    pub greedy_calls: usize,
    pub rejection_trials: u64,
}

/// `Select(avail, g, S, α)` with `g = f_T` for the realized set `T` whose
/// cover is `base_covered`, and `S` the sampler's base set.
#[allow(clippy::too_many_arguments)]
pub fn select<R: Rng + ?Sized>(
    inst: &Instance,
    avail: &[usize],
    base_covered: &Bitset,
    sampler: &ConditionalSampler<'_>,
    alpha: f64,
    consts: &Constants,
    mode: EvalMode,
    rng: &mut R,
) -> Result<SelectOutput> {
    if alpha.is_nan() || alpha < 1.0 {
        return Err(Error::Domain(format!("Select needs α >= 1, got {alpha}")));
    }
    let mut in_base = vec![false; inst.m()];
    for i in sampler.base() {
        in_base[i] = true;
    }
    if let Some(&i) = avail.iter().find(|&&i| in_base[i]) {
        return Err(Error::ContractViolation(format!(
            "item {i} is both available and in the sampled base"
        )));
    }
    let xi = consts.xi_iters(alpha);
    let seed: u64 = rng.gen();
    let mut picked = vec![false; inst.m()];
    let mut out = SelectOutput {
        items: Vec::new(),
        iterations: xi,
        greedy_calls: 0,
        rejection_trials: 0,
    };
    let mut cache: HashMap<Bitset, Vec<usize>> = HashMap::new();
    for i in 0..xi {
        let mut sub = rng::stream(seed, i as u64, rng::tag::SELECT);
        let (mut cover, trials) = sampler.draw_cover(&mut sub)?;
        out.rejection_trials += trials;
        cover.union_with(base_covered);
        let delta = inst.ground_points().count_and_not(&cover) as u64;
        if delta == 0 {
            continue;
        }
        let chosen = match cache.get(&cover) {
            Some(c) => c.clone(),
            None => {
                let t = non_adapt_greedy(inst, avail, &cover, delta, mode, &mut sub)?;
                out.greedy_calls += 1;
                if mode.is_deterministic() {
                    cache.insert(cover, t.picked.clone());
                }
                t.picked
            }
        };
        for j in chosen {
            if !picked[j] {
                picked[j] = true;
                out.items.push(j);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReduceOutput {
    /// `S_Γ` in insertion order.
    pub ordering: Vec<usize>,
    /// End offset of each completed phase in `ordering`.
    pub phase_boundaries: Vec<usize>,
    pub lambda: usize,
    pub gamma: usize,
    pub xi: usize,
    /// Set when a conditional draw hit the rejection cap and the remaining
    /// phases were skipped.
    pub rejection_failure: Option<u64>,
}

impl ReduceOutput {
    /// Items of `S_p` (1-based phase index; `p = 0` is empty).
    pub fn phase_prefix(&self, p: usize) -> &[usize] {
        match p {
            0 => &[],
            _ => &self.ordering[..self.phase_boundaries[p - 1]],
        }
    }
}

/// `Reduce(avail, f_{T_{k−1}})`: the ordered item set for round `k`.
pub fn reduce<R: Rng + ?Sized>(
    inst: &Instance,
    avail: &[usize],
    state: &DeficitState,
    consts: &Constants,
    mode: EvalMode,
    rng: &mut R,
) -> Result<ReduceOutput> {
    if state.q_k == 0 {
        return Err(Error::ContractViolation("Reduce called with zero deficit".into()));
    }
    if avail.is_empty() {
        return Err(Error::ContractViolation("Reduce called with no available items".into()));
    }
    if state.r == 0 {
        return Err(Error::Domain("number of rounds must be positive".into()));
    }
    let q = inst.q();
    let lambda = consts.lambda_iters(q);
    let gamma = consts.gamma_phases(inst.m(), inst.max_cost());
    let alpha = consts.reduce_alpha(q, state.r);
    let cap = consts.max_trials(inst.m(), inst.max_cost());
    let mut out = ReduceOutput {
        ordering: Vec::new(),
        phase_boundaries: Vec::new(),
        lambda,
        gamma,
        xi: consts.xi_iters(alpha),
        rejection_failure: None,
    };
    let mut used = vec![false; inst.m()];
    let threshold = state.event_threshold(q);
    'phases: for _ in 0..gamma {
        if avail.iter().all(|&i| used[i]) {
            break;
        }
        let prev = out.ordering.clone();
        let covered = state.covered.clone();
        let ground = inst.ground_points();
        let conditioned = ConditionalSampler::new(
            inst,
            prev,
            move |_, cover: &Bitset| {
                let mut c = covered.clone();
                c.union_with(cover);
                ground.count_and_not(&c) as f64 >= threshold
            },
            cap,
        );
        let mut phase_items: Vec<usize> = Vec::new();
        for _ in 0..lambda {
            let rest: Vec<usize> = avail.iter().copied().filter(|&i| !used[i]).collect();
            if rest.is_empty() {
                break;
            }
            let sampler = conditioned.clone().with_free(phase_items.clone());
            match select(inst, &rest, &state.covered, &sampler, alpha, consts, mode, rng) {
                Ok(sel) => {
                    for j in sel.items {
                        used[j] = true;
                        phase_items.push(j);
                    }
                }
                Err(Error::RejectionFailure { trials }) => {
                    log::warn!(
                        "round {}: failure event unreachable after {trials} draws; skipping remaining phases",
                        state.k
                    );
                    out.rejection_failure = Some(trials);
                    out.ordering.extend(phase_items);
                    break 'phases;
                }
                Err(e) => return Err(e),
            }
        }
        out.ordering.extend(phase_items);
        out.phase_boundaries.push(out.ordering.len());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gen_singleton_gap;
    use crate::rng::stream;

    #[test]
    fn constants_match_worked_example() {
        let c = Constants::default();
        assert_eq!(c.lambda_iters(9), 48);
        assert_eq!(c.gamma_phases(19, 1), 10);
        assert_eq!(c.lambda_iters(1), 1);
        assert_eq!(c.gamma_phases(1, 1), 1);
        assert_eq!(c.xi_iters(6.0), 36);
        assert_eq!(c.max_trials(7, 1), 64 * 49);
        assert_eq!(c.ceil_log(8), 3);
        assert_eq!(c.ceil_log(9), 4);
    }

    #[test]
    fn integer_roots_are_exact() {
        assert_eq!(q_pow(16, 1, 2), 4.0);
        assert_eq!(q_pow(27, 1, 3), 3.0);
        assert_eq!(q_pow(27, 2, 3), 9.0);
        assert_eq!(q_pow(49, 0, 3), 1.0);
        assert!((q_pow(20, 1, 2) - 20f64.sqrt()).abs() < 1e-12);
    }

    fn gap6() -> Instance {
        gen_singleton_gap(6).unwrap()
    }

    #[test]
    fn always_true_predicate_takes_first_draw() {
        let inst = gap6();
        let s = ConditionalSampler::new(&inst, vec![0], |_, _| true, 10);
        let mut a = stream(1, 0, 0);
        let mut b = stream(1, 0, 0);
        let d = conditional_sample(&s, &mut a).unwrap();
        assert_eq!(d.trials, 1);
        assert_eq!(d.outcomes[0], inst.item(0).sample(&mut b));
    }

    #[test]
    fn conditional_draws_satisfy_predicate_with_geometric_cost() {
        let inst = gen_singleton_gap(4).unwrap();
        let s = ConditionalSampler::new(&inst, vec![0], |o, _| o[0] == 0, 10_000);
        let mut r = stream(2, 0, 0);
        let mut total = 0u64;
        for _ in 0..10_000 {
            let d = conditional_sample(&s, &mut r).unwrap();
            assert_eq!(d.outcomes[0], 0);
            total += d.trials;
        }
        let mean = total as f64 / 1e4;
        // geometric with p = 1/4: mean 4, sd of the mean sqrt(12)/100
        assert!((mean - 4.0).abs() < 4.0 * 12f64.sqrt() / 100.0, "{mean}");
    }

    #[test]
    fn impossible_predicate_fails_at_cap() {
        let inst = gap6();
        let s = ConditionalSampler::new(&inst, vec![0], |_, _| false, 1000);
        let e = conditional_sample(&s, &mut stream(0, 0, 0));
        assert!(matches!(e, Err(Error::RejectionFailure { trials: 1000 })));
    }

    #[test]
    fn select_skips_zero_deficit_and_stays_outside_base() {
        let inst = gap6();
        let all: Vec<usize> = (1..inst.m()).collect();
        // base realizes to everything: deficit 0 on every draw
        let full = Bitset::full(6);
        let s = ConditionalSampler::unconditional(&inst, vec![0]);
        let out = select(
            &inst,
            &all,
            &full,
            &s,
            6.0,
            &Constants::default(),
            EvalMode::Float,
            &mut stream(0, 0, 0),
        )
        .unwrap();
        assert!(out.items.is_empty());
        assert_eq!(out.greedy_calls, 0);

        let out = select(
            &inst,
            &all,
            &Bitset::new(6),
            &s,
            6.0,
            &Constants::default(),
            EvalMode::Float,
            &mut stream(0, 0, 0),
        )
        .unwrap();
        assert!(!out.items.contains(&0));
        assert!(!out.items.is_empty());
        // each sample misses one point; the greedy buys its singleton
        assert!(out.items.iter().all(|&j| j >= 1));
    }

    #[test]
    fn select_rejects_overlap_and_small_alpha() {
        let inst = gap6();
        let s = ConditionalSampler::unconditional(&inst, vec![0]);
        let c = Constants::default();
        let e = select(
            &inst,
            &[0, 1],
            &Bitset::new(6),
            &s,
            6.0,
            &c,
            EvalMode::Float,
            &mut stream(0, 0, 0),
        );
        assert!(matches!(e, Err(Error::ContractViolation(_))));
        let e = select(
            &inst,
            &[1],
            &Bitset::new(6),
            &s,
            0.5,
            &c,
            EvalMode::Float,
            &mut stream(0, 0, 0),
        );
        assert!(matches!(e, Err(Error::Domain(_))));
    }

    #[test]
    fn reduce_phases_nest_and_stop_when_event_vanishes() {
        let inst = gap6();
        let avail: Vec<usize> = (0..inst.m()).collect();
        let state = DeficitState::new(&inst, Bitset::new(6), 1, 1);
        let out = reduce(
            &inst,
            &avail,
            &state,
            &Constants::default(),
            EvalMode::Float,
            &mut stream(4, 0, 0),
        )
        .unwrap();
        assert_eq!(out.ordering[0], 0);
        let mut sorted = out.ordering.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), out.ordering.len());
        assert!(out.phase_boundaries.windows(2).all(|w| w[0] <= w[1]));
        // phase 1 already holds every item
        assert_eq!(out.ordering.len(), inst.m());
        assert_eq!(out.phase_boundaries, vec![inst.m()]);
        assert!(out.rejection_failure.is_none());
    }

    #[test]
    fn reduce_contract_errors() {
        let inst = gap6();
        let c = Constants::default();
        let done = DeficitState::new(&inst, Bitset::full(6), 1, 1);
        assert!(reduce(&inst, &[1], &done, &c, EvalMode::Float, &mut stream(0, 0, 0)).is_err());
        let fresh = DeficitState::new(&inst, Bitset::new(6), 1, 1);
        assert!(reduce(&inst, &[], &fresh, &c, EvalMode::Float, &mut stream(0, 0, 0)).is_err());
    }
}
