//! The r-round adaptive driver.
//!
//! Round `k` sees only the realizations consumed in rounds `< k`. It builds
//! an ordering with [`reduce`], appends every other remaining item by
//! ascending index, and commits the ordering with threshold
//! `τ_k = ⌈Q − Q^{(r−k)/r}⌉` (`τ_r = Q`). The gate then consumes the ordering
//! until coverage reaches `τ_k`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::gate::ObservationGate;
use crate::greedy::EvalMode;
use crate::instance::{Instance, Realization};
use crate::rng;
use crate::select::{q_pow, reduce, Constants, DeficitState};

/// Thresholds `τ_1..τ_r`.
pub fn thresholds(q: u64, r: usize) -> Result<Vec<u64>> {
    if r == 0 {
        return Err(Error::Domain("number of rounds must be positive".into()));
    }
    Ok((1..=r)
        .map(|k| {
            if k == r {
                q
            } else {
                let t = (q as f64 - q_pow(q, (r - k) as u32, r as u32)).ceil();
                (t.max(0.0) as u64).min(q)
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundPlan {
    pub k: usize,
    pub tau: u64,
    /// Permutation of every item not consumed before this round.
    pub ordering: Vec<usize>,
    /// Length of the Reduce prefix of `ordering`.
    pub reduce_len: usize,
    pub phase_boundaries: Vec<usize>,
    pub rejection_failure: Option<u64>,
}

/// What a planner may see at the start of round `k`.
#[derive(Debug, Clone)]
pub struct RoundContext {
    pub k: usize,
    pub r: usize,
    pub tau: u64,
    pub state: DeficitState,
    /// Unconsumed items, ascending.
    pub avail: Vec<usize>,
    /// Consumed `(item, outcome)` pairs in reveal order.
    pub history: Vec<(usize, u32)>,
}

impl RoundContext {
    /// Sorted history: the canonical key of the information available.
    pub fn history_key(&self) -> Vec<(usize, u32)> {
        let mut h = self.history.clone();
        h.sort_unstable();
        h
    }
}

/// Plans one round: Reduce on the current deficit, then the rest ascending.
pub fn plan_round<R: Rng + ?Sized>(
    inst: &Instance,
    ctx: &RoundContext,
    consts: &Constants,
    mode: EvalMode,
    rng: &mut R,
) -> Result<RoundPlan> {
    let coverage = inst.q() - ctx.state.q_k;
    let mut plan = RoundPlan {
        k: ctx.k,
        tau: ctx.tau,
        ordering: Vec::with_capacity(ctx.avail.len()),
        reduce_len: 0,
        phase_boundaries: Vec::new(),
        rejection_failure: None,
    };
    if ctx.state.q_k > 0 && coverage < ctx.tau && !ctx.avail.is_empty() {
        let red = reduce(inst, &ctx.avail, &ctx.state, consts, mode, rng)?;
        plan.reduce_len = red.ordering.len();
        plan.phase_boundaries = red.phase_boundaries;
        plan.rejection_failure = red.rejection_failure;
        plan.ordering = red.ordering;
    }
    let mut seen = vec![false; inst.m()];
    for &i in &plan.ordering {
        seen[i] = true;
    }
    plan.ordering.extend(ctx.avail.iter().copied().filter(|&i| !seen[i]));
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub k: usize,
    pub tau: u64,
    pub ordering: Vec<usize>,
    pub phase_boundaries: Vec<usize>,
    pub consumed_prefix_len: usize,
    pub cost: u64,
    pub coverage: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub r: usize,
    pub q: u64,
    pub rounds: Vec<RoundRecord>,
    pub chosen: Vec<usize>,
    pub cost: u64,
    pub coverage: u64,
}

impl RunRecord {
    /// Cost recomputed from the consumed prefixes of the recorded orderings.
    pub fn recount_cost(&self, inst: &Instance) -> u64 {
        self.rounds
            .iter()
            .flat_map(|rd| &rd.ordering[..rd.consumed_prefix_len])
            .map(|&i| inst.item(i).cost())
            .sum()
    }
}

/// Drives `r` rounds through the gate; `planner` sees only a [`RoundContext`].
pub fn run_rounds<P>(gate: &mut ObservationGate<'_>, r: usize, mut planner: P) -> Result<RunRecord>
where
    P: FnMut(&RoundContext) -> Result<RoundPlan>,
{
    let inst = gate.instance();
    if r == 0 || r > inst.m() {
        return Err(Error::Domain(format!("rounds must lie in 1..={}, got {r}", inst.m())));
    }
    if !gate.history().is_empty() {
        return Err(Error::ContractViolation("gate is not fresh".into()));
    }
    let taus = thresholds(inst.q(), r)?;
    let mut rec = RunRecord {
        r,
        q: inst.q(),
        rounds: Vec::with_capacity(r),
        chosen: Vec::new(),
        cost: 0,
        coverage: 0,
    };
    for (k, &tau) in (1..=r).zip(&taus) {
        let ctx = RoundContext {
            k,
            r,
            tau,
            state: DeficitState::new(inst, gate.covered().clone(), k, r),
            avail: gate.remaining(),
            history: gate.history().to_vec(),
        };
        let plan = planner(&ctx)?;
        gate.commit(&plan.ordering, tau)?;
        let out = gate.execute()?;
        rec.chosen.extend(&out.consumed);
        rec.rounds.push(RoundRecord {
            k,
            tau,
            consumed_prefix_len: out.consumed.len(),
            ordering: plan.ordering,
            phase_boundaries: plan.phase_boundaries,
            cost: out.cost,
            coverage: out.coverage,
        });
    }
    rec.cost = gate.cost();
    rec.coverage = gate.coverage();
    if !gate.is_covered() {
        return Err(Error::ContractViolation(format!(
            "run ended at coverage {} < Q = {}",
            rec.coverage, rec.q
        )));
    }
    Ok(rec)
}

/// One r-round run with plans drawn from `rng`.
pub fn r_round_adaptive<R: Rng + ?Sized>(
    gate: &mut ObservationGate<'_>,
    r: usize,
    consts: &Constants,
    mode: EvalMode,
    rng: &mut R,
) -> Result<RunRecord> {
    let inst = gate.instance();
    run_rounds(gate, r, |ctx| plan_round(inst, ctx, consts, mode, rng))
}

/// Source of the planner's coins across trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanCoins {
    /// Coins keyed by (seed, round, sorted history). Trials that reach the
    /// same history share a plan, which is then computed once.
    #[default]
    PerHistory,
    /// Fresh coins per (seed, trial, round).
    PerTrial,
}

type PlanKey = (usize, Vec<(usize, u32)>);

// Entries beyond this are computed but not stored.
const PLAN_CACHE_LIMIT: usize = 1 << 18;

/// Thread-safe r-round policy over one instance.
pub struct RoundPlanner<'a> {
    inst: &'a Instance,
    r: usize,
    consts: Constants,
    mode: EvalMode,
    coins: PlanCoins,
    seed: u64,
    cache: RwLock<HashMap<PlanKey, Arc<RoundPlan>>>,
}

impl<'a> RoundPlanner<'a> {
    pub fn new(inst: &'a Instance, r: usize, consts: Constants, mode: EvalMode, coins: PlanCoins, seed: u64) -> Self {
        Self {
            inst,
            r,
            consts,
            mode,
            coins,
            seed,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn cached_plans(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    fn compute(&self, ctx: &RoundContext, key_words: impl IntoIterator<Item = u64>) -> Result<RoundPlan> {
        let mut rng = rng::stream(rng::fold_key(self.seed, key_words), 0, rng::tag::PLAN);
        plan_round(self.inst, ctx, &self.consts, self.mode, &mut rng)
    }

    /// Plan for `ctx` in trial `trial`.
    pub fn plan(&self, ctx: &RoundContext, trial: u64) -> Result<Arc<RoundPlan>> {
        match self.coins {
            PlanCoins::PerTrial => Ok(Arc::new(self.compute(ctx, [trial, ctx.k as u64, self.r as u64])?)),
            PlanCoins::PerHistory => {
                let key = (ctx.k, ctx.history_key());
                if let Some(p) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
                    return Ok(p);
                }
                let words = [ctx.k as u64, self.r as u64]
                    .into_iter()
                    .chain(key.1.iter().flat_map(|&(i, o)| [i as u64, o as u64]));
                let plan = Arc::new(self.compute(ctx, words)?);
                if let Ok(mut c) = self.cache.write() {
                    if c.len() < PLAN_CACHE_LIMIT {
                        c.entry(key).or_insert_with(|| plan.clone());
                    }
                }
                Ok(plan)
            }
        }
    }

    /// Runs trial `trial` on the hidden realization; returns the record and
    /// the number of gate violations.
    pub fn run(&self, hidden: Realization, trial: u64) -> Result<(RunRecord, usize)> {
        let mut gate = ObservationGate::new(self.inst, hidden)?;
        let rec = run_rounds(&mut gate, self.r, |ctx| self.plan(ctx, trial).map(|p| (*p).clone()))?;
        Ok((rec, gate.violations().len()))
    }
}

/// Cover of a history.
pub fn history_cover(inst: &Instance, history: &[(usize, u32)]) -> Bitset {
    let mut c = Bitset::new(inst.universe_size());
    for &(i, o) in history {
        c.union_with(inst.item(i).covers(o));
    }
    c
}
