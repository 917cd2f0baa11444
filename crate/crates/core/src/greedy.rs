//! Non-adaptive greedy maximization of expected coverage.
//!
//! Picks items by the ratio `F_A(j) / c_j` until `F(A) ≥ Q̃/3`, where `F` is
//! the expected marginal coverage of the points in `need` (the points left
//! uncovered by an already realized base set).

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rational::{int, ratio, to_f64, Rational};

/// Default Monte Carlo sample count per greedy step.
pub const DEFAULT_MC_SAMPLES: usize = 2048;

/// How `F` is evaluated inside the greedy loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Exact rationals from the per-point closed form; exact threshold test.
    Exact,
    /// The same closed form in `f64`.
    Float,
    /// Sample means; every candidate in a step is scored on one shared batch.
    MonteCarlo { samples: usize },
}

impl EvalMode {
    /// Whether repeated calls with equal inputs give equal outputs without an RNG.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, EvalMode::MonteCarlo { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyTrace {
    pub picked: Vec<usize>,
    /// `F_A(j*)/c_{j*}` at pick time.
    pub ratios: Vec<f64>,
    /// `F(A)` after each pick.
    pub f_values: Vec<f64>,
    /// Final `F(A)`, exact in [`EvalMode::Exact`].
    #[serde(skip)]
    pub exact_final: Option<Rational>,
    pub cost: u64,
}

impl GreedyTrace {
    fn empty() -> Self {
        Self {
            picked: vec![],
            ratios: vec![],
            f_values: vec![],
            exact_final: Some(Rational::zero()),
            cost: 0,
        }
    }
}

/// Greedy over `avail` for `g = f_B` where `B` is the realized set whose cover
/// is `base_covered`, with target `q_tilde = g(X)` for every full realization
/// of `avail`.
pub fn non_adapt_greedy<R: Rng + ?Sized>(
    inst: &Instance,
    avail: &[usize],
    base_covered: &Bitset,
    q_tilde: u64,
    mode: EvalMode,
    rng: &mut R,
) -> Result<GreedyTrace> {
    if q_tilde == 0 {
        return Ok(GreedyTrace::empty());
    }
    if let Some(&i) = avail.iter().find(|&&i| i >= inst.m()) {
        return Err(Error::Domain(format!("item {i} outside instance")));
    }
    let mut need = inst.ground_points().clone();
    need.difference_with(base_covered);
    let mut cands = avail.to_vec();
    cands.sort_unstable();
    cands.dedup();
    match mode {
        EvalMode::Float => greedy_float(inst, &cands, &need, q_tilde),
        EvalMode::Exact => greedy_exact(inst, &cands, &need, q_tilde),
        EvalMode::MonteCarlo { samples } => {
            if samples == 0 {
                return Err(Error::Domain("monte-carlo greedy needs samples > 0".into()));
            }
            greedy_mc(inst, &cands, &need, q_tilde, samples, rng)
        }
    }
}

fn exhausted(q_tilde: u64, f: f64) -> Error {
    Error::ContractViolation(format!(
        "greedy ran out of useful items at F(A) = {f:.6} < Q̃/3 with Q̃ = {q_tilde}; \
         Q̃ is not the value of every full realization"
    ))
}

/// Sparse `(point, Pr(point ∈ X_j))` restricted to `need`, as floats.
fn float_profile(inst: &Instance, j: usize, need: &Bitset) -> Vec<(usize, f64)> {
    let it = inst.item(j);
    let scale = it.scale() as f64;
    it.point_weights()
        .iter()
        .filter(|(p, _)| need.contains(*p as usize))
        .map(|&(p, w)| (p as usize, w as f64 / scale))
        .collect()
}

// Relative slack for float ties and the float threshold test.
const FLOAT_EPS: f64 = 1e-9;

fn greedy_float(inst: &Instance, cands: &[usize], need: &Bitset, q_tilde: u64) -> Result<GreedyTrace> {
    let profiles: Vec<Vec<(usize, f64)>> = cands.iter().map(|&j| float_profile(inst, j, need)).collect();
    let mut miss = vec![1.0f64; inst.universe_size()];
    let mut taken = vec![false; cands.len()];
    let mut trace = GreedyTrace::empty();
    trace.exact_final = None;
    let target = q_tilde as f64 / 3.0;
    let mut f = 0.0;
    while f < target * (1.0 - FLOAT_EPS) {
        let mut best: Option<(usize, f64, f64)> = None;
        for (ci, prof) in profiles.iter().enumerate() {
            if taken[ci] {
                continue;
            }
            let gain: f64 = prof.iter().map(|&(p, pi)| miss[p] * pi).sum();
            if gain <= FLOAT_EPS {
                continue;
            }
            let r = gain / inst.item(cands[ci]).cost() as f64;
            if best.is_none_or(|(_, br, _)| r > br * (1.0 + FLOAT_EPS)) {
                best = Some((ci, r, gain));
            }
        }
        let Some((ci, r, gain)) = best else {
            return Err(exhausted(q_tilde, f));
        };
        taken[ci] = true;
        for &(p, pi) in &profiles[ci] {
            miss[p] *= 1.0 - pi;
        }
        f += gain;
        trace.picked.push(cands[ci]);
        trace.ratios.push(r);
        trace.f_values.push(f);
        trace.cost += inst.item(cands[ci]).cost();
    }
    Ok(trace)
}

fn greedy_exact(inst: &Instance, cands: &[usize], need: &Bitset, q_tilde: u64) -> Result<GreedyTrace> {
    let profiles: Vec<Vec<(usize, Rational)>> = cands
        .iter()
        .map(|&j| {
            let it = inst.item(j);
            it.point_weights()
                .iter()
                .filter(|(p, _)| need.contains(*p as usize))
                .map(|&(p, w)| (p as usize, ratio(w, it.scale())))
                .collect()
        })
        .collect();
    let one = int(1);
    let mut miss: Vec<Rational> = vec![one.clone(); inst.universe_size()];
    let mut taken = vec![false; cands.len()];
    let mut trace = GreedyTrace::empty();
    let target = Rational::new(q_tilde.into(), 3.into());
    let mut f = Rational::zero();
    while f < target {
        // best = (candidate, gain, cost); compare gain_a / c_a > gain_b / c_b exactly
        let mut best: Option<(usize, Rational, u64)> = None;
        for (ci, prof) in profiles.iter().enumerate() {
            if taken[ci] {
                continue;
            }
            let gain = prof.iter().fold(Rational::zero(), |acc, (p, pi)| acc + &miss[*p] * pi);
            if !gain.is_positive() {
                continue;
            }
            let c = inst.item(cands[ci]).cost();
            let better = match &best {
                None => true,
                Some((_, bg, bc)) => &gain * int(*bc) > bg * int(c),
            };
            if better {
                best = Some((ci, gain, c));
            }
        }
        let Some((ci, gain, c)) = best else {
            return Err(exhausted(q_tilde, to_f64(&f)));
        };
        taken[ci] = true;
        for (p, pi) in &profiles[ci] {
            let keep = &one - pi;
            miss[*p] *= keep;
        }
        f += &gain;
        trace.picked.push(cands[ci]);
        trace.ratios.push(to_f64(&(gain / int(c))));
        trace.f_values.push(to_f64(&f));
        trace.cost += c;
    }
    trace.exact_final = Some(f);
    Ok(trace)
}

fn greedy_mc<R: Rng + ?Sized>(
    inst: &Instance,
    cands: &[usize],
    need: &Bitset,
    q_tilde: u64,
    samples: usize,
    rng: &mut R,
) -> Result<GreedyTrace> {
    let mut taken = vec![false; cands.len()];
    let mut picked_pos: Vec<usize> = Vec::new();
    let mut trace = GreedyTrace::empty();
    trace.exact_final = None;
    let n = inst.universe_size();
    let mut outcomes = vec![0u32; cands.len()];
    let mut covered = Bitset::new(n);
    loop {
        // one shared batch per step (common random numbers)
        let mut f_now = 0usize;
        let mut gains = vec![0usize; cands.len()];
        for _ in 0..samples {
            for (ci, &j) in cands.iter().enumerate() {
                outcomes[ci] = inst.item(j).sample(rng);
            }
            covered.clear();
            for &ci in &picked_pos {
                covered.union_with(inst.item(cands[ci]).covers(outcomes[ci]));
            }
            covered.intersect_with(need);
            f_now += covered.count();
            for (ci, &j) in cands.iter().enumerate() {
                if !taken[ci] {
                    gains[ci] += inst.item(j).covers(outcomes[ci]).count_and_and_not(need, &covered);
                }
            }
        }
        let f = f_now as f64 / samples as f64;
        if 3.0 * f >= q_tilde as f64 {
            break;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for (ci, &g) in gains.iter().enumerate() {
            if taken[ci] || g == 0 {
                continue;
            }
            let gain = g as f64 / samples as f64;
            let r = gain / inst.item(cands[ci]).cost() as f64;
            if best.is_none_or(|(_, br, _)| r > br) {
                best = Some((ci, r, gain));
            }
        }
        let Some((ci, r, gain)) = best else {
            return Err(exhausted(q_tilde, f));
        };
        taken[ci] = true;
        picked_pos.push(ci);
        trace.picked.push(cands[ci]);
        trace.ratios.push(r);
        trace.f_values.push(f + gain);
        trace.cost += inst.item(cands[ci]).cost();
    }
    Ok(trace)
}

/// Textbook cost-ratio greedy set cover on point-mass items: repeatedly take
/// the set with the most newly covered points per unit cost (lowest index on
/// ties) until all of `need` is covered or `stop_at` points are.
pub fn classic_greedy_cover(sets: &[(Bitset, u64)], need: &Bitset, stop_at: usize) -> Vec<usize> {
    let mut covered = Bitset::new(need.len());
    let mut picked = Vec::new();
    while covered.count_and(need) < stop_at {
        let mut best: Option<(usize, usize, u64)> = None;
        for (i, (s, c)) in sets.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            let gain = s.count_and_and_not(need, &covered);
            if gain == 0 {
                continue;
            }
            // gain / c > best_gain / best_c
            if best.is_none_or(|(_, bg, bc)| gain as u128 * bc as u128 > bg as u128 * *c as u128) {
                best = Some((i, gain, *c));
            }
        }
        let Some((i, _, _)) = best else { break };
        covered.union_with(&sets[i].0);
        picked.push(i);
    }
    picked
}
