//! `F(A) = E[f(X_A)]`, the expected coverage of an index set.
//!
//! Two independent exact routes exist for coverage functions: enumeration of
//! the product distribution (budgeted) and the per-point closed form
//! `F(A) = Σ_u 1 − Π_{i∈A} (1 − Pr(u ∈ X_i))`, which follows from linearity
//! of expectation and item independence. The greedy maximizer uses the closed
//! form; enumeration stays the reference.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rational::{int, ratio, Rational};

/// Product-outcome budget for exact enumeration.
pub const EXACT_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMode {
    Exact { budget: u128 },
    MonteCarlo { samples: usize },
}

impl CoverageMode {
    pub fn exact() -> Self {
        CoverageMode::Exact { budget: EXACT_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    Exact(Rational),
    Estimate { mean: f64, std_err: f64, samples: usize },
}

impl Expectation {
    pub fn value(&self) -> f64 {
        match self {
            Expectation::Exact(r) => crate::rational::to_f64(r),
            Expectation::Estimate { mean, .. } => *mean,
        }
    }
}

/// Number of joint outcomes of `items`, or `None` on overflow.
pub fn product_size(inst: &Instance, items: &[usize]) -> Option<u128> {
    items
        .iter()
        .try_fold(1u128, |acc, &i| acc.checked_mul(inst.item(i).support().len() as u128))
}

fn check_indices(inst: &Instance, items: &[usize]) -> Result<()> {
    match items.iter().find(|&&i| i >= inst.m()) {
        Some(i) => Err(Error::Domain(format!(
            "item {i} outside instance with {} items",
            inst.m()
        ))),
        None => Ok(()),
    }
}

pub fn expected_coverage<R: Rng + ?Sized>(
    inst: &Instance,
    items: &[usize],
    mode: CoverageMode,
    rng: &mut R,
) -> Result<Expectation> {
    match mode {
        CoverageMode::Exact { budget } => expected_coverage_exact(inst, items, budget).map(Expectation::Exact),
        CoverageMode::MonteCarlo { samples } => {
            let (mean, std_err) = expected_coverage_mc(inst, items, samples, rng)?;
            Ok(Expectation::Estimate { mean, std_err, samples })
        }
    }
}

/// Exact `F(A)` by enumerating the product distribution of `items`.
pub fn expected_coverage_exact(inst: &Instance, items: &[usize], budget: u128) -> Result<Rational> {
    check_indices(inst, items)?;
    let mut uniq = items.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    match product_size(inst, &uniq) {
        Some(n) if n <= budget => {}
        _ => {
            return Err(Error::Capacity(format!(
                "exact enumeration over {} items exceeds the budget of {budget} outcomes; use monte-carlo mode",
                uniq.len()
            )))
        }
    }
    let mut total = BigUint::zero();
    let mut scale = BigUint::one();
    for &i in &uniq {
        scale *= inst.item(i).scale();
    }
    let cover = Bitset::new(inst.universe_size());
    enumerate(inst, &uniq, cover, BigUint::one(), &mut total);
    Ok(Rational::new(total.into(), scale.into()))
}

fn enumerate(inst: &Instance, items: &[usize], cover: Bitset, weight: BigUint, total: &mut BigUint) {
    let Some((&first, rest)) = items.split_first() else {
        *total += weight * BigUint::from(cover.count());
        return;
    };
    let it = inst.item(first);
    for (o, &w) in it.support().iter().zip(it.weights()) {
        let mut c = cover.clone();
        c.union_with(&o.covers);
        enumerate(inst, rest, c, &weight * w, total);
    }
}

/// Sample mean and standard error of `f(X_A)`.
pub fn expected_coverage_mc<R: Rng + ?Sized>(
    inst: &Instance,
    items: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_indices(inst, items)?;
    if samples == 0 {
        return Err(Error::Domain("monte-carlo mode needs at least one sample".into()));
    }
    let mut cover = Bitset::new(inst.universe_size());
    let (mut sum, mut sumsq) = (0f64, 0f64);
    for _ in 0..samples {
        cover.clear();
        for &i in items {
            let it = inst.item(i);
            cover.union_with(it.covers(it.sample(rng)));
        }
        let v = cover.count() as f64;
        sum += v;
        sumsq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

/// Exact expected number of points of `need` covered by `items`, via the
/// per-point closed form.
pub fn expected_coverage_closed_form(inst: &Instance, items: &[usize], need: &Bitset) -> Result<Rational> {
    check_indices(inst, items)?;
    let mut uncovered: Vec<Rational> = vec![int(1); inst.universe_size()];
    let mut uniq = items.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    for &i in &uniq {
        let it = inst.item(i);
        for &(p, w) in it.point_weights() {
            let miss = ratio(it.scale() - w, it.scale());
            uncovered[p as usize] *= miss;
        }
    }
    Ok(need
        .ones()
        .map(|u| int(1) - &uncovered[u])
        .fold(Rational::zero(), |a, b| a + b))
}
