//! Stochastic items, instances, realizations and instance generators.

use std::collections::BTreeMap;
use std::path::Path;

use num_integer::Integer;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::rational::{ratio, Rational};
use crate::rng::{self, StreamRng};
use crate::submodular::{Coverage, GroundElement};

/// One support point of a stochastic item: the set it realizes to and its
/// probability `num/den`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub num: u64,
    pub den: u64,
    pub covers: Bitset,
}

impl Outcome {
    pub fn prob(&self) -> Rational {
        ratio(self.num, self.den)
    }
}

/// An item with integer cost and a discrete distribution over covered sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticItem {
    cost: u64,
    support: Vec<Outcome>,
    // probabilities rescaled to the common denominator `scale`
    weights: Vec<u64>,
    cumulative: Vec<u64>,
    scale: u64,
    reach: Bitset,
    sure: Bitset,
    // (point, Σ_o weight_o·[point ∈ covers_o]); probability = weight / scale
    point_weights: Vec<(u32, u64)>,
}

impl StochasticItem {
    pub fn new(cost: u64, support: Vec<Outcome>) -> Result<Self> {
        if cost == 0 {
            return Err(Error::InvalidData("item cost must be at least 1".into()));
        }
        let Some(first) = support.first() else {
            return Err(Error::InvalidData("item support is empty".into()));
        };
        let universe = first.covers.len();
        let mut scale: u64 = 1;
        for o in &support {
            if o.den == 0 {
                return Err(Error::InvalidData("probability denominator is 0".into()));
            }
            if o.num == 0 || o.num > o.den {
                return Err(Error::InvalidData(format!(
                    "probability {}/{} outside (0, 1]",
                    o.num, o.den
                )));
            }
            if o.covers.len() != universe {
                return Err(Error::InvalidData("outcomes over different universes".into()));
            }
            let den = o.den / o.num.gcd(&o.den);
            scale = scale
                .checked_mul(den / scale.gcd(&den))
                .ok_or_else(|| Error::Capacity("probability denominators too large".into()))?;
        }
        let mut weights = Vec::with_capacity(support.len());
        for o in &support {
            let w = (scale / o.den)
                .checked_mul(o.num)
                .ok_or_else(|| Error::Capacity("probability denominators too large".into()))?;
            weights.push(w);
        }
        let total: u128 = weights.iter().map(|&w| w as u128).sum();
        if total != scale as u128 {
            return Err(Error::InvalidData(format!(
                "probabilities sum to {total}/{scale}, expected 1"
            )));
        }
        let cumulative = weights
            .iter()
            .scan(0u64, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let mut reach = Bitset::new(universe);
        let mut sure = Bitset::full(universe);
        let mut acc: BTreeMap<u32, u64> = BTreeMap::new();
        for (o, &w) in support.iter().zip(&weights) {
            reach.union_with(&o.covers);
            sure.intersect_with(&o.covers);
            for p in o.covers.ones() {
                *acc.entry(p as u32).or_default() += w;
            }
        }
        Ok(Self {
            cost,
            support,
            weights,
            cumulative,
            scale,
            reach,
            sure,
            point_weights: acc.into_iter().collect(),
        })
    }

    /// A point mass on `covers`.
    pub fn deterministic(cost: u64, covers: Bitset) -> Result<Self> {
        Self::new(cost, vec![Outcome { num: 1, den: 1, covers }])
    }

    /// Uniform distribution over the given sets.
    pub fn uniform(cost: u64, sets: Vec<Bitset>) -> Result<Self> {
        let n = sets.len() as u64;
        Self::new(
            cost,
            sets.into_iter()
                .map(|covers| Outcome { num: 1, den: n, covers })
                .collect(),
        )
    }

    pub fn cost(&self) -> u64 {
        self.cost
    }

    pub fn support(&self) -> &[Outcome] {
        &self.support
    }

    pub fn covers(&self, outcome: u32) -> &Bitset {
        &self.support[outcome as usize].covers
    }

    pub fn is_deterministic(&self) -> bool {
        self.support.len() == 1
    }

    /// Common denominator of the outcome probabilities.
    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// Outcome probabilities as integers over [`Self::scale`].
    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    /// Union of all outcomes.
    pub fn reach(&self) -> &Bitset {
        &self.reach
    }

    /// Points covered by every outcome.
    pub fn sure(&self) -> &Bitset {
        &self.sure
    }

    /// `(point, weight)` pairs with `Pr(point ∈ X) = weight / scale`.
    pub fn point_weights(&self) -> &[(u32, u64)] {
        &self.point_weights
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.support.len() == 1 {
            return 0;
        }
        let x = rng.gen_range(0..self.scale);
        self.cumulative.partition_point(|&c| c <= x) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdificeMeta {
    pub p: u64,
    pub k: usize,
    pub s: usize,
    pub b: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edifice: Option<EdificeMeta>,
}

/// A stochastic submodular cover instance over a coverage function.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    universe_size: usize,
    items: Vec<StochasticItem>,
    ground_points: Bitset,
    always: Bitset,
    max_cost: u64,
    pub metadata: Metadata,
}

impl Instance {
    /// Structural construction. Feasibility of every realization is checked
    /// separately by [`Instance::check_feasible`].
    pub fn new(universe_size: usize, items: Vec<StochasticItem>, metadata: Metadata) -> Result<Self> {
        let mut ground_points = Bitset::new(universe_size);
        let mut always = Bitset::new(universe_size);
        for (i, it) in items.iter().enumerate() {
            if it.reach.len() != universe_size {
                return Err(Error::InvalidData(format!(
                    "item {i} covers points outside the universe of size {universe_size}"
                )));
            }
            ground_points.union_with(&it.reach);
            always.union_with(&it.sure);
        }
        let max_cost = items.iter().map(|it| it.cost).max().unwrap_or(1);
        Ok(Self {
            universe_size,
            items,
            ground_points,
            always,
            max_cost,
            metadata,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn items(&self) -> &[StochasticItem] {
        &self.items
    }

    pub fn item(&self, i: usize) -> &StochasticItem {
        &self.items[i]
    }

    pub fn m(&self) -> usize {
        self.items.len()
    }

    /// `Q = f(E)`.
    pub fn q(&self) -> u64 {
        self.ground_points.count() as u64
    }

    /// Points of the universe reachable by some outcome.
    pub fn ground_points(&self) -> &Bitset {
        &self.ground_points
    }

    /// `C`, the largest item cost.
    pub fn max_cost(&self) -> u64 {
        self.max_cost
    }

    pub fn total_cost(&self) -> u64 {
        self.items.iter().map(|it| it.cost).sum()
    }

    pub fn cost_of(&self, items: &[usize]) -> u64 {
        items.iter().map(|&i| self.items[i].cost).sum()
    }

    /// Every realization of the full item set covers all of `E` iff each point
    /// of `E` is covered by every outcome of some single item (items are
    /// independent, so otherwise each item can independently miss the point).
    pub fn is_feasible(&self) -> bool {
        self.ground_points.is_subset(&self.always)
    }

    pub fn check_feasible(&self) -> Result<()> {
        if self.is_feasible() {
            return Ok(());
        }
        let mut missing = self.ground_points.clone();
        missing.difference_with(&self.always);
        Err(Error::InvalidData(format!(
            "some realization leaves points {:?} uncovered",
            missing.to_vec()
        )))
    }

    /// The coverage function over the distinct outcome sets of all items.
    pub fn coverage_fn(&self) -> Result<Coverage> {
        let mut seen: BTreeMap<Vec<usize>, ()> = BTreeMap::new();
        let mut elements = Vec::new();
        for it in &self.items {
            for o in &it.support {
                let pts = o.covers.to_vec();
                if seen.insert(pts.clone(), ()).is_none() {
                    elements.push(GroundElement {
                        label: format!("{pts:?}"),
                        covers: o.covers.clone(),
                    });
                }
            }
        }
        Coverage::new(self.universe_size, elements)
    }

    /// Union of the realized sets of `items` under `real`.
    pub fn realized_cover(&self, real: &Realization, items: &[usize]) -> Bitset {
        let mut acc = Bitset::new(self.universe_size);
        for &i in items {
            acc.union_with(self.items[i].covers(real.0[i]));
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            universe_size: self.universe_size,
            items: self
                .items
                .iter()
                .map(|it| ItemFile {
                    cost: it.cost,
                    support: it
                        .support
                        .iter()
                        .map(|o| OutcomeFile {
                            num: o.num,
                            den: o.den,
                            covers: o.covers.to_vec(),
                        })
                        .collect(),
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string(&file)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and structurally validates an instance. Feasibility is not checked.
    pub fn from_json_unchecked(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        let n = file.universe_size;
        let mut items = Vec::with_capacity(file.items.len());
        for (i, it) in file.items.into_iter().enumerate() {
            let mut support = Vec::with_capacity(it.support.len());
            for o in it.support {
                if let Some(p) = o.covers.iter().find(|&&p| p >= n) {
                    return Err(Error::InvalidData(format!(
                        "item {i}: point {p} outside universe of size {n}"
                    )));
                }
                support.push(Outcome {
                    num: o.num,
                    den: o.den,
                    covers: Bitset::from_points(n, o.covers),
                });
            }
            items
                .push(StochasticItem::new(it.cost, support).map_err(|e| Error::InvalidData(format!("item {i}: {e}")))?);
        }
        Self::new(n, items, file.metadata)
    }

    /// Parses an instance and checks that every realization is feasible.
    pub fn from_json(s: &str) -> Result<Self> {
        let inst = Self::from_json_unchecked(s)?;
        inst.check_feasible()?;
        Ok(inst)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    universe_size: usize,
    items: Vec<ItemFile>,
    #[serde(default)]
    metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
struct ItemFile {
    cost: u64,
    support: Vec<OutcomeFile>,
}

#[derive(Serialize, Deserialize)]
struct OutcomeFile {
    num: u64,
    den: u64,
    covers: Vec<usize>,
}

/// One outcome index per item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Realization(pub Vec<u32>);

impl Realization {
    pub fn outcome(&self, item: usize) -> u32 {
        self.0[item]
    }
}

pub fn sample_realization<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Realization {
    Realization(inst.items.iter().map(|it| it.sample(rng)).collect())
}

/// Appends a deterministic item covering all of `E`, priced above all other
/// items combined.
pub fn add_completion_item(inst: &Instance) -> Result<Instance> {
    let mut items = inst.items.clone();
    items.push(StochasticItem::deterministic(
        1 + inst.total_cost(),
        inst.ground_points.clone(),
    )?);
    Instance::new(inst.universe_size, items, inst.metadata.clone())
}

/// `n` singletons plus one item that realizes to `U ∖ {e*}` for a uniform `e*`.
pub fn gen_singleton_gap(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::Domain(format!("singleton-gap needs n >= 2, got {n}")));
    }
    let complements = (0..n)
        .map(|e| {
            let mut s = Bitset::full(n);
            s.remove(e);
            s
        })
        .collect();
    let mut items = vec![StochasticItem::uniform(1, complements)?];
    for e in 0..n {
        items.push(StochasticItem::deterministic(1, Bitset::from_points(n, [e]))?);
    }
    let mut params = BTreeMap::new();
    params.insert("n".to_string(), serde_json::json!(n));
    Instance::new(
        n,
        items,
        Metadata {
            name: format!("singleton-gap-{n}"),
            generator: "singleton-gap".into(),
            seed: None,
            params,
            edifice: None,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSetCoverParams {
    pub n: usize,
    pub m: usize,
    pub max_support: usize,
    pub density: f64,
    pub max_cost: u64,
    pub seed: u64,
}

/// `m` random items over `n` points, followed by the completion item.
pub fn gen_random_setcover(p: &RandomSetCoverParams) -> Result<Instance> {
    if p.n == 0 || p.m == 0 || p.max_support == 0 || p.max_cost == 0 {
        return Err(Error::Domain("random-setcover parameters must be positive".into()));
    }
    if !(p.density > 0.0 && p.density <= 1.0) {
        return Err(Error::Domain(format!("density {} not in (0, 1]", p.density)));
    }
    let mut rng: StreamRng = rng::stream(p.seed, 0, rng::tag::GENERATOR);
    let mut items = Vec::with_capacity(p.m + 1);
    for _ in 0..p.m {
        let k = rng.gen_range(1..=p.max_support);
        let weights: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
        let den: u64 = weights.iter().sum();
        let support = weights
            .iter()
            .map(|&w| {
                let g = w.gcd(&den);
                let covers = Bitset::from_points(p.n, (0..p.n).filter(|_| rng.gen_bool(p.density)));
                Outcome {
                    num: w / g,
                    den: den / g,
                    covers,
                }
            })
            .collect();
        items.push(StochasticItem::new(rng.gen_range(1..=p.max_cost), support)?);
    }
    let mut params = BTreeMap::new();
    params.insert("n".into(), serde_json::json!(p.n));
    params.insert("m".into(), serde_json::json!(p.m));
    params.insert("max_support".into(), serde_json::json!(p.max_support));
    params.insert("density".into(), serde_json::json!(p.density));
    params.insert("max_cost".into(), serde_json::json!(p.max_cost));
    let raw = Instance::new(
        p.n,
        items,
        Metadata {
            name: format!("random-setcover-n{}-m{}-s{}", p.n, p.m, p.seed),
            generator: "random-setcover".into(),
            seed: Some(p.seed),
            params,
            edifice: None,
        },
    )?;
    add_completion_item(&raw)
}
