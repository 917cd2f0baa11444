//! Monotone submodular set functions over a finite ground set.
//!
//! Ground elements are addressed by dense indices `0..ground_size()`. The
//! coverage function is the workhorse; [`TableFn`] holds explicit per-subset
//! values for small ground sets and [`Marginal`] materializes `f_S`.

use serde::Serialize;

use crate::bitset::Bitset;
use crate::error::{Error, Result};

/// Largest ground set the exhaustive checkers and [`TableFn`] accept.
pub const MAX_EXHAUSTIVE_GROUND: usize = 20;

pub trait SubmodularFn: Sync {
    fn ground_size(&self) -> usize;

    /// `f(S)` for a set of ground-element indices. Duplicates are allowed.
    fn eval(&self, set: &[usize]) -> Result<u64>;

    /// `f(E)`, the largest attainable value.
    fn q_max(&self) -> Result<u64> {
        let all: Vec<usize> = (0..self.ground_size()).collect();
        self.eval(&all)
    }
}

impl<F: SubmodularFn + ?Sized> SubmodularFn for &F {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn eval(&self, set: &[usize]) -> Result<u64> {
        (**self).eval(set)
    }
}

fn check_indices(set: &[usize], ground: usize) -> Result<()> {
    match set.iter().find(|&&e| e >= ground) {
        Some(e) => Err(Error::Domain(format!(
            "element {e} outside ground set of size {ground}"
        ))),
        None => Ok(()),
    }
}

/// A ground element of a coverage function: the universe points it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundElement {
    pub covers: Bitset,
    pub label: String,
}

/// `f(S) = |∪_{e∈S} covers(e)|`.
#[derive(Debug, Clone)]
pub struct Coverage {
    universe_size: usize,
    elements: Vec<GroundElement>,
}

impl Coverage {
    pub fn new(universe_size: usize, elements: Vec<GroundElement>) -> Result<Self> {
        for e in &elements {
            if e.covers.len() != universe_size {
                return Err(Error::InvalidData(format!(
                    "element {:?} is over a universe of size {}, expected {universe_size}",
                    e.label,
                    e.covers.len()
                )));
            }
        }
        let mut labels: Vec<&str> = elements.iter().map(|e| e.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidData("duplicate ground element label".into()));
        }
        Ok(Self {
            universe_size,
            elements,
        })
    }

    /// Builds a coverage function from point lists, labelling elements by index.
    pub fn from_point_sets(universe_size: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let mut elements = Vec::with_capacity(sets.len());
        for (i, pts) in sets.iter().enumerate() {
            if let Some(p) = pts.iter().find(|&&p| p >= universe_size) {
                return Err(Error::Domain(format!(
                    "point {p} outside universe of size {universe_size}"
                )));
            }
            elements.push(GroundElement {
                covers: Bitset::from_points(universe_size, pts.iter().copied()),
                label: format!("e{i}"),
            });
        }
        Self::new(universe_size, elements)
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn elements(&self) -> &[GroundElement] {
        &self.elements
    }

    pub fn union_of(&self, set: &[usize]) -> Result<Bitset> {
        check_indices(set, self.elements.len())?;
        let mut acc = Bitset::new(self.universe_size);
        for &e in set {
            acc.union_with(&self.elements[e].covers);
        }
        Ok(acc)
    }
}

impl SubmodularFn for Coverage {
    fn ground_size(&self) -> usize {
        self.elements.len()
    }

    fn eval(&self, set: &[usize]) -> Result<u64> {
        Ok(self.union_of(set)?.count() as u64)
    }
}

/// Explicit value table indexed by subset bit mask (bit `i` = element `i`).
#[derive(Debug, Clone)]
pub struct TableFn {
    ground: usize,
    values: Vec<u64>,
}

impl TableFn {
    pub fn new(ground: usize, values: Vec<u64>) -> Result<Self> {
        if ground > MAX_EXHAUSTIVE_GROUND {
            return Err(Error::Capacity(format!(
                "explicit tables support at most {MAX_EXHAUSTIVE_GROUND} elements, got {ground}"
            )));
        }
        if values.len() != 1usize << ground {
            return Err(Error::InvalidData(format!(
                "table over {ground} elements needs {} values, got {}",
                1usize << ground,
                values.len()
            )));
        }
        if values[0] != 0 {
            return Err(Error::InvalidData("f(∅) must be 0".into()));
        }
        Ok(Self { ground, values })
    }

    pub fn from_fn(ground: usize, f: impl Fn(u32) -> u64) -> Result<Self> {
        if ground > MAX_EXHAUSTIVE_GROUND {
            return Err(Error::Capacity(format!(
                "explicit tables support at most {MAX_EXHAUSTIVE_GROUND} elements, got {ground}"
            )));
        }
        Self::new(ground, (0..1u32 << ground).map(f).collect())
    }

    /// Tabulates any function over a small ground set.
    pub fn materialize<F: SubmodularFn + ?Sized>(f: &F) -> Result<Self> {
        let n = f.ground_size();
        if n > MAX_EXHAUSTIVE_GROUND {
            return Err(Error::Capacity(format!(
                "cannot tabulate {n} elements (limit {MAX_EXHAUSTIVE_GROUND})"
            )));
        }
        let mut values = Vec::with_capacity(1 << n);
        for mask in 0..1u32 << n {
            values.push(f.eval(&mask_to_set(mask))?);
        }
        Self::new(n, values)
    }
}

impl SubmodularFn for TableFn {
    fn ground_size(&self) -> usize {
        self.ground
    }

    fn eval(&self, set: &[usize]) -> Result<u64> {
        check_indices(set, self.ground)?;
        let mask = set.iter().fold(0usize, |m, &e| m | (1 << e));
        Ok(self.values[mask])
    }
}

/// `f_S(T) = f(S ∪ T) − f(S)` as a function of `T`.
pub struct Marginal<'a, F: ?Sized> {
    f: &'a F,
    base: Vec<usize>,
    base_value: u64,
}

impl<'a, F: SubmodularFn + ?Sized> Marginal<'a, F> {
    pub fn new(f: &'a F, base: Vec<usize>) -> Result<Self> {
        let base_value = f.eval(&base)?;
        Ok(Self { f, base, base_value })
    }
}

impl<F: SubmodularFn + ?Sized> SubmodularFn for Marginal<'_, F> {
    fn ground_size(&self) -> usize {
        self.f.ground_size()
    }

    fn eval(&self, set: &[usize]) -> Result<u64> {
        let mut joined = self.base.clone();
        joined.extend_from_slice(set);
        let v = self.f.eval(&joined)?;
        v.checked_sub(self.base_value)
            .ok_or_else(|| Error::ContractViolation("function is not monotone: negative marginal".into()))
    }
}

/// `f_S(T)`.
pub fn marginal<F: SubmodularFn + ?Sized>(f: &F, s: &[usize], t: &[usize]) -> Result<u64> {
    let mut joined = s.to_vec();
    joined.extend_from_slice(t);
    let with = f.eval(&joined)?;
    let without = f.eval(s)?;
    with.checked_sub(without)
        .ok_or_else(|| Error::ContractViolation("negative marginal".into()))
}

pub fn mask_to_set(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// A violating configuration: sets `s ⊆ t` and, for submodularity, the element `e ∉ t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    pub e: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub monotone: bool,
    pub submodular: bool,
    pub witness: Option<Witness>,
}

fn tabulate<F: SubmodularFn + ?Sized>(f: &F) -> Result<Vec<u64>> {
    let n = f.ground_size();
    if n > MAX_EXHAUSTIVE_GROUND {
        return Err(Error::Capacity(format!(
            "exhaustive check needs |E| <= {MAX_EXHAUSTIVE_GROUND}, got {n}"
        )));
    }
    (0..1u32 << n).map(|m| f.eval(&mask_to_set(m))).collect()
}

/// Exhaustively checks monotonicity and submodularity over all `2^|E|` subsets.
///
/// Single-element steps suffice: `f(S) ≤ f(S+e)` for all `S, e` gives
/// monotonicity, and `f_S(e) ≥ f_{S+e'}(e)` for all `S` and distinct
/// `e, e' ∉ S` gives diminishing returns for every `S ⊆ T`.
pub fn check_monotone_submodular<F: SubmodularFn + ?Sized>(f: &F) -> Result<StructureReport> {
    let n = f.ground_size();
    let vals = tabulate(f)?;
    let mut report = StructureReport {
        monotone: true,
        submodular: true,
        witness: None,
    };
    for s in 0..1u32 << n {
        for e in 0..n {
            if s >> e & 1 == 1 {
                continue;
            }
            let se = s | 1 << e;
            if report.monotone && vals[se as usize] < vals[s as usize] {
                report.monotone = false;
                report.witness.get_or_insert(Witness {
                    s: mask_to_set(s),
                    t: mask_to_set(se),
                    e: None,
                });
            }
            if !report.submodular {
                continue;
            }
            let gain = vals[se as usize] as i128 - vals[s as usize] as i128;
            for e2 in 0..n {
                if e2 == e || s >> e2 & 1 == 1 {
                    continue;
                }
                let t = s | 1 << e2;
                let gain_t = vals[(t | 1 << e) as usize] as i128 - vals[t as usize] as i128;
                if gain < gain_t {
                    report.submodular = false;
                    if report.witness.is_none() {
                        report.witness = Some(Witness {
                            s: mask_to_set(s),
                            t: mask_to_set(t),
                            e: Some(e),
                        });
                    }
                    break;
                }
            }
        }
        if !report.monotone && !report.submodular {
            break;
        }
    }
    Ok(report)
}

/// Exhaustively checks `f(S) ≤ f(T) + Σ_{e∈S∖T} f_T(e)` for every pair of
/// subsets and returns the first violating `(S, T)`.
pub fn check_marginal_sum_bound<F: SubmodularFn + ?Sized>(f: &F) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
    let n = f.ground_size();
    let vals = tabulate(f)?;
    for t in 0..1u32 << n {
        let ft = vals[t as usize] as i128;
        let gains: Vec<i128> = (0..n).map(|e| vals[(t | 1 << e) as usize] as i128 - ft).collect();
        for s in 0..1u32 << n {
            let extra: i128 = (0..n)
                .filter(|&e| s >> e & 1 == 1 && t >> e & 1 == 0)
                .map(|e| gains[e])
                .sum();
            if vals[s as usize] as i128 > ft + extra {
                return Ok(Some((mask_to_set(s), mask_to_set(t))));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cov() -> Coverage {
        Coverage::from_point_sets(4, &[vec![0, 1], vec![1, 2], vec![3]]).unwrap()
    }

    #[test]
    fn eval_coverage() {
        let f = small_cov();
        assert_eq!(f.eval(&[0, 1]).unwrap(), 3);
        assert_eq!(f.eval(&[]).unwrap(), 0);
        assert_eq!(f.q_max().unwrap(), 4);
        assert!(matches!(f.eval(&[3]), Err(Error::Domain(_))));
    }

    #[test]
    fn marginal_values() {
        let f = small_cov();
        assert_eq!(marginal(&f, &[0], &[1]).unwrap(), 1);
        assert_eq!(marginal(&f, &[0, 1], &[1]).unwrap(), 0);
        let g = Marginal::new(&f, vec![0]).unwrap();
        assert_eq!(g.eval(&[1, 2]).unwrap(), 2);
    }

    #[test]
    fn coverage_is_monotone_submodular() {
        let r = check_monotone_submodular(&small_cov()).unwrap();
        assert!(r.monotone && r.submodular && r.witness.is_none());
    }

    #[test]
    fn square_of_cardinality_is_not_submodular() {
        let f = TableFn::from_fn(3, |m| (m.count_ones() as u64).pow(2)).unwrap();
        let r = check_monotone_submodular(&f).unwrap();
        assert!(r.monotone);
        assert!(!r.submodular);
        let w = r.witness.unwrap();
        let e = w.e.unwrap();
        // the witness really violates diminishing returns
        let gain_s = marginal(&f, &w.s, &[e]).unwrap();
        let gain_t = marginal(&f, &w.t, &[e]).unwrap();
        assert!(gain_s < gain_t);
        assert!(w.s.iter().all(|x| w.t.contains(x)) && !w.t.contains(&e));
    }

    #[test]
    fn capped_cardinality_is_monotone_submodular() {
        let f = TableFn::from_fn(4, |m| (m.count_ones() as u64).min(2)).unwrap();
        let r = check_monotone_submodular(&f).unwrap();
        assert!(r.monotone && r.submodular);
    }

    #[test]
    fn non_monotone_table_reported() {
        let f = TableFn::new(1, vec![0, 0]).unwrap();
        assert!(check_monotone_submodular(&f).unwrap().monotone);
        let g = TableFn::new(2, vec![0, 2, 2, 1]).unwrap();
        let r = check_monotone_submodular(&g).unwrap();
        assert!(!r.monotone);
        assert!(r.witness.is_some());
    }

    #[test]
    fn capacity_and_shape_errors() {
        assert!(matches!(TableFn::from_fn(21, |_| 0), Err(Error::Capacity(_))));
        assert!(matches!(TableFn::new(2, vec![1, 1, 1, 1]), Err(Error::InvalidData(_))));
        let big = Coverage::from_point_sets(2, &vec![vec![0]; 21]).unwrap();
        assert!(matches!(check_monotone_submodular(&big), Err(Error::Capacity(_))));
    }

    #[test]
    fn marginal_sum_bound_holds_for_coverage() {
        assert_eq!(check_marginal_sum_bound(&small_cov()).unwrap(), None);
        let sq = TableFn::from_fn(3, |m| (m.count_ones() as u64).pow(2)).unwrap();
        assert!(check_marginal_sum_bound(&sq).unwrap().is_some());
    }
}
