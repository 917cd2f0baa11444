//! Edifices over `F_p^k` and the hard instances built on them.
//!
//! A level-`i` vertex is a sequence `(q_1, …, q_{i−1})` of linear polynomials
//! over `F_p` and owns the points `(x, q_1(x), …, q_{i−1}(x), y_{i+1}, …, y_k)`
//! with `x` and the `y`s free. Each vertex has `d = p²` children, one per
//! polynomial `ax + b`; leaves sit at level `k` and own exactly `p` points.
//! Two distinct linear polynomials agree on at most one `x`, so a leaf meets
//! any vertex off its root path in at most one point.
//!
//! Point `(y_1, …, y_k)` has index `Σ_j y_j p^{j−1}`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::gate::ObservationGate;
use crate::instance::{EdificeMeta, Instance, Metadata, Realization, StochasticItem};

/// Largest universe and vertex count the builder accepts.
pub const EDIFICE_BUDGET: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub parent: Option<usize>,
    /// Root is level 1.
    pub level: usize,
    pub children: Vec<usize>,
    pub set: Bitset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edifice {
    pub p: u64,
    pub k: usize,
    pub d: usize,
    universe_size: usize,
    /// Breadth-first; vertex 0 is the root.
    vertices: Vec<Vertex>,
}

pub fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|i| i * i <= p).all(|i| !p.is_multiple_of(i))
}

fn point_index(coords: &[u64], p: u64) -> usize {
    coords.iter().rev().fold(0u64, |acc, &c| acc * p + c) as usize
}

impl Edifice {
    pub fn build(p: u64, k: usize) -> Result<Self> {
        if !is_prime(p) || p < 3 {
            return Err(Error::Domain(format!("edifice needs a prime p >= 3, got {p}")));
        }
        if k == 0 {
            return Err(Error::Domain("edifice needs k >= 1".into()));
        }
        let universe = p.checked_pow(k as u32).filter(|&n| n <= EDIFICE_BUDGET);
        let d = p * p;
        let n_vertices = (0..k as u32).try_fold(0u64, |acc, i| acc.checked_add(d.checked_pow(i)?));
        let (Some(universe), Some(n_vertices)) = (universe, n_vertices.filter(|&n| n <= EDIFICE_BUDGET)) else {
            return Err(Error::Capacity(format!(
                "edifice p={p}, k={k} exceeds the budget of {EDIFICE_BUDGET} points or vertices"
            )));
        };
        let universe_size = universe as usize;
        let mut vertices: Vec<Vertex> = Vec::with_capacity(n_vertices as usize);
        let mut polys: Vec<Vec<(u64, u64)>> = Vec::with_capacity(n_vertices as usize);
        vertices.push(Vertex {
            parent: None,
            level: 1,
            children: Vec::new(),
            set: Bitset::full(universe_size),
        });
        polys.push(Vec::new());
        let mut head = 0;
        while head < vertices.len() {
            let level = vertices[head].level;
            if level < k {
                for a in 0..p {
                    for b in 0..p {
                        let mut q = polys[head].clone();
                        q.push((a, b));
                        let id = vertices.len();
                        vertices.push(Vertex {
                            parent: Some(head),
                            level: level + 1,
                            children: Vec::new(),
                            set: vertex_set(p, k, &q, universe_size),
                        });
                        polys.push(q);
                        vertices[head].children.push(id);
                    }
                }
            }
            head += 1;
        }
        Ok(Self {
            p,
            k,
            d: d as usize,
            universe_size,
            vertices,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.vertices[v].children.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&v| self.is_leaf(v))
    }

    /// Parameters `(s, b, k, d) = (4k, p, k, p²)`.
    pub fn meta(&self) -> EdificeMeta {
        EdificeMeta {
            p: self.p,
            k: self.k,
            s: 4 * self.k,
            b: self.p as usize,
            d: self.d,
        }
    }

    /// Replaces the set of vertex `v`.
    pub fn set_vertex_set(&mut self, v: usize, set: Bitset) {
        self.vertices[v].set = set;
    }

    /// Moves vertex `v` under `parent`, keeping its level.
    pub fn reparent(&mut self, v: usize, parent: usize) {
        if let Some(old) = self.vertices[v].parent {
            self.vertices[old].children.retain(|&c| c != v);
        }
        self.vertices[v].parent = Some(parent);
        self.vertices[parent].children.push(v);
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EdificeFile {
            p: self.p,
            k: self.k,
            d: self.d,
            universe_size: self.universe_size,
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexFile {
                    parent: v.parent,
                    set: v.set.to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: EdificeFile = serde_json::from_str(s)?;
        let n = file.vertices.len();
        let mut vertices: Vec<Vertex> = Vec::with_capacity(n);
        for (i, v) in file.vertices.iter().enumerate() {
            if let Some(&bad) = v.set.iter().find(|&&e| e >= file.universe_size) {
                return Err(Error::InvalidData(format!(
                    "vertex {i} holds point {bad} outside the universe"
                )));
            }
            if v.parent.is_some_and(|p| p >= i) {
                return Err(Error::InvalidData(format!("vertex {i} must follow its parent")));
            }
            if (i == 0) != v.parent.is_none() {
                return Err(Error::InvalidData("exactly the first vertex must be the root".into()));
            }
            let level = v.parent.map_or(1, |p| vertices[p].level + 1);
            vertices.push(Vertex {
                parent: v.parent,
                level,
                children: Vec::new(),
                set: Bitset::from_points(file.universe_size, v.set.iter().copied()),
            });
            if let Some(p) = v.parent {
                vertices[p].children.push(i);
            }
        }
        if n == 0 {
            return Err(Error::InvalidData("edifice has no vertices".into()));
        }
        Ok(Self {
            p: file.p,
            k: file.k,
            d: file.d,
            universe_size: file.universe_size,
            vertices,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn vertex_set(p: u64, k: usize, polys: &[(u64, u64)], n: usize) -> Bitset {
    let fixed = polys.len() + 1;
    let free = k - fixed;
    let mut set = Bitset::new(n);
    let mut coords = vec![0u64; k];
    for x in 0..p {
        coords[0] = x;
        for (j, &(a, b)) in polys.iter().enumerate() {
            coords[j + 1] = (a * x + b) % p;
        }
        for mut t in 0..p.pow(free as u32) {
            for c in coords[fixed..].iter_mut() {
                *c = t % p;
                t /= p;
            }
            set.insert(point_index(&coords, p));
        }
    }
    set
}

#[derive(Serialize, Deserialize)]
struct EdificeFile {
    p: u64,
    k: usize,
    d: usize,
    universe_size: usize,
    vertices: Vec<VertexFile>,
}

#[derive(Serialize, Deserialize)]
struct VertexFile {
    parent: Option<usize>,
    set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EdificeViolation {
    /// Tree shape: branching, depth, or root.
    Shape {
        vertex: usize,
        detail: String,
    },
    /// Property I.
    RootNotUniverse,
    NotNested {
        child: usize,
        parent: usize,
    },
    /// Property II.
    LeafSize {
        leaf: usize,
        size: usize,
    },
    /// Property III.
    Intersection {
        leaf: usize,
        other: usize,
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdificeReport {
    pub ok: bool,
    pub violations: Vec<EdificeViolation>,
}

/// Exhaustive check of an `(s, b, k, d)`-edifice.
pub fn verify_edifice(ed: &Edifice, s: usize, b: usize, k: usize, d: usize) -> EdificeReport {
    let mut out = Vec::new();
    for (v, vx) in ed.vertices.iter().enumerate() {
        if vx.level < k && vx.children.len() != d {
            out.push(EdificeViolation::Shape {
                vertex: v,
                detail: format!(
                    "level {} vertex has {} children, expected {d}",
                    vx.level,
                    vx.children.len()
                ),
            });
        }
        if vx.level == k && !vx.children.is_empty() {
            out.push(EdificeViolation::Shape {
                vertex: v,
                detail: format!("vertex at level {k} has children"),
            });
        }
        if vx.level > k {
            out.push(EdificeViolation::Shape {
                vertex: v,
                detail: format!("vertex below level {k}"),
            });
        }
        if let Some(p) = vx.parent {
            if !vx.set.is_subset(&ed.vertices[p].set) {
                out.push(EdificeViolation::NotNested { child: v, parent: p });
            }
        }
    }
    if ed.vertices[0].set.count() != ed.universe_size {
        out.push(EdificeViolation::RootNotUniverse);
    }
    let mut on_path = vec![false; ed.vertices.len()];
    for leaf in ed.leaves() {
        let size = ed.vertices[leaf].set.count();
        if size != b {
            out.push(EdificeViolation::LeafSize { leaf, size });
        }
        let mut a = Some(leaf);
        while let Some(v) = a {
            on_path[v] = true;
            a = ed.vertices[v].parent;
        }
        let ls = &ed.vertices[leaf].set;
        for (v, vx) in ed.vertices.iter().enumerate() {
            if on_path[v] {
                continue;
            }
            let size = ls.count_and(&vx.set);
            if size > s {
                out.push(EdificeViolation::Intersection { leaf, other: v, size });
            }
        }
        let mut a = Some(leaf);
        while let Some(v) = a {
            on_path[v] = false;
            a = ed.vertices[v].parent;
        }
    }
    EdificeReport {
        ok: out.is_empty(),
        violations: out,
    }
}

/// An edifice with its hard instance: vertex items first (breadth-first),
/// then one singleton item per point.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub edifice: Edifice,
    pub instance: Instance,
}

impl HardInstance {
    pub fn build(ed: Edifice) -> Result<Self> {
        let n = ed.universe_size;
        let mut items = Vec::with_capacity(ed.vertices.len() + n);
        for vx in &ed.vertices {
            let sets: Vec<Bitset> = if vx.children.is_empty() {
                vx.set
                    .ones()
                    .map(|e| {
                        let mut s = vx.set.clone();
                        s.remove(e);
                        s
                    })
                    .collect()
            } else {
                vx.children
                    .iter()
                    .map(|&c| {
                        let mut s = vx.set.clone();
                        s.difference_with(&ed.vertices[c].set);
                        s
                    })
                    .collect()
            };
            items.push(StochasticItem::uniform(1, sets)?);
        }
        for e in 0..n {
            items.push(StochasticItem::deterministic(1, Bitset::from_points(n, [e]))?);
        }
        let mut params = BTreeMap::new();
        params.insert("p".to_string(), serde_json::json!(ed.p));
        params.insert("k".to_string(), serde_json::json!(ed.k));
        let metadata = Metadata {
            name: format!("edifice-hard-p{}-k{}", ed.p, ed.k),
            generator: "edifice-hard".into(),
            seed: None,
            params,
            edifice: Some(ed.meta()),
        };
        let instance = Instance::new(n, items, metadata)?;
        Ok(Self { edifice: ed, instance })
    }

    pub fn generate(p: u64, k: usize) -> Result<Self> {
        Self::build(Edifice::build(p, k)?)
    }

    /// Recognizes an instance produced by [`HardInstance::build`] from its
    /// edifice metadata, rejecting anything else.
    pub fn from_instance(inst: &Instance) -> Result<Self> {
        let Some(meta) = inst.metadata.edifice else {
            return Err(Error::Domain("instance carries no edifice metadata".into()));
        };
        let built = Self::generate(meta.p, meta.k)?;
        if built.instance.universe_size() != inst.universe_size() || built.instance.items() != inst.items() {
            return Err(Error::Domain(format!(
                "instance does not match the hard instance for p={}, k={}",
                meta.p, meta.k
            )));
        }
        Ok(built)
    }

    pub fn n_vertices(&self) -> usize {
        self.edifice.vertices.len()
    }

    /// Item of the singleton `{e}`.
    pub fn singleton_item(&self, e: usize) -> usize {
        self.n_vertices() + e
    }

    /// Root-to-leaf path selected by the vertex items' outcomes, and the
    /// point the leaf item leaves out.
    pub fn canonical_path(&self, real: &Realization) -> (Vec<usize>, usize) {
        let ed = &self.edifice;
        let mut path = vec![0usize];
        let mut v = 0;
        while !ed.is_leaf(v) {
            v = ed.vertices[v].children[real.0[v] as usize];
            path.push(v);
        }
        let e = ed.vertices[v]
            .set
            .ones()
            .nth(real.0[v] as usize)
            .expect("leaf outcome in range");
        (path, e)
    }
}

/// Follows the canonical path through the gate, then buys the missing
/// singleton; costs `k + 1`.
pub fn canonical_path_policy(gate: &mut ObservationGate<'_>, hard: &HardInstance) -> Result<u64> {
    let ed = &hard.edifice;
    let mut v = 0;
    loop {
        let o = gate.pick(v)? as usize;
        if ed.is_leaf(v) {
            let e = ed.vertices[v].set.ones().nth(o).expect("leaf outcome in range");
            gate.pick(hard.singleton_item(e))?;
            break;
        }
        v = ed.vertices[v].children[o];
    }
    if !gate.is_covered() {
        return Err(Error::ContractViolation(
            "canonical path left the universe uncovered".into(),
        ));
    }
    Ok(gate.cost())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionDraw {
    pub collection: Vec<usize>,
    pub hit: usize,
    pub bound: usize,
}

/// One draw of the leaf-intersection bound: a realization, its canonical
/// leaf `v_k`, and a random collection `C` of other items' realized sets;
/// reports `|∪C ∩ U_{v_k}|` against `4|C|k`.
///
/// Half the collection is drawn from vertices on or next to the canonical
/// path, where overlaps with `U_{v_k}` concentrate.
pub fn leaf_intersection_draw<R: Rng + ?Sized>(
    hard: &HardInstance,
    real: &Realization,
    rng: &mut R,
) -> IntersectionDraw {
    let ed = &hard.edifice;
    let (path, _) = hard.canonical_path(real);
    let leaf = *path.last().expect("non-empty path");
    let mut near: Vec<usize> = Vec::new();
    for &v in &path {
        near.push(v);
        if let Some(p) = ed.vertices[v].parent {
            near.extend(ed.vertices[p].children.iter().copied());
        }
    }
    near.retain(|&v| v != leaf);
    let m = hard.instance.m();
    let size = rng.gen_range(1..=2 * ed.k + 2);
    let mut collection = Vec::with_capacity(size);
    while collection.len() < size {
        let i = if !near.is_empty() && rng.gen_bool(0.5) {
            *near.choose(rng).expect("non-empty")
        } else {
            rng.gen_range(0..m)
        };
        if i != leaf && !collection.contains(&i) {
            collection.push(i);
        }
    }
    let mut union = Bitset::new(ed.universe_size);
    for &i in &collection {
        union.union_with(hard.instance.item(i).covers(real.0[i]));
    }
    IntersectionDraw {
        hit: union.count_and(&ed.vertices[leaf].set),
        bound: 4 * collection.len() * ed.k,
        collection,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::sample_realization;
    use crate::rng::stream;

    #[test]
    fn small_counts() {
        let ed = Edifice::build(3, 2).unwrap();
        assert_eq!(ed.universe_size(), 9);
        assert_eq!(ed.vertices().len(), 10);
        assert_eq!(ed.leaves().count(), 9);
        assert!(ed.leaves().all(|l| ed.vertex(l).set.count() == 3));
        let h = HardInstance::build(ed).unwrap();
        assert_eq!(h.instance.m(), 19);
        assert_eq!(h.instance.q(), 9);
        assert!(h.instance.is_feasible());
        assert_eq!(h.instance.item(0).support().len(), 9);
        assert_eq!(h.instance.item(1).support().len(), 3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(Edifice::build(4, 2), Err(Error::Domain(_))));
        assert!(matches!(Edifice::build(2, 2), Err(Error::Domain(_))));
        assert!(matches!(Edifice::build(3, 0), Err(Error::Domain(_))));
        assert!(matches!(Edifice::build(101, 4), Err(Error::Capacity(_))));
    }

    #[test]
    fn leaves_meet_in_at_most_one_point() {
        let ed = Edifice::build(5, 2).unwrap();
        let leaves: Vec<usize> = ed.leaves().collect();
        for (a, &u) in leaves.iter().enumerate() {
            for &v in &leaves[a + 1..] {
                assert!(ed.vertex(u).set.count_and(&ed.vertex(v).set) <= 1);
            }
        }
        assert!(verify_edifice(&ed, 8, 5, 2, 25).ok);
        assert!(verify_edifice(&ed, 1, 5, 2, 25).ok);
        assert!(!verify_edifice(&ed, 0, 5, 2, 25).ok);
    }

    #[test]
    fn mutations_are_reported() {
        let ed = Edifice::build(3, 2).unwrap();
        let mut cut = ed.clone();
        let leaf = 4;
        let mut s = cut.vertex(leaf).set.clone();
        let first = s.ones().next().unwrap();
        s.remove(first);
        cut.set_vertex_set(leaf, s);
        let r = verify_edifice(&cut, 8, 3, 2, 9);
        assert!(r.violations.contains(&EdificeViolation::LeafSize { leaf, size: 2 }));

        let mut swapped = ed.clone();
        let (a, b) = (1, 2);
        let (sa, sb) = (swapped.vertex(a).set.clone(), swapped.vertex(b).set.clone());
        swapped.set_vertex_set(a, sb);
        swapped.set_vertex_set(b, sa);
        assert!(verify_edifice(&swapped, 8, 3, 2, 9).ok);

        // k = 3: move a leaf under a different level-2 vertex
        let ed3 = Edifice::build(3, 3).unwrap();
        let mut moved = ed3.clone();
        let leaf = ed3.vertex(1).children[0];
        moved.reparent(leaf, 2);
        let r = verify_edifice(&moved, 12, 3, 3, 9);
        assert!(r
            .violations
            .contains(&EdificeViolation::NotNested { child: leaf, parent: 2 }));
    }

    #[test]
    fn json_round_trip() {
        let ed = Edifice::build(3, 2).unwrap();
        let back = Edifice::from_json(&ed.to_json().unwrap()).unwrap();
        assert_eq!(back, ed);
    }

    #[test]
    fn canonical_path_covers_all_but_one() {
        let h = HardInstance::generate(3, 3).unwrap();
        for t in 0..200 {
            let real = sample_realization(&h.instance, &mut stream(t, 0, 0));
            let (path, e) = h.canonical_path(&real);
            assert_eq!(path.len(), 3);
            let c = h.instance.realized_cover(&real, &path);
            assert_eq!(c.count(), 26);
            assert!(!c.contains(e));
            let mut g = ObservationGate::new(&h.instance, real).unwrap();
            assert_eq!(canonical_path_policy(&mut g, &h).unwrap(), 4);
        }
    }

    #[test]
    fn single_level_costs_two() {
        let h = HardInstance::generate(5, 1).unwrap();
        assert_eq!(h.instance.m(), 6);
        let real = sample_realization(&h.instance, &mut stream(1, 0, 0));
        let mut g = ObservationGate::new(&h.instance, real).unwrap();
        assert_eq!(canonical_path_policy(&mut g, &h).unwrap(), 2);
    }

    #[test]
    fn recognizes_its_own_instances_only() {
        let h = HardInstance::generate(3, 2).unwrap();
        let back = Instance::from_json(&h.instance.to_json().unwrap()).unwrap();
        assert!(HardInstance::from_instance(&back).is_ok());
        let gap = crate::instance::gen_singleton_gap(4).unwrap();
        assert!(matches!(HardInstance::from_instance(&gap), Err(Error::Domain(_))));
    }
}
