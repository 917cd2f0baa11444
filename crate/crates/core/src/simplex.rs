//! Dense two-phase simplex over exact rationals with Bland's rule.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `min objective·x` subject to `rows` and `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub rows: Vec<(Vec<Rational>, Relation, Rational)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<Rational>,
    pub value: Rational,
    /// One multiplier per row; `objective ≥ Σ duals_r · row_r` componentwise
    /// and `value = Σ duals_r · rhs_r`.
    pub duals: Vec<Rational>,
}

struct Tableau {
    // rows × (cols + 1); the last column is the right-hand side
    a: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c].clone();
        for v in self.a[r].iter_mut() {
            *v /= &p;
        }
        let prow = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&prow) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs of `cost` under the current basis.
    fn reduced(&self, cost: &[Rational]) -> Vec<Rational> {
        let mut d: Vec<Rational> = cost.to_vec();
        for (row, &b) in self.a.iter().zip(&self.basis) {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, v) in d.iter_mut().zip(row) {
                if !v.is_zero() {
                    *dj -= cb * v;
                }
            }
        }
        d
    }

    /// Minimizes `cost` over columns where `allowed` holds. Returns false if
    /// unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            let d = self.reduced(cost);
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && d[j].is_negative()) else {
                return true;
            };
            let rhs = self.cols;
            let mut best: Option<(Rational, usize)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[c].is_positive() {
                    let t = &row[rhs] / &row[c];
                    let better = match &best {
                        None => true,
                        Some((bt, bi)) => t < *bt || (t == *bt && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((t, i));
                    }
                }
            }
            let Some((_, r)) = best else {
                return false;
            };
            self.pivot(r, c);
        }
    }
}

pub fn minimize(lp: &LinearProgram) -> Result<Solution> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    if let Some((coef, _, _)) = lp.rows.iter().find(|(c, _, _)| c.len() != n) {
        return Err(Error::Domain(format!(
            "row has {} coefficients for {n} variables",
            coef.len()
        )));
    }
    // column layout: x | slack-or-surplus per inequality | artificial per row
    let n_slack = lp.rows.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
    let art0 = n + n_slack;
    let cols = art0 + m;
    let mut t = Tableau {
        a: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        cols,
    };
    // per row: sign applied for b ≥ 0, and its slack column if any
    let mut flips = Vec::with_capacity(m);
    let mut slack_of = Vec::with_capacity(m);
    let mut next_slack = n;
    for (r, (coef, rel, rhs)) in lp.rows.iter().enumerate() {
        let flip = rhs.is_negative();
        let sign = if flip { -Rational::one() } else { Rational::one() };
        let mut row = vec![Rational::zero(); cols + 1];
        for (v, c) in row.iter_mut().zip(coef) {
            *v = c * &sign;
        }
        row[cols] = rhs * &sign;
        let slack = match rel {
            Relation::Eq => None,
            Relation::Le | Relation::Ge => {
                let s = next_slack;
                next_slack += 1;
                row[s] = if *rel == Relation::Le {
                    sign.clone()
                } else {
                    -sign.clone()
                };
                Some(s)
            }
        };
        row[art0 + r] = Rational::one();
        let basic = match slack {
            Some(s) if row[s].is_one() => s,
            _ => art0 + r,
        };
        t.basis.push(basic);
        t.a.push(row);
        flips.push(flip);
        slack_of.push(slack);
    }

    // phase 1: drive the artificial variables to zero
    let mut c1 = vec![Rational::zero(); cols];
    for v in &mut c1[art0..] {
        *v = Rational::one();
    }
    if t.basis.iter().any(|&b| b >= art0) {
        t.optimize(&c1, &|_| true);
        let infeas: Rational =
            t.a.iter()
                .zip(&t.basis)
                .filter(|(_, &b)| b >= art0)
                .map(|(row, _)| row[cols].clone())
                .sum();
        if infeas.is_positive() {
            return Err(Error::ContractViolation("linear program is infeasible".into()));
        }
        // pivot zero-level artificials out where possible
        for r in 0..m {
            if t.basis[r] >= art0 {
                if let Some(c) = (0..art0).find(|&j| !t.a[r][j].is_zero()) {
                    t.pivot(r, c);
                }
            }
        }
    }

    // phase 2 keeps redundant rows with a basic artificial at level zero
    let mut c2 = vec![Rational::zero(); cols];
    c2[..n].clone_from_slice(&lp.objective);
    if !t.optimize(&c2, &|j| j < art0) {
        return Err(Error::ContractViolation("linear program is unbounded".into()));
    }

    let mut x = vec![Rational::zero(); n];
    for (row, &b) in t.a.iter().zip(&t.basis) {
        if b < n {
            x[b] = row[cols].clone();
        }
    }
    let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    // the artificial column of row r started as e_r, so its reduced cost is −π_r
    let d = t.reduced(&c2);
    let duals = (0..m)
        .map(|r| {
            let pi = -d[art0 + r].clone();
            if flips[r] {
                -pi
            } else {
                pi
            }
        })
        .collect();
    Ok(Solution { x, value, duals })
}
