//! Information gate between a policy and the hidden realization.
//!
//! A round-based policy commits an ordering and a threshold before anything in
//! the round is revealed; the gate then consumes items in that order until the
//! threshold is met. Fully adaptive policies pay for one item at a time with
//! [`ObservationGate::pick`]. Outcomes of items that were never consumed stay
//! hidden, and every attempt to read one is recorded as a violation.

use serde::Serialize;

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::instance::{Instance, Realization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatePhase {
    Idle,
    Committed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundOutcome {
    pub consumed: Vec<usize>,
    pub cost: u64,
    pub coverage: u64,
}

pub struct ObservationGate<'a> {
    inst: &'a Instance,
    hidden: Realization,
    revealed: Vec<bool>,
    history: Vec<(usize, u32)>,
    covered: Bitset,
    cost: u64,
    phase: GatePhase,
    committed: Vec<usize>,
    tau: u64,
    violations: Vec<String>,
}

impl<'a> ObservationGate<'a> {
    pub fn new(inst: &'a Instance, hidden: Realization) -> Result<Self> {
        if hidden.0.len() != inst.m() {
            return Err(Error::ContractViolation(format!(
                "realization has {} outcomes for {} items",
                hidden.0.len(),
                inst.m()
            )));
        }
        for (i, &o) in hidden.0.iter().enumerate() {
            if o as usize >= inst.item(i).support().len() {
                return Err(Error::ContractViolation(format!(
                    "outcome {o} outside the support of item {i}"
                )));
            }
        }
        Ok(Self {
            inst,
            hidden,
            revealed: vec![false; inst.m()],
            history: Vec::new(),
            covered: Bitset::new(inst.universe_size()),
            cost: 0,
            phase: GatePhase::Idle,
            committed: Vec::new(),
            tau: 0,
            violations: Vec::new(),
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn phase(&self) -> GatePhase {
        self.phase
    }

    fn violation(&mut self, msg: String) -> Error {
        self.violations.push(msg.clone());
        Error::ContractViolation(msg)
    }

    /// Commits the ordering and threshold of the next round.
    ///
    /// The ordering must be a permutation of the items not yet consumed.
    pub fn commit(&mut self, ordering: &[usize], tau: u64) -> Result<()> {
        if self.phase != GatePhase::Idle {
            return Err(self.violation("commit while a round is already committed".into()));
        }
        let mut seen = vec![false; self.inst.m()];
        for &i in ordering {
            if i >= self.inst.m() || seen[i] || self.revealed[i] {
                return Err(self.violation(format!(
                    "ordering is not a permutation of the remaining items (item {i})"
                )));
            }
            seen[i] = true;
        }
        let remaining = self.revealed.iter().filter(|r| !**r).count();
        if ordering.len() != remaining {
            return Err(self.violation(format!("ordering has {} items, {remaining} remain", ordering.len())));
        }
        if tau > self.inst.q() {
            return Err(self.violation(format!("threshold {tau} exceeds Q = {}", self.inst.q())));
        }
        self.committed = ordering.to_vec();
        self.tau = tau;
        self.phase = GatePhase::Committed;
        Ok(())
    }

    /// Consumes the committed ordering until coverage reaches the threshold.
    pub fn execute(&mut self) -> Result<RoundOutcome> {
        if self.phase != GatePhase::Committed {
            return Err(self.violation("execute without a committed round".into()));
        }
        let ordering = std::mem::take(&mut self.committed);
        let mut out = RoundOutcome {
            consumed: Vec::new(),
            cost: 0,
            coverage: 0,
        };
        for i in ordering {
            if self.coverage() >= self.tau {
                break;
            }
            self.reveal(i);
            out.consumed.push(i);
            out.cost += self.inst.item(i).cost();
        }
        out.coverage = self.coverage();
        self.phase = GatePhase::Idle;
        Ok(out)
    }

    fn reveal(&mut self, i: usize) -> u32 {
        let o = self.hidden.0[i];
        self.revealed[i] = true;
        self.history.push((i, o));
        self.covered.union_with(self.inst.item(i).covers(o));
        self.cost += self.inst.item(i).cost();
        o
    }

    /// Pays for item `i` and returns its outcome.
    pub fn pick(&mut self, i: usize) -> Result<u32> {
        if self.phase != GatePhase::Idle {
            return Err(self.violation("pick while a round is committed".into()));
        }
        if i >= self.inst.m() || self.revealed[i] {
            return Err(self.violation(format!("item {i} unavailable")));
        }
        Ok(self.reveal(i))
    }

    /// Outcome of an already consumed item; reading any other item is a violation.
    pub fn outcome(&mut self, i: usize) -> Result<u32> {
        if i < self.inst.m() && self.revealed[i] {
            Ok(self.hidden.0[i])
        } else {
            Err(self.violation(format!("peek at unrevealed item {i}")))
        }
    }

    pub fn is_revealed(&self, i: usize) -> bool {
        self.revealed[i]
    }

    /// Items not yet consumed, ascending.
    pub fn remaining(&self) -> Vec<usize> {
        (0..self.inst.m()).filter(|&i| !self.revealed[i]).collect()
    }

    /// Consumed `(item, outcome)` pairs in reveal order.
    pub fn history(&self) -> &[(usize, u32)] {
        &self.history
    }

    pub fn covered(&self) -> &Bitset {
        &self.covered
    }

    pub fn coverage(&self) -> u64 {
        self.covered.count() as u64
    }

    pub fn cost(&self) -> u64 {
        self.cost
    }

    pub fn is_covered(&self) -> bool {
        self.coverage() == self.inst.q()
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }
}
