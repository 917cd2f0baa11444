//! Seeded trial harness, statistics, gap experiments and result files.
//!
//! Trial `t` draws its hidden realization from
//! `stream(seed, t, REALIZATION)`; planners draw from their own streams (see
//! [`PlanCoins`]). Results do not depend on the thread count.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::edifice::{canonical_path_policy, HardInstance};
use crate::error::{Error, Result};
use crate::expectation::EXACT_BUDGET;
use crate::gate::ObservationGate;
use crate::greedy::{EvalMode, DEFAULT_MC_SAMPLES};
use crate::instance::{sample_realization, Instance, Realization};
use crate::par::{self, Execution};
use crate::policies::{adaptive_greedy, best_nonadaptive_bruteforce, exec_nonadaptive, Expectimax};
use crate::rational::to_f64;
use crate::rng::{self, tag};
use crate::rround::{PlanCoins, RoundPlanner, RunRecord};
use crate::select::Constants;

/// Default state budget when the oracle is used as a reference.
pub const REFERENCE_ORACLE_STATES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: u64,
    pub exact_budget: u64,
    pub mc_samples: usize,
    pub eval: EvalMode,
    pub constants: Constants,
    pub plan_coins: PlanCoins,
    pub execution: Execution,
    pub oracle_states: usize,
    /// Keep per-trial costs (and run records for r-round policies).
    pub keep_trials: bool,
    pub csv_out: Option<PathBuf>,
    pub json_out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            exact_budget: EXACT_BUDGET as u64,
            mc_samples: DEFAULT_MC_SAMPLES,
            eval: EvalMode::Float,
            constants: Constants::default(),
            plan_coins: PlanCoins::default(),
            execution: Execution::default(),
            oracle_states: REFERENCE_ORACLE_STATES,
            keep_trials: false,
            csv_out: None,
            json_out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("trials must be at least 1".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::Domain("mc_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trial statistics kept as exact integer sums so that merges are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub trials: u64,
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
    pub sum: u128,
    pub sum_sq: u128,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<u64>>,
}

impl PolicyStats {
    fn from_sums(trials: u64, sum: u128, sum_sq: u128, costs: Option<Vec<u64>>) -> Self {
        let n = trials as f64;
        let mean = if trials == 0 { 0.0 } else { sum as f64 / n };
        let std = if trials < 2 {
            0.0
        } else {
            // n·Σx² − (Σx)² is exact in integers
            let num = (trials as u128 * sum_sq).saturating_sub(sum * sum);
            (num as f64 / (n * (n - 1.0))).sqrt()
        };
        let ci95 = if trials == 0 { 0.0 } else { 1.96 * std / n.sqrt() };
        Self {
            trials,
            mean,
            std,
            ci95,
            sum,
            sum_sq,
            costs,
        }
    }

    pub fn from_costs(costs: &[u64], keep: bool) -> Self {
        let sum = costs.iter().map(|&c| c as u128).sum();
        let sum_sq = costs.iter().map(|&c| c as u128 * c as u128).sum();
        Self::from_sums(costs.len() as u64, sum, sum_sq, keep.then(|| costs.to_vec()))
    }

    /// Statistics of the concatenated trials.
    pub fn merge(&self, other: &Self) -> Self {
        let costs = match (&self.costs, &other.costs) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self::from_sums(
            self.trials + other.trials,
            self.sum + other.sum,
            self.sum_sq + other.sum_sq,
            costs,
        )
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.std / (self.trials as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum Policy {
    RRound { r: usize },
    AdaptiveGreedy,
    NonadaptiveBruteforce,
    Ordering { ordering: Vec<usize> },
    Oracle,
    Canonical,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::RRound { .. } => "r-round",
            Policy::AdaptiveGreedy => "adaptive-greedy",
            Policy::NonadaptiveBruteforce => "nonadaptive-bruteforce",
            Policy::Ordering { .. } => "ordering",
            Policy::Oracle => "oracle",
            Policy::Canonical => "canonical",
        }
    }

    pub fn rounds(&self) -> Option<usize> {
        match self {
            Policy::RRound { r } => Some(*r),
            _ => None,
        }
    }
}

enum Prepared<'a> {
    RRound(RoundPlanner<'a>),
    AdaptiveGreedy,
    Ordering(Vec<usize>),
    Oracle(Expectimax<'a>),
    Canonical(HardInstance),
}

fn prepare<'a>(policy: &Policy, inst: &'a Instance, cfg: &ExperimentConfig) -> Result<Prepared<'a>> {
    Ok(match policy {
        Policy::RRound { r } => {
            let mode = match cfg.eval {
                EvalMode::MonteCarlo { .. } => EvalMode::MonteCarlo {
                    samples: cfg.mc_samples,
                },
                m => m,
            };
            Prepared::RRound(RoundPlanner::new(
                inst,
                *r,
                cfg.constants,
                mode,
                cfg.plan_coins,
                cfg.seed,
            ))
        }
        Policy::AdaptiveGreedy => Prepared::AdaptiveGreedy,
        Policy::NonadaptiveBruteforce => Prepared::Ordering(best_nonadaptive_bruteforce(inst)?.ordering),
        Policy::Ordering { ordering } => Prepared::Ordering(ordering.clone()),
        Policy::Oracle => Prepared::Oracle(Expectimax::with_budget(inst, cfg.oracle_states)?),
        Policy::Canonical => Prepared::Canonical(HardInstance::from_instance(inst)?),
    })
}

struct TrialResult {
    cost: u64,
    violations: usize,
    record: Option<RunRecord>,
}

fn run_one(p: &Prepared<'_>, inst: &Instance, hidden: Realization, trial: u64, keep: bool) -> Result<TrialResult> {
    if let Prepared::RRound(planner) = p {
        let (rec, violations) = planner.run(hidden, trial)?;
        return Ok(TrialResult {
            cost: rec.cost,
            violations,
            record: keep.then_some(rec),
        });
    }
    let mut gate = ObservationGate::new(inst, hidden)?;
    let cost = match p {
        Prepared::AdaptiveGreedy => adaptive_greedy(&mut gate)?,
        Prepared::Ordering(o) => exec_nonadaptive(&mut gate, o)?,
        Prepared::Oracle(ex) => ex.run(&mut gate)?,
        Prepared::Canonical(h) => canonical_path_policy(&mut gate, h)?,
        Prepared::RRound(_) => unreachable!(),
    };
    Ok(TrialResult {
        cost,
        violations: gate.violations().len(),
        record: None,
    })
}

/// Hidden realization of trial `t`.
pub fn trial_realization(inst: &Instance, seed: u64, t: u64) -> Realization {
    sample_realization(inst, &mut rng::stream(seed, t, tag::REALIZATION))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub policy: Policy,
    pub stats: PolicyStats,
    /// Gate violations summed over trials.
    pub violations: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<RunRecord>,
}

/// Runs `cfg.trials` trials of `policy` on `inst`.
pub fn run_trials(policy: &Policy, inst: &Instance, cfg: &ExperimentConfig) -> Result<TrialReport> {
    run_trial_range(policy, inst, cfg, 0, cfg.trials)
}

/// Trials `start..start + count` of the configuration.
pub fn run_trial_range(
    policy: &Policy,
    inst: &Instance,
    cfg: &ExperimentConfig,
    start: u64,
    count: u64,
) -> Result<TrialReport> {
    cfg.validate()?;
    let prepared = prepare(policy, inst, cfg)?;
    let results = par::map_indexed(cfg.execution, count, |i| {
        let t = start + i;
        run_one(
            &prepared,
            inst,
            trial_realization(inst, cfg.seed, t),
            t,
            cfg.keep_trials,
        )
        .map_err(|e| Error::Trial {
            trial: t,
            source: Box::new(e),
        })
    });
    let mut costs = Vec::with_capacity(count as usize);
    let mut violations = 0u64;
    let mut records = Vec::new();
    for r in results {
        let r = r?;
        costs.push(r.cost);
        violations += r.violations as u64;
        records.extend(r.record);
    }
    Ok(TrialReport {
        policy: policy.clone(),
        stats: PolicyStats::from_costs(&costs, cfg.keep_trials),
        violations,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Exact optimal adaptive cost.
    Oracle,
    /// Canonical-path cost `k + 1` of a hard instance.
    Canonical,
    /// Sampled adaptive-greedy mean.
    AdaptiveGreedy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub kind: ReferenceKind,
    pub value: f64,
}

/// Benchmark for gap ratios: the oracle when it fits its budget, else the
/// canonical-path cost on hard instances, else adaptive greedy.
pub fn reference_cost(inst: &Instance, cfg: &ExperimentConfig) -> Result<Reference> {
    match Expectimax::with_budget(inst, cfg.oracle_states) {
        Ok(ex) => {
            return Ok(Reference {
                kind: ReferenceKind::Oracle,
                value: to_f64(ex.value()),
            })
        }
        Err(Error::Capacity(_)) => {}
        Err(e) => return Err(e),
    }
    if let Ok(h) = HardInstance::from_instance(inst) {
        return Ok(Reference {
            kind: ReferenceKind::Canonical,
            value: (h.edifice.k + 1) as f64,
        });
    }
    let rep = run_trials(&Policy::AdaptiveGreedy, inst, cfg)?;
    Ok(Reference {
        kind: ReferenceKind::AdaptiveGreedy,
        value: rep.stats.mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub r: usize,
    pub stats: PolicyStats,
    pub reference: Reference,
    pub ratio: f64,
}

pub fn gap_experiment(inst: &Instance, r_values: &[usize], cfg: &ExperimentConfig) -> Result<Vec<GapRow>> {
    let reference = reference_cost(inst, cfg)?;
    r_values
        .iter()
        .map(|&r| {
            let rep = run_trials(&Policy::RRound { r }, inst, cfg)?;
            Ok(GapRow {
                r,
                ratio: rep.stats.mean / reference.value,
                stats: rep.stats,
                reference: reference.clone(),
            })
        })
        .collect()
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub policy: String,
    pub r: Option<usize>,
    pub trials: u64,
    pub mean: String,
    pub std: String,
    pub ci95: String,
    pub seed: u64,
}

impl CsvRow {
    pub fn new(policy: &str, r: Option<usize>, stats: &PolicyStats, seed: u64) -> Self {
        Self {
            policy: policy.to_string(),
            r,
            trials: stats.trials,
            mean: format!("{:.6}", stats.mean),
            std: format!("{:.6}", stats.std),
            ci95: format!("{:.6}", stats.ci95),
            seed,
        }
    }

    pub fn from_report(rep: &TrialReport, seed: u64) -> Self {
        Self::new(rep.policy.name(), rep.policy.rounds(), &rep.stats, seed)
    }
}

/// Writes rows with the header `policy,r,trials,mean,std,ci95,seed`.
pub fn write_csv<W: Write>(w: W, rows: &[CsvRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Full JSON record: resolved configuration plus results.
#[derive(Debug, Clone, Serialize)]
pub struct RunFile<'a, T: Serialize> {
    pub config: &'a ExperimentConfig,
    pub instance: &'a str,
    pub results: T,
}

pub fn write_json<W: Write, T: Serialize>(w: W, file: &RunFile<'_, T>) -> Result<()> {
    serde_json::to_writer_pretty(w, file)?;
    Ok(())
}
