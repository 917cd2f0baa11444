//! `sscover`: generate, verify, simulate and report.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid data or failed check,
//! 3 capacity exceeded.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sscover::edifice::{verify_edifice, Edifice, HardInstance};
use sscover::greedy::EvalMode;
use sscover::instance::{gen_random_setcover, gen_singleton_gap, Instance, RandomSetCoverParams};
use sscover::lp::{build_lp, check_feasible, opt_policy_to_w, solve_lp};
use sscover::par::Execution;
use sscover::policies::{best_nonadaptive_bruteforce, Expectimax, BRUTEFORCE_MAX_ITEMS};
use sscover::rational::to_f64;
use sscover::rng::{stream, tag};
use sscover::rround::PlanCoins;
use sscover::select::Constants;
use sscover::sim::{gap_experiment, run_trials, write_csv, write_json, CsvRow, ExperimentConfig, Policy, RunFile};
use sscover::submodular::check_monotone_submodular;
use sscover::Error;

#[derive(Parser)]
#[command(name = "sscover", version, about = "Stochastic submodular cover workbench")]
struct Cli {
    /// Worker threads for trial parallelism (1 runs sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Check an instance or edifice file.
    Verify(VerifyArgs),
    /// Simulate a policy on an instance.
    Run(RunArgs),
    /// Simulate r-round policies for several r and report cost ratios.
    Gap(GapArgs),
    /// Solve the covering LP and compare with the optimal policy.
    Lp(LpArgs),
    /// Exact optimal adaptive and best non-adaptive costs.
    Oracle(OracleArgs),
}

#[derive(Subcommand)]
enum GenKind {
    SingletonGap {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    RandomSetcover {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        max_support: usize,
        #[arg(long, default_value_t = 0.4)]
        density: f64,
        #[arg(long, default_value_t = 3)]
        max_cost: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    EdificeHard {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the edifice itself.
        #[arg(long)]
        edifice_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct VerifyArgs {
    path: PathBuf,
    /// Sampled realizations checked for feasibility.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    RRound,
    AdaptiveGreedy,
    NonadaptiveBruteforce,
    Oracle,
    Canonical,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalArg {
    Float,
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoinsArg {
    PerHistory,
    PerTrial,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How the greedy evaluates expected coverage.
    #[arg(long, value_enum, default_value_t = EvalArg::Float)]
    eval: EvalArg,
    #[arg(long, default_value_t = sscover::greedy::DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
    #[arg(long, value_enum, default_value_t = CoinsArg::PerHistory)]
    plan_coins: CoinsArg,
    #[arg(long = "const.lambda", default_value_t = 12.0)]
    lambda: f64,
    #[arg(long = "const.gamma", default_value_t = 2.0)]
    gamma: f64,
    #[arg(long = "const.xi", default_value_t = 6.0)]
    xi: f64,
    #[arg(long = "const.alpha", default_value_t = 2.0)]
    alpha: f64,
    #[arg(long = "const.log-base", default_value_t = 2.0)]
    log_base: f64,
    #[arg(long = "const.rejection", default_value_t = 64)]
    rejection: u64,
    #[arg(long, default_value_t = sscover::sim::REFERENCE_ORACLE_STATES)]
    oracle_states: usize,
    /// Write the results CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full JSON record here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    path: PathBuf,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    #[arg(long)]
    r: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct GapArgs {
    path: PathBuf,
    /// Comma-separated round counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    r: Vec<usize>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct LpArgs {
    path: PathBuf,
    /// Write the constraint rows as plain text.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    path: PathBuf,
    #[arg(long, default_value_t = sscover::policies::EXPECTIMAX_STATES)]
    states: usize,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let execution = match configure_threads(cli.threads) {
        Ok(e) => e,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let res = match cli.command {
        Command::Gen { kind } => gen(kind),
        Command::Verify(a) => verify(a),
        Command::Run(a) => run(a, execution),
        Command::Gap(a) => gap(a, execution),
        Command::Lp(a) => lp(a),
        Command::Oracle(a) => oracle(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::Capacity(_) => ExitCode::from(3),
                Error::Domain(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<Execution, String> {
    match threads {
        None => Ok(Execution::Parallel),
        Some(0) => Err("--threads must be at least 1".into()),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| e.to_string())?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
    }
}

fn write_instance(inst: &Instance, out: &Path) -> CliResult {
    inst.save(out)?;
    println!(
        "Q={} m={} C={} -> {}",
        inst.q(),
        inst.m(),
        inst.max_cost(),
        out.display()
    );
    Ok(())
}

fn gen(kind: GenKind) -> CliResult {
    match kind {
        GenKind::SingletonGap { n, out } => write_instance(&gen_singleton_gap(n)?, &out),
        GenKind::RandomSetcover {
            n,
            m,
            max_support,
            density,
            max_cost,
            seed,
            out,
        } => {
            let p = RandomSetCoverParams {
                n,
                m,
                max_support,
                density,
                max_cost,
                seed,
            };
            write_instance(&gen_random_setcover(&p)?, &out)
        }
        GenKind::EdificeHard { p, k, out, edifice_out } => {
            let hard = HardInstance::generate(p, k)?;
            if let Some(path) = edifice_out {
                hard.edifice.save(&path)?;
            }
            write_instance(&hard.instance, &out)
        }
    }
}

fn verify(a: VerifyArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    if value.get("vertices").is_some() {
        return verify_edifice_file(&text);
    }
    let inst = Instance::from_json_unchecked(&text)?;
    println!("instance: m={} Q={} C={}", inst.m(), inst.q(), inst.max_cost());
    let mut failures = Vec::new();
    if inst.is_feasible() {
        println!("every realization feasible: ok");
    } else {
        failures.push("some realization leaves points uncovered".to_string());
    }
    match inst.coverage_fn().and_then(|f| check_monotone_submodular(&f)) {
        Ok(rep) if rep.monotone && rep.submodular => println!("monotone submodular: ok"),
        Ok(rep) => failures.push(format!("structure check failed: {:?}", rep.witness)),
        Err(Error::Capacity(msg)) => println!("monotone submodular: skipped ({msg})"),
        Err(e) => return Err(e.into()),
    }
    let mut uncovered = 0u64;
    for t in 0..a.samples {
        let real = sscover::instance::sample_realization(&inst, &mut stream(a.seed, t, tag::ORACLE_CHECK));
        let all: Vec<usize> = (0..inst.m()).collect();
        if inst.realized_cover(&real, &all).count() as u64 != inst.q() {
            uncovered += 1;
        }
    }
    if uncovered == 0 {
        println!("sampled realizations feasible: {}/{}", a.samples, a.samples);
    } else {
        failures.push(format!("{uncovered} of {} sampled realizations infeasible", a.samples));
    }
    if inst.metadata.edifice.is_some() {
        let hard = HardInstance::from_instance(&inst)?;
        let m = hard.edifice.meta();
        let rep = verify_edifice(&hard.edifice, m.s, m.b, m.k, m.d);
        report_edifice(&rep, &mut failures);
    }
    finish(failures)
}

fn verify_edifice_file(text: &str) -> CliResult {
    let ed = Edifice::from_json(text)?;
    println!(
        "edifice: p={} k={} d={} vertices={}",
        ed.p,
        ed.k,
        ed.d,
        ed.vertices().len()
    );
    let mut failures = Vec::new();
    let rep = verify_edifice(&ed, 4 * ed.k, ed.p as usize, ed.k, ed.d);
    report_edifice(&rep, &mut failures);
    finish(failures)
}

fn report_edifice(rep: &sscover::edifice::EdificeReport, failures: &mut Vec<String>) {
    if rep.ok {
        println!("edifice properties: ok");
        return;
    }
    for v in &rep.violations {
        let line = serde_json::to_string(v).unwrap_or_else(|_| format!("{v:?}"));
        println!("violation: {line}");
    }
    failures.push(format!("{} edifice violations", rep.violations.len()));
}

fn finish(failures: Vec<String>) -> CliResult {
    if failures.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Check(failures.join("; ")))
    }
}

fn config(sim: &SimArgs, execution: Execution) -> ExperimentConfig {
    ExperimentConfig {
        seed: sim.seed,
        trials: sim.trials,
        mc_samples: sim.mc_samples,
        eval: match sim.eval {
            EvalArg::Float => EvalMode::Float,
            EvalArg::Exact => EvalMode::Exact,
            EvalArg::MonteCarlo => EvalMode::MonteCarlo {
                samples: sim.mc_samples,
            },
        },
        constants: Constants {
            lambda: sim.lambda,
            gamma: sim.gamma,
            xi: sim.xi,
            alpha: sim.alpha,
            log_base: sim.log_base,
            rejection: sim.rejection,
        },
        plan_coins: match sim.plan_coins {
            CoinsArg::PerHistory => PlanCoins::PerHistory,
            CoinsArg::PerTrial => PlanCoins::PerTrial,
        },
        execution,
        oracle_states: sim.oracle_states,
        csv_out: sim.csv.clone(),
        json_out: sim.json.clone(),
        ..Default::default()
    }
}

fn check_constants(c: &Constants) -> CliResult {
    let positive = [c.lambda, c.gamma, c.xi, c.alpha]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
    if !positive || c.log_base.is_nan() || c.log_base <= 1.0 || c.rejection == 0 {
        return Err(Failure::Usage(
            "constants must be positive and the log base above 1".into(),
        ));
    }
    Ok(())
}

fn emit<T: serde::Serialize>(cfg: &ExperimentConfig, inst_path: &Path, rows: &[CsvRow], results: T) -> CliResult {
    eprintln!("config: {}", serde_json::to_string(cfg).map_err(Error::from)?);
    write_csv(io::stdout().lock(), rows)?;
    if let Some(p) = &cfg.csv_out {
        write_csv(File::create(p)?, rows)?;
    }
    if let Some(p) = &cfg.json_out {
        let file = RunFile {
            config: cfg,
            instance: &inst_path.display().to_string(),
            results,
        };
        let mut f = File::create(p)?;
        write_json(&mut f, &file)?;
        writeln!(f)?;
    }
    Ok(())
}

fn run(a: RunArgs, execution: Execution) -> CliResult {
    let inst = Instance::load(&a.path)?;
    let cfg = config(&a.sim, execution);
    check_constants(&cfg.constants)?;
    let policy = match (a.policy, a.r) {
        (PolicyArg::RRound, Some(r)) => Policy::RRound { r },
        (PolicyArg::RRound, None) => return Err(Failure::Usage("--policy r-round needs --r".into())),
        (_, Some(_)) => return Err(Failure::Usage("--r applies only to --policy r-round".into())),
        (PolicyArg::AdaptiveGreedy, None) => Policy::AdaptiveGreedy,
        (PolicyArg::NonadaptiveBruteforce, None) => Policy::NonadaptiveBruteforce,
        (PolicyArg::Oracle, None) => Policy::Oracle,
        (PolicyArg::Canonical, None) => Policy::Canonical,
    };
    if let Policy::Oracle = policy {
        let ex = Expectimax::with_budget(&inst, cfg.oracle_states)?;
        eprintln!("exact expected cost: {} ({:.6})", ex.value(), to_f64(ex.value()));
    }
    let rep = run_trials(&policy, &inst, &cfg)?;
    eprintln!(
        "{}: mean {:.6} std {:.6} ci95 {:.6} over {} trials",
        policy.name(),
        rep.stats.mean,
        rep.stats.std,
        rep.stats.ci95,
        rep.stats.trials
    );
    emit(&cfg, &a.path, &[CsvRow::from_report(&rep, cfg.seed)], &rep)
}

fn gap(a: GapArgs, execution: Execution) -> CliResult {
    let inst = Instance::load(&a.path)?;
    let cfg = config(&a.sim, execution);
    check_constants(&cfg.constants)?;
    if a.r.is_empty() {
        return Err(Failure::Usage("--r needs at least one value".into()));
    }
    let rows = gap_experiment(&inst, &a.r, &cfg)?;
    for row in &rows {
        eprintln!(
            "r={}: mean {:.6} ci95 {:.6} reference {:.6} ({:?}) ratio {:.4}",
            row.r, row.stats.mean, row.stats.ci95, row.reference.value, row.reference.kind, row.ratio
        );
    }
    let csv: Vec<CsvRow> = rows
        .iter()
        .map(|g| CsvRow::new("r-round", Some(g.r), &g.stats, cfg.seed))
        .collect();
    emit(&cfg, &a.path, &csv, &rows)
}

fn lp(a: LpArgs) -> CliResult {
    let inst = Instance::load(&a.path)?;
    let lp = build_lp(&inst)?;
    if let Some(p) = &a.dump {
        lp.write_text(File::create(p)?)?;
    }
    let sol = solve_lp(&lp)?;
    let y: Vec<String> = sol.y.iter().map(|v| v.to_string()).collect();
    println!("P = {} ({:.6})", sol.value, to_f64(&sol.value));
    println!("y* = [{}]", y.join(", "));
    match Expectimax::solve(&inst) {
        Ok(ex) => {
            let w = opt_policy_to_w(&inst, &ex)?;
            let feasible = check_feasible(&lp, &w)?;
            println!(
                "E[cost(OPT)] = Σ w c = {} ({:.6})",
                lp.objective(&w),
                to_f64(&lp.objective(&w))
            );
            match feasible {
                None => println!("w feasible: yes"),
                Some(v) => return Err(Failure::Check(format!("w violates {v:?}"))),
            }
        }
        Err(Error::Capacity(msg)) => println!("optimal policy skipped: {msg}"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> CliResult {
    let inst = Instance::load(&a.path)?;
    let ex = Expectimax::with_budget(&inst, a.states)?;
    println!("{}", ex.value());
    eprintln!(
        "optimal adaptive: {} ({:.6}), {} states",
        ex.value(),
        to_f64(ex.value()),
        ex.states()
    );
    if inst.m() <= BRUTEFORCE_MAX_ITEMS {
        let best = best_nonadaptive_bruteforce(&inst)?;
        eprintln!(
            "best non-adaptive: {} ({:.6}), ordering {:?}",
            best.expected_cost,
            to_f64(&best.expected_cost),
            best.ordering
        );
    }
    Ok(())
}
