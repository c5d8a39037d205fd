//! Library side of the `unanimity` command: instance generation, solving,
//! independent verification of reports, and benchmark sweeps.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use unanimity::feasibility::{direct_constraints, feasible_full, normalized_region, AgentRegion};
use unanimity::instances::io::{
    read_instance, read_lottery, read_permutation, sidecar_path, write_instance, write_lottery,
    write_permutation, write_truth,
};
use unanimity::instances::{generate, GeneratorSpec};
use unanimity::model::expected_utility;
use unanimity::solvers::{
    solve_baseline, solve_deterministic, solve_randomized, NullWitness, Outcome, SolverKind,
};
use unanimity::{Advice, Instance, Lottery, Oracle, QueryCategory, Rational, SolveReport};

/// Exit codes shared by every subcommand.
pub mod exit {
    pub const ACCEPTED: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const NULL: i32 = 3;
    pub const USAGE: i32 = 64;
    pub const DATA: i32 = 65;
    pub const NO_INPUT: i32 = 66;
    pub const INTERNAL: i32 = 70;
    pub const IO: i32 = 74;
}

/// Maps an error chain to a process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<unanimity::Error>() {
            return match e {
                unanimity::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => exit::NO_INPUT,
                unanimity::Error::Io(_) | unanimity::Error::Csv(_) => exit::IO,
                unanimity::Error::InternalLogic(_) => exit::INTERNAL,
                _ => exit::DATA,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            return if io.kind() == std::io::ErrorKind::NotFound {
                exit::NO_INPUT
            } else {
                exit::IO
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return exit::USAGE;
        }
    }
    exit::INTERNAL
}

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Paths written by [`cmd_gen`].
#[derive(Debug)]
pub struct GenFiles {
    pub instance: PathBuf,
    pub truth: PathBuf,
    pub hint: Option<PathBuf>,
    pub order: Option<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes the instance plus a ground-truth sidecar, and advice sidecars when
/// the family provides them.
pub fn cmd_gen(spec: &GeneratorSpec, out: &Path) -> Result<GenFiles> {
    let g = generate(spec)?;
    write_instance(&g.instance, out).with_context(|| format!("writing {}", out.display()))?;
    let truth = sidecar_path(out, "truth");
    write_truth(&g.truth, &truth)?;
    let mut files = GenFiles {
        instance: out.to_path_buf(),
        truth,
        hint: None,
        order: None,
        warnings: g.warnings,
    };
    if let Some(advice) = g.advice {
        if let Some(x) = advice.hint {
            let p = sidecar_path(out, "hint");
            write_lottery(&x, &p)?;
            files.hint = Some(p);
        }
        if let Some(order) = advice.order {
            let p = sidecar_path(out, "perm");
            write_permutation(&order, &p)?;
            files.order = Some(p);
        }
    }
    Ok(files)
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub solver: SolverKind,
    pub advice_perm: Option<PathBuf>,
    pub advice_lottery: Option<PathBuf>,
    pub seed: u64,
    pub trace: Option<PathBuf>,
}

pub fn load_advice(perm: Option<&Path>, lottery: Option<&Path>) -> Result<Advice> {
    Ok(Advice {
        order: perm
            .map(|p| read_permutation(p).with_context(|| format!("reading {}", p.display())))
            .transpose()?,
        hint: lottery
            .map(|p| read_lottery(p).with_context(|| format!("reading {}", p.display())))
            .transpose()?,
    })
}

pub fn solve_with(o: &mut Oracle, solver: SolverKind, advice: &Advice, seed: u64) -> Result<SolveReport> {
    if solver == SolverKind::Baseline && advice.kind() != unanimity::AdviceKind::None {
        return Err(usage("the baseline solver takes no advice"));
    }
    Ok(match solver {
        SolverKind::Baseline => solve_baseline(o)?,
        SolverKind::Deterministic => solve_deterministic(o, advice)?,
        SolverKind::Randomized => solve_randomized(o, advice, seed)?,
    })
}

/// Solves one instance on a simulated oracle; writes the query trace if asked.
pub fn cmd_solve(inst: Arc<Instance>, cfg: &SolveConfig) -> Result<SolveReport> {
    let advice = load_advice(cfg.advice_perm.as_deref(), cfg.advice_lottery.as_deref())?;
    let mut o = Oracle::simulated(inst);
    if cfg.trace.is_some() {
        o = o.with_trace(usize::MAX);
    }
    let report = solve_with(&mut o, cfg.solver, &advice, cfg.seed)?;
    if let Some(path) = &cfg.trace {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        o.ledger().write_trace_csv(f)?;
    }
    Ok(report)
}

pub fn outcome_exit_code(report: &SolveReport) -> i32 {
    if report.outcome.is_accepted() {
        exit::ACCEPTED
    } else {
        exit::NULL
    }
}

/// Independent check of a report against the hidden instance, using only
/// direct utility evaluation and the query-free reference solver.
pub fn cmd_verify(report: &SolveReport, inst: &Instance) -> std::result::Result<(), String> {
    if report.n != inst.n() || report.m != inst.m() || report.inv_epsilon != inst.inv_epsilon() {
        return Err(format!(
            "report is for n={}, m={}, 1/eps={} but the instance has n={}, m={}, 1/eps={}",
            report.n,
            report.m,
            report.inv_epsilon,
            inst.n(),
            inst.m(),
            inst.inv_epsilon()
        ));
    }
    if !report.ledger.is_consistent() {
        return Err("query counters are inconsistent".into());
    }
    match &report.outcome {
        Outcome::Accepted { lottery } => {
            if lottery.m() != inst.m() {
                return Err(format!("lottery has {} coordinates, expected {}", lottery.m(), inst.m()));
            }
            for (i, a) in inst.agents().iter().enumerate() {
                let u = expected_utility(a, lottery).map_err(|e| e.to_string())?;
                if u < a.threshold {
                    return Err(format!(
                        "agent {i} rejects the lottery: utility {u} < threshold {}",
                        a.threshold
                    ));
                }
            }
            Ok(())
        }
        Outcome::Null { witness } => {
            if feasible_full(inst).map_err(|e| e.to_string())?.is_feasible() {
                return Err("claimed infeasible, but a unanimously acceptable lottery exists".into());
            }
            if let Some(&bad) = witness.agents().iter().find(|&&i| i >= inst.n()) {
                return Err(format!("witness names agent {bad}, but n = {}", inst.n()));
            }
            match witness {
                NullWitness::RejectAll { agent } => {
                    match normalized_region(&inst.agents()[*agent]) {
                        AgentRegion::RejectAll => Ok(()),
                        _ => Err(format!("agent {agent} accepts some lottery")),
                    }
                }
                NullWitness::Helly { agents } => {
                    match direct_constraints(inst, agents.iter().copied()).map_err(|e| e.to_string())? {
                        Err(_) => Ok(()),
                        Ok(set) => {
                            if set.is_feasible().map_err(|e| e.to_string())? {
                                Err(format!("witness {agents:?} is jointly feasible"))
                            } else {
                                Ok(())
                            }
                        }
                    }
                }
            }
        }
    }
}

/// One line of a benchmark table. Field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance_id: String,
    pub n: usize,
    pub m: usize,
    pub inv_epsilon: u64,
    pub solver: String,
    pub advice: String,
    pub seed: u64,
    pub outcome: String,
    pub total_queries: u64,
    pub pure_vertex: u64,
    pub threshold_search: u64,
    pub verification: u64,
    pub advice_check: u64,
    pub learned_agents: usize,
    pub record_count: Option<usize>,
    pub iterations: Option<u64>,
    pub wall_ms: f64,
}

impl BenchRow {
    pub fn from_report(instance_id: &str, advice_label: &str, seed: u64, r: &SolveReport, wall_ms: f64) -> Self {
        BenchRow {
            instance_id: instance_id.to_string(),
            n: r.n,
            m: r.m,
            inv_epsilon: r.inv_epsilon,
            solver: r.solver.to_string(),
            advice: advice_label.to_string(),
            seed,
            outcome: r.outcome.kind_str().to_string(),
            total_queries: r.ledger.total(),
            pure_vertex: r.ledger.category(QueryCategory::PureVertex),
            threshold_search: r.ledger.category(QueryCategory::ThresholdSearch),
            verification: r.ledger.category(QueryCategory::Verification),
            advice_check: r.ledger.category(QueryCategory::AdviceCheck),
            learned_agents: r.learned_agents.len(),
            record_count: r.record_count,
            iterations: r.iterations,
            wall_ms,
        }
    }
}

/// Advice given to every run of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AdviceMode {
    None,
    /// Binding agents first (see [`binding_first_order`]).
    PerfectPerm,
    /// Binding agents last.
    AdversarialPerm,
    /// The generator's lottery hint, when it has one.
    Hint,
}

impl AdviceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AdviceMode::None => "none",
            AdviceMode::PerfectPerm => "perfect-perm",
            AdviceMode::AdversarialPerm => "adversarial-perm",
            AdviceMode::Hint => "hint",
        }
    }
}

impl std::str::FromStr for AdviceMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        [AdviceMode::None, AdviceMode::PerfectPerm, AdviceMode::AdversarialPerm, AdviceMode::Hint]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| usage(format!("unknown advice mode {s:?}")))
    }
}

/// Agents that pin down the answer, first: those with zero slack at the
/// reference lottery, or a Helly witness when infeasible. Remaining agents
/// follow in index order.
pub fn binding_first_order(inst: &Instance) -> Result<Vec<usize>> {
    let mut binding: Vec<usize> = match feasible_full(inst)?.lottery() {
        Some(x) => (0..inst.n())
            .filter(|&i| {
                let a = &inst.agents()[i];
                expected_utility(a, x).map(|u| u == a.threshold).unwrap_or(false)
            })
            .collect(),
        None => match direct_constraints(inst, 0..inst.n())? {
            Err(i) => vec![i],
            Ok(set) => unanimity::helly_witness(&set)?.agents.into_iter().collect(),
        },
    };
    let rest: Vec<usize> = (0..inst.n()).filter(|i| !binding.contains(i)).collect();
    binding.extend(rest);
    Ok(binding)
}

/// Generator families reachable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    #[value(name = "example-2-1")]
    Example21,
    #[value(name = "example-2-3")]
    Example23,
    RandomFeasible,
    RandomInfeasible,
    GridSingleton,
    DummyPadded,
    PointMass,
    NearThreshold,
}

/// Family plus whatever parameters it needs; unused ones are ignored.
#[derive(Clone, Debug)]
pub struct FamilyArgs {
    pub family: Family,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub inv_epsilon: Option<u64>,
    pub x: Option<Lottery>,
    pub j: Option<usize>,
    pub q: Option<u64>,
    pub delta: Option<Rational>,
    pub t: Option<u64>,
}

impl FamilyArgs {
    pub fn new(family: Family) -> Self {
        FamilyArgs {
            family,
            n: None,
            m: None,
            inv_epsilon: None,
            x: None,
            j: None,
            q: None,
            delta: None,
            t: None,
        }
    }

    fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
        v.clone().ok_or_else(|| usage(format!("this family needs --{flag}")))
    }

    pub fn spec(&self, seed: u64) -> Result<GeneratorSpec> {
        let n = || Self::need(&self.n, "n");
        let m = || Self::need(&self.m, "m");
        let q = || Self::need(&self.inv_epsilon, "inv-eps");
        Ok(match self.family {
            Family::Example21 => GeneratorSpec::Example2_1,
            Family::Example23 => GeneratorSpec::Example2_3,
            Family::RandomFeasible => GeneratorSpec::RandomFeasible { n: n()?, m: m()?, inv_epsilon: q()?, seed },
            Family::RandomInfeasible => GeneratorSpec::RandomInfeasible { n: n()?, m: m()?, inv_epsilon: q()?, seed },
            Family::GridSingleton => GeneratorSpec::GridSingleton { x: Self::need(&self.x, "x")?, inv_epsilon: q()? },
            Family::DummyPadded => GeneratorSpec::DummyPadded { x: Self::need(&self.x, "x")?, inv_epsilon: q()?, n: n()? },
            Family::PointMass => GeneratorSpec::PointMass { m: m()?, j: Self::need(&self.j, "j")?, inv_epsilon: q()? },
            Family::NearThreshold => GeneratorSpec::NearThreshold {
                q: Self::need(&self.q, "Q")?,
                delta: Self::need(&self.delta, "delta")?,
                t: Self::need(&self.t, "t")?,
            },
        })
    }

    /// Short label used in instance ids.
    pub fn label(&self) -> String {
        let name = clap::ValueEnum::to_possible_value(&self.family)
            .map(|v| v.get_name().to_string())
            .unwrap_or_default();
        let mut parts = vec![name];
        for (k, v) in [("n", self.n.map(|v| v as u64)), ("m", self.m.map(|v| v as u64)), ("q", self.inv_epsilon.or(self.q)), ("t", self.t)] {
            if let Some(v) = v {
                parts.push(format!("{k}{v}"));
            }
        }
        parts.join("-")
    }
}

/// Where the instances of a sweep come from.
#[derive(Clone, Debug)]
pub enum InstanceSource {
    Files(Vec<PathBuf>),
    /// One instance per (entry, seed); the seed is also the solver seed.
    Generated(Vec<FamilyArgs>),
}

#[derive(Debug)]
pub struct BenchConfig {
    pub source: InstanceSource,
    pub solvers: Vec<SolverKind>,
    pub advice: Vec<AdviceMode>,
    pub seeds: u64,
}

struct Job {
    order: usize,
    id: String,
    inst: Arc<Instance>,
    hint: Option<Lottery>,
    seed: u64,
}

/// Runs the sweep in parallel; rows come back sorted by instance, solver,
/// advice and seed regardless of scheduling.
pub fn cmd_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.solvers.is_empty() || cfg.advice.is_empty() || cfg.seeds == 0 {
        return Err(usage("a sweep needs at least one solver, advice mode and seed"));
    }
    let mut jobs = Vec::new();
    match &cfg.source {
        InstanceSource::Files(paths) => {
            if paths.is_empty() {
                return Err(usage("no instances given"));
            }
            for (k, p) in paths.iter().enumerate() {
                let inst = Arc::new(read_instance(p).with_context(|| format!("reading {}", p.display()))?);
                let hint_path = sidecar_path(p, "hint");
                let hint = if hint_path.exists() { Some(read_lottery(&hint_path)?) } else { None };
                for seed in 0..cfg.seeds {
                    jobs.push(Job {
                        order: k,
                        id: p.display().to_string(),
                        inst: Arc::clone(&inst),
                        hint: hint.clone(),
                        seed,
                    });
                }
            }
        }
        InstanceSource::Generated(entries) => {
            for (k, entry) in entries.iter().enumerate() {
                let label = entry.label();
                for seed in 0..cfg.seeds {
                    let g = generate(&entry.spec(seed)?)?;
                    jobs.push(Job {
                        order: k,
                        id: format!("{label}-s{seed}"),
                        inst: Arc::new(g.instance),
                        hint: g.advice.and_then(|a| a.hint),
                        seed,
                    });
                }
            }
        }
    }

    let mut tasks = Vec::new();
    for job in &jobs {
        for &solver in &cfg.solvers {
            for &mode in &cfg.advice {
                if solver == SolverKind::Baseline && mode != AdviceMode::None {
                    continue;
                }
                tasks.push((job, solver, mode));
            }
        }
    }
    let mut rows: Vec<(usize, SolverKind, AdviceMode, u64, BenchRow)> = tasks
        .par_iter()
        .map(|&(job, solver, mode)| -> Result<_> {
            let advice = match mode {
                AdviceMode::None => Advice::none(),
                AdviceMode::PerfectPerm => Advice::permutation(binding_first_order(&job.inst)?),
                AdviceMode::AdversarialPerm => {
                    let mut order = binding_first_order(&job.inst)?;
                    order.reverse();
                    Advice::permutation(order)
                }
                AdviceMode::Hint => match &job.hint {
                    Some(x) => Advice::lottery(x.clone()),
                    None => bail!("instance {} has no lottery hint", job.id),
                },
            };
            let start = Instant::now();
            let mut o = Oracle::simulated(Arc::clone(&job.inst));
            let report = solve_with(&mut o, solver, &advice, job.seed)?;
            let ms = (start.elapsed().as_secs_f64() * 1e6).round() / 1e3;
            let row = BenchRow::from_report(&job.id, mode.as_str(), job.seed, &report, ms);
            Ok((job.order, solver, mode, job.seed, row))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    Ok(rows.into_iter().map(|r| r.4).collect())
}

/// Appends rows to `path`, writing the header only when the file is new or
/// empty.
pub fn append_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    write_csv(rows, file, fresh)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    if header && rows.is_empty() {
        w.write_record(BENCH_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const BENCH_COLUMNS: [&str; 17] = [
    "instance_id",
    "n",
    "m",
    "inv_epsilon",
    "solver",
    "advice",
    "seed",
    "outcome",
    "total_queries",
    "pure_vertex",
    "threshold_search",
    "verification",
    "advice_check",
    "learned_agents",
    "record_count",
    "iterations",
    "wall_ms",
];

/// Parses `"a,b,c"` into a list.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| usage(format!("bad list entry {t:?}: {e}"))))
        .collect()
}

pub fn read_report(path: &Path) -> Result<SolveReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SolveReport::from_json(&text).map_err(|e| anyhow!(e).context(format!("parsing {}", path.display())))
}
