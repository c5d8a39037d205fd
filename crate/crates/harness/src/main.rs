use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use unanimity::instances::io::read_instance;
use unanimity::solvers::SolverKind;
use unanimity::{Lottery, Oracle, Rational};
use unanimity_harness::{
    append_csv, cmd_bench, cmd_gen, cmd_solve, cmd_verify, exit, exit_code, load_advice, outcome_exit_code,
    parse_list, read_report, solve_with, usage, write_csv, AdviceMode, BenchConfig, BenchRow, Family,
    FamilyArgs, InstanceSource, SolveConfig,
};

#[derive(Parser)]
#[command(name = "unanimity", version, about = "Find a lottery every agent accepts, using yes/no queries only")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file (plus ground-truth and advice sidecars).
    Gen(GenArgs),
    /// Run a solver and print its report.
    Solve(SolveArgs),
    /// Check a report against its instance without using the oracle.
    Verify(VerifyArgs),
    /// Run a sweep and append one CSV row per run.
    Bench(BenchArgs),
}

#[derive(Args)]
struct FamilyFlags {
    /// Number of agents.
    #[arg(long)]
    n: Option<usize>,
    /// Number of alternatives.
    #[arg(long)]
    m: Option<usize>,
    /// Precision: utilities are multiples of 1/inv-eps.
    #[arg(long = "inv-eps")]
    inv_eps: Option<u64>,
    /// Planted grid lottery, e.g. 1/4,1/4,1/2.
    #[arg(long)]
    x: Option<String>,
    /// Alternative index for point-mass.
    #[arg(long)]
    j: Option<usize>,
    /// Grid size of the near-threshold family.
    #[arg(long = "Q", alias = "q")]
    q: Option<u64>,
    /// Hint accuracy of the near-threshold family.
    #[arg(long)]
    delta: Option<String>,
    /// Member of the near-threshold family.
    #[arg(long)]
    t: Option<u64>,
}

impl FamilyFlags {
    fn to_args(&self, family: Family) -> Result<FamilyArgs> {
        let mut a = FamilyArgs::new(family);
        a.n = self.n;
        a.m = self.m;
        a.inv_epsilon = self.inv_eps;
        a.x = self
            .x
            .as_deref()
            .map(Lottery::parse_list)
            .transpose()
            .map_err(|e| usage(format!("--x: {e}")))?;
        a.j = self.j;
        a.q = self.q;
        a.delta = self
            .delta
            .as_deref()
            .map(str::parse::<Rational>)
            .transpose()
            .map_err(|e| usage(format!("--delta: {e}")))?;
        a.t = self.t;
        Ok(a)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: Family,
    #[command(flatten)]
    params: FamilyFlags,
    /// Generator seed (random families).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance file to write; sidecars go beside it.
    #[arg(long, default_value = "instance.instance.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file. Omit with --interactive.
    instance: Option<PathBuf>,
    #[arg(long, default_value = "deterministic", value_parser = parse_solver)]
    solver: SolverKind,
    /// JSON array of agent indices, most binding first.
    #[arg(long = "advice-perm")]
    advice_perm: Option<PathBuf>,
    /// JSON array of "p/q" lottery coordinates.
    #[arg(long = "advice-lottery")]
    advice_lottery: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write every query as CSV to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Ask the queries on the terminal instead of simulating an instance.
    #[arg(long, requires_all = ["n", "m", "inv_eps"], conflicts_with = "instance")]
    interactive: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "inv-eps")]
    inv_eps: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    report: PathBuf,
    instance: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files; when absent, instances come from --family.
    instances: Vec<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Comma-separated agent counts to sweep (generated instances).
    #[arg(long = "n-list", alias = "ns")]
    n_list: Option<String>,
    #[command(flatten)]
    params: FamilyFlags,
    /// Comma-separated solvers.
    #[arg(long, default_value = "baseline,deterministic,randomized")]
    solvers: String,
    /// Comma-separated advice modes: none, perfect-perm, adversarial-perm, hint.
    #[arg(long, default_value = "none")]
    advice: String,
    /// Seeds 0..N per instance entry.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// CSV file to append to; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_solver(s: &str) -> std::result::Result<SolverKind, String> {
    s.parse().map_err(|e: unanimity::Error| e.to_string())
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(a) => {
            let spec = a.params.to_args(a.family)?.spec(a.seed)?;
            let files = cmd_gen(&spec, &a.out)?;
            for w in &files.warnings {
                log::warn!("{w}");
                eprintln!("warning: {w}");
            }
            println!("{}", files.instance.display());
            println!("{}", files.truth.display());
            for p in files.hint.iter().chain(&files.order) {
                println!("{}", p.display());
            }
            Ok(exit::ACCEPTED)
        }
        Command::Solve(a) => {
            let report = if a.interactive {
                let advice = load_advice(a.advice_perm.as_deref(), a.advice_lottery.as_deref())?;
                let (n, m, q) = (a.n.unwrap_or(0), a.m.unwrap_or(0), a.inv_eps.unwrap_or(0));
                let input = Box::new(BufReader::new(io::stdin()));
                let mut o = Oracle::interactive(n, m, q, input, Box::new(io::stderr()))?;
                solve_with(&mut o, a.solver, &advice, a.seed)?
            } else {
                let path = a.instance.as_ref().ok_or_else(|| usage("an instance file is required"))?;
                let inst = Arc::new(read_instance(path).with_context(|| format!("reading {}", path.display()))?);
                let cfg = SolveConfig {
                    solver: a.solver,
                    advice_perm: a.advice_perm.clone(),
                    advice_lottery: a.advice_lottery.clone(),
                    seed: a.seed,
                    trace: a.trace.clone(),
                };
                cmd_solve(inst, &cfg)?
            };
            let text = match a.format {
                Format::Json => report.to_json()? + "\n",
                Format::Csv => {
                    let id = a.instance.as_ref().map_or("interactive".into(), |p| p.display().to_string());
                    let row = BenchRow::from_report(&id, report.advice.as_str(), a.seed, &report, 0.0);
                    let mut buf = Vec::new();
                    write_csv(&[row], &mut buf, true)?;
                    String::from_utf8(buf)?
                }
            };
            emit(&text, a.out.as_ref())?;
            Ok(outcome_exit_code(&report))
        }
        Command::Verify(a) => {
            let report = read_report(&a.report)?;
            let inst = read_instance(&a.instance).with_context(|| format!("reading {}", a.instance.display()))?;
            match cmd_verify(&report, &inst) {
                Ok(()) => {
                    println!("pass: {}", report.outcome.kind_str());
                    Ok(exit::ACCEPTED)
                }
                Err(why) => {
                    println!("fail: {why}");
                    Ok(exit::VERIFY_FAILED)
                }
            }
        }
        Command::Bench(a) => {
            let source = match (a.instances.is_empty(), a.family) {
                (false, None) => InstanceSource::Files(a.instances.clone()),
                (true, Some(family)) => {
                    let base = a.params.to_args(family)?;
                    let entries = match &a.n_list {
                        None => vec![base],
                        Some(list) => parse_list::<usize>(list)?
                            .into_iter()
                            .map(|n| FamilyArgs { n: Some(n), ..base.clone() })
                            .collect(),
                    };
                    InstanceSource::Generated(entries)
                }
                _ => return Err(usage("give either instance files or --family")),
            };
            let solvers = a
                .solvers
                .split(',')
                .map(|s| parse_solver(s.trim()).map_err(usage))
                .collect::<Result<Vec<_>>>()?;
            let cfg = BenchConfig {
                source,
                solvers,
                advice: parse_list::<AdviceMode>(&a.advice)?,
                seeds: a.seeds,
            };
            let rows = cmd_bench(&cfg)?;
            match &a.out {
                Some(p) => append_csv(&rows, p)?,
                None => write_csv(&rows, io::stdout(), true)?,
            }
            Ok(exit::ACCEPTED)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
