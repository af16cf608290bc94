use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use taplab::adversary::{
    duel, gen_ballistic_crafted, gen_dtap_levels, gen_geometric, gen_mrt_cheap_expensive, gen_obliv_two_task,
    gen_random, gen_randlb, geometric_prefix, golden_seed, AdvGolden, AdvNonpreemptive, Adversary, ArrivalPattern,
    GenParams, RatioDist,
};
use taplab::engine::{simulate, validate_trace, EngineConfig, Trace};
use taplab::metrics::metrics_from_trace;
use taplab::model::round_pow2;
use taplab::oracle::{grid_opt, opt_awake_exhaustive, opt_trt_lower, GridLimits, Objective, DEFAULT_MAX_EVALS};
use taplab::registry::{default_requirements, make_scheduler, SchedOptions, SCHEDULERS};
use taplab::verify::{ballistic_stats, run_battery, VerifyConfig};
use taplab::{Rational, Tap};

const DEFAULT_SEED: u64 = 20240601;

#[derive(Parser)]
#[command(name = "taplab", version, about = "Simulate and compare schedulers on task-arrival instances")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct EngineArgs {
    /// Speed augmentation applied to every allocated processor.
    #[arg(long, default_value = "1")]
    speed: Rational,
    /// Processor budget as a multiple of p (defaults to what the scheduler needs).
    #[arg(long)]
    budget_factor: Option<usize>,
    /// Permit the scheduler to cancel running tasks.
    #[arg(long)]
    allow_cancel: bool,
    /// Work scale of the inner simulation used by `csched`.
    #[arg(long, default_value = "3")]
    inner_scale: Rational,
    /// Round works up to powers of two first (needed by `bsched` and `csched`).
    #[arg(long)]
    round_pow2: bool,
}

impl EngineArgs {
    fn config(&self, scheduler: &str, p: usize) -> Result<(EngineConfig, usize)> {
        let (need, cancel) = default_requirements(scheduler)?;
        if cancel && !self.allow_cancel {
            bail!("scheduler {scheduler} cancels tasks; pass --allow-cancel");
        }
        let factor = self.budget_factor.unwrap_or(need);
        if factor == 0 {
            bail!("--budget-factor must be positive");
        }
        let cfg = EngineConfig::new(p)
            .with_budget_factor(p, factor)
            .with_speed(self.speed.clone())
            .with_cancel(self.allow_cancel);
        Ok((cfg, factor))
    }

    fn prepare(&self, tap: Tap) -> Tap {
        if self.round_pow2 {
            round_pow2(&tap)
        } else {
            tap
        }
    }

    fn options(&self) -> SchedOptions {
        SchedOptions { inner_scale: self.inner_scale.clone() }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scheduler on one instance and print a JSON record.
    Run {
        tap: PathBuf,
        scheduler: String,
        #[command(flatten)]
        engine: EngineArgs,
        /// Write the full trace as JSON to this file.
        #[arg(long)]
        dump_trace: Option<PathBuf>,
    },
    /// Run schedulers over a corpus and print one CSV row per pair.
    Sweep {
        /// Generator for the corpus (ignored with --dir).
        #[arg(long, value_enum, default_value = "random")]
        gen: Corpus,
        /// Directory of instance files instead of a generator.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Processor counts, cycled over the generated instances.
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        p: Vec<usize>,
        /// Largest instance size for random corpora.
        #[arg(long, default_value_t = 10)]
        max_n: usize,
        #[arg(long, env = "TAPLAB_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "bal,unk")]
        schedulers: Vec<String>,
        #[arg(long, value_enum, default_value = "both")]
        oracle: OracleMode,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a generated instance as JSON.
    Gen {
        #[arg(value_enum)]
        name: GenName,
        #[arg(long, default_value_t = 16)]
        p: usize,
        #[arg(long, env = "TAPLAB_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Task count for `random`.
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, value_enum, default_value = "uniform")]
        ratio: Ratio,
        #[arg(long, value_enum, default_value = "poisson")]
        arrivals: Arrivals,
        /// Dependency probability for `random`.
        #[arg(long, default_value_t = 0.0)]
        dep_prob: f64,
        /// Prefix length (`geometric-prefix`), class exponent (`ballistic`).
        #[arg(long, default_value_t = 1)]
        j: usize,
        /// Block count (`randlb`).
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        /// Second-task serial work (`two-task`).
        #[arg(long, default_value = "1")]
        x: Rational,
        /// Second task unparallelizable (`two-task`).
        #[arg(long)]
        unparallelizable: bool,
        /// Arrival stagger and late-task count (`ballistic`).
        #[arg(long, default_value_t = 0)]
        a: i32,
        #[arg(long, default_value_t = 4)]
        m: i32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a scheduler against an adaptive adversary.
    Duel {
        scheduler: String,
        #[arg(value_enum)]
        adversary: AdvName,
        #[arg(long, default_value_t = 100)]
        p: usize,
        /// Speed ratio R of the non-preemptive adversary.
        #[arg(long, default_value_t = 10)]
        r: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        dump_trace: Option<PathBuf>,
    },
    /// Offline optima and bounds for one instance.
    Oracle {
        tap: PathBuf,
        #[arg(value_enum)]
        kind: OracleKind,
        /// Grid step for `grid` (defaults to 1/(2p)).
        #[arg(long)]
        grid: Option<Rational>,
    },
    /// Run the acceptance battery.
    Verify {
        /// Criteria ids (A1..A12) or groups (oracle, awake, mrt, dtap).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, env = "TAPLAB_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Scheduler checked against the balancer bound.
        #[arg(long, default_value = "bal")]
        bal_scheduler: String,
        /// Size of the random corpora.
        #[arg(long, default_value_t = VerifyConfig::default().corpus)]
        corpus: usize,
        /// Print per-criterion wall time to stderr.
        #[arg(long)]
        timings: bool,
    },
    /// List scheduler names.
    Schedulers,
}

#[derive(Clone, Copy, ValueEnum)]
enum Corpus {
    Random,
    Pow2,
    Dtap,
    CheapExpensive,
    Crafted,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleMode {
    None,
    Awake,
    Trt,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenName {
    Random,
    GoldenSeed,
    Geometric,
    GeometricPrefix,
    Randlb,
    TwoTask,
    CheapExpensive,
    DtapLevels,
    Ballistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ratio {
    Uniform,
    Extremes,
    Pow2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arrivals {
    Batch,
    Poisson,
    Bursty,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdvName {
    Golden,
    Nonpreemptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    /// Exact awake-time optimum.
    Awake,
    /// Lower bound on total response time.
    TrtLb,
    /// Discretized awake-time search.
    Grid,
}

fn load(path: &Path) -> Result<Tap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Tap::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    write_out(None, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn hash_hex(tap: &Tap) -> String {
    format!("{:016x}", tap.instance_hash())
}

fn record(tap: &Tap, trace: &Trace, cfg: &EngineConfig, factor: usize) -> Result<(serde_json::Value, bool)> {
    let m = metrics_from_trace(trace, tap)?;
    let violations: Vec<String> = validate_trace(trace, tap, cfg).iter().map(|v| v.to_string()).collect();
    let clean = violations.is_empty();
    let rec = json!({
        "scheduler": trace.scheduler,
        "instance_hash": hash_hex(tap),
        "p": tap.p(),
        "speed": cfg.speed.to_string(),
        "budget_factor": factor,
        "awake": m.awake.to_string(),
        "trt": m.trt.to_string(),
        "mrt": m.mrt.to_string(),
        "n": tap.len(),
        "cancellations": trace.cancellations.len(),
        "violations": violations,
    });
    Ok((rec, clean))
}

fn cmd_run(tap: &Path, scheduler: &str, engine: &EngineArgs, dump: Option<&Path>) -> Result<bool> {
    let tap = engine.prepare(load(tap)?);
    let (cfg, factor) = engine.config(scheduler, tap.p())?;
    let mut s = make_scheduler(scheduler, &engine.options())?;
    let trace = simulate(&tap, &mut s, cfg.clone())?;
    if let Some(d) = dump {
        write_out(Some(d), &trace.to_json())?;
    }
    let (rec, clean) = record(&tap, &trace, &cfg, factor)?;
    print_json(&rec)?;
    Ok(clean)
}

fn corpus(gen: Corpus, count: usize, ps: &[usize], max_n: usize, seed: u64) -> Result<Vec<(String, Tap)>> {
    if ps.is_empty() {
        bail!("--p needs at least one value");
    }
    let mut out = Vec::new();
    for i in 0..count {
        let p = ps[i % ps.len()];
        let s = seed.wrapping_add(i as u64);
        let n = 1 + i % max_n.max(1);
        let tap = match gen {
            Corpus::Random => gen_random(&GenParams::new(p, n, s))?,
            Corpus::Pow2 => gen_random(&GenParams {
                ratio: RatioDist::PowersOfTwo,
                work_range: ("1/2".parse()?, Rational::from(8)),
                ..GenParams::new(p, n, s)
            })?,
            Corpus::Dtap => gen_random(&GenParams { dep_prob: 0.5, ..GenParams::new(p, n, s) })?,
            Corpus::CheapExpensive => gen_mrt_cheap_expensive(p, s)?,
            Corpus::Crafted => gen_ballistic_crafted(p, 1 + (i % 2) as i32, ((i / 2) % 3) as i32, 4 + ((i / 6) % 2) as i32)?,
        };
        out.push((hash_hex(&tap), tap));
    }
    Ok(out)
}

fn corpus_dir(dir: &Path) -> Result<Vec<(String, Tap)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, load(p)?))
        })
        .collect()
}

const SWEEP_HEADER: [&str; 12] = [
    "instance",
    "scheduler",
    "p",
    "n",
    "awake",
    "trt",
    "opt_awake",
    "trt_lb",
    "ratio_awake",
    "ratio_trt_lb",
    "max_ballistic_over_2sigma",
    "violations",
];

/// One CSV row, plus a warning when an oracle gave up.
fn sweep_row(name: &str, tap: &Tap, scheduler: &str, oracle: OracleMode, engine: &EngineArgs) -> (Vec<String>, Option<String>) {
    let tap = &engine.prepare(tap.clone());
    let mut row = vec![name.to_string(), scheduler.to_string(), tap.p().to_string(), tap.len().to_string()];
    let fail = |mut row: Vec<String>, e: String| {
        row.resize(SWEEP_HEADER.len(), String::new());
        (row, Some(format!("{name} {scheduler}: {e}")))
    };
    let run = || -> Result<(Trace, EngineConfig)> {
        let (cfg, _) = engine.config(scheduler, tap.p())?;
        let mut s = make_scheduler(scheduler, &engine.options())?;
        Ok((simulate(tap, &mut s, cfg.clone())?, cfg))
    };
    let (trace, cfg) = match run() {
        Ok(v) => v,
        Err(e) => return fail(row, e.to_string()),
    };
    let m = match metrics_from_trace(&trace, tap) {
        Ok(m) => m,
        Err(e) => return fail(row, e.to_string()),
    };
    let mut warning = None;
    let opt = if matches!(oracle, OracleMode::Awake | OracleMode::Both) {
        match opt_awake_exhaustive(tap, DEFAULT_MAX_EVALS) {
            Ok((v, _)) => Some(v),
            Err(e) => {
                warning = Some(format!("{name} {scheduler}: awake oracle skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    let lb = matches!(oracle, OracleMode::Trt | OracleMode::Both).then(|| opt_trt_lower(tap));
    let cell = |r: &Option<Rational>| r.as_ref().map(|v| v.to_string()).unwrap_or_default();
    let ratio = |num: &Rational, den: &Option<Rational>| match den {
        Some(d) if !d.is_zero() => (num / d).to_string(),
        _ => String::new(),
    };
    let ballistic = if scheduler.starts_with("csched") {
        ballistic_stats(&trace, tap).max_over_2sigma.to_string()
    } else {
        String::new()
    };
    let violations = validate_trace(&trace, tap, &cfg).len();
    row.extend([
        m.awake.to_string(),
        m.trt.to_string(),
        cell(&opt),
        cell(&lb),
        ratio(&m.awake, &opt),
        ratio(&m.trt, &lb),
        ballistic,
        violations.to_string(),
    ]);
    (row, warning)
}

fn cmd_sweep(
    taps: Vec<(String, Tap)>,
    schedulers: &[String],
    oracle: OracleMode,
    engine: &EngineArgs,
    output: Option<&Path>,
) -> Result<()> {
    for s in schedulers {
        default_requirements(s)?;
    }
    let jobs: Vec<(&String, &Tap, &String)> =
        taps.iter().flat_map(|(n, t)| schedulers.iter().map(move |s| (n, t, s))).collect();
    let rows: Vec<(Vec<String>, Option<String>)> =
        jobs.par_iter().map(|(n, t, s)| sweep_row(n, t, s, oracle, engine)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for (row, warning) in &rows {
        w.write_record(row)?;
        if let Some(msg) = warning {
            eprintln!("warning: {msg}");
        }
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    write_out(output, &String::from_utf8(bytes)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    name: GenName,
    p: usize,
    seed: u64,
    n: usize,
    ratio: Ratio,
    arrivals: Arrivals,
    dep_prob: f64,
    j: usize,
    blocks: usize,
    x: &Rational,
    unparallelizable: bool,
    a: i32,
    m: i32,
) -> Result<Tap> {
    Ok(match name {
        GenName::Random => gen_random(&GenParams {
            ratio: match ratio {
                Ratio::Uniform => RatioDist::Uniform,
                Ratio::Extremes => RatioDist::Extremes,
                Ratio::Pow2 => RatioDist::PowersOfTwo,
            },
            arrivals: match arrivals {
                Arrivals::Batch => ArrivalPattern::Batch,
                Arrivals::Poisson => ArrivalPattern::PoissonLike,
                Arrivals::Bursty => ArrivalPattern::Bursty,
            },
            dep_prob,
            ..GenParams::new(p, n, seed)
        })?,
        GenName::GoldenSeed => golden_seed(p)?,
        GenName::Geometric => gen_geometric(p)?,
        GenName::GeometricPrefix => geometric_prefix(p, j)?,
        GenName::Randlb => gen_randlb(p, blocks, seed)?.0,
        GenName::TwoTask => gen_obliv_two_task(p, x, unparallelizable)?,
        GenName::CheapExpensive => gen_mrt_cheap_expensive(p, seed)?,
        GenName::DtapLevels => gen_dtap_levels(p, seed)?,
        GenName::Ballistic => gen_ballistic_crafted(p, j as i32, a, m)?,
    })
}

fn cmd_duel(scheduler: &str, adversary: AdvName, p: usize, r: usize, engine: &EngineArgs, dump: Option<&Path>) -> Result<()> {
    let mut adv: Box<dyn Adversary> = match adversary {
        AdvName::Golden => Box::new(AdvGolden::new(p)),
        AdvName::Nonpreemptive => Box::new(AdvNonpreemptive::new(
            r,
            Tap::new(p, vec![taplab::Task::new(0, Rational::one(), Rational::from(p), Rational::zero())])?,
        )?),
    };
    let (cfg, factor) = engine.config(scheduler, p)?;
    let mut s = make_scheduler(scheduler, &engine.options())?;
    let out = duel(adv.as_mut(), &mut s, cfg.clone())?;
    if let Some(d) = dump {
        write_out(Some(d), &out.trace.to_json())?;
    }
    let (mut rec, _) = record(&out.tap, &out.trace, &cfg, factor)?;
    let m = metrics_from_trace(&out.trace, &out.tap)?;
    let ratio = match adversary {
        AdvName::Golden => opt_awake_exhaustive(&out.tap, DEFAULT_MAX_EVALS).map(|(o, _)| json!({
            "opt_awake": o.to_string(),
            "ratio_awake": (&m.awake / &o).to_string(),
        })),
        AdvName::Nonpreemptive => {
            let lb = opt_trt_lower(&out.tap);
            Ok(json!({ "trt_lb": lb.to_string(), "ratio_trt_lb": (&m.trt / &lb).to_string() }))
        }
    }?;
    rec["adversary"] = json!(adv.name());
    rec["triggered_at"] = json!(out.triggered_at.map(|t| t.to_string()));
    rec["inconclusive"] = json!(out.inconclusive);
    rec["report"] = ratio;
    print_json(&rec)?;
    Ok(())
}

fn cmd_oracle(tap: &Path, kind: OracleKind, grid: Option<Rational>) -> Result<()> {
    let tap = load(tap)?;
    let rec = match kind {
        OracleKind::Awake => {
            let (v, d) = opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS)?;
            json!({ "opt_awake": v.to_string(), "decisions": d })
        }
        OracleKind::TrtLb => json!({ "trt_lb": opt_trt_lower(&tap).to_string() }),
        OracleKind::Grid => {
            let g = grid.unwrap_or_else(|| Rational::new(1, 2 * tap.p() as i64));
            let v = grid_opt(&tap, Objective::Awake, &g, GridLimits::default())?;
            json!({ "grid": g.to_string(), "grid_awake": v.to_string() })
        }
    };
    print_json(&rec)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { tap, scheduler, engine, dump_trace } => cmd_run(&tap, &scheduler, &engine, dump_trace.as_deref()),
        Cmd::Sweep { gen, dir, count, p, max_n, seed, schedulers, oracle, engine, output } => {
            let taps = match dir {
                Some(d) => corpus_dir(&d),
                None => corpus(gen, count, &p, max_n, seed),
            };
            taps.and_then(|t| cmd_sweep(t, &schedulers, oracle, &engine, output.as_deref())).map(|_| true)
        }
        Cmd::Gen { name, p, seed, n, ratio, arrivals, dep_prob, j, blocks, x, unparallelizable, a, m, output } => {
            cmd_gen(name, p, seed, n, ratio, arrivals, dep_prob, j, blocks, &x, unparallelizable, a, m)
                .and_then(|tap| write_out(output.as_deref(), &(tap.to_json() + "\n")))
                .map(|_| true)
        }
        Cmd::Duel { scheduler, adversary, p, r, engine, dump_trace } => {
            cmd_duel(&scheduler, adversary, p, r, &engine, dump_trace.as_deref()).map(|_| true)
        }
        Cmd::Oracle { tap, kind, grid } => cmd_oracle(&tap, kind, grid).map(|_| true),
        Cmd::Verify { only, seed, bal_scheduler, corpus, timings } => {
            let cfg = VerifyConfig { seed, only, bal_scheduler, corpus, ..VerifyConfig::default() };
            let mut times = Vec::new();
            let report = run_battery(&cfg, &mut times);
            let printed = write_out(None, &report.render());
            if timings {
                for (id, s) in times {
                    eprintln!("{id}: {s:.1}s");
                }
            }
            printed.map(|_| report.passed())
        }
        Cmd::Schedulers => {
            write_out(None, &(SCHEDULERS.join("\n") + "\n")).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
