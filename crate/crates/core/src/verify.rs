//! The acceptance battery. Every check is a pure function of the seed, so
//! the rendered report is byte-identical across runs; wall-clock times are
//! kept out of it.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    duel, expensive_ids, gen_ballistic_crafted, gen_dtap_levels, gen_geometric, gen_mrt_cheap_expensive,
    gen_random, geometric_prefix, AdvGolden, AdvNonpreemptive, ArrivalPattern, GenParams, RatioDist,
};
use crate::dtap::{dtap_opt_upper_levels, fairly_parallel_work_holds, Turtle};
use crate::engine::{simulate, validate_trace, EngineConfig, Note, TaskMode, Trace};
use crate::error::{Error, Result};
use crate::metrics::{metrics_from_trace, never_idle, unsaturated_time};
use crate::model::{fnv1a, task_type, Decision, Tap, Task, TaskId, TaskType};
use crate::oracle::{grid_opt, opt_awake_exhaustive, opt_trt_lower, GridLimits, Objective, DEFAULT_MAX_EVALS};
use crate::rational::{eps, phi_hat, q, Rational};
use crate::registry::{default_config, make_scheduler, SchedOptions};
use crate::sched_awake::{is_balanced, BalanceState, MwfFixed, MwfUniform};
use crate::sched_mrt::{Equi, RigidParallel};

/// Ratio bounds and slacks.
pub const BAL_BOUND: i64 = 3;
pub const UNK_BOUND: i64 = 6;
pub const GOLDEN_SLACK: (i64, i64) = (1, 100);
pub const WITNESS_TRT_BOUND: i64 = 4;
pub const EQUI_GROWTH: i64 = 2;
pub const RIGID_GROWTH: i64 = 5;
pub const EQUI_FLAT: i64 = 2;
pub const LEVEL_UPPER: i64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Instances in the oracle cross-check.
    pub oracle_instances: usize,
    /// Instances in the random awake and response-time corpora.
    pub corpus: usize,
    pub dtap_instances: usize,
    /// Scheduler checked against the balancer's bound.
    pub bal_scheduler: String,
    /// Criteria to run (ids like `A2` or group names); empty runs all.
    pub only: Vec<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 20240601,
            oracle_instances: 120,
            corpus: 1000,
            dtap_instances: 200,
            bal_scheduler: "bal".into(),
            only: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    /// First failing instance, as TAP JSON.
    pub witness: Option<String>,
    /// Validated traces and a digest of their serialization.
    pub traces: usize,
    pub violations: usize,
    pub digest: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub results: Vec<CriterionResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    /// Deterministic text rendering, one line per criterion plus witnesses.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&format!(
                "{} {} {}: {} [traces={} violations={} digest={:016x}]\n",
                if r.passed { "PASS" } else { "FAIL" },
                r.id,
                r.title,
                r.detail,
                r.traces,
                r.violations,
                r.digest
            ));
            if let Some(w) = &r.witness {
                out.push_str(&format!("  witness {}: {}\n", r.id, w));
            }
        }
        out
    }
}

/// Outcome of one instance inside a criterion.
#[derive(Debug, Clone, Default)]
struct Case {
    ok: bool,
    note: String,
    witness: Option<String>,
    traces: usize,
    violations: Vec<String>,
    digest: u64,
}

impl Case {
    fn new() -> Self {
        Case { ok: true, ..Case::default() }
    }

    /// Validates `trace` and folds it into the digest.
    fn audit(&mut self, trace: &Trace, tap: &Tap, cfg: &EngineConfig) {
        self.traces += 1;
        for v in validate_trace(trace, tap, cfg) {
            self.violations.push(format!("{} on {:016x}: {v}", trace.scheduler, tap.instance_hash()));
        }
        self.digest = mix(self.digest, fnv1a(trace.to_json().as_bytes()));
    }

    fn fail(&mut self, tap: &Tap, why: String) {
        if self.ok {
            self.ok = false;
            self.note = why;
            self.witness = Some(tap.to_json());
        }
    }

    fn error(tap: &Tap, e: Error) -> Case {
        let mut c = Case::new();
        c.fail(tap, format!("error: {e}"));
        c
    }
}

fn mix(h: u64, x: u64) -> u64 {
    fnv1a(&[h.to_le_bytes(), x.to_le_bytes()].concat())
}

fn summarize(id: &str, title: &str, cases: Vec<Case>, detail: String) -> CriterionResult {
    let mut passed = true;
    let mut witness = None;
    let mut failure = None;
    let mut traces = 0;
    let mut violations = Vec::new();
    let mut digest = 0u64;
    for c in cases {
        traces += c.traces;
        digest = mix(digest, c.digest);
        violations.extend(c.violations);
        if !c.ok && passed {
            passed = false;
            failure = Some(c.note);
            witness = c.witness;
        }
    }
    let detail = match failure {
        Some(f) => format!("{detail}; first failure: {f}"),
        None => detail,
    };
    CriterionResult {
        id: id.into(),
        title: title.into(),
        passed,
        detail,
        witness,
        traces,
        violations: violations.len(),
        digest,
    }
}

fn seed_for(base: u64, salt: &str, i: usize) -> u64 {
    mix(mix(base, fnv1a(salt.as_bytes())), i as u64)
}

fn run(tap: &Tap, name: &str, case: &mut Case) -> Result<Trace> {
    let cfg = default_config(name, tap.p())?;
    let mut s = make_scheduler(name, &SchedOptions::default())?;
    let trace = simulate(tap, &mut s, cfg.clone())?;
    case.audit(&trace, tap, &cfg);
    Ok(trace)
}

fn ratio_text(r: &Rational) -> String {
    format!("{:.4}", r.to_f64())
}

// ---------------------------------------------------------------- A1

/// Grid-aligned random instance: integer works up to 8, integer arrivals
/// in `0..=3`.
pub fn grid_instance(seed: u64) -> Tap {
    use rand::Rng;
    let mut rng = crate::adversary::rng(seed);
    let p = rng.gen_range(2..=4usize);
    let n = rng.gen_range(1..=3usize);
    let tasks = (0..n)
        .map(|id| {
            let sigma = rng.gen_range(1..=8i64);
            let pi = rng.gen_range(sigma..=8.min(sigma * p as i64));
            Task::new(id, q(sigma, 1), q(pi, 1), q(rng.gen_range(0..=3i64), 1))
        })
        .collect();
    Tap::new(p, tasks).expect("valid grid instance")
}

fn a1(cfg: &VerifyConfig) -> CriterionResult {
    let cases: Vec<Case> = (0..cfg.oracle_instances)
        .into_par_iter()
        .map(|i| {
            let tap = grid_instance(seed_for(cfg.seed, "A1", i));
            let grid = Rational::new(1, 2 * tap.p() as i64);
            let mut case = Case::new();
            let (exact, best) = match opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS) {
                Ok(v) => v,
                Err(e) => return Case::error(&tap, e),
            };
            let gridv = match grid_opt(&tap, Objective::Awake, &grid, GridLimits::default()) {
                Ok(v) => v,
                Err(e) => return Case::error(&tap, e),
            };
            let ecfg = EngineConfig::new(tap.p());
            match simulate(&tap, &mut MwfFixed::new(best), ecfg.clone()) {
                Ok(tr) => case.audit(&tr, &tap, &ecfg),
                Err(e) => return Case::error(&tap, e),
            }
            if exact != gridv {
                case.fail(&tap, format!("exhaustive {exact} != grid {gridv}"));
            }
            case
        })
        .collect();
    let n = cases.len();
    summarize("A1", "oracle cross-validation", cases, format!("{n} grid-aligned instances, exact equality"))
}

// ------------------------------------------------------------ A2, A3

/// Random awake-time corpus: `n <= 10`, `p` in {4, 8, 16}, mixed patterns.
pub fn awake_corpus(seed: u64, count: usize) -> Vec<Tap> {
    let patterns = [ArrivalPattern::Batch, ArrivalPattern::PoissonLike, ArrivalPattern::Bursty];
    let ratios = [RatioDist::Uniform, RatioDist::Extremes];
    (0..count)
        .map(|i| {
            let params = GenParams {
                work_range: (q(1, 2), q(4, 1)),
                grain: q(1, 4),
                ratio: ratios[(i / 3) % 2],
                arrivals: patterns[i % 3],
                mean_gap: q(1, 2),
                ..GenParams::new([4, 8, 16][(i / 6) % 3], 1 + i % 10, seed_for(seed, "awake", i))
            };
            gen_random(&params).expect("valid params")
        })
        .collect()
}

/// First slice start at which the held work is not balanced.
pub fn first_unbalanced(trace: &Trace, tap: &Tap) -> Option<Rational> {
    let decisions = trace.final_decisions();
    let mut progress: BTreeMap<TaskId, Rational> = BTreeMap::new();
    for s in &trace.slices {
        let mut state = BalanceState::new(tap.p());
        for t in tap.tasks() {
            let started = trace.decisions.get(&t.id).and_then(|d| d.first()).is_some_and(|d| d.time <= s.start);
            let done = trace.completions.get(&t.id).is_some_and(|f| *f <= s.start);
            if !started || done {
                continue;
            }
            let d = decisions[&t.id];
            let rem = t.work(d) - progress.get(&t.id).cloned().unwrap_or_default();
            if d == Decision::Serial {
                state.serial_remaining.push(rem.clone());
            }
            state.total_remaining += rem;
        }
        if !is_balanced(&state) {
            return Some(s.start.clone());
        }
        let dt = &s.end - &s.start;
        for (id, r) in &s.alloc {
            *progress.entry(*id).or_default() += r * &trace.speed * &dt;
        }
    }
    None
}

fn awake_ratio_case(tap: &Tap, name: &str, bound: i64, extra: impl Fn(&Trace, &Rational, &mut Case)) -> Case {
    let mut case = Case::new();
    let trace = match run(tap, name, &mut case) {
        Ok(t) => t,
        Err(e) => return Case::error(tap, e),
    };
    let (opt, _) = match opt_awake_exhaustive(tap, DEFAULT_MAX_EVALS) {
        Ok(v) => v,
        Err(e) => return Case::error(tap, e),
    };
    let awake = match metrics_from_trace(&trace, tap) {
        Ok(m) => m.awake,
        Err(e) => return Case::error(tap, e),
    };
    if awake > &opt * Rational::from(bound) {
        case.fail(tap, format!("{name} awake {awake} > {bound} * opt {opt}"));
    }
    extra(&trace, &awake, &mut case);
    case
}

fn a2(cfg: &VerifyConfig, corpus: &[Tap]) -> CriterionResult {
    let name = cfg.bal_scheduler.as_str();
    let cases: Vec<Case> = corpus
        .par_iter()
        .map(|tap| {
            awake_ratio_case(tap, name, BAL_BOUND, |trace, _, case| {
                if let Some(t) = first_unbalanced(trace, tap) {
                    case.fail(tap, format!("{name} unbalanced at t={t}"));
                }
            })
        })
        .collect();
    let n = cases.len();
    summarize("A2", "balancer bound", cases, format!("{name} on {n} instances: awake <= {BAL_BOUND} opt, balanced at every event"))
}

fn a3(corpus: &[Tap]) -> CriterionResult {
    let idle_free = std::sync::atomic::AtomicUsize::new(0);
    let cases: Vec<Case> = corpus
        .par_iter()
        .map(|tap| {
            awake_ratio_case(tap, "unk", UNK_BOUND, |trace, awake, case| {
                if never_idle(trace, tap) {
                    idle_free.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let u = unsaturated_time(trace, tap);
                    if u * Rational::from(2) > *awake {
                        case.fail(tap, format!("unsaturated time above half of awake {awake}"));
                    }
                }
            })
        })
        .collect();
    let n = cases.len();
    let k = idle_free.into_inner();
    summarize(
        "A3",
        "oblivious bound",
        cases,
        format!("unk on {n} instances: awake <= {UNK_BOUND} opt; {k} never-idle runs unsaturated <= awake/2"),
    )
}

// ---------------------------------------------------------------- A4

fn a4() -> CriterionResult {
    let p = 100usize;
    let bound = phi_hat() - Rational::new(1, p as i64) - Rational::new(GOLDEN_SLACK.0, GOLDEN_SLACK.1);
    let names = ["bal", "unk", "mwf-all-serial", "mwf-all-parallel"];
    let mut details = Vec::new();
    let cases: Vec<Case> = names
        .iter()
        .map(|name| {
            let mut case = Case::new();
            let mut adv = AdvGolden::new(p);
            let cfg = EngineConfig::new(p);
            let mut s = make_scheduler(name, &SchedOptions::default()).expect("known");
            let out = match duel(&mut adv, &mut s, cfg.clone()) {
                Ok(o) => o,
                Err(e) => return (Case::error(&crate::adversary::golden_seed(p).expect("tap"), e), String::new()),
            };
            case.audit(&out.trace, &out.tap, &cfg);
            let ratio = metrics_from_trace(&out.trace, &out.tap)
                .and_then(|m| opt_awake_exhaustive(&out.tap, DEFAULT_MAX_EVALS).map(|(o, _)| &m.awake / &o));
            let text = match &ratio {
                Ok(r) => format!("{name}={}", ratio_text(r)),
                Err(e) => format!("{name}=error({e})"),
            };
            match ratio {
                Ok(r) if r >= bound => {}
                Ok(r) => case.fail(&out.tap, format!("{name} ratio {} < {}", ratio_text(&r), ratio_text(&bound))),
                Err(e) => case.fail(&out.tap, format!("{name}: {e}")),
            }
            (case, text)
        })
        .map(|(c, t)| {
            details.push(t);
            c
        })
        .collect();
    summarize(
        "A4",
        "golden-ratio lower bound",
        cases,
        format!("p={p}, need >= {}: {}", ratio_text(&bound), details.join(" ")),
    )
}

// ---------------------------------------------------------------- A5

fn a5() -> CriterionResult {
    let p = 16usize;
    let pr = Rational::from(p);
    let (_, k) = pr.floor_pow2();
    let mut cases = Vec::new();
    let mut values = Vec::new();
    for j in 1..=k as usize {
        let tap = geometric_prefix(p, j).expect("prefix");
        let mut case = Case::new();
        let slack = eps() * Rational::from(tap.len());
        let bound = (Rational::one() + Rational::new(2, p as i64)) * Rational::pow2(j as i32 - 1) + slack;
        match opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS) {
            Ok((v, best)) => {
                let cfg = EngineConfig::new(p);
                if let Ok(tr) = simulate(&tap, &mut MwfFixed::new(best), cfg.clone()) {
                    case.audit(&tr, &tap, &cfg);
                }
                values.push(format!("T{j}={}", ratio_text(&v)));
                if v > bound {
                    case.fail(&tap, format!("prefix {j}: opt {v} > {bound}"));
                }
            }
            Err(e) => case = Case::error(&tap, e),
        }
        cases.push(case);
    }
    let tap = gen_geometric(p).expect("geometric");
    let mut case = Case::new();
    let cfg = EngineConfig::new(p);
    let lower = Rational::pow2(k) * (Rational::from(2) - Rational::from(k) / &pr)
        - Rational::one()
        - eps() * Rational::from(tap.len());
    match simulate(&tap, &mut MwfUniform::all_parallel(), cfg.clone()) {
        Ok(tr) => {
            case.audit(&tr, &tap, &cfg);
            let awake = metrics_from_trace(&tr, &tap).expect("complete").awake;
            values.push(format!("all-parallel={}", ratio_text(&awake)));
            if awake < lower {
                case.fail(&tap, format!("all-parallel awake {awake} < {lower}"));
            }
        }
        Err(e) => case = Case::error(&tap, e),
    }
    cases.push(case);
    summarize("A5", "geometric instance arithmetic", cases, format!("p={p}: {}", values.join(" ")))
}

// ------------------------------------------------------- A6, A7, A8

/// Random power-of-two corpus for the response-time schedulers.
pub fn mrt_corpus(seed: u64, count: usize) -> Vec<Tap> {
    let patterns = [ArrivalPattern::Batch, ArrivalPattern::PoissonLike, ArrivalPattern::Bursty];
    (0..count)
        .map(|i| {
            let params = GenParams {
                ratio: RatioDist::PowersOfTwo,
                arrivals: patterns[i % 3],
                work_range: (q(1, 2), q(8, 1)),
                mean_gap: q(1, 1),
                ..GenParams::new([4, 8, 16][(i / 3) % 3], 1 + i % 12, seed_for(seed, "mrt", i))
            };
            gen_random(&params).expect("valid params")
        })
        .collect()
}

/// Instances built to trigger ballistic and semi-ballistic modes.
pub fn crafted_corpus() -> Vec<Tap> {
    let mut out = Vec::new();
    for p in [16usize, 32, 64] {
        for j in 1..=2 {
            for a in 0..=2 {
                for m in 4..=5 {
                    out.push(gen_ballistic_crafted(p, j, a, m).expect("valid crafted parameters"));
                }
            }
        }
    }
    out
}

/// Start of the parallel run a cancellation at `at` ends.
fn last_parallel_start(trace: &Trace, id: TaskId, at: &Rational) -> Option<Rational> {
    trace.decisions.get(&id)?.iter().rfind(|d| d.time < *at && d.decision == Decision::Parallel).map(|d| d.time.clone())
}

fn a6(corpus: &[Tap]) -> CriterionResult {
    let cancels = std::sync::atomic::AtomicUsize::new(0);
    let cases: Vec<Case> = corpus
        .par_iter()
        .map(|tap| {
            let mut case = Case::new();
            let trace = match run(tap, "canc", &mut case) {
                Ok(t) => t,
                Err(e) => return Case::error(tap, e),
            };
            if trace.completions.len() != tap.len() {
                case.fail(tap, "some task never completed".into());
            }
            cancels.fetch_add(trace.cancellations.len(), std::sync::atomic::Ordering::Relaxed);
            for c in &trace.cancellations {
                let sigma = &tap.task(c.id).expect("id").sigma;
                match last_parallel_start(&trace, c.id, &c.time) {
                    Some(s) if &c.time - &s == *sigma => {}
                    other => case.fail(tap, format!("task {} cancelled at {} after pool entry {other:?}", c.id, c.time)),
                }
            }
            case
        })
        .collect();
    let n = cases.len();
    let k = cancels.into_inner();
    summarize(
        "A6",
        "cancelling scheduler properties",
        cases,
        format!("canc on {n} instances: all complete, relaxed invariant silent, {k} cancellations all at pool age sigma"),
    )
}

/// Largest number of tasks of one type running their parallel
/// implementation at once, and the parallel completions that came later
/// than `sigma` after arrival.
pub fn one_per_type_stats(trace: &Trace, tap: &Tap) -> Result<(usize, Vec<(TaskId, Rational)>)> {
    let mut runs: Vec<(TaskId, TaskType, Rational, Rational)> = Vec::new();
    for t in tap.tasks() {
        let ty = task_type(t)?;
        let ends: Vec<Rational> = trace.cancellations.iter().filter(|c| c.id == t.id).map(|c| c.time.clone()).collect();
        let mut k = 0;
        for d in trace.decisions.get(&t.id).map(Vec::as_slice).unwrap_or(&[]) {
            let end = match ends.get(k) {
                Some(e) => {
                    k += 1;
                    e.clone()
                }
                None => trace.completions[&t.id].clone(),
            };
            if d.decision == Decision::Parallel {
                runs.push((t.id, ty, d.time.clone(), end));
            }
        }
    }
    let mut worst = 0;
    for (_, ty, start, _) in &runs {
        let live = runs.iter().filter(|(_, t2, s, e)| t2 == ty && s <= start && start < e).count();
        worst = worst.max(live);
    }
    let mut late = Vec::new();
    for t in tap.tasks() {
        let last = trace.decisions[&t.id].last().expect("started");
        let f = &trace.completions[&t.id];
        if last.decision == Decision::Parallel && *f > &t.arrival + &t.sigma {
            late.push((t.id, f - &t.arrival - &t.sigma));
        }
    }
    Ok((worst, late))
}

fn a7(corpus: &[Tap]) -> CriterionResult {
    let late_total = std::sync::atomic::AtomicUsize::new(0);
    let cases: Vec<Case> = corpus
        .par_iter()
        .map(|tap| {
            let mut case = Case::new();
            let trace = match run(tap, "bsched", &mut case) {
                Ok(t) => t,
                Err(e) => return Case::error(tap, e),
            };
            match one_per_type_stats(&trace, tap) {
                Ok((worst, late)) => {
                    if worst > 1 {
                        case.fail(tap, format!("{worst} parallel tasks of one type at once"));
                    }
                    late_total.fetch_add(late.len(), std::sync::atomic::Ordering::Relaxed);
                    if let Some((id, by)) = late.first() {
                        case.fail(tap, format!("task {id} completed in parallel {by} after arrival + sigma"));
                    }
                }
                Err(e) => case.fail(tap, e.to_string()),
            }
            case
        })
        .collect();
    let n = cases.len();
    let failing = cases.iter().filter(|c| !c.ok).count();
    let late = late_total.into_inner();
    summarize(
        "A7",
        "one-per-type scheduler properties",
        cases,
        format!("bsched on {n} instances: {failing} instances with a violation, {late} late parallel completions"),
    )
}

/// Per-run statistics of the non-cancelling scheduler's exceptional modes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BallisticStats {
    pub ballistic: usize,
    pub semi: usize,
    pub hard: usize,
    /// Largest ballistic episode length over `2 sigma`.
    pub max_over_2sigma: Rational,
    pub problems: Vec<String>,
}

/// Checks the non-cancelling scheduler's mode annotations.
pub fn ballistic_stats(trace: &Trace, tap: &Tap) -> BallisticStats {
    let mut st = BallisticStats::default();
    let p = Rational::from(tap.p());
    let mut entered: BTreeMap<TaskId, Rational> = BTreeMap::new();
    let mut active: BTreeMap<i32, BTreeSet<(Rational, TaskId)>> = BTreeMap::new();
    let mut stolen: BTreeMap<TaskId, Rational> = BTreeMap::new();
    let mut hard = Vec::new();
    if !trace.cancellations.is_empty() {
        st.problems.push(format!("{} cancellations", trace.cancellations.len()));
    }
    for (time, note) in trace.notes() {
        match note {
            Note::Mode { task, mode: TaskMode::Ballistic } => {
                st.ballistic += 1;
                let t = tap.task(*task).expect("id");
                let class = task_type(t).map(|ty| ty.j).unwrap_or(-1);
                let set = active.entry(class).or_default();
                if set.iter().any(|(s, _)| *s == t.sigma) {
                    st.problems.push(format!("two ballistic tasks of serial work {} in class {class}", t.sigma));
                }
                set.insert((t.sigma.clone(), *task));
                entered.insert(*task, time.clone());
            }
            Note::Mode { mode: TaskMode::SemiBallistic, .. } => st.semi += 1,
            Note::Mode { task, mode: TaskMode::Done } => {
                if let Some(t0) = entered.remove(task) {
                    let t = tap.task(*task).expect("id");
                    let ratio = (time - &t0) / (&t.sigma * Rational::from(2));
                    if ratio > Rational::one() {
                        st.problems.push(format!("task {task} ballistic for {} > 2 sigma", time - &t0));
                    }
                    st.max_over_2sigma = st.max_over_2sigma.clone().max(ratio);
                    for set in active.values_mut() {
                        set.retain(|(_, id)| id != task);
                    }
                }
            }
            Note::Stolen { victim, amount, .. } => *stolen.entry(*victim).or_default() += amount,
            Note::Hard { task } => hard.push(*task),
            Note::Reserve { total } if *total > &p * Rational::from(2) => {
                st.problems.push(format!("reserve {total} above 2p"));
            }
            _ => {}
        }
    }
    st.hard = hard.len();
    for id in hard {
        let pi = &tap.task(id).expect("id").pi;
        let s = stolen.get(&id).cloned().unwrap_or_default();
        if s < pi * Rational::from(2) {
            st.problems.push(format!("hard task {id} lost only {s} < 2 pi"));
        }
    }
    st
}

fn csched_runs(name: &str, all: &[(&Tap, bool)]) -> Vec<(Case, BallisticStats, bool)> {
    all.par_iter()
        .map(|(tap, is_crafted)| {
            let mut case = Case::new();
            let trace = match run(tap, name, &mut case) {
                Ok(t) => t,
                Err(e) => return (Case::error(tap, e), BallisticStats::default(), *is_crafted),
            };
            let st = ballistic_stats(&trace, tap);
            if let Some(p) = st.problems.first() {
                case.fail(tap, p.clone());
            }
            (case, st, *is_crafted)
        })
        .collect()
}

fn worst_episode(results: &[(Case, BallisticStats, bool)]) -> Rational {
    results.iter().map(|(_, s, _)| s.max_over_2sigma.clone()).max().unwrap_or_default()
}

fn a8(corpus: &[Tap], crafted: &[Tap]) -> CriterionResult {
    let all: Vec<(&Tap, bool)> = corpus.iter().map(|t| (t, false)).chain(crafted.iter().map(|t| (t, true))).collect();
    let results = csched_runs("csched", &all);
    // informational: the same corpus with a 2^j reserve per class
    let variant = csched_runs("csched-par-reserve", &all);
    let variant_ok = variant.iter().filter(|(c, _, _)| c.ok).count();
    let triggering = results.iter().filter(|(_, s, c)| *c && s.ballistic > 0 && s.semi > 0).count();
    let ballistic: usize = results.iter().map(|(_, s, _)| s.ballistic).sum();
    let semi: usize = results.iter().map(|(_, s, _)| s.semi).sum();
    let hard: usize = results.iter().map(|(_, s, _)| s.hard).sum();
    let worst = worst_episode(&results);
    let mut cases: Vec<Case> = results.into_iter().map(|(c, _, _)| c).collect();
    if triggering < 20 {
        let mut c = Case::new();
        c.fail(&Tap::empty(16), format!("only {triggering} crafted instances reach both exceptional modes"));
        cases.push(c);
    }
    summarize(
        "A8",
        "non-cancelling scheduler properties",
        cases,
        format!(
            "csched on {} instances: no cancellations; {ballistic} ballistic, {semi} semi-ballistic, {hard} hard; \
             longest episode {} of 2 sigma; {triggering} crafted instances reach both modes; \
             with a 2^j class reserve: longest episode {} of 2 sigma, {variant_ok}/{} instances clean",
            all.len(),
            ratio_text(&worst),
            ratio_text(&worst_episode(&variant)),
            variant.len()
        ),
    )
}

// ---------------------------------------------------------------- A9

/// Witness for the cheap/expensive instance: cheap tasks parallel (one at
/// a time), expensive ones serial.
pub fn cheap_expensive_witness(tap: &Tap) -> MwfFixed {
    let exp: BTreeSet<TaskId> = expensive_ids(tap).into_iter().collect();
    MwfFixed::new(
        tap.ids()
            .map(|id| (id, if exp.contains(&id) { Decision::Serial } else { Decision::Parallel }))
            .collect(),
    )
}

fn a9(cfg: &VerifyConfig) -> CriterionResult {
    let ps = [16usize, 256, 4096];
    let mut cases = Vec::new();
    let mut equi = Vec::new();
    let mut texts = Vec::new();
    for p in ps {
        let tap = gen_mrt_cheap_expensive(p, seed_for(cfg.seed, "A9", p)).expect("fourth power");
        let lb = opt_trt_lower(&tap);
        let ecfg = EngineConfig::new(p);
        let mut case = Case::new();
        match simulate(&tap, &mut cheap_expensive_witness(&tap), ecfg.clone()) {
            Ok(tr) => {
                case.audit(&tr, &tap, &ecfg);
                let r = metrics_from_trace(&tr, &tap).expect("complete").trt / &lb;
                texts.push(format!("p={p} witness={}", ratio_text(&r)));
                if r > Rational::from(WITNESS_TRT_BOUND) {
                    case.fail(&tap, format!("witness ratio {} > {WITNESS_TRT_BOUND}", ratio_text(&r)));
                }
            }
            Err(e) => case = Case::error(&tap, e),
        }
        match simulate(&tap, &mut Equi, ecfg.clone()) {
            Ok(tr) => {
                case.audit(&tr, &tap, &ecfg);
                let r = metrics_from_trace(&tr, &tap).expect("complete").trt / &lb;
                texts.push(format!("equi={}", ratio_text(&r)));
                equi.push((tap.clone(), r));
            }
            Err(e) => case = Case::error(&tap, e),
        }
        cases.push(case);
    }
    for w in equi.windows(2) {
        let mut case = Case::new();
        if w[1].1 < &w[0].1 * Rational::from(EQUI_GROWTH) {
            case.fail(
                &w[1].0,
                format!(
                    "equi ratio grows only {} from p={} to p={}",
                    ratio_text(&(&w[1].1 / &w[0].1)),
                    w[0].0.p(),
                    w[1].0.p()
                ),
            );
        }
        cases.push(case);
    }
    summarize(
        "A9",
        "response-time obliviousness separation",
        cases,
        format!("need witness <= {WITNESS_TRT_BOUND} and equi growth >= {EQUI_GROWTH} per step: {}", texts.join(" ")),
    )
}

// --------------------------------------------------------------- A10

/// Single task `(1, p)` at time 0.
pub fn nonpreemptive_probe(p: usize) -> Tap {
    Tap::new(p, vec![Task::new(0, Rational::one(), Rational::from(p), Rational::zero())]).expect("probe")
}

fn a10() -> CriterionResult {
    let p = 16usize;
    let mut cases = Vec::new();
    let mut texts = Vec::new();
    let mut ratios: BTreeMap<&str, Vec<Rational>> = BTreeMap::new();
    for name in ["rigid-parallel", "equi"] {
        for r in [10usize, 100] {
            let mut case = Case::new();
            let mut adv = AdvNonpreemptive::new(r, nonpreemptive_probe(p)).expect("probe has work");
            let cfg = EngineConfig::new(p);
            let out = if name == "equi" {
                duel(&mut adv, &mut Equi, cfg.clone())
            } else {
                duel(&mut adv, &mut RigidParallel::default(), cfg.clone())
            };
            match out {
                Ok(out) => {
                    case.audit(&out.trace, &out.tap, &cfg);
                    if out.inconclusive {
                        case.fail(&out.tap, format!("{name} R={r}: adversary never triggered"));
                    }
                    let ratio = metrics_from_trace(&out.trace, &out.tap).expect("complete").trt / opt_trt_lower(&out.tap);
                    texts.push(format!("{name}(R={r})={}", ratio_text(&ratio)));
                    ratios.entry(name).or_default().push(ratio);
                }
                Err(e) => case = Case::error(&nonpreemptive_probe(p), e),
            }
            cases.push(case);
        }
    }
    let probe = nonpreemptive_probe(p);
    let mut case = Case::new();
    if let Some(v) = ratios.get("rigid-parallel").filter(|v| v.len() == 2) {
        if v[1] < &v[0] * Rational::from(RIGID_GROWTH) {
            case.fail(&probe, format!("rigid ratio grows only {}", ratio_text(&(&v[1] / &v[0]))));
        }
    }
    if let Some(v) = ratios.get("equi").filter(|v| v.len() == 2) {
        let (lo, hi) = (v[0].clone().min(v[1].clone()), v[0].clone().max(v[1].clone()));
        if hi > lo * Rational::from(EQUI_FLAT) {
            case.fail(&probe, "equi ratio moves by more than 2x".into());
        }
    }
    cases.push(case);
    summarize(
        "A10",
        "non-preemption separation",
        cases,
        format!("p={p}, need rigid growth >= {RIGID_GROWTH}, equi within {EQUI_FLAT}x: {}", texts.join(" ")),
    )
}

// --------------------------------------------------------------- A11

/// Random DTAPs for the fairly-parallel work inequality.
pub fn dtap_corpus(seed: u64, count: usize) -> Vec<Tap> {
    (0..count)
        .map(|i| {
            let params = GenParams {
                ratio: if i % 2 == 0 { RatioDist::Uniform } else { RatioDist::Extremes },
                arrivals: ArrivalPattern::PoissonLike,
                dep_prob: 0.5,
                ..GenParams::new([4, 9, 16, 64][i % 4], 1 + i % 12, seed_for(seed, "dtap", i))
            };
            gen_random(&params).expect("valid params")
        })
        .collect()
}

fn a11(cfg: &VerifyConfig) -> CriterionResult {
    let mut cases = Vec::new();
    let mut texts = Vec::new();
    for p in [16usize, 64, 256] {
        let tap = gen_dtap_levels(p, seed_for(cfg.seed, "A11", p)).expect("square");
        let mut case = Case::new();
        let ecfg = EngineConfig::new(p);
        let upper = match dtap_opt_upper_levels(&tap) {
            Ok((tr, v)) => {
                case.audit(&tr, &tap, &ecfg);
                v
            }
            Err(e) => {
                cases.push(Case::error(&tap, e));
                continue;
            }
        };
        if upper > Rational::from(LEVEL_UPPER) {
            case.fail(&tap, format!("level witness awake {upper} > {LEVEL_UPPER}"));
        }
        match simulate(&tap, &mut Turtle::new(), ecfg.clone()) {
            Ok(tr) => {
                case.audit(&tr, &tap, &ecfg);
                let r = metrics_from_trace(&tr, &tap).expect("complete").awake / &upper;
                let r2 = &r * &r;
                let pr = Rational::from(p);
                texts.push(format!("p={p} upper={upper} turtle/upper={}", ratio_text(&r)));
                // r in [sqrt(p)/8, 3 sqrt(p)], compared squared
                if &r2 * Rational::from(64) < pr || r2 > pr * Rational::from(9) {
                    case.fail(&tap, format!("turtle ratio {} outside [sqrt p / 8, 3 sqrt p]", ratio_text(&r)));
                }
            }
            Err(e) => case = Case::error(&tap, e),
        }
        cases.push(case);
    }
    let corpus = dtap_corpus(cfg.seed, cfg.dtap_instances);
    let random: Vec<Case> = corpus
        .par_iter()
        .map(|tap| {
            let mut case = Case::new();
            if let Err(e) = run(tap, "turtle", &mut case) {
                return Case::error(tap, e);
            }
            if !fairly_parallel_work_holds(tap) {
                case.fail(tap, "fairly-parallel work inequality fails".into());
            }
            case
        })
        .collect();
    let n = random.len();
    cases.extend(random);
    summarize(
        "A11",
        "dependency scheduler bounds",
        cases,
        format!("{}; fairly-parallel work inequality on {n} random DTAPs", texts.join(" ")),
    )
}

// --------------------------------------------------------------- A12

fn a12(results: &[CriterionResult]) -> CriterionResult {
    let traces: usize = results.iter().map(|r| r.traces).sum();
    let violations: usize = results.iter().map(|r| r.violations).sum();
    let digest = results.iter().fold(0, |h, r| mix(h, r.digest));
    CriterionResult {
        id: "A12".into(),
        title: "trace validation".into(),
        passed: violations == 0,
        detail: format!("{traces} traces validated, {violations} violations"),
        witness: None,
        traces,
        violations,
        digest,
    }
}

/// Criterion ids selected by `only` (ids or group names).
pub fn selected(only: &[String]) -> BTreeSet<String> {
    let all: Vec<String> = (1..=12).map(|i| format!("A{i}")).collect();
    if only.is_empty() {
        return all.into_iter().collect();
    }
    let mut out = BTreeSet::new();
    for o in only {
        let ids: &[&str] = match o.to_ascii_lowercase().as_str() {
            "oracle" => &["A1"],
            "awake" => &["A2", "A3", "A4", "A5"],
            "mrt" => &["A6", "A7", "A8", "A9", "A10"],
            "dtap" => &["A11"],
            _ => &[],
        };
        if ids.is_empty() {
            out.insert(o.to_ascii_uppercase());
        } else {
            out.extend(ids.iter().map(|s| s.to_string()));
        }
    }
    out
}

/// Runs the selected criteria. Timings go to `timings`, not the report.
pub fn run_battery(cfg: &VerifyConfig, timings: &mut Vec<(String, f64)>) -> Report {
    let want = selected(&cfg.only);
    let mut results = Vec::new();
    let needs_awake = want.contains("A2") || want.contains("A3");
    let awake = if needs_awake { awake_corpus(cfg.seed, cfg.corpus) } else { Vec::new() };
    let needs_mrt = ["A6", "A7", "A8"].iter().any(|a| want.contains(*a));
    let mrt = if needs_mrt { mrt_corpus(cfg.seed, cfg.corpus) } else { Vec::new() };
    let mut time = |id: &str, f: &mut dyn FnMut() -> CriterionResult| {
        if want.contains(id) {
            let t0 = Instant::now();
            let r = f();
            timings.push((id.to_string(), t0.elapsed().as_secs_f64()));
            results.push(r);
        }
    };
    time("A1", &mut || a1(cfg));
    time("A2", &mut || a2(cfg, &awake));
    time("A3", &mut || a3(&awake));
    time("A4", &mut a4);
    time("A5", &mut a5);
    time("A6", &mut || a6(&mrt));
    time("A7", &mut || a7(&mrt));
    time("A8", &mut || a8(&mrt, &crafted_corpus()));
    time("A9", &mut || a9(cfg));
    time("A10", &mut a10);
    time("A11", &mut || a11(cfg));
    if want.contains("A12") {
        let r = a12(&results);
        results.push(r);
    }
    Report { seed: cfg.seed, results }
}
