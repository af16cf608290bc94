//! Tasks with arrival dependencies: availability views, the `sqrt p`
//! competitive scheduler and the witness schedule for level instances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{simulate, Allocation, Ctx, EngineConfig, Scheduler, Trace};
use crate::error::{Error, Result};
use crate::metrics::metrics_from_trace;
use crate::model::{dependency_depths, Decision, Tap, Task, TaskId};
use crate::rational::Rational;
use crate::sched_awake::{most_work_first_alloc, MergeTimer};

/// Partition of the tasks at one instant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtapView {
    pub completed: BTreeSet<TaskId>,
    pub available: BTreeSet<TaskId>,
    pub pending: BTreeSet<TaskId>,
}

impl DtapView {
    /// View at time `t` given completion times. A task is available once it
    /// has arrived and all its dependencies are complete.
    pub fn at(tap: &Tap, completions: &BTreeMap<TaskId, Rational>, t: &Rational) -> Self {
        let done = |id: &TaskId| completions.get(id).is_some_and(|f| f <= t);
        let mut view = DtapView::default();
        for task in tap.tasks() {
            if done(&task.id) {
                view.completed.insert(task.id);
            } else if task.arrival <= *t && task.deps.iter().all(done) {
                view.available.insert(task.id);
            } else {
                view.pending.insert(task.id);
            }
        }
        view
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurtleClass {
    FairlyParallel,
    NotVeryParallel,
}

/// Fairly parallel iff `pi/p < sigma/sqrt(p)`, i.e. `pi^2 < sigma^2 p`.
pub fn turtle_classify(task: &Task, p: usize) -> TurtleClass {
    if &task.pi * &task.pi < &task.sigma * &task.sigma * Rational::from(p) {
        TurtleClass::FairlyParallel
    } else {
        TurtleClass::NotVeryParallel
    }
}

/// Decides at availability: fairly-parallel tasks take the parallel
/// implementation, all others the serial one. Parallel tasks run one at a
/// time on all `p` processors, each to completion, lowest id first; while
/// none is present, serial tasks share the processors most-work-first.
#[derive(Debug, Clone, Default)]
pub struct Turtle {
    fixed: Option<BTreeMap<TaskId, Decision>>,
    current: Option<TaskId>,
    timer: MergeTimer,
}

impl Turtle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Same execution rule with decisions given up front.
    pub fn with_decisions(decisions: BTreeMap<TaskId, Decision>) -> Self {
        Turtle { fixed: Some(decisions), ..Self::default() }
    }
}

impl Scheduler for Turtle {
    fn name(&self) -> String {
        match self.fixed {
            None => "turtle".into(),
            Some(_) => "level-witness".into(),
        }
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        let d = match &self.fixed {
            Some(map) => *map
                .get(&id)
                .ok_or_else(|| Error::Contract(format!("no decision given for task {id}")))?,
            None => match turtle_classify(&ctx.task(id)?, ctx.p()) {
                TurtleClass::FairlyParallel => Decision::Parallel,
                TurtleClass::NotVeryParallel => Decision::Serial,
            },
        };
        ctx.start(id, d)
    }

    fn on_completion(&mut self, _ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        if self.current == Some(id) {
            self.current = None;
        }
        Ok(())
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        let p = Rational::from(ctx.p());
        let running = ctx.running();
        if self.current.is_none() {
            self.current = running.iter().copied().find(|id| ctx.decision(*id) == Some(Decision::Parallel));
        }
        if let Some(id) = self.current {
            return Ok([(id, p)].into_iter().collect());
        }
        let serial: Vec<(TaskId, Rational)> = running
            .into_iter()
            .map(|id| (id, ctx.remaining(id).expect("running").clone()))
            .collect();
        let plan = most_work_first_alloc(&serial, &[], &p)?;
        self.timer.arm(ctx, plan.merge_in)?;
        Ok(plan.alloc)
    }
}

/// Level structure of a generated level instance: tasks per level (in id
/// order) and the spawner of each level but the last.
fn level_structure(tap: &Tap) -> Result<(Vec<Vec<TaskId>>, Vec<TaskId>)> {
    let bad = |why: &str| Error::Contract(format!("not a level instance: {why}"));
    let l = (1..=tap.p()).find(|l| l * l == tap.p()).ok_or_else(|| bad("p is not a square"))?;
    if tap.len() != l * l {
        return Err(bad("wrong task count"));
    }
    let root = Rational::from(l);
    let depth = dependency_depths(tap);
    let mut levels = vec![Vec::new(); l];
    for t in tap.tasks() {
        if t.sigma != Rational::one() || t.pi != root || !t.arrival.is_zero() {
            return Err(bad("task works or arrival differ"));
        }
        let d = depth[&t.id];
        if d >= l {
            return Err(bad("too deep"));
        }
        levels[d].push(t.id);
    }
    let mut spawners = Vec::new();
    for k in 1..l {
        let deps: BTreeSet<&Vec<TaskId>> = levels[k].iter().map(|id| &tap.task(*id).expect("id").deps).collect();
        match deps.into_iter().collect::<Vec<_>>().as_slice() {
            [d] if d.len() == 1 && levels[k - 1].contains(&d[0]) => spawners.push(d[0]),
            _ => return Err(bad("level without a single shared spawner")),
        }
    }
    if levels.iter().any(|lv| lv.len() != l) {
        return Err(bad("uneven levels"));
    }
    Ok((levels, spawners))
}

/// Witness schedule for a level instance: every spawner (and one task of
/// the last level) runs in parallel with priority, everything else
/// serially. Returns the trace and its awake time.
pub fn dtap_opt_upper_levels(tap: &Tap) -> Result<(Trace, Rational)> {
    let (levels, spawners) = level_structure(tap)?;
    let mut decisions: BTreeMap<TaskId, Decision> = tap.ids().map(|id| (id, Decision::Serial)).collect();
    for id in spawners.iter().chain(levels.last().and_then(|l| l.first())) {
        decisions.insert(*id, Decision::Parallel);
    }
    let trace = simulate(tap, &mut Turtle::with_decisions(decisions), EngineConfig::new(tap.p()))?;
    let awake = metrics_from_trace(&trace, tap)?.awake;
    Ok((trace, awake))
}

/// Lower bound on any schedule's awake time for a DTAP: total minimum work
/// over `p`, and the longest dependency chain of per-task minimum times.
pub fn dtap_awake_lower(tap: &Tap) -> Rational {
    let p = Rational::from(tap.p());
    let fastest = |t: &Task| t.sigma.clone().min(&t.pi / &p);
    let work: Rational = tap.tasks().iter().map(|t| t.sigma.clone().min(t.pi.clone())).sum::<Rational>() / &p;
    let mut finish: BTreeMap<TaskId, Rational> = BTreeMap::new();
    let first = tap.tasks().iter().map(|t| t.arrival.clone()).min().unwrap_or_default();
    let mut order: Vec<&Task> = tap.tasks().iter().collect();
    let depth = dependency_depths(tap);
    order.sort_by_key(|t| depth[&t.id]);
    let mut chain = Rational::zero();
    for t in order {
        let ready = t.deps.iter().map(|d| finish[d].clone()).fold(t.arrival.clone(), Rational::max);
        let f = ready + fastest(t);
        chain = chain.max(&f - &first);
        finish.insert(t.id, f);
    }
    work.max(chain)
}

/// Squared form of the fairly-parallel work inequality:
/// `(sum of fairly-parallel pi)^2 <= (sum of all sigma)^2 p`.
pub fn fairly_parallel_work_holds(tap: &Tap) -> bool {
    let p = tap.p();
    let fp: Rational = tap
        .tasks()
        .iter()
        .filter(|t| turtle_classify(t, p) == TurtleClass::FairlyParallel)
        .map(|t| t.pi.clone())
        .sum();
    let all = tap.total_sigma();
    &fp * &fp <= &all * &all * Rational::from(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::gen_dtap_levels;
    use crate::rational::q;

    #[test]
    fn classification() {
        let t = |s: i64, p: i64| Task::new(0, q(s, 1), q(p, 1), q(0, 1));
        assert_eq!(turtle_classify(&t(10, 50), 100), TurtleClass::FairlyParallel);
        assert_eq!(turtle_classify(&t(10, 200), 100), TurtleClass::NotVeryParallel);
        assert_eq!(turtle_classify(&t(10, 100), 100), TurtleClass::NotVeryParallel);
    }

    #[test]
    fn chain_runs_back_to_back() {
        let tasks = vec![
            Task::new(0, q(1, 1), q(4, 1), q(0, 1)),
            Task::new(1, q(1, 1), q(4, 1), q(0, 1)).with_deps(vec![0]),
            Task::new(2, q(1, 1), q(4, 1), q(0, 1)).with_deps(vec![1]),
        ];
        let tap = Tap::new(4, tasks).unwrap();
        let tr = simulate(&tap, &mut Turtle::new(), EngineConfig::new(4)).unwrap();
        assert_eq!(metrics_from_trace(&tr, &tap).unwrap().awake, q(3, 1));
    }

    #[test]
    fn fairly_parallel_task_preempts_serial_work() {
        let tasks = vec![
            Task::new(0, q(4, 1), q(16, 1), q(0, 1)),
            Task::new(1, q(4, 1), q(4, 1), q(1, 1)),
        ];
        let tap = Tap::new(16, tasks).unwrap();
        let tr = simulate(&tap, &mut Turtle::new(), EngineConfig::new(16)).unwrap();
        let s = tr.slices.iter().find(|s| s.start == q(1, 1)).unwrap();
        assert_eq!(s.alloc, [(1, q(16, 1))].into_iter().collect());
        assert_eq!(tr.completions[&1], q(5, 4));
    }

    #[test]
    fn level_witness_values() {
        for p in [4usize, 16, 64] {
            let tap = gen_dtap_levels(p, 7).unwrap();
            let (_, awake) = dtap_opt_upper_levels(&tap).unwrap();
            let l = (p as f64).sqrt() as i64;
            let expected = q(l * l, p as i64) + Rational::from(((l * l - l) as f64 / p as f64).ceil() as i64);
            assert_eq!(awake, expected);
            assert!(awake <= q(2, 1));
        }
        let plain = Tap::new(4, vec![Task::new(0, q(1, 1), q(2, 1), q(0, 1))]).unwrap();
        assert!(dtap_opt_upper_levels(&plain).is_err());
    }

    #[test]
    fn view_partitions() {
        let tasks = vec![
            Task::new(0, q(1, 1), q(1, 1), q(0, 1)),
            Task::new(1, q(1, 1), q(1, 1), q(0, 1)).with_deps(vec![0]),
            Task::new(2, q(1, 1), q(1, 1), q(5, 1)),
        ];
        let tap = Tap::new(2, tasks).unwrap();
        let done = [(0, q(1, 1))].into_iter().collect();
        let v = DtapView::at(&tap, &done, &q(1, 2));
        assert_eq!(v.available, [0].into_iter().collect());
        assert_eq!(v.pending, [1, 2].into_iter().collect());
        let v = DtapView::at(&tap, &done, &q(1, 1));
        assert_eq!(v.completed, [0].into_iter().collect());
        assert_eq!(v.available, [1].into_iter().collect());
    }
}
