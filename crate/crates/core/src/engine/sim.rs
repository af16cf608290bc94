//! Event-driven fluid simulator.
//!
//! Rates are piecewise constant between events. At every instant the engine
//! fires the due events in a fixed order (completions, arrivals, timers,
//! injections; ascending id within a kind), then asks the scheduler for a
//! full allocation. The next event is the earliest of: a running task
//! exhausting its remaining work, a pending arrival, a registered timer.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::trace::{Allocation, Annotation, Cancellation, DecisionRecord, Note, Slice, Trace};
use crate::error::{Error, Result};
use crate::model::{Decision, Tap, Task, TaskId};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub speed: Rational,
    pub budget: Rational,
    pub allow_cancel: bool,
    pub max_events: usize,
}

impl EngineConfig {
    /// Speed 1, budget `p`, no cancellation.
    pub fn new(p: usize) -> Self {
        EngineConfig {
            speed: Rational::one(),
            budget: Rational::from(p),
            allow_cancel: false,
            max_events: 1_000_000,
        }
    }

    pub fn with_budget_factor(mut self, p: usize, factor: usize) -> Self {
        self.budget = Rational::from(p * factor);
        self
    }

    pub fn with_speed(mut self, speed: Rational) -> Self {
        self.speed = speed;
        self
    }

    pub fn with_cancel(mut self, allow: bool) -> Self {
        self.allow_cancel = allow;
        self
    }

    pub fn with_max_events(mut self, n: usize) -> Self {
        self.max_events = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    /// Not yet arrived, or waiting on dependencies.
    Pending,
    /// Available and undecided.
    Waiting,
    Running { decision: Decision, started: Rational, remaining: Rational },
    Done(Rational),
}

#[derive(Debug, Clone)]
struct TaskRec {
    task: Task,
    phase: Phase,
}

/// Everything except the scheduler; schedulers reach it through [`Ctx`].
pub struct SimState {
    p: usize,
    cfg: EngineConfig,
    tasks: BTreeMap<TaskId, TaskRec>,
    now: Rational,
    arrivals: BTreeSet<(Rational, TaskId)>,
    injected_now: BTreeSet<TaskId>,
    timers: BTreeSet<(Rational, u64, u64)>,
    timer_seq: u64,
    alloc: Allocation,
    instant_done: bool,
    hide_pi: bool,
    trace: Trace,
}

/// Scheduler callbacks. Every callback may start or cancel tasks and
/// register timers through the context; `allocate` is called once per
/// instant after all due events have fired and returns the full allocation.
pub trait Scheduler {
    fn name(&self) -> String;

    /// Parallel-work-oblivious schedulers get a view that refuses `pi` reads.
    fn hides_parallel_work(&self) -> bool {
        false
    }

    fn on_arrival(&mut self, _ctx: &mut Ctx<'_>, _id: TaskId) -> Result<()> {
        Ok(())
    }

    fn on_completion(&mut self, _ctx: &mut Ctx<'_>, _id: TaskId) -> Result<()> {
        Ok(())
    }

    fn on_timer(&mut self, _ctx: &mut Ctx<'_>, _tag: u64) -> Result<()> {
        Ok(())
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation>;
}

impl<S: Scheduler + ?Sized> Scheduler for Box<S> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn hides_parallel_work(&self) -> bool {
        (**self).hides_parallel_work()
    }
    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        (**self).on_arrival(ctx, id)
    }
    fn on_completion(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        (**self).on_completion(ctx, id)
    }
    fn on_timer(&mut self, ctx: &mut Ctx<'_>, tag: u64) -> Result<()> {
        (**self).on_timer(ctx, tag)
    }
    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        (**self).allocate(ctx)
    }
}

/// A scheduler's view of the simulation plus its command channel.
pub struct Ctx<'a> {
    st: &'a mut SimState,
}

impl Ctx<'_> {
    pub fn now(&self) -> &Rational {
        &self.st.now
    }

    pub fn p(&self) -> usize {
        self.st.p
    }

    pub fn budget(&self) -> &Rational {
        &self.st.cfg.budget
    }

    pub fn speed(&self) -> &Rational {
        &self.st.cfg.speed
    }

    fn rec(&self, id: TaskId) -> Result<&TaskRec> {
        self.st
            .tasks
            .get(&id)
            .ok_or_else(|| Error::Contract(format!("unknown task {id}")))
    }

    pub fn sigma(&self, id: TaskId) -> &Rational {
        &self.st.tasks[&id].task.sigma
    }

    pub fn arrival(&self, id: TaskId) -> &Rational {
        &self.st.tasks[&id].task.arrival
    }

    /// Parallel work; refused for oblivious schedulers unless the task was
    /// started in parallel.
    pub fn pi(&self, id: TaskId) -> Result<Rational> {
        let rec = self.rec(id)?;
        if self.st.hide_pi && !matches!(rec.phase, Phase::Running { decision: Decision::Parallel, .. }) {
            return Err(Error::Obliviousness(format!("read of hidden parallel work of task {id}")));
        }
        Ok(rec.task.pi.clone())
    }

    /// Full task description; refused for oblivious schedulers.
    pub fn task(&self, id: TaskId) -> Result<Task> {
        if self.st.hide_pi {
            return Err(Error::Obliviousness(format!("full view of task {id}")));
        }
        Ok(self.rec(id)?.task.clone())
    }

    pub fn phase(&self, id: TaskId) -> &Phase {
        &self.st.tasks[&id].phase
    }

    pub fn remaining(&self, id: TaskId) -> Option<&Rational> {
        match &self.st.tasks.get(&id)?.phase {
            Phase::Running { remaining, .. } => Some(remaining),
            _ => None,
        }
    }

    pub fn decision(&self, id: TaskId) -> Option<Decision> {
        match &self.st.tasks.get(&id)?.phase {
            Phase::Running { decision, .. } => Some(*decision),
            _ => None,
        }
    }

    pub fn is_done(&self, id: TaskId) -> bool {
        matches!(self.st.tasks.get(&id).map(|r| &r.phase), Some(Phase::Done(_)))
    }

    /// Available, unfinished tasks in ascending id order.
    pub fn alive(&self) -> Vec<TaskId> {
        self.st
            .tasks
            .iter()
            .filter(|(_, r)| matches!(r.phase, Phase::Waiting | Phase::Running { .. }))
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn waiting(&self) -> Vec<TaskId> {
        self.st
            .tasks
            .iter()
            .filter(|(_, r)| r.phase == Phase::Waiting)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn running(&self) -> Vec<TaskId> {
        self.st
            .tasks
            .iter()
            .filter(|(_, r)| matches!(r.phase, Phase::Running { .. }))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Allocation in force since the previous instant.
    pub fn current_alloc(&self) -> &Allocation {
        &self.st.alloc
    }

    pub fn start(&mut self, id: TaskId, decision: Decision) -> Result<()> {
        let now = self.st.now.clone();
        let rec = self
            .st
            .tasks
            .get_mut(&id)
            .ok_or_else(|| Error::Contract(format!("start of unknown task {id}")))?;
        if rec.phase != Phase::Waiting {
            return Err(Error::Contract(format!("task {id} cannot start from {:?}", rec.phase)));
        }
        rec.phase = Phase::Running {
            decision,
            started: now.clone(),
            remaining: rec.task.work(decision).clone(),
        };
        self.st
            .trace
            .decisions
            .entry(id)
            .or_default()
            .push(DecisionRecord { decision, time: now });
        Ok(())
    }

    /// Cancels a running task, erasing its progress; it returns to the
    /// undecided state and may be restarted with either implementation.
    pub fn cancel(&mut self, id: TaskId) -> Result<()> {
        if !self.st.cfg.allow_cancel {
            return Err(Error::Contract(format!("cancellation of task {id} with cancelling disabled")));
        }
        let now = self.st.now.clone();
        let rec = self
            .st
            .tasks
            .get_mut(&id)
            .ok_or_else(|| Error::Contract(format!("cancel of unknown task {id}")))?;
        if !matches!(rec.phase, Phase::Running { .. }) {
            return Err(Error::Contract(format!("task {id} is not running")));
        }
        rec.phase = Phase::Waiting;
        self.st.trace.cancellations.push(Cancellation { id, time: now });
        Ok(())
    }

    pub fn set_timer(&mut self, at: Rational, tag: u64) -> Result<()> {
        if at < self.st.now {
            return Err(Error::Contract(format!("timer at {at} is in the past (now {})", self.st.now)));
        }
        let seq = self.st.timer_seq;
        self.st.timer_seq += 1;
        self.st.timers.insert((at, tag, seq));
        Ok(())
    }

    pub fn annotate(&mut self, note: Note) {
        let time = self.st.now.clone();
        self.st.trace.aux.push(Annotation { time, note });
    }
}

/// Steppable simulation; [`Simulation::run`] drives it to completion.
pub struct Simulation {
    st: SimState,
}

impl Simulation {
    pub fn new(tap: &Tap, cfg: EngineConfig, scheduler_name: String) -> Result<Self> {
        if cfg.speed < Rational::one() {
            return Err(Error::InvalidArgument(format!("speed {} < 1", cfg.speed)));
        }
        if cfg.budget < Rational::from(tap.p()) {
            return Err(Error::InvalidArgument(format!("budget {} < p", cfg.budget)));
        }
        let mut st = SimState {
            p: tap.p(),
            trace: Trace {
                scheduler: scheduler_name,
                p: tap.p(),
                speed: cfg.speed.clone(),
                budget: cfg.budget.clone(),
                allow_cancel: cfg.allow_cancel,
                slices: Vec::new(),
                decisions: BTreeMap::new(),
                available: BTreeMap::new(),
                completions: BTreeMap::new(),
                cancellations: Vec::new(),
                aux: Vec::new(),
                events: 0,
            },
            cfg,
            tasks: BTreeMap::new(),
            now: Rational::zero(),
            arrivals: BTreeSet::new(),
            injected_now: BTreeSet::new(),
            timers: BTreeSet::new(),
            timer_seq: 0,
            alloc: Allocation::new(),
            instant_done: false,
            hide_pi: false,
        };
        for t in tap.tasks() {
            if t.deps.is_empty() {
                st.arrivals.insert((t.arrival.clone(), t.id));
            }
            st.tasks.insert(t.id, TaskRec { task: t.clone(), phase: Phase::Pending });
        }
        Ok(Simulation { st })
    }

    pub fn now(&self) -> &Rational {
        &self.st.now
    }

    pub fn p(&self) -> usize {
        self.st.p
    }

    pub fn trace(&self) -> &Trace {
        &self.st.trace
    }

    pub fn into_trace(self) -> Trace {
        self.st.trace
    }

    pub fn alloc(&self) -> &Allocation {
        &self.st.alloc
    }

    pub fn phase(&self, id: TaskId) -> Option<&Phase> {
        self.st.tasks.get(&id).map(|r| &r.phase)
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.st.tasks.get(&id).map(|r| &r.task)
    }

    pub fn next_id(&self) -> TaskId {
        self.st.tasks.keys().next_back().map(|k| k + 1).unwrap_or(0)
    }

    /// The instance including every injected task.
    pub fn tap(&self) -> Tap {
        Tap::new(self.st.p, self.st.tasks.values().map(|r| r.task.clone()).collect())
            .expect("simulated tasks form a valid instance")
    }

    pub fn is_finished(&self) -> bool {
        self.st.tasks.values().all(|r| matches!(r.phase, Phase::Done(_)))
    }

    /// Adds a task arriving at or after the current instant.
    pub fn inject(&mut self, task: Task) -> Result<TaskId> {
        if task.arrival < self.st.now {
            return Err(Error::Contract(format!("injection into the past at {}", task.arrival)));
        }
        if self.st.tasks.contains_key(&task.id) {
            return Err(Error::Contract(format!("injected id {} already in use", task.id)));
        }
        let pr = Rational::from(self.st.p);
        if !task.sigma.is_positive() || task.pi < task.sigma || task.pi > &task.sigma * &pr {
            return Err(Error::InvalidInstance(format!("injected task {} is not normalized", task.id)));
        }
        for d in &task.deps {
            if !self.st.tasks.contains_key(d) {
                return Err(Error::InvalidInstance(format!("injected task depends on unknown {d}")));
            }
        }
        let id = task.id;
        let deps_done = task
            .deps
            .iter()
            .all(|d| matches!(self.st.tasks[d].phase, Phase::Done(_)));
        if deps_done {
            if task.arrival == self.st.now {
                self.st.injected_now.insert(id);
                self.st.instant_done = false;
            } else {
                self.st.arrivals.insert((task.arrival.clone(), id));
            }
        }
        self.st.tasks.insert(id, TaskRec { task, phase: Phase::Pending });
        Ok(id)
    }

    fn bump(&mut self) -> Result<()> {
        self.st.trace.events += 1;
        if self.st.trace.events > self.st.cfg.max_events {
            return Err(Error::Runaway(self.st.cfg.max_events));
        }
        Ok(())
    }

    fn make_available(&mut self, id: TaskId) {
        let now = self.st.now.clone();
        let rec = self.st.tasks.get_mut(&id).expect("known task");
        rec.phase = Phase::Waiting;
        self.st.trace.available.insert(id, now);
    }

    fn release_dependents(&mut self, done: TaskId) {
        let now = self.st.now.clone();
        let ready: Vec<(Rational, TaskId)> = self
            .st
            .tasks
            .values()
            .filter(|r| r.phase == Phase::Pending && r.task.deps.contains(&done))
            .filter(|r| {
                r.task
                    .deps
                    .iter()
                    .all(|d| matches!(self.st.tasks[d].phase, Phase::Done(_)))
            })
            .map(|r| (r.task.arrival.clone().max(now.clone()), r.task.id))
            .collect();
        self.st.arrivals.extend(ready);
    }

    /// Fires every event due at the current instant, then obtains and checks
    /// the scheduler's allocation. Idempotent once the instant is processed.
    pub fn process_instant<S: Scheduler + ?Sized>(&mut self, sched: &mut S) -> Result<()> {
        if self.st.instant_done {
            return Ok(());
        }
        self.st.hide_pi = sched.hides_parallel_work();
        loop {
            let mut fired = false;
            let finished: Vec<TaskId> = self
                .st
                .tasks
                .iter()
                .filter(|(_, r)| matches!(&r.phase, Phase::Running { remaining, .. } if remaining.is_zero()))
                .map(|(id, _)| *id)
                .collect();
            for id in finished {
                fired = true;
                let now = self.st.now.clone();
                self.st.tasks.get_mut(&id).unwrap().phase = Phase::Done(now.clone());
                self.st.trace.completions.insert(id, now);
                self.release_dependents(id);
                self.bump()?;
                sched.on_completion(&mut Ctx { st: &mut self.st }, id)?;
            }
            while let Some((t, id)) = self.st.arrivals.first().cloned() {
                if t != self.st.now {
                    break;
                }
                self.st.arrivals.pop_first();
                fired = true;
                self.make_available(id);
                self.bump()?;
                sched.on_arrival(&mut Ctx { st: &mut self.st }, id)?;
            }
            while let Some((t, tag, seq)) = self.st.timers.first().cloned() {
                if t != self.st.now {
                    break;
                }
                self.st.timers.remove(&(t, tag, seq));
                fired = true;
                self.bump()?;
                sched.on_timer(&mut Ctx { st: &mut self.st }, tag)?;
            }
            while let Some(id) = self.st.injected_now.pop_first() {
                fired = true;
                self.make_available(id);
                self.bump()?;
                sched.on_arrival(&mut Ctx { st: &mut self.st }, id)?;
            }
            if !fired {
                break;
            }
        }
        let alloc = sched.allocate(&mut Ctx { st: &mut self.st })?;
        self.st.alloc = self.check_alloc(alloc)?;
        self.st.instant_done = true;
        Ok(())
    }

    fn check_alloc(&self, alloc: Allocation) -> Result<Allocation> {
        let infeasible = |reason: String| Error::Feasibility { time: self.st.now.to_string(), reason };
        let mut total = Rational::zero();
        let mut kept = Allocation::new();
        for (id, rate) in alloc {
            if rate.is_negative() {
                return Err(infeasible(format!("negative rate {rate} for task {id}")));
            }
            if rate.is_zero() {
                continue;
            }
            match self.st.tasks.get(&id).map(|r| &r.phase) {
                Some(Phase::Running { decision, .. }) => {
                    if *decision == Decision::Serial && rate > Rational::one() {
                        return Err(infeasible(format!("serial cap: task {id} given rate {rate}")));
                    }
                }
                _ => return Err(infeasible(format!("task {id} is not running"))),
            }
            total += &rate;
            kept.insert(id, rate);
        }
        if total > self.st.cfg.budget {
            return Err(infeasible(format!("budget: total rate {total} > {}", self.st.cfg.budget)));
        }
        Ok(kept)
    }

    /// Earliest future event under the current allocation.
    pub fn next_event_time(&self) -> Option<Rational> {
        let mut best: Option<Rational> = None;
        let mut consider = |t: Rational| {
            if best.as_ref().is_none_or(|b| t < *b) {
                best = Some(t);
            }
        };
        for (id, rate) in &self.st.alloc {
            if let Phase::Running { remaining, .. } = &self.st.tasks[id].phase {
                consider(&self.st.now + remaining / (rate * &self.st.cfg.speed));
            }
        }
        if let Some((t, _)) = self.st.arrivals.first() {
            consider(t.clone());
        }
        if let Some((t, _, _)) = self.st.timers.first() {
            consider(t.clone());
        }
        best
    }

    /// Moves time forward to `t`, which must not pass the next event.
    pub fn advance_to(&mut self, t: Rational) -> Result<()> {
        if t < self.st.now {
            return Err(Error::Contract(format!("cannot rewind from {} to {t}", self.st.now)));
        }
        if t == self.st.now {
            return Ok(());
        }
        if let Some(next) = self.next_event_time() {
            if t > next {
                return Err(Error::Contract(format!("advance to {t} skips the event at {next}")));
            }
        }
        let dt = &t - &self.st.now;
        for (id, rate) in &self.st.alloc {
            if let Phase::Running { remaining, .. } = &mut self.st.tasks.get_mut(id).unwrap().phase {
                *remaining -= rate * &self.st.cfg.speed * &dt;
                debug_assert!(!remaining.is_negative());
            }
        }
        self.st.trace.slices.push(Slice {
            start: self.st.now.clone(),
            end: t.clone(),
            alloc: self.st.alloc.clone(),
        });
        self.st.now = t;
        self.st.instant_done = false;
        Ok(())
    }

    /// Processes instants and advances until time `t` has been processed.
    pub fn run_until<S: Scheduler + ?Sized>(&mut self, sched: &mut S, t: &Rational) -> Result<()> {
        loop {
            self.process_instant(sched)?;
            if self.st.now >= *t {
                return Ok(());
            }
            let next = match self.next_event_time() {
                Some(n) => n.min(t.clone()),
                None => t.clone(),
            };
            self.advance_to(next)?;
        }
    }

    /// One instant plus the advance to the next event. Returns `false` once
    /// the run is over.
    pub fn step<S: Scheduler + ?Sized>(&mut self, sched: &mut S) -> Result<bool> {
        self.process_instant(sched)?;
        if self.is_finished() && self.st.injected_now.is_empty() {
            return Ok(false);
        }
        match self.next_event_time() {
            Some(t) => {
                self.advance_to(t)?;
                Ok(true)
            }
            None => Err(Error::Contract(format!(
                "stalled at t={}: unfinished tasks but no pending event",
                self.st.now
            ))),
        }
    }

    pub fn run<S: Scheduler + ?Sized>(mut self, sched: &mut S) -> Result<Trace> {
        while self.step(sched)? {}
        Ok(self.st.trace)
    }
}

/// Runs `sched` on `tap` to completion.
pub fn simulate<S: Scheduler + ?Sized>(tap: &Tap, sched: &mut S, cfg: EngineConfig) -> Result<Trace> {
    Simulation::new(tap, cfg, sched.name())?.run(sched)
}
