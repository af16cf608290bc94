use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{Allocation, Ctx, EngineConfig, Note, Phase, PoolKind, Scheduler, Simulation, TaskMode};
use crate::error::{Error, Result};
use crate::model::{task_type, Decision, Tap, Task, TaskId};
use crate::rational::Rational;

use super::{equi_alloc, BSched, Wakeup};

/// Non-cancelling scheduler on `4p` processors.
///
/// It runs the one-per-type cancelling scheduler on a copy of the input
/// with works scaled by `inner_scale` and `p` processors, and mirrors that
/// run onto the first `p` processors. A task is vested once it gets
/// parallel rate here; the inner run can later cancel or finish it in ways
/// this scheduler cannot follow, which puts the task in ballistic mode
/// (vested) or semi-ballistic mode (never started). Ballistic tasks of a
/// class take over the class's mirrored parallel rate plus `p / 2^j`
/// reserved processors; semi-ballistic tasks share `p` processors serially.
pub struct CSched {
    inner_scale: Rational,
    inner: Option<Simulation>,
    b: BSched,
    modes: BTreeMap<TaskId, TaskMode>,
    class: BTreeMap<TaskId, i32>,
    ballistic: BTreeMap<i32, BTreeSet<(Rational, TaskId)>>,
    semi: Vec<TaskId>,
    seen_decisions: BTreeMap<TaskId, usize>,
    seen_completions: BTreeSet<TaskId>,
    steals: Vec<(TaskId, TaskId, Rational)>,
    reserve: Rational,
    reserve_rule: ReserveRule,
    last: Rational,
    wake: Wakeup,
}

/// Reserve processors a class `2^j` in emergency gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReserveRule {
    /// `p / 2^j`.
    #[default]
    Share,
    /// `2^j`, enough to finish the parallel work within `sigma`.
    Parallelism,
}

impl Default for CSched {
    fn default() -> Self {
        Self::new()
    }
}

impl CSched {
    pub fn new() -> Self {
        Self::with_inner_scale(Rational::from(3))
    }

    pub fn with_reserve_rule(mut self, rule: ReserveRule) -> Self {
        self.reserve_rule = rule;
        self
    }

    pub fn with_inner_scale(inner_scale: Rational) -> Self {
        CSched {
            inner_scale,
            inner: None,
            b: BSched::new(),
            modes: BTreeMap::new(),
            class: BTreeMap::new(),
            ballistic: BTreeMap::new(),
            semi: Vec::new(),
            seen_decisions: BTreeMap::new(),
            seen_completions: BTreeSet::new(),
            steals: Vec::new(),
            reserve: Rational::zero(),
            reserve_rule: ReserveRule::Share,
            last: Rational::zero(),
            wake: Wakeup::default(),
        }
    }

    /// Trace of the inner simulation so far.
    pub fn inner_trace(&self) -> Option<&crate::engine::Trace> {
        self.inner.as_ref().map(|s| s.trace())
    }

    fn mode(&self, id: TaskId) -> TaskMode {
        self.modes.get(&id).copied().unwrap_or(TaskMode::Normal)
    }

    fn set_mode(&mut self, ctx: &mut Ctx<'_>, id: TaskId, mode: TaskMode) {
        self.modes.insert(id, mode);
        ctx.annotate(Note::Mode { task: id, mode });
    }

    /// Brings the inner run up to the current instant and books the rate
    /// redirected since the previous instant.
    fn sync(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let p = ctx.p();
        if self.inner.is_none() {
            if *ctx.budget() < Rational::from(4 * p) {
                return Err(Error::Contract(format!("csched needs budget 4p, got {}", ctx.budget())));
            }
            let cfg = EngineConfig::new(p).with_cancel(true).with_max_events(usize::MAX);
            self.inner = Some(Simulation::new(&Tap::empty(p), cfg, "bsched".into())?);
            self.b = BSched::with_pool(Rational::from(p) / Rational::from(2))
                .with_work_scale(self.inner_scale.clone());
        }
        let now = ctx.now().clone();
        if now > self.last {
            let dt = &now - &self.last;
            for (thief, victim, rate) in std::mem::take(&mut self.steals) {
                ctx.annotate(Note::Stolen { thief, victim, amount: rate * &dt });
            }
            self.last = now.clone();
        }
        let inner = self.inner.as_mut().expect("inner");
        inner.run_until(&mut self.b, &now)
    }

    fn enter_ballistic(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        let j = self.class[&id];
        let sigma = ctx.sigma(id).clone();
        let set = self.ballistic.entry(j).or_default();
        if set.iter().any(|(s, _)| *s == sigma) {
            return Err(Error::Invariant(format!(
                "two ballistic tasks of serial work {sigma} in class {j} (entering: {id})"
            )));
        }
        let first = set.is_empty();
        set.insert((sigma, id));
        self.set_mode(ctx, id, TaskMode::Ballistic);
        if first {
            ctx.annotate(Note::Emergency { class: j, active: true });
        }
        Ok(())
    }

    /// Reacts to inner serial starts and inner completions since the last call.
    fn follow_inner(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let inner = self.inner.as_ref().expect("inner");
        let mut serial_starts = Vec::new();
        for (id, recs) in &inner.trace().decisions {
            let seen = self.seen_decisions.entry(*id).or_insert(0);
            for r in &recs[*seen..] {
                if r.decision == Decision::Serial {
                    serial_starts.push(*id);
                }
            }
            *seen = recs.len();
        }
        let mut finished = Vec::new();
        for id in inner.trace().completions.keys() {
            if self.seen_completions.insert(*id) {
                let d = inner.trace().decisions[id].last().expect("started").decision;
                finished.push((*id, d));
            }
        }
        for id in serial_starts {
            if ctx.is_done(id) {
                continue;
            }
            match self.mode(id) {
                TaskMode::Vested => self.enter_ballistic(ctx, id)?,
                TaskMode::Normal => {
                    ctx.start(id, Decision::Serial)?;
                    ctx.annotate(Note::Pool { task: id, pool: PoolKind::Serial });
                }
                _ => {}
            }
        }
        for (id, d) in finished {
            if ctx.is_done(id) {
                continue;
            }
            match (d, self.mode(id)) {
                (Decision::Parallel, TaskMode::Vested) => {
                    ctx.annotate(Note::Hard { task: id });
                    self.enter_ballistic(ctx, id)?;
                }
                (Decision::Parallel, TaskMode::Normal) => {
                    ctx.annotate(Note::Hard { task: id });
                    ctx.start(id, Decision::Serial)?;
                    self.set_mode(ctx, id, TaskMode::SemiBallistic);
                    self.semi.push(id);
                }
                (Decision::Serial, TaskMode::Normal) => {
                    return Err(Error::Invariant(format!(
                        "inner serial run of task {id} finished before the mirrored one"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn thief(&self, class: i32) -> Option<TaskId> {
        self.ballistic.get(&class).and_then(|s| s.first()).map(|(_, id)| *id)
    }
}

impl Scheduler for CSched {
    fn name(&self) -> String {
        match self.reserve_rule {
            ReserveRule::Share => "csched".into(),
            ReserveRule::Parallelism => "csched-par-reserve".into(),
        }
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        self.sync(ctx)?;
        let task = ctx.task(id)?;
        let ty = task_type(&task)?;
        self.class.insert(id, ty.j);
        let scaled = Task::new(
            id,
            &task.sigma * &self.inner_scale,
            &task.pi * &self.inner_scale,
            ctx.now().clone(),
        );
        self.inner.as_mut().expect("inner").inject(scaled)?;
        Ok(())
    }

    fn on_completion(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        self.sync(ctx)?;
        let mode = self.mode(id);
        if mode == TaskMode::Ballistic {
            let j = self.class[&id];
            let set = self.ballistic.get_mut(&j).expect("class");
            set.retain(|(_, x)| *x != id);
            if set.is_empty() {
                self.ballistic.remove(&j);
                ctx.annotate(Note::Emergency { class: j, active: false });
            }
        }
        self.semi.retain(|x| *x != id);
        if mode != TaskMode::Normal {
            self.set_mode(ctx, id, TaskMode::Done);
        }
        Ok(())
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        self.sync(ctx)?;
        self.inner.as_mut().expect("inner").process_instant(&mut self.b)?;
        self.follow_inner(ctx)?;

        let mut alloc = Allocation::new();
        let add = |alloc: &mut Allocation, id: TaskId, r: &Rational| {
            *alloc.entry(id).or_default() += r;
        };
        let inner = self.inner.as_ref().expect("inner");
        let mirrored: Vec<(TaskId, Rational, Decision)> = inner
            .alloc()
            .iter()
            .filter_map(|(id, r)| match inner.phase(*id) {
                Some(Phase::Running { decision, .. }) => Some((*id, r.clone(), *decision)),
                _ => None,
            })
            .collect();
        for (id, r, d) in mirrored {
            match d {
                Decision::Parallel => {
                    let j = self.class[&id];
                    if let Some(thief) = self.thief(j) {
                        add(&mut alloc, thief, &r);
                        if thief != id && !ctx.is_done(id) {
                            self.steals.push((thief, id, r));
                        }
                        continue;
                    }
                    if ctx.is_done(id) {
                        continue;
                    }
                    match self.mode(id) {
                        TaskMode::Normal if *ctx.phase(id) == Phase::Waiting => {
                            ctx.start(id, Decision::Parallel)?;
                            self.set_mode(ctx, id, TaskMode::Vested);
                            add(&mut alloc, id, &r);
                        }
                        TaskMode::Vested => add(&mut alloc, id, &r),
                        _ => {}
                    }
                }
                Decision::Serial => {
                    if self.mode(id) == TaskMode::Normal && ctx.decision(id) == Some(Decision::Serial) {
                        add(&mut alloc, id, &r);
                    }
                }
            }
        }

        let p = Rational::from(ctx.p());
        for (id, r) in equi_alloc(&self.semi, &p, true) {
            add(&mut alloc, id, &r);
        }
        let mut reserve = Rational::zero();
        let classes: Vec<i32> = self.ballistic.keys().copied().collect();
        for j in classes {
            let share = match self.reserve_rule {
                ReserveRule::Share => &p / Rational::pow2(j),
                ReserveRule::Parallelism => Rational::pow2(j),
            };
            let thief = self.thief(j).expect("nonempty class");
            add(&mut alloc, thief, &share);
            reserve += share;
        }
        if reserve != self.reserve {
            self.reserve = reserve.clone();
            ctx.annotate(Note::Reserve { total: reserve });
        }

        let next = self.inner.as_ref().expect("inner").next_event_time();
        self.wake.arm(ctx, next)?;
        Ok(alloc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::rational::q;

    fn cfg(p: usize) -> EngineConfig {
        EngineConfig::new(p).with_budget_factor(p, 4)
    }

    #[test]
    fn quiet_instance_has_no_exceptional_modes() {
        let tasks = vec![
            Task::new(0, q(1, 1), q(4, 1), q(0, 1)),
            Task::new(1, q(2, 1), q(2, 1), q(1, 1)),
        ];
        let tap = Tap::new(4, tasks).unwrap();
        let tr = simulate(&tap, &mut CSched::new(), cfg(4)).unwrap();
        assert!(tr.cancellations.is_empty());
        assert!(!tr.notes().any(|(_, n)| matches!(
            n,
            Note::Mode { mode: TaskMode::Ballistic | TaskMode::SemiBallistic, .. }
        )));
    }

    #[test]
    fn refuses_small_budget() {
        let tap = Tap::new(4, vec![Task::new(0, q(1, 1), q(4, 1), q(0, 1))]).unwrap();
        assert!(simulate(&tap, &mut CSched::new(), EngineConfig::new(4)).is_err());
    }
}
