use std::collections::BTreeMap;

use crate::engine::{Allocation, Ctx, Note, PoolKind, Scheduler};
use crate::error::{Error, Result};
use crate::model::{task_type, Decision, Task, TaskId, TaskType};
use crate::rational::Rational;

use super::pool::RelaxedPool;
use super::Wakeup;

#[derive(Debug, Clone)]
struct Fake {
    remaining: Rational,
}

/// One-parallel-task-per-type variant of the cancelling scheduler.
///
/// It simulates the cancelling scheduler's parallel pool on the same
/// arrivals and hands the whole rate of each type to a single task of that
/// type (the oldest one). Every simulated cancellation moves one task of
/// that type to the serial pool: the newest waiting one, else the running
/// one, else a fake serial task of the type's serial work.
#[derive(Debug, Clone, Default)]
pub struct BSched {
    pool_procs: Option<Rational>,
    work_scale: Option<Rational>,
    pool: Option<RelaxedPool>,
    types: BTreeMap<TaskId, TaskType>,
    par: BTreeMap<TaskType, Vec<TaskId>>,
    running: BTreeMap<TaskType, TaskId>,
    serial: Vec<TaskId>,
    fakes: Vec<Fake>,
    next_fake: u64,
    fake_rate: Rational,
    last: Rational,
    wake: Wakeup,
}

impl BSched {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pools of `procs` processors each instead of `p`.
    pub fn with_pool(procs: Rational) -> Self {
        BSched { pool_procs: Some(procs), ..Self::default() }
    }

    /// Input works are power-of-two works times `scale`; types are read
    /// from the unscaled works.
    pub fn with_work_scale(mut self, scale: Rational) -> Self {
        self.work_scale = Some(scale);
        self
    }

    fn scale(&self) -> Rational {
        self.work_scale.clone().unwrap_or_else(Rational::one)
    }

    fn sync(&mut self, ctx: &Ctx<'_>) -> Result<()> {
        if self.pool.is_none() {
            let procs = self.pool_procs.clone().unwrap_or_else(|| Rational::from(ctx.p()));
            if *ctx.budget() < &procs * Rational::from(2) {
                return Err(Error::Contract(format!(
                    "bsched needs budget {}, got {}",
                    &procs * Rational::from(2),
                    ctx.budget()
                )));
            }
            self.pool_procs = Some(procs.clone());
            self.pool = Some(RelaxedPool::new(procs, ctx.speed().clone()));
        }
        let now = ctx.now();
        self.pool.as_mut().expect("pool").advance(now)?;
        if *now > self.last {
            let done = &self.fake_rate * ctx.speed() * (now - &self.last);
            for f in &mut self.fakes {
                f.remaining -= &done;
            }
            self.last = now.clone();
        }
        Ok(())
    }

    fn to_serial(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        ctx.start(id, Decision::Serial)?;
        ctx.annotate(Note::Pool { task: id, pool: PoolKind::Serial });
        self.serial.push(id);
        Ok(())
    }

    /// Moves one task of type `ty` out of the parallel pool.
    fn cancel_one(&mut self, ctx: &mut Ctx<'_>, ty: TaskType) -> Result<()> {
        let running = self.running.get(&ty).copied();
        let list = self.par.entry(ty).or_default();
        if let Some(pos) = list.iter().rposition(|id| Some(*id) != running) {
            let id = list.remove(pos);
            return self.to_serial(ctx, id);
        }
        if let Some(id) = running {
            list.retain(|x| *x != id);
            self.running.remove(&ty);
            ctx.cancel(id)?;
            return self.to_serial(ctx, id);
        }
        let fake = self.next_fake;
        self.next_fake += 1;
        self.fakes.push(Fake { remaining: Rational::pow2(ty.i) * self.scale() });
        ctx.annotate(Note::Fake { ty, fake });
        Ok(())
    }
}

impl Scheduler for BSched {
    fn name(&self) -> String {
        "bsched".into()
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        self.sync(ctx)?;
        let task = ctx.task(id)?;
        let c = self.scale();
        let ty = task_type(&Task::new(id, &task.sigma / &c, &task.pi / &c, task.arrival.clone()))?;
        self.pool.as_mut().expect("pool").add(&task, ctx.now());
        self.types.insert(id, ty);
        self.par.entry(ty).or_default().push(id);
        ctx.annotate(Note::Pool { task: id, pool: PoolKind::Parallel });
        Ok(())
    }

    fn on_completion(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        self.sync(ctx)?;
        let ty = self.types[&id];
        if self.running.get(&ty) == Some(&id) {
            self.running.remove(&ty);
        }
        if let Some(list) = self.par.get_mut(&ty) {
            list.retain(|x| *x != id);
        }
        self.serial.retain(|x| *x != id);
        Ok(())
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        self.sync(ctx)?;
        let now = ctx.now().clone();
        let pool = self.pool.as_mut().expect("pool");
        for id in pool.finished() {
            pool.remove(id);
        }
        pool.check_relaxed()?;
        let expired = pool.expired(&now);
        for id in &expired {
            pool.remove(*id);
        }
        self.fakes.retain(|f| f.remaining.is_positive());
        for id in expired {
            let ty = self.types[&id];
            self.cancel_one(ctx, ty)?;
        }

        let pool = self.pool.as_ref().expect("pool");
        let mut per_type: BTreeMap<TaskType, Rational> = BTreeMap::new();
        if let Some(x) = pool.share() {
            for id in pool.entries.keys() {
                *per_type.entry(self.types[id]).or_default() += &x;
            }
        }
        let mut alloc = Allocation::new();
        for (ty, rate) in per_type {
            let id = match self.running.get(&ty) {
                Some(id) => *id,
                None => match self.par.get(&ty).and_then(|l| l.first()) {
                    Some(&id) => {
                        ctx.start(id, Decision::Parallel)?;
                        self.running.insert(ty, id);
                        id
                    }
                    None => continue,
                },
            };
            alloc.insert(id, rate);
        }

        let procs = self.pool_procs.clone().expect("pool size");
        let k = self.serial.len() + self.fakes.len();
        self.fake_rate = Rational::zero();
        if k > 0 {
            let share = (&procs / Rational::from(k)).min(Rational::one());
            for id in &self.serial {
                alloc.insert(*id, share.clone());
            }
            self.fake_rate = share;
        }

        let mut next = self.pool.as_ref().expect("pool").next_event();
        if self.fake_rate.is_positive() {
            let rate = &self.fake_rate * ctx.speed();
            for f in &self.fakes {
                let t = &now + &f.remaining / &rate;
                next = Some(next.map_or(t.clone(), |n| n.min(t)));
            }
        }
        self.wake.arm(ctx, next)?;
        Ok(alloc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, EngineConfig, Trace};
    use crate::model::{Tap, Task};
    use crate::rational::q;
    use crate::sched_mrt::Canc;

    fn cfg(p: usize) -> EngineConfig {
        EngineConfig::new(p).with_budget_factor(p, 2).with_cancel(true)
    }

    fn same_run(a: &Trace, b: &Trace) -> bool {
        a.slices == b.slices
            && a.decisions == b.decisions
            && a.completions == b.completions
            && a.cancellations == b.cancellations
    }

    #[test]
    fn distinct_types_match_canc() {
        let tasks = vec![
            Task::new(0, q(1, 1), q(4, 1), q(0, 1)),
            Task::new(1, q(2, 1), q(4, 1), q(0, 1)),
            Task::new(2, q(1, 1), q(1, 1), q(1, 2)),
            Task::new(3, q(1, 2), q(2, 1), q(1, 1)),
        ];
        let tap = Tap::new(4, tasks).unwrap();
        let b = simulate(&tap, &mut BSched::new(), cfg(4)).unwrap();
        let c = simulate(&tap, &mut Canc::new(), cfg(4)).unwrap();
        assert!(same_run(&b, &c), "{b:#?}\n{c:#?}");
    }

    #[test]
    fn one_parallel_task_per_type() {
        let tasks = (0..2).map(|i| Task::new(i, q(1, 1), q(2, 1), q(0, 1))).collect();
        let tap = Tap::new(4, tasks).unwrap();
        let tr = simulate(&tap, &mut BSched::new(), cfg(4)).unwrap();
        for s in &tr.slices {
            let par = s
                .alloc
                .keys()
                .filter(|id| {
                    tr.decisions[id]
                        .iter()
                        .rev()
                        .find(|d| d.time <= s.start)
                        .is_some_and(|d| d.decision == Decision::Parallel)
                })
                .count();
            assert!(par <= 1);
        }
        // both relaxed jobs get 2 processors, the threshold; task 0 takes
        // rate 4 and is done at 1/2, task 1 then takes it and is done at 1
        assert_eq!(tr.completions[&0], q(1, 2));
        assert_eq!(tr.completions[&1], q(1, 1));
        assert!(tr.cancellations.is_empty());
    }

    #[test]
    fn cancellation_with_no_task_left_makes_a_fake() {
        let tasks = (0..5).map(|i| Task::new(i, q(1, 1), q(4, 1), q(0, 1))).collect();
        let tap = Tap::new(4, tasks).unwrap();
        let tr = simulate(&tap, &mut BSched::new(), cfg(4)).unwrap();
        // task 0 absorbs the whole type rate and is done at 1; the five
        // simulated cancellations at 1 send the four waiting tasks to the
        // serial pool and add one fake
        assert!(tr.cancellations.is_empty());
        assert_eq!(tr.completions[&0], q(1, 1));
        let fakes = tr.notes().filter(|(_, n)| matches!(n, Note::Fake { .. })).count();
        assert_eq!(fakes, 1);
        assert!((1..5).all(|i| tr.completions[&i] == q(9, 4)));
    }

    #[test]
    fn refuses_unrounded_works() {
        let tap = Tap::new(4, vec![Task::new(0, q(3, 1), q(4, 1), q(0, 1))]).unwrap();
        assert!(simulate(&tap, &mut BSched::new(), cfg(4)).is_err());
    }
}
