use crate::engine::{Allocation, Ctx, Note, PoolKind, Scheduler};
use crate::error::{Error, Result};
use crate::model::{Decision, TaskId};
use crate::rational::Rational;

use super::pool::RelaxedPool;
use super::equi_alloc;

/// Cancelling scheduler. Arrivals run in parallel on a pool of `p`
/// processors shared evenly (the share a relaxed job would get); a task
/// still unfinished after `sigma` time in that pool is cancelled and rerun
/// serially on a second pool of `p` processors.
#[derive(Debug, Clone, Default)]
pub struct Canc {
    pool: Option<RelaxedPool>,
    serial: Vec<TaskId>,
}

impl Canc {
    pub fn new() -> Self {
        Self::default()
    }

    fn pool(&mut self, ctx: &Ctx<'_>) -> Result<&mut RelaxedPool> {
        if self.pool.is_none() {
            let p = Rational::from(ctx.p());
            if *ctx.budget() < &p * Rational::from(2) {
                return Err(Error::Contract(format!("canc needs budget 2p, got {}", ctx.budget())));
            }
            self.pool = Some(RelaxedPool::new(p, ctx.speed().clone()));
        }
        let pool = self.pool.as_mut().expect("pool");
        pool.advance(ctx.now())?;
        Ok(pool)
    }
}

impl Scheduler for Canc {
    fn name(&self) -> String {
        "canc".into()
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        let task = ctx.task(id)?;
        let now = ctx.now().clone();
        self.pool(ctx)?.add(&task, &now);
        ctx.start(id, Decision::Parallel)?;
        ctx.annotate(Note::Pool { task: id, pool: PoolKind::Parallel });
        ctx.set_timer(&now + &task.sigma, 0)
    }

    fn on_completion(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        self.pool(ctx)?.remove(id);
        self.serial.retain(|s| *s != id);
        Ok(())
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        let now = ctx.now().clone();
        let pool = self.pool(ctx)?;
        pool.check_relaxed()?;
        let expired = pool.expired(&now);
        for id in &expired {
            pool.remove(*id);
        }
        let share = pool.share();
        let members: Vec<TaskId> = pool.entries.keys().copied().collect();
        for id in expired {
            ctx.cancel(id)?;
            ctx.start(id, Decision::Serial)?;
            ctx.annotate(Note::Pool { task: id, pool: PoolKind::Serial });
            self.serial.push(id);
        }
        let mut alloc = Allocation::new();
        if let Some(x) = share {
            for id in members {
                alloc.insert(id, x.clone());
            }
        }
        let p = Rational::from(ctx.p());
        alloc.extend(equi_alloc(&self.serial, &p, true));
        Ok(alloc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, EngineConfig};
    use crate::model::{Tap, Task};
    use crate::rational::q;

    fn cfg(p: usize) -> EngineConfig {
        EngineConfig::new(p).with_budget_factor(p, 2).with_cancel(true)
    }

    #[test]
    fn lone_task_finishes_in_parallel() {
        let tap = Tap::new(4, vec![Task::new(0, q(1, 1), q(4, 1), q(0, 1))]).unwrap();
        let tr = simulate(&tap, &mut Canc::new(), cfg(4)).unwrap();
        assert_eq!(tr.completions[&0], q(1, 1));
        assert!(tr.cancellations.is_empty());
    }

    #[test]
    fn crowded_pool_cancels_everyone() {
        let tasks = (0..5).map(|i| Task::new(i, q(1, 1), q(4, 1), q(0, 1))).collect();
        let tap = Tap::new(4, tasks).unwrap();
        let tr = simulate(&tap, &mut Canc::new(), cfg(4)).unwrap();
        assert_eq!(tr.cancellations.len(), 5);
        assert!(tr.cancellations.iter().all(|c| c.time == q(1, 1)));
        // serial restart: five unit jobs on four serial processors, each at rate 4/5
        assert!(tr.completions.values().all(|f| *f == q(9, 4)));
    }

    #[test]
    fn empty_tap() {
        let tr = simulate(&Tap::empty(4), &mut Canc::new(), cfg(4)).unwrap();
        assert!(tr.slices.is_empty());
    }

    #[test]
    fn refuses_small_budget() {
        let tap = Tap::new(4, vec![Task::new(0, q(1, 1), q(4, 1), q(0, 1))]).unwrap();
        let cfg = EngineConfig::new(4).with_cancel(true);
        assert!(simulate(&tap, &mut Canc::new(), cfg).is_err());
    }
}
