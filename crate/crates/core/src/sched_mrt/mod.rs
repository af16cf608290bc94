//! Mean-response-time schedulers: EQUI, the silly/serious serial scheduler,
//! the cancelling scheduler built on relaxed jobs, its one-task-per-type
//! variant, and the non-cancelling scheduler that mirrors it.

mod bsched;
mod canc;
mod csched;
mod pool;
mod sss;

use serde::{Deserialize, Serialize};

pub use bsched::BSched;
pub use canc::Canc;
pub use csched::{CSched, ReserveRule};
pub use sss::Sss;

use crate::engine::{Allocation, Ctx, Phase, Scheduler};
use crate::error::Result;
use crate::model::{Decision, TaskId};
use crate::rational::Rational;

/// Surrogate job with work `2 sigma` whose speedup is flat below
/// `threshold = pi / sigma` processors and linear above it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelaxedJob {
    pub task_id: TaskId,
    pub total_work: Rational,
    pub threshold: Rational,
    pub progress: Rational,
}

impl RelaxedJob {
    pub fn new(task_id: TaskId, sigma: &Rational, pi: &Rational) -> Self {
        RelaxedJob {
            task_id,
            total_work: sigma * Rational::from(2),
            threshold: pi / sigma,
            progress: Rational::zero(),
        }
    }
}

/// Progress rate of a relaxed job on `x` processors.
pub fn relaxed_rate(job: &RelaxedJob, x: &Rational) -> Rational {
    if !x.is_positive() {
        Rational::zero()
    } else if *x < job.threshold {
        Rational::one()
    } else {
        x / &job.threshold
    }
}

/// Even split of `budget` over `jobs`; with `serial_cap` each share is capped
/// at one processor and the surplus stays idle.
pub fn equi_alloc(jobs: &[TaskId], budget: &Rational, serial_cap: bool) -> Allocation {
    let mut alloc = Allocation::new();
    if jobs.is_empty() || !budget.is_positive() {
        return alloc;
    }
    let mut share = budget / Rational::from(jobs.len());
    if serial_cap {
        share = share.min(Rational::one());
    }
    for id in jobs {
        alloc.insert(*id, share.clone());
    }
    alloc
}

/// Internal wakeup timer that registers each instant once.
#[derive(Debug, Default, Clone)]
pub(crate) struct Wakeup {
    last: Option<Rational>,
}

pub(crate) const WAKE_TAG: u64 = u64::MAX - 1;

impl Wakeup {
    pub fn arm(&mut self, ctx: &mut Ctx<'_>, at: Option<Rational>) -> Result<()> {
        if let Some(at) = at {
            if at > *ctx.now() && self.last.as_ref() != Some(&at) {
                ctx.set_timer(at.clone(), WAKE_TAG)?;
                self.last = Some(at);
            }
        }
        Ok(())
    }
}

/// Oblivious EQUI: every task runs its parallel implementation and the
/// budget is split evenly over the alive tasks.
#[derive(Debug, Default, Clone)]
pub struct Equi;

impl Scheduler for Equi {
    fn name(&self) -> String {
        "equi".into()
    }

    fn hides_parallel_work(&self) -> bool {
        true
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        ctx.start(id, Decision::Parallel)
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        let budget = Rational::from(ctx.p());
        Ok(equi_alloc(&ctx.running(), &budget, false))
    }
}

/// Non-preemptive first-come-first-served baseline: one task at a time on
/// all `p` processors, parallel implementation.
#[derive(Debug, Default, Clone)]
pub struct RigidParallel {
    current: Option<TaskId>,
}

impl Scheduler for RigidParallel {
    fn name(&self) -> String {
        "rigid-parallel".into()
    }

    fn hides_parallel_work(&self) -> bool {
        true
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        if let Some(id) = self.current {
            if matches!(ctx.phase(id), Phase::Done(_)) {
                self.current = None;
            }
        }
        if self.current.is_none() {
            let mut waiting = ctx.waiting();
            waiting.sort_by(|a, b| ctx.arrival(*a).cmp(ctx.arrival(*b)).then(a.cmp(b)));
            if let Some(&id) = waiting.first() {
                ctx.start(id, Decision::Parallel)?;
                self.current = Some(id);
            }
        }
        let mut alloc = Allocation::new();
        if let Some(id) = self.current {
            alloc.insert(id, Rational::from(ctx.p()));
        }
        Ok(alloc)
    }
}
