use crate::engine::{Allocation, Ctx, Phase, Scheduler};
use crate::error::{Error, Result};
use crate::model::{Decision, Tap, Task, TaskId};
use crate::oracle::opt_awake_exhaustive;
use crate::rational::{phi_hat, Rational};

use super::mwf::{mwf_allocate, MergeTimer};

/// Experimental golden-ratio scheduler. Arrivals join a parallel pool that
/// runs one task at a time in arrival order; a waiting pool task moves to
/// the serial pool when its serial work plus the awake time so far is below
/// `phi * OPT` of the tasks seen so far.
#[derive(Debug, Clone)]
pub struct GoldenAlg {
    max_n: usize,
    seen: Vec<Task>,
    pool: Vec<TaskId>,
    fresh: bool,
    awake: Rational,
    last_now: Rational,
    alive_after: bool,
    timer: MergeTimer,
}

impl GoldenAlg {
    /// `max_n` bounds the exhaustive oracle consulted at every arrival.
    pub fn new(max_n: usize) -> Self {
        GoldenAlg {
            max_n,
            seen: Vec::new(),
            pool: Vec::new(),
            fresh: false,
            awake: Rational::zero(),
            last_now: Rational::zero(),
            alive_after: false,
            timer: MergeTimer::default(),
        }
    }

    fn sync(&mut self, ctx: &Ctx<'_>) {
        if *ctx.now() != self.last_now {
            if self.alive_after {
                self.awake += ctx.now() - &self.last_now;
            }
            self.last_now = ctx.now().clone();
        }
    }
}

impl Default for GoldenAlg {
    fn default() -> Self {
        GoldenAlg::new(20)
    }
}

impl Scheduler for GoldenAlg {
    fn name(&self) -> String {
        "golden".into()
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        self.sync(ctx);
        let task = ctx.task(id)?;
        self.seen.push(task);
        self.pool.push(id);
        self.fresh = true;
        Ok(())
    }

    fn on_completion(&mut self, ctx: &mut Ctx<'_>, _id: TaskId) -> Result<()> {
        self.sync(ctx);
        Ok(())
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_>, _tag: u64) -> Result<()> {
        self.sync(ctx);
        Ok(())
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        self.sync(ctx);
        self.pool.retain(|id| !matches!(ctx.phase(*id), Phase::Done(_)));
        let par_running = ctx.running().iter().any(|id| ctx.decision(*id) == Some(Decision::Parallel));
        if !par_running {
            if let Some(&id) = self.pool.iter().find(|id| *ctx.phase(**id) == Phase::Waiting) {
                ctx.start(id, Decision::Parallel)?;
            }
        }
        if self.fresh {
            self.fresh = false;
            if self.seen.len() > self.max_n {
                return Err(Error::Unavailable(format!("oracle bound {} exceeded", self.max_n)));
            }
            let tap = Tap::new(ctx.p(), self.seen.clone())?;
            let (opt, _) = opt_awake_exhaustive(&tap, 1 << 20)
                .map_err(|e| Error::Unavailable(format!("oracle failed: {e}")))?;
            let limit = phi_hat() * opt;
            let waiting: Vec<TaskId> =
                self.pool.iter().copied().filter(|id| *ctx.phase(*id) == Phase::Waiting).collect();
            for id in waiting {
                if ctx.sigma(id) + &self.awake < limit {
                    ctx.start(id, Decision::Serial)?;
                    self.pool.retain(|x| *x != id);
                }
            }
        }
        let alloc = mwf_allocate(ctx, &mut self.timer)?;
        self.alive_after = !ctx.alive().is_empty();
        Ok(alloc)
    }
}
