use crate::engine::{Allocation, Ctx, Phase, Scheduler};
use crate::error::Result;
use crate::model::{Decision, TaskId};
use crate::rational::Rational;

/// Parallel-work-oblivious scheduler: a task waiting longer than its serial
/// work is started serially, otherwise at most one task runs in parallel.
#[derive(Debug, Default, Clone)]
pub struct Unk;

impl Unk {
    pub fn new() -> Self {
        Unk
    }

    fn fill(&self, ctx: &mut Ctx<'_>) -> Result<()> {
        let p = ctx.p();
        let running = ctx.running();
        let mut serial = running.iter().filter(|id| ctx.decision(**id) == Some(Decision::Serial)).count();
        let mut parallel = running.len() - serial;
        if parallel > 0 || serial >= p {
            return Ok(());
        }
        let mut waiting = ctx.waiting();
        waiting.sort_by(|a, b| ctx.arrival(*a).cmp(ctx.arrival(*b)).then(a.cmp(b)));
        let now = ctx.now().clone();
        let aged = |ctx: &Ctx<'_>, id: TaskId| &now - ctx.arrival(id) > *ctx.sigma(id);
        for &id in &waiting {
            if serial < p && aged(ctx, id) {
                ctx.start(id, Decision::Serial)?;
                serial += 1;
            }
        }
        if serial < p {
            if let Some(&id) = waiting.iter().find(|id| *ctx.phase(**id) == Phase::Waiting) {
                ctx.start(id, Decision::Parallel)?;
                parallel += 1;
            }
        }
        debug_assert!(parallel <= 1);
        Ok(())
    }
}

impl Scheduler for Unk {
    fn name(&self) -> String {
        "unk".into()
    }

    fn hides_parallel_work(&self) -> bool {
        true
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        let at = ctx.arrival(id) + ctx.sigma(id);
        ctx.set_timer(at, id as u64)
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        self.fill(ctx)?;
        let mut alloc = Allocation::new();
        let mut left = Rational::from(ctx.p());
        let mut par = None;
        for id in ctx.running() {
            match ctx.decision(id) {
                Some(Decision::Serial) => {
                    alloc.insert(id, Rational::one());
                    left -= Rational::one();
                }
                _ => par = Some(id),
            }
        }
        if let Some(id) = par {
            if left.is_positive() {
                alloc.insert(id, left);
            }
        }
        Ok(alloc)
    }
}
