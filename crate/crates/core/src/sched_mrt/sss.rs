use std::collections::BTreeSet;

use crate::engine::{Allocation, Ctx, Note, Scheduler};
use crate::error::{Error, Result};
use crate::model::{Decision, TaskId};
use crate::rational::Rational;

use super::equi_alloc;

/// Silly/serious serial scheduler on `2p` processors. With fewer than `p`
/// jobs alive each gets its own processor. Once `p` are alive, jobs that
/// arrived before that instant keep a dedicated processor and jobs that
/// arrive at or after it (scary) share the other `p` processors by EQUI.
#[derive(Debug, Clone, Default)]
pub struct Sss {
    serious: bool,
    scary: BTreeSet<TaskId>,
}

impl Sss {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Scheduler for Sss {
    fn name(&self) -> String {
        "sss".into()
    }

    fn hides_parallel_work(&self) -> bool {
        true
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        ctx.start(id, Decision::Serial)
    }

    fn on_completion(&mut self, _ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        self.scary.remove(&id);
        Ok(())
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        let p = ctx.p();
        if *ctx.budget() < Rational::from(2 * p) {
            return Err(Error::Contract(format!("sss needs budget 2p, got {}", ctx.budget())));
        }
        let alive = ctx.running();
        let now = ctx.now().clone();
        if !self.serious && alive.len() >= p {
            self.serious = true;
            ctx.annotate(Note::Serious { active: true });
            for &id in &alive {
                if *ctx.arrival(id) == now {
                    self.scary.insert(id);
                    ctx.annotate(Note::Scary { task: id });
                }
            }
        } else if self.serious && alive.len() < p {
            self.serious = false;
            self.scary.clear();
            ctx.annotate(Note::Serious { active: false });
        } else if self.serious {
            for &id in &alive {
                if *ctx.arrival(id) == now && self.scary.insert(id) {
                    ctx.annotate(Note::Scary { task: id });
                }
            }
        }
        let mut alloc = Allocation::new();
        let mut scary = Vec::new();
        for id in alive {
            if self.scary.contains(&id) {
                scary.push(id);
            } else {
                alloc.insert(id, Rational::one());
            }
        }
        alloc.extend(equi_alloc(&scary, &Rational::from(p), true));
        Ok(alloc)
    }
}
