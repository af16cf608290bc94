//! Awake-time schedulers: most-work-first execution, the decide-on-arrival
//! balancer, the parallel-work-oblivious scheduler and the experimental
//! golden-ratio scheduler.

mod golden;
mod mwf;
mod unk;

use std::collections::BTreeMap;

pub use golden::GoldenAlg;
pub use mwf::{most_work_first_alloc, mwf_allocate, running_by_decision, MergeTimer, MwfPlan, MERGE_TAG};
pub use unk::Unk;

use crate::engine::{Allocation, Ctx, Note, Scheduler};
use crate::error::{Error, Result};
use crate::model::{Decision, Task, TaskId};
use crate::rational::Rational;

/// Remaining work held by a scheduler: serial jobs individually, plus the
/// total over serial and parallel jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceState {
    pub serial_remaining: Vec<Rational>,
    pub total_remaining: Rational,
    pub p: usize,
}

impl BalanceState {
    pub fn new(p: usize) -> Self {
        BalanceState { serial_remaining: Vec::new(), total_remaining: Rational::zero(), p }
    }

    pub fn from_ctx(ctx: &Ctx<'_>) -> Self {
        let (serial, parallel) = running_by_decision(ctx);
        let total = serial.iter().chain(parallel.iter()).map(|(_, r)| r).sum();
        BalanceState {
            serial_remaining: serial.into_iter().map(|(_, r)| r).collect(),
            total_remaining: total,
            p: ctx.p(),
        }
    }

    pub fn add(&mut self, task: &Task, decision: Decision) {
        let w = task.work(decision).clone();
        if decision == Decision::Serial {
            self.serial_remaining.push(w.clone());
        }
        self.total_remaining += w;
    }
}

/// Whether the held work can keep all `p` processors busy until it is done:
/// no serial job may be longer than the average load.
pub fn is_balanced(state: &BalanceState) -> bool {
    let max = state.serial_remaining.iter().max().cloned().unwrap_or_default();
    max * Rational::from(state.p) <= state.total_remaining
}

/// Serial iff taking the serial implementation keeps the state balanced.
pub fn bal_decide(state: &BalanceState, task: &Task) -> Decision {
    let mut next = state.clone();
    next.add(task, Decision::Serial);
    if is_balanced(&next) {
        Decision::Serial
    } else {
        Decision::Parallel
    }
}

/// Decide-on-arrival balancer run with most-work-first allocation.
#[derive(Debug, Default, Clone)]
pub struct Bal {
    mutated: bool,
    timer: MergeTimer,
}

impl Bal {
    pub fn new() -> Self {
        Bal::default()
    }

    /// Same scheduler with the balance test inverted; a fault-injection
    /// target for the verification battery.
    pub fn mutated() -> Self {
        Bal { mutated: true, ..Bal::default() }
    }
}

impl Scheduler for Bal {
    fn name(&self) -> String {
        if self.mutated { "bal-mutant".into() } else { "bal".into() }
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        let task = ctx.task(id)?;
        let state = BalanceState::from_ctx(ctx);
        let mut d = bal_decide(&state, &task);
        if self.mutated {
            d = match d {
                Decision::Serial => Decision::Parallel,
                Decision::Parallel => Decision::Serial,
            };
        }
        ctx.start(id, d)
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        let balanced = is_balanced(&BalanceState::from_ctx(ctx));
        ctx.annotate(Note::Balance { balanced });
        mwf_allocate(ctx, &mut self.timer)
    }
}

/// Uniform decide-on-arrival baseline with most-work-first allocation.
#[derive(Debug, Clone)]
pub struct MwfUniform {
    decision: Decision,
    timer: MergeTimer,
}

impl MwfUniform {
    pub fn all_serial() -> Self {
        MwfUniform { decision: Decision::Serial, timer: MergeTimer::default() }
    }

    pub fn all_parallel() -> Self {
        MwfUniform { decision: Decision::Parallel, timer: MergeTimer::default() }
    }
}

impl Scheduler for MwfUniform {
    fn name(&self) -> String {
        match self.decision {
            Decision::Serial => "mwf-all-serial".into(),
            Decision::Parallel => "mwf-all-parallel".into(),
        }
    }

    // Uniform decisions never look at pi.
    fn hides_parallel_work(&self) -> bool {
        true
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        ctx.start(id, self.decision)
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        mwf_allocate(ctx, &mut self.timer)
    }
}

/// Most-work-first execution of fixed decisions, started on availability.
#[derive(Debug, Clone)]
pub struct MwfFixed {
    decisions: BTreeMap<TaskId, Decision>,
    timer: MergeTimer,
}

impl MwfFixed {
    pub fn new(decisions: BTreeMap<TaskId, Decision>) -> Self {
        MwfFixed { decisions, timer: MergeTimer::default() }
    }
}

impl Scheduler for MwfFixed {
    fn name(&self) -> String {
        "mwf-fixed".into()
    }

    fn on_arrival(&mut self, ctx: &mut Ctx<'_>, id: TaskId) -> Result<()> {
        let d = *self
            .decisions
            .get(&id)
            .ok_or_else(|| Error::Contract(format!("no decision given for task {id}")))?;
        ctx.start(id, d)
    }

    fn allocate(&mut self, ctx: &mut Ctx<'_>) -> Result<Allocation> {
        mwf_allocate(ctx, &mut self.timer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn state(serial: &[i64], total: i64, p: usize) -> BalanceState {
        BalanceState {
            serial_remaining: serial.iter().map(|x| q(*x, 1)).collect(),
            total_remaining: q(total, 1),
            p,
        }
    }

    fn task(s: i64, pi: i64) -> Task {
        Task::new(0, q(s, 1), q(pi, 1), q(0, 1))
    }

    #[test]
    fn balance_examples() {
        assert!(is_balanced(&state(&[], 0, 4)));
        assert!(is_balanced(&state(&[1, 1, 1, 1], 4, 4)));
        assert!(!is_balanced(&state(&[2], 2, 4)));
    }

    #[test]
    fn decide_examples() {
        assert_eq!(bal_decide(&state(&[], 0, 4), &task(2, 8)), Decision::Parallel);
        assert_eq!(bal_decide(&state(&[1, 1, 1, 1], 4, 4), &task(1, 4)), Decision::Serial);
        assert_eq!(bal_decide(&state(&[], 0, 2), &task(1, 1)), Decision::Parallel);
    }
}
