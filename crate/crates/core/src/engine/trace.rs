use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Decision, TaskId, TaskType};
use crate::rational::Rational;

/// Processor rate per task; absent ids get rate 0.
pub type Allocation = BTreeMap<TaskId, Rational>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub start: Rational,
    pub end: Rational,
    pub alloc: Allocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub decision: Decision,
    pub time: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cancellation {
    pub id: TaskId,
    pub time: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskMode {
    Normal,
    Vested,
    Ballistic,
    SemiBallistic,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolKind {
    Parallel,
    Serial,
}

/// Scheduler-specific annotations recorded alongside the execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Note {
    Mode { task: TaskId, mode: TaskMode },
    Emergency { class: i32, active: bool },
    Stolen { thief: TaskId, victim: TaskId, amount: Rational },
    Pool { task: TaskId, pool: PoolKind },
    Fake { ty: TaskType, fake: u64 },
    Serious { active: bool },
    Scary { task: TaskId },
    Reserve { total: Rational },
    Balance { balanced: bool },
    /// Task that entered an exceptional mode without having been placed in
    /// the serial pool by the simulated scheduler.
    Hard { task: TaskId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub time: Rational,
    #[serde(flatten)]
    pub note: Note,
}

/// Full execution record of one simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub scheduler: String,
    pub p: usize,
    pub speed: Rational,
    pub budget: Rational,
    pub allow_cancel: bool,
    pub slices: Vec<Slice>,
    pub decisions: BTreeMap<TaskId, Vec<DecisionRecord>>,
    /// Instant each task became available (arrival, or later for dependency-gated tasks).
    pub available: BTreeMap<TaskId, Rational>,
    pub completions: BTreeMap<TaskId, Rational>,
    pub cancellations: Vec<Cancellation>,
    pub aux: Vec<Annotation>,
    pub events: usize,
}

impl Trace {
    pub fn horizon(&self) -> Rational {
        self.slices.last().map(|s| s.end.clone()).unwrap_or_default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    /// Final decision of each task (the implementation it completed with).
    pub fn final_decisions(&self) -> BTreeMap<TaskId, Decision> {
        self.decisions
            .iter()
            .filter_map(|(id, recs)| recs.last().map(|r| (*id, r.decision)))
            .collect()
    }

    pub fn notes(&self) -> impl Iterator<Item = (&Rational, &Note)> {
        self.aux.iter().map(|a| (&a.time, &a.note))
    }

    /// Total allocated rate in each slice.
    pub fn busy(&self) -> impl Iterator<Item = (&Slice, Rational)> {
        self.slices.iter().map(|s| (s, s.alloc.values().sum()))
    }
}
