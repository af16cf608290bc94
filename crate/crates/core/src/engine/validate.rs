//! Independent trace checker. It re-derives every task's progress from the
//! slices alone and never trusts engine bookkeeping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::sim::EngineConfig;
use crate::engine::trace::Trace;
use crate::model::{Decision, Tap, TaskId};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    SliceOrder,
    NegativeRate,
    Budget,
    SerialCap,
    NotRunning,
    BeforeAvailable,
    WorkConservation,
    Irrevocability,
    Incomplete,
    Config,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub task: Option<TaskId>,
    pub time: Option<Rational>,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(t) = self.task {
            write!(f, " task={t}")?;
        }
        if let Some(t) = &self.time {
            write!(f, " t={t}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// One execution attempt: from a start until completion or cancellation.
struct Run {
    decision: Decision,
    start: Rational,
    end: Option<Rational>,
    cancelled: bool,
    progress: Rational,
}

/// Checks every trace invariant; an empty result means the trace is valid.
pub fn validate_trace(trace: &Trace, tap: &Tap, cfg: &EngineConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, task, time: Option<&Rational>, detail: String| {
        out.push(Violation { kind, task, time: time.cloned(), detail });
    };
    if trace.budget != cfg.budget || trace.speed != cfg.speed || trace.allow_cancel != cfg.allow_cancel {
        push(ViolationKind::Config, None, None, "trace header disagrees with config".into());
    }
    let one = Rational::one();

    // Reconstruct runs per task from decisions, cancellations, completions.
    let mut runs: BTreeMap<TaskId, Vec<Run>> = BTreeMap::new();
    for t in tap.tasks() {
        let mut cancels: Vec<&Rational> =
            trace.cancellations.iter().filter(|c| c.id == t.id).map(|c| &c.time).collect();
        cancels.sort();
        let decs = trace.decisions.get(&t.id).map(Vec::as_slice).unwrap_or(&[]);
        if !cfg.allow_cancel && (decs.len() > 1 || !cancels.is_empty()) {
            push(
                ViolationKind::Irrevocability,
                Some(t.id),
                None,
                format!("{} decisions, {} cancellations without cancelling", decs.len(), cancels.len()),
            );
        }
        if cancels.len() + 1 != decs.len() && !decs.is_empty() {
            push(
                ViolationKind::Irrevocability,
                Some(t.id),
                None,
                format!("{} starts do not match {} cancellations", decs.len(), cancels.len()),
            );
        }
        let mut list = Vec::new();
        for (k, d) in decs.iter().enumerate() {
            let (end, cancelled) = match cancels.get(k) {
                Some(c) => (Some((*c).clone()), true),
                None => (trace.completions.get(&t.id).cloned(), false),
            };
            if let Some(e) = &end {
                if *e < d.time {
                    push(ViolationKind::SliceOrder, Some(t.id), Some(e), "run ends before it starts".into());
                }
            }
            list.push(Run { decision: d.decision, start: d.time.clone(), end, cancelled, progress: Rational::zero() });
        }
        runs.insert(t.id, list);
    }

    // Availability: arrival and dependency completion.
    let mut avail: BTreeMap<TaskId, Rational> = BTreeMap::new();
    for t in tap.tasks() {
        let mut a = t.arrival.clone();
        for d in &t.deps {
            match trace.completions.get(d) {
                Some(f) => a = a.max(f.clone()),
                None => a = a.max(trace.horizon() + Rational::one()),
            }
        }
        if let Some(first) = runs[&t.id].first() {
            if first.start < a {
                push(ViolationKind::BeforeAvailable, Some(t.id), Some(&first.start), format!("started before availability {a}"));
            }
        }
        avail.insert(t.id, a);
    }

    let mut prev_end = Rational::zero();
    for s in &trace.slices {
        if s.start != prev_end {
            push(ViolationKind::SliceOrder, None, Some(&s.start), format!("gap or overlap after {prev_end}"));
        }
        if s.start >= s.end {
            push(ViolationKind::SliceOrder, None, Some(&s.start), "empty or reversed slice".into());
        }
        prev_end = s.end.clone();
        let dt = &s.end - &s.start;
        let mut total = Rational::zero();
        for (id, rate) in &s.alloc {
            if rate.is_negative() {
                push(ViolationKind::NegativeRate, Some(*id), Some(&s.start), format!("rate {rate}"));
                continue;
            }
            total += rate;
            if rate.is_zero() {
                continue;
            }
            if avail.get(id).is_none_or(|a| s.start < *a) {
                push(ViolationKind::BeforeAvailable, Some(*id), Some(&s.start), "rate before availability".into());
            }
            let run = runs.get_mut(id).and_then(|rs| {
                rs.iter_mut().find(|r| r.start <= s.start && r.end.as_ref().is_none_or(|e| s.end <= *e))
            });
            match run {
                None => push(ViolationKind::NotRunning, Some(*id), Some(&s.start), "rate outside any run".into()),
                Some(r) => {
                    if r.decision == Decision::Serial && *rate > one {
                        push(ViolationKind::SerialCap, Some(*id), Some(&s.start), format!("serial rate {rate}"));
                    }
                    r.progress += rate * &trace.speed * &dt;
                }
            }
        }
        if total > trace.budget {
            push(ViolationKind::Budget, None, Some(&s.start), format!("total rate {total} > {}", trace.budget));
        }
    }

    for t in tap.tasks() {
        let rs = &runs[&t.id];
        match trace.completions.get(&t.id) {
            None => push(ViolationKind::Incomplete, Some(t.id), None, "never completed".into()),
            Some(f) => {
                if *f > prev_end {
                    push(ViolationKind::Incomplete, Some(t.id), Some(f), "completion after horizon".into());
                }
                match rs.last() {
                    Some(last) if !last.cancelled => {
                        let work = t.work(last.decision);
                        if last.progress != *work {
                            push(
                                ViolationKind::WorkConservation,
                                Some(t.id),
                                Some(f),
                                format!("progress {} != work {}", last.progress, work),
                            );
                        }
                    }
                    _ => push(ViolationKind::Incomplete, Some(t.id), Some(f), "completed without a live run".into()),
                }
            }
        }
        for r in rs.iter().filter(|r| r.cancelled) {
            if r.progress >= *t.work(r.decision) {
                push(ViolationKind::WorkConservation, Some(t.id), r.end.as_ref(), "cancelled after finishing its work".into());
            }
        }
    }
    out
}
