//! Cost measures computed from complete traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::{Error, Result};
use crate::model::{Tap, TaskId};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub awake: Rational,
    pub trt: Rational,
    pub mrt: Rational,
    pub per_task_response: BTreeMap<TaskId, Rational>,
    pub completion_times: BTreeMap<TaskId, Rational>,
}

/// Measure of the union of half-open intervals.
pub fn union_measure(mut intervals: Vec<(Rational, Rational)>) -> Rational {
    intervals.retain(|(a, b)| a < b);
    intervals.sort();
    let mut total = Rational::zero();
    let mut cur: Option<(Rational, Rational)> = None;
    for (a, b) in intervals {
        cur = match cur {
            Some((s, e)) if a <= e => Some((s, e.max(b))),
            Some((s, e)) => {
                total += &e - &s;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((s, e)) = cur {
        total += &e - &s;
    }
    total
}

pub fn metrics_from_trace(trace: &Trace, tap: &Tap) -> Result<Metrics> {
    let mut per_task_response = BTreeMap::new();
    let mut completion_times = BTreeMap::new();
    let mut intervals = Vec::with_capacity(tap.len());
    for t in tap.tasks() {
        let f = trace
            .completions
            .get(&t.id)
            .ok_or_else(|| Error::IncompleteTrace(format!("task {} never completes", t.id)))?;
        per_task_response.insert(t.id, f - &t.arrival);
        completion_times.insert(t.id, f.clone());
        intervals.push((t.arrival.clone(), f.clone()));
    }
    let awake = union_measure(intervals);
    let trt: Rational = per_task_response.values().sum();
    let mrt = if tap.is_empty() { Rational::zero() } else { &trt / Rational::from(tap.len()) };
    Ok(Metrics { awake, trt, mrt, per_task_response, completion_times })
}

/// Alive intervals of the trace: maximal periods with an arrived, unfinished task.
pub fn alive_intervals(trace: &Trace, tap: &Tap) -> Vec<(Rational, Rational)> {
    let mut iv: Vec<(Rational, Rational)> = tap
        .tasks()
        .iter()
        .filter_map(|t| trace.completions.get(&t.id).map(|f| (t.arrival.clone(), f.clone())))
        .filter(|(a, b)| a < b)
        .collect();
    iv.sort();
    let mut merged: Vec<(Rational, Rational)> = Vec::new();
    for (a, b) in iv {
        match merged.last_mut() {
            Some((_, e)) if a <= *e => {
                if b > *e {
                    *e = b;
                }
            }
            _ => merged.push((a, b)),
        }
    }
    merged
}

/// Time during which tasks are alive but fewer than `p` processors are busy.
pub fn unsaturated_time(trace: &Trace, tap: &Tap) -> Rational {
    let p = Rational::from(trace.p);
    let alive = alive_intervals(trace, tap);
    let mut total = Rational::zero();
    for s in &trace.slices {
        let busy: Rational = s.alloc.values().sum();
        if busy >= p {
            continue;
        }
        for (a, b) in &alive {
            let lo = s.start.clone().max(a.clone());
            let hi = s.end.clone().min(b.clone());
            if lo < hi {
                total += hi - lo;
            }
        }
    }
    total
}

/// True when some task is alive throughout `[first arrival, last completion)`.
pub fn never_idle(trace: &Trace, tap: &Tap) -> bool {
    alive_intervals(trace, tap).len() <= 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn interval_union() {
        let iv = vec![(q(0, 1), q(1, 1)), (q(2, 1), q(3, 1))];
        assert_eq!(union_measure(iv), q(2, 1));
        let iv = vec![(q(0, 1), q(2, 1)), (q(1, 1), q(3, 1)), (q(5, 1), q(5, 1))];
        assert_eq!(union_measure(iv), q(3, 1));
        assert_eq!(union_measure(vec![]), q(0, 1));
    }
}
