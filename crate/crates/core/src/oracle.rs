//! Offline optima and bounds: awake time under fixed decisions, the exact
//! awake optimum by decision enumeration, a brute-force discretized search
//! used to cross-check both, and admissible lower bounds on total response
//! time.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{simulate, EngineConfig};
use crate::error::{Error, Result};
use crate::metrics::metrics_from_trace;
use crate::model::{Decision, Tap, TaskId};
use crate::rational::Rational;
use crate::sched_awake::MwfFixed;

/// Default cap on decision vectors evaluated by [`opt_awake_exhaustive`].
pub const DEFAULT_MAX_EVALS: u64 = 1 << 20;

/// Awake time of most-work-first execution with the given decisions.
pub fn opt_awake_given_decisions(tap: &Tap, decisions: &BTreeMap<TaskId, Decision>) -> Result<Rational> {
    if tap.is_empty() {
        return Ok(Rational::zero());
    }
    let mut sched = MwfFixed::new(decisions.clone());
    let trace = simulate(tap, &mut sched, EngineConfig::new(tap.p()))?;
    Ok(metrics_from_trace(&trace, tap)?.awake)
}

/// Interchangeable tasks: same works and arrival, no dependency edges.
fn symmetry_groups(tap: &Tap) -> Vec<Vec<TaskId>> {
    let has_dependents: std::collections::BTreeSet<TaskId> =
        tap.tasks().iter().flat_map(|t| t.deps.iter().copied()).collect();
    let mut groups: Vec<Vec<TaskId>> = Vec::new();
    let mut key_of: BTreeMap<(Rational, Rational, Rational), usize> = BTreeMap::new();
    for t in tap.tasks() {
        if !t.deps.is_empty() || has_dependents.contains(&t.id) {
            groups.push(vec![t.id]);
            continue;
        }
        let key = (t.arrival.clone(), t.sigma.clone(), t.pi.clone());
        match key_of.get(&key) {
            Some(&g) => groups[g].push(t.id),
            None => {
                key_of.insert(key, groups.len());
                groups.push(vec![t.id]);
            }
        }
    }
    groups
}

/// Minimum awake time over all decision vectors, with the
/// lexicographically first minimizer in task order (Serial before Parallel).
/// Interchangeable tasks are enumerated by count, so `max_evals` bounds the
/// number of distinct vectors up to symmetry.
pub fn opt_awake_exhaustive(tap: &Tap, max_evals: u64) -> Result<(Rational, BTreeMap<TaskId, Decision>)> {
    if tap.is_empty() {
        return Ok((Rational::zero(), BTreeMap::new()));
    }
    let groups = symmetry_groups(tap);
    let mut total: u64 = 1;
    for g in &groups {
        total = total
            .checked_mul(g.len() as u64 + 1)
            .filter(|t| *t <= max_evals)
            .ok_or_else(|| Error::TooLarge(format!("more than {max_evals} decision vectors")))?;
    }
    let position: BTreeMap<TaskId, usize> = tap.ids().enumerate().map(|(i, id)| (id, i)).collect();
    let vector = |mut code: u64| -> BTreeMap<TaskId, Decision> {
        let mut out = BTreeMap::new();
        for g in &groups {
            let base = g.len() as u64 + 1;
            let serial = (code % base) as usize;
            code /= base;
            // within a group the earliest tasks take Serial
            for (k, id) in g.iter().enumerate() {
                out.insert(*id, if k < serial { Decision::Serial } else { Decision::Parallel });
            }
        }
        out
    };
    let key = |d: &BTreeMap<TaskId, Decision>| -> Vec<Decision> {
        let mut v = vec![Decision::Serial; d.len()];
        for (id, dec) in d {
            v[position[id]] = *dec;
        }
        v
    };
    let results: Vec<Result<(Rational, Vec<Decision>, u64)>> = (0..total)
        .into_par_iter()
        .map(|code| {
            let d = vector(code);
            let v = opt_awake_given_decisions(tap, &d)?;
            Ok((v, key(&d), code))
        })
        .collect();
    let mut best: Option<(Rational, Vec<Decision>, u64)> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| (&r.0, &r.1) < (&b.0, &b.1)) {
            best = Some(r);
        }
    }
    let (value, _, code) = best.expect("at least one vector");
    Ok((value, vector(code)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    Awake,
    Trt,
}

/// Limits for [`grid_opt`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLimits {
    pub max_tasks: usize,
    pub max_steps: usize,
}

impl Default for GridLimits {
    fn default() -> Self {
        GridLimits { max_tasks: 4, max_steps: 4096 }
    }
}

/// Brute force over decision vectors and integer processor splits at each
/// grid step. Every explored schedule is feasible, so the result bounds the
/// true optimum from above; it reaches it once the grid is fine enough.
pub fn grid_opt(tap: &Tap, objective: Objective, grid: &Rational, limits: GridLimits) -> Result<Rational> {
    if !grid.is_positive() {
        return Err(Error::InvalidArgument(format!("grid {grid} must be positive")));
    }
    if tap.len() > limits.max_tasks {
        return Err(Error::TooLarge(format!("{} tasks > {}", tap.len(), limits.max_tasks)));
    }
    if tap.has_deps() {
        return Err(Error::InvalidArgument("grid search takes plain instances".into()));
    }
    // Works off the grid are rounded up, which keeps the result an upper
    // bound; arrivals must lie on the grid.
    let units = |x: &Rational, what: &str| -> Result<i64> {
        let u = x / grid;
        if what == "arrival" && !u.is_integer() {
            return Err(Error::InvalidArgument(format!("{what} {x} is not a multiple of {grid}")));
        }
        u.ceil().to_i64().ok_or_else(|| Error::TooLarge(format!("{what} {x} too large")))
    };
    let n = tap.len();
    let p = tap.p() as i64;
    let arrive: Vec<i64> = tap.tasks().iter().map(|t| units(&t.arrival, "arrival")).collect::<Result<_>>()?;
    let sig: Vec<i64> = tap.tasks().iter().map(|t| units(&t.sigma, "sigma")).collect::<Result<_>>()?;
    let pis: Vec<i64> = tap.tasks().iter().map(|t| units(&t.pi, "pi")).collect::<Result<_>>()?;
    let work_total: i64 = pis.iter().sum::<i64>() + arrive.iter().max().copied().unwrap_or(0);
    if work_total as usize > limits.max_steps {
        return Err(Error::TooLarge(format!("{work_total} grid steps > {}", limits.max_steps)));
    }
    if n == 0 {
        return Ok(Rational::zero());
    }
    let mut best: Option<i64> = None;
    for code in 0u32..(1 << n) {
        let serial: Vec<bool> = (0..n).map(|i| code & (1 << i) == 0).collect();
        let start: Vec<i64> = (0..n).map(|i| if serial[i] { sig[i] } else { pis[i] }).collect();
        if let Some(v) = grid_search(p, &arrive, &serial, start, objective, best) {
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    Ok(Rational::from(best.expect("some schedule finishes")) * grid)
}

/// Step-by-step frontier search for one decision vector; returns the cost
/// in grid steps.
fn grid_search(
    p: i64,
    arrive: &[i64],
    serial: &[bool],
    start: Vec<i64>,
    objective: Objective,
    bound: Option<i64>,
) -> Option<i64> {
    let n = start.len();
    let mut frontier: HashMap<Vec<i64>, i64> = HashMap::new();
    frontier.insert(start, 0);
    let mut best: Option<i64> = None;
    let mut step: i64 = 0;
    while !frontier.is_empty() {
        let mut next: HashMap<Vec<i64>, i64> = HashMap::new();
        for (rem, cost) in frontier {
            let alive: Vec<usize> = (0..n).filter(|&i| arrive[i] <= step && rem[i] > 0).collect();
            let pending = (0..n).any(|i| arrive[i] > step);
            if alive.is_empty() && !pending {
                best = Some(best.map_or(cost, |b| b.min(cost)));
                continue;
            }
            let add = match objective {
                Objective::Awake => i64::from(!alive.is_empty()),
                Objective::Trt => alive.len() as i64,
            };
            let cost = cost + add;
            if bound.is_some_and(|b| cost >= b) || best.is_some_and(|b| cost >= b) {
                continue;
            }
            let caps: Vec<i64> = alive.iter().map(|&i| rem[i].min(if serial[i] { 1 } else { p })).collect();
            let target = caps.iter().sum::<i64>().min(p);
            let mut split = vec![0i64; alive.len()];
            enumerate_splits(&caps, target, 0, &mut split, &mut |s| {
                let mut r = rem.clone();
                for (k, &i) in alive.iter().enumerate() {
                    r[i] -= s[k];
                }
                let e = next.entry(r).or_insert(i64::MAX);
                if cost < *e {
                    *e = cost;
                }
            });
        }
        frontier = prune_dominated(next);
        step += 1;
    }
    best
}

fn enumerate_splits(caps: &[i64], left: i64, k: usize, split: &mut Vec<i64>, f: &mut impl FnMut(&[i64])) {
    if k == caps.len() {
        if left == 0 {
            f(split);
        }
        return;
    }
    let rest: i64 = caps[k + 1..].iter().sum();
    let lo = (left - rest).max(0);
    let hi = caps[k].min(left);
    for r in lo..=hi {
        split[k] = r;
        enumerate_splits(caps, left - r, k + 1, split, f);
    }
    split[k] = 0;
}

/// Drops states that some other state beats in every remaining work and cost.
fn prune_dominated(states: HashMap<Vec<i64>, i64>) -> HashMap<Vec<i64>, i64> {
    let mut list: Vec<(Vec<i64>, i64)> = states.into_iter().collect();
    list.sort();
    if list.len() > 20_000 {
        return list.into_iter().collect();
    }
    let mut kept: Vec<(Vec<i64>, i64)> = Vec::new();
    for (s, c) in list {
        let dominated = kept
            .iter()
            .any(|(k, kc)| *kc <= c && k.iter().zip(&s).all(|(a, b)| a <= b));
        if !dominated {
            kept.retain(|(k, kc)| !(c <= *kc && s.iter().zip(k).all(|(a, b)| a <= b)));
            kept.push((s, c));
        }
    }
    kept.into_iter().collect()
}

/// Single-machine SRPT at speed `p` over serial works: the relaxation where
/// every task scales perfectly with work `sigma`.
pub fn srpt_relaxed_trt(tap: &Tap) -> Rational {
    let speed = Rational::from(tap.p());
    let mut pending: Vec<(Rational, Rational)> =
        tap.tasks().iter().map(|t| (t.arrival.clone(), t.sigma.clone())).collect();
    pending.sort();
    pending.reverse();
    let mut active: Vec<(Rational, Rational)> = Vec::new(); // (remaining, arrival)
    let mut now = Rational::zero();
    let mut trt = Rational::zero();
    while !pending.is_empty() || !active.is_empty() {
        while pending.last().is_some_and(|(a, _)| *a <= now) {
            let (a, w) = pending.pop().unwrap();
            active.push((w, a));
        }
        if active.is_empty() {
            now = pending.last().unwrap().0.clone();
            continue;
        }
        active.sort();
        let finish = &now + &active[0].0 / &speed;
        match pending.last() {
            Some((a, _)) if *a < finish => {
                let done = (a - &now) * &speed;
                active[0].0 -= done;
                now = a.clone();
            }
            _ => {
                let (_, arr) = active.remove(0);
                trt += &finish - arr;
                now = finish;
            }
        }
    }
    trt
}

/// Admissible lower bound on the optimal total response time.
pub fn opt_trt_lower(tap: &Tap) -> Rational {
    let lb_a: Rational = tap.tasks().iter().map(|t| t.fastest(tap.p())).sum();
    lb_a.max(srpt_relaxed_trt(tap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Task;
    use crate::rational::{phi_hat, q};

    fn t(id: usize, s: Rational, pi: Rational, a: Rational) -> Task {
        Task::new(id, s, pi, a)
    }

    fn golden(p: usize) -> Tap {
        Tap::new(p, vec![t(0, phi_hat(), Rational::from(p), q(0, 1))]).unwrap()
    }

    #[test]
    fn golden_given_parallel() {
        let d = [(0, Decision::Parallel)].into_iter().collect();
        assert_eq!(opt_awake_given_decisions(&golden(4), &d).unwrap(), q(1, 1));
        assert_eq!(opt_awake_given_decisions(&Tap::empty(4), &BTreeMap::new()).unwrap(), q(0, 1));
    }

    #[test]
    fn geometric_prefix_given_decisions() {
        let tap = Tap::new(4, vec![t(0, q(2, 1), q(4, 1), q(0, 1)), t(1, q(4, 1), q(8, 1), q(0, 1))]).unwrap();
        let d = [(0, Decision::Serial), (1, Decision::Parallel)].into_iter().collect();
        assert_eq!(opt_awake_given_decisions(&tap, &d).unwrap(), q(5, 2));
        let (v, best) = opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS).unwrap();
        assert_eq!(v, q(5, 2));
        assert_eq!(best, d);
    }

    #[test]
    fn exhaustive_golden_and_single() {
        let (v, d) = opt_awake_exhaustive(&golden(4), DEFAULT_MAX_EVALS).unwrap();
        assert_eq!(v, q(1, 1));
        assert_eq!(d[&0], Decision::Parallel);
        let single = Tap::new(4, vec![t(0, q(1, 1), q(4, 1), q(0, 1))]).unwrap();
        let (v, d) = opt_awake_exhaustive(&single, DEFAULT_MAX_EVALS).unwrap();
        assert_eq!(v, q(1, 1));
        assert_eq!(d[&0], Decision::Serial);
    }

    #[test]
    fn exhaustive_too_large() {
        let tasks = (0..12).map(|i| t(i, q(1, 1), q(i as i64 % 4 + 1, 1), q(i as i64, 1))).collect();
        let tap = Tap::new(4, tasks).unwrap();
        assert!(matches!(opt_awake_exhaustive(&tap, 1 << 10), Err(Error::TooLarge(_))));
    }

    #[test]
    fn grid_examples() {
        assert_eq!(grid_opt(&golden(4), Objective::Awake, &q(1, 4), GridLimits::default()).unwrap(), q(1, 1));
        let late = Tap::new(4, vec![t(0, q(1, 1), q(4, 1), q(1, 3))]).unwrap();
        assert!(grid_opt(&late, Objective::Awake, &q(1, 4), GridLimits::default()).is_err());
        let s = Tap::new(2, vec![t(0, q(3, 1), q(6, 1), q(0, 1))]).unwrap();
        assert_eq!(grid_opt(&s, Objective::Awake, &q(1, 1), GridLimits::default()).unwrap(), q(3, 1));
    }

    #[test]
    fn trt_lower_examples() {
        let one = Tap::new(4, vec![t(0, q(1, 1), q(4, 1), q(0, 1))]).unwrap();
        assert_eq!(opt_trt_lower(&one), q(1, 1));
        let mut tasks: Vec<Task> = (0..4).map(|i| t(i, q(1, 1), q(1, 1), q(0, 1))).collect();
        tasks.extend((4..6).map(|i| t(i, q(1, 1), q(16, 1), q(0, 1))));
        let ce = Tap::new(16, tasks).unwrap();
        let lb_a: Rational = ce.tasks().iter().map(|t| t.fastest(16)).sum();
        assert_eq!(lb_a, q(9, 4));
        let n = 5;
        let same = Tap::new(4, (0..n).map(|i| t(i, q(1, 1), q(4, 1), q(0, 1))).collect()).unwrap();
        let expect: Rational = (1..=n as i64).map(|i| q(i, 4)).sum();
        assert_eq!(srpt_relaxed_trt(&same), expect);
    }
}
