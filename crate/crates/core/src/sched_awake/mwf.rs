use crate::engine::{Allocation, Ctx};
use crate::error::{Error, Result};
use crate::model::{Decision, TaskId};
use crate::rational::Rational;

/// Most-work-first allocation plus the time (at unit speed) until two
/// serial groups with different rates reach equal remaining work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MwfPlan {
    pub alloc: Allocation,
    pub merge_in: Option<Rational>,
}

/// Serial jobs by largest remaining work get one processor each; jobs tied
/// at the capacity boundary share the leftover evenly (fluid level rule).
/// Whatever budget remains goes to the lowest-id parallel job.
pub fn most_work_first_alloc(
    serial: &[(TaskId, Rational)],
    parallel: &[(TaskId, Rational)],
    budget: &Rational,
) -> Result<MwfPlan> {
    if budget.is_negative() {
        return Err(Error::Contract(format!("negative budget {budget}")));
    }
    let mut order: Vec<&(TaskId, Rational)> = serial.iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut alloc = Allocation::new();
    let mut cap = budget.clone();
    let one = Rational::one();
    // (remaining, rate) per group of equal remaining work
    let mut groups: Vec<(Rational, Rational)> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let rem = &order[k].1;
        let mut end = k;
        while end < order.len() && order[end].1 == *rem {
            end += 1;
        }
        let m = Rational::from(end - k);
        let rate = if cap >= m {
            cap -= &m;
            one.clone()
        } else if cap.is_positive() {
            let r = &cap / &m;
            cap = Rational::zero();
            r
        } else {
            Rational::zero()
        };
        if rate.is_positive() {
            for (id, _) in &order[k..end] {
                alloc.insert(*id, rate.clone());
            }
        }
        groups.push((rem.clone(), rate));
        k = end;
    }
    let mut merge_in: Option<Rational> = None;
    for w in groups.windows(2) {
        let (hi, lo) = (&w[0], &w[1]);
        if hi.1 > lo.1 {
            let dt = (&hi.0 - &lo.0) / (&hi.1 - &lo.1);
            // a group that finishes first never merges
            if !hi.0.is_zero() && dt < &hi.0 / &hi.1 {
                merge_in = Some(merge_in.map_or(dt.clone(), |m| m.min(dt)));
            }
        }
    }
    if cap.is_positive() {
        if let Some((id, _)) = parallel.iter().min_by_key(|(id, _)| *id) {
            alloc.insert(*id, cap);
        }
    }
    Ok(MwfPlan { alloc, merge_in })
}

/// Running tasks split into (serial, parallel) lists of remaining work.
pub fn running_by_decision(ctx: &Ctx<'_>) -> (Vec<(TaskId, Rational)>, Vec<(TaskId, Rational)>) {
    let mut serial = Vec::new();
    let mut parallel = Vec::new();
    for id in ctx.running() {
        let rem = ctx.remaining(id).cloned().unwrap_or_default();
        match ctx.decision(id) {
            Some(Decision::Serial) => serial.push((id, rem)),
            _ => parallel.push((id, rem)),
        }
    }
    (serial, parallel)
}

/// Tag used by schedulers for group-merge re-allocation timers.
pub const MERGE_TAG: u64 = u64::MAX;

/// Keeps at most one outstanding merge timer per distinct instant.
#[derive(Debug, Default, Clone)]
pub struct MergeTimer {
    last: Option<Rational>,
}

impl MergeTimer {
    pub fn arm(&mut self, ctx: &mut Ctx<'_>, merge_in: Option<Rational>) -> Result<()> {
        if let Some(d) = merge_in {
            let at = ctx.now() + d / ctx.speed();
            if self.last.as_ref() != Some(&at) {
                ctx.set_timer(at.clone(), MERGE_TAG)?;
                self.last = Some(at);
            }
        }
        Ok(())
    }
}

/// Full most-work-first allocation over every running task in `ctx`.
pub fn mwf_allocate(ctx: &mut Ctx<'_>, timer: &mut MergeTimer) -> Result<Allocation> {
    let (serial, parallel) = running_by_decision(ctx);
    let budget = Rational::from(ctx.p()).min(ctx.budget().clone());
    let plan = most_work_first_alloc(&serial, &parallel, &budget)?;
    timer.arm(ctx, plan.merge_in)?;
    Ok(plan.alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn jobs(w: &[i64]) -> Vec<(TaskId, Rational)> {
        w.iter().enumerate().map(|(i, x)| (i, q(*x, 1))).collect()
    }

    #[test]
    fn largest_serial_first() {
        let plan = most_work_first_alloc(&jobs(&[3, 2, 1]), &[], &q(2, 1)).unwrap();
        assert_eq!(plan.alloc, [(0, q(1, 1)), (1, q(1, 1))].into_iter().collect());
        // job 1 reaches job 2's remaining work after one time unit
        assert_eq!(plan.merge_in, Some(q(1, 1)));
    }

    #[test]
    fn leftover_to_parallel() {
        let plan = most_work_first_alloc(&[(0, q(1, 1))], &[(1, q(10, 1))], &q(4, 1)).unwrap();
        assert_eq!(plan.alloc, [(0, q(1, 1)), (1, q(3, 1))].into_iter().collect());
    }

    #[test]
    fn no_jobs_empty() {
        let plan = most_work_first_alloc(&[], &[], &q(4, 1)).unwrap();
        assert!(plan.alloc.is_empty());
        assert!(most_work_first_alloc(&[], &[], &q(-1, 1)).is_err());
    }

    #[test]
    fn tied_group_shares_boundary() {
        let plan = most_work_first_alloc(&jobs(&[1, 1, 1]), &[], &q(2, 1)).unwrap();
        assert!(plan.alloc.values().all(|r| *r == q(2, 3)));
        assert_eq!(plan.merge_in, None);
    }
}
