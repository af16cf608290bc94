use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Task, TaskId};
use crate::rational::Rational;

use super::{relaxed_rate, RelaxedJob};

#[derive(Debug, Clone)]
pub(crate) struct PoolEntry {
    pub job: RelaxedJob,
    pub entered: Rational,
    pub sigma: Rational,
    pub pi: Rational,
    /// Parallel work the real task has received inside the pool.
    pub real: Rational,
}

/// The cancelling scheduler's parallel pool: EQUI over relaxed jobs on
/// `procs` processors, each real task running on its relaxed job's share.
/// Relaxed jobs progress at unit speed; `speed` only scales real work.
#[derive(Debug, Clone)]
pub(crate) struct RelaxedPool {
    procs: Rational,
    speed: Rational,
    pub entries: BTreeMap<TaskId, PoolEntry>,
    last: Rational,
}

impl RelaxedPool {
    pub fn new(procs: Rational, speed: Rational) -> Self {
        RelaxedPool { procs, speed, entries: BTreeMap::new(), last: Rational::zero() }
    }

    /// Processors each pool member currently receives.
    pub fn share(&self) -> Option<Rational> {
        if self.entries.is_empty() {
            None
        } else {
            Some(&self.procs / Rational::from(self.entries.len()))
        }
    }

    /// Moves pool time forward. A relaxed job passing its total work while
    /// its task is still in the pool contradicts the completion argument.
    pub fn advance(&mut self, now: &Rational) -> Result<()> {
        if *now <= self.last {
            return Ok(());
        }
        let dt = now - &self.last;
        if let Some(x) = self.share() {
            for (id, e) in self.entries.iter_mut() {
                let r = relaxed_rate(&e.job, &x);
                e.job.progress += &r * &dt;
                e.real += &x * &self.speed * &dt;
                if e.job.progress > e.job.total_work {
                    return Err(Error::Invariant(format!(
                        "relaxed job {id} finished before its task (parallel work {} of {})",
                        e.real, e.pi
                    )));
                }
            }
        }
        self.last = now.clone();
        Ok(())
    }

    pub fn add(&mut self, task: &Task, now: &Rational) {
        self.entries.insert(
            task.id,
            PoolEntry {
                job: RelaxedJob::new(task.id, &task.sigma, &task.pi),
                entered: now.clone(),
                sigma: task.sigma.clone(),
                pi: task.pi.clone(),
                real: Rational::zero(),
            },
        );
    }

    pub fn remove(&mut self, id: TaskId) -> Option<PoolEntry> {
        self.entries.remove(&id)
    }

    /// Members whose real task has received all of its parallel work.
    pub fn finished(&self) -> Vec<TaskId> {
        self.entries.iter().filter(|(_, e)| e.real >= e.pi).map(|(id, _)| *id).collect()
    }

    /// Members that have been in the pool for exactly their serial work.
    pub fn expired(&self, now: &Rational) -> Vec<TaskId> {
        self.entries
            .iter()
            .filter(|(_, e)| &e.entered + &e.sigma <= *now)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Checks members still present at the current instant.
    pub fn check_relaxed(&self) -> Result<()> {
        for (id, e) in &self.entries {
            if e.job.progress >= e.job.total_work {
                return Err(Error::Invariant(format!(
                    "relaxed job {id} finished while its task is unfinished (parallel work {} of {})",
                    e.real, e.pi
                )));
            }
        }
        Ok(())
    }

    /// Earliest future instant at which a member finishes or expires.
    pub fn next_event(&self) -> Option<Rational> {
        let x = self.share()?;
        let rate = &x * &self.speed;
        self.entries
            .values()
            .flat_map(|e| [&self.last + (&e.pi - &e.real) / &rate, &e.entered + &e.sigma])
            .min()
    }
}
