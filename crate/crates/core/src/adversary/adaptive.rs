use crate::engine::{EngineConfig, Phase, Scheduler, Simulation, Trace};
use crate::error::{Error, Result};
use crate::model::{Decision, Tap, Task};
use crate::oracle::opt_trt_lower;
use crate::rational::{phi_hat, Rational};

/// Adversary that watches a running simulation and may add tasks.
pub trait Adversary {
    fn name(&self) -> String;

    /// Tasks known from the start.
    fn initial(&self) -> Result<Tap>;

    /// Called once per instant after the scheduler has acted. Returned
    /// tasks must arrive at or after the current instant.
    fn observe(&mut self, sim: &Simulation) -> Result<Vec<Task>>;

    /// Instant at which the adversary reacted, if it did.
    fn triggered_at(&self) -> Option<Rational>;

    /// True when the adversary was supposed to react but never could.
    fn inconclusive(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct DuelOutcome {
    /// Every task of the run, injected ones included.
    pub tap: Tap,
    pub trace: Trace,
    pub triggered_at: Option<Rational>,
    pub inconclusive: bool,
}

/// Runs `sched` against `adv` until every task, injected or not, is done.
pub fn duel<A: Adversary + ?Sized, S: Scheduler + ?Sized>(
    adv: &mut A,
    sched: &mut S,
    cfg: EngineConfig,
) -> Result<DuelOutcome> {
    let mut sim = Simulation::new(&adv.initial()?, cfg, sched.name())?;
    loop {
        sim.process_instant(sched)?;
        let injected = adv.observe(&sim)?;
        if !injected.is_empty() {
            for t in injected {
                sim.inject(t)?;
            }
            sim.process_instant(sched)?;
        }
        if sim.is_finished() {
            break;
        }
        let next = sim.next_event_time().ok_or_else(|| {
            Error::Contract(format!("stalled at t={} with unfinished tasks", sim.now()))
        })?;
        sim.advance_to(next)?;
    }
    Ok(DuelOutcome {
        tap: sim.tap(),
        trace: sim.into_trace(),
        triggered_at: adv.triggered_at(),
        inconclusive: adv.inconclusive(),
    })
}

/// Golden-ratio adversary: a single task `(phi, p)`; if the scheduler
/// starts it in parallel at `t0 < 1/phi`, `p - 1` unparallelizable tasks
/// of serial work `phi - t0` arrive at once.
#[derive(Debug, Clone)]
pub struct AdvGolden {
    p: usize,
    fired: Option<Rational>,
}

impl AdvGolden {
    pub fn new(p: usize) -> Self {
        AdvGolden { p, fired: None }
    }
}

impl Adversary for AdvGolden {
    fn name(&self) -> String {
        "adv-golden".into()
    }

    fn initial(&self) -> Result<Tap> {
        super::golden_seed(self.p)
    }

    fn observe(&mut self, sim: &Simulation) -> Result<Vec<Task>> {
        if self.fired.is_some() {
            return Ok(vec![]);
        }
        let first = sim.trace().decisions.get(&0).and_then(|d| d.first());
        let t0 = match first {
            Some(r) if r.decision == Decision::Parallel && r.time < phi_hat().recip() => r.time.clone(),
            _ => return Ok(vec![]),
        };
        self.fired = Some(t0.clone());
        let sigma = phi_hat() - &t0;
        let pi = &sigma * Rational::from(self.p);
        let at = sim.now().clone().max(t0);
        let base = sim.next_id();
        Ok((0..self.p - 1)
            .map(|k| Task::new(base + k, sigma.clone(), pi.clone(), at.clone()))
            .collect())
    }

    fn triggered_at(&self) -> Option<Rational> {
        self.fired.clone()
    }
}

/// Adversary against non-preemptive schedulers: runs `probe` and, at the
/// first instant every busy task still has at least one unit of work left
/// while the busy processor count is the largest seen so far, releases
/// `ceil(R h)` tiny tasks, `h` being the probe's response-time lower bound.
#[derive(Debug, Clone)]
pub struct AdvNonpreemptive {
    r: usize,
    probe: Tap,
    h: Rational,
    max_busy: Rational,
    fired: Option<Rational>,
}

impl AdvNonpreemptive {
    pub fn new(r: usize, probe: Tap) -> Result<Self> {
        let h = opt_trt_lower(&probe);
        if !h.is_positive() {
            return Err(Error::InvalidArgument("probe has no response time to amplify".into()));
        }
        Ok(AdvNonpreemptive { r, probe, h, max_busy: Rational::zero(), fired: None })
    }

    /// Work of each injected task.
    pub fn tiny() -> Rational {
        Rational::new(1, 1000)
    }

    pub fn injections(&self) -> usize {
        (&self.h * Rational::from(self.r)).ceil().to_i64().unwrap_or(0) as usize
    }
}

impl Adversary for AdvNonpreemptive {
    fn name(&self) -> String {
        format!("adv-nonpreemptive-{}", self.r)
    }

    fn initial(&self) -> Result<Tap> {
        Ok(self.probe.clone())
    }

    fn observe(&mut self, sim: &Simulation) -> Result<Vec<Task>> {
        if self.r == 0 || self.fired.is_some() {
            return Ok(vec![]);
        }
        let alloc = sim.alloc();
        let busy: Rational = alloc.values().sum();
        if alloc.is_empty() || busy < self.max_busy {
            return Ok(vec![]);
        }
        self.max_busy = busy;
        let long = alloc.keys().all(|id| {
            matches!(sim.phase(*id), Some(Phase::Running { remaining, .. }) if *remaining >= Rational::one())
        });
        if !long {
            return Ok(vec![]);
        }
        let now = sim.now().clone();
        self.fired = Some(now.clone());
        let base = sim.next_id();
        Ok((0..self.injections())
            .map(|k| Task::new(base + k, Self::tiny(), Self::tiny(), now.clone()))
            .collect())
    }

    fn triggered_at(&self) -> Option<Rational> {
        self.fired.clone()
    }

    fn inconclusive(&self) -> bool {
        self.r > 0 && self.fired.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched_awake::MwfUniform;
    use crate::sched_mrt::{Equi, RigidParallel};
    use crate::rational::q;

    #[test]
    fn serial_start_gets_no_injection() {
        let mut adv = AdvGolden::new(4);
        let out = duel(&mut adv, &mut MwfUniform::all_serial(), EngineConfig::new(4)).unwrap();
        assert_eq!(out.tap.len(), 1);
        assert_eq!(out.trace.completions[&0], phi_hat());
    }

    #[test]
    fn immediate_parallel_start_is_punished() {
        let mut adv = AdvGolden::new(4);
        let out = duel(&mut adv, &mut MwfUniform::all_parallel(), EngineConfig::new(4)).unwrap();
        assert_eq!(out.tap.len(), 4);
        assert_eq!(out.triggered_at, Some(q(0, 1)));
        assert!(out.tap.tasks()[1..].iter().all(|t| t.sigma == phi_hat()));
    }

    fn probe(p: usize) -> Tap {
        Tap::new(p, vec![Task::new(0, q(1, 1), Rational::from(p), q(0, 1))]).unwrap()
    }

    #[test]
    fn rigid_baseline_makes_tiny_tasks_wait() {
        let mut adv = AdvNonpreemptive::new(10, probe(4)).unwrap();
        let out = duel(&mut adv, &mut RigidParallel::default(), EngineConfig::new(4)).unwrap();
        assert_eq!(out.tap.len(), 11);
        assert_eq!(out.triggered_at, Some(q(0, 1)));
        assert!(out.tap.tasks()[1..].iter().all(|t| out.trace.completions[&t.id] > q(1, 1)));
    }

    #[test]
    fn equi_lets_tiny_tasks_through() {
        let mut adv = AdvNonpreemptive::new(10, probe(4)).unwrap();
        let out = duel(&mut adv, &mut Equi, EngineConfig::new(4)).unwrap();
        assert!(out.tap.tasks()[1..].iter().all(|t| out.trace.completions[&t.id] < q(1, 100)));
    }

    #[test]
    fn zero_amplification_injects_nothing() {
        let mut adv = AdvNonpreemptive::new(0, probe(4)).unwrap();
        let out = duel(&mut adv, &mut Equi, EngineConfig::new(4)).unwrap();
        assert_eq!(out.tap.len(), 1);
        assert!(!out.inconclusive);
    }
}
