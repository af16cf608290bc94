//! Schedulers by name, with the engine configuration each one expects.

use crate::engine::{EngineConfig, Scheduler};
use crate::error::{Error, Result};
use crate::rational::Rational;

use crate::dtap::Turtle;
use crate::sched_awake::{Bal, GoldenAlg, MwfUniform, Unk};
use crate::sched_mrt::{BSched, CSched, Canc, ReserveRule, Equi, RigidParallel, Sss};

pub const SCHEDULERS: &[&str] = &[
    "bal",
    "bal-mutant",
    "unk",
    "mwf-all-serial",
    "mwf-all-parallel",
    "golden",
    "equi",
    "rigid-parallel",
    "sss",
    "canc",
    "bsched",
    "csched",
    "csched-par-reserve",
    "turtle",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedOptions {
    /// Work scale of the inner simulation of `csched`.
    pub inner_scale: Rational,
}

impl Default for SchedOptions {
    fn default() -> Self {
        SchedOptions { inner_scale: Rational::from(3) }
    }
}

pub fn make_scheduler(name: &str, opts: &SchedOptions) -> Result<Box<dyn Scheduler + Send>> {
    Ok(match name {
        "bal" => Box::new(Bal::new()),
        "bal-mutant" => Box::new(Bal::mutated()),
        "unk" => Box::new(Unk),
        "mwf-all-serial" => Box::new(MwfUniform::all_serial()),
        "mwf-all-parallel" => Box::new(MwfUniform::all_parallel()),
        "golden" => Box::new(GoldenAlg::default()),
        "equi" => Box::new(Equi),
        "rigid-parallel" => Box::new(RigidParallel::default()),
        "sss" => Box::new(Sss::new()),
        "canc" => Box::new(Canc::new()),
        "bsched" => Box::new(BSched::new()),
        "csched" => Box::new(CSched::with_inner_scale(opts.inner_scale.clone())),
        "csched-par-reserve" => Box::new(
            CSched::with_inner_scale(opts.inner_scale.clone()).with_reserve_rule(ReserveRule::Parallelism),
        ),
        "turtle" => Box::new(Turtle::new()),
        other => return Err(Error::UnknownScheduler(other.to_string())),
    })
}

/// Processor budget factor and cancellation each scheduler is built for.
pub fn default_requirements(name: &str) -> Result<(usize, bool)> {
    Ok(match name {
        "sss" => (2, false),
        "canc" | "bsched" => (2, true),
        "csched" | "csched-par-reserve" => (4, false),
        n if SCHEDULERS.contains(&n) => (1, false),
        other => return Err(Error::UnknownScheduler(other.to_string())),
    })
}

/// Engine configuration a scheduler is built for at `p` processors.
pub fn default_config(name: &str, p: usize) -> Result<EngineConfig> {
    let (factor, cancel) = default_requirements(name)?;
    Ok(EngineConfig::new(p).with_budget_factor(p, factor).with_cancel(cancel))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in SCHEDULERS {
            let s = make_scheduler(name, &SchedOptions::default()).unwrap();
            assert_eq!(s.name(), *name);
            default_config(name, 4).unwrap();
        }
        assert!(make_scheduler("nope", &SchedOptions::default()).is_err());
    }
}
