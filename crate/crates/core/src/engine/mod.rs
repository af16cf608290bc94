//! Fluid event-driven simulation engine.

mod sim;
mod trace;
mod validate;

pub use sim::{simulate, Ctx, EngineConfig, Phase, Scheduler, SimState, Simulation};
pub use trace::{
    Allocation, Annotation, Cancellation, DecisionRecord, Note, PoolKind, Slice, TaskMode, Trace,
};
pub use validate::{validate_trace, Violation, ViolationKind};
