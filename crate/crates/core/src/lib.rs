//! Simulation laboratory for the serial-or-parallel decision problem.
//!
//! Tasks carry a serial implementation (work `sigma`, one processor) and a
//! perfectly scalable parallel one (work `pi`). Schedulers pick an
//! implementation per task and share `p` processors; the engine runs them
//! in exact rational time.

pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod sched_awake;
pub mod sched_mrt;
pub mod verify;
pub mod adversary;
pub mod dtap;
pub mod rational;
pub mod registry;

pub use error::{Error, Result};
pub use model::{Decision, Tap, Task, TaskId, TaskType};
pub use rational::{q, Rational};
