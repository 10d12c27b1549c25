//! Linearizability testing: history recording, an exhaustive checker
//! against [`crate::oracle`], and a deterministic scheduler that drives the
//! structures through chosen interleavings of their pause points.
//!
//! Scheduled runs need the `sched` feature; without it pause points are
//! compiled out and every run is sequential.

pub mod checker;
pub mod history;
pub mod scheduler;
pub mod subject;

pub use checker::{check, check_operations, CheckError, Verdict, MAX_OPS};
pub use history::{Clock, Event, EventKind, History, HistoryError, Operation, ThreadLog};
pub use scheduler::{
    explore, run_schedule, run_with, Decider, Decision, ExploreConfig, Exploration, Program, Rejection, RunOutcome,
    Schedule, ScheduleError, Sequential, Step,
};
pub use subject::Subject;
