//! Anytime producer/consumer runtime.
//!
//! A producer runs on its own thread and publishes results into a
//! [`ResultSlot`]. Consumers read the slot at any time and steer the producer
//! through a FIFO mailbox (abort, reset, ping, user messages) that the
//! producer drains whenever it calls [`ProducerContext::check_status`].
//!
//! In lockstep mode the producer parks at every status check until the
//! consumer calls [`ProcessHandle::advance`], which makes interrupt timing
//! reproducible.

mod process;
mod registry;
mod slot;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use process::{start_process, Parked, ProcessHandle, ProducerContext};
pub use registry::Apc;
pub use slot::{Envelope, ResultSlot, SlotValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProcessId(pub u64);

impl ProcessId {
    pub(crate) fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        ProcessId(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Running,
    Quiescent,
    Aborted,
    Resetting,
}

impl Status {
    /// The permitted status transitions.
    pub fn can_transition(self, to: Status) -> bool {
        use Status::*;
        matches!(
            (self, to),
            (Running, Quiescent)
                | (Running, Aborted)
                | (Running, Resetting)
                | (Resetting, Running)
                | (Quiescent, Aborted)
                | (Quiescent, Resetting)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControlMessage<I> {
    Abort,
    Reset(I),
    Ping,
    UserHook { tag: String, payload: String },
}

/// What a producer must do after a status check.
#[derive(Clone, Debug, PartialEq)]
pub enum Directive<I> {
    Continue,
    StopNow,
    ResetWith(I),
}

/// How a producer's `run` ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Completion<I> {
    /// Work finished; the process goes quiescent and keeps serving reads.
    Done,
    /// An abort was observed.
    Stopped,
    /// A reset was observed; run again on the new input.
    Reset(I),
}

pub trait Producer: Send + 'static {
    type Input: Send + 'static;
    type Output: Send + Sync + 'static;

    fn run(
        &mut self,
        input: Self::Input,
        ctx: &mut ProducerContext<Self::Input, Self::Output>,
    ) -> Completion<Self::Input>;

    /// Called before re-running on a reset.
    fn cleanup(&mut self) {}
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApcError {
    #[error("unknown process {0}")]
    UnknownProcess(ProcessId),
    #[error("process {0} has been aborted")]
    Aborted(ProcessId),
    #[error("could not start process: {0}")]
    StartFailed(String),
}

#[derive(Clone, Debug, Default)]
pub struct StartOptions {
    pub lockstep: bool,
    pub name: Option<String>,
}

impl StartOptions {
    pub fn lockstep() -> Self {
        StartOptions {
            lockstep: true,
            name: None,
        }
    }
}

/// Monotone logical clock shared by a process and its consumers. Messages
/// are stamped when enqueued and producers stamp their own events, so
/// "what happened after what" can be read off without wall-clock time.
#[derive(Debug, Default)]
pub struct EventClock(AtomicU64);

impl EventClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tick(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst) + 1
    }

    pub fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_relation() {
        use Status::*;
        let all = [Running, Quiescent, Aborted, Resetting];
        let allowed: Vec<(Status, Status)> = all
            .iter()
            .flat_map(|&a| all.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| a.can_transition(b))
            .collect();
        assert_eq!(allowed.len(), 6);
        assert!(!Aborted.can_transition(Running));
        assert!(!Resetting.can_transition(Aborted));
    }

    #[test]
    fn clock_is_monotone() {
        let c = EventClock::new();
        assert_eq!(c.now(), 0);
        assert_eq!(c.tick(), 1);
        assert_eq!(c.tick(), 2);
        assert_eq!(c.now(), 2);
    }
}
