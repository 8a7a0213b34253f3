//! Source-side machinery of the Age Control Protocol (ACP).
//!
//! An ACP source sends timestamped status updates to a monitor and adapts its
//! update rate so that the time-average age of the freshest update at the
//! monitor stays small. This crate holds the transport-independent pieces:
//!
//! * [`age`]: reconstruction of the age and backlog processes from send and
//!   ACK events, with exact per-epoch time averages.
//! * [`ewma`]: the smoothed RTT and inter-ACK estimators.
//! * [`control`]: the epoch controller that picks INC, DEC or MDEC(γ) and
//!   turns the resulting backlog target into an update rate, plus the Lazy
//!   baseline.
//! * [`analytics`]: closed-form M/M/1 age and system time used as oracles.

pub mod age;
pub mod analytics;
pub mod control;
pub mod ewma;
pub mod time;

pub use age::{AckDisposition, AckEvent, AgeCurve, AgeError, EpochStats, SamplePath, SendRecord};
pub use control::{
    Action, Branch, ControlConfig, ControlDecision, ControlError, ControlState, GuardReference,
    RateBounds, Verdict,
};
pub use ewma::{Ewma, EwmaError, DEFAULT_ALPHA};
pub use time::Micros;
