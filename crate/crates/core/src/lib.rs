//! Feedback-driven phase training for distributed energy beamforming.
//!
//! Energy transmitters (ETs) align their carrier phases at an energy receiver
//! (ER) using a few bits of power feedback per probing window.

// `!(x > 0.0)` is used deliberately so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod bounds;
pub mod config;
pub mod error;
pub mod lab;
pub mod phasor;
pub mod protocols;

pub use adapt::{AdaptationSession, Algorithm, Feedback, IntervalOutcome, ProbeLayout, WorkingArc};
pub use error::{Error, Result};
pub use phasor::{LinkChannel, PhaseAssignment, RolePartition, SplitPower, SystemConfig};
pub use protocols::{ParallelPlan, ProtocolRun, RppPlan, SequentialPlan};
