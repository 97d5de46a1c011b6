//! Qutrit-level simulator and verification suite for transition-composite
//! conditional gates.
//!
//! The crate composes conditional operations (the CU family, SWAP family,
//! CCU, and a four-qudit comparator) from two-level transition pulses and
//! internal rotations, checks them against closed-form matrices, schedules
//! circuits into moments for depth and decoherence accounting, and provides
//! state/process tomography with a feedback-calibration loop.

pub mod circuit;
pub mod composer;
pub mod gates;
pub mod linalg;
pub mod noise;
pub mod qudit;
pub mod reference;
pub mod tomography;
