//! Dual-function radar-communication waveform design.
//!
//! A unit-power space-time waveform is shaped to approach a zero-forcing
//! multiuser reference while respecting a similarity ball around an LFM chirp,
//! per-sample PAPR caps and per-target radar SINR floors. The nonconvex
//! problem is solved by alternating closed-form MVDR receive beamformers with
//! an augmented-Lagrangian solve of the waveform QCQP.

pub mod al_solver;
pub mod array_model;
pub mod bccd;
pub mod beamformer;
pub mod bfgs;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod oracles;
pub mod qcqp;
pub mod scenario;
pub mod signals;

pub use error::{DripError, Result};
pub use scenario::{Constellation, ScenarioConfig};
