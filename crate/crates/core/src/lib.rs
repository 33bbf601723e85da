//! Many-vs-many missile engagement simulation with virtual-target guidance.
//!
//! Targets fly random lateral maneuvers. Interceptors use zero-effort-miss
//! guidance in midcourse and proportional navigation in the endgame. Their
//! midcourse aim points come either from straight-line extrapolation of the
//! targets or from virtual targets: sampled target futures clustered into one
//! representative trajectory per interceptor.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod config;
pub mod engagement;
pub mod error;
pub mod geom;
pub mod guidance;
pub mod harness;
pub mod kinematics;
pub mod maneuver;
pub mod prediction;
pub mod rng;
pub mod stats;

pub use config::{EngagementConfig, PredictionMethod};
pub use engagement::{run_engagement, RunResult};
pub use error::{Error, Result};
pub use geom::Vec2;
