//! Harmonic balance solver for forced single-degree-of-freedom oscillators
//! with superharmonic resonance tracking across force levels.

pub mod aft;
pub mod analysis;
pub mod continuation;
pub mod error;
pub mod hbm;
pub mod model;
pub mod vprnm;

pub use aft::{Aft, AftPath, AftResult, HarmonicVector};
pub use continuation::{ContinuationConfig, SolveStats, Termination};
pub use hbm::{trace_frc, Frc, FrcPoint, Hbm};
pub use vprnm::{vprnm_backbone, Backbone, BroadbandForce, Vprnm, VprnmPoint};
pub use error::{Error, Result};
pub use model::{ForceKind, ForceModel, SystemConfig};
