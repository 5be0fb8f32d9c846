//! Physics layer for simulation-ready 3D assets.
//!
//! - [`assets`]: the per-point asset model (`.sra` files), normalization and
//!   label/color propagation, plus the fixed-arity material feature encoding.
//! - [`constitutive`]: neo-Hookean and StVK elasticity with identity, von Mises
//!   (optionally softening) and Drucker-Prager return mappings.
//! - [`mpm`]: an explicit MLS-MPM engine with APIC transfers where every
//!   particle carries its own material.
//! - [`scenarios`]: the drop / throw / tilt / drag / wind test scenarios.
//! - [`metrics`]: Chamfer, Sim-CD, IoU, F-score, material errors and z-score
//!   calibration.

pub mod assets;
pub mod constitutive;
pub mod metrics;
pub mod mpm;
pub mod scenarios;
pub mod spatial;

pub use assets::{BehaviorType, MaterialParams, SimReadyAsset};
pub use mpm::{SimConfig, Trajectory};
pub use scenarios::ScenarioSpec;
