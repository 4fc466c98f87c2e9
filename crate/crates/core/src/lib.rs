//! Robust sliding-mode 3D trajectory tracking for an underactuated airship.
//!
//! The crate is organised bottom-up:
//!
//! * [`so3`] rotation-group primitives and exact attitude integration,
//! * [`dynamics`] 6-DOF rigid-body state propagation with pluggable plants,
//! * [`aux_error`] the auxiliary tracking error `(pe, ke, oe)`, its rate
//!   factorisation and singularity analysis,
//! * [`controller`] the sliding surface, switching functions and control law,
//! * [`allocation`] mapping of the body wrench onto four tilting engines,
//! * [`sim`] closed-loop orchestration, measurement corruption and run logs.
//!
//! The vehicle has no lateral (body `y`) force. The control law is built so
//! that the second wrench component is identically zero.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod aux_error;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod sim;
pub mod so3;

pub use allocation::{EngineCommand, EngineLayout, ThrustCurve};
pub use aux_error::{AuxError, SingularLine, TrackingError, XiMatrix};
pub use config::ScenarioConfig;
pub use controller::{ControllerParams, SlidingState, Switching};
pub use dynamics::{DynamicsModel, SimplifiedPlant, VehicleState};
pub use error::{Error, Result};
pub use so3::{Rotation, Vec3, Vec6};
