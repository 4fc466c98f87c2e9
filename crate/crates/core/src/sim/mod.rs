//! Closed-loop simulation: reference trajectories, measurement corruption,
//! the control/plant loop and run logs.

pub mod engine;
pub mod log;
pub mod measurement;
pub mod summary;
pub mod trajectory;

pub use engine::{run_scenario, run_scenario_partial};
pub use log::{Event, EventKind, LogRow, RunLog, RunStatus, CSV_HEADER};
pub use measurement::{inject_measurement, MeasurementModel, Sensor};
pub use summary::{summarize, Metrics};
pub use trajectory::{trajectory_tanh_s, ReferenceTrajectory, Trajectory};
