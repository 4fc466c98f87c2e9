//! Reference position trajectories with analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::so3::Vec3;

pub trait Trajectory: Send + Sync {
    fn position(&self, t: f64) -> Vec3;
    fn velocity(&self, t: f64) -> Vec3;
    fn acceleration(&self, t: f64) -> Vec3;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceTrajectory {
    /// `p_d = [speed * t, 0, 0]`.
    LineX { speed: f64 },
    /// Forward ramp with a smooth lateral S-step and a slow vertical dip,
    /// see [`trajectory_tanh_s`].
    TanhS,
    /// `p_d = start + velocity t + amplitude * (sin(frequency t + phase) - sin(phase))`,
    /// componentwise.
    Custom {
        start: [f64; 3],
        #[serde(default)]
        velocity: [f64; 3],
        #[serde(default)]
        amplitude: [f64; 3],
        #[serde(default)]
        frequency: [f64; 3],
        #[serde(default)]
        phase: [f64; 3],
    },
}

impl ReferenceTrajectory {
    /// A stationary target.
    pub fn fixed(position: Vec3) -> Self {
        ReferenceTrajectory::Custom {
            start: position.into(),
            velocity: [0.0; 3],
            amplitude: [0.0; 3],
            frequency: [0.0; 3],
            phase: [0.0; 3],
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            ReferenceTrajectory::LineX { speed } => speed.is_finite(),
            ReferenceTrajectory::TanhS => true,
            ReferenceTrajectory::Custom {
                start,
                velocity,
                amplitude,
                frequency,
                phase,
            } => [start, velocity, amplitude, frequency, phase]
                .iter()
                .all(|a| a.iter().all(|x| x.is_finite())),
        }
    }
}

const TANH_X_SPEED: f64 = 0.05;
const TANH_Y_AMPLITUDE: f64 = 0.25;
const TANH_Y_RATE: f64 = 0.075;
const TANH_Y_SHIFT: f64 = 3.0;
const TANH_Z_AMPLITUDE: f64 = 0.1;
const TANH_Z_RATE: f64 = 0.0393;

/// ```text
/// x = 0.05 t
/// y = 0.25 tanh(0.075 t - 3) - 0.25 tanh(-3)
/// z = -0.1 sin(0.0393 t - pi/2) + 0.1 sin(-pi/2)
/// ```
/// Starts at the origin.
pub fn trajectory_tanh_s(t: f64) -> Vec3 {
    use std::f64::consts::FRAC_PI_2;
    Vec3::new(
        TANH_X_SPEED * t,
        TANH_Y_AMPLITUDE * (TANH_Y_RATE * t - TANH_Y_SHIFT).tanh()
            - TANH_Y_AMPLITUDE * (-TANH_Y_SHIFT).tanh(),
        -TANH_Z_AMPLITUDE * (TANH_Z_RATE * t - FRAC_PI_2).sin()
            + TANH_Z_AMPLITUDE * (-FRAC_PI_2).sin(),
    )
}

impl Trajectory for ReferenceTrajectory {
    fn position(&self, t: f64) -> Vec3 {
        match self {
            ReferenceTrajectory::LineX { speed } => Vec3::new(speed * t, 0.0, 0.0),
            ReferenceTrajectory::TanhS => trajectory_tanh_s(t),
            ReferenceTrajectory::Custom {
                start,
                velocity,
                amplitude,
                frequency,
                phase,
            } => Vec3::from_fn(|i, _| {
                start[i]
                    + velocity[i] * t
                    + amplitude[i] * ((frequency[i] * t + phase[i]).sin() - phase[i].sin())
            }),
        }
    }

    fn velocity(&self, t: f64) -> Vec3 {
        match self {
            ReferenceTrajectory::LineX { speed } => Vec3::new(*speed, 0.0, 0.0),
            ReferenceTrajectory::TanhS => {
                use std::f64::consts::FRAC_PI_2;
                let th = (TANH_Y_RATE * t - TANH_Y_SHIFT).tanh();
                Vec3::new(
                    TANH_X_SPEED,
                    TANH_Y_AMPLITUDE * TANH_Y_RATE * (1.0 - th * th),
                    -TANH_Z_AMPLITUDE * TANH_Z_RATE * (TANH_Z_RATE * t - FRAC_PI_2).cos(),
                )
            }
            ReferenceTrajectory::Custom {
                velocity,
                amplitude,
                frequency,
                phase,
                ..
            } => Vec3::from_fn(|i, _| {
                velocity[i] + amplitude[i] * frequency[i] * (frequency[i] * t + phase[i]).cos()
            }),
        }
    }

    fn acceleration(&self, t: f64) -> Vec3 {
        match self {
            ReferenceTrajectory::LineX { .. } => Vec3::zeros(),
            ReferenceTrajectory::TanhS => {
                use std::f64::consts::FRAC_PI_2;
                let th = (TANH_Y_RATE * t - TANH_Y_SHIFT).tanh();
                Vec3::new(
                    0.0,
                    -2.0 * TANH_Y_AMPLITUDE * TANH_Y_RATE * TANH_Y_RATE * th * (1.0 - th * th),
                    TANH_Z_AMPLITUDE
                        * TANH_Z_RATE
                        * TANH_Z_RATE
                        * (TANH_Z_RATE * t - FRAC_PI_2).sin(),
                )
            }
            ReferenceTrajectory::Custom {
                amplitude,
                frequency,
                phase,
                ..
            } => Vec3::from_fn(|i, _| {
                -amplitude[i] * frequency[i] * frequency[i] * (frequency[i] * t + phase[i]).sin()
            }),
        }
    }
}
