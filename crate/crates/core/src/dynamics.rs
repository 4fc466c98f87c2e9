//! Vehicle state propagation.
//!
//! Kinematics `p' = R nu`, `R' = R S(omega)` and dynamics
//! `gamma' = M^-1 (tau - f(gamma, R))` with a pluggable residual `f`.
//! The default plant is the simplified airship model
//! `f = C(gamma) gamma + C_p diag(sign gamma) gamma^2`.

use nalgebra::{Cholesky, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{skew, Rotation, Vec3, Vec6};

pub type Mat6 = Matrix6<f64>;

/// Pose of the body frame in the base frame plus body-frame twist
/// `gamma = [nu; omega]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec3,
    pub attitude: Rotation,
    pub twist: Vec6,
}

impl VehicleState {
    pub fn at_rest(position: Vec3, attitude: Rotation) -> Self {
        VehicleState {
            position,
            attitude,
            twist: Vec6::zeros(),
        }
    }

    #[inline]
    pub fn linear_velocity(&self) -> Vec3 {
        self.twist.fixed_rows::<3>(0).into_owned()
    }

    #[inline]
    pub fn angular_velocity(&self) -> Vec3 {
        self.twist.fixed_rows::<3>(3).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.twist.iter().all(|x| x.is_finite())
            && self.attitude.matrix().iter().all(|x| x.is_finite())
    }

    /// Kinetic energy `1/2 gamma^T M gamma`.
    pub fn kinetic_energy(&self, mass: &Mat6) -> f64 {
        0.5 * self.twist.dot(&(mass * self.twist))
    }
}

/// Time derivative of a [`VehicleState`]. The attitude part is the body
/// angular rate, i.e. `R' = R S(attitude_rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub position_rate: Vec3,
    pub attitude_rate: Vec3,
    pub twist_rate: Vec6,
}

/// Rigid-body plant `M gamma' = tau - f(gamma, R)`.
pub trait DynamicsModel: Send + Sync {
    fn mass_matrix(&self) -> &Mat6;

    fn mass_inverse(&self) -> &Mat6;

    /// Residual force/torque `f(gamma, R)`.
    fn residual(&self, twist: &Vec6, attitude: &Rotation) -> Vec6;
}

fn checked_inverse(mass: &Mat6) -> Result<Mat6> {
    let asym = (mass - mass.transpose()).norm();
    if !mass.iter().all(|x| x.is_finite()) || asym > 1e-12 * mass.norm().max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = Cholesky::new(*mass).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}

/// sign with `sign(0) = 0`.
#[inline]
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Coriolis matrix of the simplified model:
///
/// ```text
/// C(gamma) = [    0      -S(nu)   ]
///            [ -S(nu)  -S(omega)  ]
/// ```
pub fn coriolis_matrix(twist: &Vec6) -> Mat6 {
    let nu = twist.fixed_rows::<3>(0).into_owned();
    let omega = twist.fixed_rows::<3>(3).into_owned();
    let s_nu = -skew(&nu);
    let mut c = Mat6::zeros();
    c.fixed_view_mut::<3, 3>(0, 3).copy_from(&s_nu);
    c.fixed_view_mut::<3, 3>(3, 0).copy_from(&s_nu);
    c.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-skew(&omega)));
    c
}

/// Quadratic damping force `-C_p diag(sign gamma) gamma^2`. It opposes the
/// motion in every component.
pub fn quadratic_damping(twist: &Vec6, coefficients: &Vec6) -> Vec6 {
    Vec6::from_fn(|i, _| -coefficients[i] * sign0(twist[i]) * twist[i] * twist[i])
}

/// The simplified airship dynamics used for validation.
#[derive(Debug, Clone)]
pub struct SimplifiedPlant {
    mass: Mat6,
    mass_inv: Mat6,
    damping: Vec6,
}

impl SimplifiedPlant {
    pub fn new(mass: Mat6, damping: Vec6) -> Result<Self> {
        let mass_inv = checked_inverse(&mass)?;
        if damping.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(
                "damping coefficients must be finite and non-negative".into(),
            ));
        }
        Ok(SimplifiedPlant {
            mass,
            mass_inv,
            damping,
        })
    }

    /// `M = C_p = 1`.
    pub fn unit() -> Self {
        SimplifiedPlant {
            mass: Mat6::identity(),
            mass_inv: Mat6::identity(),
            damping: Vec6::repeat(1.0),
        }
    }

    pub fn damping(&self) -> &Vec6 {
        &self.damping
    }
}

impl DynamicsModel for SimplifiedPlant {
    fn mass_matrix(&self) -> &Mat6 {
        &self.mass
    }

    fn mass_inverse(&self) -> &Mat6 {
        &self.mass_inv
    }

    fn residual(&self, twist: &Vec6, _attitude: &Rotation) -> Vec6 {
        coriolis_matrix(twist) * twist - quadratic_damping(twist, &self.damping)
    }
}

type CoriolisFn = Box<dyn Fn(&Vec6) -> Mat6 + Send + Sync>;
type DampingFn = Box<dyn Fn(&Vec6) -> Vec6 + Send + Sync>;
type RestoringFn = Box<dyn Fn(&Rotation) -> Vec6 + Send + Sync>;

/// Plant with user-supplied `C(gamma)`, `D(gamma)` and `G(R)` so that
/// `f = C(gamma) gamma + D(gamma) + G(R)`.
pub struct GenericPlant {
    mass: Mat6,
    mass_inv: Mat6,
    coriolis: CoriolisFn,
    damping: DampingFn,
    restoring: RestoringFn,
}

impl GenericPlant {
    pub fn new(
        mass: Mat6,
        coriolis: impl Fn(&Vec6) -> Mat6 + Send + Sync + 'static,
        damping: impl Fn(&Vec6) -> Vec6 + Send + Sync + 'static,
        restoring: impl Fn(&Rotation) -> Vec6 + Send + Sync + 'static,
    ) -> Result<Self> {
        Ok(GenericPlant {
            mass_inv: checked_inverse(&mass)?,
            mass,
            coriolis: Box::new(coriolis),
            damping: Box::new(damping),
            restoring: Box::new(restoring),
        })
    }
}

impl DynamicsModel for GenericPlant {
    fn mass_matrix(&self) -> &Mat6 {
        &self.mass
    }

    fn mass_inverse(&self) -> &Mat6 {
        &self.mass_inv
    }

    fn residual(&self, twist: &Vec6, attitude: &Rotation) -> Vec6 {
        (self.coriolis)(twist) * twist + (self.damping)(twist) + (self.restoring)(attitude)
    }
}

pub fn state_derivative(
    state: &VehicleState,
    wrench: &Vec6,
    plant: &dyn DynamicsModel,
) -> StateDerivative {
    let f = plant.residual(&state.twist, &state.attitude);
    StateDerivative {
        position_rate: state.attitude.apply(&state.linear_velocity()),
        attitude_rate: state.angular_velocity(),
        twist_rate: plant.mass_inverse() * (wrench - f),
    }
}

/// Inverse of the right-trivialised `dexp`, truncated after the second
/// commutator (enough for a fourth-order Munthe-Kaas scheme).
#[inline]
fn dexp_inv(u: &Vec3, w: &Vec3) -> Vec3 {
    let uw = u.cross(w);
    w + uw * 0.5 + u.cross(&uw) / 12.0
}

fn displaced(state: &VehicleState, dp: &Vec3, du: &Vec3, dgamma: &Vec6) -> VehicleState {
    VehicleState {
        position: state.position + dp,
        attitude: state.attitude.compose(&Rotation::exp(du)),
        twist: state.twist + dgamma,
    }
}

/// One fixed step of a fourth-order Runge-Kutta-Munthe-Kaas integrator with
/// the wrench held constant. Position and twist follow classical RK4; the
/// attitude increment lives in so(3) and is mapped back with `exp`.
///
/// # Panics
///
/// If `dt` is outside `(0, 0.1]`.
pub fn step(
    state: &VehicleState,
    wrench: &Vec6,
    plant: &dyn DynamicsModel,
    dt: f64,
) -> VehicleState {
    assert!(dt > 0.0 && dt <= 0.1, "step size {dt} outside (0, 0.1]");
    let half = 0.5 * dt;

    let d1 = state_derivative(state, wrench, plant);
    let u1 = d1.attitude_rate;

    let s2 = displaced(
        state,
        &(d1.position_rate * half),
        &(u1 * half),
        &(d1.twist_rate * half),
    );
    let d2 = state_derivative(&s2, wrench, plant);
    let u2 = dexp_inv(&(u1 * half), &d2.attitude_rate);

    let s3 = displaced(
        state,
        &(d2.position_rate * half),
        &(u2 * half),
        &(d2.twist_rate * half),
    );
    let d3 = state_derivative(&s3, wrench, plant);
    let u3 = dexp_inv(&(u2 * half), &d3.attitude_rate);

    let s4 = displaced(
        state,
        &(d3.position_rate * dt),
        &(u3 * dt),
        &(d3.twist_rate * dt),
    );
    let d4 = state_derivative(&s4, wrench, plant);
    let u4 = dexp_inv(&(u3 * dt), &d4.attitude_rate);

    let w = dt / 6.0;
    displaced(
        state,
        &((d1.position_rate + d2.position_rate * 2.0 + d3.position_rate * 2.0 + d4.position_rate)
            * w),
        &((u1 + u2 * 2.0 + u3 * 2.0 + u4) * w),
        &((d1.twist_rate + d2.twist_rate * 2.0 + d3.twist_rate * 2.0 + d4.twist_rate) * w),
    )
}
