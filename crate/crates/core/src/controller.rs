//! Sliding-mode control law.
//!
//! With `sigma = e' + K (e - delta)` the wrench is
//! `tau = -M_hat P Xi^T sgn(sigma)`. The second diagonal entry of `P` is
//! zero and the second row of `M_hat` is `[0 beta 0 0 0 0]`, so the lateral
//! force `tau_2` is identically zero for every input. The law only reads
//! `M_hat`, `P`, `Xi` and `sigma`; the true plant never enters it.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::aux_error::{self, AuxError, TrackingError, XiMatrix};
use crate::dynamics::{state_derivative, DynamicsModel, Mat6, VehicleState};
use crate::error::{Error, Result};
use crate::sim::trajectory::Trajectory;
use crate::so3::{Rotation, Vec3, Vec6};

/// Added to the sigmoid denominator so a vanishing boundary layer cannot
/// divide by zero.
pub const BOUNDARY_LAYER_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Switching {
    Sign,
    #[default]
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    /// Diagonal of `K` (1/s).
    pub gains: Vec3,
    /// Offset `delta = (delta_p, delta_k, delta_o)`.
    pub offset: Vec3,
    /// Diagonal of `P`; the second entry must be zero.
    pub p_gains: Vec6,
    /// Estimated mass matrix `M_hat`.
    pub mass_estimate: Mat6,
    /// Sigmoid widths `(eps_p, eps_k, eps_o)`.
    pub epsilon: Vec3,
    /// Reaching-rate margin used when sizing gains.
    pub mu: f64,
    pub switching: Switching,
}

impl ControllerParams {
    /// Gains of the simplified-model simulation study:
    /// `K = 0.1`, `delta = (0.2, 0.01, 0.01)`, `P = 5 * 1^`, `M_hat = 10 M`.
    pub fn simulation_study(mass: &Mat6) -> Self {
        let mut p = Vec6::repeat(5.0);
        p[1] = 0.0;
        ControllerParams {
            gains: Vec3::repeat(0.1),
            offset: Vec3::new(0.2, 0.01, 0.01),
            p_gains: p,
            mass_estimate: mass * 10.0,
            epsilon: Vec3::repeat(1.0),
            mu: 0.01,
            switching: Switching::Sigmoid,
        }
    }

    /// Every violated admissibility condition, as human-readable messages.
    /// An empty list means the parameters are admissible for `plant_mass`.
    pub fn violations(&self, plant_mass: &Mat6) -> Vec<String> {
        let mut out = Vec::new();
        if self.gains.iter().any(|k| !(*k > 0.0)) {
            out.push(format!(
                "gain matrix K must be positive definite: diag = [{}, {}, {}]",
                self.gains[0], self.gains[1], self.gains[2]
            ));
        }
        let d = &self.offset;
        if !(d[0] > 0.0) || !(d[1] > 0.0 && d[1] < 1.0) || !(d[2] > 0.0 && d[2] < 1.0) {
            out.push(format!(
                "offset delta = [{}, {}, {}] must lie in (0, inf) x (0, 1) x (0, 1)",
                d[0], d[1], d[2]
            ));
        }
        if self.p_gains[1] != 0.0 {
            out.push(format!(
                "second diagonal entry of P must be exactly 0 (no lateral thrust), got {}",
                self.p_gains[1]
            ));
        }
        for i in [0, 2, 3, 4, 5] {
            if !(self.p_gains[i] > 0.0) {
                out.push(format!("P[{i}] = {} must be positive", self.p_gains[i]));
            }
        }
        if self.epsilon.iter().any(|e| !(*e > 0.0)) {
            out.push("sigmoid widths epsilon must be positive".into());
        }
        if !(self.mu > 0.0) {
            out.push(format!("reaching margin mu = {} must be positive", self.mu));
        }
        match validate_mass_estimate(&self.mass_estimate, plant_mass) {
            Ok(lambda_e) if lambda_e < 0.0 => out.push(format!(
                "mass estimate violates min eig(M^-1 M_hat - 1) >= 0: lambda_e = {lambda_e:.6}"
            )),
            Ok(_) => {}
            Err(e) => out.push(e.to_string()),
        }
        if self.mass_estimate.determinant().abs() < 1e-12 {
            out.push("mass estimate M_hat must be invertible".into());
        }
        out
    }

    pub fn validate(&self, plant_mass: &Mat6) -> Result<()> {
        match self.violations(plant_mass).into_iter().next() {
            None => Ok(()),
            Some(msg) => Err(Error::InvalidParameter(msg)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingState {
    pub sigma: Vec3,
    pub e: AuxError,
    pub edot: Vec3,
}

/// `sigma = e' + K (e - delta)`.
pub fn sliding_variable(e: &AuxError, edot: &Vec3, params: &ControllerParams) -> Vec3 {
    edot + params.gains.component_mul(&(e.as_vec() - params.offset))
}

/// Componentwise switching term. `Sign` uses `sign(0) = 0`; `Sigmoid` uses
/// `z / (|z| + eps_n |e_n|)`, a boundary layer that shrinks with the
/// matching auxiliary error.
pub fn switching_vector(sigma: &Vec3, e: &AuxError, params: &ControllerParams) -> Vec3 {
    match params.switching {
        Switching::Sign => sigma.map(crate::dynamics::sign0),
        Switching::Sigmoid => {
            let ev = e.as_vec();
            Vec3::from_fn(|i, _| {
                let layer = params.epsilon[i] * ev[i].abs();
                sigma[i] / (sigma[i].abs() + layer + BOUNDARY_LAYER_FLOOR)
            })
        }
    }
}

pub fn control_law(xi: &XiMatrix, sigma: &Vec3, e: &AuxError, params: &ControllerParams) -> Vec6 {
    let s = switching_vector(sigma, e, params);
    let shaped = (xi.m.transpose() * s).component_mul(&params.p_gains);
    -(params.mass_estimate * shaped)
}

/// `lambda_e = min eig(M^-1 M_hat - 1)`. Fails when the second row of
/// `M_hat` is not of the form `[0 beta 0 0 0 0]`.
pub fn validate_mass_estimate(mass_estimate: &Mat6, mass: &Mat6) -> Result<f64> {
    let row = mass_estimate.row(1);
    if (0..6).any(|j| j != 1 && row[j] != 0.0) {
        return Err(Error::ShapeViolation(format!(
            "second row of M_hat must be [0 beta 0 0 0 0], got [{}]",
            row.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )));
    }
    let chol = nalgebra::Cholesky::new(*mass).ok_or(Error::NotPositiveDefinite)?;
    let symmetric =
        (mass_estimate - mass_estimate.transpose()).norm() <= 1e-12 * mass_estimate.norm().max(1.0);
    let min = if symmetric {
        // M^-1 M_hat is similar to L^-1 M_hat L^-T
        let l_inv = chol.l().try_inverse().ok_or(Error::NotPositiveDefinite)?;
        let sym = l_inv * mass_estimate * l_inv.transpose();
        SymmetricEigen::new((sym + sym.transpose()) * 0.5)
            .eigenvalues
            .min()
    } else {
        let prod = chol.solve(mass_estimate);
        prod.complex_eigenvalues()
            .iter()
            .map(|c| c.re)
            .fold(f64::INFINITY, f64::min)
    };
    Ok(min - 1.0)
}

/// Smallest admissible `min diag(P_hat)` for a disturbance bound `|g|`:
/// `lambda_rho >= (mu + |g|) / lambda_0`.
pub fn required_gain(g_bound: f64, lambda0: f64, mu: f64) -> Result<f64> {
    if !(lambda0 > 0.0) {
        return Err(Error::SingularLambda0(lambda0));
    }
    Ok((mu + g_bound) / lambda0)
}

/// Tracking error, auxiliary error, rate factorisation and sliding state of
/// the true vehicle state at time `t`.
pub fn evaluate(
    state: &VehicleState,
    t: f64,
    params: &ControllerParams,
    reference: &dyn Trajectory,
) -> Result<(TrackingError, XiMatrix, SlidingState)> {
    let te = aux_error::tracking_error(state, &reference.position(t));
    let e = aux_error::aux_error(&te)?;
    let xi = aux_error::xi_matrix(&te, &e)?;
    let edot = aux_error::edot(&xi, state, &reference.velocity(t));
    let sigma = sliding_variable(&e, &edot, params);
    Ok((te, xi, SlidingState { sigma, e, edot }))
}

const FLOW_STEP: f64 = 1e-6;

/// Central difference of `sigma` along the flow generated by `wrench`.
fn sigma_rate(
    state: &VehicleState,
    t: f64,
    wrench: &Vec6,
    plant: &dyn DynamicsModel,
    params: &ControllerParams,
    reference: &dyn Trajectory,
) -> Result<Vec3> {
    let d = state_derivative(state, wrench, plant);
    let shifted = |h: f64| VehicleState {
        position: state.position + d.position_rate * h,
        attitude: state
            .attitude
            .compose(&Rotation::exp(&(d.attitude_rate * h))),
        twist: state.twist + d.twist_rate * h,
    };
    let (_, _, plus) = evaluate(&shifted(FLOW_STEP), t + FLOW_STEP, params, reference)?;
    let (_, _, minus) = evaluate(&shifted(-FLOW_STEP), t - FLOW_STEP, params, reference)?;
    Ok((plus.sigma - minus.sigma) / (2.0 * FLOW_STEP))
}

/// Everything in `sigma'` that the control law does not produce:
/// `g = sigma' - Xi M^-1 tau`, i.e. `sigma'` with the wrench removed.
pub fn disturbance(
    state: &VehicleState,
    t: f64,
    plant: &dyn DynamicsModel,
    params: &ControllerParams,
    reference: &dyn Trajectory,
) -> Result<Vec3> {
    sigma_rate(state, t, &Vec6::zeros(), plant, params, reference)
}

/// `V' = sigma^T sigma'` for `V = |sigma|^2 / 2` along the closed loop, with
/// `sigma'` taken by finite differences.
pub fn lyapunov_rate(
    state: &VehicleState,
    t: f64,
    plant: &dyn DynamicsModel,
    params: &ControllerParams,
    reference: &dyn Trajectory,
) -> Result<f64> {
    let (_, xi, ss) = evaluate(state, t, params, reference)?;
    let tau = control_law(&xi, &ss.sigma, &ss.e, params);
    let rate = sigma_rate(state, t, &tau, plant, params, reference)?;
    Ok(ss.sigma.dot(&rate))
}
