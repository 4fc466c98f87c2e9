//! Auxiliary tracking error.
//!
//! The body-frame position error `e^a = R^a_b (p_d - p)` is folded into a
//! triple `e = (pe, ke, oe)`:
//!
//! * `pe = |e^a|` is the distance to the target,
//! * `ke = sqrt(1 - xe^a / pe)` measures how far the line of sight is from
//!   the body `x` axis,
//! * `oe = sqrt(1 - ye^j / pe^j)` measures how far the horizontal normal
//!   `e^j = k x e^a` is from the body `y` axis (`k` is the base vertical
//!   expressed in the body frame).
//!
//! Keeping `ke` small bounds the uncontrolled lateral error `ye^a` through
//! the cone identity implemented in [`cone_residual`].

use nalgebra::{Matrix3, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::error::{Error, Result};
use crate::so3::{skew, Vec3, Vec6};

pub type Mat3x6 = SMatrix<f64, 3, 6>;

/// Below this distance the auxiliary error is undefined.
pub const MIN_POSITION_ERROR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    /// `e^a`, position error in the body frame (m).
    pub ea: Vec3,
    /// `e^j = S(k) e^a` (m).
    pub ej: Vec3,
    /// `|e^j|` (m).
    pub pej: f64,
    /// Base-frame vertical axis expressed in the body frame (third column of
    /// `R^a_b`).
    pub k: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxError {
    pub pe: f64,
    pub ke: f64,
    pub oe: f64,
}

impl AuxError {
    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.pe, self.ke, self.oe)
    }
}

pub fn tracking_error(state: &VehicleState, target: &Vec3) -> TrackingError {
    let ea = state.attitude.apply_inverse(&(target - state.position));
    // third column of R^a_b = third row of R^b_a
    let k = state.attitude.matrix().row(2).transpose();
    let ej = k.cross(&ea);
    TrackingError {
        ea,
        ej,
        pej: ej.norm(),
        k,
    }
}

pub fn aux_error(te: &TrackingError) -> Result<AuxError> {
    let pe = te.ea.norm();
    if pe < MIN_POSITION_ERROR {
        return Err(Error::ZeroPositionError(pe));
    }
    if te.pej < MIN_POSITION_ERROR {
        return Err(Error::LateralDegenerate(te.pej));
    }
    // clamp rounding spill outside [0, 2]
    let ke = (1.0 - te.ea.x / pe).clamp(0.0, 2.0).sqrt();
    let oe = (1.0 - te.ej.y / te.pej).clamp(0.0, 2.0).sqrt();
    Ok(AuxError { pe, ke, oe })
}

/// Residual of the cone identity
/// `(ye)^2 = ((1 - ke^2)^-2 - 1) (xe)^2 - (ze)^2`.
pub fn cone_residual(ea: &Vec3, ke: f64) -> Result<f64> {
    let c = 1.0 - ke * ke;
    if c.abs() < 1e-12 {
        return Err(Error::ConeDegenerate);
    }
    let slope = 1.0 / (c * c) - 1.0;
    Ok(ea.y * ea.y - (slope * ea.x * ea.x - ea.z * ea.z))
}

/// Bound on `|ye^a|` implied by `pe <= pe_max` and `ke <= ke_max < 1`.
pub fn lateral_error_bound(pe_max: f64, ke_max: f64) -> f64 {
    let c = 1.0 - ke_max * ke_max;
    ((1.0 / (c * c) - 1.0).max(0.0)).sqrt() * pe_max
}

/// Factorisation `e' = Xi gamma^a + (target term)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiMatrix {
    pub m: Mat3x6,
}

pub fn xi_matrix(te: &TrackingError, e: &AuxError) -> Result<XiMatrix> {
    let scales = [e.pe, e.ke, te.pej, e.oe];
    if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::SingularConfiguration(format!(
            "rate factorisation needs pe, ke, pe^j, oe > 0 (got {:e}, {:e}, {:e}, {:e})",
            e.pe, e.ke, te.pej, e.oe
        )));
    }
    let ia = Vec3::x();
    let ja = Vec3::y();
    let ih = te.ea / e.pe;
    let jh = te.ej / te.pej;

    let mut m = Mat3x6::zeros();

    let r1 = -te.ea / e.pe;
    m.fixed_view_mut::<1, 3>(0, 0).copy_from(&r1.transpose());

    let a = ih * (te.ea.x / e.pe) - ia;
    let r2_nu = -a;
    let r2_omega = -(skew(&te.ea).transpose() * ia);
    let s2 = 1.0 / (2.0 * e.pe * e.ke);
    m.fixed_view_mut::<1, 3>(1, 0)
        .copy_from(&(r2_nu * s2).transpose());
    m.fixed_view_mut::<1, 3>(1, 3)
        .copy_from(&(r2_omega * s2).transpose());

    let b = jh * (te.ej.y / te.pej) - ja;
    let r3_nu = -(skew(&te.k).transpose() * b);
    let r3_omega = skew(&te.ej).transpose() * b;
    let s3 = 1.0 / (2.0 * te.pej * e.oe);
    m.fixed_view_mut::<1, 3>(2, 0)
        .copy_from(&(r3_nu * s3).transpose());
    m.fixed_view_mut::<1, 3>(2, 3)
        .copy_from(&(r3_omega * s3).transpose());

    Ok(XiMatrix { m })
}

impl XiMatrix {
    /// Contribution of the target motion, for a trajectory frame whose axes
    /// stay parallel to the base frame. Its linear velocity enters exactly
    /// like a vehicle velocity with the opposite sign, and its angular
    /// velocity does not affect `e` at all:
    /// `Xi^d = [-Xi_nu R^a_b, 0]`.
    pub fn target_matrix(&self, state: &VehicleState) -> Mat3x6 {
        let xi_nu = self.m.fixed_view::<3, 3>(0, 0).into_owned();
        let mut d = Mat3x6::zeros();
        d.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(-xi_nu * state.attitude.matrix().transpose()));
        d
    }

    /// `Xi 1^ Xi^T` with the lateral-force column masked.
    pub fn actuated_gram(&self) -> Matrix3<f64> {
        let mut masked = self.m;
        masked.column_mut(1).fill(0.0);
        masked * masked.transpose()
    }
}

/// Full `e'` for a vehicle moving with its measured twist while the target
/// moves with base-frame velocity `target_velocity`.
pub fn edot(xi: &XiMatrix, state: &VehicleState, target_velocity: &Vec3) -> Vec3 {
    let mut relative = state.twist;
    let v_body = state.attitude.apply_inverse(target_velocity);
    relative[0] -= v_body.x;
    relative[1] -= v_body.y;
    relative[2] -= v_body.z;
    xi.m * relative
}

/// `edot` written as the two-term factorisation, with the target twist
/// `[v_d; w_d]` of a base-aligned trajectory frame.
pub fn edot_factored(xi: &XiMatrix, state: &VehicleState, target_twist: &Vec6) -> Vec3 {
    xi.m * state.twist + xi.target_matrix(state) * target_twist
}

/// Smallest eigenvalue of `Xi 1^ Xi^T`, clamped at zero.
pub fn lambda0(xi: &XiMatrix) -> f64 {
    SymmetricEigen::new(xi.actuated_gram())
        .eigenvalues
        .min()
        .max(0.0)
}

/// The three error lines on which `lambda_0` can vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularLine {
    None,
    /// `xe^a = ze^a = 0`: target straight abeam.
    TargetOnBodyY,
    /// `ye^a = ze^a = 0`: target straight ahead or astern.
    TargetOnBodyX,
    /// `xe^j = ze^j = 0`: horizontal normal along the body `y` axis.
    NormalOnBodyY,
}

/// Classifies proximity to the singular lines. Components are compared
/// relative to `pe`, so `tol` is roughly an angle in radians.
pub fn is_near_singular_line(te: &TrackingError, tol: f64) -> SingularLine {
    let pe = te.ea.norm();
    let near = |a: f64, b: f64| a.abs() <= tol * pe && b.abs() <= tol * pe;
    if near(te.ea.x, te.ea.z) {
        SingularLine::TargetOnBodyY
    } else if near(te.ea.y, te.ea.z) {
        SingularLine::TargetOnBodyX
    } else if near(te.ej.x, te.ej.z) {
        SingularLine::NormalOnBodyY
    } else {
        SingularLine::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::Rotation;
    use std::f64::consts::SQRT_2;

    fn te_for(ea: Vec3) -> TrackingError {
        // R = I and p = 0, so e^a = p_d
        tracking_error(
            &VehicleState::at_rest(Vec3::zeros(), Rotation::identity()),
            &ea,
        )
    }

    #[test]
    fn zero_error_when_on_target() {
        let s = VehicleState::at_rest(
            Vec3::new(1.0, 2.0, 3.0),
            Rotation::exp(&Vec3::new(0.3, 0.1, -0.2)),
        );
        let te = tracking_error(&s, &s.position);
        assert_eq!(te.ea, Vec3::zeros());
        assert!(matches!(aux_error(&te), Err(Error::ZeroPositionError(_))));
    }

    #[test]
    fn hand_evaluated_lateral_vector() {
        let te = te_for(Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(te.ea, Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(te.ej, Vec3::new(-1.0, 1.0, 0.0));
    }

    #[test]
    fn norm_preserved_by_rigid_transform() {
        let s = VehicleState::at_rest(
            Vec3::new(3.0, -1.0, 2.0),
            Rotation::exp(&Vec3::new(1.0, -0.7, 0.4)),
        );
        let pd = Vec3::new(-2.0, 5.0, 1.0);
        let te = tracking_error(&s, &pd);
        assert!((te.ea.norm() - (pd - s.position).norm()).abs() < 1e-12);
        assert!(te.ej.dot(&te.k).abs() < 1e-12);
    }

    #[test]
    fn aligned_target_has_zero_orientation_errors() {
        let e = aux_error(&te_for(Vec3::new(1.0, 0.0, 0.0))).unwrap();
        assert_eq!((e.pe, e.ke, e.oe), (1.0, 0.0, 0.0));
    }

    #[test]
    fn diagonal_target_hand_values() {
        let e = aux_error(&te_for(Vec3::new(1.0, 1.0, 0.0))).unwrap();
        let expected = (1.0 - 1.0 / SQRT_2).sqrt();
        assert!((e.pe - SQRT_2).abs() < 1e-15);
        assert!((e.ke - expected).abs() < 1e-15);
        assert!((e.ke - 0.5412).abs() < 1e-4);
        assert!((e.oe - expected).abs() < 1e-15);
    }

    #[test]
    fn target_behind_is_boundary_of_set() {
        let e = aux_error(&te_for(Vec3::new(-1.0, 0.0, 0.0))).unwrap();
        assert!((e.ke - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn vertical_target_is_lateral_degenerate() {
        assert!(matches!(
            aux_error(&te_for(Vec3::new(0.0, 0.0, 2.0))),
            Err(Error::LateralDegenerate(_))
        ));
    }

    #[test]
    fn cone_examples() {
        let ke = (1.0 - 1.0 / SQRT_2).sqrt();
        assert!(cone_residual(&Vec3::new(1.0, 1.0, 0.0), ke).unwrap().abs() < 1e-12);
        assert_eq!(cone_residual(&Vec3::new(1.0, 0.0, 0.0), 0.0).unwrap(), 0.0);
        assert_eq!(
            cone_residual(&Vec3::new(0.0, 1.0, 0.0), 1.0),
            Err(Error::ConeDegenerate)
        );
    }

    #[test]
    fn lateral_bound_holds_on_cone() {
        let bound = lateral_error_bound(2.0, 0.3);
        for i in 0..200 {
            let phi = i as f64 * 0.031;
            // points with pe = 2 and ke = 0.3 exactly
            let c: f64 = 1.0 - 0.09;
            let xe = 2.0 * c;
            let r = (4.0 - xe * xe).sqrt();
            let ea = Vec3::new(xe, r * phi.cos(), r * phi.sin());
            assert!(ea.y.abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn first_row_is_unit_line_of_sight() {
        let s = VehicleState::at_rest(
            Vec3::new(0.3, 0.1, -0.2),
            Rotation::exp(&Vec3::new(0.2, 0.4, -0.1)),
        );
        let te = tracking_error(&s, &Vec3::new(2.0, 1.0, 0.5));
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        let row: Vec<f64> = xi.m.row(0).iter().copied().collect();
        let expected = -te.ea / e.pe;
        assert!((row[0] - expected.x).abs() < 1e-15);
        assert!((row[1] - expected.y).abs() < 1e-15);
        assert!((row[2] - expected.z).abs() < 1e-15);
        assert_eq!(&row[3..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn closing_speed_along_surge() {
        // stationary target, vehicle surging at speed v: pe' = -v cos(angle)
        let mut s = VehicleState::at_rest(Vec3::zeros(), Rotation::identity());
        s.twist[0] = 0.7;
        let pd = Vec3::new(3.0, 1.0, -0.5);
        let te = tracking_error(&s, &pd);
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        let cos = pd.x / pd.norm();
        let rate = edot(&xi, &s, &Vec3::zeros());
        assert!((rate.x + 0.7 * cos).abs() < 1e-14);
    }

    #[test]
    fn receding_target_opens_distance() {
        let s = VehicleState::at_rest(Vec3::zeros(), Rotation::exp(&Vec3::new(0.1, -0.2, 0.3)));
        let pd = Vec3::new(2.0, 1.0, 0.5);
        let te = tracking_error(&s, &pd);
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        let v = pd.normalize() * 0.4;
        assert!((edot(&xi, &s, &v).x - 0.4).abs() < 1e-14);
    }

    #[test]
    fn factored_and_direct_edot_agree() {
        let s = VehicleState {
            position: Vec3::new(0.2, -0.4, 1.0),
            attitude: Rotation::exp(&Vec3::new(0.3, -0.1, 0.8)),
            twist: Vec6::new(0.5, -0.2, 0.1, 0.05, -0.3, 0.2),
        };
        let pd = Vec3::new(2.0, 1.0, 0.0);
        let vd = Vec3::new(0.1, 0.3, -0.2);
        let te = tracking_error(&s, &pd);
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        let twist_d = Vec6::new(vd.x, vd.y, vd.z, 0.4, -0.7, 1.0);
        assert!((edot(&xi, &s, &vd) - edot_factored(&xi, &s, &twist_d)).norm() < 1e-14);
        assert_eq!(edot(&xi, &s, &Vec3::zeros()), xi.m * s.twist);
    }

    #[test]
    fn xi_rejects_zero_scales() {
        let te = te_for(Vec3::new(1.0, 0.0, 0.0));
        let e = aux_error(&te).unwrap();
        assert!(matches!(
            xi_matrix(&te, &e),
            Err(Error::SingularConfiguration(_))
        ));
    }

    #[test]
    fn lambda0_vanishes_abeam() {
        let te = te_for(Vec3::new(0.0, 1.0, 0.0));
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        assert!(lambda0(&xi) < 1e-14);
    }

    #[test]
    fn lambda0_vanishes_astern() {
        let te = te_for(Vec3::new(-1.0, 0.0, 0.0));
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        assert!(lambda0(&xi) < 1e-14);
    }

    #[test]
    fn lambda0_vanishes_with_normal_along_minus_y() {
        // R = I and ye = 0, xe < 0: e^j = (0, xe, 0) points along -y
        let te = te_for(Vec3::new(-1.0, 0.0, 0.5));
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        assert!(lambda0(&xi) < 1e-14);
    }

    #[test]
    fn singular_line_classifier_examples() {
        assert_eq!(
            is_near_singular_line(&te_for(Vec3::new(0.0, 1.0, 0.0)), 1e-12),
            SingularLine::TargetOnBodyY
        );
        assert_eq!(
            is_near_singular_line(&te_for(Vec3::new(1.0, 0.0, 0.0)), 1e-12),
            SingularLine::TargetOnBodyX
        );
        assert_eq!(
            is_near_singular_line(&te_for(Vec3::new(1.0, 0.0, 0.5)), 1e-12),
            SingularLine::NormalOnBodyY
        );
        let d = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        assert_eq!(is_near_singular_line(&te_for(d), 0.01), SingularLine::None);
    }

    fn lambda0_at(state: &VehicleState, target: &Vec3) -> Option<f64> {
        let te = tracking_error(state, target);
        let e = aux_error(&te).ok()?;
        xi_matrix(&te, &e).ok().map(|xi| lambda0(&xi))
    }

    #[test]
    fn lambda0_invariant_under_lateral_reflection() {
        let flip = Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, 1.0));
        for i in 1..50 {
            let f = i as f64;
            let r = Rotation::exp(&Vec3::new(
                0.3 * f.sin(),
                0.7 * (1.3 * f).cos(),
                2.0 * (0.4 * f).sin(),
            ));
            let ea = Vec3::new(1.0 + f.cos(), 0.8 * (2.0 * f).sin(), 0.5 * (0.7 * f).cos());
            let s = VehicleState::at_rest(Vec3::zeros(), r);
            let mirrored = VehicleState::at_rest(
                Vec3::zeros(),
                Rotation::from_matrix_unchecked(flip * r.matrix() * flip),
            );
            let a = lambda0_at(&s, &r.apply(&ea)).unwrap();
            let b = lambda0_at(&mirrored, &mirrored.attitude.apply(&(flip * ea))).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn level_body_with_target_at_same_height_is_rank_deficient() {
        // k = e_z and ze = 0 make the ke and oe rows equal, off all three lines
        let yaw = Rotation::exp(&Vec3::new(0.0, 0.0, 0.8));
        let s = VehicleState::at_rest(Vec3::new(1.0, 2.0, 3.0), yaw);
        let ea = Vec3::new(2.0, 0.7, 0.0);
        let te = tracking_error(&s, &(s.position + yaw.apply(&ea)));
        assert_eq!(is_near_singular_line(&te, 1e-3), SingularLine::None);
        let e = aux_error(&te).unwrap();
        let xi = xi_matrix(&te, &e).unwrap();
        assert!((xi.m.row(1) - xi.m.row(2)).norm() < 1e-12);
        assert!(lambda0(&xi) < 1e-12);
    }
}
