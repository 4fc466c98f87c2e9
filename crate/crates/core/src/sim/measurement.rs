//! Pose measurement with held uniform position noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::MeasurementConfig;
use crate::dynamics::VehicleState;
use crate::so3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    /// Half-width `a` of the uniform position noise (m).
    pub noise_amplitude: f64,
    /// Noise redraw rate (Hz).
    pub noise_rate: f64,
    /// Measurement rate (Hz).
    pub rate: f64,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        MeasurementModel {
            noise_amplitude: 0.0,
            noise_rate: 1.0,
            rate: 100.0,
        }
    }
}

impl From<&MeasurementConfig> for MeasurementModel {
    fn from(c: &MeasurementConfig) -> Self {
        MeasurementModel {
            noise_amplitude: c.noise_amplitude,
            noise_rate: c.noise_rate,
            rate: c.rate,
        }
    }
}

/// One noise draw, uniform on `[-a, a]^3`.
///
/// Three unit draws are always consumed and then scaled, so runs that differ
/// only in amplitude see the same noise pattern.
pub fn draw_noise<R: Rng + ?Sized>(amplitude: f64, rng: &mut R) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0)) * amplitude
}

/// Measures `true_state` with a fresh noise draw. Orientation and twist pass
/// through untouched.
pub fn inject_measurement<R: Rng + ?Sized>(
    true_state: &VehicleState,
    model: &MeasurementModel,
    rng: &mut R,
) -> VehicleState {
    let mut m = *true_state;
    m.position += draw_noise(model.noise_amplitude, rng);
    m
}

// Tick index of time `t` for a clock at `rate`, robust to float round-off at
// exact tick boundaries.
fn tick(t: f64, rate: f64) -> i64 {
    (t * rate + 1e-9).floor() as i64
}

/// Stateful sensor: noise is held between noise ticks and the measurement
/// itself is held between measurement ticks.
#[derive(Debug, Clone)]
pub struct Sensor {
    model: MeasurementModel,
    noise: Vec3,
    noise_tick: Option<i64>,
    meas_tick: Option<i64>,
    held: Option<VehicleState>,
}

impl Sensor {
    pub fn new(model: MeasurementModel) -> Self {
        Sensor {
            model,
            noise: Vec3::zeros(),
            noise_tick: None,
            meas_tick: None,
            held: None,
        }
    }

    pub fn noise(&self) -> Vec3 {
        self.noise
    }

    /// Measurement at time `t` of `state`. The second value is the new noise
    /// offset when this call crossed a noise tick.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        t: f64,
        state: &VehicleState,
        rng: &mut R,
    ) -> (VehicleState, Option<Vec3>) {
        let mut redrawn = None;
        let nt = tick(t, self.model.noise_rate);
        if self.noise_tick != Some(nt) {
            self.noise_tick = Some(nt);
            self.noise = draw_noise(self.model.noise_amplitude, rng);
            redrawn = Some(self.noise);
        }
        let mt = tick(t, self.model.rate);
        if self.meas_tick != Some(mt) || self.held.is_none() {
            self.meas_tick = Some(mt);
            let mut m = *state;
            m.position += self.noise;
            self.held = Some(m);
        }
        (self.held.expect("set above"), redrawn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{Rotation, Vec6};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state() -> VehicleState {
        let mut s = VehicleState::at_rest(
            Vec3::new(1.0, -2.0, 3.0),
            Rotation::exp(&Vec3::new(0.1, 0.2, 0.3)),
        );
        s.twist = Vec6::from([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        s
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = inject_measurement(&state(), &MeasurementModel::default(), &mut rng);
        assert_eq!(m, state());
    }

    #[test]
    fn only_position_is_corrupted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = MeasurementModel {
            noise_amplitude: 0.2,
            ..Default::default()
        };
        let m = inject_measurement(&state(), &model, &mut rng);
        assert_eq!(m.attitude, state().attitude);
        assert_eq!(m.twist, state().twist);
        let d = m.position - state().position;
        assert!(d.iter().all(|x| x.abs() <= 0.2));
        assert!(d.norm() > 0.0);
    }

    #[test]
    fn noise_held_within_each_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = MeasurementModel {
            noise_amplitude: 0.2,
            noise_rate: 1.0,
            rate: 100.0,
        };
        let mut sensor = Sensor::new(model);
        let s = state();
        let mut offsets = Vec::new();
        for n in 0..300 {
            let t = n as f64 * 0.01;
            let (m, redrawn) = sensor.measure(t, &s, &mut rng);
            assert_eq!(redrawn.is_some(), n % 100 == 0, "tick {n}");
            offsets.push(m.position - s.position);
        }
        for w in 0..3 {
            let first = offsets[w * 100];
            assert!(offsets[w * 100..(w + 1) * 100].iter().all(|o| *o == first));
        }
        assert_ne!(offsets[0], offsets[100]);
        assert_ne!(offsets[100], offsets[200]);
    }

    #[test]
    fn measurement_is_held_between_ticks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = MeasurementModel {
            noise_amplitude: 0.0,
            noise_rate: 1.0,
            rate: 10.0,
        };
        let mut sensor = Sensor::new(model);
        let mut s = state();
        let (first, _) = sensor.measure(0.0, &s, &mut rng);
        s.position.x += 1.0;
        let (held, _) = sensor.measure(0.05, &s, &mut rng);
        assert_eq!(held, first);
        let (fresh, _) = sensor.measure(0.1, &s, &mut rng);
        assert_eq!(fresh, s);
    }
}
