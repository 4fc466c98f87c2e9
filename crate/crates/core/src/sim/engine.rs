//! Fixed-step closed loop.
//!
//! Per control tick: sample the (possibly delayed, noisy, held) pose,
//! evaluate the sliding variable, compute the wrench, then advance the plant
//! by `plant_substeps` steps. In experiment mode each substep routes the
//! wrench through allocation, engine commands, actuator lag and thrust
//! saturation.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{to_engine_commands, Actuators, Allocator, EngineCommand};
use crate::aux_error::{self, AuxError, TrackingError};
use crate::config::{EdotSource, Mode, ScenarioConfig, SingularityPolicy};
use crate::controller::{control_law, sliding_variable, ControllerParams};
use crate::dynamics::{self, DynamicsModel, VehicleState};
use crate::error::{Error, Result};
use crate::sim::log::{Event, EventKind, LogRow, RunLog, RunStatus};
use crate::sim::measurement::{MeasurementModel, Sensor};
use crate::sim::trajectory::Trajectory;
use crate::so3::{Vec3, Vec6};

/// Runs `cfg` to completion. Aborts and divergence become errors.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog> {
    let log = run_scenario_partial(cfg)?;
    match &log.status {
        RunStatus::Completed => Ok(log),
        RunStatus::Aborted { t, reason } => Err(Error::SingularConfiguration(format!(
            "t = {t:.3} s: {reason}"
        ))),
        RunStatus::Diverged { t } => Err(Error::InvalidParameter(format!(
            "state became non-finite at t = {t:.3} s"
        ))),
    }
}

/// Runs `cfg` and returns the log even when the run stopped early; the
/// outcome is in [`RunLog::status`]. Only invalid configs are errors.
pub fn run_scenario_partial(cfg: &ScenarioConfig) -> Result<RunLog> {
    cfg.validate()?;
    Loop::new(cfg)?.run()
}

// Controller-side ė estimate.
enum EdotEstimator {
    Analytic,
    Filtered {
        blend: f64,
        prev: Option<Vec3>,
        value: Vec3,
    },
}

impl EdotEstimator {
    fn new(source: EdotSource, period: f64) -> Self {
        match source {
            EdotSource::Analytic => EdotEstimator::Analytic,
            EdotSource::FilteredDifference { time_constant } => EdotEstimator::Filtered {
                blend: if time_constant == 0.0 {
                    1.0
                } else {
                    1.0 - (-period / time_constant).exp()
                },
                prev: None,
                value: Vec3::zeros(),
            },
        }
    }

    fn update(&mut self, e: &AuxError, analytic: impl FnOnce() -> Vec3, period: f64) -> Vec3 {
        match self {
            EdotEstimator::Analytic => analytic(),
            EdotEstimator::Filtered { blend, prev, value } => {
                let now = e.as_vec();
                if let Some(p) = prev {
                    let raw = (now - *p) / period;
                    *value += (raw - *value) * *blend;
                }
                *prev = Some(now);
                *value
            }
        }
    }
}

struct Loop<'a> {
    cfg: &'a ScenarioConfig,
    plant: Box<dyn DynamicsModel>,
    params: ControllerParams,
    allocator: Allocator,
    actuators: Option<Actuators>,
    rng: ChaCha8Rng,
    initial: VehicleState,
}

impl<'a> Loop<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        let plant = cfg.plant.build()?;
        let params = cfg.controller.params(&cfg.plant.mass_matrix());
        let allocator = Allocator::new(cfg.allocation.layout)?;
        let actuators = match cfg.run.mode {
            Mode::Simulation => None,
            Mode::Experiment => Some(Actuators::new(
                allocator.clone(),
                cfg.allocation.curve()?,
                cfg.allocation.lag,
            )?),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // jitter is always drawn so the noise stream does not depend on it
        let jitter =
            Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0)) * cfg.initial.position_jitter;
        let mut initial = VehicleState::at_rest(
            Vec3::from(cfg.initial.position) + jitter,
            cfg.initial_attitude(),
        );
        initial.twist = Vec6::from(cfg.initial.twist);
        Ok(Loop {
            cfg,
            plant: Box::new(plant),
            params,
            allocator,
            actuators,
            rng,
            initial,
        })
    }

    fn run(mut self) -> Result<RunLog> {
        let run = &self.cfg.run;
        let period = 1.0 / run.control_rate;
        let substeps = run.plant_substeps as usize;
        let dt = period / substeps as f64;
        let ticks = (run.horizon * run.control_rate).round() as u64;
        let log_every = ((run.control_rate / run.log_rate).round() as u64).max(1);
        let delay = self.cfg.measurement.delay;

        let mut sensor = Sensor::new(MeasurementModel::from(&self.cfg.measurement));
        let mut edot_est = EdotEstimator::new(self.cfg.controller.edot, period);
        let mut history: VecDeque<(f64, VehicleState)> = VecDeque::new();

        let mut state = self.initial;
        let mut tau = Vec6::zeros();
        let mut sigma = Vec3::zeros();
        let mut held_ticks: u64 = 0;
        let mut rows = Vec::with_capacity((ticks / log_every + 1) as usize);
        let mut events = Vec::new();
        let mut status = RunStatus::Completed;

        for n in 0..=ticks {
            let t = n as f64 * period;

            // measurement, with transport delay on the true state
            history.push_back((t, state));
            while history.len() > 1 && history[1].0 <= t - delay + 1e-12 {
                history.pop_front();
            }
            let source = history[0].1;
            let (measured, redrawn) = sensor.measure(t, &source, &mut self.rng);
            if let (Some(offset), true) = (redrawn, self.cfg.measurement.noise_amplitude > 0.0) {
                events.push(Event {
                    t,
                    kind: EventKind::NoiseUpdate {
                        offset: offset.into(),
                    },
                });
            }

            // controller
            match self.control(&measured, t, period, &mut edot_est) {
                Ok((s, w)) => {
                    if held_ticks > 0 {
                        events.push(Event {
                            t,
                            kind: EventKind::Recovered { held_ticks },
                        });
                        held_ticks = 0;
                    }
                    sigma = s;
                    tau = w;
                }
                Err(reason) => {
                    if run.singularity_policy == SingularityPolicy::Abort {
                        events.push(Event {
                            t,
                            kind: EventKind::Singular {
                                reason: reason.clone(),
                            },
                        });
                        if n % log_every == 0 {
                            rows.push(self.row(
                                t,
                                &state,
                                &sigma,
                                &tau,
                                &tau,
                                &[EngineCommand {
                                    magnitude: 0.0,
                                    tilt: 0.0,
                                }; 4],
                            ));
                        }
                        status = RunStatus::Aborted { t, reason };
                        break;
                    }
                    if held_ticks == 0 {
                        events.push(Event {
                            t,
                            kind: EventKind::Singular { reason },
                        });
                    }
                    held_ticks += 1;
                }
            }

            let commands = to_engine_commands(&self.allocator.allocate(&tau)?);

            if n == ticks {
                if n % log_every == 0 {
                    rows.push(self.row(t, &state, &sigma, &tau, &tau, &commands));
                }
                break;
            }

            // plant
            let start = state;
            let mut first_wrench = tau;
            for k in 0..substeps {
                let wrench = match self.actuators.as_mut() {
                    None => tau,
                    Some(act) => act.apply(&commands, dt),
                };
                if k == 0 {
                    first_wrench = wrench;
                }
                state = dynamics::step(&state, &wrench, self.plant.as_ref(), dt);
            }
            if n % log_every == 0 {
                rows.push(self.row(t, &start, &sigma, &tau, &first_wrench, &commands));
            }
            if !state.is_finite() {
                status = RunStatus::Diverged { t: t + period };
                break;
            }
        }

        Ok(RunLog {
            config: self.cfg.clone(),
            initial_position: self.initial.position.into(),
            rows,
            events,
            status,
        })
    }

    // Sliding variable and wrench from a measured pose, or why they cannot
    // be formed.
    fn control(
        &self,
        measured: &VehicleState,
        t: f64,
        period: f64,
        edot_est: &mut EdotEstimator,
    ) -> std::result::Result<(Vec3, Vec6), String> {
        let reference = &self.cfg.trajectory;
        let te = aux_error::tracking_error(measured, &reference.position(t));
        let e = aux_error::aux_error(&te).map_err(|e| e.to_string())?;
        let xi = aux_error::xi_matrix(&te, &e).map_err(|e| e.to_string())?;
        let lambda0 = aux_error::lambda0(&xi);
        if lambda0 < self.cfg.run.lambda0_tol {
            return Err(format!("lambda_0 = {lambda0:e} below tolerance"));
        }
        let edot = edot_est.update(
            &e,
            || aux_error::edot(&xi, measured, &reference.velocity(t)),
            period,
        );
        let sigma = sliding_variable(&e, &edot, &self.params);
        Ok((sigma, control_law(&xi, &sigma, &e, &self.params)))
    }

    fn row(
        &self,
        t: f64,
        state: &VehicleState,
        sigma: &Vec3,
        tau: &Vec6,
        realized: &Vec6,
        commands: &[EngineCommand; 4],
    ) -> LogRow {
        let target = self.cfg.trajectory.position(t);
        let te = aux_error::tracking_error(state, &target);
        let aux = true_aux(&te);
        LogRow {
            t,
            position: state.position.into(),
            rotation: state.attitude.to_row_major(),
            twist: state.twist.into(),
            target: target.into(),
            ea: te.ea.into(),
            aux,
            sigma: (*sigma).into(),
            tau: (*tau).into(),
            thrust: std::array::from_fn(|i| commands[i].magnitude),
            tilt: std::array::from_fn(|i| commands[i].tilt),
            realized: (*realized).into(),
        }
    }
}

// Auxiliary error for logging; where it is undefined only `pe` is kept.
fn true_aux(te: &TrackingError) -> [f64; 3] {
    match aux_error::aux_error(te) {
        Ok(e) => [e.pe, e.ke, e.oe],
        Err(_) => [te.ea.norm(), 0.0, 0.0],
    }
}
