//! Scenario configuration.
//!
//! Configs are TOML documents. Every field has a default, so a config file
//! only needs to state what differs from the simplified-model simulation
//! study. [`ScenarioConfig::to_toml_value`] gives the fully expanded form,
//! which is what run sidecars echo and what sweep paths address.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocator, EngineLayout, ThrustCurve};
use crate::controller::{ControllerParams, Switching};
use crate::dynamics::{Mat6, SimplifiedPlant};
use crate::error::{Error, Result};
use crate::sim::trajectory::ReferenceTrajectory;
use crate::so3::{Rotation, Vec3, Vec6};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub run: RunConfig,
    pub initial: InitialConfig,
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub trajectory: ReferenceTrajectory,
    pub measurement: MeasurementConfig,
    pub allocation: AllocationConfig,
    pub batch: BatchConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "scenario".into(),
            seed: 0,
            run: RunConfig::default(),
            initial: InitialConfig::default(),
            plant: PlantConfig::default(),
            controller: ControllerConfig::default(),
            trajectory: ReferenceTrajectory::LineX { speed: 0.1 },
            measurement: MeasurementConfig::default(),
            allocation: AllocationConfig::default(),
            batch: BatchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The commanded wrench acts on the plant directly.
    #[default]
    Simulation,
    /// The wrench goes through allocation, engine commands, lag and
    /// thrust saturation first.
    Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SingularityPolicy {
    /// Keep applying the last valid wrench and log an event.
    #[default]
    HoldLast,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Simulated duration (s).
    pub horizon: f64,
    /// Controller rate (Hz).
    pub control_rate: f64,
    /// Plant integration steps per control period.
    pub plant_substeps: u32,
    /// Log rate (Hz).
    pub log_rate: f64,
    pub mode: Mode,
    pub singularity_policy: SingularityPolicy,
    /// Control evaluations with `lambda_0` below this are treated as
    /// singular.
    pub lambda0_tol: f64,
    /// Start of the summary window (s).
    pub t_min: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 600.0,
            control_rate: 100.0,
            plant_substeps: 10,
            log_rate: 10.0,
            mode: Mode::Simulation,
            singularity_policy: SingularityPolicy::HoldLast,
            lambda0_tol: 1e-9,
            t_min: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// `p^b_a` at `t = 0` (m).
    pub position: [f64; 3],
    /// Initial attitude as a rotation vector (axis times angle, rad).
    pub attitude: [f64; 3],
    pub twist: [f64; 6],
    /// Seeded uniform perturbation of the initial position, per axis (m).
    pub position_jitter: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            position: [10.0, 20.0, -30.0],
            attitude: [0.0; 3],
            twist: [0.0; 6],
            position_jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Diagonal of the inertia matrix `M`.
    pub mass: [f64; 6],
    /// Diagonal of the quadratic damping matrix `C_p`.
    pub damping: [f64; 6],
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            mass: [1.0; 6],
            damping: [1.0; 6],
        }
    }
}

impl PlantConfig {
    pub fn mass_matrix(&self) -> Mat6 {
        Mat6::from_diagonal(&Vec6::from(self.mass))
    }

    pub fn build(&self) -> Result<SimplifiedPlant> {
        SimplifiedPlant::new(self.mass_matrix(), Vec6::from(self.damping))
    }
}

/// Estimated mass matrix `M_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum MassEstimate {
    /// `scale * M` of the configured plant.
    Scale(f64),
    Diagonal([f64; 6]),
    /// Full matrix, row by row.
    Matrix([[f64; 6]; 6]),
}

impl MassEstimate {
    pub fn resolve(&self, plant_mass: &Mat6) -> Mat6 {
        match self {
            MassEstimate::Scale(s) => plant_mass * *s,
            MassEstimate::Diagonal(d) => Mat6::from_diagonal(&Vec6::from(*d)),
            MassEstimate::Matrix(rows) => Mat6::from_fn(|i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdotSource {
    /// Exact rate from the measured twist and the reference velocity.
    #[default]
    Analytic,
    /// First-order filtered difference of successive measured errors.
    FilteredDifference { time_constant: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub gains: [f64; 3],
    pub offset: [f64; 3],
    pub p_gains: [f64; 6],
    pub mass_estimate: MassEstimate,
    pub epsilon: [f64; 3],
    pub mu: f64,
    pub switching: Switching,
    pub edot: EdotSource,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            gains: [0.1; 3],
            offset: [0.2, 0.01, 0.01],
            p_gains: [5.0, 0.0, 5.0, 5.0, 5.0, 5.0],
            mass_estimate: MassEstimate::Scale(10.0),
            epsilon: [1.0; 3],
            mu: 0.01,
            switching: Switching::Sigmoid,
            edot: EdotSource::Analytic,
        }
    }
}

impl ControllerConfig {
    pub fn params(&self, plant_mass: &Mat6) -> ControllerParams {
        ControllerParams {
            gains: Vec3::from(self.gains),
            offset: Vec3::from(self.offset),
            p_gains: Vec6::from(self.p_gains),
            mass_estimate: self.mass_estimate.resolve(plant_mass),
            epsilon: Vec3::from(self.epsilon),
            mu: self.mu,
            switching: self.switching,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Half-width of the uniform position noise (m).
    pub noise_amplitude: f64,
    /// How often a new noise sample is drawn (Hz).
    pub noise_rate: f64,
    /// Measurement rate (Hz); zero-order hold in between.
    pub rate: f64,
    /// Transport delay (s).
    pub delay: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            noise_amplitude: 0.0,
            noise_rate: 1.0,
            rate: 100.0,
            delay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    pub layout: EngineLayout,
    /// First-order lag of the propulsion (s).
    pub lag: f64,
    pub thrust_curve: ThrustCurve,
    /// Optional CSV `command,thrust_N` table; overrides `thrust_curve`.
    /// Relative paths resolve against the config file's directory.
    pub thrust_table: Option<PathBuf>,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        AllocationConfig {
            layout: EngineLayout::default(),
            lag: 0.1,
            thrust_curve: ThrustCurve::default(),
            thrust_table: None,
        }
    }
}

impl AllocationConfig {
    pub fn curve(&self) -> Result<ThrustCurve> {
        match &self.thrust_table {
            Some(path) => ThrustCurve::from_csv(path),
            None => Ok(self.thrust_curve.clone()),
        }
    }
}

/// One sweep axis: a dotted config path and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    /// Where run logs and summaries go unless overridden.
    pub output_dir: Option<PathBuf>,
    /// Seeds per sweep point, counting up from `seed`.
    pub repeat: u32,
    pub sweep: Vec<SweepAxis>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            output_dir: None,
            repeat: 1,
            sweep: Vec::new(),
        }
    }
}

fn toml_error(src: &str, e: &toml::de::Error) -> Error {
    let location = e
        .span()
        .map(|span| {
            let line = src[..span.start.min(src.len())].matches('\n').count() + 1;
            format!("line {line}: ")
        })
        .unwrap_or_default();
    Error::Config(format!("{location}{}", e.message()))
}

impl ScenarioConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| toml_error(src, &e))
    }

    /// Loads a config file; a relative `thrust_table` path is rebased onto
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&src)?;
        if let (Some(table), Some(dir)) = (&cfg.allocation.thrust_table, path.parent()) {
            if table.is_relative() {
                cfg.allocation.thrust_table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_value(&self) -> toml::Value {
        toml::Value::try_from(self).expect("config serialises")
    }

    pub fn from_toml_value(v: toml::Value) -> Result<Self> {
        v.try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    /// Returns a copy with the dotted `path` (e.g. `controller.epsilon.0`)
    /// replaced by `value`. The path must already exist in the expanded
    /// config.
    pub fn with_override(&self, path: &str, value: toml::Value) -> Result<Self> {
        let mut root = self.to_toml_value();
        let mut node = &mut root;
        for part in path.split('.') {
            node = match node {
                toml::Value::Table(t) => t
                    .get_mut(part)
                    .ok_or_else(|| Error::Config(format!("unknown config path `{path}`")))?,
                toml::Value::Array(a) => {
                    let i: usize = part.parse().map_err(|_| {
                        Error::Config(format!("`{part}` in `{path}` is not an index"))
                    })?;
                    let len = a.len();
                    a.get_mut(i).ok_or_else(|| {
                        Error::Config(format!("index {i} out of range ({len}) in `{path}`"))
                    })?
                }
                _ => {
                    return Err(Error::Config(format!(
                        "config path `{path}` descends into a scalar"
                    )))
                }
            };
        }
        // keep floats floats so `1` overrides `1.0` cleanly
        *node = match (&*node, value) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        Self::from_toml_value(root)
    }

    pub fn initial_attitude(&self) -> Rotation {
        Rotation::exp(&Vec3::from(self.initial.attitude))
    }

    /// Every violated invariant, phrased for a user.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let r = &self.run;
        if !(r.horizon > 0.0) {
            out.push(format!("run.horizon = {} must be positive", r.horizon));
        }
        if !(r.control_rate > 0.0) {
            out.push(format!(
                "run.control_rate = {} must be positive",
                r.control_rate
            ));
        }
        if r.plant_substeps == 0 {
            out.push("run.plant_substeps must be at least 1".into());
        } else if r.control_rate > 0.0 && 1.0 / (r.control_rate * r.plant_substeps as f64) > 0.1 {
            out.push("plant step 1/(control_rate * plant_substeps) must not exceed 0.1 s".into());
        }
        if !(r.log_rate > 0.0) || r.log_rate > r.control_rate {
            out.push(format!(
                "run.log_rate = {} must be positive and not above the control rate",
                r.log_rate
            ));
        }
        if !(r.lambda0_tol >= 0.0) {
            out.push("run.lambda0_tol must be non-negative".into());
        }

        let plant_mass = self.plant.mass_matrix();
        if let Err(e) = self.plant.build() {
            out.push(format!("plant: {e}"));
        } else {
            out.extend(self.controller.params(&plant_mass).violations(&plant_mass));
        }
        if let EdotSource::FilteredDifference { time_constant } = self.controller.edot {
            if !(time_constant >= 0.0) {
                out.push("controller.edot time_constant must be non-negative".into());
            }
        }

        if !self.trajectory.is_finite() {
            out.push("trajectory parameters must be finite".into());
        }
        if self
            .initial
            .position
            .iter()
            .chain(&self.initial.attitude)
            .chain(&self.initial.twist)
            .any(|x| !x.is_finite())
        {
            out.push("initial state must be finite".into());
        }
        if !(self.initial.position_jitter >= 0.0) {
            out.push("initial.position_jitter must be non-negative".into());
        }

        if self.batch.repeat == 0 {
            out.push("batch.repeat must be at least 1".into());
        }
        for axis in &self.batch.sweep {
            match axis.values.first() {
                None => out.push(format!("sweep axis `{}` has no values", axis.path)),
                Some(v) => {
                    if let Err(e) = self.with_override(&axis.path, v.clone()) {
                        out.push(format!("sweep axis `{}`: {e}", axis.path));
                    }
                }
            }
        }

        let m = &self.measurement;
        if !(m.noise_amplitude >= 0.0) {
            out.push(format!(
                "measurement.noise_amplitude = {} must be >= 0",
                m.noise_amplitude
            ));
        }
        if !(m.noise_rate > 0.0) {
            out.push(format!(
                "measurement.noise_rate = {} must be positive",
                m.noise_rate
            ));
        }
        if !(m.rate > 0.0) {
            out.push(format!("measurement.rate = {} must be positive", m.rate));
        }
        if !(m.delay >= 0.0) {
            out.push(format!("measurement.delay = {} must be >= 0", m.delay));
        }

        if self.run.mode == Mode::Experiment {
            if let Err(e) = Allocator::new(self.allocation.layout) {
                out.push(format!("allocation: {e}"));
            }
            if !(self.allocation.lag >= 0.0) {
                out.push("allocation.lag must be >= 0".into());
            }
            if let Err(e) = self.allocation.curve() {
                out.push(format!("allocation: {e}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("; ")))
        }
    }
}
