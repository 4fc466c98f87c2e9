//! Thrust allocation for four tilting engines.
//!
//! Each engine produces a force in the body `x`-`z` plane. Stacking the
//! per-engine components as `f_xz = [f1x f1z f2x f2z f3x f3z f4x f4z]` the
//! wrench is `tau = B_xz f_xz`; the commanded wrench is distributed with the
//! Moore-Penrose pseudo-inverse. The second row of `B_xz` is zero because no
//! engine can push sideways.
//!
//! Engine commands use `f_i = sqrt(|(f_ix, f_iz)|)` and
//! `alpha_i = atan2(f_iz, f_ix)`. The square root makes `f_i` a normalised
//! motor command rather than a force; it is turned back into thrust by a
//! [`ThrustCurve`], whose default `thrust = command^2` inverts it exactly.

use std::io::Read;
use std::path::Path;

use nalgebra::{SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{Vec3, Vec6};

pub type Bxz = SMatrix<f64, 6, 8>;
pub type ForceVector = SVector<f64, 8>;

/// Engine offsets from the centre of gravity, ordered front-left,
/// front-right, rear-left, rear-right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineLayout {
    pub positions: [[f64; 3]; 4],
}

impl Default for EngineLayout {
    /// Body `y` points to the left.
    fn default() -> Self {
        EngineLayout {
            positions: [
                [0.8, 0.6, 0.0],
                [0.8, -0.6, 0.0],
                [-0.8, 0.6, 0.0],
                [-0.8, -0.6, 0.0],
            ],
        }
    }
}

impl EngineLayout {
    pub fn position(&self, i: usize) -> Vec3 {
        Vec3::from(self.positions[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineCommand {
    /// Normalised command, `>= 0`.
    pub magnitude: f64,
    /// Tilt angle about the body `y` axis (rad).
    pub tilt: f64,
}

pub fn build_bxz(layout: &EngineLayout) -> Bxz {
    let mut b = Bxz::zeros();
    for i in 0..4 {
        let [x, y, z] = layout.positions[i];
        let (cx, cz) = (2 * i, 2 * i + 1);
        b[(0, cx)] = 1.0;
        b[(2, cz)] = 1.0;
        b[(3, cz)] = y;
        b[(4, cx)] = z;
        b[(4, cz)] = -x;
        b[(5, cx)] = -y;
    }
    b
}

/// Numerical rank with the same relative cutoff the pseudo-inverse uses.
pub fn rank(b: &Bxz) -> usize {
    let sv = b.singular_values();
    let cutoff = PINV_CUTOFF * sv.max();
    sv.iter().filter(|s| **s > cutoff).count()
}

const PINV_CUTOFF: f64 = 1e-10;

/// Precomputed `B_xz` and its pseudo-inverse for a layout.
#[derive(Debug, Clone)]
pub struct Allocator {
    layout: EngineLayout,
    bxz: Bxz,
    pinv: SMatrix<f64, 8, 6>,
}

impl Allocator {
    pub fn new(layout: EngineLayout) -> Result<Self> {
        let bxz = build_bxz(&layout);
        if rank(&bxz) != 5 {
            return Err(Error::InvalidParameter(
                "engine layout is degenerate: B_xz must have rank 5".into(),
            ));
        }
        let svd = bxz.svd(true, true);
        let cutoff = PINV_CUTOFF * svd.singular_values.max();
        let pinv = svd
            .pseudo_inverse(cutoff)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Allocator { layout, bxz, pinv })
    }

    pub fn layout(&self) -> &EngineLayout {
        &self.layout
    }

    pub fn bxz(&self) -> &Bxz {
        &self.bxz
    }

    pub fn pseudo_inverse(&self) -> &SMatrix<f64, 8, 6> {
        &self.pinv
    }

    /// Minimum-norm `f_xz` with `B_xz f_xz = tau`. Rejects wrenches outside
    /// the range of `B_xz` (i.e. with a lateral force).
    pub fn allocate(&self, tau: &Vec6) -> Result<ForceVector> {
        let f = self.pinv * tau;
        let residual = (self.bxz * f - tau).norm();
        let tol = 1e-9 * tau.norm().max(1.0);
        if residual > tol {
            return Err(Error::ResidualTooLarge { residual, tol });
        }
        Ok(f)
    }

    pub fn wrench(&self, f: &ForceVector) -> Vec6 {
        self.bxz * f
    }
}

pub fn to_engine_commands(f: &ForceVector) -> [EngineCommand; 4] {
    std::array::from_fn(|i| {
        let (fx, fz) = (f[2 * i], f[2 * i + 1]);
        if fx == 0.0 && fz == 0.0 {
            EngineCommand {
                magnitude: 0.0,
                tilt: 0.0,
            }
        } else {
            EngineCommand {
                magnitude: fx.hypot(fz).sqrt(),
                tilt: fz.atan2(fx),
            }
        }
    })
}

/// Monotone map from engine command to thrust (N) with saturation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThrustCurve {
    /// `thrust = gain * min(command, max_command)^2`.
    Quadratic { gain: f64, max_command: f64 },
    /// Piecewise-linear through `(command, thrust)` points, clamped beyond
    /// the last point. `(0, 0)` is implied when the table starts above zero.
    Table { points: Vec<(f64, f64)> },
}

impl Default for ThrustCurve {
    /// `thrust = command^2`, saturating at 2 N.
    fn default() -> Self {
        ThrustCurve::Quadratic {
            gain: 1.0,
            max_command: 2f64.sqrt(),
        }
    }
}

impl ThrustCurve {
    /// The unsaturated inverse of the square-root command map.
    pub fn ideal() -> Self {
        ThrustCurve::Quadratic {
            gain: 1.0,
            max_command: f64::INFINITY,
        }
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("thrust table is empty".into()));
        }
        if points.iter().any(|(c, t)| !c.is_finite() || !t.is_finite()) {
            return Err(Error::Config("thrust table has non-finite entries".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(
                "thrust table commands must be strictly increasing".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::Config("thrust table must be nondecreasing".into()));
        }
        let (c0, t0) = points[0];
        if c0 < 0.0 {
            return Err(Error::Config(
                "thrust table commands must be non-negative".into(),
            ));
        }
        if c0 == 0.0 && t0 != 0.0 {
            return Err(Error::Config("thrust at zero command must be zero".into()));
        }
        if t0 < 0.0 {
            return Err(Error::Config("thrust must be non-negative".into()));
        }
        if c0 > 0.0 {
            points.insert(0, (0.0, 0.0));
        }
        Ok(ThrustCurve::Table { points })
    }

    /// Two-column CSV `command,thrust_N` with a header row.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = Vec::new();
        for (line, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
            let rec =
                rec.map_err(|e| Error::Config(format!("thrust table row {}: {e}", line + 2)))?;
            points.push(rec);
        }
        Self::table(points)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let f =
            std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(f)
    }

    pub fn thrust(&self, command: f64) -> f64 {
        let c = command.max(0.0);
        match self {
            ThrustCurve::Quadratic { gain, max_command } => {
                let c = c.min(*max_command);
                gain * c * c
            }
            ThrustCurve::Table { points } => {
                let last = points[points.len() - 1];
                if c >= last.0 {
                    return last.1;
                }
                let i = points.partition_point(|(x, _)| *x <= c);
                let (x0, y0) = points[i - 1];
                let (x1, y1) = points[i];
                y0 + (y1 - y0) * (c - x0) / (x1 - x0)
            }
        }
    }

    pub fn max_thrust(&self) -> f64 {
        match self {
            ThrustCurve::Quadratic { gain, max_command } => gain * max_command * max_command,
            ThrustCurve::Table { points } => points[points.len() - 1].1,
        }
    }
}

/// Lagged propulsion: each engine's command vector
/// `f_i (cos alpha_i, sin alpha_i)` follows its setpoint through a
/// first-order lag, then is converted to thrust through the curve.
#[derive(Debug, Clone)]
pub struct Actuators {
    allocator: Allocator,
    curve: ThrustCurve,
    lag: f64,
    state: [Vector2<f64>; 4],
}

impl Actuators {
    pub fn new(allocator: Allocator, curve: ThrustCurve, lag: f64) -> Result<Self> {
        if !(lag >= 0.0) || !lag.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "actuator lag {lag} must be >= 0"
            )));
        }
        Ok(Actuators {
            allocator,
            curve,
            lag,
            state: [Vector2::zeros(); 4],
        })
    }

    pub fn allocator(&self) -> &Allocator {
        &self.allocator
    }

    /// Current (lagged) engine commands.
    pub fn commands(&self) -> [EngineCommand; 4] {
        std::array::from_fn(|i| {
            let u = self.state[i];
            EngineCommand {
                magnitude: u.norm(),
                tilt: if u.norm() == 0.0 { 0.0 } else { u.y.atan2(u.x) },
            }
        })
    }

    /// Advances the lag by `dt` towards `cmd` and returns the wrench the
    /// engines actually produce.
    pub fn apply(&mut self, cmd: &[EngineCommand; 4], dt: f64) -> Vec6 {
        let blend = if self.lag == 0.0 {
            1.0
        } else {
            1.0 - (-dt / self.lag).exp()
        };
        let mut forces = ForceVector::zeros();
        for i in 0..4 {
            let target = Vector2::new(cmd[i].tilt.cos(), cmd[i].tilt.sin()) * cmd[i].magnitude;
            self.state[i] += (target - self.state[i]) * blend;
            let m = self.state[i].norm();
            if m > 0.0 {
                let f = self.state[i] * (self.curve.thrust(m) / m);
                forces[2 * i] = f.x;
                forces[2 * i + 1] = f.y;
            }
        }
        self.allocator.wrench(&forces)
    }
}
