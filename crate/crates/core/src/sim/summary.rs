//! Steady-state tracking metrics of a run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::log::RunLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub max_abs_xe: f64,
    pub max_abs_ye: f64,
    pub max_abs_ze: f64,
    pub max_ea_norm: f64,
    /// Mean of `|pe - delta_p|`.
    pub mean_pe_offset: f64,
    pub max_sigma_norm: f64,
    pub samples: usize,
}

/// Metrics over the rows with `t > t_min`.
pub fn summarize(log: &RunLog, t_min: f64) -> Result<Metrics> {
    let delta_p = log.config.controller.offset[0];
    let mut m = Metrics {
        max_abs_xe: 0.0,
        max_abs_ye: 0.0,
        max_abs_ze: 0.0,
        max_ea_norm: 0.0,
        mean_pe_offset: 0.0,
        max_sigma_norm: 0.0,
        samples: 0,
    };
    let mut offset_sum = 0.0;
    for r in log.rows.iter().filter(|r| r.t > t_min) {
        m.max_abs_xe = m.max_abs_xe.max(r.ea[0].abs());
        m.max_abs_ye = m.max_abs_ye.max(r.ea[1].abs());
        m.max_abs_ze = m.max_abs_ze.max(r.ea[2].abs());
        m.max_ea_norm = m.max_ea_norm.max(r.ea_norm());
        let s = r.sigma.iter().map(|x| x * x).sum::<f64>().sqrt();
        m.max_sigma_norm = m.max_sigma_norm.max(s);
        offset_sum += (r.aux[0] - delta_p).abs();
        m.samples += 1;
    }
    if m.samples == 0 {
        return Err(Error::EmptyWindow(t_min));
    }
    m.mean_pe_offset = offset_sum / m.samples as f64;
    Ok(m)
}
