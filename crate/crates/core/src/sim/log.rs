//! Run logs and their on-disk form.
//!
//! The CSV has one row per log tick with the columns of [`CSV_HEADER`]:
//!
//! | columns | content |
//! |---|---|
//! | `t` | time (s) |
//! | `px py pz` | vehicle position in the base frame (m) |
//! | `r11 .. r33` | body-to-base rotation, row-major |
//! | `u v w p q r` | body-frame twist (m/s, rad/s) |
//! | `pdx pdy pdz` | reference position (m) |
//! | `exa eya eza` | true tracking error in body coordinates (m) |
//! | `pe ke oe` | true auxiliary error |
//! | `sp sk so` | sliding variable as seen by the controller |
//! | `tau1 .. tau6` | commanded wrench |
//! | `f1 .. f4`, `a1 .. a4` | engine commands and tilt angles (rad) |
//!
//! The JSON sidecar next to it holds the fully expanded config, the seed,
//! the run status, the events and the summary metrics.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::sim::summary::{summarize, Metrics};

pub const CSV_HEADER: [&str; 45] = [
    "t", "px", "py", "pz", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33", "u", "v",
    "w", "p", "q", "r", "pdx", "pdy", "pdz", "exa", "eya", "eza", "pe", "ke", "oe", "sp", "sk",
    "so", "tau1", "tau2", "tau3", "tau4", "tau5", "tau6", "f1", "f2", "f3", "f4", "a1", "a2", "a3",
    "a4",
];

pub const CSV_COLUMNS: usize = CSV_HEADER.len();

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub position: [f64; 3],
    pub rotation: [f64; 9],
    pub twist: [f64; 6],
    pub target: [f64; 3],
    pub ea: [f64; 3],
    pub aux: [f64; 3],
    pub sigma: [f64; 3],
    pub tau: [f64; 6],
    pub thrust: [f64; 4],
    pub tilt: [f64; 4],
    /// Wrench actually applied to the plant. Kept in memory only.
    #[serde(skip)]
    pub realized: [f64; 6],
}

impl LogRow {
    pub fn to_record(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(CSV_COLUMNS);
        v.push(self.t);
        v.extend_from_slice(&self.position);
        v.extend_from_slice(&self.rotation);
        v.extend_from_slice(&self.twist);
        v.extend_from_slice(&self.target);
        v.extend_from_slice(&self.ea);
        v.extend_from_slice(&self.aux);
        v.extend_from_slice(&self.sigma);
        v.extend_from_slice(&self.tau);
        v.extend_from_slice(&self.thrust);
        v.extend_from_slice(&self.tilt);
        v
    }

    pub fn from_record(v: &[f64]) -> Result<Self> {
        if v.len() != CSV_COLUMNS {
            return Err(Error::Io(format!(
                "expected {CSV_COLUMNS} columns, got {}",
                v.len()
            )));
        }
        let mut it = v.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (&mut it).take(n).collect() };
        let arr3 = |x: Vec<f64>| -> [f64; 3] { x.try_into().expect("length") };
        Ok(LogRow {
            t: take(1)[0],
            position: arr3(take(3)),
            rotation: take(9).try_into().expect("length"),
            twist: take(6).try_into().expect("length"),
            target: arr3(take(3)),
            ea: arr3(take(3)),
            aux: arr3(take(3)),
            sigma: arr3(take(3)),
            tau: take(6).try_into().expect("length"),
            thrust: take(4).try_into().expect("length"),
            tilt: take(4).try_into().expect("length"),
            realized: [0.0; 6],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_record().iter().all(|x| x.is_finite())
            && self.realized.iter().all(|x| x.is_finite())
    }

    pub fn ea_norm(&self) -> f64 {
        self.ea.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// A new position-noise offset was drawn.
    NoiseUpdate { offset: [f64; 3] },
    /// The controller could not be evaluated; the previous wrench is held.
    Singular { reason: String },
    /// The controller is valid again after a singular episode.
    Recovered { held_ticks: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Stopped on a singular configuration under the abort policy.
    Aborted {
        t: f64,
        reason: String,
    },
    /// Stopped because the state stopped being finite.
    Diverged {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    /// Fully expanded config the run used.
    pub config: ScenarioConfig,
    /// Initial position after seeded jitter.
    pub initial_position: [f64; 3],
    pub rows: Vec<LogRow>,
    pub events: Vec<Event>,
    pub status: RunStatus,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    name: &'a str,
    seed: u64,
    config: &'a ScenarioConfig,
    initial_position: [f64; 3],
    #[serde(flatten)]
    status: &'a RunStatus,
    rows: usize,
    metrics: Option<Metrics>,
    metrics_error: Option<String>,
    singular_events: usize,
    events: &'a [Event],
}

impl RunLog {
    pub fn singular_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Singular { .. }))
            .count()
    }

    pub fn noise_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::NoiseUpdate { .. }))
            .count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER).map_err(csv_err)?;
        for row in &self.rows {
            wr.write_record(row.to_record().iter().map(|x| x.to_string()))
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn sidecar_json(&self) -> serde_json::Value {
        let metrics = summarize(self, self.config.run.t_min);
        let side = Sidecar {
            name: &self.config.name,
            seed: self.config.seed,
            config: &self.config,
            initial_position: self.initial_position,
            status: &self.status,
            rows: self.rows.len(),
            metrics_error: metrics.as_ref().err().map(|e| e.to_string()),
            metrics: metrics.ok(),
            singular_events: self.singular_events(),
            events: &self.events,
        };
        serde_json::to_value(side).expect("sidecar serialises")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns both paths.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&csv_path)?))?;
        let text = serde_json::to_string_pretty(&self.sidecar_json())
            .map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(&json_path, text)?;
        Ok((csv_path, json_path))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Reads the rows of a run-log CSV, checking the header.
pub fn read_csv<R: Read>(r: R) -> Result<Vec<LogRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Io("run-log header does not match the schema".into()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Io(format!("bad number `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(LogRow::from_record(&vals)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> LogRow {
        let mut r = LogRow {
            t,
            ..Default::default()
        };
        for (i, x) in r.rotation.iter_mut().enumerate() {
            *x = i as f64 * 0.1 + t;
        }
        r.ea = [0.3, -0.05, 1.0 / 3.0];
        r.tilt = [std::f64::consts::PI, 0.0, -1e-300, 2.5];
        r
    }

    #[test]
    fn header_names_every_column() {
        assert_eq!(CSV_HEADER[0], "t");
        assert_eq!(CSV_HEADER[CSV_COLUMNS - 1], "a4");
        let unique: std::collections::HashSet<_> = CSV_HEADER.iter().collect();
        assert_eq!(unique.len(), CSV_COLUMNS);
        assert_eq!(row(0.0).to_record().len(), CSV_COLUMNS);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let log = RunLog {
            config: ScenarioConfig::default(),
            initial_position: [0.0; 3],
            rows: vec![row(0.0), row(0.1)],
            events: vec![],
            status: RunStatus::Completed,
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,px,py,pz,r11,"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, log.rows);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
