//! `airship` command-line front end: config validation, single runs and
//! parameter sweeps.

use std::path::{Path, PathBuf};

use airship_core::config::SweepAxis;
use airship_core::sim::{run_scenario_partial, summarize, Metrics, RunLog, RunStatus};
use airship_core::{Error, ScenarioConfig};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "AIRSHIP_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "airship",
    version,
    about = "Sliding-mode trajectory tracking simulator for an underactuated airship",
    after_help = "Exit codes: 0 success, 1 a run failed (singular abort, divergence), 2 usage or config error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config and list every violated condition.
    Validate { config: PathBuf },
    /// Run one scenario and write `<name>_seed<N>.csv` and `.json`.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $AIRSHIP_OUT, the config's
        /// batch.output_dir, or ./runs]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of sweep axes times seeds and write
    /// `summary.csv`.
    Sweep {
        config: PathBuf,
        /// `PATH=v1,v2,...`, e.g. `controller.epsilon.0=1,0.1`; repeatable.
        /// Added to the config's own sweep axes.
        #[arg(long = "axis", value_name = "PATH=VALUES")]
        axes: Vec<String>,
        /// Seeds per sweep point [default: batch.repeat].
        #[arg(long)]
        seeds: Option<u32>,
        /// Parallel runs [default: logical cores].
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the log of every run.
        #[arg(long)]
        logs: bool,
    },
}

pub fn output_dir(flag: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.batch
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn load(path: &Path) -> Result<ScenarioConfig, String> {
    ScenarioConfig::load(path).map_err(|e| match e {
        // already names the file
        Error::Io(_) => e.to_string(),
        _ => format!("{}: {e}", path.display()),
    })
}

/// Parses one `PATH=v1,v2` spec. Values are TOML literals; bare words are
/// taken as strings.
pub fn parse_axis(spec: &str) -> Result<SweepAxis, String> {
    let (path, values) = spec
        .split_once('=')
        .ok_or_else(|| format!("axis `{spec}` is not PATH=v1,v2,..."))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(format!("axis `{spec}` has an empty path"));
    }
    let values = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(parse_value)
        .collect::<Vec<_>>();
    if values.is_empty() {
        return Err(format!("axis `{path}` has no values"));
    }
    Ok(SweepAxis {
        path: path.to_string(),
        values,
    })
}

fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn cmd_validate(path: &Path) -> i32 {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let diags = cfg.diagnostics();
    if diags.is_empty() {
        println!("{}: ok", path.display());
        EXIT_OK
    } else {
        for d in &diags {
            println!("{}: {d}", path.display());
        }
        EXIT_USAGE
    }
}

pub fn cmd_run(path: &Path, seed: Option<u64>, out: Option<&Path>) -> i32 {
    let mut cfg = match load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let log = match run_scenario_partial(&cfg) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let dir = output_dir(out, &cfg);
    let stem = format!("{}_seed{}", cfg.name, cfg.seed);
    match log.write_files(&dir, &stem) {
        Ok((csv, json)) => {
            println!("wrote {} and {}", csv.display(), json.display());
        }
        Err(e) => {
            eprintln!("error: writing logs: {e}");
            return EXIT_RUN_FAILED;
        }
    }
    report(&log);
    match &log.status {
        RunStatus::Completed => EXIT_OK,
        other => {
            eprintln!("run failed: {}", status_text(other));
            EXIT_RUN_FAILED
        }
    }
}

fn report(log: &RunLog) {
    match summarize(log, log.config.run.t_min) {
        Ok(m) => println!(
            "t > {}: max|e^a| = {:.4} m, mean|pe - delta_p| = {:.4} m, max|sigma| = {:.4}, singular events = {}",
            log.config.run.t_min,
            m.max_ea_norm,
            m.mean_pe_offset,
            m.max_sigma_norm,
            log.singular_events()
        ),
        Err(e) => println!("no summary: {e}"),
    }
    if let Some(last) = log.rows.last() {
        println!(
            "final pe = {:.4} m, ke = {:.4}, oe = {:.4}",
            last.aux[0], last.aux[1], last.aux[2]
        );
    }
    let noise = log.noise_events();
    if noise > 0 {
        println!("noise updates = {noise}");
    }
}

fn status_text(s: &RunStatus) -> String {
    match s {
        RunStatus::Completed => "completed".into(),
        RunStatus::Aborted { t, reason } => format!("aborted at t = {t:.3} s: {reason}"),
        RunStatus::Diverged { t } => format!("diverged at t = {t:.3} s"),
    }
}

/// One executed sweep point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub values: Vec<toml::Value>,
    pub seed: u64,
    pub status: String,
    pub metrics: Option<Metrics>,
    pub singular_events: usize,
    pub error: String,
}

/// Expands `axes` × seeds into concrete configs, in row-major order (last
/// axis fastest, seeds innermost).
pub fn expand(
    base: &ScenarioConfig,
    axes: &[SweepAxis],
    seeds: u32,
) -> Result<Vec<(Vec<toml::Value>, ScenarioConfig)>, Error> {
    let mut points: Vec<(Vec<toml::Value>, ScenarioConfig)> = vec![(Vec::new(), base.clone())];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for (vals, cfg) in &points {
            for v in &axis.values {
                let c = cfg.with_override(&axis.path, v.clone())?;
                let mut vv = vals.clone();
                vv.push(v.clone());
                next.push((vv, c));
            }
        }
        points = next;
    }
    let mut out = Vec::with_capacity(points.len() * seeds as usize);
    for (vals, cfg) in points {
        for k in 0..seeds as u64 {
            let mut c = cfg.clone();
            c.seed = base.seed + k;
            out.push((vals.clone(), c));
        }
    }
    Ok(out)
}

fn run_point(
    cfg: &ScenarioConfig,
    values: Vec<toml::Value>,
    log_dir: Option<(&Path, usize)>,
) -> SweepRow {
    let seed = cfg.seed;
    let log = match run_scenario_partial(cfg) {
        Ok(l) => l,
        Err(e) => {
            return SweepRow {
                values,
                seed,
                status: "invalid".into(),
                metrics: None,
                singular_events: 0,
                error: e.to_string(),
            }
        }
    };
    let mut error = String::new();
    if let Some((dir, idx)) = log_dir {
        if let Err(e) = log.write_files(dir, &format!("{}_{idx:04}_seed{seed}", cfg.name)) {
            error = format!("writing logs: {e}");
        }
    }
    let (status, reason) = match &log.status {
        RunStatus::Completed => ("completed", String::new()),
        RunStatus::Aborted { .. } => ("aborted", status_text(&log.status)),
        RunStatus::Diverged { .. } => ("diverged", status_text(&log.status)),
    };
    let metrics = match summarize(&log, cfg.run.t_min) {
        Ok(m) => Some(m),
        Err(e) => {
            if reason.is_empty() && error.is_empty() {
                error = e.to_string();
            }
            None
        }
    };
    if !reason.is_empty() {
        error = if error.is_empty() {
            reason
        } else {
            format!("{reason}; {error}")
        };
    }
    SweepRow {
        values,
        seed,
        status: status.into(),
        metrics,
        singular_events: log.singular_events(),
        error,
    }
}

pub fn write_summary(
    path: &Path,
    name: &str,
    axes: &[SweepAxis],
    rows: &[SweepRow],
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["name".to_string()];
    header.extend(axes.iter().map(|a| a.path.clone()));
    header.extend(
        [
            "seed",
            "status",
            "max_abs_xe",
            "max_abs_ye",
            "max_abs_ze",
            "max_ea_norm",
            "mean_pe_offset",
            "max_sigma_norm",
            "singular_events",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(r.values.iter().map(value_text));
        rec.push(r.seed.to_string());
        rec.push(r.status.clone());
        match &r.metrics {
            Some(m) => rec.extend(
                [
                    m.max_abs_xe,
                    m.max_abs_ye,
                    m.max_abs_ze,
                    m.max_ea_norm,
                    m.mean_pe_offset,
                    m.max_sigma_norm,
                ]
                .map(|x| x.to_string()),
            ),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        rec.push(r.singular_events.to_string());
        rec.push(r.error.clone());
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn cmd_sweep(
    path: &Path,
    axis_specs: &[String],
    seeds: Option<u32>,
    jobs: Option<usize>,
    out: Option<&Path>,
    logs: bool,
) -> i32 {
    let base = match load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut axes = base.batch.sweep.clone();
    for spec in axis_specs {
        match parse_axis(spec) {
            Ok(a) => {
                axes.retain(|x| x.path != a.path);
                axes.push(a);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let seeds = seeds.unwrap_or(base.batch.repeat);
    if seeds == 0 {
        eprintln!("error: --seeds must be at least 1");
        return EXIT_USAGE;
    }
    let points = match expand(&base, &axes, seeds) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let dir = output_dir(out, &base);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: {}: {e}", dir.display());
        return EXIT_RUN_FAILED;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let log_dir = logs.then_some(dir.as_path());
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .into_par_iter()
            .enumerate()
            .map(|(i, (vals, cfg))| run_point(&cfg, vals, log_dir.map(|d| (d, i))))
            .collect()
    });
    let summary = dir.join("summary.csv");
    if let Err(e) = write_summary(&summary, &base.name, &axes, &rows) {
        eprintln!("error: {}: {e}", summary.display());
        return EXIT_RUN_FAILED;
    }
    let failed = rows.iter().filter(|r| r.status != "completed").count();
    println!(
        "wrote {} ({} runs, {} failed)",
        summary.display(),
        rows.len(),
        failed
    );
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_RUN_FAILED
    }
}

pub fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Run { config, seed, out } => cmd_run(&config, seed, out.as_deref()),
        Command::Sweep {
            config,
            axes,
            seeds,
            jobs,
            out,
            logs,
        } => cmd_sweep(&config, &axes, seeds, jobs, out.as_deref(), logs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_are_toml_literals() {
        let a = parse_axis("controller.epsilon.0=1, 0.1").unwrap();
        assert_eq!(a.path, "controller.epsilon.0");
        assert_eq!(
            a.values,
            vec![toml::Value::Integer(1), toml::Value::Float(0.1)]
        );
        let b = parse_axis("controller.switching=sign,sigmoid").unwrap();
        assert_eq!(b.values[0], toml::Value::String("sign".into()));
        assert!(parse_axis("no_equals").is_err());
        assert!(parse_axis("x=").is_err());
        assert!(parse_axis("=1").is_err());
    }

    #[test]
    fn expansion_is_cartesian_times_seeds() {
        let base = ScenarioConfig::default();
        let axes = vec![
            parse_axis("controller.epsilon.0=1,0.1").unwrap(),
            parse_axis("measurement.noise_amplitude=0,0.1,0.2").unwrap(),
        ];
        let pts = expand(&base, &axes, 2).unwrap();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0].1.controller.epsilon[0], 1.0);
        assert_eq!(pts[11].1.controller.epsilon[0], 0.1);
        assert_eq!(pts[11].1.measurement.noise_amplitude, 0.2);
        assert_eq!((pts[0].1.seed, pts[1].1.seed), (0, 1));
        assert_eq!(expand(&base, &[], 1).unwrap().len(), 1);
        assert!(expand(&base, &[parse_axis("bogus.path=1").unwrap()], 1).is_err());
    }
}
