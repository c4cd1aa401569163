//! CSV and JSON files written by `run`.
//!
//! Time series are decimated to the broadcast rate: for every period
//! boundary `k / rate` the first simulation sample at or after it is kept.

use std::fs;
use std::path::{Path, PathBuf};

use contdef_core::monitor::{ConstraintReport, ConstraintSample, StatisticsTable};
use contdef_core::netsim::DeliveryRecord;
use contdef_core::trace::SimTrace;

use crate::report::{run_text, RunArtifacts};
use crate::CliError;

pub const TRACE_FILE: &str = "trace.csv";
pub const DELIVERIES_FILE: &str = "deliveries.csv";
pub const STATISTICS_FILE: &str = "statistics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.txt";
pub const PANEL_FILES: [&str; 4] = [
    "panel_a_boundary.csv",
    "panel_b_nearest_neighbor.csv",
    "panel_c_local_deviation.csv",
    "panel_d_global_deviation.csv",
];

/// Creates `dir`, refusing to reuse a non-empty one unless `force` is set.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    let write_err = |source| CliError::Write {
        path: dir.to_owned(),
        source,
    };
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(write_err)?.next().is_some();
        if non_empty && !force {
            return Err(CliError::OutputExists(dir.to_owned()));
        }
    }
    fs::create_dir_all(dir).map_err(write_err)
}

/// Indices of the samples kept when decimating to `rate_hz`.
pub fn decimation_indices(times: impl Iterator<Item = f64>, rate_hz: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut next = 0u64;
    for (i, t) in times.enumerate() {
        if t >= next as f64 / rate_hz - 1e-9 {
            out.push(i);
            next = (t * rate_hz + 1e-9).floor() as u64 + 1;
        }
    }
    out
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_trace(trace: &SimTrace, rate_hz: f64, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["t_s".to_string(), "phase".to_string()];
    for id in &trace.agents {
        for col in [
            "global_x_m",
            "global_y_m",
            "local_x_m",
            "local_y_m",
            "setpoint_x_m",
            "setpoint_y_m",
            "x_m",
            "y_m",
            "vx_mps",
            "vy_mps",
            "ax_cmd_mps2",
            "ay_cmd_mps2",
            "controller_ran",
            "messages_received",
        ] {
            header.push(format!("a{}_{}", id.0, col));
        }
    }
    w.write_record(&header)?;

    // delivery times per agent, for the cumulative message count
    let mut arrivals: Vec<Vec<f64>> = trace
        .agents
        .iter()
        .map(|&id| {
            let mut v: Vec<f64> = trace
                .deliveries
                .iter()
                .filter(|d| d.destination == id)
                .filter_map(|d| d.deliver_time)
                .collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let mut cursor = vec![0usize; trace.agents.len()];

    for i in decimation_indices(trace.samples.iter().map(|s| s.t), rate_hz) {
        let s = &trace.samples[i];
        let mut row = vec![num(s.t), s.phase.to_string()];
        for (k, a) in s.agents.iter().enumerate() {
            let times = &mut arrivals[k];
            while cursor[k] < times.len() && times[cursor[k]] <= s.t + 1e-12 {
                cursor[k] += 1;
            }
            row.extend([
                num(a.global_desired.x),
                num(a.global_desired.y),
                num(a.local_desired.x),
                num(a.local_desired.y),
                num(a.setpoint.x),
                num(a.setpoint.y),
                num(a.position.x),
                num(a.position.y),
                num(a.velocity.x),
                num(a.velocity.y),
                num(a.command.x),
                num(a.command.y),
                u8::from(a.controller_ran).to_string(),
                cursor[k].to_string(),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

pub fn write_deliveries(log: &[DeliveryRecord], path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["send_time_s", "deliver_time_s", "destination", "dropped"])?;
    for r in log {
        w.write_record([
            num(r.send_time),
            r.deliver_time.map(num).unwrap_or_default(),
            r.destination.0.to_string(),
            u8::from(r.dropped).to_string(),
        ])?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

/// One panel: a value per agent plus constant threshold columns.
fn write_panel(
    report: &ConstraintReport,
    rate_hz: f64,
    path: &Path,
    values: impl Fn(&ConstraintSample) -> &[f64],
    thresholds: &[(&str, f64)],
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["t_s".to_string(), "phase".to_string()];
    header.extend(report.agents.iter().map(|id| format!("agent_{}_m", id.0)));
    header.extend(thresholds.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    for i in decimation_indices(report.samples.iter().map(|s| s.t), rate_hz) {
        let s = &report.samples[i];
        let mut row = vec![num(s.t), s.phase.to_string()];
        row.extend(values(s).iter().map(|&v| num(v)));
        row.extend(thresholds.iter().map(|&(_, v)| num(v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

pub fn write_panels(report: &ConstraintReport, rate_hz: f64, dir: &Path) -> Result<(), CliError> {
    let (eps, delta) = (report.epsilon, report.delta);
    write_panel(
        report,
        rate_hz,
        &dir.join(PANEL_FILES[0]),
        |s| &s.bounding_distance,
        &[("epsilon_m", eps), ("minus_delta_m", -delta)],
    )?;
    write_panel(
        report,
        rate_hz,
        &dir.join(PANEL_FILES[1]),
        |s| &s.nearest_neighbor,
        &[("two_epsilon_m", 2.0 * eps)],
    )?;
    write_panel(
        report,
        rate_hz,
        &dir.join(PANEL_FILES[2]),
        |s| &s.local_deviation,
        &[("delta_m", delta)],
    )?;
    write_panel(
        report,
        rate_hz,
        &dir.join(PANEL_FILES[3]),
        |s| &s.global_deviation,
        &[("delta_m", delta)],
    )
}

pub fn write_statistics(tables: &[&StatisticsTable], path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["agent", "reference", "mean_cm", "std_cm", "max_cm", "samples"])?;
    for t in tables {
        let reference = format!("{:?}", t.reference).to_lowercase();
        let rows = t
            .per_agent
            .iter()
            .map(|(id, s)| (id.0.to_string(), s))
            .chain(std::iter::once(("all".to_string(), &t.pooled)));
        for (agent, s) in rows {
            w.write_record([
                agent,
                reference.clone(),
                num(s.mean * 100.0),
                num(s.std_dev * 100.0),
                num(s.max * 100.0),
                s.count.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

/// Writes every run artifact into `dir` and returns the files written.
pub fn write_run(a: &RunArtifacts, rate_hz: f64, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let trace = &a.output.trace;
    write_trace(trace, rate_hz, &dir.join(TRACE_FILE))?;
    write_deliveries(&trace.deliveries, &dir.join(DELIVERIES_FILE))?;
    write_panels(&a.constraints, rate_hz, dir)?;
    let st = &a.summary.statistics;
    write_statistics(&[&st.global, &st.local], &dir.join(STATISTICS_FILE))?;
    write_text(&dir.join(SUMMARY_FILE), &serde_json::to_string_pretty(&a.summary)?)?;
    write_text(&dir.join(REPORT_FILE), &run_text(a))?;

    let mut files: Vec<PathBuf> = [TRACE_FILE, DELIVERIES_FILE, STATISTICS_FILE, SUMMARY_FILE, REPORT_FILE]
        .iter()
        .chain(PANEL_FILES.iter())
        .map(|f| dir.join(f))
        .collect();
    files.sort();
    Ok(files)
}
