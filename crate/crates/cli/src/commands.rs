use std::io::Write;
use std::path::{Path, PathBuf};

use contdef_core::monitor::ErrorStatistics;
use serde::Serialize;

use crate::output::{prepare_dir, write_run};
use crate::report::{certify, execute, CertificateSummary};
use crate::scenario::SquareSection;
use crate::{CliError, Loaded, Outcome, Scenario};

fn out_err(e: std::io::Error) -> CliError {
    CliError::Write {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

pub fn cmd_certify(path: &Path, json: bool, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let loaded = Scenario::load(path)?;
    let report = certify(&loaded)?;
    if json {
        serde_json::to_writer_pretty(&mut *out, &CertificateSummary::from(&report))?;
        writeln!(out).map_err(out_err)?;
    } else {
        writeln!(out, "scenario {}", loaded.scenario.name).map_err(out_err)?;
        writeln!(out, "{report}").map_err(out_err)?;
    }
    Ok(Outcome::from_pass(report.passed))
}

/// Output directory: the flag (or its environment variable), then the
/// scenario's own setting, then `contdef-out/<name>`.
pub fn output_dir(flag: Option<&Path>, loaded: &Loaded) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| loaded.scenario.simulation.output_dir.clone())
        .unwrap_or_else(|| Path::new("contdef-out").join(&loaded.scenario.name))
}

/// Flies the scenario. A plan that fails certification is only flown with
/// `force`, which also allows overwriting a non-empty output directory.
pub fn cmd_run(path: &Path, out_dir: Option<&Path>, force: bool, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let loaded = Scenario::load(path)?;
    let report = certify(&loaded)?;
    if !report.passed && !force {
        writeln!(out, "{report}").map_err(out_err)?;
        writeln!(out, "certificate failed; not flying (use --force to override)").map_err(out_err)?;
        return Ok(Outcome::Fail);
    }
    let dir = output_dir(out_dir, &loaded);
    prepare_dir(&dir, force)?;
    log::info!("running {} into {}", loaded.scenario.name, dir.display());
    let artifacts = execute(&loaded)?;
    let files = write_run(&artifacts, loaded.sim.link.rate_hz, &dir)?;
    write!(out, "{}", crate::report::run_text(&artifacts)).map_err(out_err)?;
    for f in files {
        writeln!(out, "wrote {}", f.display()).map_err(out_err)?;
    }
    Ok(Outcome::from_pass(artifacts.summary.passed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepParam {
    VMax,
    DropProbability,
    Delta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::VMax => "v_max_mps",
            SweepParam::DropProbability => "drop_probability",
            SweepParam::Delta => "delta_m",
        }
    }

    /// Scenario with the parameter set to `value`. A `v_max` sweep switches
    /// the square legs to the midpoint-velocity form.
    pub fn apply(self, base: &Scenario, value: f64) -> Scenario {
        let mut s = base.clone();
        match self {
            SweepParam::VMax => s.mission.square = SquareSection::MidpointVelocity { v_max_mps: value },
            SweepParam::DropProbability => s.network.drop_probability = value,
            SweepParam::Delta => s.formation.delta_m = value,
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub certificate_passed: bool,
    pub constraints_passed: bool,
    pub global: ErrorStatistics,
    pub local: ErrorStatistics,
    pub dropped: usize,
}

pub fn sweep_rows(base: &Scenario, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let results: Vec<Result<SweepRow, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&value| {
                scope.spawn(move || {
                    let loaded = param.apply(base, value).resolve()?;
                    let a = execute(&loaded)?;
                    Ok(SweepRow {
                        value,
                        certificate_passed: a.certificate.passed,
                        constraints_passed: a.constraints.all_passed(),
                        global: a.summary.statistics.global.pooled,
                        local: a.summary.statistics.local.pooled,
                        dropped: a.summary.link.totals.dropped,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

pub fn sweep_table(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut s = format!(
        "{:>16} {:>10} {:>10} {:>10} {:>10} {:>8} {:>12}\n",
        param.name(),
        "mean (cm)",
        "std (cm)",
        "max (cm)",
        "local max",
        "dropped",
        "constraints"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>16} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>8} {:>12}\n",
            r.value,
            r.global.mean * 100.0,
            r.global.std_dev * 100.0,
            r.global.max * 100.0,
            r.local.max * 100.0,
            r.dropped,
            match (r.certificate_passed, r.constraints_passed) {
                (false, _) => "uncertified",
                (true, true) => "pass",
                (true, false) => "FAIL",
            }
        ));
    }
    s
}

pub fn cmd_sweep(
    path: &Path,
    param: SweepParam,
    values: &[f64],
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    let base = Scenario::from_toml(&text)?;
    let rows = sweep_rows(&base, param, values)?;
    write!(out, "{}", sweep_table(param, &rows)).map_err(out_err)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_owned(),
            source,
        })?;
        let file = dir.join("sweep.csv");
        let mut w = csv::Writer::from_path(&file)?;
        w.write_record([param.name(), "mean_cm", "std_cm", "max_cm", "local_max_cm", "dropped", "certified", "constraints_pass"])?;
        for r in &rows {
            w.write_record([
                format!("{}", r.value),
                format!("{}", r.global.mean * 100.0),
                format!("{}", r.global.std_dev * 100.0),
                format!("{}", r.global.max * 100.0),
                format!("{}", r.local.max * 100.0),
                r.dropped.to_string(),
                u8::from(r.certificate_passed).to_string(),
                u8::from(r.constraints_passed).to_string(),
            ])?;
        }
        w.flush().map_err(|source| CliError::Write {
            path: file.clone(),
            source,
        })?;
        writeln!(out, "wrote {}", file.display()).map_err(out_err)?;
    }
    Ok(Outcome::Pass)
}
