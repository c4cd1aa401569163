//! Text and JSON summaries of certification and simulation runs.

use std::fmt::Write as _;

use contdef_core::monitor::{
    anomaly_screen, error_statistics, error_statistics_excluding, evaluate_constraints, ConstraintOutcome,
    ConstraintReport, PhaseSummary, Reference, StallInterval, StatisticsTable,
};
use contdef_core::netsim::{link_statistics, LinkStatistics};
use contdef_core::safety::{certify_plan, CertificateReport, CertificateSample, SafetyMargins};
use contdef_core::sim::{run_formation, SimOutput};
use contdef_core::{guidance, AgentId};
use serde::Serialize;

use crate::{CliError, Loaded};

/// Certificate without its per-sample series.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub margins: SafetyMargins,
    pub passed: bool,
    pub worst: CertificateSample,
    pub worst_margin: f64,
    pub first_violation: Option<f64>,
    pub min_leader_edge_m: f64,
    pub samples: usize,
}

impl From<&CertificateReport> for CertificateSummary {
    fn from(r: &CertificateReport) -> Self {
        Self {
            margins: r.margins,
            passed: r.passed,
            worst: r.worst,
            worst_margin: r.worst_margin,
            first_violation: r.first_violation,
            min_leader_edge_m: r.min_leader_edge,
            samples: r.samples.len(),
        }
    }
}

pub fn certify(loaded: &Loaded) -> Result<CertificateReport, CliError> {
    let rate = loaded.sim.link.rate_hz;
    let transforms = guidance::plan_to_transforms(&loaded.spec, &loaded.plan, rate)?;
    Ok(certify_plan(&loaded.spec, &transforms)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Statistics {
    pub global: StatisticsTable,
    pub local: StatisticsTable,
    /// Global statistics with flagged controller stalls removed.
    pub global_screened: StatisticsTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub certificate: CertificateSummary,
    pub constraints: Vec<ConstraintOutcome>,
    pub phases: Vec<PhaseSummary>,
    pub max_global_deviation_m: Vec<(AgentId, f64)>,
    pub max_local_deviation_m: Vec<(AgentId, f64)>,
    pub statistics: Statistics,
    pub anomalies: Vec<StallInterval>,
    pub link: LinkStatistics,
    pub passed: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub certificate: CertificateReport,
    pub output: SimOutput,
    pub constraints: ConstraintReport,
    pub summary: RunSummary,
}

/// Simulates a loaded scenario and evaluates the result.
pub fn execute(loaded: &Loaded) -> Result<RunArtifacts, CliError> {
    let certificate = certify(loaded)?;
    let output = run_formation(&loaded.spec, &loaded.plan, &loaded.sim)?;
    let constraints = evaluate_constraints(&output.trace, &loaded.spec, &output.transforms)?;
    let s = &loaded.scenario.simulation;
    let anomalies = anomaly_screen(&output.trace, s.stall_threshold_s);
    let statistics = Statistics {
        global: error_statistics(&output.trace, Reference::Global, s.warmup_s)?,
        local: error_statistics(&output.trace, Reference::Local, s.warmup_s)?,
        global_screened: error_statistics_excluding(&output.trace, Reference::Global, s.warmup_s, &anomalies)?,
    };
    let link = link_statistics(output.deliveries(), loaded.sim.link.rate_hz)?;
    let pair = |v: &[f64]| -> Vec<(AgentId, f64)> { constraints.agents.iter().copied().zip(v.iter().copied()).collect() };
    let summary = RunSummary {
        scenario: loaded.scenario.name.clone(),
        seed: loaded.scenario.seed,
        certificate: CertificateSummary::from(&certificate),
        constraints: constraints.outcomes.clone(),
        phases: constraints.phases.clone(),
        max_global_deviation_m: pair(&constraints.max_global_deviation),
        max_local_deviation_m: pair(&constraints.max_local_deviation),
        statistics,
        anomalies,
        link,
        passed: certificate.passed && constraints.all_passed(),
    };
    Ok(RunArtifacts {
        certificate,
        output,
        constraints,
        summary,
    })
}

/// Per-agent error table in centimeters.
pub fn statistics_table(tables: &[&StatisticsTable]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<10} {:>10} {:>10} {:>10} {:>8}",
        "agent", "reference", "mean (cm)", "std (cm)", "max (cm)", "samples"
    );
    for table in tables {
        let reference = match table.reference {
            Reference::Local => "local",
            Reference::Global => "global",
        };
        let rows = table
            .per_agent
            .iter()
            .map(|(id, s)| (id.to_string(), s))
            .chain(std::iter::once(("all".to_string(), &table.pooled)));
        for (name, s) in rows {
            let _ = writeln!(
                out,
                "{:<10} {:<10} {:>10.2} {:>10.2} {:>10.2} {:>8}",
                name,
                reference,
                s.mean * 100.0,
                s.std_dev * 100.0,
                s.max * 100.0,
                s.count
            );
        }
    }
    out
}

pub fn run_text(a: &RunArtifacts) -> String {
    let s = &a.summary;
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} (seed {})", s.scenario, s.seed);
    let _ = writeln!(out, "{}", a.certificate);
    let _ = writeln!(out);
    let _ = write!(out, "{}", a.constraints);
    let _ = writeln!(out);
    let _ = write!(
        out,
        "{}",
        statistics_table(&[&s.statistics.global, &s.statistics.local])
    );
    let _ = writeln!(out);
    if s.anomalies.is_empty() {
        let _ = writeln!(out, "no controller stalls");
    } else {
        for iv in &s.anomalies {
            let _ = writeln!(
                out,
                "controller stall: {} from {:.3} s for {:.3} s (excluded from screened statistics)",
                iv.agent,
                iv.start,
                iv.duration()
            );
        }
    }
    let l = &s.link;
    let _ = writeln!(
        out,
        "link: {} sent, {} delivered, {} dropped; gaps in periods {:?}",
        l.totals.sent, l.totals.delivered, l.totals.dropped, l.histogram
    );
    let _ = writeln!(out, "result {}", if s.passed { "PASS" } else { "FAIL" });
    out
}
