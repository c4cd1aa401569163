//! In-flight constraint monitors and tracking-error statistics.
//!
//! Boundary distances are signed, positive inside the leading triangle. The
//! leading triangle is the one spanned by the leaders' global desired
//! positions, so the containment test reads "the follower's ball stays inside
//! the triangle the leaders are supposed to form".

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::formation::{AgentId, FormationSpec, TimedTransform};
use crate::geom::{signed_distance_to_triangle, Vec2};
use crate::trace::{SimTrace, TraceSample};

/// Allowed time mismatch between a trace sample and its transform (s).
const ALIGNMENT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintSample {
    pub t: f64,
    pub phase: u32,
    /// Per follower, in the formation's follower order.
    pub boundary_distance: Vec<f64>,
    /// Per agent, in trace order. The rest are per agent as well.
    pub bounding_distance: Vec<f64>,
    pub nearest_neighbor: Vec<f64>,
    pub local_deviation: Vec<f64>,
    pub global_deviation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Constraint {
    /// Followers at least ε inside the leading triangle.
    Containment,
    /// Every agent within δ outside the leading triangle.
    BoundingTriangle,
    /// Every pair of agents at least 2ε apart.
    Collision,
    /// Local deviation at most δ.
    LocalDeviation,
    /// Global deviation at most δ.
    GlobalDeviation,
}

impl Constraint {
    pub const ALL: [Constraint; 5] = [
        Constraint::Containment,
        Constraint::BoundingTriangle,
        Constraint::Collision,
        Constraint::LocalDeviation,
        Constraint::GlobalDeviation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::Containment => "containment",
            Constraint::BoundingTriangle => "bounding_triangle",
            Constraint::Collision => "collision",
            Constraint::LocalDeviation => "local_deviation",
            Constraint::GlobalDeviation => "global_deviation",
        }
    }

    /// Lower bounds hold when the value is at least the threshold; upper
    /// bounds when it is at most the threshold.
    pub fn is_lower_bound(self) -> bool {
        matches!(
            self,
            Constraint::Containment | Constraint::BoundingTriangle | Constraint::Collision
        )
    }

    pub fn threshold(self, epsilon: f64, delta: f64) -> f64 {
        match self {
            Constraint::Containment => epsilon,
            Constraint::BoundingTriangle => -delta,
            Constraint::Collision => 2.0 * epsilon,
            Constraint::LocalDeviation | Constraint::GlobalDeviation => delta,
        }
    }

    fn values(self, s: &ConstraintSample) -> &[f64] {
        match self {
            Constraint::Containment => &s.boundary_distance,
            Constraint::BoundingTriangle => &s.bounding_distance,
            Constraint::Collision => &s.nearest_neighbor,
            Constraint::LocalDeviation => &s.local_deviation,
            Constraint::GlobalDeviation => &s.global_deviation,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintOutcome {
    pub constraint: Constraint,
    pub threshold: f64,
    pub passed: bool,
    /// Smallest value for lower bounds, largest for upper bounds.
    pub worst: f64,
    pub worst_time: f64,
    pub violating_samples: usize,
    pub first_violation: Option<f64>,
}

impl ConstraintOutcome {
    fn new(constraint: Constraint, threshold: f64) -> Self {
        let worst = if constraint.is_lower_bound() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        Self {
            constraint,
            threshold,
            passed: true,
            worst,
            worst_time: f64::NAN,
            violating_samples: 0,
            first_violation: None,
        }
    }

    fn absorb(&mut self, t: f64, values: &[f64]) {
        let lower = self.constraint.is_lower_bound();
        let mut violated = false;
        for &v in values {
            let worse = if lower { v < self.worst } else { v > self.worst };
            if worse {
                self.worst = v;
                self.worst_time = t;
            }
            violated |= if lower { v < self.threshold } else { v > self.threshold };
        }
        if violated {
            self.passed = false;
            self.violating_samples += 1;
            self.first_violation.get_or_insert(t);
        }
    }
}

/// Outcomes restricted to one mission leg.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseSummary {
    pub phase: u32,
    pub start: f64,
    pub end: f64,
    pub outcomes: Vec<ConstraintOutcome>,
}

impl PhaseSummary {
    pub fn outcome(&self, c: Constraint) -> &ConstraintOutcome {
        self.outcomes
            .iter()
            .find(|o| o.constraint == c)
            .expect("every constraint is evaluated")
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintReport {
    pub epsilon: f64,
    pub delta: f64,
    pub agents: Vec<AgentId>,
    pub followers: Vec<AgentId>,
    pub samples: Vec<ConstraintSample>,
    pub outcomes: Vec<ConstraintOutcome>,
    pub phases: Vec<PhaseSummary>,
    /// Largest global deviation of each agent, in trace order.
    pub max_global_deviation: Vec<f64>,
    pub max_local_deviation: Vec<f64>,
}

impl ConstraintReport {
    pub fn outcome(&self, c: Constraint) -> &ConstraintOutcome {
        self.outcomes
            .iter()
            .find(|o| o.constraint == c)
            .expect("every constraint is evaluated")
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "constraint           threshold      worst   at (s)  result")?;
        for o in &self.outcomes {
            writeln!(
                f,
                "{:<18} {:>10.4} {:>10.4} {:>8.3}  {}",
                o.constraint.name(),
                o.threshold,
                o.worst,
                o.worst_time,
                if o.passed { "pass" } else { "FAIL" }
            )?;
        }
        for p in &self.phases {
            let failed: Vec<&str> = p
                .outcomes
                .iter()
                .filter(|o| !o.passed)
                .map(|o| o.constraint.name())
                .collect();
            if !failed.is_empty() {
                write!(f, "leg {} [{:.2}, {:.2}] s violates", p.phase, p.start, p.end)?;
                for name in failed {
                    write!(f, " {}", name)?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

fn nearest_neighbor_distances(positions: &[Vec2]) -> Vec<f64> {
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            positions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| p.distance(*q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn constraint_sample(
    s: &TraceSample,
    tt: &TimedTransform,
    spec: &FormationSpec,
    agents: &[AgentId],
    follower_idx: &[usize],
    leader_idx: &[usize; 3],
) -> Result<ConstraintSample> {
    let global: Vec<Vec2> = agents
        .iter()
        .map(|&id| spec.initial_position(id).map(|r0| tt.transform.apply(r0)))
        .collect::<Result<_>>()?;
    let leading = leader_idx.map(|i| global[i]);
    let positions: Vec<Vec2> = s.agents.iter().map(|a| a.position).collect();

    Ok(ConstraintSample {
        t: s.t,
        phase: s.phase,
        boundary_distance: follower_idx
            .iter()
            .map(|&i| signed_distance_to_triangle(positions[i], &leading))
            .collect(),
        bounding_distance: positions
            .iter()
            .map(|&p| signed_distance_to_triangle(p, &leading))
            .collect(),
        nearest_neighbor: nearest_neighbor_distances(&positions),
        local_deviation: s.agents.iter().map(|a| a.local_deviation()).collect(),
        global_deviation: positions.iter().zip(&global).map(|(p, g)| p.distance(*g)).collect(),
    })
}

/// Evaluates every constraint at every trace sample. `transforms` must hold
/// one transform per sample, at the same time.
pub fn evaluate_constraints(
    trace: &SimTrace,
    spec: &FormationSpec,
    transforms: &[TimedTransform],
) -> Result<ConstraintReport> {
    trace.validate()?;
    if transforms.len() != trace.samples.len() {
        return Err(Error::MisalignedTrace {
            index: transforms.len().min(trace.samples.len()),
        });
    }
    let agents = &trace.agents;
    let index = |id: AgentId| trace.agent_index(id).ok_or(Error::UnknownAgent(id));
    let leaders = spec.leaders();
    let leader_idx = [index(leaders[0])?, index(leaders[1])?, index(leaders[2])?];
    let follower_idx: Vec<usize> = spec.followers().iter().map(|&f| index(f)).collect::<Result<_>>()?;
    if agents.len() != spec.agent_count() {
        return Err(Error::InvalidParameter {
            name: "trace",
            reason: "agent set differs from the formation",
        });
    }

    let (eps, delta) = (spec.epsilon(), spec.delta());
    let fresh = || -> Vec<ConstraintOutcome> {
        Constraint::ALL
            .iter()
            .map(|&c| ConstraintOutcome::new(c, c.threshold(eps, delta)))
            .collect()
    };
    let mut outcomes = fresh();
    let mut phases: Vec<PhaseSummary> = Vec::new();
    let mut max_global = alloc::vec![0.0_f64; agents.len()];
    let mut max_local = alloc::vec![0.0_f64; agents.len()];
    let mut samples = Vec::with_capacity(trace.samples.len());

    for (index, (s, tt)) in trace.samples.iter().zip(transforms).enumerate() {
        if libm::fabs(s.t - tt.t) > ALIGNMENT_SLACK {
            return Err(Error::MisalignedTrace { index });
        }
        let cs = constraint_sample(s, tt, spec, agents, &follower_idx, &leader_idx)?;
        if phases.last().is_none_or(|p| p.phase != cs.phase) {
            phases.push(PhaseSummary {
                phase: cs.phase,
                start: cs.t,
                end: cs.t,
                outcomes: fresh(),
            });
        }
        let phase = phases.last_mut().expect("pushed above");
        phase.end = cs.t;
        for (o, po) in outcomes.iter_mut().zip(phase.outcomes.iter_mut()) {
            let values = o.constraint.values(&cs);
            o.absorb(cs.t, values);
            po.absorb(cs.t, values);
        }
        for (m, v) in max_global.iter_mut().zip(&cs.global_deviation) {
            *m = m.max(*v);
        }
        for (m, v) in max_local.iter_mut().zip(&cs.local_deviation) {
            *m = m.max(*v);
        }
        samples.push(cs);
    }

    Ok(ConstraintReport {
        epsilon: eps,
        delta,
        agents: agents.clone(),
        followers: spec.followers().to_vec(),
        samples,
        outcomes,
        phases,
        max_global_deviation: max_global,
        max_local_deviation: max_local,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorStatistics {
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub max: f64,
    pub count: usize,
}

impl ErrorStatistics {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            mean,
            std_dev: libm::sqrt(var),
            max,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Reference {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StatisticsTable {
    pub reference: Reference,
    pub per_agent: Vec<(AgentId, ErrorStatistics)>,
    pub pooled: ErrorStatistics,
}

/// Interval during which one vehicle's controller did not run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StallInterval {
    pub agent: AgentId,
    pub start: f64,
    pub end: f64,
}

impl StallInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    fn covers(&self, agent: AgentId, t: f64) -> bool {
        self.agent == agent && t >= self.start && t < self.end
    }
}

/// Tracking-error statistics after `warmup` seconds, per agent and pooled.
pub fn error_statistics(trace: &SimTrace, reference: Reference, warmup: f64) -> Result<StatisticsTable> {
    error_statistics_excluding(trace, reference, warmup, &[])
}

/// As [`error_statistics`], dropping samples inside the given stalls.
pub fn error_statistics_excluding(
    trace: &SimTrace,
    reference: Reference,
    warmup: f64,
    excluded: &[StallInterval],
) -> Result<StatisticsTable> {
    if trace.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let t0 = trace.samples[0].t;
    let mut per_agent_values: Vec<Vec<f64>> = alloc::vec![Vec::new(); trace.agents.len()];
    for s in trace.samples.iter().filter(|s| s.t - t0 >= warmup) {
        for ((values, a), &id) in per_agent_values.iter_mut().zip(&s.agents).zip(&trace.agents) {
            if excluded.iter().any(|iv| iv.covers(id, s.t)) {
                continue;
            }
            values.push(match reference {
                Reference::Local => a.local_deviation(),
                Reference::Global => a.global_deviation(),
            });
        }
    }
    let pooled_values: Vec<f64> = per_agent_values.iter().flatten().copied().collect();
    let pooled = ErrorStatistics::from_values(&pooled_values)?;
    let per_agent = trace
        .agents
        .iter()
        .zip(&per_agent_values)
        .filter(|(_, v)| !v.is_empty())
        .map(|(&id, v)| ErrorStatistics::from_values(v).map(|s| (id, s)))
        .collect::<Result<_>>()?;
    Ok(StatisticsTable {
        reference,
        per_agent,
        pooled,
    })
}

/// Runs of skipped controller updates lasting longer than `threshold`.
///
/// A stall starts at the first sample whose controller did not run and ends
/// at the next sample where it ran again (or one step past the trace end).
pub fn anomaly_screen(trace: &SimTrace, threshold: f64) -> Vec<StallInterval> {
    let mut out = Vec::new();
    let n = trace.samples.len();
    if n == 0 {
        return out;
    }
    let step = if n > 1 {
        trace.samples[1].t - trace.samples[0].t
    } else {
        0.0
    };
    for (k, &agent) in trace.agents.iter().enumerate() {
        let mut start: Option<f64> = None;
        for s in &trace.samples {
            let ran = s.agents.get(k).is_none_or(|a| a.controller_ran);
            match (ran, start) {
                (false, None) => start = Some(s.t),
                (true, Some(t0)) => {
                    push_if_long(&mut out, agent, t0, s.t, threshold);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(t0) = start {
            let end = trace.samples[n - 1].t + step;
            push_if_long(&mut out, agent, t0, end, threshold);
        }
    }
    out
}

fn push_if_long(out: &mut Vec<StallInterval>, agent: AgentId, start: f64, end: f64, threshold: f64) {
    // Durations are differences of tick times; absorb their rounding.
    if end - start > threshold + 1e-9 {
        out.push(StallInterval { agent, start, end });
    }
}
