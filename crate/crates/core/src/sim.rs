//! Deterministic closed-loop simulation of the team.
//!
//! Time advances in integer ticks of `dt`. At every tick the ground station
//! broadcasts if a period boundary has passed, due messages are delivered,
//! every vehicle runs its controller on the data it has received, the
//! state is recorded, and the dynamics are integrated.
//!
//! Leaders follow their own plan with exact feed-forward. Followers only
//! know the setpoints the ground station sends them; their feed-forward is
//! the derivative filter applied to those setpoints.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::formation::{AgentId, FormationSpec, TimedTransform};
use crate::geom::Vec2;
use crate::guidance::{self, LeaderPlan, Trajectory};
use crate::netsim::{
    follower_setpoint, BroadcastClock, DeliveryRecord, FollowerMode, LinkModel, NeighborData, Network, Payload,
};
use crate::trace::{AgentSample, SimTrace, TraceSample};
use crate::vehicle::{
    controller_step, dynamics_step, ControllerGains, Disturbance, DisturbanceModel, MeasurementBuffer, Sensing,
    VehicleState,
};

/// Controller outage injected for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StallInjection {
    pub agent: AgentId,
    pub start: f64,
    pub duration: f64,
}

impl StallInjection {
    fn active(&self, agent: AgentId, t: f64) -> bool {
        agent == self.agent && t >= self.start - 1e-9 && t < self.start + self.duration - 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Time the team holds its initial pose before the plan starts (s).
    pub preroll: f64,
    /// Time simulated after the plan ends (s).
    pub settle: f64,
    pub mode: FollowerMode,
    pub link: LinkModel,
    pub gains: ControllerGains,
    pub disturbance: DisturbanceModel,
    /// Master seed. Link and disturbance seeds are derived from it.
    pub seed: u64,
    pub stalls: Vec<StallInjection>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.0025,
            preroll: 1.0,
            settle: 1.0,
            mode: FollowerMode::GlobalReference,
            link: LinkModel::default(),
            gains: ControllerGains::default(),
            disturbance: DisturbanceModel::default(),
            seed: 0,
            stalls: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be positive",
            });
        }
        for (name, v) in [("preroll", self.preroll), ("settle", self.settle)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be non-negative",
                });
            }
        }
        for s in &self.stalls {
            if !(s.duration >= 0.0 && s.start.is_finite() && s.duration.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "stall",
                    reason: "needs a finite start and non-negative duration",
                });
            }
        }
        self.link.validate()?;
        self.gains.validate()?;
        self.disturbance.validate()
    }

    fn seeded_link(&self) -> LinkModel {
        LinkModel {
            seed: splitmix64(self.seed ^ 0x4c49_4e4b),
            ..self.link
        }
    }

    fn seeded_disturbance(&self) -> DisturbanceModel {
        DisturbanceModel {
            seed: splitmix64(self.seed ^ 0x5749_4e44),
            ..self.disturbance
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: SimTrace,
    /// Transform of the plan at every trace sample.
    pub transforms: Vec<TimedTransform>,
}

impl SimOutput {
    pub fn deliveries(&self) -> &[DeliveryRecord] {
        &self.trace.deliveries
    }
}

/// Buffer long enough for the filter window plus the link latency at the
/// broadcast rate, with room for lost packets.
fn buffer_capacity(link: &LinkModel) -> usize {
    let window = 5.0 + link.latency_s * link.rate_hz;
    (libm::ceil(window) as usize) * 4 + 16
}

struct Agent {
    id: AgentId,
    state: VehicleState,
    disturbance: Disturbance,
    /// Setpoints received from the ground station, followers only.
    setpoints: MeasurementBuffer,
    command: Vec2,
}

impl Agent {
    fn new(id: AgentId, position: Vec2, link: &LinkModel, disturbance: &DisturbanceModel) -> Result<Self> {
        let capacity = buffer_capacity(link);
        Ok(Self {
            id,
            state: VehicleState::at_rest(position, capacity),
            disturbance: Disturbance::new(disturbance, u64::from(id.0))?,
            setpoints: MeasurementBuffer::new(capacity),
            command: Vec2::ZERO,
        })
    }

    fn absorb(&mut self, send_time: f64, payload: &Payload) -> Result<()> {
        self.state.measurements.push(send_time, payload.pose)?;
        if let Some(sp) = payload.setpoint {
            self.setpoints.push(send_time, sp)?;
        }
        Ok(())
    }

    /// Controller update. Returns whether the controller ran this tick.
    fn control(
        &mut self,
        setpoint: Vec2,
        feedforward: Vec2,
        config: &SimConfig,
        t: f64,
    ) -> Result<bool> {
        if config.stalls.iter().any(|s| s.active(self.id, t)) {
            return Ok(false);
        }
        let sensing = Sensing {
            now: t,
            delay: config.link.latency_s,
            period: config.link.period(),
        };
        match controller_step(&mut self.state, setpoint, feedforward, &config.gains, &sensing, config.dt) {
            Ok(out) => self.command = out.command,
            Err(Error::BufferUnderrun { .. }) => self.command = Vec2::ZERO,
            Err(e) => return Err(e),
        }
        Ok(true)
    }

    fn integrate(&mut self, dt: f64) {
        let w = self.disturbance.sample();
        dynamics_step(&mut self.state, self.command, w, dt);
    }
}

fn tick_count(end: f64, dt: f64) -> usize {
    libm::ceil(end / dt - 1e-9) as usize
}

/// Flies `plan` with the team of `spec`. The plan should start at
/// `config.preroll`; before that the leaders hold their first pose.
pub fn run_formation(spec: &FormationSpec, plan: &LeaderPlan, config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    if plan.leaders() != spec.leaders() {
        return Err(Error::InvalidParameter {
            name: "plan",
            reason: "leaders differ from the formation's leaders",
        });
    }
    let link = config.seeded_link();
    let disturbance = config.seeded_disturbance();
    let ids: Vec<AgentId> = spec.agents().collect();
    let mut agents: Vec<Agent> = ids
        .iter()
        .map(|&id| Agent::new(id, spec.initial_position(id)?, &link, &disturbance))
        .collect::<Result<_>>()?;
    let index: BTreeMap<AgentId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let follower_links: Vec<_> = ids.iter().map(|&id| spec.link(id).copied()).collect();
    let neighbor_idx: Vec<Option<[usize; 3]>> = follower_links
        .iter()
        .map(|l| l.map(|l| l.neighbors.map(|n| index[&n])))
        .collect();
    let initial: Vec<Vec2> = ids
        .iter()
        .map(|&id| spec.initial_position(id))
        .collect::<Result<_>>()?;

    let mut network = Network::new(link)?;
    let mut clock = BroadcastClock::new(link.rate_hz);
    let mut trace = SimTrace::new(ids.clone());
    let end = plan.end_time() + config.settle;
    let n_ticks = tick_count(end, config.dt);
    trace.samples.reserve(n_ticks + 1);
    let mut transforms = Vec::with_capacity(n_ticks + 1);

    let global_at = |t: f64| -> Result<(TimedTransform, Vec<Vec2>)> {
        let transform = guidance::transform_at(spec, plan, t)?;
        let g = initial.iter().map(|&r0| transform.apply(r0)).collect();
        Ok((TimedTransform { t, transform }, g))
    };

    for n in 0..=n_ticks {
        let t = n as f64 * config.dt;

        while let Some(ts) = clock.due(t) {
            let (_, global) = global_at(ts)?;
            let actual: Vec<Vec2> = agents.iter().map(|a| a.state.position).collect();
            let phase = plan.leg_index(ts) as u32;
            let outgoing: Vec<(AgentId, Payload)> = agents
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let setpoint = match (&follower_links[i], &neighbor_idx[i]) {
                        (Some(l), Some(nb)) => Some(follower_setpoint(
                            config.mode,
                            l,
                            &NeighborData {
                                global_desired: nb.map(|j| global[j]),
                                actual: nb.map(|j| actual[j]),
                            },
                        )),
                        _ => None,
                    };
                    (
                        a.id,
                        Payload {
                            pose: actual[i],
                            setpoint,
                            phase,
                        },
                    )
                })
                .collect();
            network.broadcast_tick(ts, &outgoing);
        }

        for m in network.deliver_until(t) {
            agents[index[&m.destination]].absorb(m.send_time, &m.payload)?;
        }

        let (tt, global) = global_at(t)?;
        let actual: Vec<Vec2> = agents.iter().map(|a| a.state.position).collect();
        let mut samples = Vec::with_capacity(agents.len());
        for (i, agent) in agents.iter_mut().enumerate() {
            let (setpoint, feedforward, local_desired) = match (&follower_links[i], &neighbor_idx[i]) {
                (Some(l), Some(nb)) => {
                    let sp = agent.setpoints.latest().map_or(initial[i], |s| s.position);
                    let ff = agent
                        .setpoints
                        .velocity_estimate(t, 0.0, link.period())
                        .unwrap_or(Vec2::ZERO);
                    let local = match config.mode {
                        FollowerMode::GlobalReference => global[i],
                        FollowerMode::LocalCommunication => l.weights.combine(&nb.map(|j| actual[j])),
                    };
                    (sp, ff, local)
                }
                _ => {
                    let kin = plan.trajectory(agent.id)?.evaluate_clamped(t);
                    (kin.position, kin.velocity, global[i])
                }
            };
            let ran = agent.control(setpoint, feedforward, config, t)?;
            samples.push(AgentSample {
                global_desired: global[i],
                local_desired,
                setpoint,
                position: agent.state.position,
                velocity: agent.state.velocity,
                command: agent.command,
                controller_ran: ran,
            });
        }
        trace.samples.push(TraceSample {
            t,
            phase: plan.leg_index(t) as u32,
            agents: samples,
        });
        transforms.push(tt);

        for agent in &mut agents {
            agent.integrate(config.dt);
        }
    }

    trace.deliveries = network.into_log();
    Ok(SimOutput { trace, transforms })
}

/// Flies one vehicle along `trajectory`, with the same sensing path as the
/// team. The trace holds a single agent whose desired positions are the
/// trajectory.
pub fn run_solo(trajectory: &Trajectory, config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    let link = config.seeded_link();
    let id = AgentId(1);
    let start = trajectory.evaluate_clamped(f64::NEG_INFINITY).position;
    let mut agent = Agent::new(id, start, &link, &config.seeded_disturbance())?;
    let mut network = Network::new(link)?;
    let mut clock = BroadcastClock::new(link.rate_hz);
    let mut trace = SimTrace::new(alloc::vec![id]);
    let n_ticks = tick_count(trajectory.end_time() + config.settle, config.dt);
    let phase_of = |t: f64| {
        trajectory
            .segments()
            .partition_point(|s| s.tf <= t)
            .min(trajectory.segments().len() - 1) as u32
    };

    for n in 0..=n_ticks {
        let t = n as f64 * config.dt;
        while let Some(ts) = clock.due(t) {
            let payload = Payload {
                pose: agent.state.position,
                setpoint: None,
                phase: phase_of(ts),
            };
            network.broadcast_tick(ts, &[(id, payload)]);
        }
        for m in network.deliver_until(t) {
            agent.absorb(m.send_time, &m.payload)?;
        }
        let kin = trajectory.evaluate_clamped(t);
        let ran = agent.control(kin.position, kin.velocity, config, t)?;
        trace.samples.push(TraceSample {
            t,
            phase: phase_of(t),
            agents: alloc::vec![AgentSample {
                global_desired: kin.position,
                local_desired: kin.position,
                setpoint: kin.position,
                position: agent.state.position,
                velocity: agent.state.velocity,
                command: agent.command,
                controller_ran: ran,
            }],
        });
        agent.integrate(config.dt);
    }
    trace.deliveries = network.into_log();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::{reference_mission_with, MissionConfig};

    fn short_mission(spec: &FormationSpec) -> LeaderPlan {
        let mission = MissionConfig {
            start_time: 1.0,
            ..MissionConfig::default()
        };
        reference_mission_with(spec, &mission).unwrap()
    }

    #[test]
    fn idle_vehicle_stays_put() {
        let traj = guidance::square_trajectory(Vec2::new(1.0, 2.0), 0.0, 1.0, 1.0).unwrap();
        let trace = run_solo(&traj, &SimConfig::default()).unwrap();
        for s in &trace.samples {
            assert!(s.agents[0].global_deviation() < 1e-12);
        }
    }

    #[test]
    fn formation_run_is_deterministic_and_aligned() {
        let spec = FormationSpec::reference_team();
        let plan = short_mission(&spec);
        let config = SimConfig {
            disturbance: DisturbanceModel {
                noise_std: 0.2,
                ..DisturbanceModel::default()
            },
            link: LinkModel {
                drop_probability: 0.1,
                ..LinkModel::default()
            },
            seed: 9,
            ..SimConfig::default()
        };
        let a = run_formation(&spec, &plan, &config).unwrap();
        let b = run_formation(&spec, &plan, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.samples.len(), a.transforms.len());
        assert!(a.trace.validate().is_ok());
    }

    #[test]
    fn stall_marks_controller_idle() {
        let traj = guidance::square_trajectory(Vec2::ZERO, 0.5, 1.0, 1.0).unwrap();
        let config = SimConfig {
            stalls: alloc::vec![StallInjection {
                agent: AgentId(1),
                start: 2.0,
                duration: 0.3,
            }],
            ..SimConfig::default()
        };
        let trace = run_solo(&traj, &config).unwrap();
        let idle = trace.samples.iter().filter(|s| !s.agents[0].controller_ran).count();
        assert_eq!(idle, 120);
    }
}
