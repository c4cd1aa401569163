//! Scenario files: TOML with units spelled out in every key.
//!
//! A scenario fixes the team, the mission, the simulation and network
//! settings, controller gains, disturbances and injected faults. Unknown keys
//! are rejected. Loading validates everything the core crate checks, so a
//! scenario that loads can be certified and flown.

use std::path::{Path, PathBuf};

use contdef_core::formation::FollowerDef;
use contdef_core::guidance::{self, IntermediateWaypoint, LeaderPlan, MissionConfig, SquareLegs};
use contdef_core::netsim::{FollowerMode, GilbertElliott, LinkModel};
use contdef_core::sim::{SimConfig, StallInjection};
use contdef_core::vehicle::{ControllerGains, DisturbanceModel};
use contdef_core::{AgentId, FormationSpec, Vec2, Weights};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Master seed for every random stream.
    pub seed: u64,
    pub formation: FormationSection,
    pub mission: MissionSection,
    pub simulation: SimulationSection,
    pub network: NetworkSection,
    pub controller: ControllerSection,
    pub disturbance: DisturbanceSection,
    #[serde(default, skip_serializing_if = "FaultSection::is_empty")]
    pub faults: FaultSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderEntry {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerEntry {
    pub id: u32,
    pub neighbors: [u32; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSection {
    pub epsilon_m: f64,
    pub delta_m: f64,
    pub leaders: Vec<LeaderEntry>,
    #[serde(default)]
    pub followers: Vec<FollowerEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SquareSection {
    RestToRest { edge_m: f64 },
    MidpointVelocity { v_max_mps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSection {
    pub leg: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionSection {
    pub segment_duration_s: f64,
    /// Contraction factor for the square legs; defaults to the smallest
    /// certified one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction_scale: Option<f64>,
    pub square: SquareSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate: Option<WaypointSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeEntry {
    GlobalReference,
    LocalCommunication,
}

impl From<ModeEntry> for FollowerMode {
    fn from(m: ModeEntry) -> Self {
        match m {
            ModeEntry::GlobalReference => FollowerMode::GlobalReference,
            ModeEntry::LocalCommunication => FollowerMode::LocalCommunication,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub dt_s: f64,
    pub preroll_s: f64,
    pub settle_s: f64,
    pub follower_mode: ModeEntry,
    /// Start of the trace excluded from error statistics.
    pub warmup_s: f64,
    /// Controller outages longer than this are reported as anomalies.
    pub stall_threshold_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstSection {
    pub good_to_bad: f64,
    pub bad_to_good: f64,
    pub bad_drop_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub rate_hz: f64,
    pub latency_s: f64,
    pub drop_probability: f64,
    #[serde(default)]
    pub jitter_std_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burst: Option<BurstSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kp_pos_per_s: f64,
    pub kp_vel_per_s: f64,
    pub ki_vel_per_s2: f64,
    pub kd_vel: f64,
    pub accel_limit_mps2: f64,
    pub integrator_limit_mps2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub wind_speed_mps: f64,
    /// Direction the wind blows toward, counter-clockwise from +X.
    pub wind_heading_deg: f64,
    pub wind_force_gain_per_s: f64,
    pub noise_std_mps2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StallEntry {
    pub agent: u32,
    pub start_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSection {
    #[serde(default)]
    pub stalls: Vec<StallEntry>,
}

impl FaultSection {
    fn is_empty(&self) -> bool {
        self.stalls.is_empty()
    }
}

/// Scenario with everything derived from it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub spec: FormationSpec,
    pub plan: LeaderPlan,
    pub sim: SimConfig,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Loaded, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)?.resolve()
    }

    pub fn formation_spec(&self) -> Result<FormationSpec, CliError> {
        let f = &self.formation;
        let leaders: [LeaderEntry; 3] = f.leaders.as_slice().try_into().map_err(|_| {
            CliError::Config(format!("expected 3 leaders, found {}", f.leaders.len()))
        })?;
        let leaders = leaders.map(|l| (AgentId(l.id), Vec2::new(l.x_m, l.y_m)));
        let followers = f
            .followers
            .iter()
            .map(|e| {
                let position = match (e.x_m, e.y_m) {
                    (Some(x), Some(y)) => Some(Vec2::new(x, y)),
                    (None, None) => None,
                    _ => {
                        return Err(CliError::Config(format!(
                            "follower {} needs both x_m and y_m or neither",
                            e.id
                        )))
                    }
                };
                Ok(FollowerDef {
                    id: AgentId(e.id),
                    neighbors: e.neighbors.map(AgentId),
                    position,
                    weights: e.weights.map(Weights),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(FormationSpec::new(leaders, followers, f.epsilon_m, f.delta_m)?)
    }

    pub fn mission_config(&self) -> MissionConfig {
        let m = &self.mission;
        MissionConfig {
            segment_duration: m.segment_duration_s,
            start_time: self.simulation.preroll_s,
            square: match m.square {
                SquareSection::RestToRest { edge_m } => SquareLegs::RestToRest { edge: edge_m },
                SquareSection::MidpointVelocity { v_max_mps } => {
                    SquareLegs::MidpointVelocity { v_max: v_max_mps }
                }
            },
            contraction_scale: m.contraction_scale,
            intermediate: m.intermediate.map(|w| IntermediateWaypoint {
                leg: w.leg,
                fraction: w.fraction,
            }),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let (s, n, c, d) = (&self.simulation, &self.network, &self.controller, &self.disturbance);
        SimConfig {
            dt: s.dt_s,
            preroll: s.preroll_s,
            settle: s.settle_s,
            mode: s.follower_mode.into(),
            link: LinkModel {
                rate_hz: n.rate_hz,
                latency_s: n.latency_s,
                drop_probability: n.drop_probability,
                jitter_std: n.jitter_std_s,
                burst: n.burst.map(|b| GilbertElliott {
                    good_to_bad: b.good_to_bad,
                    bad_to_good: b.bad_to_good,
                    bad_drop_probability: b.bad_drop_probability,
                }),
                seed: self.seed,
            },
            gains: ControllerGains {
                kp_pos: c.kp_pos_per_s,
                kp_vel: c.kp_vel_per_s,
                ki_vel: c.ki_vel_per_s2,
                kd_vel: c.kd_vel,
                accel_limit: c.accel_limit_mps2,
                integrator_limit: c.integrator_limit_mps2,
            },
            disturbance: DisturbanceModel {
                wind_speed: d.wind_speed_mps,
                wind_heading_deg: d.wind_heading_deg,
                wind_force_gain: d.wind_force_gain_per_s,
                noise_std: d.noise_std_mps2,
                seed: self.seed,
            },
            seed: self.seed,
            stalls: self
                .faults
                .stalls
                .iter()
                .map(|f| StallInjection {
                    agent: AgentId(f.agent),
                    start: f.start_s,
                    duration: f.duration_s,
                })
                .collect(),
        }
    }

    /// Validates the scenario and builds the team, plan and simulation
    /// settings.
    pub fn resolve(self) -> Result<Loaded, CliError> {
        let s = &self.simulation;
        for (name, v) in [("warmup_s", s.warmup_s), ("stall_threshold_s", s.stall_threshold_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("simulation.{name} must be non-negative")));
            }
        }
        let spec = self.formation_spec()?;
        let plan = guidance::reference_mission_with(&spec, &self.mission_config())?;
        let sim = self.sim_config();
        sim.validate()?;
        for stall in &sim.stalls {
            if spec.initial_position(stall.agent).is_err() {
                return Err(CliError::Config(format!("stall names unknown {}", stall.agent)));
            }
        }
        Ok(Loaded {
            scenario: self,
            spec,
            plan,
            sim,
        })
    }
}
