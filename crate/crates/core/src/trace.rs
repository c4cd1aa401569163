//! Time series recorded by the simulation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::formation::AgentId;
use crate::geom::Vec2;
use crate::netsim::DeliveryRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentSample {
    /// Position under the ideal transformation.
    pub global_desired: Vec2,
    /// Weighted sum of in-neighbor positions for followers in local mode;
    /// the global desired position otherwise.
    pub local_desired: Vec2,
    /// Setpoint the vehicle's controller is currently tracking.
    pub setpoint: Vec2,
    pub position: Vec2,
    pub velocity: Vec2,
    pub command: Vec2,
    pub controller_ran: bool,
}

impl AgentSample {
    pub fn local_deviation(&self) -> f64 {
        self.position.distance(self.local_desired)
    }

    pub fn global_deviation(&self) -> f64 {
        self.position.distance(self.global_desired)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceSample {
    pub t: f64,
    /// Mission leg index at `t`.
    pub phase: u32,
    /// One entry per agent, in the order of [`SimTrace::agents`].
    pub agents: Vec<AgentSample>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimTrace {
    pub agents: Vec<AgentId>,
    pub samples: Vec<TraceSample>,
    pub deliveries: Vec<DeliveryRecord>,
}

impl SimTrace {
    pub fn new(agents: Vec<AgentId>) -> Self {
        Self {
            agents,
            samples: Vec::new(),
            deliveries: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn agent_index(&self, id: AgentId) -> Option<usize> {
        self.agents.iter().position(|&a| a == id)
    }

    /// Every `step`-th sample, starting with the first.
    pub fn decimated(&self, step: usize) -> impl Iterator<Item = &TraceSample> {
        self.samples.iter().step_by(step.max(1))
    }

    /// Checks that every sample has one entry per agent and that time
    /// increases.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mut prev = f64::NEG_INFINITY;
        for (index, s) in self.samples.iter().enumerate() {
            if s.agents.len() != self.agents.len() || !(s.t > prev) {
                return Err(Error::MisalignedTrace { index });
            }
            prev = s.t;
        }
        Ok(())
    }
}
