use crate::formation::AgentId;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("leader triangle is degenerate (area {area:.3e} m^2)")]
    CollinearLeaders { area: f64 },
    #[error("in-neighbor triangle is degenerate (area {area:.3e} m^2, follower {follower:?})")]
    CollinearNeighbors {
        follower: Option<AgentId>,
        area: f64,
    },
    #[error("transform Jacobian is singular (det {det:.3e})")]
    SingularTransform { det: f64 },
    #[error("transform Jacobian reverses orientation (det {det:.3e})")]
    OrientationReversed { det: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid formation: {0}")]
    InvalidFormation(alloc::string::String),
    #[error("weights of {follower} sum to {sum}, expected 1")]
    WeightSum { follower: AgentId, sum: f64 },
    #[error("weights of {follower} miss its initial position by {residual:.3e} m")]
    WeightMismatch { follower: AgentId, residual: f64 },
    #[error("{0} lies on or outside the leading triangle")]
    FollowerOutsideTriangle(AgentId),
    #[error("infeasible margins: delta_max = {delta_max:.4} m")]
    InfeasibleMargins { delta_max: f64 },
    #[error("segment duration must be positive (t0 = {t0}, tf = {tf})")]
    DegenerateDuration { t0: f64, tf: f64 },
    #[error("direction must be a unit vector (norm {norm})")]
    InvalidDirection { norm: f64 },
    #[error("time {t} s is outside [{start}, {end}] s")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("derivative filter needs 5 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("measurement buffer does not cover t = {t} s")]
    BufferUnderrun { t: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("trace and transform sequence are not time-aligned at sample {index}")]
    MisalignedTrace { index: usize },
    #[error("trace has no samples in the evaluation window")]
    EmptyTrace,
    #[error("delivery log has no deliveries")]
    EmptyLog,
    #[error("transform sequence is empty")]
    EmptyPlan,
}
