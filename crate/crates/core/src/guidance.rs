//! Leader trajectory generation with quintic splines.
//!
//! Every leg is a quintic polynomial in local time `s = t - t0`:
//!
//! ```text
//! r(s)   = a + b s + c s² + d s³ + e s⁴ + f s⁵
//! r'(s)  = b + 2c s + 3d s² + 4e s³ + 5f s⁴
//! r''(s) = 2c + 6d s + 12e s² + 20f s³
//! ```
//!
//! Two boundary-condition sets are supported: rest-to-rest between two
//! positions, and a variant that drops the final position and instead
//! prescribes the velocity at the middle of the leg.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::formation::{self, AgentId, FormationSpec, HomogeneousTransform, TimedTransform};
use crate::geom::{self, Vec2};
use crate::linalg;
use crate::safety;

/// Default leg duration (s).
pub const DEFAULT_SEGMENT_DURATION: f64 = 3.75;

/// Time slack (s) when deciding whether a time lies inside a plan.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Kinematics {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

impl Kinematics {
    pub fn at_rest(position: Vec2) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplineSegment {
    /// `[a, b, c, d, e, f]` in local time `s = t - t0`.
    pub coefficients: [Vec2; 6],
    pub t0: f64,
    pub tf: f64,
}

impl SplineSegment {
    pub fn duration(&self) -> f64 {
        self.tf - self.t0
    }

    /// Evaluates the three rows of the spline at absolute time `t`. No range
    /// check; the polynomial is extrapolated outside `[t0, tf]`.
    pub fn evaluate(&self, t: f64) -> Kinematics {
        let s = t - self.t0;
        let [a, b, c, d, e, f] = self.coefficients;
        Kinematics {
            position: a + (b + (c + (d + (e + f * s) * s) * s) * s) * s,
            velocity: b + (c * 2.0 + (d * 3.0 + (e * 4.0 + f * (5.0 * s)) * s) * s) * s,
            acceleration: c * 2.0 + (d * 6.0 + (e * 12.0 + f * (20.0 * s)) * s) * s,
        }
    }

    pub fn start(&self) -> Kinematics {
        self.evaluate(self.t0)
    }

    pub fn end(&self) -> Kinematics {
        self.evaluate(self.tf)
    }
}

fn check_duration(t0: f64, tf: f64) -> Result<()> {
    if tf > t0 && t0.is_finite() && tf.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateDuration { t0, tf })
    }
}

/// Rest-to-rest leg from `r0` to `rf`: zero velocity and acceleration at
/// both ends, i.e. `r = r0 + (rf - r0)(10τ³ - 15τ⁴ + 6τ⁵)`.
pub fn rest_to_rest_segment(r0: Vec2, rf: Vec2, t0: f64, tf: f64) -> Result<SplineSegment> {
    check_duration(t0, tf)?;
    if !r0.is_finite() || !rf.is_finite() {
        return Err(Error::NonFinite("waypoint"));
    }
    let span = tf - t0;
    let delta = rf - r0;
    let s3 = span * span * span;
    Ok(SplineSegment {
        coefficients: [
            r0,
            Vec2::ZERO,
            Vec2::ZERO,
            delta * (10.0 / s3),
            delta * (-15.0 / (s3 * span)),
            delta * (6.0 / (s3 * span * span)),
        ],
        t0,
        tf,
    })
}

/// Which row of the spline a boundary condition constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Position,
    Velocity,
    Acceleration,
}

/// A single boundary condition at absolute time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub derivative: Derivative,
    pub t: f64,
    pub value: Vec2,
}

/// Solves the quintic through six boundary conditions on `[t0, tf]`.
pub fn quintic_through(conditions: &[Condition; 6], t0: f64, tf: f64) -> Result<SplineSegment> {
    check_duration(t0, tf)?;
    let mut rows = Vec::with_capacity(6);
    let mut rhs = Vec::with_capacity(6);
    for c in conditions {
        let s = c.t - t0;
        let order = match c.derivative {
            Derivative::Position => 0,
            Derivative::Velocity => 1,
            Derivative::Acceleration => 2,
        };
        let row: Vec<f64> = (0..6)
            .map(|j: i32| {
                if j < order {
                    0.0
                } else {
                    let falling: i32 = (j - order + 1..=j).product();
                    falling as f64 * libm::pow(s, (j - order) as f64)
                }
            })
            .collect();
        rows.push(row);
        rhs.push(c.value);
    }
    let coeffs = linalg::solve_planar(rows, rhs).ok_or(Error::InvalidParameter {
        name: "conditions",
        reason: "do not determine a unique quintic",
    })?;
    Ok(SplineSegment {
        coefficients: [coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5]],
        t0,
        tf,
    })
}

/// Leg that starts at rest at `r0`, reaches `v_max · direction` half way
/// through, and ends at rest. The final position is left free.
pub fn midpoint_velocity_segment(
    r0: Vec2,
    direction: Vec2,
    v_max: f64,
    t0: f64,
    tf: f64,
) -> Result<SplineSegment> {
    check_duration(t0, tf)?;
    let norm = direction.norm();
    if !(libm::fabs(norm - 1.0) <= 1e-9) {
        return Err(Error::InvalidDirection { norm });
    }
    if !(v_max >= 0.0 && v_max.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "v_max",
            reason: "must be non-negative",
        });
    }
    let mid = 0.5 * (t0 + tf);
    let cond = |derivative, t, value| Condition {
        derivative,
        t,
        value,
    };
    quintic_through(
        &[
            cond(Derivative::Position, t0, r0),
            cond(Derivative::Velocity, t0, Vec2::ZERO),
            cond(Derivative::Acceleration, t0, Vec2::ZERO),
            cond(Derivative::Velocity, tf, Vec2::ZERO),
            cond(Derivative::Acceleration, tf, Vec2::ZERO),
            cond(Derivative::Velocity, mid, direction * v_max),
        ],
        t0,
        tf,
    )
}

/// Time-contiguous sequence of spline segments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    segments: Vec<SplineSegment>,
}

impl Trajectory {
    pub fn new(segments: Vec<SplineSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyPlan);
        }
        for pair in segments.windows(2) {
            if libm::fabs(pair[0].tf - pair[1].t0) > TIME_SLACK {
                return Err(Error::InvalidParameter {
                    name: "segments",
                    reason: "must be time-contiguous",
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[SplineSegment] {
        &self.segments
    }

    pub fn start_time(&self) -> f64 {
        self.segments[0].t0
    }

    pub fn end_time(&self) -> f64 {
        self.segments[self.segments.len() - 1].tf
    }

    pub fn evaluate(&self, t: f64) -> Result<Kinematics> {
        let (start, end) = (self.start_time(), self.end_time());
        if !(t >= start - TIME_SLACK && t <= end + TIME_SLACK) {
            return Err(Error::TimeOutOfRange { t, start, end });
        }
        let idx = self
            .segments
            .partition_point(|s| s.tf <= t)
            .min(self.segments.len() - 1);
        Ok(self.segments[idx].evaluate(t.clamp(start, end)))
    }

    /// Like [`Trajectory::evaluate`], but holds the end points at rest
    /// outside the horizon.
    pub fn evaluate_clamped(&self, t: f64) -> Kinematics {
        if t <= self.start_time() {
            Kinematics::at_rest(self.segments[0].start().position)
        } else if t >= self.end_time() {
            Kinematics::at_rest(self.segments[self.segments.len() - 1].end().position)
        } else {
            self.evaluate(t).expect("inside horizon")
        }
    }
}

/// One leg of a leader plan.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Leg {
    pub start: f64,
    pub end: f64,
    /// Displacement of the leader-triangle centroid over the leg (m).
    pub centroid_shift: Vec2,
}

/// Trajectories of the three leaders over a common sequence of legs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeaderPlan {
    leaders: [AgentId; 3],
    trajectories: [Trajectory; 3],
    poses: Vec<[Vec2; 3]>,
    legs: Vec<Leg>,
}

impl LeaderPlan {
    pub fn leaders(&self) -> [AgentId; 3] {
        self.leaders
    }

    pub fn trajectory(&self, leader: AgentId) -> Result<&Trajectory> {
        self.leaders
            .iter()
            .position(|&l| l == leader)
            .map(|i| &self.trajectories[i])
            .ok_or(Error::UnknownAgent(leader))
    }

    /// Leader poses at the waypoints, starting with the initial pose.
    pub fn poses(&self) -> &[[Vec2; 3]] {
        &self.poses
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn start_time(&self) -> f64 {
        self.trajectories[0].start_time()
    }

    pub fn end_time(&self) -> f64 {
        self.trajectories[0].end_time()
    }

    /// Index of the leg active at `t`, clamped to the first and last legs.
    pub fn leg_index(&self, t: f64) -> usize {
        self.legs
            .partition_point(|l| l.end <= t)
            .min(self.legs.len() - 1)
    }

    pub fn evaluate(&self, leader: AgentId, t: f64) -> Result<Kinematics> {
        self.trajectory(leader)?.evaluate(t)
    }

    /// Desired positions of the three leaders, held at rest outside the
    /// plan horizon.
    pub fn leader_positions_clamped(&self, t: f64) -> [Vec2; 3] {
        [0, 1, 2].map(|i| self.trajectories[i].evaluate_clamped(t).position)
    }
}

/// Incremental construction of a [`LeaderPlan`] leg by leg.
#[derive(Debug, Clone)]
pub struct PlanBuilder {
    leaders: [AgentId; 3],
    segments: [Vec<SplineSegment>; 3],
    poses: Vec<[Vec2; 3]>,
    legs: Vec<Leg>,
    now: f64,
}

impl PlanBuilder {
    pub fn new(leaders: [AgentId; 3], start_pose: [Vec2; 3], start_time: f64) -> Self {
        Self {
            leaders,
            segments: [Vec::new(), Vec::new(), Vec::new()],
            poses: alloc::vec![start_pose],
            legs: Vec::new(),
            now: start_time,
        }
    }

    pub fn current_pose(&self) -> [Vec2; 3] {
        self.poses[self.poses.len() - 1]
    }

    fn push_leg(&mut self, segs: [SplineSegment; 3], to: [Vec2; 3]) {
        let from = self.current_pose();
        for (list, seg) in self.segments.iter_mut().zip(segs) {
            list.push(seg);
        }
        self.legs.push(Leg {
            start: self.now,
            end: segs[0].tf,
            centroid_shift: geom::centroid(&to) - geom::centroid(&from),
        });
        self.now = segs[0].tf;
        self.poses.push(to);
    }

    /// Rest-to-rest leg of every leader to `pose`.
    pub fn move_to(mut self, pose: [Vec2; 3], duration: f64) -> Result<Self> {
        let from = self.current_pose();
        let t0 = self.now;
        let segs = [
            rest_to_rest_segment(from[0], pose[0], t0, t0 + duration)?,
            rest_to_rest_segment(from[1], pose[1], t0, t0 + duration)?,
            rest_to_rest_segment(from[2], pose[2], t0, t0 + duration)?,
        ];
        self.push_leg(segs, pose);
        Ok(self)
    }

    /// Rigid translation of the whole triangle using midpoint-velocity legs.
    pub fn translate_at_speed(mut self, direction: Vec2, v_max: f64, duration: f64) -> Result<Self> {
        let from = self.current_pose();
        let t0 = self.now;
        let segs = [
            midpoint_velocity_segment(from[0], direction, v_max, t0, t0 + duration)?,
            midpoint_velocity_segment(from[1], direction, v_max, t0, t0 + duration)?,
            midpoint_velocity_segment(from[2], direction, v_max, t0, t0 + duration)?,
        ];
        let to = segs.map(|s| s.end().position);
        self.push_leg(segs, to);
        Ok(self)
    }

    pub fn build(self) -> Result<LeaderPlan> {
        let [a, b, c] = self.segments;
        Ok(LeaderPlan {
            leaders: self.leaders,
            trajectories: [Trajectory::new(a)?, Trajectory::new(b)?, Trajectory::new(c)?],
            poses: self.poses,
            legs: self.legs,
        })
    }
}

/// How the four square legs are generated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SquareLegs {
    /// Rest-to-rest legs with the given edge length (m).
    RestToRest { edge: f64 },
    /// Midpoint-velocity legs; the edge length follows from `v_max`.
    MidpointVelocity { v_max: f64 },
}

/// Extra stop inserted part way along one leg.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntermediateWaypoint {
    /// Leg index, 0 (contraction) to 5 (expansion).
    pub leg: usize,
    /// Fraction of the leg's displacement at which to stop, in (0, 1).
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MissionConfig {
    pub segment_duration: f64,
    pub start_time: f64,
    pub square: SquareLegs,
    /// Uniform contraction factor of pose 2; `None` uses `lambda_min`.
    pub contraction_scale: Option<f64>,
    pub intermediate: Option<IntermediateWaypoint>,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            segment_duration: DEFAULT_SEGMENT_DURATION,
            start_time: 0.0,
            square: SquareLegs::RestToRest { edge: 1.0 },
            contraction_scale: None,
            intermediate: None,
        }
    }
}

/// Square leg directions after contraction: +X, +Y, -X, -Y.
pub const SQUARE_DIRECTIONS: [Vec2; 4] = [
    Vec2::new(1.0, 0.0),
    Vec2::new(0.0, 1.0),
    Vec2::new(-1.0, 0.0),
    Vec2::new(0.0, -1.0),
];

/// Contraction, square, expansion mission with default leg options.
pub fn reference_mission(spec: &FormationSpec, segment_duration: f64) -> Result<LeaderPlan> {
    reference_mission_with(
        spec,
        &MissionConfig {
            segment_duration,
            ..MissionConfig::default()
        },
    )
}

/// Poses 1 → 2 → 3 → 4 → 5 → 2 → 1: contract about the centroid, trace a
/// square with the contracted triangle, then expand back.
pub fn reference_mission_with(spec: &FormationSpec, config: &MissionConfig) -> Result<LeaderPlan> {
    let scale = match config.contraction_scale {
        Some(s) => s,
        None => safety::compute_margins(spec)?.lambda_min,
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "contraction_scale",
            reason: "must be positive",
        });
    }
    if let Some(w) = config.intermediate {
        if w.leg > 5 || !(w.fraction > 0.0 && w.fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "intermediate_waypoint",
                reason: "leg must be 0..=5 and fraction in (0, 1)",
            });
        }
    }
    let dur = config.segment_duration;
    let pose1 = spec.leader_initial();
    let center = geom::centroid(&pose1);
    let pose2 = pose1.map(|p| center + (p - center) * scale);

    let mut builder = PlanBuilder::new(spec.leaders(), pose1, config.start_time);
    let split = |leg: usize| config.intermediate.filter(|w| w.leg == leg).map(|w| w.fraction);

    let move_leg = |mut b: PlanBuilder, leg: usize, target: [Vec2; 3]| -> Result<PlanBuilder> {
        if let Some(frac) = split(leg) {
            let from = b.current_pose();
            let mid = [0, 1, 2].map(|i| from[i] + (target[i] - from[i]) * frac);
            b = b.move_to(mid, dur)?;
        }
        b.move_to(target, dur)
    };

    builder = move_leg(builder, 0, pose2)?;
    for (k, dir) in SQUARE_DIRECTIONS.iter().enumerate() {
        let leg = k + 1;
        builder = match config.square {
            SquareLegs::RestToRest { edge } => {
                let from = builder.current_pose();
                let target = from.map(|p| p + *dir * edge);
                move_leg(builder, leg, target)?
            }
            SquareLegs::MidpointVelocity { v_max } => {
                if let Some(frac) = split(leg) {
                    // the free-end leg cannot be split; stop at the matching
                    // fraction of its rest-to-rest equivalent instead
                    let edge = midpoint_displacement(v_max, dur);
                    let from = builder.current_pose();
                    let mid = from.map(|p| p + *dir * (edge * frac));
                    let target = from.map(|p| p + *dir * edge);
                    builder.move_to(mid, dur)?.move_to(target, dur)?
                } else {
                    builder.translate_at_speed(*dir, v_max, dur)?
                }
            }
        };
    }
    builder = move_leg(builder, 5, pose1)?;
    builder.build()
}

/// Net displacement of a midpoint-velocity leg, `8 v T / 15`.
pub fn midpoint_displacement(v_max: f64, duration: f64) -> f64 {
    8.0 * v_max * duration / 15.0
}

/// Single-vehicle square: four midpoint-velocity legs along
/// [`SQUARE_DIRECTIONS`], each `segment_duration` long.
pub fn square_trajectory(
    start: Vec2,
    v_max: f64,
    segment_duration: f64,
    start_time: f64,
) -> Result<Trajectory> {
    let mut segments = Vec::with_capacity(SQUARE_DIRECTIONS.len());
    let mut r = start;
    let mut t = start_time;
    for dir in SQUARE_DIRECTIONS {
        let seg = midpoint_velocity_segment(r, dir, v_max, t, t + segment_duration)?;
        r = seg.end().position;
        t = seg.tf;
        segments.push(seg);
    }
    Trajectory::new(segments)
}

/// Transform induced by the leaders' desired positions at `t`, holding the
/// end poses outside the plan horizon.
pub fn transform_at(spec: &FormationSpec, plan: &LeaderPlan, t: f64) -> Result<HomogeneousTransform> {
    if plan.leaders() != spec.leaders() {
        return Err(Error::InvalidParameter {
            name: "plan",
            reason: "leaders differ from the formation's leaders",
        });
    }
    formation::transform_from_leaders(&spec.leader_initial(), &plan.leader_positions_clamped(t))
}

/// Samples the plan at `sample_rate` Hz (end point included).
pub fn plan_to_transforms(
    spec: &FormationSpec,
    plan: &LeaderPlan,
    sample_rate: f64,
) -> Result<Vec<TimedTransform>> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sample_rate",
            reason: "must be positive",
        });
    }
    let (start, end) = (plan.start_time(), plan.end_time());
    let n = libm::floor((end - start) * sample_rate + 1e-9) as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| start + k as f64 / sample_rate).collect();
    if end - times[times.len() - 1] > TIME_SLACK {
        times.push(end);
    }
    times
        .into_iter()
        .map(|t| {
            Ok(TimedTransform {
                t,
                transform: transform_at(spec, plan, t)?,
            })
        })
        .collect()
}
