//! Simulated quadrotor: planar double integrator behind a cascaded
//! position → velocity → acceleration controller.
//!
//! The position loop turns the (delayed) tracking error into a desired
//! velocity and adds the feed-forward velocity. The velocity loop is a PID
//! on the difference to a five-sample derivative-filter estimate and yields
//! a saturated acceleration command. Attitude dynamics are not modelled.

use alloc::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Timestamps closer than this (s) are considered equal.
const TIME_SLACK: f64 = 1e-9;

/// Velocity from five uniformly spaced position samples,
/// `(2[r(t-T) - r(t-3T)] + [r(t) - r(t-4T)]) / 8T`.
///
/// `samples[0]` is the newest sample `r(t)` and `samples[4]` is `r(t-4T)`.
/// The estimate is exact for linear motion and lags by `2T` on quadratic
/// motion.
pub fn derivative_filter(samples: &[Vec2], period: f64) -> Result<Vec2> {
    if samples.len() != 5 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "period",
            reason: "must be positive",
        });
    }
    let numerator = (samples[1] - samples[3]) * 2.0 + (samples[0] - samples[4]);
    Ok(numerator / (8.0 * period))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub position: Vec2,
}

/// Time-ordered ring of position samples with zero-order-hold lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBuffer {
    samples: VecDeque<Sample>,
    capacity: usize,
}

impl MeasurementBuffer {
    /// Keeps at least the five samples the derivative filter needs.
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(5);
        Self {
            samples: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, t: f64, position: Vec2) -> Result<()> {
        if let Some(last) = self.samples.back() {
            if t < last.t {
                return Err(Error::InvalidParameter {
                    name: "sample time",
                    reason: "must be non-decreasing",
                });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(Sample { t, position });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn latest(&self) -> Option<Sample> {
        self.samples.back().copied()
    }

    /// Most recent sample taken at or before `t`.
    pub fn at(&self, t: f64) -> Option<Sample> {
        let idx = self.samples.partition_point(|s| s.t <= t + TIME_SLACK);
        if idx == 0 {
            None
        } else {
            Some(self.samples[idx - 1])
        }
    }

    /// Zero-order-hold position at `now - delay`.
    pub fn measurement(&self, now: f64, delay: f64) -> Result<Vec2> {
        let t = now - delay;
        self.at(t)
            .map(|s| s.position)
            .ok_or(Error::BufferUnderrun { t })
    }

    /// Derivative-filter velocity at `now - delay`, resampling the buffer at
    /// `period` spacing with zero-order hold.
    pub fn velocity_estimate(&self, now: f64, delay: f64, period: f64) -> Result<Vec2> {
        let anchor = now - delay;
        let mut window = [Vec2::ZERO; 5];
        for (j, slot) in window.iter_mut().enumerate() {
            let t = anchor - j as f64 * period;
            *slot = self.at(t).ok_or(Error::BufferUnderrun { t })?.position;
        }
        derivative_filter(&window, period)
    }
}

/// Gains of the cascaded loop. Defaults are tuned values, not measured ones.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControllerGains {
    /// Position error to desired velocity (1/s).
    pub kp_pos: f64,
    /// Velocity error to acceleration (1/s).
    pub kp_vel: f64,
    /// Integrated velocity error to acceleration (1/s²).
    pub ki_vel: f64,
    /// Velocity error rate to acceleration (dimensionless).
    pub kd_vel: f64,
    /// Norm limit of the commanded acceleration (m/s²).
    pub accel_limit: f64,
    /// Norm limit of the integral term (m/s²).
    pub integrator_limit: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp_pos: 2.0,
            kp_vel: 5.0,
            ki_vel: 1.0,
            kd_vel: 0.0,
            accel_limit: 5.0,
            integrator_limit: 0.3,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("kp_pos", self.kp_pos),
            ("kp_vel", self.kp_vel),
            ("ki_vel", self.ki_vel),
            ("kd_vel", self.kd_vel),
            ("integrator_limit", self.integrator_limit),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be non-negative",
                });
            }
        }
        if !(self.accel_limit > 0.0 && self.accel_limit.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "accel_limit",
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

/// Where and when the controller reads its measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensing {
    pub now: f64,
    /// Age of the newest usable position sample (s).
    pub delay: f64,
    /// Spacing of the derivative filter samples (s).
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub measurements: MeasurementBuffer,
    pub integrator: Vec2,
    last_velocity_error: Option<Vec2>,
}

impl VehicleState {
    pub fn at_rest(position: Vec2, buffer_capacity: usize) -> Self {
        Self {
            position,
            velocity: Vec2::ZERO,
            measurements: MeasurementBuffer::new(buffer_capacity),
            integrator: Vec2::ZERO,
            last_velocity_error: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub measured_position: Vec2,
    pub estimated_velocity: Vec2,
    pub desired_velocity: Vec2,
    pub command: Vec2,
}

/// One controller update. Fails with [`Error::BufferUnderrun`] until the
/// measurement buffer covers the filter window; the simulation commands
/// zero acceleration meanwhile.
pub fn controller_step(
    state: &mut VehicleState,
    setpoint: Vec2,
    feedforward: Vec2,
    gains: &ControllerGains,
    sensing: &Sensing,
    dt: f64,
) -> Result<ControlOutput> {
    let measured_position = state.measurements.measurement(sensing.now, sensing.delay)?;
    let estimated_velocity =
        state
            .measurements
            .velocity_estimate(sensing.now, sensing.delay, sensing.period)?;

    let desired_velocity = (setpoint - measured_position) * gains.kp_pos + feedforward;
    let velocity_error = desired_velocity - estimated_velocity;

    state.integrator =
        (state.integrator + velocity_error * (gains.ki_vel * dt)).clamp_norm(gains.integrator_limit);
    let derivative = match state.last_velocity_error {
        Some(prev) if gains.kd_vel != 0.0 => (velocity_error - prev) * (gains.kd_vel / dt),
        _ => Vec2::ZERO,
    };
    state.last_velocity_error = Some(velocity_error);

    let command = (velocity_error * gains.kp_vel + state.integrator + derivative)
        .clamp_norm(gains.accel_limit);
    Ok(ControlOutput {
        measured_position,
        estimated_velocity,
        desired_velocity,
        command,
    })
}

/// Semi-implicit Euler step of `r' = v`, `v' = u + w`.
pub fn dynamics_step(state: &mut VehicleState, command: Vec2, disturbance: Vec2, dt: f64) {
    state.velocity += (command + disturbance) * dt;
    state.position += state.velocity * dt;
}

pub fn measurement(state: &VehicleState, now: f64, delay: f64) -> Result<Vec2> {
    state.measurements.measurement(now, delay)
}

/// Steady wind plus white acceleration noise standing in for turbulence and
/// downwash.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisturbanceModel {
    pub wind_speed: f64,
    /// Direction the wind blows toward, degrees counter-clockwise from +X.
    pub wind_heading_deg: f64,
    /// Acceleration per unit wind speed (1/s).
    pub wind_force_gain: f64,
    /// Per-axis standard deviation of the noise (m/s²).
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        Self {
            wind_speed: 0.0,
            wind_heading_deg: 0.0,
            wind_force_gain: 0.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl DisturbanceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_std",
                reason: "must be non-negative",
            });
        }
        if !(self.wind_speed.is_finite()
            && self.wind_heading_deg.is_finite()
            && self.wind_force_gain.is_finite())
        {
            return Err(Error::NonFinite("wind"));
        }
        Ok(())
    }

    pub fn wind_velocity(&self) -> Vec2 {
        Vec2::from_heading_deg(self.wind_heading_deg) * self.wind_speed
    }

    /// Constant acceleration bias caused by the wind.
    pub fn bias(&self) -> Vec2 {
        self.wind_velocity() * self.wind_force_gain
    }
}

/// Seeded realization of a [`DisturbanceModel`] for one vehicle.
#[derive(Debug, Clone)]
pub struct Disturbance {
    bias: Vec2,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl Disturbance {
    /// `stream` separates the realizations of vehicles sharing one seed.
    pub fn new(model: &DisturbanceModel, stream: u64) -> Result<Self> {
        model.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(stream);
        let noise = if model.noise_std > 0.0 {
            Some(Normal::new(0.0, model.noise_std).map_err(|_| Error::InvalidParameter {
                name: "noise_std",
                reason: "invalid normal distribution",
            })?)
        } else {
            None
        };
        Ok(Self {
            bias: model.bias(),
            noise,
            rng,
        })
    }

    pub fn sample(&mut self) -> Vec2 {
        match &self.noise {
            Some(n) => self.bias + Vec2::new(n.sample(&mut self.rng), n.sample(&mut self.rng)),
            None => self.bias,
        }
    }
}
