//! Constant-speed point-mass kinematics.
//!
//! Vehicles only accept lateral acceleration, so the velocity vector rotates
//! at rate `a_lat / |v|` and traces an exact circular arc over each step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Below this lateral acceleration (m/s²) a step is integrated as a straight line.
pub const STRAIGHT_LINE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub active: bool,
}

impl VehicleState {
    pub fn new(position: Vec2, velocity: Vec2) -> Self {
        Self {
            position,
            velocity,
            active: true,
        }
    }

    #[inline]
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Position after `dt` seconds without further acceleration.
    #[inline]
    pub fn extrapolate(&self, dt: f64) -> Vec2 {
        self.position + self.velocity * dt
    }
}

/// Component of `a_cmd` along the counter-clockwise normal of `velocity`.
pub fn lateral_component(velocity: Vec2, a_cmd: Vec2) -> Result<f64> {
    let heading = velocity.normalized().ok_or(Error::ZeroSpeed)?;
    Ok(a_cmd.dot(heading.perp()))
}

/// Advances `state` by `dt` under the lateral part of `a_cmd`.
///
/// Any component of the command along the velocity is discarded. Speed is
/// preserved because the velocity is rotated rather than incremented.
/// Inactive vehicles are returned unchanged.
pub fn step_vehicle(state: &VehicleState, a_cmd: Vec2, dt: f64) -> Result<VehicleState> {
    if !state.active {
        return Ok(*state);
    }
    let a_lat = lateral_component(state.velocity, a_cmd)?;
    advance_lateral(state, a_lat, dt)
}

/// Advances `state` by `dt` with a scalar lateral acceleration (positive turns left).
pub fn advance_lateral(state: &VehicleState, a_lat: f64, dt: f64) -> Result<VehicleState> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let speed = state.speed();
    if speed == 0.0 {
        return Err(Error::ZeroSpeed);
    }
    let v = state.velocity;
    if a_lat.abs() < STRAIGHT_LINE_THRESHOLD {
        return Ok(VehicleState {
            position: state.position + v * dt,
            ..*state
        });
    }
    let omega = a_lat / speed;
    let theta = omega * dt;
    // ∫ R(ωτ) v dτ over [0, dt], with every term taken from the half angle
    // (1 - cos θ = 2 sin²(θ/2) keeps precision for small θ).
    let (sh, ch) = (0.5 * theta).sin_cos();
    let s = 2.0 * sh * ch;
    let c = 1.0 - 2.0 * sh * sh;
    let along = s / omega;
    let across = 2.0 * sh * sh / omega;
    let perp = v.perp();
    Ok(VehicleState {
        position: state.position + v * along + perp * across,
        velocity: v * c + perp * s,
        active: state.active,
    })
}
