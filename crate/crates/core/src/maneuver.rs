//! Stochastic target maneuver model and ground-truth rollouts.
//!
//! Targets fly piecewise-constant lateral acceleration segments. Each segment
//! lasts `Uniform[segment_duration_min, segment_duration_max]` seconds with an
//! amplitude drawn from `Uniform[-a_lat_max_target, a_lat_max_target]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::kinematics::{advance_lateral, VehicleState};
use crate::prediction::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManeuverModelParams {
    /// m/s²
    pub a_lat_max_target: f64,
    /// s
    pub segment_duration_min: f64,
    /// s
    pub segment_duration_max: f64,
    pub rng_seed: u64,
}

impl Default for ManeuverModelParams {
    fn default() -> Self {
        Self {
            a_lat_max_target: 30.0,
            segment_duration_min: 2.0,
            segment_duration_max: 10.0,
            rng_seed: 0,
        }
    }
}

impl ManeuverModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_lat_max_target >= 0.0 && self.a_lat_max_target.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "a_lat_max_target must be finite and >= 0, got {}",
                self.a_lat_max_target
            )));
        }
        if !(self.segment_duration_min > 0.0
            && self.segment_duration_min <= self.segment_duration_max
            && self.segment_duration_max.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "segment durations must satisfy 0 < min <= max, got [{}, {}]",
                self.segment_duration_min, self.segment_duration_max
            )));
        }
        Ok(())
    }
}

/// A running realization of the maneuver model.
///
/// Segment boundaries live in continuous time; querying the process at a
/// sequence of non-decreasing times returns the amplitude of the segment that
/// contains each time.
#[derive(Debug, Clone)]
pub struct ManeuverProcess<R> {
    params: ManeuverModelParams,
    rng: R,
    segment_end: f64,
    accel: f64,
    started: bool,
}

impl<R: Rng> ManeuverProcess<R> {
    pub fn new(params: ManeuverModelParams, rng: R) -> Self {
        Self {
            params,
            rng,
            segment_end: f64::NEG_INFINITY,
            accel: 0.0,
            started: false,
        }
    }

    fn draw_segment(&mut self) -> (f64, f64) {
        let p = &self.params;
        let duration = self
            .rng
            .random_range(p.segment_duration_min..=p.segment_duration_max);
        let accel = self
            .rng
            .random_range(-p.a_lat_max_target..=p.a_lat_max_target);
        (duration, accel)
    }

    /// Lateral acceleration (m/s², positive = left turn) in effect at `t`.
    ///
    /// The first call opens a segment at `t`. Later calls must not go back in time.
    pub fn command_at(&mut self, t: f64) -> f64 {
        if !self.started {
            let (duration, accel) = self.draw_segment();
            self.segment_end = t + duration;
            self.accel = accel;
            self.started = true;
        }
        while t >= self.segment_end {
            let (duration, accel) = self.draw_segment();
            self.segment_end += duration;
            self.accel = accel;
        }
        self.accel
    }

    /// End time of the current segment. Only meaningful after `command_at`.
    pub fn segment_end(&self) -> f64 {
        self.segment_end
    }
}

/// Time of sim step `k` at rate `f_sim`. All step times in the crate go through here.
#[inline]
pub fn step_time(k: u64, f_sim: f64) -> f64 {
    k as f64 / f_sim
}

/// Index of the sim step at time `t`, which must lie on the step grid up to rounding.
#[inline]
pub fn step_index(t: f64, f_sim: f64) -> u64 {
    (t * f_sim).round().max(0.0) as u64
}

/// First step index whose time is at or after `t`.
fn first_step_at_or_after(t: f64, f_sim: f64) -> u64 {
    let mut k = (t * f_sim).ceil().max(0.0) as u64;
    while k > 0 && step_time(k - 1, f_sim) >= t {
        k -= 1;
    }
    while step_time(k, f_sim) < t {
        k += 1;
    }
    k
}

/// Propagates `initial` from sim-step time `now` under `process`, recording the
/// position at each of `times`.
///
/// The lateral command is sampled at every sim step and held for that step, as
/// in the closed-loop simulation. Because a constant command integrates to an
/// exact arc, runs of steps with the same command are advanced in one jump and
/// recorded positions fall exactly at the requested times.
pub fn rollout_with<R: Rng>(
    initial: &VehicleState,
    process: &mut ManeuverProcess<R>,
    now: f64,
    f_sim: f64,
    times: &[f64],
) -> Result<Trajectory> {
    let mut positions = Vec::with_capacity(times.len());
    rollout_into(initial, process, now, f_sim, times, &mut positions)?;
    Trajectory::new(times.to_vec(), positions)
}

/// Same as [`rollout_with`], appending the recorded positions to `out`.
pub fn rollout_into<R: Rng>(
    initial: &VehicleState,
    process: &mut ManeuverProcess<R>,
    now: f64,
    f_sim: f64,
    times: &[f64],
    out: &mut Vec<Vec2>,
) -> Result<()> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotonicTimes);
    }
    if let Some(&first) = times.first() {
        if first < now {
            return Err(Error::NonMonotonicTimes);
        }
    }

    let mut k = step_index(now, f_sim);
    let mut state = *initial;
    let mut cur_t = step_time(k, f_sim);
    let mut accel = process.command_at(cur_t);
    let mut change_t = step_time(first_step_at_or_after(process.segment_end(), f_sim), f_sim);

    for &tau in times {
        while tau > change_t {
            if change_t > cur_t {
                state = advance_lateral(&state, accel, change_t - cur_t)?;
            }
            cur_t = change_t;
            k = step_index(cur_t, f_sim);
            accel = process.command_at(step_time(k, f_sim));
            change_t = step_time(first_step_at_or_after(process.segment_end(), f_sim), f_sim);
        }
        if tau > cur_t {
            state = advance_lateral(&state, accel, tau - cur_t)?;
            cur_t = tau;
        }
        out.push(state.position);
    }
    Ok(())
}

/// Rollout with a fresh maneuver process drawn from `params` and `rng`.
pub fn rollout_target<R: Rng>(
    initial: &VehicleState,
    params: &ManeuverModelParams,
    rng: R,
    now: f64,
    f_sim: f64,
    times: &[f64],
) -> Result<Trajectory> {
    let mut process = ManeuverProcess::new(*params, rng);
    rollout_with(initial, &mut process, now, f_sim, times)
}
