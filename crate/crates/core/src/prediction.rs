//! Target trajectory prediction: straight-line extrapolation and the sampled
//! trajectory bundle that feeds virtual-target clustering.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::kinematics::VehicleState;
use crate::maneuver::{rollout_into, ManeuverModelParams, ManeuverProcess};
use crate::rng::{derive_seed, SampleRng, StreamRng};

/// Timestamped sequence of predicted positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec2>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, positions: Vec<Vec2>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::GridMismatch);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotonicTimes);
        }
        Ok(Self { times, positions })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.times == other.times
    }

    /// Position at `t` by linear interpolation, extrapolating linearly from the
    /// nearest two points outside the grid.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let n = self.times.len();
        match n {
            0 => Vec2::ZERO,
            1 => self.positions[0],
            _ => {
                let hi = self.times.partition_point(|&s| s < t).clamp(1, n - 1);
                let lo = hi - 1;
                let (t0, t1) = (self.times[lo], self.times[hi]);
                let w = (t - t0) / (t1 - t0);
                self.positions[lo] + (self.positions[hi] - self.positions[lo]) * w
            }
        }
    }

    /// This trajectory resampled onto `times`.
    pub fn resample(&self, times: &[f64]) -> Trajectory {
        Trajectory {
            times: times.to_vec(),
            positions: times.iter().map(|&t| self.position_at(t)).collect(),
        }
    }
}

/// `n_t` times uniformly spaced over `(now, t_max]`.
pub fn horizon(now: f64, t_max: f64, n_t: usize) -> Result<Vec<f64>> {
    if !(now < t_max) {
        return Err(Error::HorizonExhausted { now, t_max });
    }
    if n_t == 0 {
        return Err(Error::EmptyGrid);
    }
    let span = t_max - now;
    let mut times: Vec<f64> = (1..=n_t)
        .map(|k| now + k as f64 * span / n_t as f64)
        .collect();
    times[n_t - 1] = t_max;
    Ok(times)
}

/// Constant-velocity extrapolation of a target from its state at `now`.
pub fn predict_straight(state: &VehicleState, times: &[f64], now: f64) -> Trajectory {
    Trajectory {
        times: times.to_vec(),
        positions: times.iter().map(|&t| state.extrapolate(t - now)).collect(),
    }
}

/// Interceptor path under zero future acceleration. Same formula as
/// [`predict_straight`].
pub fn predict_interceptor(state: &VehicleState, times: &[f64], now: f64) -> Trajectory {
    predict_straight(state, times, now)
}

/// Source of sampled future target trajectories.
///
/// Implementations must be deterministic in `seed`.
pub trait TrajectorySampler: Sync {
    /// Appends one sampled trajectory, recorded at `times`, to `out`.
    fn sample_into(
        &self,
        target: &VehicleState,
        now: f64,
        times: &[f64],
        seed: u64,
        out: &mut Vec<Vec2>,
    ) -> Result<()>;
}

/// Samples futures by rolling the maneuver model forward from the current state.
#[derive(Debug, Clone, Copy)]
pub struct RolloutSampler {
    pub params: ManeuverModelParams,
    pub f_sim: f64,
}

impl TrajectorySampler for RolloutSampler {
    fn sample_into(
        &self,
        target: &VehicleState,
        now: f64,
        times: &[f64],
        seed: u64,
        out: &mut Vec<Vec2>,
    ) -> Result<()> {
        use rand::SeedableRng;
        let mut process = ManeuverProcess::new(self.params, SampleRng::seed_from_u64(seed));
        rollout_into(target, &mut process, now, self.f_sim, times, out)
    }
}

/// `n_s` sampled trajectories for every active target, all on one time grid.
///
/// Positions are stored flat, sample-major: sample `i` occupies
/// `points[i * n_t .. (i + 1) * n_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBundle {
    pub horizon_times: Vec<f64>,
    /// Target id that produced each sample.
    pub sources: Vec<usize>,
    points: Vec<Vec2>,
}

impl SampleBundle {
    pub fn from_parts(horizon_times: Vec<f64>, sources: Vec<usize>, points: Vec<Vec2>) -> Result<Self> {
        if horizon_times.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if points.len() != sources.len() * horizon_times.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            horizon_times,
            sources,
            points,
        })
    }

    pub fn n_t(&self) -> usize {
        self.horizon_times.len()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn sample(&self, i: usize) -> &[Vec2] {
        let n_t = self.n_t();
        &self.points[i * n_t..(i + 1) * n_t]
    }

    pub fn trajectory(&self, i: usize) -> Trajectory {
        Trajectory {
            times: self.horizon_times.clone(),
            positions: self.sample(i).to_vec(),
        }
    }
}

/// Draws `n_s` trajectories per active target.
///
/// One key is drawn from `rng`; sample `s` of target `j` is then seeded from
/// `(key, j, s)`, so the bundle does not depend on how the work is scheduled.
pub fn sample_bundle<S: TrajectorySampler>(
    targets: &[VehicleState],
    sampler: &S,
    n_s: usize,
    now: f64,
    times: &[f64],
    rng: &mut StreamRng,
) -> Result<SampleBundle> {
    let active: Vec<usize> = targets
        .iter()
        .enumerate()
        .filter(|(_, t)| t.active)
        .map(|(j, _)| j)
        .collect();
    if active.is_empty() {
        return Err(Error::NoActiveTargets);
    }
    let key = rng.next_u64();
    let n_t = times.len();

    let chunks: Vec<Vec<Vec2>> = active
        .par_iter()
        .map(|&j| {
            let mut out = Vec::with_capacity(n_s * n_t);
            for s in 0..n_s {
                let seed = derive_seed(key, &[j as u64, s as u64]);
                sampler.sample_into(&targets[j], now, times, seed, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let sources = active
        .iter()
        .flat_map(|&j| std::iter::repeat_n(j, n_s))
        .collect();
    SampleBundle::from_parts(times.to_vec(), sources, chunks.concat())
}
