//! Closed-loop engagement simulation.
//!
//! Each sim step runs, in order: the ZEM update for midcourse interceptors
//! (on ZEM ticks), the PN update for endgame interceptors (on PN ticks),
//! integration of every active vehicle under its held command, hit
//! detection, and phase switching.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{remove_vt, update_vts, VirtualTargetSet};
use crate::config::{EngagementConfig, PredictionMethod};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::guidance::{compute_tgo, maybe_switch_phase, nearest_active, pn_accel, zem_accel, GuidancePhase};
use crate::kinematics::{advance_lateral, step_vehicle, VehicleState};
use crate::maneuver::{step_time, ManeuverProcess};
use crate::prediction::{horizon, predict_interceptor, predict_straight, sample_bundle, RolloutSampler, Trajectory};
use crate::rng::{role, stream, StreamRng};

/// Misses closer than this (m) are treated as equal when pairing hits.
const MISS_TIE_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Hit,
    EnterEndgame,
    Relock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_s: f64,
    pub kind: EventKind,
    pub interceptor: usize,
    pub target: usize,
    /// Miss distance for hits, range to target for phase events.
    pub distance_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub time_s: f64,
    pub interceptor: usize,
    pub target: usize,
    pub miss_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub hits: usize,
    pub hit_records: Vec<HitRecord>,
    /// Closest approach of each interceptor to any active target, `None` if it never had one.
    pub closest_approach_m: Vec<Option<f64>>,
    pub terminated_at_s: f64,
    pub config: EngagementConfig,
    pub seed: u64,
    /// Fewer VTs than targets: some VTs may sit between targets.
    pub vt_undersubscribed: bool,
    /// Largest commanded acceleration norm applied to any interceptor (m/s²).
    pub max_command_norm: f64,
    /// Largest relative speed change of any vehicle over the run.
    pub max_speed_drift: f64,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone)]
pub struct EngagementState {
    pub step: u64,
    pub t: f64,
    pub targets: Vec<VehicleState>,
    pub interceptors: Vec<VehicleState>,
    pub phases: Vec<GuidancePhase>,
    pub held_commands: Vec<Vec2>,
    pub vt_set: Option<VirtualTargetSet>,
    pub events: Vec<Event>,
}

impl EngagementState {
    pub fn initial(config: &EngagementConfig) -> Self {
        let target = VehicleState::new(config.target_init_pos, config.target_init_vel);
        let interceptor = VehicleState::new(config.interceptor_init_pos, config.interceptor_init_vel);
        Self {
            step: 0,
            t: 0.0,
            targets: vec![target; config.m_targets],
            interceptors: vec![interceptor; config.n_interceptors],
            phases: vec![GuidancePhase::Midcourse; config.n_interceptors],
            held_commands: vec![Vec2::ZERO; config.n_interceptors],
            vt_set: None,
            events: Vec::new(),
        }
    }

    pub fn any_active(&self) -> bool {
        self.targets.iter().chain(&self.interceptors).any(|v| v.active)
    }

    fn active_interceptor_ids(&self) -> Vec<usize> {
        self.interceptors
            .iter()
            .enumerate()
            .filter(|(_, v)| v.active)
            .map(|(i, _)| i)
            .collect()
    }

    /// Drops the VT of an interceptor that just scored a hit. Remaining VTs keep
    /// their interceptors, and the next clustering runs with one fewer cluster.
    pub fn on_hit_update_vts(&mut self, interceptor: usize, _target: usize) {
        if let Some(set) = &self.vt_set {
            if let Some(slot) = set.slot_of(interceptor) {
                self.vt_set = Some(remove_vt(set, slot).expect("slot came from the set"));
            }
        }
    }
}

/// Receives the engagement state after every sim step (and once at t = 0).
pub trait StepObserver {
    fn observe(&mut self, state: &EngagementState);
}

/// Closest approach of two vehicles over one step, both moving linearly
/// between their sampled positions. Returns `(miss, fraction of step)`.
pub fn segment_cpa(prev_i: Vec2, prev_t: Vec2, new_i: Vec2, new_t: Vec2) -> (f64, f64) {
    let r0 = prev_i - prev_t;
    let d = (new_i - new_t) - r0;
    let dd = d.norm_squared();
    let s = if dd > 0.0 { (-r0.dot(d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    ((r0 + d * s).norm(), s)
}

/// Hits during the step from `t0` to `t0 + dt`.
///
/// Every pair that was active at the start of the step is checked by
/// closest point of approach. Each vehicle scores at most one hit; the
/// smallest misses are paired first, ties going to the lowest interceptor id.
/// Callers deactivate the returned participants.
pub fn detect_hits(
    prev_interceptors: &[VehicleState],
    prev_targets: &[VehicleState],
    interceptors: &[VehicleState],
    targets: &[VehicleState],
    d_hit: f64,
    t0: f64,
    dt: f64,
) -> Vec<HitRecord> {
    let mut candidates = Vec::new();
    for (i, pi) in prev_interceptors.iter().enumerate() {
        if !pi.active {
            continue;
        }
        for (j, pt) in prev_targets.iter().enumerate() {
            if !pt.active {
                continue;
            }
            let (miss, s) = segment_cpa(pi.position, pt.position, interceptors[i].position, targets[j].position);
            if miss <= d_hit {
                candidates.push(HitRecord {
                    time_s: t0 + s * dt,
                    interceptor: i,
                    target: j,
                    miss_m: miss,
                });
            }
        }
    }
    candidates.sort_by_key(|h| {
        (
            (h.miss_m / MISS_TIE_RESOLUTION).round() as u64,
            h.interceptor,
            h.target,
        )
    });
    let mut used_i = vec![false; prev_interceptors.len()];
    let mut used_t = vec![false; prev_targets.len()];
    candidates
        .into_iter()
        .filter(|h| {
            let free = !used_i[h.interceptor] && !used_t[h.target];
            if free {
                used_i[h.interceptor] = true;
                used_t[h.target] = true;
            }
            free
        })
        .collect()
}

/// Runs one engagement with all randomness derived from `seed`.
pub fn run_engagement(config: &EngagementConfig, seed: u64) -> Result<RunResult> {
    Simulation::new(config, seed)?.run(None)
}

/// As [`run_engagement`], reporting every step to `observer`.
pub fn run_engagement_observed(
    config: &EngagementConfig,
    seed: u64,
    observer: &mut dyn StepObserver,
) -> Result<RunResult> {
    Simulation::new(config, seed)?.run(Some(observer))
}

struct Simulation<'a> {
    config: &'a EngagementConfig,
    seed: u64,
    state: EngagementState,
    maneuvers: Vec<ManeuverProcess<StreamRng>>,
    sampler: RolloutSampler,
    sampler_rng: StreamRng,
    cluster_rng: StreamRng,
    hit_records: Vec<HitRecord>,
    closest: Vec<Option<f64>>,
    max_command_norm: f64,
    max_speed_drift: f64,
}

impl<'a> Simulation<'a> {
    fn new(config: &'a EngagementConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let maneuvers = (0..config.m_targets)
            .map(|j| ManeuverProcess::new(config.maneuver, stream(seed, &[role::TARGET_MANEUVER, j as u64])))
            .collect();
        Ok(Self {
            config,
            seed,
            state: EngagementState::initial(config),
            maneuvers,
            sampler: RolloutSampler {
                params: config.maneuver,
                f_sim: config.f_sim,
            },
            sampler_rng: stream(seed, &[role::SAMPLER]),
            cluster_rng: stream(seed, &[role::CLUSTERING]),
            hit_records: Vec::new(),
            closest: vec![None; config.n_interceptors],
            max_command_norm: 0.0,
            max_speed_drift: 0.0,
        })
    }

    fn run(mut self, mut observer: Option<&mut dyn StepObserver>) -> Result<RunResult> {
        let cfg = self.config;
        let dt = cfg.dt();
        let target_speed = cfg.target_init_vel.norm();
        let interceptor_speed = cfg.interceptor_init_vel.norm();
        if let Some(obs) = observer.as_deref_mut() {
            obs.observe(&self.state);
        }

        let total = cfg.total_steps();
        let mut k = 0;
        while k < total && self.state.any_active() {
            let t = step_time(k, cfg.f_sim);
            if k % cfg.zem_period() == 0 {
                self.zem_update(t)?;
            }
            if k % cfg.pn_period() == 0 {
                self.pn_update();
            }

            let prev_targets = self.state.targets.clone();
            let prev_interceptors = self.state.interceptors.clone();

            for (target, process) in self.state.targets.iter_mut().zip(&mut self.maneuvers) {
                if target.active {
                    let a_lat = process.command_at(t);
                    *target = advance_lateral(target, a_lat, dt)?;
                    let drift = (target.speed() - target_speed).abs() / target_speed;
                    self.max_speed_drift = self.max_speed_drift.max(drift);
                }
            }
            for (interceptor, cmd) in self.state.interceptors.iter_mut().zip(&self.state.held_commands) {
                if interceptor.active {
                    self.max_command_norm = self.max_command_norm.max(cmd.norm());
                    *interceptor = step_vehicle(interceptor, *cmd, dt)?;
                    let drift = (interceptor.speed() - interceptor_speed).abs() / interceptor_speed;
                    self.max_speed_drift = self.max_speed_drift.max(drift);
                }
            }

            self.track_closest(&prev_interceptors, &prev_targets);
            let hits = detect_hits(
                &prev_interceptors,
                &prev_targets,
                &self.state.interceptors,
                &self.state.targets,
                cfg.d_hit_m,
                t,
                dt,
            );
            for hit in hits {
                self.state.interceptors[hit.interceptor].active = false;
                self.state.targets[hit.target].active = false;
                self.state.events.push(Event {
                    time_s: hit.time_s,
                    kind: EventKind::Hit,
                    interceptor: hit.interceptor,
                    target: hit.target,
                    distance_m: hit.miss_m,
                });
                if cfg.prediction_method == PredictionMethod::VirtualTarget {
                    self.state.on_hit_update_vts(hit.interceptor, hit.target);
                }
                self.hit_records.push(hit);
            }

            k += 1;
            self.state.step = k;
            self.state.t = step_time(k, cfg.f_sim);
            self.switch_phases();

            if let Some(obs) = observer.as_deref_mut() {
                obs.observe(&self.state);
            }
        }

        Ok(RunResult {
            hits: self.hit_records.len(),
            hit_records: self.hit_records,
            closest_approach_m: self.closest,
            terminated_at_s: step_time(k, cfg.f_sim),
            config: cfg.clone(),
            seed: self.seed,
            vt_undersubscribed: cfg.prediction_method == PredictionMethod::VirtualTarget
                && cfg.n_interceptors < cfg.m_targets,
            max_command_norm: self.max_command_norm,
            max_speed_drift: self.max_speed_drift,
            events: self.state.events,
        })
    }

    /// Straight-line pursuit target for interceptor `i`: target `i mod m`, or
    /// the nearest active target once that one is gone.
    fn baseline_target(&self, i: usize) -> Option<usize> {
        let targets = &self.state.targets;
        if targets.is_empty() {
            return None;
        }
        let j = i % targets.len();
        if targets[j].active {
            Some(j)
        } else {
            nearest_active(self.state.interceptors[i].position, targets).map(|(j, _)| j)
        }
    }

    fn zem_update(&mut self, now: f64) -> Result<()> {
        let cfg = self.config;
        let midcourse: Vec<usize> = self
            .state
            .active_interceptor_ids()
            .into_iter()
            .filter(|&i| !self.state.phases[i].is_endgame())
            .collect();
        if midcourse.is_empty() || !self.state.targets.iter().any(|t| t.active) || now >= cfg.t_max_s {
            return Ok(());
        }
        let times = horizon(now, cfg.t_max_s, cfg.n_t)?;

        let predictions: Vec<(usize, Trajectory)> = match cfg.prediction_method {
            PredictionMethod::StraightLine => midcourse
                .iter()
                .filter_map(|&i| {
                    self.baseline_target(i)
                        .map(|j| (i, predict_straight(&self.state.targets[j], &times, now)))
                })
                .collect(),
            PredictionMethod::VirtualTarget => {
                let owners = self.state.active_interceptor_ids();
                let bundle = sample_bundle(
                    &self.state.targets,
                    &self.sampler,
                    cfg.n_s,
                    now,
                    &times,
                    &mut self.sampler_rng,
                )?;
                let prev = self.state.vt_set.as_ref().filter(|set| set.owners == owners);
                let set = update_vts(&bundle, &owners, prev, cfg.kmeans, &mut self.cluster_rng)?;
                let picked = midcourse
                    .iter()
                    .filter_map(|&i| set.vt_for(i).map(|vt| (i, vt.clone())))
                    .collect();
                self.state.vt_set = Some(set);
                picked
            }
        };

        for (i, target_pred) in predictions {
            let interceptor_pred = predict_interceptor(&self.state.interceptors[i], &times, now);
            let (t_go, r) = compute_tgo(&interceptor_pred, &target_pred, now)?;
            self.state.held_commands[i] = zem_accel(r, t_go, cfg.nav_gain, cfg.a_max)?;
        }
        Ok(())
    }

    fn pn_update(&mut self) {
        let cfg = self.config;
        for i in 0..self.state.interceptors.len() {
            let interceptor = &self.state.interceptors[i];
            if !interceptor.active {
                continue;
            }
            if let GuidancePhase::Endgame { target } = self.state.phases[i] {
                let tgt = &self.state.targets[target];
                if tgt.active {
                    // coincident vehicles were already scored as a hit
                    self.state.held_commands[i] =
                        pn_accel(interceptor, tgt, cfg.nav_gain, cfg.a_max).unwrap_or(Vec2::ZERO);
                }
            }
        }
    }

    fn switch_phases(&mut self) {
        let cfg = self.config;
        let state = &mut self.state;
        for i in 0..state.interceptors.len() {
            let interceptor = &state.interceptors[i];
            if !interceptor.active {
                continue;
            }
            let old = state.phases[i];
            let new = maybe_switch_phase(old, interceptor, &state.targets, cfg.d_endgame_m);
            if let (GuidancePhase::Endgame { target }, true) = (new, new != old) {
                state.events.push(Event {
                    time_s: state.t,
                    kind: if old.is_endgame() { EventKind::Relock } else { EventKind::EnterEndgame },
                    interceptor: i,
                    target,
                    distance_m: interceptor.position.distance(state.targets[target].position),
                });
            }
            state.phases[i] = new;
        }
    }

    fn track_closest(&mut self, prev_interceptors: &[VehicleState], prev_targets: &[VehicleState]) {
        for (i, pi) in prev_interceptors.iter().enumerate() {
            if !pi.active {
                continue;
            }
            for (j, pt) in prev_targets.iter().enumerate() {
                if !pt.active {
                    continue;
                }
                let (miss, _) = segment_cpa(
                    pi.position,
                    pt.position,
                    self.state.interceptors[i].position,
                    self.state.targets[j].position,
                );
                let c = &mut self.closest[i];
                *c = Some(c.map_or(miss, |old| old.min(miss)));
            }
        }
    }
}

/// One row of the per-step trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub id: usize,
    pub kind: &'static str,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub phase: &'static str,
}

/// Collects every vehicle that was active at the start of each step.
#[derive(Debug, Default)]
pub struct TrajectoryRecorder {
    pub rows: Vec<TrajectoryRow>,
    live_targets: Vec<bool>,
    live_interceptors: Vec<bool>,
}

impl TrajectoryRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

impl StepObserver for TrajectoryRecorder {
    fn observe(&mut self, state: &EngagementState) {
        if self.live_targets.is_empty() && self.live_interceptors.is_empty() {
            self.live_targets = vec![true; state.targets.len()];
            self.live_interceptors = vec![true; state.interceptors.len()];
        }
        for (j, v) in state.targets.iter().enumerate() {
            if self.live_targets[j] {
                self.rows.push(TrajectoryRow {
                    time: state.t,
                    id: j,
                    kind: "target",
                    x: v.position.x,
                    y: v.position.y,
                    vx: v.velocity.x,
                    vy: v.velocity.y,
                    phase: "-",
                });
            }
            self.live_targets[j] = v.active;
        }
        for (i, v) in state.interceptors.iter().enumerate() {
            if self.live_interceptors[i] {
                self.rows.push(TrajectoryRow {
                    time: state.t,
                    id: i,
                    kind: "interceptor",
                    x: v.position.x,
                    y: v.position.y,
                    vx: v.velocity.x,
                    vy: v.velocity.y,
                    phase: state.phases[i].label(),
                });
            }
            self.live_interceptors[i] = v.active;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moving(p: (f64, f64), v: (f64, f64)) -> VehicleState {
        VehicleState::new(Vec2::new(p.0, p.1), Vec2::new(v.0, v.1))
    }

    fn step(v: &VehicleState, dt: f64) -> VehicleState {
        VehicleState {
            position: v.extrapolate(dt),
            ..*v
        }
    }

    #[test]
    fn cpa_catches_mid_step_pass() {
        // 700 m/s closing over a 25 ms step covers 17.5 m of along-track gap.
        // A 6 m lateral offset keeps both endpoints outside 10 m.
        let dt = 0.025;
        let i0 = moving((6.0, -4.375), (0.0, 500.0));
        let t0 = moving((0.0, 4.375), (0.0, -200.0));
        let (i1, t1) = (step(&i0, dt), step(&t0, dt));
        assert!(i0.position.distance(t0.position) > 10.0);
        assert!(i1.position.distance(t1.position) > 10.0);
        let hits = detect_hits(&[i0], &[t0], &[i1], &[t1], 10.0, 1.0, dt);
        assert_eq!(hits.len(), 1);
        // closed form: relative position (6, -8.75 + 17.5 s), minimum at s = 1/2
        assert!((hits[0].miss_m - 6.0).abs() < 1e-9);
        assert!((hits[0].time_s - (1.0 + 0.5 * dt)).abs() < 1e-12);
    }

    #[test]
    fn boundary_distance_is_a_hit() {
        let i0 = moving((0.0, 0.0), (0.0, -1.0));
        let t0 = moving((0.0, 10.0), (0.0, 1.0));
        let hits = detect_hits(&[i0], &[t0], &[step(&i0, 0.025)], &[step(&t0, 0.025)], 10.0, 0.0, 0.025);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].miss_m, 10.0);
    }

    #[test]
    fn one_target_pairs_with_one_interceptor() {
        let t = moving((0.0, 0.0), (1.0, 0.0));
        let a = moving((0.0, 4.0), (1.0, 0.0));
        let b = moving((0.0, -2.0), (1.0, 0.0));
        let hits = detect_hits(&[a, b], &[t], &[a, b], &[t], 10.0, 0.0, 0.025);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].interceptor, 1);
    }

    #[test]
    fn inactive_pairs_are_ignored() {
        let mut t = moving((0.0, 0.0), (1.0, 0.0));
        t.active = false;
        let a = moving((0.0, 1.0), (1.0, 0.0));
        assert!(detect_hits(&[a], &[t], &[a], &[t], 10.0, 0.0, 0.025).is_empty());
    }

    #[test]
    fn vacuous_engagement_runs_to_t_max() {
        let cfg = EngagementConfig {
            n_interceptors: 0,
            ..Default::default()
        };
        let r = run_engagement(&cfg, 1).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.terminated_at_s, 100.0);
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let cfg = EngagementConfig {
            n_t: 1,
            ..Default::default()
        };
        assert!(matches!(run_engagement(&cfg, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn on_hit_removes_vt_even_in_endgame() {
        let cfg = EngagementConfig {
            n_interceptors: 3,
            ..Default::default()
        };
        let mut state = EngagementState::initial(&cfg);
        let times = vec![1.0, 2.0];
        state.vt_set = Some(VirtualTargetSet {
            vts: (0..3)
                .map(|_| Trajectory::new(times.clone(), vec![Vec2::ZERO; 2]).unwrap())
                .collect(),
            owners: vec![0, 1, 2],
            horizon_times: times,
            prev_centroids: None,
        });
        state.phases[1] = GuidancePhase::Endgame { target: 0 };
        state.on_hit_update_vts(1, 0);
        assert_eq!(state.vt_set.as_ref().unwrap().owners, vec![0, 2]);
    }
}
