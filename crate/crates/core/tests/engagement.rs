use vtguide_core::engagement::{run_engagement_observed, EngagementState, EventKind, StepObserver, TrajectoryRecorder};
use vtguide_core::guidance::GuidancePhase;
use vtguide_core::{run_engagement, EngagementConfig, PredictionMethod, Vec2};

fn config(m: usize, n: usize, method: PredictionMethod) -> EngagementConfig {
    EngagementConfig {
        m_targets: m,
        n_interceptors: n,
        prediction_method: method,
        ..Default::default()
    }
}

/// Everything the tests want to know about each observed step.
#[derive(Default)]
struct Log {
    times: Vec<f64>,
    targets: Vec<Vec<(bool, Vec2)>>,
    vt_owners: Vec<Option<Vec<usize>>>,
    active_interceptors: Vec<Vec<usize>>,
    active_counts: Vec<(usize, usize)>,
    phases: Vec<Vec<GuidancePhase>>,
}

impl StepObserver for Log {
    fn observe(&mut self, s: &EngagementState) {
        self.times.push(s.t);
        self.targets.push(s.targets.iter().map(|t| (t.active, t.position)).collect());
        self.vt_owners.push(s.vt_set.as_ref().map(|v| v.owners.clone()));
        self.active_interceptors
            .push(s.interceptors.iter().enumerate().filter(|(_, v)| v.active).map(|(i, _)| i).collect());
        self.active_counts.push((
            s.targets.iter().filter(|v| v.active).count(),
            s.interceptors.iter().filter(|v| v.active).count(),
        ));
        self.phases.push(s.phases.clone());
    }
}

#[test]
fn same_seed_same_result() {
    let cfg = config(2, 3, PredictionMethod::VirtualTarget);
    let a = run_engagement(&cfg, 42).unwrap();
    let b = run_engagement(&cfg, 42).unwrap();
    assert_eq!(a, b);
}

#[test]
fn virtual_targets_track_the_surviving_interceptors() {
    let cfg = config(2, 5, PredictionMethod::VirtualTarget);
    let mut found = false;
    for seed in 0..20 {
        let mut log = Log::default();
        let result = run_engagement_observed(&cfg, seed, &mut log).unwrap();
        for (k, owners) in log.vt_owners.iter().enumerate().skip(1) {
            assert_eq!(owners.as_ref(), Some(&log.active_interceptors[k]), "seed {seed} step {k}");
        }
        if result.hits == 1 && log.active_counts.last().unwrap().0 == 1 {
            found = true;
            let after = result.hit_records[0].time_s;
            let k = log.times.iter().position(|&t| t > after).unwrap();
            assert_eq!(log.vt_owners[k].as_ref().unwrap().len(), 4);
        }
    }
    assert!(found, "no run with exactly one hit among the first seeds");
}

#[test]
fn clustering_stops_with_the_last_target() {
    let cfg = EngagementConfig {
        maneuver: vtguide_core::maneuver::ManeuverModelParams {
            a_lat_max_target: 0.0,
            ..Default::default()
        },
        ..config(1, 3, PredictionMethod::VirtualTarget)
    };
    let mut log = Log::default();
    let result = run_engagement_observed(&cfg, 1, &mut log).unwrap();
    assert_eq!(result.hits, 1);
    let k = log.active_counts.iter().position(|c| c.0 == 0).unwrap();
    let frozen = &log.vt_owners[k];
    assert_eq!(frozen.as_ref().unwrap().len(), 2);
    assert!(log.vt_owners[k..].iter().all(|o| o == frozen));
    assert_eq!(result.terminated_at_s, cfg.t_max_s);
}

#[test]
fn vehicles_are_conserved_and_events_ordered() {
    for method in PredictionMethod::ALL {
        let cfg = config(3, 4, method);
        let mut log = Log::default();
        let result = run_engagement_observed(&cfg, 7, &mut log).unwrap();
        let (m, n) = *log.active_counts.last().unwrap();
        assert_eq!(m + result.hits, 3);
        assert_eq!(n + result.hits, 4);
        for (k, &(mt, nt)) in log.active_counts.iter().enumerate() {
            let hits_so_far = result.hit_records.iter().filter(|h| h.time_s <= log.times[k]).count();
            assert_eq!(mt + hits_so_far, 3);
            assert_eq!(nt + hits_so_far, 4);
        }
        assert!(result.events.windows(2).all(|w| w[0].time_s <= w[1].time_s));
        assert_eq!(result.events.iter().filter(|e| e.kind == EventKind::Hit).count(), result.hits);
        assert!(result.hit_records.iter().all(|h| h.miss_m <= cfg.d_hit_m));
        assert!(result.hits <= 3);

        // endgame never reverts
        for i in 0..4 {
            let first = log.phases.iter().position(|p| p[i].is_endgame());
            if let Some(k) = first {
                assert!(log.phases[k..].iter().all(|p| p[i].is_endgame()));
            }
        }
    }
}

#[test]
fn steps_are_exact_multiples_of_dt() {
    let cfg = config(1, 1, PredictionMethod::StraightLine);
    let mut log = Log::default();
    run_engagement_observed(&cfg, 3, &mut log).unwrap();
    for (k, &t) in log.times.iter().enumerate() {
        assert_eq!(t, k as f64 / cfg.f_sim);
    }
}

#[test]
fn targets_fly_the_same_maneuvers_for_either_method() {
    let runs: Vec<Log> = [
        config(2, 2, PredictionMethod::StraightLine),
        config(2, 2, PredictionMethod::VirtualTarget),
        config(2, 5, PredictionMethod::VirtualTarget),
    ]
    .iter()
    .map(|cfg| {
        let mut log = Log::default();
        run_engagement_observed(cfg, 11, &mut log).unwrap();
        log
    })
    .collect();
    let base = &runs[0];
    for other in &runs[1..] {
        for (a, b) in base.targets.iter().zip(&other.targets) {
            for (x, y) in a.iter().zip(b) {
                if x.0 && y.0 {
                    assert_eq!(x.1, y.1);
                }
            }
        }
    }
}

#[test]
fn trajectory_dump_has_a_row_per_live_vehicle() {
    let cfg = config(1, 2, PredictionMethod::StraightLine);
    let mut rec = TrajectoryRecorder::new();
    let result = run_engagement_observed(&cfg, 0, &mut rec).unwrap();
    let steps = (result.terminated_at_s * cfg.f_sim).round() as usize + 1;
    assert!(rec.rows.len() <= 3 * steps);
    assert!(rec.rows.len() >= steps);
    let mut out = Vec::new();
    rec.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("time,id,kind,x,y,vx,vy,phase\n"));
    assert_eq!(text.lines().count(), rec.rows.len() + 1);
}

#[test]
fn invalid_configs_fail_before_simulating() {
    let mut cfg = config(1, 1, PredictionMethod::StraightLine);
    cfg.f_zem = 0.3;
    assert!(run_engagement(&cfg, 0).is_err());
    let mut cfg = config(1, 1, PredictionMethod::StraightLine);
    cfg.d_hit_m = cfg.d_endgame_m;
    assert!(run_engagement(&cfg, 0).is_err());
}
