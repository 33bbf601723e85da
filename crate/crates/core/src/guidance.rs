//! Midcourse zero-effort-miss guidance, endgame proportional navigation and
//! the range-based switch between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::kinematics::VehicleState;
use crate::prediction::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuidancePhase {
    Midcourse,
    /// Pursuing physical target `target` with PN.
    Endgame { target: usize },
}

impl GuidancePhase {
    pub fn is_endgame(self) -> bool {
        matches!(self, GuidancePhase::Endgame { .. })
    }

    pub fn label(self) -> &'static str {
        match self {
            GuidancePhase::Midcourse => "midcourse",
            GuidancePhase::Endgame { .. } => "endgame",
        }
    }
}

/// Grid point of closest predicted approach.
///
/// Returns `(t_go, r)` where `t_go` is measured from `now` and `r` is the
/// predicted interceptor-minus-target position at that grid point. Ties go to
/// the earliest grid point.
pub fn compute_tgo(interceptor_pred: &Trajectory, target_pred: &Trajectory, now: f64) -> Result<(f64, Vec2)> {
    if interceptor_pred.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !interceptor_pred.same_grid(target_pred) {
        return Err(Error::GridMismatch);
    }
    let (best, r) = interceptor_pred
        .positions
        .iter()
        .zip(&target_pred.positions)
        .map(|(pi, pj)| *pi - *pj)
        .enumerate()
        .fold((0, None::<Vec2>), |(bk, br), (k, r)| match br {
            Some(b) if r.norm_squared() >= b.norm_squared() => (bk, Some(b)),
            _ => (k, Some(r)),
        });
    Ok((interceptor_pred.times[best] - now, r.expect("non-empty grid")))
}

/// Zero-effort-miss command `-N r / t_go²`, saturated at `a_max`.
///
/// `r` is interceptor minus target, so the minus sign steers the predicted
/// miss toward zero.
pub fn zem_accel(r_at_tgo: Vec2, t_go: f64, nav_gain: f64, a_max: f64) -> Result<Vec2> {
    if !(t_go > 0.0) {
        return Err(Error::NonPositiveTimeToGo(t_go));
    }
    let a = r_at_tgo * (-nav_gain / (t_go * t_go));
    Ok(a.clamp_norm(a_max))
}

/// Line-of-sight rate (rad/s) and closing speed (m/s) of `target` seen from `interceptor`.
pub fn los_kinematics(interceptor: &VehicleState, target: &VehicleState) -> Result<(f64, f64)> {
    let r = target.position - interceptor.position;
    let range_sq = r.norm_squared();
    if range_sq == 0.0 {
        return Err(Error::ZeroSeparation);
    }
    let r_dot = target.velocity - interceptor.velocity;
    let los_rate = r.cross(r_dot) / range_sq;
    let closing = -r.dot(r_dot) / range_sq.sqrt();
    Ok((los_rate, closing))
}

/// True proportional navigation: `N · V_c · λ̇` perpendicular to the line of
/// sight, turning with the LOS so that its rotation is nulled. Saturated at `a_max`.
pub fn pn_accel(interceptor: &VehicleState, target: &VehicleState, nav_gain: f64, a_max: f64) -> Result<Vec2> {
    let (los_rate, closing) = los_kinematics(interceptor, target)?;
    let los_hat = (target.position - interceptor.position)
        .normalized()
        .ok_or(Error::ZeroSeparation)?;
    let a = los_hat.perp() * (nav_gain * closing * los_rate);
    Ok(a.clamp_norm(a_max))
}

/// Nearest active target to `position`, lowest id on ties.
pub fn nearest_active(position: Vec2, targets: &[VehicleState]) -> Option<(usize, f64)> {
    targets
        .iter()
        .enumerate()
        .filter(|(_, t)| t.active)
        .map(|(j, t)| (j, t.position.distance(position)))
        .fold(None, |best, (j, d)| match best {
            Some((_, bd)) if d >= bd => best,
            _ => Some((j, d)),
        })
}

/// Midcourse becomes endgame once an active target is within `d_endgame`
/// (inclusive). An endgame interceptor whose target is gone relocks onto the
/// nearest active one. Endgame never reverts.
pub fn maybe_switch_phase(
    phase: GuidancePhase,
    interceptor: &VehicleState,
    targets: &[VehicleState],
    d_endgame: f64,
) -> GuidancePhase {
    let Some((nearest, dist)) = nearest_active(interceptor.position, targets) else {
        return phase;
    };
    match phase {
        GuidancePhase::Midcourse if dist <= d_endgame => GuidancePhase::Endgame { target: nearest },
        GuidancePhase::Midcourse => phase,
        GuidancePhase::Endgame { target } if targets.get(target).is_some_and(|t| t.active) => phase,
        GuidancePhase::Endgame { .. } => GuidancePhase::Endgame { target: nearest },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::{horizon, predict_straight};

    #[test]
    fn zem_arithmetic() {
        let a = zem_accel(Vec2::new(100.0, 0.0), 10.0, 3.0, 500.0).unwrap();
        assert_eq!(a, Vec2::new(-3.0, 0.0));
        assert_eq!(a.norm(), 3.0);
        assert_eq!(zem_accel(Vec2::ZERO, 10.0, 3.0, 500.0).unwrap(), Vec2::ZERO);
        let sat = zem_accel(Vec2::new(2e6, 0.0), 10.0, 3.0, 500.0).unwrap();
        assert_eq!(sat, Vec2::new(-500.0, 0.0));
    }

    #[test]
    fn zem_rejects_non_positive_tgo() {
        assert!(zem_accel(Vec2::new(1.0, 0.0), 0.0, 3.0, 500.0).is_err());
        assert!(zem_accel(Vec2::new(1.0, 0.0), -1.0, 3.0, 500.0).is_err());
    }

    #[test]
    fn head_on_tgo_lands_on_grid_point_85() {
        let times = horizon(0.0, 100.0, 20).unwrap();
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 500.0));
        let t = VehicleState::new(Vec2::new(0.0, 60_000.0), Vec2::new(0.0, -200.0));
        // analytic closest approach at 60000/700 s; nearest grid point below it wins
        let t_star: f64 = 60_000.0 / 700.0;
        assert!((t_star - 85.714).abs() < 1e-3);
        let (t_go, r) =
            compute_tgo(&predict_straight(&i, &times, 0.0), &predict_straight(&t, &times, 0.0), 0.0).unwrap();
        assert_eq!(t_go, 85.0);
        assert_eq!(r, Vec2::new(0.0, 85.0 * 700.0 - 60_000.0));
    }

    #[test]
    fn tie_break_prefers_first_point() {
        let times = horizon(0.0, 10.0, 5).unwrap();
        let v = VehicleState::new(Vec2::new(1.0, 1.0), Vec2::new(3.0, 0.0));
        let p = predict_straight(&v, &times, 0.0);
        let (t_go, r) = compute_tgo(&p, &p, 0.0).unwrap();
        assert_eq!(t_go, 2.0);
        assert_eq!(r, Vec2::ZERO);
    }

    #[test]
    fn receding_target_gives_first_point() {
        let times = horizon(0.0, 100.0, 20).unwrap();
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 100.0));
        let t = VehicleState::new(Vec2::new(0.0, 1000.0), Vec2::new(0.0, 200.0));
        let (t_go, _) =
            compute_tgo(&predict_straight(&i, &times, 0.0), &predict_straight(&t, &times, 0.0), 0.0).unwrap();
        assert_eq!(t_go, 5.0);
    }

    #[test]
    fn tgo_errors() {
        let empty = Trajectory::new(vec![], vec![]).unwrap();
        assert!(matches!(compute_tgo(&empty, &empty, 0.0), Err(Error::EmptyGrid)));
        let a = Trajectory::new(vec![1.0], vec![Vec2::ZERO]).unwrap();
        let b = Trajectory::new(vec![2.0], vec![Vec2::ZERO]).unwrap();
        assert!(matches!(compute_tgo(&a, &b, 0.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn pn_null_on_pure_closing() {
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 500.0));
        let t = VehicleState::new(Vec2::new(0.0, 10_000.0), Vec2::ZERO);
        assert_eq!(pn_accel(&i, &t, 3.0, 500.0).unwrap(), Vec2::ZERO);
        let (rate, vc) = los_kinematics(&i, &t).unwrap();
        assert_eq!(rate, 0.0);
        assert_eq!(vc, 500.0);
    }

    #[test]
    fn pn_leads_crossing_target() {
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 500.0));
        let t = VehicleState::new(Vec2::new(0.0, 6000.0), Vec2::new(200.0, 0.0));
        let a = pn_accel(&i, &t, 3.0, 500.0).unwrap();
        assert!(a.x > 0.0);
        assert!(a.y.abs() < 1e-12);
    }

    #[test]
    fn pn_zero_separation_is_error() {
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 500.0));
        assert!(matches!(pn_accel(&i, &i, 3.0, 500.0), Err(Error::ZeroSeparation)));
    }

    fn at(y: f64) -> VehicleState {
        VehicleState::new(Vec2::new(0.0, y), Vec2::new(0.0, -200.0))
    }

    #[test]
    fn endgame_threshold_is_inclusive() {
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 500.0));
        assert_eq!(
            maybe_switch_phase(GuidancePhase::Midcourse, &i, &[at(6001.0)], 6000.0),
            GuidancePhase::Midcourse
        );
        assert_eq!(
            maybe_switch_phase(GuidancePhase::Midcourse, &i, &[at(6000.0)], 6000.0),
            GuidancePhase::Endgame { target: 0 }
        );
    }

    #[test]
    fn relock_to_nearest_when_target_lost() {
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 500.0));
        let mut dead = at(100.0);
        dead.active = false;
        let targets = [dead, at(9000.0), at(3000.0)];
        let phase = maybe_switch_phase(GuidancePhase::Endgame { target: 0 }, &i, &targets, 6000.0);
        assert_eq!(phase, GuidancePhase::Endgame { target: 2 });
        // far away but still endgame
        let targets = [dead, at(9000.0)];
        let phase = maybe_switch_phase(GuidancePhase::Endgame { target: 0 }, &i, &targets, 6000.0);
        assert_eq!(phase, GuidancePhase::Endgame { target: 1 });
    }

    #[test]
    fn no_active_targets_keeps_phase() {
        let i = VehicleState::new(Vec2::ZERO, Vec2::new(0.0, 500.0));
        let mut dead = at(10.0);
        dead.active = false;
        assert_eq!(
            maybe_switch_phase(GuidancePhase::Midcourse, &i, &[dead], 6000.0),
            GuidancePhase::Midcourse
        );
    }
}
