//! Engagement configuration. Defaults reproduce the reference scenario: a
//! 60 km head-on geometry, 40 Hz simulation and PN, 0.5 Hz ZEM updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::KMeansOptions;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::maneuver::ManeuverModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMethod {
    StraightLine,
    VirtualTarget,
}

impl PredictionMethod {
    pub const ALL: [PredictionMethod; 2] = [PredictionMethod::StraightLine, PredictionMethod::VirtualTarget];

    pub fn as_str(self) -> &'static str {
        match self {
            PredictionMethod::StraightLine => "straight_line",
            PredictionMethod::VirtualTarget => "virtual_target",
        }
    }
}

impl fmt::Display for PredictionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "straight_line" | "straight" | "sl" | "baseline" => Ok(PredictionMethod::StraightLine),
            "virtual_target" | "vt" => Ok(PredictionMethod::VirtualTarget),
            other => Err(Error::InvalidConfig(format!("unknown prediction method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngagementConfig {
    pub nav_gain: f64,
    /// m/s²
    pub a_max: f64,
    /// Hz
    pub f_sim: f64,
    pub f_pn: f64,
    pub f_zem: f64,
    pub n_t: usize,
    pub n_s: usize,
    pub m_targets: usize,
    pub n_interceptors: usize,
    pub target_init_pos: Vec2,
    pub target_init_vel: Vec2,
    pub interceptor_init_pos: Vec2,
    pub interceptor_init_vel: Vec2,
    pub d_endgame_m: f64,
    pub d_hit_m: f64,
    pub t_max_s: f64,
    pub maneuver: ManeuverModelParams,
    pub prediction_method: PredictionMethod,
    pub kmeans: KMeansOptions,
}

impl Default for EngagementConfig {
    fn default() -> Self {
        Self {
            nav_gain: 3.0,
            a_max: 500.0,
            f_sim: 40.0,
            f_pn: 40.0,
            f_zem: 0.5,
            n_t: 20,
            n_s: 1000,
            m_targets: 1,
            n_interceptors: 1,
            target_init_pos: Vec2::new(0.0, 60_000.0),
            target_init_vel: Vec2::new(0.0, -200.0),
            interceptor_init_pos: Vec2::new(0.0, 0.0),
            interceptor_init_vel: Vec2::new(0.0, 500.0),
            d_endgame_m: 6_000.0,
            d_hit_m: 10.0,
            t_max_s: 100.0,
            maneuver: ManeuverModelParams::default(),
            prediction_method: PredictionMethod::VirtualTarget,
            kmeans: KMeansOptions::default(),
        }
    }
}

fn integer_ratio(num: f64, den: f64) -> Option<u64> {
    let r = num / den;
    let rounded = r.round();
    (rounded >= 1.0 && (r - rounded).abs() < 1e-9 * rounded.max(1.0)).then_some(rounded as u64)
}

impl EngagementConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, f) in [("f_sim", self.f_sim), ("f_pn", self.f_pn), ("f_zem", self.f_zem)] {
            if !(f > 0.0 && f.is_finite()) {
                return bad(format!("{name} must be positive, got {f}"));
            }
        }
        if integer_ratio(self.f_sim, self.f_pn).is_none() {
            return bad(format!("f_sim ({}) must be an integer multiple of f_pn ({})", self.f_sim, self.f_pn));
        }
        if integer_ratio(self.f_sim, self.f_zem).is_none() {
            return bad(format!("f_sim ({}) must be an integer multiple of f_zem ({})", self.f_sim, self.f_zem));
        }
        if !(self.d_hit_m >= 0.0 && self.d_hit_m < self.d_endgame_m) {
            return bad(format!(
                "need 0 <= d_hit_m < d_endgame_m, got {} and {}",
                self.d_hit_m, self.d_endgame_m
            ));
        }
        if self.n_t < 2 {
            return bad(format!("n_t must be >= 2, got {}", self.n_t));
        }
        if self.n_s < 1 {
            return bad("n_s must be >= 1".into());
        }
        if !(self.t_max_s > 0.0 && self.t_max_s.is_finite()) {
            return bad(format!("t_max_s must be positive, got {}", self.t_max_s));
        }
        if !(self.a_max >= 0.0 && self.nav_gain.is_finite() && self.a_max.is_finite()) {
            return bad("a_max must be >= 0 and nav_gain finite".into());
        }
        for (name, v) in [
            ("target_init_pos", self.target_init_pos),
            ("target_init_vel", self.target_init_vel),
            ("interceptor_init_pos", self.interceptor_init_pos),
            ("interceptor_init_vel", self.interceptor_init_vel),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.m_targets > 0 && self.target_init_vel.norm() == 0.0 {
            return bad("target_init_vel must be nonzero".into());
        }
        if self.n_interceptors > 0 && self.interceptor_init_vel.norm() == 0.0 {
            return bad("interceptor_init_vel must be nonzero".into());
        }
        if self.kmeans.max_iter == 0 || !(self.kmeans.tol >= 0.0) {
            return bad("kmeans.max_iter must be >= 1 and kmeans.tol >= 0".into());
        }
        self.maneuver.validate()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.f_sim
    }

    /// Sim steps between ZEM updates.
    pub fn zem_period(&self) -> u64 {
        integer_ratio(self.f_sim, self.f_zem).unwrap_or(1)
    }

    /// Sim steps between PN updates.
    pub fn pn_period(&self) -> u64 {
        integer_ratio(self.f_sim, self.f_pn).unwrap_or(1)
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_max_s * self.f_sim).round() as u64
    }

    pub fn from_toml_str(s: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = EngagementConfig::default();
        c.validate().unwrap();
        assert_eq!(c.zem_period(), 80);
        assert_eq!(c.pn_period(), 1);
        assert_eq!(c.total_steps(), 4000);
    }

    #[test]
    fn misaligned_frequencies_rejected() {
        let c = EngagementConfig {
            f_zem: 0.3,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = EngagementConfig {
            f_pn: 30.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hit_radius_must_be_inside_endgame() {
        let c = EngagementConfig {
            d_hit_m: 6_000.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let c = EngagementConfig::from_toml_str(
            "m_targets = 3\nprediction_method = \"straight_line\"\n[maneuver]\na_lat_max_target = 0.0\n",
        )
        .unwrap();
        assert_eq!(c.m_targets, 3);
        assert_eq!(c.prediction_method, PredictionMethod::StraightLine);
        assert_eq!(c.maneuver.a_lat_max_target, 0.0);
        assert_eq!(c.maneuver.segment_duration_max, 10.0);
        assert_eq!(c.n_s, 1000);
    }

    #[test]
    fn toml_round_trip() {
        let c = EngagementConfig::default();
        assert_eq!(EngagementConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(EngagementConfig::from_toml_str("n_mc = 5\n").is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("vt".parse::<PredictionMethod>().unwrap(), PredictionMethod::VirtualTarget);
        assert_eq!(
            "straight-line".parse::<PredictionMethod>().unwrap(),
            PredictionMethod::StraightLine
        );
        assert!("dtw".parse::<PredictionMethod>().is_err());
    }
}
