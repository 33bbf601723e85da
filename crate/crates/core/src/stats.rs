//! Interval estimates and paired tests for hit counts.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `hits` successes out of `trials`.
pub fn wilson_ci(hits: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidConfig("wilson_ci needs at least one trial".into()));
    }
    if hits > trials {
        return Err(Error::InvalidConfig(format!("{hits} hits out of {trials} trials")));
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Outcome of a paired sign test over per-run scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    /// Runs where the first arm scored more.
    pub wins: u64,
    /// Runs where the second arm scored more.
    pub losses: u64,
    pub ties: u64,
    /// Exact two-sided p-value under "either arm equally likely to win".
    pub p_value: f64,
}

/// Exact sign test on paired scores (McNemar's test when scores are 0/1).
///
/// Panics if the slices differ in length.
pub fn paired_sign_test(a: &[u32], b: &[u32]) -> PairedComparison {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let (mut wins, mut losses, mut ties) = (0u64, 0u64, 0u64);
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            std::cmp::Ordering::Greater => wins += 1,
            std::cmp::Ordering::Less => losses += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let discordant = wins + losses;
    let p_value = if discordant == 0 {
        1.0
    } else {
        let binom = Binomial::new(0.5, discordant).expect("valid binomial");
        (2.0 * binom.cdf(wins.min(losses))).min(1.0)
    };
    PairedComparison {
        wins,
        losses,
        ties,
        p_value,
    }
}
