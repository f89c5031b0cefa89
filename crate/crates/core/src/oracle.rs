//! Exact safety metrics for small platoons by exhaustive enumeration.
//!
//! Every follower-capability combination is simulated once and weighted
//! by its probability, giving the exact expectations that the Monte Carlo
//! estimator approaches. The oracle reuses the trajectory simulator
//! verbatim: it validates the estimator, not the dynamics.

use crate::dynamics::{simulate_run, ScenarioConfig, SimError};
use crate::montecarlo::{hoeffding_epsilon, run_campaign, CampaignConfig, CampaignError};
use crate::stochastic::DecelDistribution;
use rayon::prelude::*;
use thiserror::Error;

/// Largest number of capability combinations the oracle will enumerate.
pub const MAX_COMBINATIONS: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{combinations} capability combinations exceed the enumeration budget of {MAX_COMBINATIONS}")]
    BudgetExceeded { combinations: u128 },
    #[error("scenario invalid: {0}")]
    BadScenario(#[from] SimError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
}

/// Probability-weighted expectations over all capability combinations at
/// one leader deceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMetrics {
    pub d0: f64,
    pub p_collision: f64,
    pub expected_collisions: f64,
    pub severity_sum: f64,
    pub severity_per_collision: f64,
    /// Number of enumerated combinations.
    pub combinations: u128,
}

/// Exhaustively enumerates the `m^N` capability combinations, simulating
/// each once and weighting its outcome by the product of entry
/// probabilities. Zero-probability combinations contribute nothing and
/// are skipped.
pub fn enumerate_exact(
    base: &ScenarioConfig,
    dist: &DecelDistribution,
    d0: f64,
) -> Result<ExactMetrics, OracleError> {
    base.validate()?;
    let m = dist.len() as u128;
    let n = base.followers as u32;
    let combinations = m
        .checked_pow(n)
        .filter(|&c| c <= MAX_COMBINATIONS)
        .ok_or(OracleError::BudgetExceeded {
            combinations: m.saturating_pow(n),
        })?;

    let mut scenario = base.clone();
    scenario.leader_decel = d0;
    let values = dist.values();
    let probs = dist.probs();
    let followers = base.followers;

    // Weighted (total, any-collision, count, severity-sum, per-collision
    // severity) contributions of one capability combination.
    type WeightedTerms = (f64, f64, f64, f64, f64);

    // Combination `c` encodes follower capabilities as digits of `c` in
    // base m, least significant digit first.
    let per_combo: Result<Vec<WeightedTerms>, OracleError> = (0..combinations as u64)
        .into_par_iter()
        .map(|c| {
            let mut weight = 1.0;
            let mut caps = vec![0.0; followers];
            let mut rem = c as usize;
            for cap in caps.iter_mut() {
                let digit = rem % values.len();
                rem /= values.len();
                *cap = values[digit];
                weight *= probs[digit];
            }
            if weight == 0.0 {
                return Ok((0.0, 0.0, 0.0, 0.0, 0.0));
            }
            let out = simulate_run(&scenario, &caps).map_err(OracleError::BadScenario)?;
            let cs = out.collision_count();
            let rv = out.rv_sum();
            let severity = if cs > 0 { rv / cs as f64 } else { 0.0 };
            Ok((
                weight,
                weight * (cs > 0) as u8 as f64,
                weight * cs as f64,
                weight * rv,
                weight * severity,
            ))
        })
        .collect();

    let mut total_weight = 0.0;
    let mut p = 0.0;
    let mut nexp = 0.0;
    let mut s_sum = 0.0;
    let mut s_per = 0.0;
    for (w, pw, nw, sw, vw) in per_combo? {
        total_weight += w;
        p += pw;
        nexp += nw;
        s_sum += sw;
        s_per += vw;
    }
    debug_assert!((total_weight - 1.0).abs() < 1e-9);
    Ok(ExactMetrics {
        d0,
        p_collision: p,
        expected_collisions: nexp,
        severity_sum: s_sum,
        severity_per_collision: s_per,
        combinations,
    })
}

/// Monte Carlo vs exact enumeration at one sweep point.
#[derive(Debug, Clone, Copy)]
pub struct OracleReport {
    pub exact: ExactMetrics,
    pub mc: crate::montecarlo::SafetyMetrics,
    pub err_p: f64,
    /// Collision-count error normalized by the follower count so it is a
    /// [0, 1] quantity comparable against the Hoeffding half-width.
    pub err_collisions_normalized: f64,
    pub err_severity_sum: f64,
    pub err_severity_per_collision: f64,
    /// Hoeffding half-width for the given sample size and confidence.
    pub epsilon: f64,
    pub passed: bool,
}

/// Runs the estimator against the oracle: passes when the collision
/// probability and the normalized collision count both land within the
/// Hoeffding half-width for `n` samples at confidence `1 - delta`.
pub fn mc_vs_oracle(
    base: &ScenarioConfig,
    dist: &DecelDistribution,
    d0: f64,
    n: usize,
    seed: u64,
    delta: f64,
) -> Result<OracleReport, OracleError> {
    let exact = enumerate_exact(base, dist, d0)?;
    let mut cfg = CampaignConfig::new(base.clone(), dist.clone(), n, seed);
    cfg.d0_sweep = vec![d0];
    let mc = run_campaign(&cfg)?.remove(0);
    let epsilon = hoeffding_epsilon(n, delta);
    let err_p = (mc.p_collision - exact.p_collision).abs();
    let err_n =
        (mc.expected_collisions - exact.expected_collisions).abs() / base.followers as f64;
    Ok(OracleReport {
        exact,
        mc,
        err_p,
        err_collisions_normalized: err_n,
        err_severity_sum: (mc.severity_sum - exact.severity_sum).abs(),
        err_severity_per_collision: (mc.severity_per_collision - exact.severity_per_collision)
            .abs(),
        epsilon,
        passed: err_p <= epsilon && err_n <= epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Mode;
    use crate::gains::GainSet;
    use approx::assert_abs_diff_eq;

    fn scenario(followers: usize) -> ScenarioConfig {
        ScenarioConfig {
            mode: Mode::Uncoordinated,
            standstill_m: 6.0,
            initial_speed: 25.0,
            gains: GainSet::new(0.2, 0.92, 0.03, 1, 0.86).unwrap(),
            tau: 0.5,
            leader_decel: 0.0,
            followers,
            sim_time: 50.0,
            step_size: 0.01,
            clamp_reverse: true,
            leader_through_lag: true,
        }
    }

    #[test]
    fn two_point_single_follower_probability_is_exact() {
        // Only the weak-follower branch collides behind a full-strength
        // leader, so the collision probability is exactly its pmf weight.
        let dist = DecelDistribution::new(vec![4.75, 9.75], vec![0.3, 0.7]).unwrap();
        let exact = enumerate_exact(&scenario(1), &dist, 9.75).unwrap();
        assert_abs_diff_eq!(exact.p_collision, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(exact.expected_collisions, 0.3, epsilon = 1e-15);
        assert!(exact.severity_sum > 0.0);
    }

    #[test]
    fn degenerate_distribution_matches_mc_at_zero() {
        let dist = DecelDistribution::new(vec![7.25], vec![1.0]).unwrap();
        let report = mc_vs_oracle(&scenario(3), &dist, 7.25, 500, 11, 0.01).unwrap();
        assert_eq!(report.exact.p_collision, 0.0);
        assert_eq!(report.mc.p_collision, 0.0);
        assert_eq!(report.err_p, 0.0);
        assert!(report.passed);
    }

    #[test]
    fn uniform_probability_is_a_combination_count() {
        // With a uniform pmf the exact probability is (colliding
        // combinations) / m^N; recompute it by direct counting.
        let values = vec![4.75, 7.25, 9.75];
        let dist = DecelDistribution::uniform(values.clone()).unwrap();
        let base = scenario(2);
        let exact = enumerate_exact(&base, &dist, 9.75).unwrap();
        let mut colliding = 0usize;
        let mut scenario_d0 = base.clone();
        scenario_d0.leader_decel = 9.75;
        for &a in &values {
            for &b in &values {
                if simulate_run(&scenario_d0, &[a, b]).unwrap().any_collision() {
                    colliding += 1;
                }
            }
        }
        assert!(colliding > 0);
        assert_abs_diff_eq!(
            exact.p_collision,
            colliding as f64 / 9.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn enumeration_order_does_not_matter() {
        // Reference computed with the combination loop reversed.
        let dist =
            DecelDistribution::new(vec![4.75, 6.75, 9.75], vec![0.25, 0.5, 0.25]).unwrap();
        let base = scenario(3);
        let exact = enumerate_exact(&base, &dist, 9.75).unwrap();

        let mut scenario_d0 = base.clone();
        scenario_d0.leader_decel = 9.75;
        let values = dist.values();
        let probs = dist.probs();
        let mut p = 0.0;
        let mut nexp = 0.0;
        for c in (0..27usize).rev() {
            let digits = [c % 3, (c / 3) % 3, (c / 9) % 3];
            let caps: Vec<f64> = digits.iter().map(|&d| values[d]).collect();
            let w: f64 = digits.iter().map(|&d| probs[d]).product();
            let out = simulate_run(&scenario_d0, &caps).unwrap();
            p += w * out.any_collision() as u8 as f64;
            nexp += w * out.collision_count() as f64;
        }
        assert_abs_diff_eq!(exact.p_collision, p, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.expected_collisions, nexp, epsilon = 1e-12);
    }

    #[test]
    fn budget_guard_rejects_large_platoons() {
        let dist = DecelDistribution::uniform(
            DecelDistribution::arithmetic_support(4.75, 9.75, 11),
        )
        .unwrap();
        assert!(matches!(
            enumerate_exact(&scenario(10), &dist, 9.75),
            Err(OracleError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn estimator_converges_on_a_single_follower() {
        let dist = DecelDistribution::new(vec![4.75, 9.75], vec![0.3, 0.7]).unwrap();
        let report = mc_vs_oracle(&scenario(1), &dist, 9.75, 1_000_000, 17, 0.01).unwrap();
        assert!(report.err_p < 0.005, "err_p = {}", report.err_p);
        assert!(report.passed);
    }
}
