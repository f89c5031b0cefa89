//! Campaign orchestration: sweeps the leader deceleration over the
//! capability support, runs independent iterations with sampled follower
//! capabilities, and aggregates the collision-safety metrics.
//!
//! Iterations run in parallel but reduce in iteration order, so a
//! campaign's output is bit-identical for any thread count.

use crate::dynamics::{simulate_run, ScenarioConfig, SimError};
use crate::stochastic::{derive_stream_seed, generate_matrix, DecelDistribution};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CampaignError {
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("deceleration sweep is empty")]
    EmptySweep,
    #[error("sweep value {value} lies outside the capability range [{lower}, {upper}]")]
    SweepOutOfRange { value: f64, lower: f64, upper: f64 },
    #[error("run diverged at leader deceleration {d0}, iteration {iteration}: {source}")]
    RunFailed {
        d0: f64,
        iteration: usize,
        source: SimError,
    },
    #[error("scenario invalid: {0}")]
    BadScenario(SimError),
    #[error("variants disagree on the sweep or sample size")]
    MismatchedVariants,
}

/// Smallest `n` with `2*exp(-2*n*eps^2) <= delta`, i.e. the number of
/// iterations after which the sample mean of a [0, 1] variable sits
/// within `eps` of its expectation with probability at least `1 - delta`.
pub fn hoeffding_min_samples(eps: f64, delta: f64) -> usize {
    assert!(eps > 0.0 && delta > 0.0 && delta < 1.0);
    let n = ((2.0 / delta).ln() / (2.0 * eps * eps)).ceil();
    (n as usize).max(1)
}

/// Inverse of [`hoeffding_min_samples`]: the half-width guaranteed by `n`
/// iterations at confidence `1 - delta`.
pub fn hoeffding_epsilon(n: usize, delta: f64) -> f64 {
    assert!(n >= 1 && delta > 0.0 && delta < 1.0);
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Campaign description: a scenario template (its leader deceleration is
/// replaced by each sweep value), the capability distribution, and the
/// sampling budget.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub base: ScenarioConfig,
    pub dist: DecelDistribution,
    pub iterations: usize,
    pub seed: u64,
    /// Leader decelerations to evaluate; defaults to the full support.
    pub d0_sweep: Vec<f64>,
}

impl CampaignConfig {
    pub fn new(
        base: ScenarioConfig,
        dist: DecelDistribution,
        iterations: usize,
        seed: u64,
    ) -> Self {
        let d0_sweep = dist.values().to_vec();
        Self {
            base,
            dist,
            iterations,
            seed,
            d0_sweep,
        }
    }

    fn validate(&self) -> Result<(), CampaignError> {
        if self.iterations == 0 {
            return Err(CampaignError::NoIterations);
        }
        if self.d0_sweep.is_empty() {
            return Err(CampaignError::EmptySweep);
        }
        for &d0 in &self.d0_sweep {
            if d0 < self.dist.lower() || d0 > self.dist.upper() {
                return Err(CampaignError::SweepOutOfRange {
                    value: d0,
                    lower: self.dist.lower(),
                    upper: self.dist.upper(),
                });
            }
        }
        self.base.validate().map_err(CampaignError::BadScenario)
    }
}

/// Aggregated safety metrics at one leader deceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyMetrics {
    pub d0: f64,
    /// Fraction of iterations with at least one collision, in [0, 1].
    pub p_collision: f64,
    /// Mean number of collisions per iteration.
    pub expected_collisions: f64,
    /// Mean over iterations of the per-iteration sum of impact relative
    /// velocities, m/s.
    pub severity_sum: f64,
    /// Mean over iterations of (impact-velocity sum / collision count),
    /// counting collision-free iterations as zero, m/s.
    pub severity_per_collision: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// Runs the sweep. Each sweep point draws its own capability matrix from
/// a seed derived from `(seed, sweep index)`; iteration `i` of every
/// variant with the same seed sees the same follower draws, which makes
/// cross-variant comparisons paired.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<SafetyMetrics>, CampaignError> {
    cfg.validate()?;
    let n = cfg.iterations;
    let followers = cfg.base.followers;
    let mut results = Vec::with_capacity(cfg.d0_sweep.len());
    for (di, &d0) in cfg.d0_sweep.iter().enumerate() {
        let stream = derive_stream_seed(cfg.seed, di as u64);
        let matrix = generate_matrix(&cfg.dist, n, followers, stream);
        let mut scenario = cfg.base.clone();
        scenario.leader_decel = d0;
        let outcomes: Result<Vec<_>, CampaignError> = (0..n)
            .into_par_iter()
            .map(|i| {
                simulate_run(&scenario, matrix.row(i)).map_err(|source| {
                    CampaignError::RunFailed {
                        d0,
                        iteration: i,
                        source,
                    }
                })
            })
            .collect();
        let outcomes = outcomes?;

        let mut collided_runs = 0usize;
        let mut collisions = 0usize;
        let mut rv_total = 0.0;
        let mut severity_total = 0.0;
        for out in &outcomes {
            let cs = out.collision_count();
            collisions += cs;
            if cs > 0 {
                collided_runs += 1;
                let rv = out.rv_sum();
                rv_total += rv;
                severity_total += rv / cs as f64;
            }
        }
        let nf = n as f64;
        results.push(SafetyMetrics {
            d0,
            p_collision: collided_runs as f64 / nf,
            expected_collisions: collisions as f64 / nf,
            severity_sum: rv_total / nf,
            severity_per_collision: severity_total / nf,
            iterations: n,
            seed: cfg.seed,
        });
    }
    Ok(results)
}

/// One row of a topology/spacing comparison.
#[derive(Debug, Clone)]
pub struct CampaignVariant {
    pub predecessors: usize,
    pub standstill_m: f64,
    pub metrics: Vec<SafetyMetrics>,
}

/// Aligned per-deceleration deltas between two variants.
#[derive(Debug, Clone)]
pub struct VariantDelta {
    pub left: (usize, f64),
    pub right: (usize, f64),
    /// Per sweep point: `(d0, p_right - p_left, n_right - n_left)`.
    pub rows: Vec<(f64, f64, f64)>,
}

/// Comparison across `(r, d)` variants sharing a sweep, a seed, and a
/// sample size.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub variants: Vec<CampaignVariant>,
    pub deltas: Vec<VariantDelta>,
}

/// Aligns variant metrics and computes pairwise deltas. All variants must
/// share the sweep, the iteration count, and the seed.
pub fn compare_topologies(variants: Vec<CampaignVariant>) -> Result<ComparisonTable, CampaignError> {
    if variants.is_empty() {
        return Err(CampaignError::MismatchedVariants);
    }
    let reference = &variants[0].metrics;
    for v in &variants[1..] {
        let same = v.metrics.len() == reference.len()
            && v.metrics.iter().zip(reference).all(|(a, b)| {
                a.d0 == b.d0 && a.iterations == b.iterations && a.seed == b.seed
            });
        if !same {
            return Err(CampaignError::MismatchedVariants);
        }
    }
    let mut deltas = Vec::new();
    for i in 0..variants.len() {
        for j in (i + 1)..variants.len() {
            let (a, b) = (&variants[i], &variants[j]);
            deltas.push(VariantDelta {
                left: (a.predecessors, a.standstill_m),
                right: (b.predecessors, b.standstill_m),
                rows: a
                    .metrics
                    .iter()
                    .zip(&b.metrics)
                    .map(|(ma, mb)| {
                        (
                            ma.d0,
                            mb.p_collision - ma.p_collision,
                            mb.expected_collisions - ma.expected_collisions,
                        )
                    })
                    .collect(),
            });
        }
    }
    Ok(ComparisonTable { variants, deltas })
}
