//! Collision-safety simulation of vehicle platoons under emergency
//! braking.
//!
//! A platoon of vehicles with first-order actuation lag follows a leader
//! under a constant time headway spacing policy, with each follower fed
//! back from one or more predecessors over V2V links. When the leader
//! brakes at its maximum deceleration, follower capabilities drawn i.i.d.
//! from a discrete distribution decide who stops in time. The crate
//! provides:
//!
//! - [`gains`]: admissible-region and H-infinity checks of the spacing
//!   controller's string stability;
//! - [`stochastic`]: capability distributions and reproducible,
//!   counter-seeded sampling;
//! - [`dynamics`]: single-trajectory simulation with saturation,
//!   collision detection, and freeze-on-collision;
//! - [`montecarlo`]: campaign orchestration over the leader-deceleration
//!   sweep, plus Hoeffding sample sizing;
//! - [`oracle`]: exact metrics by exhaustive enumeration, for validating
//!   the estimator on small platoons.

pub mod dynamics;
pub mod gains;
pub mod montecarlo;
pub mod oracle;
pub mod stochastic;

pub use dynamics::{
    IterationOutcome, Mode, PlatoonState, ScenarioConfig, SimError, StepRecord, VehicleState,
};
pub use gains::{
    FeasibilityReport, GainError, GainSet, HinfReport, PlantParams, RegionBoundary, ScaledGains,
    TransferFunction,
};
pub use montecarlo::{
    CampaignConfig, CampaignError, CampaignVariant, ComparisonTable, SafetyMetrics,
};
pub use oracle::{ExactMetrics, OracleError, OracleReport};
pub use stochastic::{ChainAvoidance, DecelDistribution, DecelMatrix, DistError};
