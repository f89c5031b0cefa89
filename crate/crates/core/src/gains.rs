//! String-stability analysis of the platoon controller gains.
//!
//! The spacing controller feeds back acceleration, velocity, and position
//! errors from up to `r` predecessors under a constant time headway policy.
//! For the error-propagation transfer function to attenuate disturbances
//! along the string, the scaled gains must satisfy a pair of linear
//! inequalities (an admissible region in the velocity/position gain plane)
//! together with a lower bound on the time headway. This module provides
//! the closed-form region checks and a numerical H-infinity sweep of the
//! propagation transfer function as an independent certificate.

use num_complex::Complex64;
use thiserror::Error;

/// Inequality margins are compared against zero with this absolute slack;
/// boundary points count as feasible.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// H-infinity sweep passes when the peak gain stays below `1 + HINF_SLACK`.
pub const HINF_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("gain `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("predecessor count must be at least 1, got {0}")]
    ZeroPredecessors(usize),
    #[error("scaled acceleration gain must lie in (0, 1), got {kta}")]
    InfeasibleScaledAccel { kta: f64 },
    #[error("actuation lag bound must satisfy 0 < tau <= tau0, got tau={tau}, tau0={tau0}")]
    BadLag { tau: f64, tau0: f64 },
    #[error(
        "admissible region is empty: headway {headway} is at or below the lower bound {bound}"
    )]
    EmptyRegion { headway: f64, bound: f64 },
}

/// Controller gains for one platoon topology.
///
/// `ka` is the dimensionless acceleration-feedback gain, `kv` (1/s) and
/// `kp` (1/s^2) the velocity and position gains, `r` the number of
/// predecessors each vehicle listens to, and `hw` the time headway in
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub ka: f64,
    pub kv: f64,
    pub kp: f64,
    pub r: usize,
    pub hw: f64,
}

impl GainSet {
    pub fn new(ka: f64, kv: f64, kp: f64, r: usize, hw: f64) -> Result<Self, GainError> {
        for (name, value) in [("ka", ka), ("kv", kv), ("kp", kp), ("hw", hw)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(GainError::NonPositive { name, value });
            }
        }
        if r < 1 {
            return Err(GainError::ZeroPredecessors(r));
        }
        Ok(Self { ka, kv, kp, r, hw })
    }

    /// Scaled gains used by the feasibility conditions.
    pub fn scaled(&self) -> ScaledGains {
        let r = self.r as f64;
        ScaledGains {
            kta: r * self.ka,
            ktv: r * self.kv,
            ktp: r * self.kp,
            htw: (r + 1.0) / 2.0 * self.hw,
        }
    }
}

/// Gains scaled by topology depth: `kta = r*ka`, `ktv = r*kv`,
/// `ktp = r*kp`, `htw = (r+1)/2 * hw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledGains {
    pub kta: f64,
    pub ktv: f64,
    pub ktp: f64,
    pub htw: f64,
}

impl ScaledGains {
    /// Inverse of [`GainSet::scaled`] for a fixed `r`.
    pub fn unscaled(&self, r: usize) -> Result<GainSet, GainError> {
        let rf = r as f64;
        GainSet::new(
            self.kta / rf,
            self.ktv / rf,
            self.ktp / rf,
            r,
            self.htw * 2.0 / (rf + 1.0),
        )
    }
}

/// First-order actuation lag and its uncertainty bound, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub tau: f64,
    pub tau0: f64,
}

impl PlantParams {
    pub fn new(tau: f64, tau0: f64) -> Result<Self, GainError> {
        if !(tau > 0.0 && tau <= tau0) {
            return Err(GainError::BadLag { tau, tau0 });
        }
        Ok(Self { tau, tau0 })
    }
}

/// Constants of the admissible-region inequalities for given scaled gains.
///
/// The region is `ktv/a1 + ktp/b1 <= 1` and `ktv/a2 + ktp/b2 >= 1`,
/// with all four constants positive whenever `kta` is in (0, 1).
#[derive(Debug, Clone, Copy)]
pub struct RegionConstants {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl RegionConstants {
    pub fn evaluate(kta: f64, htw: f64, tau0: f64) -> Result<Self, GainError> {
        if !(kta > 0.0 && kta < 1.0) {
            return Err(GainError::InfeasibleScaledAccel { kta });
        }
        let a1 = (1.0 - kta * kta) / (2.0 * tau0);
        Ok(Self {
            a1,
            b1: a1 / htw,
            a2: (1.0 - kta) / htw,
            b2: 2.0 * (1.0 - kta) / (htw * htw),
        })
    }
}

/// Outcome of the closed-form admissible-region check.
///
/// `margin1` is the slack of the upper inequality, `margin2` of the lower
/// one; both are nonnegative (within [`FEASIBILITY_SLACK`]) exactly when
/// the gains are admissible.
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub margin1: f64,
    pub margin2: f64,
    pub scaled: ScaledGains,
}

/// Lower bound on the time headway below which no positive velocity and
/// position gains are admissible: `4*tau0 / ((1+r)(1 + r*ka))`.
///
/// Any headway strictly above the bound admits a nonempty region.
pub fn headway_lower_bound(tau0: f64, ka: f64, r: usize) -> Result<f64, GainError> {
    let kta = r as f64 * ka;
    if !(kta > 0.0 && kta < 1.0) {
        return Err(GainError::InfeasibleScaledAccel { kta });
    }
    Ok(4.0 * tau0 / ((1.0 + r as f64) * (1.0 + kta)))
}

/// Raw admissible-region margins for arbitrary (possibly zero) velocity
/// and position gains. Returns `(margin1, margin2)`.
pub fn region_margins(
    ka: f64,
    kv: f64,
    kp: f64,
    r: usize,
    hw: f64,
    tau0: f64,
) -> Result<(f64, f64), GainError> {
    let rf = r as f64;
    let (kta, ktv, ktp) = (rf * ka, rf * kv, rf * kp);
    let htw = (rf + 1.0) / 2.0 * hw;
    let c = RegionConstants::evaluate(kta, htw, tau0)?;
    let margin1 = 1.0 - (ktv / c.a1 + ktp / c.b1);
    let margin2 = (ktv / c.a2 + ktp / c.b2) - 1.0;
    Ok((margin1, margin2))
}

/// Checks a gain set against the admissible region for lags up to `tau0`.
pub fn region_check(gains: &GainSet, tau0: f64) -> Result<FeasibilityReport, GainError> {
    let (margin1, margin2) =
        region_margins(gains.ka, gains.kv, gains.kp, gains.r, gains.hw, tau0)?;
    Ok(FeasibilityReport {
        feasible: margin1 >= -FEASIBILITY_SLACK && margin2 >= -FEASIBILITY_SLACK,
        margin1,
        margin2,
        scaled: gains.scaled(),
    })
}

/// The two boundary lines of the admissible region, sampled in the raw
/// (unscaled) `(kv, kp)` plane.
///
/// Each segment spans the full first quadrant of its line, from the
/// kv-axis intercept to the kp-axis intercept; every sampled point lies
/// on its defining line to within 1e-12 relative residual. The region
/// between the lines is empty when the headway is at or below
/// [`headway_lower_bound`], in which case `EmptyRegion` is returned.
#[derive(Debug, Clone)]
pub struct RegionBoundary {
    /// Upper-inequality line `ktv/a1 + ktp/b1 = 1`.
    pub upper: Vec<[f64; 2]>,
    /// Lower-inequality line `ktv/a2 + ktp/b2 = 1`.
    pub lower: Vec<[f64; 2]>,
}

pub fn region_boundary(
    ka: f64,
    r: usize,
    hw: f64,
    tau0: f64,
    samples: usize,
) -> Result<RegionBoundary, GainError> {
    let rf = r as f64;
    let htw = (rf + 1.0) / 2.0 * hw;
    let c = RegionConstants::evaluate(rf * ka, htw, tau0)?;
    if c.a1 <= c.a2 {
        return Err(GainError::EmptyRegion {
            headway: hw,
            bound: headway_lower_bound(tau0, ka, r)?,
        });
    }
    let samples = samples.max(2);
    let line = |kv_icpt: f64, kp_icpt: f64| -> Vec<[f64; 2]> {
        (0..samples)
            .map(|j| {
                let t = j as f64 / (samples - 1) as f64;
                [kv_icpt * (1.0 - t) / rf, kp_icpt * t / rf]
            })
            .collect()
    };
    Ok(RegionBoundary {
        upper: line(c.a1, c.b1),
        lower: line(c.a2, c.b2),
    })
}

/// Spacing-error propagation transfer function between a vehicle's
/// generalized spacing error and the sum of its predecessors' errors.
///
/// Numerator `ka*s^2 + kv*s + kp`; denominator
/// `tau*s^3 + s^2 + gamma*s + r*kp` with
/// `gamma = r*kv + r*kp*(r+1)/2*hw`. The DC gain of `r*H` is exactly 1.
#[derive(Debug, Clone, Copy)]
pub struct TransferFunction {
    num: [f64; 3],
    den: [f64; 4],
    r: f64,
}

/// Peak of `|r*H(j*omega)|` over a frequency sweep.
#[derive(Debug, Clone, Copy)]
pub struct HinfReport {
    pub max_gain: f64,
    pub arg_omega: f64,
    pub passed: bool,
}

impl TransferFunction {
    pub fn new(gains: &GainSet, plant: &PlantParams) -> Self {
        let s = gains.scaled();
        let gamma = s.ktv + s.ktp * s.htw;
        Self {
            num: [gains.ka, gains.kv, gains.kp],
            den: [plant.tau, 1.0, gamma, s.ktp],
            r: gains.r as f64,
        }
    }

    pub fn numerator(&self) -> [f64; 3] {
        self.num
    }

    pub fn denominator(&self) -> [f64; 4] {
        self.den
    }

    /// `|r * H(j*omega)|`.
    pub fn scaled_gain_at(&self, omega: f64) -> f64 {
        let jw = Complex64::new(0.0, omega);
        let n = (self.num[0] * jw + self.num[1]) * jw + self.num[2];
        let d = ((self.den[0] * jw + self.den[1]) * jw + self.den[2]) * jw + self.den[3];
        self.r * n.norm() / d.norm()
    }

    /// Dense log-spaced frequency sweep over `[1e-3, omega_max]` plus
    /// omega = 0; passes when the peak stays within [`HINF_SLACK`] of 1.
    pub fn hinf_check(&self, omega_max: f64, grid: usize) -> HinfReport {
        let grid = grid.max(2);
        let lo = 1e-3_f64.ln();
        let hi = omega_max.ln();
        let mut max_gain = self.scaled_gain_at(0.0);
        let mut arg_omega = 0.0;
        for j in 0..grid {
            let omega = (lo + (hi - lo) * j as f64 / (grid - 1) as f64).exp();
            let g = self.scaled_gain_at(omega);
            if g > max_gain {
                max_gain = g;
                arg_omega = omega;
            }
        }
        HinfReport {
            max_gain,
            arg_omega,
            passed: max_gain <= 1.0 + HINF_SLACK,
        }
    }
}
