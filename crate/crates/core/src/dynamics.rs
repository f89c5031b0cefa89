//! Single-trajectory platoon simulation under emergency braking.
//!
//! Vehicles follow double-integrator kinematics with a first-order
//! actuation lag. Position and velocity advance by forward Euler; the lag
//! state advances by a classical RK4 stage combination with the commanded
//! input held constant over the step. Commanded inputs saturate at each
//! vehicle's maximum deceleration. Overlapping positions mark a collision,
//! which stops the colliding pair on the spot for the rest of the run.

use crate::gains::GainSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("follower capability list has {got} entries, expected {expected}")]
    CapabilityCount { expected: usize, got: usize },
    #[error("state diverged at step {step} (|state| > {MAX_STATE_MAGNITUDE:e})")]
    Diverged { step: usize },
    #[error("scenario invalid: {0}")]
    BadScenario(String),
}

/// States above this magnitude abort the run as numerically divergent.
pub const MAX_STATE_MAGNITUDE: f64 = 1e9;

/// Whether followers track predecessors or brake open-loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Followers apply the spacing control law.
    Coordinated,
    /// Every vehicle brakes at its own maximum deceleration.
    Uncoordinated,
}

/// Full description of one braking scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub mode: Mode,
    /// Standstill spacing `d`, meters.
    pub standstill_m: f64,
    /// Initial steady-state speed, m/s.
    pub initial_speed: f64,
    /// Controller gains; also carries the headway and topology depth used
    /// for the initial spacing in both modes.
    pub gains: GainSet,
    /// Actuation lag, seconds.
    pub tau: f64,
    /// Leader maximum deceleration magnitude, m/s^2 (0 = never brakes).
    pub leader_decel: f64,
    /// Number of followers.
    pub followers: usize,
    /// Total simulated time, seconds.
    pub sim_time: f64,
    /// Step size, seconds.
    pub step_size: f64,
    /// Hold velocity at zero once a vehicle stops instead of integrating
    /// through into reverse.
    pub clamp_reverse: bool,
    /// Apply open-loop braking through the lag dynamics; when false the
    /// commanded deceleration is written to the acceleration state
    /// directly (leader in both modes, followers when uncoordinated).
    pub leader_through_lag: bool,
}

impl ScenarioConfig {
    /// Number of integration steps `K = T/h`; `T` must be an integer
    /// multiple of `h`.
    pub fn steps(&self) -> usize {
        (self.sim_time / self.step_size).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: String| Err(SimError::BadScenario(msg));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.standstill_m) {
            return err(format!("standstill spacing must be positive, got {}", self.standstill_m));
        }
        if !self.initial_speed.is_finite() || self.initial_speed < 0.0 {
            return err(format!("initial speed must be nonnegative, got {}", self.initial_speed));
        }
        if !positive(self.sim_time) || !positive(self.step_size) {
            return err("simulation time and step size must be positive".into());
        }
        let k = self.sim_time / self.step_size;
        if (k - k.round()).abs() > 1e-6 {
            return err(format!("sim time {} is not a multiple of step {}", self.sim_time, self.step_size));
        }
        if !positive(self.tau) {
            return err(format!("actuation lag must be positive, got {}", self.tau));
        }
        if !self.leader_decel.is_finite() || self.leader_decel < 0.0 {
            return err(format!("leader deceleration must be nonnegative, got {}", self.leader_decel));
        }
        if self.followers == 0 {
            return err("platoon needs at least one follower".into());
        }
        Ok(())
    }
}

/// Kinematic state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub v: f64,
    pub a: f64,
    /// Maximum deceleration magnitude, m/s^2.
    pub max_decel: f64,
    /// Set for both members of a colliding pair; frozen vehicles hold
    /// position with zero velocity and acceleration.
    pub frozen: bool,
    /// Relative velocity at impact, recorded once on the rear vehicle of
    /// a colliding pair.
    pub rv_at_impact: Option<f64>,
}

/// Leader plus followers at one time step.
#[derive(Debug, Clone)]
pub struct PlatoonState {
    pub vehicles: Vec<VehicleState>,
    pub step: usize,
    pub step_size: f64,
}

impl PlatoonState {
    pub fn leader(&self) -> &VehicleState {
        &self.vehicles[0]
    }

    pub fn followers(&self) -> &[VehicleState] {
        &self.vehicles[1..]
    }
}

/// Per-run collision outcome: flags and impact relative velocities, one
/// slot per follower.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub collided: Vec<bool>,
    pub impact_rv: Vec<f64>,
}

impl IterationOutcome {
    pub fn any_collision(&self) -> bool {
        self.collided.iter().any(|&c| c)
    }

    /// Number of collisions in the run.
    pub fn collision_count(&self) -> usize {
        self.collided.iter().filter(|&&c| c).count()
    }

    /// Sum of impact relative velocities over the run.
    pub fn rv_sum(&self) -> f64 {
        self.impact_rv.iter().sum()
    }
}

/// One dumped trajectory record (per vehicle per step).
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub step: usize,
    pub vehicle: usize,
    pub x: f64,
    pub v: f64,
    pub a: f64,
    pub u: f64,
    pub u_sat: f64,
    pub frozen: bool,
}

/// Builds the equilibrium platoon: leader at the origin, follower `i` at
/// `-i * (d + hw * v0)`, everyone at the initial speed with zero
/// acceleration, so the generalized spacing errors start at zero.
pub fn initial_platoon(cfg: &ScenarioConfig, follower_decels: &[f64]) -> Result<PlatoonState, SimError> {
    cfg.validate()?;
    if follower_decels.len() != cfg.followers {
        return Err(SimError::CapabilityCount {
            expected: cfg.followers,
            got: follower_decels.len(),
        });
    }
    let spacing = cfg.standstill_m + cfg.gains.hw * cfg.initial_speed;
    let vehicle = |x: f64, max_decel: f64| VehicleState {
        x,
        v: cfg.initial_speed,
        a: 0.0,
        max_decel,
        frozen: false,
        rv_at_impact: None,
    };
    let mut vehicles = Vec::with_capacity(cfg.followers + 1);
    vehicles.push(vehicle(0.0, cfg.leader_decel));
    for (i, &d) in follower_decels.iter().enumerate() {
        vehicles.push(vehicle(-((i + 1) as f64) * spacing, d));
    }
    Ok(PlatoonState {
        vehicles,
        step: 0,
        step_size: cfg.step_size,
    })
}

/// Unsaturated spacing control input for follower `i` (1-based platoon
/// index), summing feedback from its `min(r, i)` nearest predecessors.
pub fn control_input(i: usize, p: &PlatoonState, cfg: &ScenarioConfig) -> f64 {
    debug_assert!(i >= 1, "the leader does not run the spacing law");
    let g = &cfg.gains;
    let me = &p.vehicles[i];
    let mut u = 0.0;
    for q in 1..=g.r.min(i) {
        let pred = &p.vehicles[i - q];
        let qf = q as f64;
        u += g.ka * pred.a
            - g.kv * (me.v - pred.v)
            - g.kp * (me.x - pred.x + cfg.standstill_m * qf + qf * g.hw * me.v);
    }
    u
}

/// Open-loop braking input: full deceleration while moving, zero once
/// stopped.
pub fn braking_input(v: f64, decel: f64) -> f64 {
    if v > 0.0 {
        -decel
    } else {
        0.0
    }
}

/// Leader input for the scenario (the leader always brakes open-loop).
pub fn leader_input(p: &PlatoonState, cfg: &ScenarioConfig) -> f64 {
    braking_input(p.vehicles[0].v, cfg.leader_decel)
}

/// Clamps a commanded input to the vehicle's capability `[-d, d]`.
pub fn saturate(u: f64, max_decel: f64) -> f64 {
    debug_assert!(max_decel >= 0.0);
    u.clamp(-max_decel, max_decel)
}

/// Advances every non-frozen vehicle one step. `inputs` must already be
/// saturated; `direct` flags vehicles whose input bypasses the lag and is
/// written straight into the acceleration state.
pub fn rk4_step(p: &mut PlatoonState, inputs: &[f64], direct: &[bool], cfg: &ScenarioConfig) {
    let h = cfg.step_size;
    let inv_tau = 1.0 / cfg.tau;
    for (idx, veh) in p.vehicles.iter_mut().enumerate() {
        if veh.frozen {
            continue;
        }
        let u = inputs[idx];
        veh.x += veh.v * h;
        let new_v = veh.v + veh.a * h;
        let new_a = if direct[idx] {
            u
        } else {
            let k1 = inv_tau * (u - veh.a);
            let k2 = inv_tau * (u - (veh.a + 0.5 * h * k1));
            let k3 = inv_tau * (u - (veh.a + 0.5 * h * k2));
            let k4 = inv_tau * (u - (veh.a + h * k3));
            veh.a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        if cfg.clamp_reverse && new_v < 0.0 {
            veh.v = 0.0;
            veh.a = 0.0;
        } else {
            veh.v = new_v;
            veh.a = new_a;
        }
    }
    p.step += 1;
}

/// Scans adjacent pairs front to rear for overlap and freezes each newly
/// colliding pair. Returns `(follower index, relative velocity at
/// impact)` per new collision; relative velocities are taken from the
/// state as it stood before any freeze applied in this scan.
pub fn detect_and_freeze(p: &mut PlatoonState) -> Vec<(usize, f64)> {
    let mut hits = Vec::new();
    for i in 1..p.vehicles.len() {
        if p.vehicles[i].rv_at_impact.is_none() && p.vehicles[i].x >= p.vehicles[i - 1].x {
            hits.push((i, p.vehicles[i].v - p.vehicles[i - 1].v));
        }
    }
    for &(i, rv) in &hits {
        p.vehicles[i].rv_at_impact = Some(rv);
        for j in [i - 1, i] {
            let veh = &mut p.vehicles[j];
            veh.frozen = true;
            veh.v = 0.0;
            veh.a = 0.0;
        }
    }
    hits
}

/// Runs one trajectory to completion and accumulates the collision
/// outcome.
pub fn simulate_run(cfg: &ScenarioConfig, follower_decels: &[f64]) -> Result<IterationOutcome, SimError> {
    simulate(cfg, follower_decels, None)
}

/// As [`simulate_run`], also streaming every `(step, vehicle)` record to
/// `recorder`.
pub fn simulate_run_recorded(
    cfg: &ScenarioConfig,
    follower_decels: &[f64],
    recorder: &mut dyn FnMut(&StepRecord),
) -> Result<IterationOutcome, SimError> {
    simulate(cfg, follower_decels, Some(recorder))
}

fn simulate(
    cfg: &ScenarioConfig,
    follower_decels: &[f64],
    mut recorder: Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<IterationOutcome, SimError> {
    let mut p = initial_platoon(cfg, follower_decels)?;
    let n_veh = p.vehicles.len();
    let steps = cfg.steps();
    let open_loop_followers = cfg.mode == Mode::Uncoordinated;
    // Open-loop braking bypasses the lag only when configured to.
    let mut direct = vec![false; n_veh];
    if !cfg.leader_through_lag {
        direct[0] = true;
        if open_loop_followers {
            direct[1..].fill(true);
        }
    }
    let mut raw = vec![0.0; n_veh];
    let mut inputs = vec![0.0; n_veh];
    let mut collided = vec![false; cfg.followers];
    let mut impact_rv = vec![0.0; cfg.followers];

    for step in 0..steps {
        raw[0] = leader_input(&p, cfg);
        for (i, slot) in raw.iter_mut().enumerate().skip(1) {
            *slot = if open_loop_followers {
                braking_input(p.vehicles[i].v, p.vehicles[i].max_decel)
            } else {
                control_input(i, &p, cfg)
            };
        }
        for (i, slot) in inputs.iter_mut().enumerate() {
            *slot = saturate(raw[i], p.vehicles[i].max_decel);
        }
        if let Some(rec) = recorder.as_deref_mut() {
            for (i, veh) in p.vehicles.iter().enumerate() {
                rec(&StepRecord {
                    step,
                    vehicle: i,
                    x: veh.x,
                    v: veh.v,
                    a: veh.a,
                    u: raw[i],
                    u_sat: inputs[i],
                    frozen: veh.frozen,
                });
            }
        }
        rk4_step(&mut p, &inputs, &direct, cfg);
        for (i, rv) in detect_and_freeze(&mut p) {
            collided[i - 1] = true;
            impact_rv[i - 1] = rv;
        }
        let mut at_rest = true;
        for veh in &p.vehicles {
            let bounded = veh.x.abs() <= MAX_STATE_MAGNITUDE
                && veh.v.abs() <= MAX_STATE_MAGNITUDE
                && veh.a.abs() <= MAX_STATE_MAGNITUDE
                && veh.x.is_finite()
                && veh.v.is_finite()
                && veh.a.is_finite();
            if !bounded {
                return Err(SimError::Diverged { step: p.step });
            }
            at_rest &= veh.frozen || (veh.v == 0.0 && veh.a == 0.0);
        }
        // Once everything is stopped with zero input the state is fixed,
        // so the remaining steps cannot add collisions. Only open-loop
        // inputs are identically zero at rest; the spacing law can still
        // command creep toward the standstill gap.
        if at_rest && open_loop_followers && recorder.is_none() {
            break;
        }
    }
    Ok(IterationOutcome {
        collided,
        impact_rv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn base_config(mode: Mode) -> ScenarioConfig {
        ScenarioConfig {
            mode,
            standstill_m: 6.0,
            initial_speed: 25.0,
            gains: GainSet::new(0.2, 0.92, 0.03, 1, 0.86).unwrap(),
            tau: 0.5,
            leader_decel: 9.75,
            followers: 10,
            sim_time: 50.0,
            step_size: 0.01,
            clamp_reverse: true,
            leader_through_lag: true,
        }
    }

    #[test]
    fn initial_positions_follow_the_spacing_rule() {
        let cfg = base_config(Mode::Coordinated);
        let p = initial_platoon(&cfg, &[9.75; 10]).unwrap();
        assert_eq!(p.vehicles[0].x, 0.0);
        assert_eq!(p.vehicles[1].x, -27.5);
        assert_eq!(p.vehicles[10].x, -275.0);
        assert!(p.vehicles.iter().all(|v| v.v == 25.0 && v.a == 0.0 && !v.frozen));

        // Zero-speed platoon spaces by the standstill distance alone.
        let mut cfg0 = cfg.clone();
        cfg0.initial_speed = 0.0;
        let p0 = initial_platoon(&cfg0, &[9.75; 10]).unwrap();
        assert_eq!(p0.vehicles[3].x, -18.0);

        // Generalized spacing errors vanish at the initial condition.
        for i in 1..=10 {
            let e = p.vehicles[i].x - p.vehicles[i - 1].x + cfg.standstill_m;
            assert_abs_diff_eq!(e + cfg.gains.hw * p.vehicles[i].v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn capability_list_length_checked() {
        let cfg = base_config(Mode::Coordinated);
        assert!(matches!(
            initial_platoon(&cfg, &[9.75; 3]),
            Err(SimError::CapabilityCount { expected: 10, got: 3 })
        ));
    }

    #[test]
    fn control_vanishes_at_equilibrium() {
        for r in [1, 2, 3] {
            let mut cfg = base_config(Mode::Coordinated);
            cfg.gains = GainSet::new(0.2, 0.92, 0.03, r, 0.86).unwrap();
            let p = initial_platoon(&cfg, &[9.75; 10]).unwrap();
            for i in 1..=10 {
                assert_abs_diff_eq!(control_input(i, &p, &cfg), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn control_velocity_error_term() {
        // Follower at the equilibrium position but 1 m/s slow:
        // u = kv*1 + kp*hw*1 = 0.92 + 0.0258.
        let cfg = base_config(Mode::Coordinated);
        let mut p = initial_platoon(&cfg, &[9.75; 10]).unwrap();
        p.vehicles[1].v = 24.0;
        assert_abs_diff_eq!(control_input(1, &p, &cfg), 0.9458, epsilon = 1e-12);
    }

    #[test]
    fn truncated_law_uses_available_predecessors() {
        let mut cfg = base_config(Mode::Coordinated);
        cfg.gains = GainSet::new(0.2, 0.92, 0.03, 3, 0.86).unwrap();
        let mut p = initial_platoon(&cfg, &[9.75; 10]).unwrap();
        // Perturb the leader; follower 2 sees exactly two predecessor
        // terms (leader and follower 1), so its input matches a manual
        // two-term evaluation.
        p.vehicles[0].a = -3.0;
        p.vehicles[0].v = 20.0;
        let g = &cfg.gains;
        let me = &p.vehicles[2];
        let mut expect = 0.0;
        for q in 1..=2usize {
            let pred = &p.vehicles[2 - q];
            let qf = q as f64;
            expect += g.ka * pred.a
                - g.kv * (me.v - pred.v)
                - g.kp * (me.x - pred.x + cfg.standstill_m * qf + qf * g.hw * me.v);
        }
        assert_abs_diff_eq!(control_input(2, &p, &cfg), expect, epsilon = 1e-12);
        // Follower 1 sees only the perturbed leader.
        let pred = &p.vehicles[0];
        let f1 = &p.vehicles[1];
        let one_term = g.ka * pred.a
            - g.kv * (f1.v - pred.v)
            - g.kp * (f1.x - pred.x + cfg.standstill_m + g.hw * f1.v);
        assert_abs_diff_eq!(control_input(1, &p, &cfg), one_term, epsilon = 1e-12);
    }

    #[test]
    fn saturation_clamps_both_sides() {
        assert_eq!(saturate(-12.0, 9.75), -9.75);
        assert_eq!(saturate(0.0, 4.75), 0.0);
        assert_eq!(saturate(12.0, 9.75), 9.75);
    }

    #[test]
    fn open_loop_braking_switches_off_at_rest() {
        assert_eq!(braking_input(25.0, 9.75), -9.75);
        assert_eq!(braking_input(0.0, 9.75), 0.0);
    }

    #[test]
    fn lag_step_response_matches_closed_form() {
        // Constant input u = 1 into the lag from rest: a(t) = 1 - e^(-t/tau).
        let cfg = base_config(Mode::Coordinated);
        let mut p = PlatoonState {
            vehicles: vec![VehicleState {
                x: 0.0,
                v: 0.0,
                a: 0.0,
                max_decel: 9.75,
                frozen: false,
                rv_at_impact: None,
            }],
            step: 0,
            step_size: cfg.step_size,
        };
        let mut cfg1 = cfg.clone();
        cfg1.followers = 1;
        for k in 1..=100 {
            rk4_step(&mut p, &[1.0], &[false], &cfg1);
            let t = k as f64 * cfg1.step_size;
            let expect = 1.0 - (-t / cfg1.tau).exp();
            assert_abs_diff_eq!(p.vehicles[0].a, expect, epsilon = 1e-8);
        }
        // 50 steps in, the response passes 1 - e^(-1).
        // (Checked via the per-step comparison above at t = 0.5.)
    }

    #[test]
    fn lag_fixed_point_and_freeze_are_inert() {
        let cfg = base_config(Mode::Coordinated);
        let veh = VehicleState {
            x: -3.0,
            v: 7.0,
            a: 2.5,
            max_decel: 9.75,
            frozen: false,
            rv_at_impact: None,
        };
        let mut p = PlatoonState {
            vehicles: vec![veh],
            step: 0,
            step_size: cfg.step_size,
        };
        // u equal to the current acceleration is a fixed point of the lag.
        rk4_step(&mut p, &[2.5], &[false], &cfg);
        assert_eq!(p.vehicles[0].a, 2.5);

        // Frozen vehicles are bit-identical after a step.
        let frozen = VehicleState {
            frozen: true,
            v: 0.0,
            a: 0.0,
            ..veh
        };
        let mut pf = PlatoonState {
            vehicles: vec![frozen],
            step: 0,
            step_size: cfg.step_size,
        };
        rk4_step(&mut pf, &[-5.0], &[false], &cfg);
        assert_eq!(pf.vehicles[0], frozen);
    }

    #[test]
    fn detection_freezes_the_pair_and_records_rv() {
        let cfg = base_config(Mode::Coordinated);
        let mut p = initial_platoon(&cfg, &[9.75; 10]).unwrap();
        assert!(detect_and_freeze(&mut p).is_empty());

        p.vehicles[1].x = p.vehicles[0].x + 0.01;
        p.vehicles[1].v = 12.0;
        p.vehicles[0].v = 5.0;
        let hits = detect_and_freeze(&mut p);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, 1);
        assert_abs_diff_eq!(hits[0].1, 7.0, epsilon = 1e-12);
        assert!(p.vehicles[0].frozen && p.vehicles[1].frozen);
        assert_eq!(p.vehicles[1].v, 0.0);
        // Repeat scan does not double-count.
        assert!(detect_and_freeze(&mut p).is_empty());
    }

    #[test]
    fn weak_follower_rear_ends_a_strong_leader() {
        // Stopping distances: leader 625/19.5 m, follower 625/9.5 m; the
        // 27.5 m gap cannot absorb the difference, so the run ends with
        // exactly one collision.
        let mut cfg = base_config(Mode::Uncoordinated);
        cfg.followers = 1;
        let out = simulate_run(&cfg, &[4.75]).unwrap();
        assert_eq!(out.collision_count(), 1);
        assert!(out.collided[0]);
        assert!(out.impact_rv[0] > 0.0);
    }

    #[test]
    fn identical_capabilities_never_collide() {
        // Leader included: identical kinematics preserve every gap.
        for d in [4.75, 7.25, 9.75] {
            let mut cfg = base_config(Mode::Uncoordinated);
            cfg.leader_decel = d;
            let out = simulate_run(&cfg, &[d; 10]).unwrap();
            assert_eq!(out.collision_count(), 0, "capability {d}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn equilibrium_is_invariant_without_braking() {
        for r in [1, 2, 3] {
            let mut cfg = base_config(Mode::Coordinated);
            cfg.gains = GainSet::new(0.2, 0.92, 0.03, r, 0.86).unwrap();
            cfg.leader_decel = 0.0;
            let caps = [9.75; 10];
            let mut p = initial_platoon(&cfg, &caps).unwrap();
            let direct = vec![false; 11];
            let mut inputs = vec![0.0; 11];
            for _ in 0..cfg.steps() {
                inputs[0] = leader_input(&p, &cfg);
                for i in 1..=10 {
                    inputs[i] = control_input(i, &p, &cfg);
                    assert!(inputs[i].abs() < 1e-12, "drive input appeared: {}", inputs[i]);
                }
                rk4_step(&mut p, &inputs, &direct, &cfg);
            }
            for i in 1..=10 {
                let e = p.vehicles[i].x - p.vehicles[i - 1].x + cfg.standstill_m;
                let delta = e + cfg.gains.hw * p.vehicles[i].v;
                assert!(delta.abs() < 1e-10, "spacing error drifted to {delta}");
                assert_eq!(p.vehicles[i].v, 25.0);
            }
        }
    }

    #[test]
    fn saturation_and_velocity_bounds_hold_throughout() {
        let mut cfg = base_config(Mode::Coordinated);
        cfg.standstill_m = 2.0;
        let caps: Vec<f64> = (0..10).map(|i| 4.75 + 0.5 * (i % 11) as f64).collect();
        let mut max_ratio: f64 = 0.0;
        let mut min_v = f64::INFINITY;
        let out = simulate_run_recorded(&cfg, &caps, &mut |rec| {
            if rec.vehicle > 0 {
                max_ratio = max_ratio.max(rec.u_sat.abs() / caps[rec.vehicle - 1]);
            }
            min_v = min_v.min(rec.v);
        })
        .unwrap();
        assert!(max_ratio <= 1.0 + 1e-12, "saturation exceeded: {max_ratio}");
        assert!(min_v >= 0.0, "velocity went negative: {min_v}");
        let _ = out;
    }

    #[test]
    fn frozen_vehicles_hold_position_forever() {
        // Weak follower behind the strongest leader collides; from the
        // first frozen record onward its position never moves.
        let mut cfg = base_config(Mode::Uncoordinated);
        cfg.followers = 3;
        let mut trace: Vec<(f64, bool)> = Vec::new();
        simulate_run_recorded(&cfg, &[4.75, 9.75, 9.75], &mut |rec| {
            if rec.vehicle == 1 {
                trace.push((rec.x, rec.frozen));
            }
        })
        .unwrap();
        let first_frozen = trace.iter().position(|&(_, f)| f).expect("expected a collision");
        let held = trace[first_frozen].0;
        assert!(trace[first_frozen..].iter().all(|&(x, f)| f && x == held));
    }

    #[test]
    fn coordination_reduces_collisions_on_paired_draws() {
        // With followers at the capability ceiling nobody collides in
        // either mode; with sampled capabilities the coordinated platoon
        // collides strictly less than the open-loop baseline on the same
        // draws (literal integrator, no standstill clamp).
        let mut uncoord = base_config(Mode::Uncoordinated);
        uncoord.clamp_reverse = false;
        uncoord.leader_decel = 7.25;
        let mut coord = uncoord.clone();
        coord.mode = Mode::Coordinated;

        let ceiling = [9.75; 10];
        assert_eq!(simulate_run(&uncoord, &ceiling).unwrap().collision_count(), 0);
        assert_eq!(simulate_run(&coord, &ceiling).unwrap().collision_count(), 0);

        let dist = crate::stochastic::DecelDistribution::standin_bell(
            crate::stochastic::DecelDistribution::arithmetic_support(4.75, 9.75, 11),
        )
        .unwrap();
        let matrix = crate::stochastic::generate_matrix(&dist, 60, 10, 5);
        let total = |cfg: &ScenarioConfig| -> usize {
            (0..60)
                .map(|i| simulate_run(cfg, matrix.row(i)).unwrap().collision_count())
                .sum()
        };
        let baseline = total(&uncoord);
        let coordinated = total(&coord);
        assert!(
            coordinated < baseline,
            "coordination did not help: {coordinated} vs {baseline}"
        );
    }

    #[test]
    fn refinement_of_the_step_barely_moves_counts() {
        // Two-point capability mix with robust deficits; halving the step
        // changes the total collision count of a 100-run batch by < 2%.
        let cfg = base_config(Mode::Uncoordinated);
        let dist = crate::stochastic::DecelDistribution::new(
            vec![4.75, 9.75],
            vec![0.5, 0.5],
        )
        .unwrap();
        let matrix = crate::stochastic::generate_matrix(&dist, 100, 10, 11);
        let total = |step: f64| -> usize {
            let mut c = cfg.clone();
            c.step_size = step;
            (0..100)
                .map(|i| simulate_run(&c, matrix.row(i)).unwrap().collision_count())
                .sum()
        };
        let coarse = total(0.01);
        let fine = total(0.005);
        assert!(coarse > 0);
        let rel = (coarse as f64 - fine as f64).abs() / coarse as f64;
        assert!(rel < 0.02, "collision counts moved by {rel} ({coarse} vs {fine})");
    }

    #[test]
    fn divergence_is_reported_with_its_step() {
        let mut cfg = base_config(Mode::Uncoordinated);
        cfg.initial_speed = 1e12;
        cfg.followers = 1;
        match simulate_run(&cfg, &[4.75]) {
            Err(SimError::Diverged { step }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn ordering_holds_at_detection() {
        // At the first step with overlapping positions, the previous step
        // was still strictly ordered.
        let mut cfg = base_config(Mode::Uncoordinated);
        cfg.followers = 1;
        let mut xs: Vec<(f64, f64)> = Vec::new();
        let mut row = [0.0f64; 2];
        simulate_run_recorded(&cfg, &[4.75], &mut |rec| {
            row[rec.vehicle] = rec.x;
            if rec.vehicle == 1 {
                xs.push((row[0], row[1]));
            }
        })
        .unwrap();
        let k = xs.iter().position(|&(x0, x1)| x1 >= x0).expect("expected an overlap");
        assert!(k > 0 && xs[k - 1].1 < xs[k - 1].0);
    }
}
