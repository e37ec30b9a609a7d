//! Planar robot dynamics: three PID-driven wheel motors, Newtonian body
//! dynamics in the body frame and pose integration in the world frame.
//!
//! Wheels never slip: after every physics step the wheel-shaft speeds are
//! re-derived from the body velocity. Rim forces are projected onto the body
//! axes with the transpose of the kinematic matrix. Coulomb friction at the
//! wheels is resolved as bounded per-step impulses so that the robot can come
//! to an exact stop.

use serde::{Deserialize, Serialize};

use crate::actuation::{pid_step, AccelLimiter, EncoderModel, MotorParams, MotorState, PidGains, PidState};
use crate::error::{Error, Result};
use crate::kinematics::{
    body_to_wheels, invert3, mat_mul, mat_vec, normalize_angle, transpose, wheel_rim_to_shaft, BodyVelocity, Mat3,
    Pose, RobotGeometry,
};
use crate::signals::{ExcitationProfile, LogRow, ResponseLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyParams {
    pub mass_kg: f64,
    /// Moment of inertia about the vertical axis (kg·m²).
    pub j_z: f64,
    /// Roll/pitch inertias; carried for completeness, unused by the planar model.
    pub j_x: f64,
    pub j_y: f64,
    /// Adds the rotating-frame coupling between v and vn.
    pub include_coriolis: bool,
}

impl Default for BodyParams {
    fn default() -> Self {
        Self {
            mass_kg: 26.2,
            j_z: 1.1,
            j_x: 0.629,
            j_y: 0.658,
            include_coriolis: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub physics_dt_s: f64,
    /// Run length; `None` means the profile's own duration.
    pub duration_s: Option<f64>,
    pub geometry: RobotGeometry,
    pub body: BodyParams,
    pub motor: MotorParams,
    /// Wheel-speed controllers; `gains.period_s` is the control period.
    pub gains: PidGains,
    /// Limit on the slope of each wheel-shaft reference (rad/s²).
    pub accel_limit: f64,
    pub encoder: EncoderModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            physics_dt_s: 1e-3,
            duration_s: None,
            geometry: RobotGeometry::default(),
            body: BodyParams::default(),
            motor: MotorParams::default(),
            gains: PidGains::default(),
            accel_limit: 61.09,
            encoder: EncoderModel::default(),
        }
    }
}

impl SimConfig {
    pub fn control_dt_s(&self) -> f64 {
        self.gains.period_s
    }

    /// Physics steps per control period.
    pub fn substeps(&self) -> Result<u64> {
        let ratio = self.gains.period_s / self.physics_dt_s;
        let n = ratio.round();
        if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * n {
            return Err(Error::invalid(format!(
                "control period {} s is not an integer multiple of physics step {} s",
                self.gains.period_s, self.physics_dt_s
            )));
        }
        Ok(n as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.physics_dt_s > 0.0 && self.physics_dt_s.is_finite()) {
            return Err(Error::invalid("physics_dt_s must be > 0"));
        }
        if let Some(d) = self.duration_s {
            if !(d > 0.0) {
                return Err(Error::invalid("duration_s must be > 0"));
            }
        }
        if !(self.body.mass_kg > 0.0 && self.body.j_z > 0.0) {
            return Err(Error::invalid("mass_kg and j_z must be > 0"));
        }
        if !(self.accel_limit > 0.0) {
            return Err(Error::invalid("accel_limit must be > 0"));
        }
        self.geometry.validate()?;
        self.motor.validate()?;
        self.gains.validate()?;
        self.substeps()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub body_vel: BodyVelocity,
    pub motors: [MotorState; 3],
    pub pids: [PidState; 3],
    pub limiters: [AccelLimiter; 3],
    /// Physics steps taken so far.
    pub step: u64,
}

impl RobotState {
    pub fn at_rest(cfg: &SimConfig) -> Self {
        let lim = AccelLimiter {
            max_accel_rad_s2: cfg.accel_limit,
            current_ref: 0.0,
        };
        Self {
            pose: Pose::default(),
            body_vel: BodyVelocity::ZERO,
            motors: [MotorState::default(); 3],
            pids: [PidState::default(); 3],
            limiters: [lim; 3],
            step: 0,
        }
    }

    /// Rest state with the body already moving; wheel speeds follow.
    pub fn moving(cfg: &SimConfig, body_vel: BodyVelocity) -> Self {
        let mut s = Self::at_rest(cfg);
        s.body_vel = body_vel;
        let rim = body_to_wheels(&cfg.geometry, body_vel).0;
        for (m, w) in s.motors.iter_mut().zip(rim) {
            m.omega_shaft = wheel_rim_to_shaft(&cfg.geometry, w);
        }
        s
    }

    pub fn wheel_refs(&self) -> [f64; 3] {
        self.limiters.map(|l| l.current_ref)
    }

    pub fn voltages(&self) -> [f64; 3] {
        self.motors.map(|m| m.voltage_applied)
    }

    pub fn wheel_speeds(&self) -> [f64; 3] {
        self.motors.map(|m| m.omega_shaft)
    }

    fn is_finite(&self) -> bool {
        self.pose.is_finite()
            && self.body_vel.is_finite()
            && self
                .motors
                .iter()
                .all(|m| m.omega_shaft.is_finite() && m.current.is_finite() && m.voltage_applied.is_finite())
            && self
                .pids
                .iter()
                .all(|p| p.integral_accum.is_finite() && p.prev_error.is_finite())
    }
}

/// Translational plus rotational kinetic energy of the body.
pub fn kinetic_energy(body: &BodyParams, vel: &BodyVelocity) -> f64 {
    0.5 * body.mass_kg * (vel.v * vel.v + vel.vn * vel.vn) + 0.5 * body.j_z * vel.omega * vel.omega
}

/// A validated configuration with the matrices the step needs precomputed.
#[derive(Debug, Clone)]
pub struct Robot {
    cfg: SimConfig,
    substeps: u64,
    kin: Mat3,
    kin_t: Mat3,
    inv_mass: [f64; 3],
    /// Rim-speed response to a unit rim impulse on each wheel.
    impulse_response: Mat3,
    impulse_response_inv: Mat3,
}

impl Robot {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let kin = cfg.geometry.matrix();
        let kin_t = transpose(&kin);
        let inv_mass = [1.0 / cfg.body.mass_kg, 1.0 / cfg.body.mass_kg, 1.0 / cfg.body.j_z];
        let scaled_t = [0, 1, 2].map(|r| [0, 1, 2].map(|c| kin_t[r][c] * inv_mass[r]));
        let impulse_response = mat_mul(&kin, &scaled_t);
        // (A M⁻¹ Aᵀ)⁻¹ = A⁻ᵀ M A⁻¹
        let kin_inv = invert3(&kin)?;
        let mass = inv_mass.map(|x| 1.0 / x);
        let scaled_inv = [0, 1, 2].map(|r| [0, 1, 2].map(|c| kin_inv[r][c] * mass[r]));
        let impulse_response_inv = mat_mul(&transpose(&kin_inv), &scaled_inv);
        Ok(Self {
            substeps: cfg.substeps()?,
            cfg,
            kin,
            kin_t,
            inv_mass,
            impulse_response,
            impulse_response_inv,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn substeps(&self) -> u64 {
        self.substeps
    }

    /// Controller sample: distributes the body reference to wheel-shaft
    /// references, rate-limits them and updates the three PID outputs.
    pub fn control_update(&self, state: &mut RobotState, body_ref: BodyVelocity) {
        let cfg = &self.cfg;
        let period = cfg.gains.period_s;
        let rim_refs = mat_vec(&self.kin, body_ref.as_array());
        for i in 0..3 {
            let target = wheel_rim_to_shaft(&cfg.geometry, rim_refs[i]);
            let r = state.limiters[i].limit_reference(target, period);
            let measured = cfg
                .encoder
                .measure(state.motors[i].omega_shaft, period, cfg.geometry.gear_ratio);
            let (u, pid) = pid_step(&cfg.gains, &state.pids[i], r, measured);
            state.pids[i] = pid;
            state.motors[i].voltage_applied = u.clamp(-cfg.motor.u_max_volts, cfg.motor.u_max_volts);
        }
    }

    /// One physics step at the currently held motor voltages.
    pub fn physics_step(&self, state: &mut RobotState) -> Result<()> {
        let cfg = &self.cfg;
        let m = &cfg.motor;
        let r = cfg.geometry.wheel_radius_m;
        let dt = cfg.physics_dt_s;

        let q = state.body_vel.as_array();
        let rim = mat_vec(&self.kin, q);
        let mut force = [0.0; 3];
        for i in 0..3 {
            let omega = rim[i] / r;
            let current = (state.motors[i].voltage_applied - m.k_torque * omega) / m.r_internal_ohm;
            force[i] = (m.k_torque * current - m.b_viscous * omega) / r;
        }
        let mut gen = mat_vec(&self.kin_t, force);
        if cfg.body.include_coriolis {
            // body-frame derivative of a world-fixed velocity: (ω·vn, −ω·v)
            gen[0] += cfg.body.mass_kg * q[2] * q[1];
            gen[1] -= cfg.body.mass_kg * q[2] * q[0];
        }
        let mut next = [0, 1, 2].map(|k| q[k] + dt * gen[k] * self.inv_mass[k]);

        let max_impulse = dt * m.f_coulomb / r;
        if max_impulse > 0.0 {
            self.resolve_coulomb(&mut next, max_impulse);
        }

        let theta = state.pose.theta;
        let (s, c) = theta.sin_cos();
        state.pose.x += dt * (next[0] * c - next[1] * s);
        state.pose.y += dt * (next[0] * s + next[1] * c);
        state.pose.theta = normalize_angle(theta + dt * next[2]);
        state.body_vel = BodyVelocity::from_array(next);

        let rim = mat_vec(&self.kin, next);
        for i in 0..3 {
            let mot = &mut state.motors[i];
            mot.omega_shaft = rim[i] / r;
            mot.current = (mot.voltage_applied - m.k_torque * mot.omega_shaft) / m.r_internal_ohm;
        }
        state.step += 1;
        if !state.is_finite() {
            return Err(Error::NonFiniteState { step: state.step });
        }
        Ok(())
    }

    /// Applies rim friction impulses bounded by `max_impulse` per wheel,
    /// choosing them so no wheel reverses through zero within the step.
    fn resolve_coulomb(&self, vel: &mut [f64; 3], max_impulse: f64) {
        let rim = mat_vec(&self.kin, *vel);
        if rim.iter().all(|&w| w == 0.0) {
            return;
        }
        // all wheels stick
        let stop = mat_vec(&self.impulse_response_inv, rim).map(|x| -x);
        if stop.iter().all(|l| l.abs() <= max_impulse) {
            *vel = [0.0; 3];
            return;
        }
        // all wheels slide in their current direction
        let mut impulse = rim.map(|w| -max_impulse * sign(w));
        let slid = self.apply_impulse(vel, &impulse);
        let rim_after = mat_vec(&self.kin, slid);
        if (0..3).all(|i| rim[i] != 0.0 && sign(rim_after[i]) == sign(rim[i])) {
            *vel = slid;
            return;
        }
        // mixed stick/slip: projected Gauss-Seidel on the bounded impulses
        impulse = [0.0; 3];
        let mut current = *vel;
        for _ in 0..50 {
            let mut change = 0.0f64;
            for i in 0..3 {
                let w = dot(&self.kin[i], &current);
                let proposed = (impulse[i] - w / self.impulse_response[i][i]).clamp(-max_impulse, max_impulse);
                let delta = proposed - impulse[i];
                if delta != 0.0 {
                    impulse[i] = proposed;
                    for k in 0..3 {
                        current[k] += self.inv_mass[k] * self.kin_t[k][i] * delta;
                    }
                    change = change.max(delta.abs());
                }
            }
            if change <= 1e-15 * max_impulse {
                break;
            }
        }
        *vel = current;
    }

    fn apply_impulse(&self, vel: &[f64; 3], impulse: &[f64; 3]) -> [f64; 3] {
        let gen = mat_vec(&self.kin_t, *impulse);
        [0, 1, 2].map(|k| vel[k] + gen[k] * self.inv_mass[k])
    }

    /// One physics step; runs the controller first when the step index falls
    /// on a control tick.
    pub fn step(&self, state: &mut RobotState, body_ref: BodyVelocity) -> Result<()> {
        if state.step.is_multiple_of(self.substeps) {
            self.control_update(state, body_ref);
        }
        self.physics_step(state)
    }

    /// One physics step with the controllers bypassed.
    pub fn step_open_loop(&self, state: &mut RobotState, voltages: [f64; 3]) -> Result<()> {
        let lim = self.cfg.motor.u_max_volts;
        for (m, u) in state.motors.iter_mut().zip(voltages) {
            m.voltage_applied = u.clamp(-lim, lim);
        }
        self.physics_step(state)
    }

    pub fn simulate(&self, profile: &ExcitationProfile) -> Result<ResponseLog> {
        Ok(self.simulate_traced(profile)?.log)
    }

    /// Runs the profile from rest, sampling at each control tick.
    pub fn simulate_traced(&self, profile: &ExcitationProfile) -> Result<SimOutput> {
        let period = self.cfg.gains.period_s;
        let duration = self.cfg.duration_s.unwrap_or(profile.total_duration_s());
        let ticks = (duration / period + 1e-9).floor() as u64;
        let mut state = RobotState::at_rest(&self.cfg);
        let mut rows = Vec::with_capacity(ticks as usize + 1);
        let mut wheel_refs = Vec::with_capacity(ticks as usize + 1);
        for k in 0..=ticks {
            let t = k as f64 * period;
            // sample just after the tick so a boundary belongs to the later segment
            let body_ref = profile.reference_at_or_last(t + 1e-6 * period);
            self.control_update(&mut state, body_ref);
            rows.push(LogRow {
                t,
                reference: body_ref,
                response: state.body_vel,
                wheel_speeds: state.wheel_speeds(),
                voltages: state.voltages(),
            });
            wheel_refs.push(state.wheel_refs());
            if k < ticks {
                for _ in 0..self.substeps {
                    self.physics_step(&mut state)?;
                }
            }
        }
        Ok(SimOutput {
            log: ResponseLog::new(period, rows)?,
            wheel_refs,
            final_state: state,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: ResponseLog,
    /// Rate-limited wheel-shaft references at every control tick.
    pub wheel_refs: Vec<[f64; 3]>,
    pub final_state: RobotState,
}

/// One physics step of the closed-loop robot. Builds the step matrices on
/// every call; use [`Robot`] for repeated stepping.
pub fn robot_step(cfg: &SimConfig, state: &RobotState, body_ref: BodyVelocity) -> Result<RobotState> {
    let robot = Robot::new(cfg.clone())?;
    let mut next = state.clone();
    robot.step(&mut next, body_ref)?;
    Ok(next)
}

pub fn simulate(cfg: &SimConfig, profile: &ExcitationProfile) -> Result<ResponseLog> {
    Robot::new(cfg.clone())?.simulate(profile)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
