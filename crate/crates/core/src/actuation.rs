//! DC motor + gearbox + wheel model, the wheel-speed PID and the reference
//! slope limiter.
//!
//! All speeds here are wheel-shaft angular speeds (rad/s) and all motor
//! constants are referred to that shaft.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorParams {
    pub r_internal_ohm: f64,
    /// Torque constant, equal to the back-EMF constant in SI units.
    pub k_torque: f64,
    pub b_viscous: f64,
    pub f_coulomb: f64,
    pub u_max_volts: f64,
    /// Lumped motor + gearbox + wheel inertia at the output shaft (kg·m²).
    pub j_reflected: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            r_internal_ohm: 0.317,
            k_torque: 0.0302,
            b_viscous: 0.0324,
            f_coulomb: 0.036735,
            u_max_volts: 24.0,
            j_reflected: 1e-3,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.r_internal_ohm > 0.0, "r_internal_ohm must be > 0"),
            (self.k_torque > 0.0, "k_torque must be > 0"),
            (self.b_viscous >= 0.0, "b_viscous must be >= 0"),
            (self.f_coulomb >= 0.0, "f_coulomb must be >= 0"),
            (self.u_max_volts > 0.0, "u_max_volts must be > 0"),
            (self.j_reflected > 0.0, "j_reflected must be > 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::invalid(msg));
            }
        }
        let all = [
            self.r_internal_ohm,
            self.k_torque,
            self.b_viscous,
            self.f_coulomb,
            self.u_max_volts,
            self.j_reflected,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("motor parameters must be finite"));
        }
        Ok(())
    }

    /// Viscous-equivalent slope and dead-zone intercept of the steady-state
    /// voltage line `u = slope·ω + intercept`.
    pub fn steady_state_line(&self) -> (f64, f64) {
        let slope = self.r_internal_ohm * self.b_viscous / self.k_torque + self.k_torque;
        let intercept = self.r_internal_ohm * self.f_coulomb / self.k_torque;
        (slope, intercept)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MotorState {
    pub omega_shaft: f64,
    pub current: f64,
    pub voltage_applied: f64,
}

/// Armature current from the steady-state electrical model.
pub fn motor_current(params: &MotorParams, u: f64, omega: f64) -> Result<f64> {
    if !(u.abs() <= params.u_max_volts) {
        return Err(Error::VoltageOutOfRange {
            voltage: u,
            limit: params.u_max_volts,
        });
    }
    Ok(armature_current(params, u, omega))
}

#[inline]
pub(crate) fn armature_current(params: &MotorParams, u: f64, omega: f64) -> f64 {
    (u - params.k_torque * omega) / params.r_internal_ohm
}

/// Net shaft torque. At rest the Coulomb term acts as static friction:
/// drive torques up to `f_coulomb` leave the shaft stuck.
pub fn motor_torque(params: &MotorParams, current: f64, omega: f64) -> f64 {
    let drive = params.k_torque * current;
    if omega == 0.0 {
        if drive.abs() <= params.f_coulomb {
            0.0
        } else {
            drive - drive.signum() * params.f_coulomb
        }
    } else {
        drive - params.b_viscous * omega - params.f_coulomb * omega.signum()
    }
}

/// Voltage that holds the unloaded shaft at `omega`, extended to negative
/// speeds by odd symmetry. At `omega == 0` this is the dead-zone edge.
pub fn steady_state_voltage(params: &MotorParams, omega: f64) -> f64 {
    let (slope, intercept) = params.steady_state_line();
    let sign = if omega < 0.0 { -1.0 } else { 1.0 };
    slope * omega + sign * intercept
}

/// One explicit Euler step of the isolated motor. The supply voltage is
/// clamped to the motor limit and stored in the returned state.
///
/// Coulomb friction is applied as a bounded velocity impulse after the smooth
/// torques, so the shaft stops exactly at zero instead of chattering.
pub fn motor_step(params: &MotorParams, state: &MotorState, u: f64, dt: f64) -> MotorState {
    let u = u.clamp(-params.u_max_volts, params.u_max_volts);
    let omega = state.omega_shaft;
    let i = armature_current(params, u, omega);
    let smooth = params.k_torque * i - params.b_viscous * omega;
    let free = omega + dt * smooth / params.j_reflected;
    let omega_next = apply_coulomb(free, dt * params.f_coulomb / params.j_reflected);
    MotorState {
        omega_shaft: omega_next,
        current: armature_current(params, u, omega_next),
        voltage_applied: u,
    }
}

#[inline]
fn apply_coulomb(free: f64, max_change: f64) -> f64 {
    if free.abs() <= max_change {
        0.0
    } else {
        free - free.signum() * max_change
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub period_s: f64,
    /// Output saturation (V).
    pub u_limit: f64,
    /// Clamp on the accumulated integral.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.06472,
            ki: 0.043796,
            kd: 0.0,
            period_s: 0.04,
            u_limit: 24.0,
            integral_limit: 1000.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.ki >= 0.0 && self.kd >= 0.0) {
            return Err(Error::invalid("PID gains must be >= 0"));
        }
        if !(self.period_s > 0.0) {
            return Err(Error::invalid("controller period must be > 0"));
        }
        if !(self.u_limit > 0.0) {
            return Err(Error::invalid("u_limit must be > 0"));
        }
        if !(self.integral_limit >= 0.0) {
            return Err(Error::invalid("integral_limit must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral_accum: f64,
    pub prev_error: f64,
}

/// One controller sample. The integral is advanced before the output is
/// formed and is held while the output saturates in the direction of the
/// error (conditional integration).
pub fn pid_step(gains: &PidGains, state: &PidState, reference: f64, measured: f64) -> (f64, PidState) {
    let e = reference - measured;
    let derivative = (e - state.prev_error) / gains.period_s;
    let lim = gains.integral_limit;
    let advanced = (state.integral_accum + e * gains.period_s).clamp(-lim, lim);

    let output = |integral: f64| gains.kp * e + gains.ki * integral + gains.kd * derivative;
    let raw = output(advanced);
    let integral = if raw.abs() > gains.u_limit && raw.signum() == e.signum() {
        state.integral_accum
    } else {
        advanced
    };
    let u = output(integral).clamp(-gains.u_limit, gains.u_limit);
    (
        u,
        PidState {
            integral_accum: integral,
            prev_error: e,
        },
    )
}

/// Rate limiter on a speed reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelLimiter {
    pub max_accel_rad_s2: f64,
    pub current_ref: f64,
}

impl AccelLimiter {
    pub fn new(max_accel_rad_s2: f64) -> Result<Self> {
        if !(max_accel_rad_s2 > 0.0) {
            return Err(Error::invalid("max acceleration must be > 0"));
        }
        Ok(Self {
            max_accel_rad_s2,
            current_ref: 0.0,
        })
    }

    /// Moves the emitted reference toward `target` by at most
    /// `max_accel_rad_s2·dt` and returns it.
    pub fn limit_reference(&mut self, target: f64, dt: f64) -> f64 {
        let max_step = self.max_accel_rad_s2 * dt;
        let delta = target - self.current_ref;
        self.current_ref = if delta.abs() <= max_step {
            target
        } else {
            self.current_ref + max_step * delta.signum()
        };
        self.current_ref
    }
}

/// Incremental encoder measurement over one control period, with ×4
/// quadrature decoding on the motor side of the gearbox.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderModel {
    pub enabled: bool,
    pub ppr: u32,
}

impl Default for EncoderModel {
    fn default() -> Self {
        Self {
            enabled: false,
            ppr: 256,
        }
    }
}

impl EncoderModel {
    pub fn counts_per_wheel_rev(&self, gear_ratio: f64) -> f64 {
        4.0 * self.ppr as f64 * gear_ratio
    }

    pub fn measure(&self, omega: f64, period_s: f64, gear_ratio: f64) -> f64 {
        if !self.enabled {
            return omega;
        }
        let rad_per_count = std::f64::consts::TAU / self.counts_per_wheel_rev(gear_ratio);
        let counts = (omega * period_s / rad_per_count).round();
        counts * rad_per_count / period_s
    }
}
