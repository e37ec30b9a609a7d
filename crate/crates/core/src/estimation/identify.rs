//! Simulate-then-fit identification against a logged response.
//!
//! Calibration runs in two fixed stages on the same rotation log: first the
//! wheel controller gains with all physical parameters held, then the yaw
//! inertia with the fitted gains held.

use serde::{Deserialize, Serialize};

use super::optimize::{minimize, FitResult, OptimizerConfig, ParamSpec};
use crate::dynamics::{Robot, SimConfig};
use crate::error::{Error, Result};
use crate::signals::{ExcitationProfile, ResponseLog, ResponseSignal};

/// Mean squared error between paired samples.
pub fn mse_cost(simulated: &[f64], measured: &[f64]) -> Result<f64> {
    if simulated.len() != measured.len() {
        return Err(Error::LengthMismatch {
            simulated: simulated.len(),
            measured: measured.len(),
        });
    }
    if simulated.is_empty() {
        return Err(Error::invalid("cost needs at least one sample"));
    }
    let sum: f64 = simulated.iter().zip(measured).map(|(s, m)| (s - m) * (s - m)).sum();
    Ok(sum / simulated.len() as f64)
}

/// A simulator parameter the identification can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tunable {
    Kp,
    Ki,
    Kd,
    Jz,
}

impl Tunable {
    pub fn name(self) -> &'static str {
        match self {
            Tunable::Kp => "kp",
            Tunable::Ki => "ki",
            Tunable::Kd => "kd",
            Tunable::Jz => "j_z",
        }
    }

    pub fn get(self, cfg: &SimConfig) -> f64 {
        match self {
            Tunable::Kp => cfg.gains.kp,
            Tunable::Ki => cfg.gains.ki,
            Tunable::Kd => cfg.gains.kd,
            Tunable::Jz => cfg.body.j_z,
        }
    }

    pub fn set(self, cfg: &mut SimConfig, value: f64) {
        match self {
            Tunable::Kp => cfg.gains.kp = value,
            Tunable::Ki => cfg.gains.ki = value,
            Tunable::Kd => cfg.gains.kd = value,
            Tunable::Jz => cfg.body.j_z = value,
        }
    }

    /// Search box and the floor of the step scale.
    pub fn bounds(self) -> (f64, f64, f64) {
        match self {
            Tunable::Kp | Tunable::Ki | Tunable::Kd => (0.0, 10.0, 0.01),
            Tunable::Jz => (0.1, 5.0, 0.1),
        }
    }

    pub fn spec(self, start: f64) -> ParamSpec {
        let (lo, hi, floor) = self.bounds();
        ParamSpec::new(self.name(), lo, hi, start.abs().max(floor))
    }
}

/// What the fit compares, and against what.
#[derive(Debug, Clone)]
pub struct ResponseMatch<'a> {
    measured: &'a ResponseLog,
    profile: ExcitationProfile,
    target: Vec<f64>,
    signal: ResponseSignal,
    base: SimConfig,
}

impl<'a> ResponseMatch<'a> {
    pub fn new(measured: &'a ResponseLog, base: &SimConfig, signal: ResponseSignal) -> Result<Self> {
        if measured.len() < 2 {
            return Err(Error::invalid("measured log needs at least 2 samples"));
        }
        let period = base.control_dt_s();
        if (measured.sample_period_s() - period).abs() > 1e-9 * period {
            return Err(Error::invalid(format!(
                "log sample period {} s differs from control period {} s",
                measured.sample_period_s(),
                period
            )));
        }
        let profile = ExcitationProfile::from_log(measured)?;
        let mut base = base.clone();
        base.duration_s = Some((measured.len() - 1) as f64 * period);
        base.validate()?;
        Ok(Self {
            measured,
            profile,
            target: measured.series(signal),
            signal,
            base,
        })
    }

    pub fn measured(&self) -> &ResponseLog {
        self.measured
    }

    pub fn profile(&self) -> &ExcitationProfile {
        &self.profile
    }

    pub fn simulate(&self, cfg: &SimConfig) -> Result<ResponseLog> {
        let mut cfg = cfg.clone();
        cfg.duration_s = self.base.duration_s;
        Robot::new(cfg)?.simulate(&self.profile)
    }

    pub fn cost_of(&self, cfg: &SimConfig) -> Result<f64> {
        let log = self.simulate(cfg)?;
        mse_cost(&log.series(self.signal), &self.target)
    }

    fn with(&self, tunables: &[Tunable], values: &[f64]) -> SimConfig {
        let mut cfg = self.base.clone();
        for (t, v) in tunables.iter().zip(values) {
            t.set(&mut cfg, *v);
        }
        cfg
    }

    /// Minimizes the response error over `tunables`, starting from their
    /// values in the base config.
    pub fn fit(&self, tunables: &[Tunable], opt: &OptimizerConfig) -> Result<FitResult> {
        let p0: Vec<f64> = tunables.iter().map(|t| t.get(&self.base)).collect();
        let space: Vec<ParamSpec> = tunables.iter().zip(&p0).map(|(t, &x)| t.spec(x)).collect();
        let objective = |p: &[f64]| self.cost_of(&self.with(tunables, p));
        minimize(&objective, &p0, &space, opt)
    }
}

/// First stage: PID gains (kp, ki, kd) with the physical model held.
pub fn stage1_fit_gains(
    measured: &ResponseLog,
    cfg: &SimConfig,
    opt: &OptimizerConfig,
    signal: ResponseSignal,
) -> Result<FitResult> {
    ResponseMatch::new(measured, cfg, signal)?.fit(&[Tunable::Kp, Tunable::Ki, Tunable::Kd], opt)
}

/// Second stage: yaw inertia with the stage-one gains already in `cfg`.
pub fn stage2_fit_inertia(
    measured: &ResponseLog,
    cfg: &SimConfig,
    opt: &OptimizerConfig,
    signal: ResponseSignal,
) -> Result<FitResult> {
    ResponseMatch::new(measured, cfg, signal)?.fit(&[Tunable::Jz], opt)
}

/// Writes fitted values back into a config.
pub fn apply_fit(cfg: &mut SimConfig, fit: &FitResult) {
    for (name, value) in fit.names.iter().zip(&fit.params) {
        for t in [Tunable::Kp, Tunable::Ki, Tunable::Kd, Tunable::Jz] {
            if t.name() == name {
                t.set(cfg, *value);
            }
        }
    }
}
