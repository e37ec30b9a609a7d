//! Viscous and Coulomb friction from steady-state speed/voltage samples.
//!
//! An unloaded motor at constant speed satisfies
//! `u = (R·B/K + K)·ω + R·F/K`, so a straight-line fit of voltage against
//! speed gives both friction terms once `R` and `K` are known.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::actuation::{motor_step, steady_state_voltage, MotorParams, MotorState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SteadySample {
    pub omega_shaft: f64,
    pub voltage: f64,
    pub wheel_id: u32,
    pub essay_id: String,
}

pub const MAX_SAMPLE_VOLTAGE: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionFit {
    /// V per rad/s.
    pub slope: f64,
    /// V.
    pub intercept: f64,
    pub b_viscous: f64,
    pub f_coulomb: f64,
    /// Unweighted RMS voltage residual of the fitted line.
    pub residual_rms: f64,
    /// Set when the slope is at or below `K`, which implies negative
    /// viscous friction.
    pub nonphysical: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeighting {
    /// Plain least squares.
    #[default]
    Ordinary,
    /// Weights of `1/u²`; the minimum-variance choice when the voltage error
    /// is proportional to the voltage.
    Relative,
}

/// Pooled straight-line fit over all samples, then inversion of the line
/// coefficients into `(B_v, F_c)`.
///
/// Samples with negative speed are folded onto the positive branch using the
/// odd symmetry of the friction model.
pub fn fit_friction(
    samples: &[SteadySample],
    r_internal_ohm: f64,
    k_torque: f64,
    weighting: FitWeighting,
) -> Result<FrictionFit> {
    if !(r_internal_ohm > 0.0 && k_torque > 0.0) {
        return Err(Error::invalid("motor constants must be > 0"));
    }
    if samples.len() < 2 {
        return Err(Error::DegenerateSamples(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut points = Vec::with_capacity(samples.len());
    for s in samples {
        if !(s.omega_shaft.is_finite() && s.voltage.is_finite()) {
            return Err(Error::invalid("non-finite steady sample"));
        }
        if s.voltage.abs() > MAX_SAMPLE_VOLTAGE {
            return Err(Error::invalid(format!(
                "sample voltage {} V exceeds {} V",
                s.voltage, MAX_SAMPLE_VOLTAGE
            )));
        }
        let sign = if s.omega_shaft < 0.0 { -1.0 } else { 1.0 };
        points.push((sign * s.omega_shaft, sign * s.voltage));
    }
    let first = points[0].0;
    if points.iter().all(|p| p.0 == first) {
        return Err(Error::DegenerateSamples("all samples share one speed".into()));
    }

    let weight = |u: f64| match weighting {
        FitWeighting::Ordinary => 1.0,
        FitWeighting::Relative => {
            let u = u.abs().max(1e-6);
            1.0 / (u * u)
        }
    };
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for &(x, y) in &points {
        let w = weight(y);
        sw += w;
        sx += w * x;
        sy += w * y;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in &points {
        let w = weight(y);
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateSamples("zero speed spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (points
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();

    Ok(FrictionFit {
        slope,
        intercept,
        b_viscous: (slope - k_torque) * k_torque / r_internal_ohm,
        f_coulomb: intercept * k_torque / r_internal_ohm,
        residual_rms,
        nonphysical: slope <= k_torque,
    })
}

/// Exact samples on the model line at the given shaft speeds.
pub fn model_samples(params: &MotorParams, speeds: &[f64], wheel_id: u32) -> Vec<SteadySample> {
    speeds
        .iter()
        .map(|&w| SteadySample {
            omega_shaft: w,
            voltage: steady_state_voltage(params, w),
            wheel_id,
            essay_id: "model".into(),
        })
        .collect()
}

/// Scales every sample voltage by `1 + ε`, `ε ~ N(0, rel_std²)`.
pub fn add_relative_voltage_noise<R: Rng + ?Sized>(samples: &mut [SteadySample], rel_std: f64, rng: &mut R) {
    if rel_std <= 0.0 {
        return;
    }
    let noise = Normal::new(0.0, rel_std).expect("finite std");
    for s in samples {
        s.voltage *= 1.0 + noise.sample(rng);
    }
}

/// Drives an isolated motor at a constant voltage until the speed settles
/// and returns the final speed. Returns `None` if it has not settled within
/// `max_time_s`.
pub fn steady_speed(params: &MotorParams, voltage: f64, dt: f64, max_time_s: f64) -> Option<f64> {
    let mut s = MotorState::default();
    let steps = (max_time_s / dt).ceil() as u64;
    for _ in 0..steps {
        let next = motor_step(params, &s, voltage, dt);
        let settled = (next.omega_shaft - s.omega_shaft).abs() <= 1e-12 * (1.0 + next.omega_shaft.abs());
        s = next;
        if settled {
            return Some(s.omega_shaft);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const R: f64 = 0.317;
    const K: f64 = 0.0302;

    fn sample(w: f64, u: f64) -> SteadySample {
        SteadySample {
            omega_shaft: w,
            voltage: u,
            wheel_id: 0,
            essay_id: "t".into(),
        }
    }

    #[test]
    fn noiseless_recovery() {
        let p = MotorParams::default();
        let speeds: Vec<f64> = (1..=30).map(|k| k as f64 * 0.7).collect();
        let fit = fit_friction(&model_samples(&p, &speeds, 0), R, K, FitWeighting::Ordinary).unwrap();
        assert!((fit.b_viscous - 0.0324).abs() < 1e-9);
        assert!((fit.f_coulomb - 0.036735).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-12);
        assert!(!fit.nonphysical);
    }

    #[test]
    fn two_point_inversion() {
        // points recomputed from the line: intercept R·F/K, value at ω=10
        let s = [sample(0.0, 0.3855958609271523), sample(10.0, 4.088523013245033)];
        let fit = fit_friction(&s, R, K, FitWeighting::Ordinary).unwrap();
        assert!((fit.slope - 0.3702927152317881).abs() < 1e-12);
        assert!((fit.intercept - 0.3855958609271523).abs() < 1e-12);
        assert!((fit.b_viscous - 0.0324).abs() < 1e-12);
        assert!((fit.f_coulomb - 0.036735).abs() < 1e-12);
    }

    #[test]
    fn frictionless_line() {
        let p = MotorParams {
            b_viscous: 0.0,
            f_coulomb: 0.0,
            ..Default::default()
        };
        let fit = fit_friction(&model_samples(&p, &[1.0, 2.0, 5.0], 0), R, K, FitWeighting::Ordinary).unwrap();
        assert!((fit.slope - K).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(fit.b_viscous.abs() < 1e-12 && fit.f_coulomb.abs() < 1e-12);
    }

    #[test]
    fn negative_speeds_fold() {
        let p = MotorParams::default();
        let fit = fit_friction(
            &model_samples(&p, &[-8.0, -3.0, 2.0, 6.0], 1),
            R,
            K,
            FitWeighting::Ordinary,
        )
        .unwrap();
        assert!((fit.f_coulomb - 0.036735).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let s = [sample(3.0, 1.0), sample(3.0, 1.5)];
        assert!(matches!(
            fit_friction(&s, R, K, FitWeighting::Ordinary),
            Err(Error::DegenerateSamples(_))
        ));
        assert!(matches!(
            fit_friction(&s[..1], R, K, FitWeighting::Ordinary),
            Err(Error::DegenerateSamples(_))
        ));
        assert!(fit_friction(&[sample(1.0, 30.0), sample(2.0, 1.0)], R, K, FitWeighting::Ordinary).is_err());
    }

    #[test]
    fn flags_negative_viscous() {
        let s = [sample(1.0, 0.02), sample(2.0, 0.04)];
        assert!(fit_friction(&s, R, K, FitWeighting::Ordinary).unwrap().nonphysical);
    }

    #[test]
    fn relative_weighting_handles_noise() {
        let p = MotorParams::default();
        let speeds: Vec<f64> = (0..60).map(|k| 0.5 + 4.5 * k as f64 / 59.0).collect();
        let mut s = model_samples(&p, &speeds, 0);
        add_relative_voltage_noise(&mut s, 0.01, &mut ChaCha8Rng::seed_from_u64(7));
        let fit = fit_friction(&s, R, K, FitWeighting::Relative).unwrap();
        assert!((fit.f_coulomb / 0.036735 - 1.0).abs() < 0.02);
        assert!((fit.b_viscous / 0.0324 - 1.0).abs() < 0.02);
    }

    #[test]
    fn simulated_essay_matches_line() {
        let p = MotorParams::default();
        let w = steady_speed(&p, 6.0, 1e-3, 20.0).unwrap();
        assert!((steady_state_voltage(&p, w) - 6.0).abs() < 1e-9);
        assert_eq!(steady_speed(&p, 0.2, 1e-3, 1.0), Some(0.0));
    }
}
