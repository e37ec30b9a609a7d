//! Velocity transform between the robot body frame and the three wheels.
//!
//! Wheel `i` sits at placement angle `θ_i` measured from the forward (`v`)
//! axis and drives tangentially, so its rim speed is
//! `v_i = -sin(θ_i)·v + cos(θ_i)·vn + d·ω`. The default placement
//! `[-π/3, π/3, π]` gives the 120° layout
//!
//! ```text
//! | v1 |   |  sin(π/3)  cos(π/3)  d |   | v  |
//! | v2 | = | -sin(π/3)  cos(π/3)  d | · | vn |
//! | v3 |   |  0         -1        d |   | ω  |
//! ```

use std::f64::consts::{FRAC_PI_3, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) type Mat3 = [[f64; 3]; 3];

const SINGULAR_DET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotGeometry {
    /// Distance from the geometric centre to each wheel (m).
    pub wheel_distance_m: f64,
    pub wheel_radius_m: f64,
    /// Wheel placement angles relative to the forward axis (rad).
    pub wheel_angles_rad: [f64; 3],
    /// Motor-to-wheel reduction. Motor constants are already referred to the
    /// wheel shaft, so this only feeds the encoder model.
    pub gear_ratio: f64,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self {
            wheel_distance_m: 0.195,
            wheel_radius_m: 0.0513,
            wheel_angles_rad: [-FRAC_PI_3, FRAC_PI_3, PI],
            gear_ratio: 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyVelocity {
    pub v: f64,
    pub vn: f64,
    pub omega: f64,
}

impl BodyVelocity {
    pub const ZERO: BodyVelocity = BodyVelocity {
        v: 0.0,
        vn: 0.0,
        omega: 0.0,
    };

    pub fn new(v: f64, vn: f64, omega: f64) -> Self {
        Self { v, vn, omega }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.v, self.vn, self.omega]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.vn.is_finite() && self.omega.is_finite()
    }
}

/// Linear rim speeds of the three wheels (m/s).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WheelSpeeds(pub [f64; 3]);

impl WheelSpeeds {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in (−π, π].
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.wheel_distance_m > 0.0 && self.wheel_distance_m.is_finite()) {
            return Err(Error::invalid("wheel_distance_m must be > 0"));
        }
        if !(self.wheel_radius_m > 0.0 && self.wheel_radius_m.is_finite()) {
            return Err(Error::invalid("wheel_radius_m must be > 0"));
        }
        if !(self.gear_ratio >= 1.0) {
            return Err(Error::invalid("gear_ratio must be >= 1"));
        }
        if self.wheel_angles_rad.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("wheel angles must be finite"));
        }
        let det = det3(&self.matrix());
        if det.abs() <= SINGULAR_DET {
            return Err(Error::SingularMatrix { det });
        }
        Ok(())
    }

    /// The body-to-wheel matrix; rows are wheels, columns (v, vn, ω).
    pub fn matrix(&self) -> Mat3 {
        let d = self.wheel_distance_m;
        self.wheel_angles_rad.map(|a| [-a.sin(), a.cos(), d])
    }

    pub fn inverse_matrix(&self) -> Result<Mat3> {
        invert3(&self.matrix())
    }
}

pub fn body_to_wheels(geom: &RobotGeometry, body: BodyVelocity) -> WheelSpeeds {
    WheelSpeeds(mat_vec(&geom.matrix(), body.as_array()))
}

pub fn wheels_to_body(geom: &RobotGeometry, wheels: WheelSpeeds) -> Result<BodyVelocity> {
    let inv = geom.inverse_matrix()?;
    Ok(BodyVelocity::from_array(mat_vec(&inv, wheels.0)))
}

/// Rim speed (m/s) to wheel-shaft angular speed (rad/s).
pub fn wheel_rim_to_shaft(geom: &RobotGeometry, rim_speed: f64) -> f64 {
    rim_speed / geom.wheel_radius_m
}

pub(crate) fn mat_vec(m: &Mat3, x: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|r| m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2])
}

pub(crate) fn transpose(m: &Mat3) -> Mat3 {
    [0, 1, 2].map(|r| [m[0][r], m[1][r], m[2][r]])
}

pub(crate) fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c]))
}

pub(crate) fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Closed-form inverse via the adjugate.
pub(crate) fn invert3(m: &Mat3) -> Result<Mat3> {
    let det = det3(m);
    if det.abs() <= SINGULAR_DET || !det.is_finite() {
        return Err(Error::SingularMatrix { det });
    }
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    Ok(adj.map(|row| row.map(|x| x / det)))
}
