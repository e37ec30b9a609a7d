//! Piecewise-constant excitation profiles and the sampled response log.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::BodyVelocity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration_s: f64,
    pub reference: BodyVelocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationProfile {
    segments: Vec<Segment>,
    total_duration_s: f64,
}

impl ExcitationProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for s in &segments {
            if !(s.duration_s > 0.0 && s.duration_s.is_finite()) {
                return Err(Error::invalid(format!(
                    "segment duration must be > 0, got {}",
                    s.duration_s
                )));
            }
            if !s.reference.is_finite() {
                return Err(Error::invalid("segment reference must be finite"));
            }
        }
        let total_duration_s = segments.iter().map(|s| s.duration_s).sum();
        Ok(Self {
            segments,
            total_duration_s,
        })
    }

    /// Rotation-only profile from `(duration, ω)` steps.
    pub fn pure_rotation(steps: &[(f64, f64)]) -> Result<Self> {
        Self::from_steps(steps, |w| BodyVelocity::new(0.0, 0.0, w))
    }

    /// Forward-axis-only profile from `(duration, v)` steps.
    pub fn pure_linear(steps: &[(f64, f64)]) -> Result<Self> {
        Self::from_steps(steps, |v| BodyVelocity::new(v, 0.0, 0.0))
    }

    fn from_steps(steps: &[(f64, f64)], f: impl Fn(f64) -> BodyVelocity) -> Result<Self> {
        Self::new(
            steps
                .iter()
                .map(|&(duration_s, x)| Segment {
                    duration_s,
                    reference: f(x),
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration_s(&self) -> f64 {
        self.total_duration_s
    }

    pub fn concat(&self, other: &ExcitationProfile) -> ExcitationProfile {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        // both halves already validated
        ExcitationProfile::new(segments).expect("valid segments")
    }

    /// Reference active at `t`; a boundary belongs to the later segment.
    pub fn reference_at(&self, t: f64) -> Result<BodyVelocity> {
        if !(t >= 0.0 && t < self.total_duration_s) {
            return Err(Error::OutOfRange {
                t,
                duration: self.total_duration_s,
            });
        }
        let mut end = 0.0;
        for s in &self.segments {
            end += s.duration_s;
            if t < end {
                return Ok(s.reference);
            }
        }
        Ok(self.segments.last().expect("non-empty").reference)
    }

    /// Like [`reference_at`](Self::reference_at) but holds the last
    /// segment for `t >= total_duration`.
    pub fn reference_at_or_last(&self, t: f64) -> BodyVelocity {
        self.reference_at(t.max(0.0))
            .unwrap_or_else(|_| self.segments.last().expect("non-empty").reference)
    }

    /// Rebuilds the commanded profile from the reference columns of a log,
    /// one sample period per row, merging runs of equal references.
    pub fn from_log(log: &ResponseLog) -> Result<Self> {
        let rows = log.rows();
        if rows.len() < 2 {
            return Err(Error::invalid("log needs at least 2 samples"));
        }
        let mut segments: Vec<Segment> = Vec::new();
        for r in &rows[..rows.len() - 1] {
            match segments.last_mut() {
                Some(s) if s.reference == r.reference => s.duration_s += log.sample_period_s(),
                _ => segments.push(Segment {
                    duration_s: log.sample_period_s(),
                    reference: r.reference,
                }),
            }
        }
        Self::new(segments)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub reference: BodyVelocity,
    pub response: BodyVelocity,
    /// Wheel-shaft speeds (rad/s).
    pub wheel_speeds: [f64; 3],
    pub voltages: [f64; 3],
}

impl LogRow {
    pub const COLUMNS: [&'static str; 13] = [
        "t", "v_ref", "vn_ref", "w_ref", "v", "vn", "w", "w1", "w2", "w3", "u1", "u2", "u3",
    ];

    pub fn to_array(&self) -> [f64; 13] {
        let (r, m, w, u) = (self.reference, self.response, self.wheel_speeds, self.voltages);
        [
            self.t, r.v, r.vn, r.omega, m.v, m.vn, m.omega, w[0], w[1], w[2], u[0], u[1], u[2],
        ]
    }

    pub fn from_array(a: [f64; 13]) -> Self {
        Self {
            t: a[0],
            reference: BodyVelocity::new(a[1], a[2], a[3]),
            response: BodyVelocity::new(a[4], a[5], a[6]),
            wheel_speeds: [a[7], a[8], a[9]],
            voltages: [a[10], a[11], a[12]],
        }
    }
}

/// Which logged response is compared against a measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSignal {
    #[default]
    Omega,
    V,
    Vn,
    /// v, vn and ω concatenated.
    Body,
    /// The three wheel-shaft speeds concatenated.
    Wheels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseLog {
    sample_period_s: f64,
    rows: Vec<LogRow>,
}

impl ResponseLog {
    pub fn new(sample_period_s: f64, rows: Vec<LogRow>) -> Result<Self> {
        if !(sample_period_s > 0.0) {
            return Err(Error::invalid("sample period must be > 0"));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.to_array().iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("non-finite value in log row {i}")));
            }
        }
        if rows.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::invalid("log times must be strictly increasing"));
        }
        Ok(Self { sample_period_s, rows })
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn series(&self, signal: ResponseSignal) -> Vec<f64> {
        let r = &self.rows;
        match signal {
            ResponseSignal::Omega => r.iter().map(|x| x.response.omega).collect(),
            ResponseSignal::V => r.iter().map(|x| x.response.v).collect(),
            ResponseSignal::Vn => r.iter().map(|x| x.response.vn).collect(),
            ResponseSignal::Body => r
                .iter()
                .map(|x| x.response.v)
                .chain(r.iter().map(|x| x.response.vn))
                .chain(r.iter().map(|x| x.response.omega))
                .collect(),
            ResponseSignal::Wheels => (0..3).flat_map(|k| r.iter().map(move |x| x.wheel_speeds[k])).collect(),
        }
    }
}
