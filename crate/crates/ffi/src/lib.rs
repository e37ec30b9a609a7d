//! C ABI over `omnisim`.
//!
//! Configs and logs cross the boundary as opaque handles that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`OmniStatus`]; on failure a message for the calling thread is available
//! from [`omni_last_error`]. Panics are caught and reported as
//! `OMNI_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use omnisim::estimation::{self, FitWeighting, SteadySample, Tunable};
use omnisim::kinematics::{body_to_wheels, wheels_to_body};
use omnisim::{actuation, io, BodyVelocity, ConfigDocument, Error, ResponseLog, Robot, WheelSpeeds};

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmniStatus {
    OMNI_OK = 0,
    OMNI_ERR_NULL = 1,
    OMNI_ERR_INVALID = 2,
    OMNI_ERR_DIVERGED = 3,
    OMNI_ERR_DEGENERATE = 4,
    OMNI_ERR_NOT_CONVERGED = 5,
    OMNI_ERR_IO = 6,
    OMNI_ERR_SINGULAR = 7,
    OMNI_ERR_PANIC = 8,
}

use OmniStatus::*;

/// Simulator configuration handle.
pub struct OmniConfig(ConfigDocument);

/// Response log handle.
pub struct OmniLog(ResponseLog);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OmniFrictionFit {
    pub slope: f64,
    pub intercept: f64,
    pub b_viscous: f64,
    pub f_coulomb: f64,
    pub residual_rms: f64,
    pub nonphysical: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OmniFitSummary {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: u32,
    pub evaluations: u32,
    pub converged: bool,
}

/// Values per log row, in CSV column order.
pub const OMNI_LOG_COLUMNS: usize = 13;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> OmniStatus {
    match e {
        Error::NonFiniteState { .. } | Error::NonFiniteCost { .. } => OMNI_ERR_DIVERGED,
        Error::DegenerateSamples(_) => OMNI_ERR_DEGENERATE,
        Error::SingularMatrix { .. } => OMNI_ERR_SINGULAR,
        Error::Io { .. } => OMNI_ERR_IO,
        _ => OMNI_ERR_INVALID,
    }
}

fn guard(f: impl FnOnce() -> Result<OmniStatus, (OmniStatus, String)>) -> OmniStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside omnisim");
            OMNI_ERR_PANIC
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, (OmniStatus, String)>;
}

impl<T> OrStatus<T> for omnisim::Result<T> {
    fn or_status(self) -> Result<T, (OmniStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (OmniStatus, String) {
    (OMNI_ERR_NULL, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (OmniStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (OMNI_ERR_INVALID, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (OmniStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (OmniStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (OmniStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message describing the last failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn omni_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn omni_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a config from a shipped preset (`"fitted"`, `"datasheet"`, ...).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn omni_config_from_preset(name: *const c_char, out: *mut *mut OmniConfig) -> OmniStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let doc = ConfigDocument::preset(str_arg(name, "name")?).or_status()?;
        *out = boxed(OmniConfig(doc));
        Ok(OMNI_OK)
    })
}

/// Parses a TOML config document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn omni_config_from_toml(text: *const c_char, out: *mut *mut OmniConfig) -> OmniStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let doc = ConfigDocument::from_toml_str(str_arg(text, "text")?, &[]).or_status()?;
        *out = boxed(OmniConfig(doc));
        Ok(OMNI_OK)
    })
}

/// Reads a TOML config document from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn omni_config_load(path: *const c_char, out: *mut *mut OmniConfig) -> OmniStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let doc = ConfigDocument::load(Path::new(str_arg(path, "path")?), &[]).or_status()?;
        *out = boxed(OmniConfig(doc));
        Ok(OMNI_OK)
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn omni_config_free(cfg: *mut OmniConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Applies a `dotted.key=value` override. The config is unchanged on error.
///
/// # Safety
/// `cfg` must be a live handle; `spec` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn omni_config_set(cfg: *mut OmniConfig, spec: *const c_char) -> OmniStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let spec = str_arg(spec, "spec")?;
        let mut table = toml::Table::try_from(&cfg.0).map_err(|e| (OMNI_ERR_INVALID, e.to_string()))?;
        omnisim::config::apply_override(&mut table, spec).or_status()?;
        let text = toml::to_string(&table).map_err(|e| (OMNI_ERR_INVALID, e.to_string()))?;
        cfg.0 = ConfigDocument::from_toml_str(&text, &[]).or_status()?;
        Ok(OMNI_OK)
    })
}

/// Reads a numeric value at a dotted path, e.g. `"body.j_z"`.
///
/// # Safety
/// `cfg` must be a live handle; `key` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn omni_config_get(cfg: *const OmniConfig, key: *const c_char, out: *mut f64) -> OmniStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let out = out_arg(out, "out")?;
        let value = toml::Value::try_from(&cfg.0).map_err(|e| (OMNI_ERR_INVALID, e.to_string()))?;
        let mut node = &value;
        for part in key.split('.') {
            node = node
                .get(part)
                .ok_or_else(|| (OMNI_ERR_INVALID, format!("no config key `{key}`")))?;
        }
        *out = match node {
            toml::Value::Float(x) => *x,
            toml::Value::Integer(i) => *i as f64,
            toml::Value::Boolean(b) => f64::from(u8::from(*b)),
            _ => return Err((OMNI_ERR_INVALID, format!("`{key}` is not a number"))),
        };
        Ok(OMNI_OK)
    })
}

/// Serializes the config as TOML. Free the result with [`omni_string_free`].
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn omni_config_to_toml(cfg: *const OmniConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => CString::new(c.0.to_toml_string()).map_or(ptr::null_mut(), CString::into_raw),
        None => {
            set_error("cfg is null");
            ptr::null_mut()
        }
    }
}

/// Body velocity `[v, vn, omega]` to wheel rim speeds.
///
/// # Safety
/// `cfg` must be a live handle; `body` and `wheels` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn omni_body_to_wheels(cfg: *const OmniConfig, body: *const f64, wheels: *mut f64) -> OmniStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let b = slice_arg(body, 3, "body")?;
        if wheels.is_null() {
            return Err(null("wheels"));
        }
        let w = body_to_wheels(&cfg.0.geometry, BodyVelocity::new(b[0], b[1], b[2]));
        ptr::copy_nonoverlapping(w.0.as_ptr(), wheels, 3);
        Ok(OMNI_OK)
    })
}

/// Wheel rim speeds to body velocity `[v, vn, omega]`.
///
/// # Safety
/// `cfg` must be a live handle; `wheels` and `body` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn omni_wheels_to_body(cfg: *const OmniConfig, wheels: *const f64, body: *mut f64) -> OmniStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let w = slice_arg(wheels, 3, "wheels")?;
        if body.is_null() {
            return Err(null("body"));
        }
        let v = wheels_to_body(&cfg.0.geometry, WheelSpeeds([w[0], w[1], w[2]])).or_status()?;
        ptr::copy_nonoverlapping(v.as_array().as_ptr(), body, 3);
        Ok(OMNI_OK)
    })
}

/// Steady-state motor voltage at a wheel-shaft speed.
///
/// # Safety
/// `cfg` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn omni_steady_state_voltage(cfg: *const OmniConfig, omega: f64, out: *mut f64) -> OmniStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        *out = actuation::steady_state_voltage(&cfg.0.motor, omega);
        Ok(OMNI_OK)
    })
}

/// Runs the config's profile from rest.
///
/// # Safety
/// `cfg` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn omni_simulate(cfg: *const OmniConfig, out: *mut *mut OmniLog) -> OmniStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        let sim = cfg.0.sim_config().or_status()?;
        let profile = cfg.0.profile().or_status()?;
        let log = Robot::new(sim).or_status()?.simulate(&profile).or_status()?;
        *out = boxed(OmniLog(log));
        Ok(OMNI_OK)
    })
}

/// # Safety
/// `log` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn omni_log_free(log: *mut OmniLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn omni_log_len(log: *const OmniLog) -> usize {
    log.as_ref().map_or(0, |l| l.0.len())
}

/// Sample period in seconds, or 0 for a null handle.
///
/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn omni_log_sample_period(log: *const OmniLog) -> f64 {
    log.as_ref().map_or(0.0, |l| l.0.sample_period_s())
}

/// Copies row `index` into `row` (`OMNI_LOG_COLUMNS` doubles).
///
/// # Safety
/// `log` must be a live handle; `row` must hold `OMNI_LOG_COLUMNS` doubles.
#[no_mangle]
pub unsafe extern "C" fn omni_log_row(log: *const OmniLog, index: usize, row: *mut f64) -> OmniStatus {
    guard(|| {
        let log = ref_arg(log, "log")?;
        if row.is_null() {
            return Err(null("row"));
        }
        let r = log
            .0
            .rows()
            .get(index)
            .ok_or_else(|| (OMNI_ERR_INVALID, format!("row {index} out of range")))?;
        ptr::copy_nonoverlapping(r.to_array().as_ptr(), row, OMNI_LOG_COLUMNS);
        Ok(OMNI_OK)
    })
}

/// # Safety
/// `log` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn omni_log_write_csv(log: *const OmniLog, path: *const c_char) -> OmniStatus {
    guard(|| {
        let log = ref_arg(log, "log")?;
        io::write_log_file(Path::new(str_arg(path, "path")?), &log.0).or_status()?;
        Ok(OMNI_OK)
    })
}

/// Reads a log CSV. `period_hint` is used only for single-row files; pass
/// 0 for none.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn omni_log_read_csv(
    path: *const c_char,
    period_hint: f64,
    out: *mut *mut OmniLog,
) -> OmniStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let hint = (period_hint > 0.0).then_some(period_hint);
        let log = io::read_log_file(Path::new(str_arg(path, "path")?), hint).or_status()?;
        *out = boxed(OmniLog(log));
        Ok(OMNI_OK)
    })
}

/// Straight-line friction fit over `n` (speed, voltage) pairs. `weighting`
/// is 0 for ordinary least squares, 1 for `1/u²` weights.
///
/// # Safety
/// `omega` and `voltage` must hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn omni_fit_friction(
    omega: *const f64,
    voltage: *const f64,
    n: usize,
    r_internal_ohm: f64,
    k_torque: f64,
    weighting: u32,
    out: *mut OmniFrictionFit,
) -> OmniStatus {
    guard(|| {
        let w = slice_arg(omega, n, "omega")?;
        let u = slice_arg(voltage, n, "voltage")?;
        let out = out_arg(out, "out")?;
        let weighting = match weighting {
            0 => FitWeighting::Ordinary,
            1 => FitWeighting::Relative,
            other => return Err((OMNI_ERR_INVALID, format!("unknown weighting {other}"))),
        };
        let samples: Vec<SteadySample> = w
            .iter()
            .zip(u)
            .map(|(&w, &u)| SteadySample {
                omega_shaft: w,
                voltage: u,
                wheel_id: 0,
                essay_id: String::new(),
            })
            .collect();
        let fit = estimation::fit_friction(&samples, r_internal_ohm, k_torque, weighting).or_status()?;
        *out = OmniFrictionFit {
            slope: fit.slope,
            intercept: fit.intercept,
            b_viscous: fit.b_viscous,
            f_coulomb: fit.f_coulomb,
            residual_rms: fit.residual_rms,
            nonphysical: fit.nonphysical,
        };
        Ok(OMNI_OK)
    })
}

unsafe fn fit_stage(
    cfg: *mut OmniConfig,
    measured: *const OmniLog,
    tunables: &[Tunable],
    out: *mut OmniFitSummary,
) -> OmniStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let measured = ref_arg(measured, "measured")?;
        let sim = cfg.0.sim_config().or_status()?;
        let problem = estimation::ResponseMatch::new(&measured.0, &sim, cfg.0.identification.signal).or_status()?;
        let fit = problem.fit(tunables, &cfg.0.optimizer).or_status()?;
        let mut fitted = sim.clone();
        estimation::apply_fit(&mut fitted, &fit);
        cfg.0.set_sim_config(&fitted);
        if let Some(o) = out.as_mut() {
            *o = OmniFitSummary {
                initial_cost: fit.initial_cost,
                final_cost: fit.final_cost,
                iterations: fit.iterations as u32,
                evaluations: fit.evaluations as u32,
                converged: fit.converged,
            };
        }
        if fit.converged {
            Ok(OMNI_OK)
        } else {
            set_error(format!("optimizer stopped after {} iterations", fit.iterations));
            Ok(OMNI_ERR_NOT_CONVERGED)
        }
    })
}

/// Fits kp, ki, kd against `measured`, starting from and writing back into
/// `cfg`. Returns `OMNI_ERR_NOT_CONVERGED` with `cfg` still updated when
/// the iteration budget runs out.
///
/// # Safety
/// `cfg` and `measured` must be live handles; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn omni_fit_gains(
    cfg: *mut OmniConfig,
    measured: *const OmniLog,
    out: *mut OmniFitSummary,
) -> OmniStatus {
    fit_stage(cfg, measured, &[Tunable::Kp, Tunable::Ki, Tunable::Kd], out)
}

/// Fits the yaw inertia against `measured`; see [`omni_fit_gains`].
///
/// # Safety
/// `cfg` and `measured` must be live handles; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn omni_fit_inertia(
    cfg: *mut OmniConfig,
    measured: *const OmniLog,
    out: *mut OmniFitSummary,
) -> OmniStatus {
    fit_stage(cfg, measured, &[Tunable::Jz], out)
}

/// Mean squared error of two equal-length series.
///
/// # Safety
/// `a` and `b` must hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn omni_mse(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> OmniStatus {
    guard(|| {
        let a = slice_arg(a, n, "a")?;
        let b = slice_arg(b, n, "b")?;
        let out = out_arg(out, "out")?;
        *out = estimation::mse_cost(a, b).or_status()?;
        Ok(OMNI_OK)
    })
}
