//! Command-line front end.
//!
//! Every command prints `key=value` summary lines on stdout. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | unexpected failure |
//! | 2 | bad config, input file or arguments |
//! | 3 | simulation diverged |
//! | 4 | degenerate friction samples |
//! | 5 | optimizer did not converge (report still written) |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{ConfigDocument, PRESETS};
use crate::dynamics::Robot;
use crate::error::Error;
use crate::estimation::friction::{add_relative_voltage_noise, steady_speed, MAX_SAMPLE_VOLTAGE};
use crate::estimation::{apply_fit, fit_friction, mse_cost, FitResult, ResponseMatch, SteadySample, Tunable};
use crate::io;
use crate::signals::{LogRow, ResponseLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;

const DEFAULT_PRESET: &str = "fitted";

#[derive(Debug, Parser)]
#[command(
    name = "omnisim",
    version,
    about = "Omnidirectional robot simulator and parameter identification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a profile and write the response log (or a steady-state sweep).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write steady speed/voltage samples for every wheel instead of a log.
        #[arg(long)]
        steady_sweep: bool,
    },
    /// Fit viscous and Coulomb friction from steady samples.
    FitFriction {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the wheel PID gains against a measured log.
    FitGains {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the yaw inertia against a measured log.
    FitInertia {
        #[command(flatten)]
        common: Common,
    },
    /// Re-simulate a measured log and report the fit error.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// List the shipped presets, or print one as a config document.
    Presets {
        name: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config document; takes precedence over --preset.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Dotted-path override, e.g. `body.j_z=0.9`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for synthetic noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NonFiniteState { .. } | Error::NonFiniteCost { .. } => EXIT_DIVERGED,
            Error::DegenerateSamples(_) => EXIT_DEGENERATE,
            Error::Config(_)
            | Error::Data { .. }
            | Error::Io { .. }
            | Error::InvalidParameter(_)
            | Error::LengthMismatch { .. }
            | Error::EmptyProfile
            | Error::OutOfRange { .. }
            | Error::SingularMatrix { .. }
            | Error::VoltageOutOfRange { .. } => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Simulate { common, steady_sweep } => {
            if steady_sweep {
                run_steady_sweep(&common, out)
            } else {
                run_simulate(&common, out)
            }
        }
        Command::FitFriction { common } => run_fit_friction(&common, out),
        Command::FitGains { common } => run_fit(&common, &[Tunable::Kp, Tunable::Ki, Tunable::Kd], out),
        Command::FitInertia { common } => run_fit(&common, &[Tunable::Jz], out),
        Command::Validate { common } => run_validate(&common, out),
        Command::Presets { name, output } => run_presets(name.as_deref(), output.as_deref(), out),
    }
}

fn load_config(common: &Common) -> Result<ConfigDocument, Failure> {
    let doc = match &common.config {
        Some(path) => ConfigDocument::load(path, &common.overrides)?,
        None => ConfigDocument::preset_with(common.preset.as_deref().unwrap_or(DEFAULT_PRESET), &common.overrides)?,
    };
    Ok(doc)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    p.as_deref().ok_or_else(|| usage(format!("--{flag} is required")))
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure {
        code: EXIT_FAILURE,
        message: format!("stdout: {e}"),
    })
}

fn add_response_noise(log: ResponseLog, std: f64, seed: u64) -> Result<ResponseLog, Failure> {
    if std <= 0.0 {
        return Ok(log);
    }
    let noise = Normal::new(0.0, std).map_err(|e| usage(format!("synthetic.response_noise_std: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<LogRow> = log
        .rows()
        .iter()
        .map(|r| {
            let mut r = *r;
            r.response.v += noise.sample(&mut rng);
            r.response.vn += noise.sample(&mut rng);
            r.response.omega += noise.sample(&mut rng);
            r
        })
        .collect();
    Ok(ResponseLog::new(log.sample_period_s(), rows)?)
}

fn run_simulate(common: &Common, out: &mut dyn Write) -> Outcome {
    let doc = load_config(common)?;
    let cfg = doc.sim_config()?;
    let profile = doc.profile()?;
    let sim = Robot::new(cfg)?.simulate_traced(&profile)?;
    let log = add_response_noise(sim.log, doc.synthetic.response_noise_std, common.seed)?;

    let peak = log
        .rows()
        .iter()
        .flat_map(|r| r.wheel_speeds)
        .fold(0.0f64, |m, w| m.max(w.abs()));
    let last = log.rows().last().map(|r| r.t).unwrap_or(0.0);
    let pose = sim.final_state.pose;

    match &common.output {
        Some(path) => io::write_log_file(path, &log)?,
        None => io::write_log(&mut *out, &log)?,
    }
    if let Some(path) = &common.output {
        print(
            out,
            &format!(
                "output={}\nrows={}\nduration_s={last}\nfinal_x={}\nfinal_y={}\nfinal_theta={}\npeak_wheel_speed={peak}\n",
                path.display(),
                log.len(),
                pose.x,
                pose.y,
                pose.theta
            ),
        )?;
    }
    Ok(EXIT_OK)
}

fn run_steady_sweep(common: &Common, out: &mut dyn Write) -> Outcome {
    let doc = load_config(common)?;
    let cfg = doc.sim_config()?;
    let syn = &doc.synthetic;
    if syn.sweep_voltages.is_empty() {
        return Err(usage("synthetic.sweep_voltages is empty"));
    }
    let mut samples = Vec::new();
    for wheel in 0..3u32 {
        for (k, &u) in syn.sweep_voltages.iter().enumerate() {
            if u.abs() > cfg.motor.u_max_volts {
                return Err(usage(format!("sweep voltage {u} V exceeds the supply")));
            }
            let w = steady_speed(&cfg.motor, u, cfg.physics_dt_s, syn.settle_time_s)
                .ok_or_else(|| usage(format!("sweep point {u} V did not settle in {} s", syn.settle_time_s)))?;
            samples.push(SteadySample {
                omega_shaft: w,
                voltage: u,
                wheel_id: wheel,
                essay_id: format!("w{wheel}-{k}"),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    add_relative_voltage_noise(&mut samples, syn.voltage_noise_rel, &mut rng);
    // a bench supply cannot read above its own rail
    let rail = cfg.motor.u_max_volts.min(MAX_SAMPLE_VOLTAGE);
    for s in &mut samples {
        s.voltage = s.voltage.clamp(-rail, rail);
    }
    match &common.output {
        Some(path) => {
            io::write_samples_file(path, &samples)?;
            print(out, &format!("output={}\nsamples={}\n", path.display(), samples.len()))?;
        }
        None => io::write_samples(&mut *out, &samples)?,
    }
    Ok(EXIT_OK)
}

fn run_fit_friction(common: &Common, out: &mut dyn Write) -> Outcome {
    let doc = load_config(common)?;
    let input = required(&common.input, "input")?;
    let samples = io::read_samples_file(input)?;
    let fit = fit_friction(
        &samples,
        doc.motor.r_internal_ohm,
        doc.motor.k_torque,
        doc.friction.weighting,
    )?;
    let report = io::friction_report(&fit, samples.len());
    if let Some(path) = &common.output {
        io::write_text_file(path, &report)?;
    }
    print(out, &report)?;
    Ok(EXIT_OK)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn read_measured(common: &Common, doc: &ConfigDocument) -> Result<ResponseLog, Failure> {
    let input = required(&common.input, "input")?;
    Ok(io::read_log_file(input, Some(doc.controller.period_s))?)
}

fn run_fit(common: &Common, tunables: &[Tunable], out: &mut dyn Write) -> Outcome {
    let doc = load_config(common)?;
    let cfg = doc.sim_config()?;
    let measured = read_measured(common, &doc)?;
    let problem = ResponseMatch::new(&measured, &cfg, doc.identification.signal)?;
    let fit: FitResult = problem.fit(tunables, &doc.optimizer)?;

    let mut report = io::fit_report(&fit);
    if let Some(path) = &common.output {
        let history = sibling(path, ".history.csv");
        let fitted = sibling(path, ".fitted.toml");
        let mut new_cfg = cfg.clone();
        apply_fit(&mut new_cfg, &fit);
        let mut new_doc = doc.clone();
        new_doc.set_sim_config(&new_cfg);
        io::write_text_file(path, &report)?;
        io::write_history_file(&history, &fit)?;
        io::write_text_file(&fitted, &new_doc.to_toml_string())?;
        report.push_str(&format!(
            "report={}\nhistory={}\nfitted_config={}\n",
            path.display(),
            history.display(),
            fitted.display()
        ));
    }
    print(out, &report)?;
    Ok(if fit.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_validate(common: &Common, out: &mut dyn Write) -> Outcome {
    let doc = load_config(common)?;
    let cfg = doc.sim_config()?;
    let measured = read_measured(common, &doc)?;
    let signal = doc.identification.signal;
    let problem = ResponseMatch::new(&measured, &cfg, signal)?;
    let simulated = problem.simulate(&cfg)?;
    let cost = mse_cost(&simulated.series(signal), &measured.series(signal))?;
    if let Some(path) = &common.output {
        io::write_comparison_file(path, &measured, &simulated)?;
        print(out, &format!("output={}\n", path.display()))?;
    }
    let name = toml::Value::try_from(signal)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    print(out, &format!("rows={}\nsignal={name}\ncost={cost}\n", measured.len()))?;
    Ok(EXIT_OK)
}

fn run_presets(name: Option<&str>, output: Option<&Path>, out: &mut dyn Write) -> Outcome {
    match name {
        None => {
            for p in PRESETS {
                print(out, &format!("{}={}\n", p.name, p.summary))?;
            }
        }
        Some(n) => {
            let text = ConfigDocument::preset(n)?.to_toml_string();
            match output {
                Some(path) => {
                    io::write_text_file(path, &text)?;
                    print(out, &format!("output={}\n", path.display()))?;
                }
                None => print(out, &text)?,
            }
        }
    }
    Ok(EXIT_OK)
}
