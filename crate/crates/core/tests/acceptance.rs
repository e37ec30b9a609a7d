//! Acceptance gate. Runs every criterion at its stated tolerance and time
//! budget, prints one PASS/FAIL line each and exits non-zero on any failure.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omnisim::actuation::{motor_step, steady_state_voltage};
use omnisim::config::ConfigDocument;
use omnisim::dynamics::kinetic_energy;
use omnisim::estimation::friction::{add_relative_voltage_noise, model_samples};
use omnisim::estimation::{
    finite_diff_gradient, fit_friction, rprop_minimize, steepest_descent_minimize, FitWeighting, OptimizerConfig,
    ParamSpec, ResponseMatch, Tunable,
};
use omnisim::kinematics::{body_to_wheels, wheels_to_body};
use omnisim::{io, BodyVelocity, MotorParams, MotorState, Result, Robot, RobotGeometry, RobotState, SimConfig};

const KP: f64 = 0.06472;
const KI: f64 = 0.043796;
const JZ: f64 = 1.1;
const JZ_START: f64 = 0.705;
const B_V: f64 = 0.0324;
const F_C: f64 = 0.036735;

type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn kinematics_round_trip() -> Outcome {
    let geom = RobotGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = BodyVelocity::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-10.0..10.0),
        );
        let back = wheels_to_body(&geom, body_to_wheels(&geom, x)).expect("regular geometry");
        for (a, b) in x.as_array().iter().zip(back.as_array()) {
            worst = worst.max((a - b).abs());
        }
    }
    let col = body_to_wheels(&geom, BodyVelocity::new(0.0, 0.0, 1.0)).0;
    let col_err = col.iter().map(|w| (w - 0.195).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 1e-12 && col_err <= 1e-15,
        format!("max round-trip error {worst:.2e}, rotation column error {col_err:.2e}"),
    )
}

fn motor_steady_state() -> Outcome {
    let p = MotorParams::default();
    let mut worst = 0.0f64;
    for target in [1.0, 5.0, 10.0, 20.0] {
        let u = steady_state_voltage(&p, target);
        let mut s = MotorState::default();
        for _ in 0..20_000 {
            s = motor_step(&p, &s, u, 1e-3);
        }
        worst = worst.max((s.omega_shaft - target).abs());
    }
    outcome(worst <= 1e-6, format!("max |omega - omega*| = {worst:.2e} rad/s"))
}

fn friction_recovery() -> Outcome {
    let p = MotorParams::default();
    let (r, k) = (p.r_internal_ohm, p.k_torque);

    let speeds: Vec<f64> = (1..=60).map(|i| i as f64 * 0.5).collect();
    let clean = fit_friction(&model_samples(&p, &speeds, 0), r, k, FitWeighting::Ordinary).expect("clean fit");
    let clean_err = (clean.b_viscous - B_V).abs().max((clean.f_coulomb - F_C).abs());

    // 60 points on the low-speed end of the line, where the intercept is
    // best conditioned, weighted for proportional noise
    let speeds: Vec<f64> = (0..60).map(|i| 0.5 + 4.5 * i as f64 / 59.0).collect();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut s = model_samples(&p, &speeds, 0);
        add_relative_voltage_noise(&mut s, 0.01, &mut ChaCha8Rng::seed_from_u64(seed));
        let fit = fit_friction(&s, r, k, FitWeighting::Relative).expect("noisy fit");
        worst = worst
            .max((fit.b_viscous / B_V - 1.0).abs())
            .max((fit.f_coulomb / F_C - 1.0).abs());
    }
    outcome(
        clean_err <= 1e-9 && worst <= 0.02,
        format!(
            "noiseless error {clean_err:.2e}, worst relative error over 20 seeds {:.2}%",
            worst * 100.0
        ),
    )
}

fn planted_rotation_log() -> Result<(SimConfig, omnisim::ResponseLog)> {
    let doc = ConfigDocument::preset("fitted")?;
    let cfg = doc.sim_config()?;
    let log = Robot::new(cfg.clone())?.simulate(&doc.profile()?)?;
    Ok((cfg, log))
}

fn stage1_gains() -> Outcome {
    let (truth, log) = planted_rotation_log().expect("planted log");
    let opt = OptimizerConfig::default();
    let problem = ResponseMatch::new(&log, &truth, Default::default()).expect("problem");
    let planted = problem.cost_of(&truth).expect("planted cost");

    let starts = [
        (0.3, 0.3, 0.0),
        (3.0, 3.0, 0.0),
        (0.3, 3.0, 0.0),
        (3.0, 0.3, 0.0),
        (3.0, 0.3, 0.01),
    ];
    let mut worst_gain = 0.0f64;
    let mut worst_kd = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut all_converged = true;
    for (fp, fi, kd) in starts {
        let mut start = truth.clone();
        start.gains.kp = KP * fp;
        start.gains.ki = KI * fi;
        start.gains.kd = kd;
        let fit = ResponseMatch::new(&log, &start, Default::default())
            .and_then(|m| m.fit(&[Tunable::Kp, Tunable::Ki, Tunable::Kd], &opt))
            .expect("stage 1 fit");
        let (kp, ki, kdf) = (fit.params[0], fit.params[1], fit.params[2]);
        worst_gain = worst_gain.max((kp / KP - 1.0).abs()).max((ki / KI - 1.0).abs());
        worst_kd = worst_kd.max(kdf);
        worst_excess = worst_excess.max(fit.final_cost - planted);
        all_converged &= fit.converged;
    }
    outcome(
        worst_gain <= 0.05 && worst_kd <= 1e-3 && worst_excess <= 1e-6,
        format!(
            "{} starts, worst gain error {:.3}%, max kd {worst_kd:.1e}, max cost excess {worst_excess:.1e}, converged={all_converged}",
            starts.len(),
            worst_gain * 100.0
        ),
    )
}

fn stage2_inertia() -> Outcome {
    let (truth, log) = planted_rotation_log().expect("planted log");
    let mut start = truth.clone();
    start.body.j_z = JZ_START;
    let fit = ResponseMatch::new(&log, &start, Default::default())
        .and_then(|m| m.fit(&[Tunable::Jz], &OptimizerConfig::default()))
        .expect("stage 2 fit");
    let jz = fit.params[0];
    outcome(
        (jz / JZ - 1.0).abs() <= 0.05,
        format!("j_z = {jz:.6} after {} iterations", fit.iterations),
    )
}

fn accel_limit() -> Outcome {
    let doc = ConfigDocument::preset("fitted-linear").expect("preset");
    let cfg = doc.sim_config().expect("config");
    let period = cfg.control_dt_s();
    let out = Robot::new(cfg.clone())
        .and_then(|r| r.simulate_traced(&doc.profile()?))
        .expect("linear run");
    let mut max_slope = 0.0f64;
    for w in out.wheel_refs.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            max_slope = max_slope.max((b - a).abs() / period);
        }
    }
    outcome(
        max_slope <= cfg.accel_limit + 1e-9,
        format!("max reference slope {max_slope:.9} rad/s^2 (limit {})", cfg.accel_limit),
    )
}

fn optimizer_sanity() -> Outcome {
    let sphere = |p: &[f64]| -> Result<f64> { Ok(p.iter().map(|x| (x - 0.5) * (x - 0.5)).sum()) };
    let rosen = |p: &[f64]| -> Result<f64> { Ok((1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2)) };
    let box3: Vec<ParamSpec> = (0..3)
        .map(|k| ParamSpec::new(format!("x{k}"), -5.0, 5.0, 1.0))
        .collect();
    let box2: Vec<ParamSpec> = (0..2)
        .map(|k| ParamSpec::new(format!("x{k}"), -5.0, 5.0, 1.0))
        .collect();
    let cfg = OptimizerConfig::default();
    let long = OptimizerConfig { max_iters: 5000, ..cfg };

    let rp = rprop_minimize(&sphere, &[2.0, -1.0, 3.0], &box3, &cfg).expect("rprop sphere");
    let sd = steepest_descent_minimize(&sphere, &[2.0, -1.0, 3.0], &box3, &cfg).expect("sd sphere");
    let rb = rprop_minimize(&rosen, &[-1.2, 1.0], &box2, &long).expect("rprop rosenbrock");

    // random positive-definite quadratics 0.5 xᵀAx + bᵀx
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_fd = 0.0f64;
    for _ in 0..50 {
        let n = 4;
        let l: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| l[i][k] * l[j][k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let f = |p: &[f64]| -> Result<f64> {
            let mut s = 0.0;
            for i in 0..n {
                s += b[i] * p[i];
                for j in 0..n {
                    s += 0.5 * p[i] * a[i][j] * p[j];
                }
            }
            Ok(s)
        };
        let g = finite_diff_gradient(&f, &x, &[1.0; 4], None, &cfg).expect("gradient");
        let exact: Vec<f64> = (0..n)
            .map(|i| b[i] + (0..n).map(|j| a[i][j] * x[j]).sum::<f64>())
            .collect();
        let norm = exact.iter().map(|e| e * e).sum::<f64>().sqrt().max(1e-12);
        let err = g.iter().zip(&exact).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        worst_fd = worst_fd.max(err / norm);
    }
    outcome(
        rp.final_cost < 1e-6
            && sd.final_cost < 1e-6
            && rb.final_cost < 1e-3
            && rb.iterations <= 5000
            && worst_fd <= 1e-6,
        format!(
            "sphere rprop {:.1e} sd {:.1e}, rosenbrock {:.1e} in {} iterations, fd relative error {worst_fd:.1e}",
            rp.final_cost, sd.final_cost, rb.final_cost, rb.iterations
        ),
    )
}

fn determinism_and_dissipation() -> Outcome {
    let doc = ConfigDocument::preset("fitted").expect("preset");
    let csv = || {
        let log = omnisim::dynamics::simulate(&doc.sim_config().unwrap(), &doc.profile().unwrap()).unwrap();
        let mut buf = Vec::new();
        io::write_log(&mut buf, &log).unwrap();
        buf
    };
    let identical = csv() == csv();

    let cfg = doc.sim_config().unwrap();
    let robot = Robot::new(cfg.clone()).unwrap();
    let mut state = RobotState::moving(&cfg, BodyVelocity::new(0.4, -0.2, 1.5));
    let mut ke = kinetic_energy(&cfg.body, &state.body_vel);
    let mut monotone = true;
    let mut steps = 0;
    while ke > 0.0 && steps < 100_000 {
        robot.step_open_loop(&mut state, [0.0; 3]).unwrap();
        let next = kinetic_energy(&cfg.body, &state.body_vel);
        monotone &= next <= ke;
        ke = next;
        steps += 1;
    }
    outcome(
        identical && monotone && ke == 0.0,
        format!("bit-identical={identical}, energy non-increasing={monotone}, final energy {ke} after {steps} steps"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 kinematics round trip", Duration::from_secs(1), kinematics_round_trip),
        ("2 motor steady state", Duration::from_secs(5), motor_steady_state),
        ("3 friction fit recovery", Duration::from_secs(5), friction_recovery),
        ("4 stage-1 gain identification", Duration::from_secs(300), stage1_gains),
        (
            "5 stage-2 inertia identification",
            Duration::from_secs(120),
            stage2_inertia,
        ),
        ("6 acceleration limit", Duration::from_secs(10), accel_limit),
        ("7 optimizer sanity", Duration::from_secs(10), optimizer_sanity),
        (
            "8 determinism and dissipation",
            Duration::from_secs(10),
            determinism_and_dissipation,
        ),
    ];
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failures = 0;
    for (name, budget, run) in criteria {
        let started = Instant::now();
        let result = run();
        let elapsed = started.elapsed();
        let ok = result.ok && elapsed <= budget;
        failures += usize::from(!ok);
        let _ = writeln!(
            out,
            "{} criterion {name}: {} [{:.2}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    let _ = writeln!(
        out,
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    let _ = out.flush();
    if failures > 0 {
        std::process::exit(1);
    }
}
