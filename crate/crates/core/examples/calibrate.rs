//! Full calibration on a synthetic robot: friction from a steady sweep,
//! then gains, then yaw inertia, each stage starting from datasheet values.

use omnisim::config::ConfigDocument;
use omnisim::estimation::friction::{model_samples, steady_speed};
use omnisim::estimation::{apply_fit, fit_friction, stage1_fit_gains, stage2_fit_inertia, FitWeighting};
use omnisim::{ResponseSignal, Robot};

fn main() -> omnisim::Result<()> {
    let truth = ConfigDocument::preset("fitted")?;
    let plant = truth.sim_config()?;
    let measured = Robot::new(plant.clone())?.simulate(&truth.profile()?)?;

    let speeds: Vec<f64> = [2.0, 6.0, 10.0, 14.0, 18.0, 22.0]
        .iter()
        .filter_map(|&u| steady_speed(&plant.motor, u, 1e-3, 30.0))
        .collect();
    let samples = model_samples(&plant.motor, &speeds, 0);
    let friction = fit_friction(
        &samples,
        plant.motor.r_internal_ohm,
        plant.motor.k_torque,
        FitWeighting::Ordinary,
    )?;
    println!(
        "friction: b_viscous={:.6} f_coulomb={:.6}",
        friction.b_viscous, friction.f_coulomb
    );

    let start = ConfigDocument::preset("datasheet")?;
    let mut cfg = start.sim_config()?;
    cfg.motor.b_viscous = friction.b_viscous;
    cfg.motor.f_coulomb = friction.f_coulomb;
    // gains are fitted with the inertia the robot actually has in this demo
    cfg.body.j_z = plant.body.j_z;

    let gains = stage1_fit_gains(&measured, &cfg, &start.optimizer, ResponseSignal::Omega)?;
    apply_fit(&mut cfg, &gains);
    println!(
        "gains: kp={:.6} ki={:.6} kd={:.2e} cost={:.2e} after {} iterations",
        cfg.gains.kp, cfg.gains.ki, cfg.gains.kd, gains.final_cost, gains.iterations
    );

    cfg.body.j_z = start.body.j_z;
    let inertia = stage2_fit_inertia(&measured, &cfg, &start.optimizer, ResponseSignal::Omega)?;
    apply_fit(&mut cfg, &inertia);
    println!("inertia: j_z={:.6} cost={:.2e}", cfg.body.j_z, inertia.final_cost);
    Ok(())
}
