use omnisim::config::ConfigDocument;
use omnisim::estimation::{finite_diff_gradient, OptimizerConfig, ResponseMatch, Tunable};
use omnisim::{BodyVelocity, ExcitationProfile, ResponseSignal, Robot, SimConfig};

fn fitted() -> SimConfig {
    ConfigDocument::preset("fitted").unwrap().sim_config().unwrap()
}

#[test]
fn long_step_settles_within_tolerance() {
    let cfg = fitted();
    let profile = ExcitationProfile::pure_rotation(&[(120.0, 2.0)]).unwrap();
    let log = Robot::new(cfg).unwrap().simulate(&profile).unwrap();
    let last = log.rows().last().unwrap();
    assert!(
        (last.response.omega - 2.0).abs() < 1e-3,
        "omega = {}",
        last.response.omega
    );
    assert!(last.response.v.abs() < 1e-9 && last.response.vn.abs() < 1e-9);
}

#[test]
fn linear_step_settles_without_rotation() {
    let cfg = fitted();
    let profile = ExcitationProfile::new(vec![omnisim::Segment {
        duration_s: 120.0,
        reference: BodyVelocity::new(0.3, 0.2, 0.0),
    }])
    .unwrap();
    let log = Robot::new(cfg).unwrap().simulate(&profile).unwrap();
    let last = log.rows().last().unwrap().response;
    assert!((last.v - 0.3).abs() < 1e-3 && (last.vn - 0.2).abs() < 1e-3, "{last:?}");
    assert!(last.omega.abs() < 1e-3, "{last:?}");
}

#[test]
fn halving_physics_step_changes_little() {
    let doc = ConfigDocument::preset("fitted").unwrap();
    let profile = doc.profile().unwrap();
    let coarse = doc.sim_config().unwrap();
    let mut fine = coarse.clone();
    fine.physics_dt_s /= 2.0;
    let a = Robot::new(coarse).unwrap().simulate(&profile).unwrap();
    let b = Robot::new(fine).unwrap().simulate(&profile).unwrap();
    let (wa, wb) = (a.series(ResponseSignal::Omega), b.series(ResponseSignal::Omega));
    let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    let diff: Vec<f64> = wa.iter().zip(&wb).map(|(x, y)| x - y).collect();
    assert!(rms(&diff) < 0.01 * rms(&wa), "{} vs {}", rms(&diff), rms(&wa));
}

#[test]
fn central_and_forward_differences_agree_mid_course() {
    let truth = fitted();
    let profile = ExcitationProfile::pure_rotation(&[(15.0, 2.0), (15.0, -1.0)]).unwrap();
    let log = Robot::new(truth.clone()).unwrap().simulate(&profile).unwrap();
    let mut start = truth.clone();
    start.gains.kp = 0.1;
    start.gains.ki = 0.03;
    let problem = ResponseMatch::new(&log, &start, ResponseSignal::Omega).unwrap();
    let cost = |p: &[f64]| {
        let mut c = start.clone();
        Tunable::Kp.set(&mut c, p[0]);
        Tunable::Ki.set(&mut c, p[1]);
        problem.cost_of(&c)
    };
    let x = [0.1, 0.03];
    let central = finite_diff_gradient(&cost, &x, &[0.01, 0.01], None, &OptimizerConfig::default()).unwrap();

    let f0 = cost(&x).unwrap();
    for k in 0..2 {
        let h = 1e-6 * x[k].abs().max(0.01);
        let mut q = x;
        q[k] += h;
        let forward = (cost(&q).unwrap() - f0) / h;
        assert!(
            (forward - central[k]).abs() <= 0.01 * central[k].abs(),
            "component {k}: forward {forward} central {}",
            central[k]
        );
    }
}

#[test]
fn inertia_cost_is_unimodal_around_truth() {
    let truth = fitted();
    let profile = ExcitationProfile::pure_rotation(&[(15.0, 2.0), (15.0, -2.0)]).unwrap();
    let log = Robot::new(truth.clone()).unwrap().simulate(&profile).unwrap();
    let problem = ResponseMatch::new(&log, &truth, ResponseSignal::Omega).unwrap();
    let costs: Vec<f64> = (0..=20)
        .map(|i| {
            let mut c = truth.clone();
            c.body.j_z = 1.1 * (0.5 + i as f64 * 0.05);
            problem.cost_of(&c).unwrap()
        })
        .collect();
    let best = costs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(best, 10);
    assert_eq!(costs[10], 0.0);
    assert!(costs[..=10].windows(2).all(|w| w[1] < w[0]));
    assert!(costs[10..].windows(2).all(|w| w[1] > w[0]));
}

fn gain_fit(kp: f64, ki: f64, max_iters: usize) -> omnisim::estimation::FitResult {
    let truth = fitted();
    let profile = ExcitationProfile::pure_rotation(&[(10.0, 2.0), (10.0, -1.0)]).unwrap();
    let log = Robot::new(truth.clone()).unwrap().simulate(&profile).unwrap();
    let mut start = truth.clone();
    start.gains.kp = kp;
    start.gains.ki = ki;
    let opt = OptimizerConfig {
        max_iters,
        ..Default::default()
    };
    ResponseMatch::new(&log, &start, ResponseSignal::Omega)
        .unwrap()
        .fit(&[Tunable::Kp, Tunable::Ki, Tunable::Kd], &opt)
        .unwrap()
}

#[test]
fn gain_fit_never_raises_cost() {
    let fit = gain_fit(0.01, 0.005, 40);
    assert!(fit.cost_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(fit.final_cost < 0.1 * fit.initial_cost, "{:?}", fit.params);
}

#[test]
fn zero_gains_sit_on_the_dead_zone_plateau() {
    // tiny gains never beat wheel stiction, so the robot stays still and
    // the cost is locally flat
    let fit = gain_fit(0.0, 0.0, 40);
    assert_eq!(fit.params, vec![0.0, 0.0, 0.0]);
    assert_eq!(fit.iterations, 1);
    assert!(fit.converged);
}

#[test]
fn steepest_descent_also_identifies_inertia() {
    let truth = fitted();
    let profile = ExcitationProfile::pure_rotation(&[(15.0, 2.0), (15.0, -1.0)]).unwrap();
    let log = Robot::new(truth.clone()).unwrap().simulate(&profile).unwrap();
    let mut start = truth.clone();
    start.body.j_z = 0.705;
    let opt = OptimizerConfig {
        method: omnisim::estimation::Method::SteepestDescent,
        learning_rate: 1000.0,
        max_iters: 200,
        ..Default::default()
    };
    let fit = ResponseMatch::new(&log, &start, ResponseSignal::Omega)
        .unwrap()
        .fit(&[Tunable::Jz], &opt)
        .unwrap();
    assert!((fit.params[0] / 1.1 - 1.0).abs() < 0.05, "{:?}", fit.params);
}
