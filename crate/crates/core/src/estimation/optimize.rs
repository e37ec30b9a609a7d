//! Bound-constrained minimization of black-box costs: RPROP and steepest
//! descent, both driven by central finite-difference gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar cost over a parameter vector. Evaluations must be pure so they
/// can run concurrently.
pub trait Objective: Sync {
    fn cost(&self, params: &[f64]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn cost(&self, params: &[f64]) -> Result<f64> {
        self(params)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rprop,
    SteepestDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub eta_plus: f64,
    pub eta_minus: f64,
    /// Initial, minimum and maximum RPROP step, as multiples of each
    /// parameter's scale.
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub learning_rate: f64,
    /// Relative finite-difference step.
    pub fd_epsilon: f64,
    /// Iteration budget. Zero evaluates the start only and never reports
    /// convergence.
    pub max_iters: usize,
    /// Stop once the cost falls to this value.
    pub cost_tol: f64,
    /// Stop once every step is below this fraction of its parameter scale.
    pub param_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Rprop,
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta0: 0.1,
            delta_min: 1e-8,
            delta_max: 1.0,
            learning_rate: 0.1,
            fd_epsilon: 1e-6,
            max_iters: 500,
            cost_tol: 1e-14,
            param_tol: 1e-7,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.eta_minus && self.eta_minus < 1.0 && 1.0 < self.eta_plus) {
            return Err(Error::invalid("need 0 < eta_minus < 1 < eta_plus"));
        }
        if !(0.0 < self.delta_min && self.delta_min <= self.delta0 && self.delta0 <= self.delta_max) {
            return Err(Error::invalid("need 0 < delta_min <= delta0 <= delta_max"));
        }
        if !(self.learning_rate > 0.0 && self.fd_epsilon > 0.0 && self.cost_tol > 0.0 && self.param_tol > 0.0) {
            return Err(Error::invalid("rates and tolerances must be > 0"));
        }
        Ok(())
    }
}

/// One free parameter: name, box bounds and a typical magnitude used to
/// scale steps and finite-difference perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, scale: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
            scale,
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost of every accepted iterate, starting with the initial point.
    pub cost_history: Vec<f64>,
    pub evaluations: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }
}

fn check_space(p0: &[f64], space: &[ParamSpec]) -> Result<()> {
    if p0.len() != space.len() || p0.is_empty() {
        return Err(Error::invalid("parameter vector and bounds differ in length"));
    }
    for (x, s) in p0.iter().zip(space) {
        if !(s.lo <= s.hi) || !(s.scale > 0.0) {
            return Err(Error::invalid(format!("bad bounds or scale for {}", s.name)));
        }
        if !(s.lo <= *x && *x <= s.hi) {
            return Err(Error::invalid(format!(
                "{} = {} outside [{}, {}]",
                s.name, x, s.lo, s.hi
            )));
        }
    }
    Ok(())
}

fn eval(obj: &dyn Objective, p: &[f64], index: usize) -> Result<f64> {
    let c = obj.cost(p)?;
    if !c.is_finite() {
        return Err(Error::NonFiniteCost { index });
    }
    Ok(c)
}

/// Central differences with a per-parameter step of
/// `fd_epsilon·max(|p_k|, scale_k)`. When `space` is given, a perturbation
/// that would leave the box falls back to a one-sided difference.
///
/// The `2n` perturbed evaluations run concurrently; each component only
/// depends on its own pair, so the result is independent of scheduling.
pub fn finite_diff_gradient(
    obj: &dyn Objective,
    p: &[f64],
    scales: &[f64],
    space: Option<&[ParamSpec]>,
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>> {
    if scales.len() != p.len() {
        return Err(Error::invalid("scales and parameters differ in length"));
    }
    let f0 = std::sync::OnceLock::new();
    (0..p.len())
        .into_par_iter()
        .map(|k| {
            let h = cfg.fd_epsilon * p[k].abs().max(scales[k]);
            let (lo, hi) = space.map_or((f64::NEG_INFINITY, f64::INFINITY), |s| (s[k].lo, s[k].hi));
            let shifted = |x: f64| {
                let mut q = p.to_vec();
                q[k] = x;
                eval(obj, &q, k)
            };
            let center = || -> Result<f64> {
                if let Some(c) = f0.get() {
                    return Ok(*c);
                }
                let c = eval(obj, p, k)?;
                Ok(*f0.get_or_init(|| c))
            };
            let up_ok = p[k] + h <= hi;
            let down_ok = p[k] - h >= lo;
            match (up_ok, down_ok) {
                (true, true) => Ok((shifted(p[k] + h)? - shifted(p[k] - h)?) / (2.0 * h)),
                (true, false) => Ok((shifted(p[k] + h)? - center()?) / h),
                (false, true) => Ok((center()? - shifted(p[k] - h)?) / h),
                (false, false) => Ok(0.0),
            }
        })
        .collect()
}

fn name_list(space: &[ParamSpec]) -> Vec<String> {
    space.iter().map(|s| s.name.clone()).collect()
}

/// RPROP with sign-based, per-parameter adaptive steps.
///
/// On a gradient sign flip the step for that parameter shrinks, no update
/// is made, and the stored gradient is cleared so the next iteration adapts
/// from scratch (no weight backtracking). A trial point whose cost exceeds
/// the current one is rejected and the steps that produced it shrink, so the
/// accepted cost sequence never increases.
pub fn rprop_minimize(
    obj: &dyn Objective,
    p0: &[f64],
    space: &[ParamSpec],
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_space(p0, space)?;
    let n = p0.len();
    let scales: Vec<f64> = space.iter().map(|s| s.scale).collect();
    let mut p = p0.to_vec();
    let mut cost = eval(obj, &p, 0)?;
    let mut evaluations = 1;
    let mut history = vec![cost];
    let mut step: Vec<f64> = scales.iter().map(|s| cfg.delta0 * s).collect();
    let mut prev_grad = vec![0.0; n];
    let mut converged = cfg.max_iters > 0 && cost <= cfg.cost_tol;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let mut grad = finite_diff_gradient(obj, &p, &scales, Some(space), cfg)?;
        evaluations += 2 * n;
        if grad.iter().all(|&g| g == 0.0) {
            converged = true;
            break;
        }

        let mut trial = p.clone();
        for k in 0..n {
            let agreement = grad[k] * prev_grad[k];
            if agreement > 0.0 {
                step[k] = (step[k] * cfg.eta_plus).min(cfg.delta_max * scales[k]);
            } else if agreement < 0.0 {
                step[k] = (step[k] * cfg.eta_minus).max(cfg.delta_min * scales[k]);
                grad[k] = 0.0;
            }
            if grad[k] != 0.0 {
                trial[k] = space[k].clamp(p[k] - grad[k].signum() * step[k]);
            }
        }

        let moved: Vec<bool> = (0..n).map(|k| trial[k] != p[k]).collect();
        if moved.iter().any(|&m| m) {
            let trial_cost = eval(obj, &trial, 0)?;
            evaluations += 1;
            if trial_cost <= cost {
                p = trial;
                cost = trial_cost;
                history.push(cost);
                prev_grad = grad;
            } else {
                for k in (0..n).filter(|&k| moved[k]) {
                    step[k] = (step[k] * cfg.eta_minus).max(cfg.delta_min * scales[k]);
                    prev_grad[k] = 0.0;
                }
                for k in (0..n).filter(|&k| !moved[k]) {
                    prev_grad[k] = grad[k];
                }
            }
        } else {
            prev_grad = grad;
        }

        if cost <= cfg.cost_tol || (0..n).all(|k| step[k] < cfg.param_tol * scales[k]) {
            converged = true;
        }
    }

    Ok(FitResult {
        names: name_list(space),
        params: p,
        initial_cost: history[0],
        final_cost: cost,
        iterations,
        converged,
        cost_history: history,
        evaluations,
    })
}

/// Fixed-rate gradient descent. A step that fails to lower the cost is
/// halved until it does; if no halving helps the point is stationary.
pub fn steepest_descent_minimize(
    obj: &dyn Objective,
    p0: &[f64],
    space: &[ParamSpec],
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_space(p0, space)?;
    let n = p0.len();
    let scales: Vec<f64> = space.iter().map(|s| s.scale).collect();
    let mut p = p0.to_vec();
    let mut cost = eval(obj, &p, 0)?;
    let mut evaluations = 1;
    let mut history = vec![cost];
    let mut converged = cfg.max_iters > 0 && cost <= cfg.cost_tol;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let grad = finite_diff_gradient(obj, &p, &scales, Some(space), cfg)?;
        evaluations += 2 * n;
        if grad.iter().all(|&g| g == 0.0) {
            converged = true;
            break;
        }
        let mut rate = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n).map(|k| space[k].clamp(p[k] - rate * grad[k])).collect();
            if trial == p {
                break;
            }
            let c = eval(obj, &trial, 0)?;
            evaluations += 1;
            if c < cost {
                accepted = Some((trial, c));
                break;
            }
            rate *= 0.5;
        }
        let Some((trial, c)) = accepted else {
            converged = true;
            break;
        };
        let small_step = (0..n).all(|k| (trial[k] - p[k]).abs() < cfg.param_tol * scales[k]);
        p = trial;
        cost = c;
        history.push(cost);
        if cost <= cfg.cost_tol || small_step {
            converged = true;
        }
    }

    Ok(FitResult {
        names: name_list(space),
        params: p,
        initial_cost: history[0],
        final_cost: cost,
        iterations,
        converged,
        cost_history: history,
        evaluations,
    })
}

pub fn minimize(obj: &dyn Objective, p0: &[f64], space: &[ParamSpec], cfg: &OptimizerConfig) -> Result<FitResult> {
    match cfg.method {
        Method::Rprop => rprop_minimize(obj, p0, space, cfg),
        Method::SteepestDescent => steepest_descent_minimize(obj, p0, space, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sphere(c: Vec<f64>) -> impl Fn(&[f64]) -> Result<f64> + Sync {
        move |p: &[f64]| Ok(p.iter().zip(&c).map(|(x, c)| (x - c).powi(2)).sum())
    }

    fn rosenbrock(p: &[f64]) -> Result<f64> {
        Ok((1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2))
    }

    fn unit_box(n: usize, half: f64) -> Vec<ParamSpec> {
        (0..n)
            .map(|k| ParamSpec::new(format!("p{k}"), -half, half, 1.0))
            .collect()
    }

    #[test]
    fn gradient_of_quadratic() {
        let f = |p: &[f64]| -> Result<f64> { Ok(p.iter().map(|x| x * x).sum()) };
        let g = finite_diff_gradient(&f, &[1.0, -2.0], &[1.0, 1.0], None, &OptimizerConfig::default()).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] + 4.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_of_constant() {
        let f = |_: &[f64]| -> Result<f64> { Ok(3.5) };
        let g = finite_diff_gradient(&f, &[1.0, 2.0, 3.0], &[1.0; 3], None, &OptimizerConfig::default()).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn gradient_one_sided_at_bound() {
        let f = |p: &[f64]| -> Result<f64> {
            assert!(p[0] >= 0.0);
            Ok((p[0] - 1.0).powi(2))
        };
        let space = vec![ParamSpec::new("x", 0.0, 5.0, 1.0)];
        let cfg = OptimizerConfig {
            fd_epsilon: 1e-7,
            ..Default::default()
        };
        let g = finite_diff_gradient(&f, &[0.0], &[1.0], Some(&space), &cfg).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn non_finite_cost_reports_index() {
        let f = |p: &[f64]| -> Result<f64> { Ok(if p[1] > 1.0 { f64::NAN } else { 0.0 }) };
        let err = finite_diff_gradient(&f, &[0.0, 1.0], &[1.0, 1.0], None, &OptimizerConfig::default());
        assert!(matches!(err, Err(Error::NonFiniteCost { index: 1 })));
    }

    #[test]
    fn rprop_sphere() {
        let c = vec![1.5, -2.0, 0.25];
        let r = rprop_minimize(
            &sphere(c.clone()),
            &[-4.0, 4.0, 0.0],
            &unit_box(3, 5.0),
            &Default::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.iterations < 200, "{}", r.iterations);
        for (x, c) in r.params.iter().zip(&c) {
            assert!((x - c).abs() < 1e-6);
        }
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rprop_rosenbrock() {
        let cfg = OptimizerConfig {
            max_iters: 5000,
            ..Default::default()
        };
        let r = rprop_minimize(&rosenbrock, &[-1.2, 1.0], &unit_box(2, 5.0), &cfg).unwrap();
        assert!(r.final_cost < 1e-3, "{} after {}", r.final_cost, r.iterations);
        assert!(r.iterations <= 5000);
    }

    #[test]
    fn steepest_descent_sphere() {
        let c = vec![0.5, -1.0];
        let r =
            steepest_descent_minimize(&sphere(c.clone()), &[3.0, 2.0], &unit_box(2, 5.0), &Default::default()).unwrap();
        assert!(r.converged);
        for (x, c) in r.params.iter().zip(&c) {
            assert!((x - c).abs() < 1e-6);
        }
    }

    #[test]
    fn steepest_descent_zero_gradient_start() {
        let r = steepest_descent_minimize(
            &sphere(vec![0.0, 0.0]),
            &[0.0, 0.0],
            &unit_box(2, 1.0),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r.params, vec![0.0, 0.0]);
        assert_eq!(r.iterations, 0);
        assert!(r.converged);

        // flat but nonzero cost: stops on the first gradient
        let flat = |_: &[f64]| -> Result<f64> { Ok(1.0) };
        let r = steepest_descent_minimize(&flat, &[0.3], &unit_box(1, 1.0), &Default::default()).unwrap();
        assert_eq!(r.params, vec![0.3]);
        assert!(r.converged && r.iterations == 1);
    }

    #[test]
    fn rprop_beats_steepest_descent_when_ill_conditioned() {
        let f = |p: &[f64]| -> Result<f64> { Ok(p[0] * p[0] + 1000.0 * p[1] * p[1]) };
        let cfg = OptimizerConfig {
            max_iters: 20_000,
            cost_tol: 1e-10,
            ..Default::default()
        };
        let space = unit_box(2, 5.0);
        let rp = rprop_minimize(&f, &[3.0, 1.0], &space, &cfg).unwrap();
        let sd = steepest_descent_minimize(&f, &[3.0, 1.0], &space, &cfg).unwrap();
        assert!(rp.final_cost <= 1e-8 && sd.final_cost <= 1e-8, "{rp:?} {sd:?}");
        assert!(
            rp.iterations < sd.iterations,
            "rprop {} vs sd {}",
            rp.iterations,
            sd.iterations
        );
    }

    #[test]
    fn max_iters_zero_reports_initial_cost() {
        let cfg = OptimizerConfig {
            max_iters: 0,
            ..Default::default()
        };
        let r = rprop_minimize(&sphere(vec![1.0]), &[0.0], &unit_box(1, 2.0), &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.final_cost, 1.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn rejects_start_outside_bounds() {
        let r = rprop_minimize(&sphere(vec![0.0]), &[3.0], &unit_box(1, 2.0), &Default::default());
        assert!(r.is_err());
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = OptimizerConfig {
            eta_minus: 1.5,
            ..Default::default()
        };
        assert!(rprop_minimize(&sphere(vec![0.0]), &[0.5], &unit_box(1, 2.0), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gradient_matches_analytic(
            p in proptest::collection::vec(-3.0..3.0f64, 3),
            a in proptest::collection::vec(0.5..5.0f64, 3),
        ) {
            let a2 = a.clone();
            let f = move |q: &[f64]| -> Result<f64> {
                Ok(q.iter().zip(&a2).map(|(x, w)| w * x * x).sum::<f64>() + q[0] * q[1])
            };
            let exact = [2.0 * a[0] * p[0] + p[1], 2.0 * a[1] * p[1] + p[0], 2.0 * a[2] * p[2]];
            let g = finite_diff_gradient(&f, &p, &[1.0; 3], None, &OptimizerConfig::default()).unwrap();
            for k in 0..3 {
                prop_assert!((g[k] - exact[k]).abs() <= 1e-6 * exact[k].abs().max(1.0));
            }
        }

        #[test]
        fn permutation_invariant(c in proptest::collection::vec(-2.0..2.0f64, 3), start in proptest::collection::vec(-4.0..4.0f64, 3)) {
            let perm = [2usize, 0, 1];
            let space = unit_box(3, 5.0);
            let cfg = OptimizerConfig::default();
            let a = rprop_minimize(&sphere(c.clone()), &start, &space, &cfg).unwrap();
            let cp: Vec<f64> = perm.iter().map(|&i| c[i]).collect();
            let sp: Vec<f64> = perm.iter().map(|&i| start[i]).collect();
            let b = rprop_minimize(&sphere(cp), &sp, &space, &cfg).unwrap();
            for (j, &i) in perm.iter().enumerate() {
                prop_assert!((b.params[j] - a.params[i]).abs() < 1e-9);
            }
        }
    }
}
