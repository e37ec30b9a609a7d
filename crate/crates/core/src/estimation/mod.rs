//! Parameter estimation: friction regression and response-matching fits.

pub mod friction;
pub mod identify;
pub mod optimize;

pub use friction::{fit_friction, FitWeighting, FrictionFit, SteadySample};
pub use identify::{apply_fit, mse_cost, stage1_fit_gains, stage2_fit_inertia, ResponseMatch, Tunable};
pub use optimize::{
    finite_diff_gradient, minimize, rprop_minimize, steepest_descent_minimize, FitResult, Method, Objective,
    OptimizerConfig, ParamSpec,
};
