//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Rounds to 12 significant digits so interval bounds such as `0.01 - 0.007`
/// print as `0.003` rather than `0.0030000000000000005`.
fn tidy(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(11 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "growth rate g = {g} outside the admissible interval ({}, {}); no equilibrium exists",
        tidy(*.g_min),
        tidy(*.g_max)
    )]
    GrowthOutOfRange { g: f64, g_min: f64, g_max: f64 },

    #[error("equilibrium lies outside the positive quadrant (capital denominator {denominator:.6e}, x* = {x_star:.6e})")]
    NonPositiveEquilibrium { denominator: f64, x_star: f64 },

    #[error("mean delay T must be positive, got {0}")]
    DelayNonPositive(f64),

    #[error("kernel order m must be at least 1, got {0}")]
    KernelOrderInvalid(usize),

    #[error("capital stock k = {k} is not positive{}", .time.map(|t| format!(" at t = {t}")).unwrap_or_default())]
    CapitalNonPositive { k: f64, time: Option<f64> },

    #[error("state has {found} chain variables but the system has kernel order {expected}")]
    StateShape { expected: usize, found: usize },

    #[error("A = {a_const:.6e} >= 0: the equilibrium is unstable for every delay")]
    NoStableRegime { a_const: f64 },

    #[error("no Hopf bifurcation found: {0}")]
    NoHopf(String),

    #[error("degenerate transversality at T* = {value}: derivative {derivative:.3e}")]
    DegenerateTransversality { value: f64, derivative: f64 },

    #[error("step size underflow at t = {time} (h = {step:.3e})")]
    StepFailure { time: f64, step: f64 },

    #[error("only {found} maxima after the transient, at least 6 required")]
    InsufficientOscillations { found: usize },

    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,

    #[error("polynomial root residual {residual:.3e} exceeds tolerance")]
    RootResidual { residual: f64 },
}

impl Error {
    /// True for errors caused by inputs outside the model's admissible
    /// domain, as opposed to failures of a numerical procedure.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::GrowthOutOfRange { .. }
                | Error::NonPositiveEquilibrium { .. }
                | Error::DelayNonPositive(_)
                | Error::KernelOrderInvalid(_)
                | Error::CapitalNonPositive { .. }
                | Error::StateShape { .. }
        )
    }
}
