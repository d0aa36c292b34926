//! Linear-chain-trick reduction and bifurcation analysis of the
//! Kaldor–Kalecki growth model with a gamma-distributed investment delay.
//!
//! The delay kernel of order `m` and mean `T` is replaced by a cascade of
//! `m` linear stages, giving an `(m + 2)`-dimensional ODE. The crate
//! computes its equilibrium, closed-form characteristic polynomials for
//! `m = 1, 2`, Routh–Hurwitz verdicts, Hopf points in `T`, `g` and `α`,
//! simulated cycle metrics and gridded parameter sweeps.

// Negated comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod charpoly;
pub mod error;
pub mod hopf;
pub mod model;
pub mod poly;
pub mod simulate;
pub mod sweep;

pub use chain::{ChainState, ChainSystem};
pub use error::{Error, Result};
pub use hopf::{Crossing, DelayThreshold, GIntervalReport, HopfPoint, Parameter};
pub use simulate::{CycleKind, CycleMetrics, StepControl, Trajectory};
pub use model::{Equilibrium, InvestmentParams, Linearization, MacroParams};
pub use sweep::{Axis, BifurcationCurve, Fit, FitModel, Surface};
