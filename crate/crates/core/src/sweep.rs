//! Parameter-space scans: `T_bi` curves in `α` and `g`, the `(α, g)`
//! surface of `T_bi`, the per-order growth-rate bifurcations and a
//! stability classification along a `g` grid.
//!
//! Cells are independent and evaluated on a rayon pool; results are
//! collected by grid index, so output does not depend on the worker count.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charpoly::{stability, EigenSignature};
use crate::error::{Error, Result};
use crate::hopf::{delay_threshold, hopf_in_g, linear_grid, DelayThreshold, Parameter};
use crate::model::{linearization, InvestmentParams, MacroParams};

/// Written into every metadata sidecar.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Marks a grid cell without a Hopf point.
pub const GAP: &str = "NA";

/// Runs `f` over `items` on a pool of `workers` threads (`0` = one per
/// core), preserving order.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|_| Error::InvalidParameter {
            name: "workers",
            value: workers as f64,
            reason: "thread pool could not be built",
        })?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub parameter: Parameter,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(parameter: Parameter, lo: f64, hi: f64, count: usize) -> Self {
        Self {
            parameter,
            lo,
            hi,
            count,
        }
    }

    /// Evenly spaced values including both ends.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        linear_grid(self.lo, self.hi, self.count)
    }

    pub fn validate(&self, inv: &InvestmentParams, delta: f64) -> Result<()> {
        if self.count == 0 || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid",
                value: self.count as f64,
                reason: "needs count >= 1 and finite lo <= hi",
            });
        }
        match self.parameter {
            Parameter::T if !(self.lo > 0.0) => Err(Error::DelayNonPositive(self.lo)),
            Parameter::Alpha if !(self.lo > 0.0) => Err(Error::InvalidParameter {
                name: "alpha",
                value: self.lo,
                reason: "must be positive",
            }),
            Parameter::G => {
                let (g_min, g_max) = inv.growth_bounds(delta);
                // Endpoints may sit on the bounds up to rounding; such points
                // are dropped later.
                let slack = 1e-12 * g_max.abs();
                for g in [self.lo, self.hi] {
                    if !(g >= g_min - slack && g <= g_max + slack) {
                        return Err(Error::GrowthOutOfRange { g, g_min, g_max });
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `c0 + c1/α`
    Hyperbolic,
    /// `c0 + c1 g + c2 g²`
    Quadratic,
}

impl FitModel {
    fn basis(&self, x: f64) -> Vec<f64> {
        match self {
            FitModel::Hyperbolic => vec![1.0, 1.0 / x],
            FitModel::Quadratic => vec![1.0, x, x * x],
        }
    }

    pub fn eval(&self, coefficients: &[f64], x: f64) -> f64 {
        self.basis(x).iter().zip(coefficients).map(|(b, c)| b * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub model: FitModel,
    pub coefficients: Vec<f64>,
    /// `‖X c − t‖₂`
    pub residual_norm: f64,
    /// `‖X c − t‖₂ / ‖t‖₂`
    pub relative_residual: f64,
}

/// Ordinary least squares of `ys` on the model basis.
pub fn least_squares(model: FitModel, xs: &[f64], ys: &[f64]) -> Result<Fit> {
    let k = model.basis(1.0).len();
    if xs.len() < k {
        return Err(Error::InvalidParameter {
            name: "fit points",
            value: xs.len() as f64,
            reason: "fewer points than coefficients",
        });
    }
    let x = DMatrix::from_fn(xs.len(), k, |i, j| model.basis(xs[i])[j]);
    let y = DVector::from_column_slice(ys);
    let c = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|_| Error::EigenFailure)?;
    let r = &x * &c - &y;
    Ok(Fit {
        model,
        coefficients: c.iter().copied().collect(),
        residual_norm: r.norm(),
        relative_residual: r.norm() / y.norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: f64,
    /// `None` when no Hopf point exists; `Some(0.0)` when unstable for
    /// every delay.
    pub t_bi: Option<f64>,
    pub status: DelayThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCurve {
    pub parameter: Parameter,
    pub m: usize,
    pub points: Vec<CurvePoint>,
    /// Fitted on the points with a genuine critical delay only.
    pub fit: Option<Fit>,
    /// Where the fit predicts `T_bi = 0` (hyperbolic model only).
    pub zero_crossing: Option<f64>,
}

impl BifurcationCurve {
    pub fn critical(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().filter_map(|p| p.status.value().map(|t| (p.param, t)))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},T_bi", self.parameter.name())?;
        for p in &self.points {
            writeln!(w, "{},{}", fmt17(p.param), fmt_opt(p.t_bi))?;
        }
        Ok(())
    }
}

fn threshold_cell(p: &MacroParams, inv: &InvestmentParams) -> Result<CurvePoint> {
    let status = match delay_threshold(p, inv) {
        Ok(s) => s,
        Err(Error::NoHopf(_)) => DelayThreshold::NoHopf,
        Err(e) => return Err(e),
    };
    Ok(CurvePoint {
        param: 0.0,
        t_bi: match status {
            DelayThreshold::Critical(t) => Some(t),
            DelayThreshold::AlwaysUnstable => Some(0.0),
            DelayThreshold::NoHopf => None,
        },
        status,
    })
}

fn curve(
    axis: &Axis,
    base: &MacroParams,
    inv: &InvestmentParams,
    model: FitModel,
    workers: usize,
) -> Result<BifurcationCurve> {
    axis.validate(inv, base.delta)?;
    base.validate_with_delay()?;
    let mut values = axis.values();
    if axis.parameter == Parameter::G {
        let (g_min, g_max) = inv.growth_bounds(base.delta);
        values.retain(|g| *g > g_min && *g < g_max);
    }
    let cells = par_map(&values, workers, |&x| {
        threshold_cell(&axis.parameter.set(base, x), inv).map(|c| CurvePoint { param: x, ..c })
    })?;
    let points = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let mut curve = BifurcationCurve {
        parameter: axis.parameter,
        m: base.m,
        points,
        fit: None,
        zero_crossing: None,
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve.critical().unzip();
    if xs.len() >= model.basis(1.0).len() {
        let fit = least_squares(model, &xs, &ys)?;
        if model == FitModel::Hyperbolic && fit.coefficients[0] != 0.0 {
            curve.zero_crossing = Some(-fit.coefficients[1] / fit.coefficients[0]);
        }
        curve.fit = Some(fit);
    }
    Ok(curve)
}

/// `T_bi` over an `α` grid with `g` fixed, fitted by `c0 + c1/α`.
pub fn curve_t_vs_alpha(
    alpha: &Axis,
    base: &MacroParams,
    inv: &InvestmentParams,
    workers: usize,
) -> Result<BifurcationCurve> {
    expect_axis(alpha, Parameter::Alpha)?;
    curve(alpha, base, inv, FitModel::Hyperbolic, workers)
}

/// `T_bi` over a `g` grid with `α` fixed, fitted by a quadratic. Grid
/// points on the admissibility bounds are dropped.
pub fn curve_t_vs_g(g: &Axis, base: &MacroParams, inv: &InvestmentParams, workers: usize) -> Result<BifurcationCurve> {
    expect_axis(g, Parameter::G)?;
    curve(g, base, inv, FitModel::Quadratic, workers)
}

fn expect_axis(axis: &Axis, parameter: Parameter) -> Result<()> {
    if axis.parameter != parameter {
        return Err(Error::InvalidParameter {
            name: "axis",
            value: f64::NAN,
            reason: "wrong parameter for this curve",
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub m: usize,
    pub alphas: Vec<f64>,
    pub gs: Vec<f64>,
    /// Row-major: `values[i * gs.len() + j]` belongs to `(alphas[i], gs[j])`.
    pub cells: Vec<CurvePoint>,
}

impl Surface {
    pub fn at(&self, i: usize, j: usize) -> &CurvePoint {
        &self.cells[i * self.gs.len() + j]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "alpha,g,T_bi")?;
        for (i, a) in self.alphas.iter().enumerate() {
            for (j, g) in self.gs.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt17(*a), fmt17(*g), fmt_opt(self.at(i, j).t_bi))?;
            }
        }
        Ok(())
    }
}

/// Smallest count per axis accepted by [`surface_t`].
pub const SURFACE_MIN_COUNT: usize = 16;

/// `T_bi` on the `(α, g)` grid.
pub fn surface_t(
    alpha: &Axis,
    g: &Axis,
    base: &MacroParams,
    inv: &InvestmentParams,
    workers: usize,
) -> Result<Surface> {
    expect_axis(alpha, Parameter::Alpha)?;
    expect_axis(g, Parameter::G)?;
    for ax in [alpha, g] {
        ax.validate(inv, base.delta)?;
        if ax.count < SURFACE_MIN_COUNT {
            return Err(Error::InvalidParameter {
                name: "surface grid count",
                value: ax.count as f64,
                reason: "needs at least 16 points per axis",
            });
        }
    }
    base.validate_with_delay()?;
    let (alphas, gs) = (alpha.values(), g.values());
    let cells: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|a| gs.iter().map(move |g| (*a, *g)))
        .collect();
    let (g_min, g_max) = inv.growth_bounds(base.delta);
    let out = par_map(&cells, workers, |&(a, g)| {
        if !(g > g_min && g < g_max) {
            return Ok(CurvePoint {
                param: a,
                t_bi: None,
                status: DelayThreshold::NoHopf,
            });
        }
        threshold_cell(&base.with_alpha(a).with_g(g), inv).map(|c| CurvePoint { param: a, ..c })
    })?;
    Ok(Surface {
        m: base.m,
        alphas,
        gs,
        cells: out.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GBifurcationRow {
    pub m: usize,
    pub g_bi1: Option<f64>,
    pub g_bi2: Option<f64>,
}

/// First and last Hopf points in `g` for each kernel order.
pub fn table_g_bifurcations(
    orders: &[usize],
    base: &MacroParams,
    inv: &InvestmentParams,
    workers: usize,
) -> Result<Vec<GBifurcationRow>> {
    if let Some(&m) = orders.iter().find(|&&m| m == 0) {
        return Err(Error::KernelOrderInvalid(m));
    }
    let rows = par_map(orders, workers, |&m| {
        hopf_in_g(&base.with_m(m), inv).map(|r| GBifurcationRow {
            m,
            g_bi1: r.g1_hopf(),
            g_bi2: r.g2_hopf(),
        })
    })?;
    rows.into_iter().collect()
}

pub fn write_table_csv<W: Write>(rows: &[GBifurcationRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "m,g_bi1,g_bi2")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.m, fmt_opt(r.g_bi1), fmt_opt(r.g_bi2))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridVerdict {
    pub g: f64,
    pub stable: bool,
    pub signature: EigenSignature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub stable: bool,
    /// First and last grid values in the regime.
    pub first: f64,
    pub last: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridClassification {
    pub verdicts: Vec<GridVerdict>,
    pub regimes: Vec<Regime>,
    /// Stability changes between neighbouring grid points, refined by
    /// bisection on the Routh–Hurwitz verdict.
    pub boundaries: Vec<f64>,
}

/// Routh–Hurwitz verdict at each grid value of `g`, grouped into runs of
/// equal stability.
pub fn classify_g_grid(
    grid: &[f64],
    base: &MacroParams,
    inv: &InvestmentParams,
    workers: usize,
) -> Result<GridClassification> {
    base.validate_with_delay()?;
    let verdict = |g: f64| -> Result<(bool, EigenSignature)> {
        let p = base.with_g(g);
        let v = stability(&p, &linearization(&p, inv)?)?;
        Ok((v.stable, v.signature))
    };
    let verdicts = par_map(grid, workers, |&g| verdict(g).map(|(stable, signature)| GridVerdict { g, stable, signature }))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut regimes: Vec<Regime> = Vec::new();
    let mut boundaries = Vec::new();
    for (i, v) in verdicts.iter().enumerate() {
        match regimes.last_mut() {
            Some(r) if r.stable == v.stable => {
                r.last = v.g;
                r.points += 1;
            }
            _ => {
                if i > 0 {
                    let (mut lo, mut hi) = (verdicts[i - 1].g, v.g);
                    let lo_stable = verdicts[i - 1].stable;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if verdict(mid)?.0 == lo_stable {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    boundaries.push(0.5 * (lo + hi));
                }
                regimes.push(Regime {
                    stable: v.stable,
                    first: v.g,
                    last: v.g,
                    points: 1,
                });
            }
        }
    }
    Ok(GridClassification {
        verdicts,
        regimes,
        boundaries,
    })
}

/// Full-precision decimal rendering used by every CSV writer.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| GAP.to_string(), fmt17)
}

/// Metadata written next to each CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub version: String,
    pub kind: String,
    pub investment: InvestmentParams,
    pub fixed: MacroParams,
    pub axes: Vec<Axis>,
    pub fit: Option<Fit>,
    pub zero_crossing: Option<f64>,
}

impl SweepMetadata {
    pub fn new(kind: &str, investment: &InvestmentParams, fixed: &MacroParams, axes: Vec<Axis>) -> Self {
        Self {
            version: ARTIFACT_VERSION.to_string(),
            kind: kind.to_string(),
            investment: *investment,
            fixed: *fixed,
            axes,
            fit: None,
            zero_crossing: None,
        }
    }

    pub fn for_curve(kind: &str, investment: &InvestmentParams, fixed: &MacroParams, axis: Axis, c: &BifurcationCurve) -> Self {
        Self {
            fit: c.fit.clone(),
            zero_crossing: c.zero_crossing,
            ..Self::new(kind, investment, fixed, vec![axis])
        }
    }
}
