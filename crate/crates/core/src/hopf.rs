//! Location of Hopf bifurcations in the mean delay `T`, the growth rate `g`
//! and the adjustment speed `α`.
//!
//! In `T` the weak and strong kernels have closed forms: the critical delays
//! are the positive roots of the quadratic `AB T² + (A² + α I_k* I_y*) T − A`
//! (`m = 1`) or of the quartic `φ(T)` (`m = 2`). Every other case goes
//! through a grid scan of the Jacobian spectrum, with eigenvalues matched
//! between neighbouring grid points by nearest neighbour, followed by
//! bisection on the real part of the tracked complex pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::equilibrium_jacobian;
use crate::charpoly::{coeffs_m1, CharCoeffsM1, coeffs_m2, cubic_discriminant, phi_quartic_coeffs, EigenSignature};
use crate::error::{Error, Result};
use crate::model::{linearization, InvestmentParams, Linearization, MacroParams};
use crate::poly;

/// Grid size of the growth-rate scan.
pub const G_SCAN_POINTS: usize = 2048;
/// Offset from the admissibility bounds at which the growth-rate scan starts
/// and stops.
pub const G_SCAN_MARGIN: f64 = 1e-6;
/// Default delay range and grid for numeric scans in `T`.
pub const T_SCAN_RANGE: (f64, f64) = (1e-3, 100.0);
pub const T_SCAN_POINTS: usize = 1200;
/// Default grid for scans in `α`.
pub const ALPHA_SCAN_POINTS: usize = 1024;
/// Relative step of the finite-difference crossing rate.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "T")]
    T,
    #[serde(rename = "g")]
    G,
    #[serde(rename = "alpha")]
    Alpha,
}

impl Parameter {
    pub fn name(&self) -> &'static str {
        match self {
            Parameter::T => "T",
            Parameter::G => "g",
            Parameter::Alpha => "alpha",
        }
    }

    pub fn set(&self, p: &MacroParams, value: f64) -> MacroParams {
        match self {
            Parameter::T => p.with_t(value),
            Parameter::G => p.with_g(value),
            Parameter::Alpha => p.with_alpha(value),
        }
    }

    pub fn get(&self, p: &MacroParams) -> f64 {
        match self {
            Parameter::T => p.t,
            Parameter::G => p.g,
            Parameter::Alpha => p.alpha,
        }
    }
}

/// Direction in which the complex pair crosses the imaginary axis as the
/// parameter increases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// Left to right: the equilibrium loses stability.
    Destabilizing,
    /// Right to left: the equilibrium regains stability.
    Stabilizing,
}

impl Crossing {
    fn from_rate(rate: f64) -> Self {
        if rate > 0.0 {
            Crossing::Destabilizing
        } else {
            Crossing::Stabilizing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub parameter: Parameter,
    pub value: f64,
    /// Crossing frequency `ω* > 0`.
    pub omega: f64,
    pub crossing: Crossing,
    /// `Re(dλ/d parameter)` of the crossing pair.
    pub transversality: f64,
}

impl HopfPoint {
    /// Parameter value moved by `fraction` of its magnitude into the
    /// unstable (`towards_unstable = true`) or the stable side.
    pub fn offset(&self, fraction: f64, towards_unstable: bool) -> f64 {
        let sign = match (self.crossing, towards_unstable) {
            (Crossing::Destabilizing, true) | (Crossing::Stabilizing, false) => 1.0,
            _ => -1.0,
        };
        self.value * (1.0 + sign * fraction)
    }
}

/// Eigenvalues of the equilibrium Jacobian for the given parameters.
pub fn spectrum(p: &MacroParams, inv: &InvestmentParams) -> Result<Vec<Complex64>> {
    let lin = linearization(p, inv)?;
    poly::eigenvalues(&equilibrium_jacobian(p, &lin)?)
}

// ---------------------------------------------------------------------------
// Closed forms in T

/// Hopf points in `T` for the weak kernel.
pub fn hopf_in_t_m1(lin: &Linearization, p: &MacroParams) -> Result<Vec<HopfPoint>> {
    hopf_from_m1_coeffs(&coeffs_m1(lin, &p.with_t(p.t.max(f64::MIN_POSITIVE)))?)
}

/// Hopf points in `T` from the weak-kernel constants `A`, `B`, `α I_k* I_y*`.
pub fn hopf_from_m1_coeffs(c: &CharCoeffsM1) -> Result<Vec<HopfPoint>> {
    if c.a_const >= 0.0 {
        return Err(Error::NoStableRegime { a_const: c.a_const });
    }
    let [q2, q1, q0] = c.criticality_quadratic();
    let mut roots = Vec::new();
    if q2 == 0.0 {
        if q1 != 0.0 {
            roots.push(-q0 / q1);
        }
    } else {
        let disc = q1 * q1 - 4.0 * q2 * q0;
        if disc >= 0.0 {
            let q = -0.5 * (q1 + q1.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / q2);
                roots.push(q0 / q);
            }
        }
    }
    roots.retain(|t| *t > 0.0 && t.is_finite());
    roots.sort_by(f64::total_cmp);

    let points: Vec<HopfPoint> = roots
        .into_iter()
        .filter_map(|t| {
            let at = c.at_delay(t);
            // At a root the cubic factors as (λ + a1)(λ² + a2).
            (at.a2 > 0.0).then(|| {
                let rate = at.crossing_rate();
                HopfPoint {
                    parameter: Parameter::T,
                    value: t,
                    omega: at.a2.sqrt(),
                    crossing: Crossing::from_rate(rate),
                    transversality: rate,
                }
            })
        })
        .collect();
    if points.is_empty() {
        return Err(Error::NoHopf(format!(
            "criticality quadratic has no admissible positive root (A = {:.6e}, B = {:.6e}, A² + αI_kI_y = {:.6e})",
            c.a_const, c.b_const, q1
        )));
    }
    Ok(points)
}

/// Hopf points in `T` for the strong kernel: positive zeros of `φ(T)`.
pub fn hopf_in_t_m2(lin: &Linearization, p: &MacroParams) -> Result<Vec<HopfPoint>> {
    let c = coeffs_m2(lin, &p.with_t(p.t.max(f64::MIN_POSITIVE)))?;
    let coeffs = phi_quartic_coeffs(&c);
    let mut roots: Vec<f64> = poly::roots_real(&coeffs)?
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-9 * z.norm() && z.re > 0.0)
        .map(|z| polish_real_root(&coeffs, z.re))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

    let mut points = Vec::new();
    for t in roots {
        let at = c.at_delay(t);
        if !(at.a1 > 0.0 && at.a3 / at.a1 > 0.0) {
            continue;
        }
        // The remaining pair satisfies λ3 + λ4 = −a1, λ3 λ4 = (a1 a2 − a3)/a1.
        let other_product = (at.a1 * at.a2 - at.a3) / at.a1;
        if other_product == 0.0 {
            continue;
        }
        let dh = at.hurwitz_deriv();
        let scale = (at.a1 * at.a2 * at.a3).abs() + at.a3 * at.a3 + (at.a1 * at.a1 * at.a4).abs();
        if (dh * t).abs() < 1e-10 * scale {
            return Err(Error::DegenerateTransversality {
                value: t,
                derivative: dh,
            });
        }
        let rate = at.crossing_rate();
        points.push(HopfPoint {
            parameter: Parameter::T,
            value: t,
            omega: (at.a3 / at.a1).sqrt(),
            crossing: Crossing::from_rate(rate),
            transversality: rate,
        });
    }
    if points.is_empty() {
        return Err(Error::NoHopf(
            "criticality quartic has no positive root with an imaginary pair".into(),
        ));
    }
    Ok(points)
}

fn polish_real_root(coeffs: &[f64], mut x: f64) -> f64 {
    let n = coeffs.len() - 1;
    let deriv: Vec<f64> = coeffs[..n]
        .iter()
        .enumerate()
        .map(|(i, c)| c * (n - i) as f64)
        .collect();
    for _ in 0..4 {
        let d = poly::eval_real(&deriv, x);
        if d == 0.0 {
            break;
        }
        let next = x - poly::eval_real(coeffs, x) / d;
        if poly::eval_real(coeffs, next).abs() < poly::eval_real(coeffs, x).abs() {
            x = next;
        } else {
            break;
        }
    }
    x
}

/// Hopf points in `T` for any kernel order: closed form for `m ≤ 2`, grid
/// scan over [`T_SCAN_RANGE`] otherwise.
pub fn hopf_in_t(p: &MacroParams, inv: &InvestmentParams) -> Result<Vec<HopfPoint>> {
    let lin = linearization(p, inv)?;
    match p.m {
        0 => Err(Error::KernelOrderInvalid(0)),
        1 => hopf_in_t_m1(&lin, p),
        2 => hopf_in_t_m2(&lin, p),
        _ => hopf_in_t_numeric(p, inv, T_SCAN_RANGE, T_SCAN_POINTS),
    }
}

/// Grid scan in `T` on a log-spaced grid.
pub fn hopf_in_t_numeric(
    p: &MacroParams,
    inv: &InvestmentParams,
    range: (f64, f64),
    points: usize,
) -> Result<Vec<HopfPoint>> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::DelayNonPositive(lo));
    }
    let lin = linearization(p, inv)?;
    let eval = |t: f64| poly::eigenvalues(&equilibrium_jacobian(&p.with_t(t), &lin)?);
    let grid = log_grid(lo, hi, points);
    let found = locate_crossings(&eval, &grid, Parameter::T)?;
    if found.is_empty() {
        return Err(Error::NoHopf(format!("no crossing for T in ({lo}, {hi})")));
    }
    Ok(found)
}

/// Outcome of asking for the delay at which stability is first lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayThreshold {
    /// Stable for `T < value`, unstable just above.
    Critical(f64),
    /// Unstable already as `T → 0`.
    AlwaysUnstable,
    /// No loss of stability in the examined delays.
    NoHopf,
}

impl DelayThreshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            DelayThreshold::Critical(t) => Some(*t),
            _ => None,
        }
    }
}

/// First destabilising Hopf delay `T_bi`.
pub fn delay_threshold(p: &MacroParams, inv: &InvestmentParams) -> Result<DelayThreshold> {
    let lin = linearization(p, inv)?;
    let found = match p.m {
        0 => return Err(Error::KernelOrderInvalid(0)),
        1 => hopf_in_t_m1(&lin, p),
        2 => hopf_in_t_m2(&lin, p),
        _ => {
            let eigs = poly::eigenvalues(&equilibrium_jacobian(&p.with_t(T_SCAN_RANGE.0), &lin)?)?;
            if eigs.iter().any(|z| z.re >= 0.0) {
                return Ok(DelayThreshold::AlwaysUnstable);
            }
            hopf_in_t_numeric(p, inv, T_SCAN_RANGE, T_SCAN_POINTS)
        }
    };
    match found {
        Ok(points) => Ok(points
            .iter()
            .find(|h| h.crossing == Crossing::Destabilizing)
            .map_or(DelayThreshold::NoHopf, |h| DelayThreshold::Critical(h.value))),
        Err(Error::NoStableRegime { .. }) => Ok(DelayThreshold::AlwaysUnstable),
        Err(Error::NoHopf(_)) => Ok(DelayThreshold::NoHopf),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Growth rate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// A real eigenvalue passes through zero; the equilibrium leaves the
    /// positive quadrant there.
    RealZeroCrossing,
    /// A pair of real eigenvalues merges into a complex pair or splits.
    RealComplexTransition,
    Hopf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub g: f64,
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subinterval {
    pub lo: f64,
    pub hi: f64,
    pub signature: EigenSignature,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GIntervalReport {
    pub m: usize,
    /// `c − δ`
    pub g_min: f64,
    /// `c + d − δ`
    pub g_max: f64,
    pub boundaries: Vec<Boundary>,
    pub hopf_points: Vec<HopfPoint>,
    pub subintervals: Vec<Subinterval>,
}

impl GIntervalReport {
    pub fn g1_hopf(&self) -> Option<f64> {
        self.hopf_points.first().map(|h| h.value)
    }

    pub fn g2_hopf(&self) -> Option<f64> {
        (self.hopf_points.len() >= 2).then(|| self.hopf_points.last().unwrap().value)
    }

    /// Last real/complex transition below the first Hopf point.
    pub fn g1(&self) -> Option<f64> {
        let h = self.g1_hopf()?;
        self.boundaries
            .iter()
            .rev()
            .find(|b| b.kind == BoundaryKind::RealComplexTransition && b.g < h)
            .map(|b| b.g)
    }

    /// First real/complex transition above the last Hopf point.
    pub fn g2(&self) -> Option<f64> {
        let h = self.hopf_points.last()?.value;
        self.boundaries
            .iter()
            .find(|b| b.kind == BoundaryKind::RealComplexTransition && b.g > h)
            .map(|b| b.g)
    }
}

/// Scans the whole admissible growth interval.
pub fn hopf_in_g(p: &MacroParams, inv: &InvestmentParams) -> Result<GIntervalReport> {
    let (g_min, g_max) = inv.growth_bounds(p.delta);
    hopf_in_g_range(p, inv, g_min + G_SCAN_MARGIN, g_max - G_SCAN_MARGIN, G_SCAN_POINTS)
}

/// Scans `[lo, hi]` (inside the admissible interval) for Hopf points,
/// real/complex transitions and zero crossings of real eigenvalues, then
/// classifies the spectrum on every subinterval.
pub fn hopf_in_g_range(
    p: &MacroParams,
    inv: &InvestmentParams,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<GIntervalReport> {
    p.validate_with_delay()?;
    inv.validate()?;
    let (g_min, g_max) = inv.growth_bounds(p.delta);
    for g in [lo, hi] {
        if !(g > g_min && g < g_max) || !(hi > lo) {
            return Err(Error::GrowthOutOfRange { g, g_min, g_max });
        }
    }
    let jac = |g: f64| {
        let q = p.with_g(g);
        equilibrium_jacobian(&q, &linearization(&q, inv)?)
    };
    let eval = |g: f64| poly::eigenvalues(&jac(g)?);
    let grid = linear_grid(lo, hi, points);

    let hopf_points = locate_crossings(&eval, &grid, Parameter::G)?;
    let mut boundaries: Vec<Boundary> = hopf_points
        .iter()
        .map(|h| Boundary {
            g: h.value,
            kind: BoundaryKind::Hopf,
        })
        .collect();

    // det(J) changes sign exactly when a real eigenvalue passes zero.
    let det = |g: f64| jac(g).map(|j| j.determinant());
    for g in sign_changes(&det, &grid)? {
        boundaries.push(Boundary {
            g,
            kind: BoundaryKind::RealZeroCrossing,
        });
    }

    let transitions = if p.m == 1 {
        let disc = |g: f64| {
            let q = p.with_g(g);
            let c = coeffs_m1(&linearization(&q, inv)?, &q)?;
            Ok(cubic_discriminant(c.a1, c.a2, c.a3))
        };
        sign_changes(&disc, &grid)?
    } else {
        let pairs = |g: f64| eval(g).map(|e| EigenSignature::of(&e).complex_pairs() as f64);
        level_changes(&pairs, &grid)?
    };
    for g in transitions {
        boundaries.push(Boundary {
            g,
            kind: BoundaryKind::RealComplexTransition,
        });
    }
    boundaries.sort_by(|a, b| a.g.total_cmp(&b.g));

    let mut edges = vec![lo];
    edges.extend(boundaries.iter().map(|b| b.g));
    edges.push(hi);
    let mut subintervals = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let signature = EigenSignature::of(&eval(0.5 * (w[0] + w[1]))?);
        subintervals.push(Subinterval {
            lo: w[0],
            hi: w[1],
            signature,
            stable: signature.is_stable(),
        });
    }

    Ok(GIntervalReport {
        m: p.m,
        g_min,
        g_max,
        boundaries,
        hopf_points,
        subintervals,
    })
}

// ---------------------------------------------------------------------------
// Adjustment speed

/// Hopf points in `α` over `range` with `T` and `g` fixed.
pub fn hopf_in_alpha(p: &MacroParams, inv: &InvestmentParams, range: (f64, f64)) -> Result<Vec<HopfPoint>> {
    hopf_in_alpha_grid(p, inv, range, ALPHA_SCAN_POINTS)
}

pub fn hopf_in_alpha_grid(
    p: &MacroParams,
    inv: &InvestmentParams,
    range: (f64, f64),
    points: usize,
) -> Result<Vec<HopfPoint>> {
    let (lo, hi) = range;
    if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha range",
            value: lo,
            reason: "must satisfy 0 < lo < hi",
        });
    }
    p.validate_with_delay()?;
    let lin = linearization(p, inv)?;
    let eval = |a: f64| poly::eigenvalues(&equilibrium_jacobian(&p.with_alpha(a), &lin)?);
    let found = locate_crossings(&eval, &linear_grid(lo, hi, points), Parameter::Alpha)?;
    if found.is_empty() {
        return Err(Error::NoHopf(format!("no crossing for alpha in ({lo}, {hi})")));
    }
    Ok(found)
}

// ---------------------------------------------------------------------------
// Numeric machinery

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    linear_grid(a, b, n)
        .into_iter()
        .enumerate()
        .map(|(i, x)| match i {
            0 => lo,
            i if i == n - 1 => hi,
            _ => x.exp(),
        })
        .collect()
}

fn is_upper_complex(z: &Complex64) -> bool {
    z.im > EigenSignature::REAL_TOL * z.norm()
}

/// Reorders `next` so that `next[i]` is the eigenvalue closest to
/// `prev[i]`, assigning the closest pairs first.
pub fn match_eigenvalues(prev: &[Complex64], next: &[Complex64]) -> Vec<Complex64> {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, a) in prev.iter().enumerate() {
        for (j, b) in next.iter().enumerate() {
            pairs.push(((a - b).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut out = vec![None; n];
    let mut used = vec![false; next.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(next[j]);
            used[j] = true;
        }
    }
    out.into_iter().map(|z| z.expect("equal lengths")).collect()
}

fn nearest(eigs: &[Complex64], target: Complex64) -> Complex64 {
    *eigs
        .iter()
        .min_by(|a, b| (*a - target).norm().total_cmp(&(*b - target).norm()))
        .expect("non-empty spectrum")
}

/// Follows every eigenvalue branch along `grid` and refines each sign change
/// of the real part of a complex branch by bisection.
pub fn locate_crossings<F>(eval: &F, grid: &[f64], parameter: Parameter) -> Result<Vec<HopfPoint>>
where
    F: Fn(f64) -> Result<Vec<Complex64>>,
{
    let mut found = Vec::new();
    let mut prev = eval(grid[0])?;
    for w in grid.windows(2) {
        let next = match_eigenvalues(&prev, &eval(w[1])?);
        for (a, b) in prev.iter().zip(&next) {
            if is_upper_complex(a) && is_upper_complex(b) && (a.re < 0.0) != (b.re < 0.0) {
                found.push(refine_crossing(eval, (w[0], *a), (w[1], *b), parameter)?);
            }
        }
        prev = next;
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(found)
}

fn refine_crossing<F>(
    eval: &F,
    (mut lo, mut zlo): (f64, Complex64),
    (mut hi, mut zhi): (f64, Complex64),
    parameter: Parameter,
) -> Result<HopfPoint>
where
    F: Fn(f64) -> Result<Vec<Complex64>>,
{
    let lo_negative = zlo.re < 0.0;
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let guess = zlo + (zhi - zlo) * 0.5;
        let z = nearest(&eval(mid)?, guess);
        if (z.re < 0.0) == lo_negative {
            lo = mid;
            zlo = z;
        } else {
            hi = mid;
            zhi = z;
        }
    }
    let value = 0.5 * (lo + hi);
    let z = nearest(&eval(value)?, zlo + (zhi - zlo) * 0.5);
    let rate = crossing_rate_fd(eval, value, z)?;
    Ok(HopfPoint {
        parameter,
        value,
        omega: z.im.abs(),
        crossing: Crossing::from_rate(rate),
        transversality: rate,
    })
}

/// Central finite difference of the real part of the eigenvalue nearest
/// `z` at `value`, with relative step [`FD_STEP`].
pub fn crossing_rate_fd<F>(eval: &F, value: f64, z: Complex64) -> Result<f64>
where
    F: Fn(f64) -> Result<Vec<Complex64>>,
{
    let h = FD_STEP * value.abs().max(f64::MIN_POSITIVE);
    let up = nearest(&eval(value + h)?, z);
    let down = nearest(&eval(value - h)?, z);
    Ok((up.re - down.re) / (2.0 * h))
}

/// Finite-difference `Re(dλ/d parameter)` of the pair nearest `i ω` at a
/// located Hopf point, recomputed from the Jacobian spectrum.
pub fn numeric_crossing_rate(p: &MacroParams, inv: &InvestmentParams, h: &HopfPoint) -> Result<f64> {
    let eval = |x: f64| spectrum(&h.parameter.set(p, x), inv);
    crossing_rate_fd(&eval, h.value, Complex64::new(0.0, h.omega))
}

/// Roots of sign changes of a continuous scalar function on the grid.
fn sign_changes<F>(f: &F, grid: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut out = Vec::new();
    let mut prev = f(grid[0])?;
    for w in grid.windows(2) {
        let next = f(w[1])?;
        if prev != 0.0 && next != 0.0 && (prev < 0.0) != (next < 0.0) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let lo_negative = prev < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let v = f(mid)?;
                if (v < 0.0) == lo_negative {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = next;
    }
    Ok(out)
}

/// Points where a piecewise-constant function changes value.
fn level_changes<F>(f: &F, grid: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut out = Vec::new();
    let mut prev = f(grid[0])?;
    for w in grid.windows(2) {
        let next = f(w[1])?;
        if next != prev {
            let (mut lo, mut hi) = (w[0], w[1]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid)? == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = next;
    }
    Ok(out)
}
