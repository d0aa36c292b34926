//! Characteristic polynomials of the linearised chain systems and their
//! Routh–Hurwitz stability verdicts.
//!
//! For the weak kernel (`m = 1`) the characteristic equation is the cubic
//! `λ³ + a1 λ² + a2 λ + a3` with
//!
//! ```text
//! a1 = 1/T − A,   a2 = −A/T − B,   a3 = (−B − α I_k* I_y*) / T
//! A  = α (I_y* − γ) − g − x* I_y*,   B = [α (I_y* − γ) − g] x* I_y*
//! ```
//!
//! For the strong kernel (`m = 2`) it is the quartic
//! `λ⁴ + a1 λ³ + a2 λ² + a3 λ + a4` with
//!
//! ```text
//! a1 = 4/T − (M + N),   a2 = 4/T² − 4 (M + N)/T + M N
//! a3 = (4/T) [M N − (M + N)/T],   a4 = 4 (M N + P)/T²
//! M  = α (I_y* − γ) − g,   N = I_k* − (g + δ),   P = −α I_k* I_y*
//! ```
//!
//! Higher orders go through the numeric Jacobian.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::equilibrium_jacobian;
use crate::error::{Error, Result};
use crate::model::{Linearization, MacroParams};
use crate::poly;

/// Distance from zero below which a Routh–Hurwitz expression is treated as
/// marginal.
pub const MARGINAL_TOL: f64 = 1e-8;

fn check_delay(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::DelayNonPositive(t))
    }
}

/// Cubic coefficients for the weak kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharCoeffsM1 {
    pub t: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// `A = α (I_y* − γ) − g − x* I_y*`
    pub a_const: f64,
    /// `B = [α (I_y* − γ) − g] x* I_y*`
    pub b_const: f64,
    /// `α I_k* I_y*`
    pub coupling: f64,
}

pub fn coeffs_m1(lin: &Linearization, p: &MacroParams) -> Result<CharCoeffsM1> {
    check_delay(p.t)?;
    let m = p.alpha * (lin.iy_star - p.gamma) - p.g;
    let xiy = lin.x_star * lin.iy_star;
    let a_const = m - xiy;
    let b_const = m * xiy;
    let coupling = p.alpha * lin.ik_star * lin.iy_star;
    Ok(CharCoeffsM1::from_constants(a_const, b_const, coupling, p.t))
}

impl CharCoeffsM1 {
    pub fn from_constants(a_const: f64, b_const: f64, coupling: f64, t: f64) -> Self {
        Self {
            t,
            a1: 1.0 / t - a_const,
            a2: -a_const / t - b_const,
            a3: (-b_const - coupling) / t,
            a_const,
            b_const,
            coupling,
        }
    }

    pub fn at_delay(&self, t: f64) -> Self {
        Self::from_constants(self.a_const, self.b_const, self.coupling, t)
    }

    pub fn monic(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    /// Coefficients `[AB, A² + α I_k* I_y*, −A]` of the quadratic in `T`
    /// whose sign is that of `a1 a2 − a3`.
    pub fn criticality_quadratic(&self) -> [f64; 3] {
        [
            self.a_const * self.b_const,
            self.a_const * self.a_const + self.coupling,
            -self.a_const,
        ]
    }

    /// `Re(dλ/dT)` of the imaginary pair, valid where `a1 a2 = a3`.
    pub fn crossing_rate(&self) -> f64 {
        let t = self.t;
        let da1 = -1.0 / (t * t);
        let da2 = self.a_const / (t * t);
        let da3 = -self.a3 / t;
        (-da1 * self.a2 - self.a1 * da2 + da3) / (2.0 * (self.a2 + self.a1 * self.a1))
    }

    pub fn discriminant(&self) -> f64 {
        cubic_discriminant(self.a1, self.a2, self.a3)
    }
}

/// Quartic coefficients for the strong kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharCoeffsM2 {
    pub t: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    /// `M = α (I_y* − γ) − g`
    pub m_const: f64,
    /// `N = I_k* − (g + δ) = −x* I_y*`
    pub n_const: f64,
    /// `P = −α I_k* I_y*`
    pub p_const: f64,
}

pub fn coeffs_m2(lin: &Linearization, p: &MacroParams) -> Result<CharCoeffsM2> {
    check_delay(p.t)?;
    let m_const = p.alpha * (lin.iy_star - p.gamma) - p.g;
    let n_const = -lin.x_star * lin.iy_star;
    let p_const = -p.alpha * lin.ik_star * lin.iy_star;
    Ok(CharCoeffsM2::from_constants(m_const, n_const, p_const, p.t))
}

impl CharCoeffsM2 {
    pub fn from_constants(m_const: f64, n_const: f64, p_const: f64, t: f64) -> Self {
        let s = m_const + n_const;
        let mn = m_const * n_const;
        Self {
            t,
            a1: 4.0 / t - s,
            a2: 4.0 / (t * t) - 4.0 * s / t + mn,
            a3: (4.0 / t) * (mn - s / t),
            a4: 4.0 * (mn + p_const) / (t * t),
            m_const,
            n_const,
            p_const,
        }
    }

    pub fn at_delay(&self, t: f64) -> Self {
        Self::from_constants(self.m_const, self.n_const, self.p_const, t)
    }

    pub fn monic(&self) -> [f64; 4] {
        [self.a1, self.a2, self.a3, self.a4]
    }

    /// `a1 a2 a3 − a3² − a1² a4`, the last Hurwitz condition.
    pub fn hurwitz(&self) -> f64 {
        self.a1 * self.a2 * self.a3 - self.a3 * self.a3 - self.a1 * self.a1 * self.a4
    }

    /// `d/dT` of [`hurwitz`](Self::hurwitz), assembled from the coefficient
    /// derivatives.
    pub fn hurwitz_deriv(&self) -> f64 {
        let t = self.t;
        let s = self.m_const + self.n_const;
        let mn = self.m_const * self.n_const;
        let t2 = t * t;
        let t3 = t2 * t;
        let da1 = -4.0 / t2;
        let da2 = -8.0 / t3 + 4.0 * s / t2;
        let da3 = -4.0 * mn / t2 + 8.0 * s / t3;
        let da4 = -8.0 * (mn + self.p_const) / t3;
        let (a1, a2, a3, a4) = (self.a1, self.a2, self.a3, self.a4);
        da1 * a2 * a3 + a1 * da2 * a3 + a1 * a2 * da3
            - 2.0 * a3 * da3
            - 2.0 * a1 * da1 * a4
            - a1 * a1 * da4
    }

    /// `Re(dλ/dT)` of the imaginary pair, valid where the Hurwitz
    /// expression vanishes.
    pub fn crossing_rate(&self) -> f64 {
        let (a1, a2, a3) = (self.a1, self.a2, self.a3);
        let q = a1 * a2 - 2.0 * a3;
        -a1 * self.hurwitz_deriv() / (2.0 * (a1.powi(3) * a3 + q * q))
    }
}

/// Coefficients (highest power first) of the criticality quartic
/// `φ(T) = (M+N)(MN)² T⁴ + (M+N)²(P − 4MN) T³
///        + 4(M+N)[(M+N)² + 2MN − 2P] T² + 16[P − (M+N)²] T + 16(M+N)`.
/// It satisfies `φ(T) = −(T⁵/4) (a1 a2 a3 − a3² − a1² a4)`, so stability
/// requires `φ(T) < 0`.
pub fn phi_quartic_coeffs(c: &CharCoeffsM2) -> [f64; 5] {
    let (m, n, p) = (c.m_const, c.n_const, c.p_const);
    let s = m + n;
    let mn = m * n;
    [
        s * mn * mn,
        s * s * (p - 4.0 * mn),
        4.0 * s * (s * s + 2.0 * mn - 2.0 * p),
        16.0 * (p - s * s),
        16.0 * s,
    ]
}

pub fn phi_quartic(c: &CharCoeffsM2, t: f64) -> f64 {
    poly::eval_real(&phi_quartic_coeffs(c), t)
}

/// `dφ/dT` of the criticality quartic.
pub fn phi_quartic_deriv(c: &CharCoeffsM2, t: f64) -> f64 {
    let k = phi_quartic_coeffs(c);
    poly::eval_real(&[4.0 * k[0], 3.0 * k[1], 2.0 * k[2], k[3]], t)
}

/// Discriminant of the monic cubic `λ³ + a1 λ² + a2 λ + a3`. Positive for
/// three distinct real roots, negative for one real root and a complex pair.
pub fn cubic_discriminant(a1: f64, a2: f64, a3: f64) -> f64 {
    18.0 * a1 * a2 * a3 - 4.0 * a1.powi(3) * a3 + a1 * a1 * a2 * a2 - 4.0 * a2.powi(3) - 27.0 * a3 * a3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub satisfied: bool,
}

impl Condition {
    fn positive(name: &str, value: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            satisfied: value > 0.0,
        }
    }
}

/// A quantity reported alongside the verdict that is not itself a
/// stability condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
}

impl Diagnostic {
    fn new(name: &str, value: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
        }
    }
}

/// Counts of eigenvalues by location in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EigenSignature {
    pub negative_real: usize,
    pub positive_real: usize,
    pub zero_real: usize,
    pub stable_pairs: usize,
    pub unstable_pairs: usize,
    pub imaginary_pairs: usize,
}

impl EigenSignature {
    /// Relative size of the imaginary part below which a root counts as real.
    pub const REAL_TOL: f64 = 1e-9;
    /// Real parts below this magnitude count as zero.
    pub const ZERO_TOL: f64 = 1e-13;

    pub fn of(eigs: &[Complex64]) -> Self {
        let mut s = Self::default();
        for z in eigs {
            let scale = z.norm().max(1e-300);
            if z.im.abs() <= Self::REAL_TOL * scale {
                match z.re {
                    r if r.abs() < Self::ZERO_TOL => s.zero_real += 1,
                    r if r < 0.0 => s.negative_real += 1,
                    _ => s.positive_real += 1,
                }
            } else if z.im > 0.0 {
                match z.re {
                    r if r.abs() < Self::ZERO_TOL => s.imaginary_pairs += 1,
                    r if r < 0.0 => s.stable_pairs += 1,
                    _ => s.unstable_pairs += 1,
                }
            }
        }
        s
    }

    pub fn complex_pairs(&self) -> usize {
        self.stable_pairs + self.unstable_pairs + self.imaginary_pairs
    }

    pub fn is_stable(&self) -> bool {
        self.positive_real == 0 && self.zero_real == 0 && self.unstable_pairs == 0 && self.imaginary_pairs == 0
    }
}

impl fmt::Display for EigenSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut push = |n: usize, one: &str, many: &str| match n {
            0 => {}
            1 => parts.push(one.to_owned()),
            n => parts.push(format!("{n} {many}")),
        };
        push(self.negative_real, "1 negative", "negative");
        push(self.positive_real, "1 positive", "positive");
        push(self.zero_real, "1 zero", "zero");
        push(self.stable_pairs, "pair with negative real part", "pairs with negative real part");
        push(self.unstable_pairs, "pair with positive real part", "pairs with positive real part");
        push(self.imaginary_pairs, "purely imaginary pair", "purely imaginary pairs");
        write!(f, "{}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    /// Every condition holds and none is marginal.
    pub stable: bool,
    /// Some condition lies within [`MARGINAL_TOL`] of zero.
    pub marginal: bool,
    /// The last Hurwitz expression is marginal while the others hold: the
    /// characteristic polynomial has a purely imaginary pair.
    pub hopf_condition: bool,
    pub conditions: Vec<Condition>,
    pub diagnostics: Vec<Diagnostic>,
    /// Monic characteristic coefficients `[a1, …, an]`.
    pub coefficients: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub signature: EigenSignature,
}

impl StabilityVerdict {
    fn assemble(
        conditions: Vec<Condition>,
        diagnostics: Vec<Diagnostic>,
        coefficients: Vec<f64>,
        eigenvalues: Vec<Complex64>,
    ) -> Self {
        let marginal = conditions.iter().any(|c| c.value.abs() < MARGINAL_TOL);
        let stable = !marginal && conditions.iter().all(|c| c.satisfied);
        let (last, rest) = conditions.split_last().expect("at least one condition");
        let hopf_condition = last.value.abs() < MARGINAL_TOL
            && rest.iter().all(|c| c.satisfied || c.value.abs() < MARGINAL_TOL);
        let signature = EigenSignature::of(&eigenvalues);
        Self {
            stable,
            marginal,
            hopf_condition,
            conditions,
            diagnostics,
            coefficients,
            eigenvalues,
            signature,
        }
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Routh–Hurwitz test for the weak-kernel cubic: `a1 > 0`, `a3 > 0` and
/// `a1 a2 > a3`.
pub fn routh_hurwitz_cubic(c: &CharCoeffsM1) -> Result<StabilityVerdict> {
    let conditions = vec![
        Condition::positive("a1 > 0", c.a1),
        Condition::positive("a3 > 0", c.a3),
        Condition::positive("a1*a2 - a3 > 0", c.a1 * c.a2 - c.a3),
    ];
    let diagnostics = vec![
        Diagnostic::new("A", c.a_const),
        Diagnostic::new("B", c.b_const),
        Diagnostic::new("B + alpha*Ik*Iy", c.b_const + c.coupling),
        Diagnostic::new("a2", c.a2),
        Diagnostic::new("discriminant", c.discriminant()),
    ];
    let eigenvalues = poly::roots_monic(&c.monic())?;
    Ok(StabilityVerdict::assemble(
        conditions,
        diagnostics,
        c.monic().to_vec(),
        eigenvalues,
    ))
}

/// Routh–Hurwitz test for the strong-kernel quartic: `a1, a3, a4 > 0` and
/// `a1 a2 a3 > a3² + a1² a4`.
pub fn routh_hurwitz_quartic(c: &CharCoeffsM2) -> Result<StabilityVerdict> {
    let conditions = vec![
        Condition::positive("a1 > 0", c.a1),
        Condition::positive("a3 > 0", c.a3),
        Condition::positive("a4 > 0", c.a4),
        Condition::positive("a1*a2*a3 - a3^2 - a1^2*a4 > 0", c.hurwitz()),
    ];
    let s = c.m_const + c.n_const;
    let mn = c.m_const * c.n_const;
    let mut diagnostics = vec![
        Diagnostic::new("M", c.m_const),
        Diagnostic::new("N", c.n_const),
        Diagnostic::new("P", c.p_const),
        Diagnostic::new("M + N", s),
        Diagnostic::new("MN + P", mn + c.p_const),
        Diagnostic::new("phi(T)", phi_quartic(c, c.t)),
    ];
    if c.m_const > 0.0 {
        // a3 > 0 ⇔ T < (M+N)/(MN) when M > 0 > N
        diagnostics.push(Diagnostic::new("(M+N)/(MN) - T", s / mn - c.t));
    }
    let eigenvalues = poly::roots_monic(&c.monic())?;
    Ok(StabilityVerdict::assemble(
        conditions,
        diagnostics,
        c.monic().to_vec(),
        eigenvalues,
    ))
}

/// Hurwitz-determinant test on the numerically expanded characteristic
/// polynomial of the equilibrium Jacobian. Used for `m ≥ 3`.
pub fn routh_hurwitz_numeric(p: &MacroParams, lin: &Linearization) -> Result<StabilityVerdict> {
    let j = equilibrium_jacobian(p, lin)?;
    let coefficients = poly::char_poly(&j);
    let conditions = poly::hurwitz_determinants(&coefficients)
        .into_iter()
        .enumerate()
        .map(|(i, d)| Condition::positive(&format!("Hurwitz determinant {} > 0", i + 1), d))
        .collect();
    let eigenvalues = poly::eigenvalues(&j)?;
    Ok(StabilityVerdict::assemble(conditions, Vec::new(), coefficients, eigenvalues))
}

/// Stability verdict for any kernel order: closed form for `m ≤ 2`, the
/// numeric route otherwise.
pub fn stability(p: &MacroParams, lin: &Linearization) -> Result<StabilityVerdict> {
    match p.m {
        0 => Err(Error::KernelOrderInvalid(0)),
        1 => routh_hurwitz_cubic(&coeffs_m1(lin, p)?),
        2 => routh_hurwitz_quartic(&coeffs_m2(lin, p)?),
        _ => routh_hurwitz_numeric(p, lin),
    }
}
