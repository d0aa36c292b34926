//! Investment function, model parameters and the closed-form equilibrium.
//!
//! The investment function is `I(y, k) = k Φ(y/k)` with the logistic
//! intensity `Φ(x) = c + d / (1 + exp(-a (v x - 1)))`. An equilibrium exists
//! only while the required investment rate `g + δ` lies strictly inside the
//! range `(c, c + d)` of `Φ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the logistic investment intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvestmentParams {
    /// Slope of the logistic.
    pub a: f64,
    /// Minimum investment rate.
    pub c: f64,
    /// Width of the investment range.
    pub d: f64,
    /// Output-capital sensitivity.
    pub v: f64,
}

impl Default for InvestmentParams {
    /// Dana–Malgrange estimates for the French economy.
    fn default() -> Self {
        Self {
            a: 9.0,
            c: 0.01,
            d: 0.026,
            v: 4.23,
        }
    }
}

impl InvestmentParams {
    pub fn new(a: f64, c: f64, d: f64, v: f64) -> Result<Self> {
        let p = Self { a, c, d, v };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a", self.a), ("c", self.c), ("d", self.d), ("v", self.v)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        Ok(())
    }

    /// Investment intensity `Φ(x)`.
    pub fn phi(&self, x: f64) -> f64 {
        self.c + self.d / (1.0 + (-self.a * (self.v * x - 1.0)).exp())
    }

    /// `Φ'(x)`, written through the logistic value so it stays finite for
    /// large `|x|`.
    pub fn phi_prime(&self, x: f64) -> f64 {
        let s = 1.0 / (1.0 + (-self.a * (self.v * x - 1.0)).exp());
        self.a * self.v * self.d * s * (1.0 - s)
    }

    /// `I(y, k) = k Φ(y/k)`.
    pub fn investment(&self, y: f64, k: f64) -> f64 {
        k * self.phi(y / k)
    }

    /// Admissible growth interval `(c − δ, c + d − δ)`.
    pub fn growth_bounds(&self, delta: f64) -> (f64, f64) {
        (self.c - delta, self.c + self.d - delta)
    }
}

/// Macroeconomic parameters, the mean delay and the kernel order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroParams {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub g: f64,
    #[serde(rename = "G0")]
    pub g0: f64,
    /// Mean delay of the gamma kernel.
    #[serde(rename = "T")]
    pub t: f64,
    /// Order (shape) of the gamma kernel.
    pub m: usize,
}

impl Default for MacroParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            gamma: 0.15,
            delta: 0.007,
            g: 0.016,
            g0: 2.0,
            t: 1.0,
            m: 1,
        }
    }
}

impl MacroParams {
    /// Checks the constraints that do not involve the delay. `g` is not
    /// checked here; its admissible range depends on the investment function.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("G0", self.g0),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidParameter {
                name: "g",
                value: self.g,
                reason: "must be finite",
            });
        }
        if self.m < 1 {
            return Err(Error::KernelOrderInvalid(self.m));
        }
        if !(self.t >= 0.0) {
            return Err(Error::DelayNonPositive(self.t));
        }
        Ok(())
    }

    /// As [`validate`](Self::validate), additionally requiring `T > 0`.
    pub fn validate_with_delay(&self) -> Result<()> {
        self.validate()?;
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::DelayNonPositive(self.t));
        }
        Ok(())
    }

    pub fn with_g(self, g: f64) -> Self {
        Self { g, ..self }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_t(self, t: f64) -> Self {
        Self { t, ..self }
    }

    pub fn with_m(self, m: usize) -> Self {
        Self { m, ..self }
    }
}

/// Investment intensity `Φ(x)` for the given parameters.
pub fn phi(x: f64, inv: &InvestmentParams) -> f64 {
    inv.phi(x)
}

/// Solves `Φ(x*) = g + δ` by inverting the logistic.
pub fn solve_x_star(inv: &InvestmentParams, g: f64, delta: f64) -> Result<f64> {
    let (g_min, g_max) = inv.growth_bounds(delta);
    let s = g + delta;
    if !(s > inv.c && s < inv.c + inv.d) {
        return Err(Error::GrowthOutOfRange { g, g_min, g_max });
    }
    // ln(d/(s − c) − 1) = ln(c + d − s) − ln(s − c)
    let log_odds = (inv.c + inv.d - s).ln() - (s - inv.c).ln();
    Ok((1.0 - log_odds / inv.a) / inv.v)
}

/// `(I_y*, I_k*)` at the equilibrium ratio `x_star`.
pub fn investment_derivs(x_star: f64, inv: &InvestmentParams, g: f64, delta: f64) -> (f64, f64) {
    let e = (-inv.a * (inv.v * x_star - 1.0)).exp();
    let iy = inv.a * inv.d * inv.v * e / ((1.0 + e) * (1.0 + e));
    let ik = g + delta - x_star * iy;
    (iy, ik)
}

/// The constants of the linearisation at the equilibrium. Unlike
/// [`Equilibrium`] these exist on the whole admissible growth interval, even
/// where the fixed point leaves the positive quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    pub x_star: f64,
    pub iy_star: f64,
    pub ik_star: f64,
}

pub fn linearization(p: &MacroParams, inv: &InvestmentParams) -> Result<Linearization> {
    inv.validate()?;
    p.validate()?;
    let x_star = solve_x_star(inv, p.g, p.delta)?;
    let (iy_star, ik_star) = investment_derivs(x_star, inv, p.g, p.delta);
    Ok(Linearization {
        x_star,
        iy_star,
        ik_star,
    })
}

/// The unique fixed point `(y*, k*)` with positive coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub x_star: f64,
    pub y_star: f64,
    pub k_star: f64,
    #[serde(rename = "Iy_star")]
    pub iy_star: f64,
    #[serde(rename = "Ik_star")]
    pub ik_star: f64,
}

impl Equilibrium {
    pub fn linearization(&self) -> Linearization {
        Linearization {
            x_star: self.x_star,
            iy_star: self.iy_star,
            ik_star: self.ik_star,
        }
    }

    /// Flags equilibria past the logistic midpoint `x* > 1/v`. The
    /// baseline sits on the midpoint itself (`g + δ = c + d/2`), so rounding
    /// noise below `1e-12` relative is ignored.
    pub fn beyond_midpoint(&self, inv: &InvestmentParams) -> bool {
        self.x_star * inv.v - 1.0 > 1e-12
    }
}

/// Closed-form equilibrium: `k* = α G0 / (g x* + α (γ x* − (g + δ)))` and
/// `y* = x* k*`.
pub fn equilibrium(p: &MacroParams, inv: &InvestmentParams) -> Result<Equilibrium> {
    let lin = linearization(p, inv)?;
    let x = lin.x_star;
    let denominator = p.g * x + p.alpha * (p.gamma * x - (p.g + p.delta));
    if !(denominator > 0.0) || !(x > 0.0) {
        return Err(Error::NonPositiveEquilibrium {
            denominator,
            x_star: x,
        });
    }
    let k_star = p.alpha * p.g0 / denominator;
    Ok(Equilibrium {
        x_star: x,
        y_star: x * k_star,
        k_star,
        iy_star: lin.iy_star,
        ik_star: lin.ik_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent oracle: bisection on Φ(x) − target over (−10, 10).
    fn bisect_x(inv: &InvestmentParams, target: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if inv.phi(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn midpoint_flag() {
        let inv = InvestmentParams::default();
        let at = equilibrium(&MacroParams::default(), &inv).unwrap();
        assert!(!at.beyond_midpoint(&inv));
        let past = equilibrium(&MacroParams::default().with_g(0.02), &inv).unwrap();
        assert!(past.beyond_midpoint(&inv));
        let before = equilibrium(&MacroParams::default().with_g(0.012), &inv).unwrap();
        assert!(!before.beyond_midpoint(&inv));
    }

    #[test]
    fn phi_midpoint_and_limits() {
        let inv = InvestmentParams::default();
        assert_relative_eq!(phi(1.0 / inv.v, &inv), inv.c + inv.d / 2.0, epsilon = 1e-15);
        assert_relative_eq!(phi(1.0 / 4.23, &inv), 0.023, epsilon = 1e-15);
        assert_relative_eq!(phi(-1e3, &inv), inv.c, epsilon = 1e-15);
        assert_relative_eq!(phi(1e3, &inv), inv.c + inv.d, epsilon = 1e-15);
    }

    #[test]
    fn x_star_at_logistic_midpoint() {
        let inv = InvestmentParams::default();
        let x = solve_x_star(&inv, 0.016, 0.007).unwrap();
        assert_relative_eq!(x, 1.0 / 4.23, max_relative = 1e-14);
        assert_relative_eq!(x, bisect_x(&inv, 0.023), epsilon = 1e-12);
    }

    #[test]
    fn x_star_off_midpoint_matches_bisection() {
        let inv = InvestmentParams::default();
        let x = solve_x_star(&inv, 0.011, 0.007).unwrap();
        assert_relative_eq!(x, bisect_x(&inv, 0.018), epsilon = 1e-12);
        assert!((inv.phi(x) - 0.018).abs() < 1e-12);
    }

    #[test]
    fn growth_boundaries_rejected() {
        let inv = InvestmentParams::default();
        // g + δ = c exactly
        let err = solve_x_star(&inv, 0.003, 0.007).unwrap_err();
        assert!(matches!(err, Error::GrowthOutOfRange { .. }));
        assert!(solve_x_star(&inv, 0.029, 0.007).is_err());
        assert!(solve_x_star(&inv, 0.001, 0.007).is_err());
    }

    #[test]
    fn baseline_equilibrium_matches_stationarity_root() {
        let inv = InvestmentParams::default();
        let p = MacroParams::default();
        let eq = equilibrium(&p, &inv).unwrap();
        assert_relative_eq!(eq.k_star, 123.126_182_506, max_relative = 1e-9);
        assert_relative_eq!(eq.y_star, 29.107_844_564, max_relative = 1e-9);
        assert_eq!(eq.y_star, eq.x_star * eq.k_star);

        // Oracle: Newton on (ẏ, k̇) = 0 with a finite-difference Jacobian.
        let f = |y: f64, k: f64| {
            (
                p.alpha * (inv.investment(y, k) - p.gamma * y + p.g0) - p.g * y,
                inv.investment(y, k) - (p.g + p.delta) * k,
            )
        };
        let (mut y, mut k) = (30.0, 120.0);
        for _ in 0..50 {
            let (f1, f2) = f(y, k);
            let h = 1e-6;
            let (a1, a2) = f(y + h, k);
            let (b1, b2) = f(y, k + h);
            let (j11, j21, j12, j22) = ((a1 - f1) / h, (a2 - f2) / h, (b1 - f1) / h, (b2 - f2) / h);
            let det = j11 * j22 - j12 * j21;
            y -= (j22 * f1 - j12 * f2) / det;
            k -= (-j21 * f1 + j11 * f2) / det;
        }
        assert_relative_eq!(eq.y_star, y, max_relative = 1e-9);
        assert_relative_eq!(eq.k_star, k, max_relative = 1e-9);
    }

    #[test]
    fn non_positive_denominator_rejected() {
        let inv = InvestmentParams::default();
        // Near the lower admissibility bound x* is small and g + δ dominates.
        let p = MacroParams::default().with_g(0.00301);
        let err = equilibrium(&p, &inv).unwrap_err();
        assert!(matches!(err, Error::NonPositiveEquilibrium { .. }), "{err}");
    }

    #[test]
    fn derivatives_at_midpoint() {
        let inv = InvestmentParams::default();
        let x = 1.0 / inv.v;
        let (iy, ik) = investment_derivs(x, &inv, 0.016, 0.007);
        assert_relative_eq!(iy, 0.247_455, max_relative = 1e-12);
        assert_relative_eq!(ik, 0.023 - 0.0585, max_relative = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let inv = InvestmentParams::default();
        let p = MacroParams::default().with_g(0.011);
        let eq = equilibrium(&p, &inv).unwrap();
        let hy = 1e-6 * eq.y_star;
        let hk = 1e-6 * eq.k_star;
        let fd_y = (inv.investment(eq.y_star + hy, eq.k_star) - inv.investment(eq.y_star - hy, eq.k_star))
            / (2.0 * hy);
        let fd_k = (inv.investment(eq.y_star, eq.k_star + hk) - inv.investment(eq.y_star, eq.k_star - hk))
            / (2.0 * hk);
        assert_relative_eq!(eq.iy_star, fd_y, max_relative = 1e-6);
        assert_relative_eq!(eq.ik_star, fd_k, max_relative = 1e-6);
        assert!(eq.ik_star < 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(InvestmentParams::new(9.0, 0.0, 0.026, 4.23).is_err());
        let p = MacroParams {
            alpha: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(matches!(
            MacroParams::default().with_m(0).validate(),
            Err(Error::KernelOrderInvalid(0))
        ));
        assert!(matches!(
            MacroParams::default().with_t(0.0).validate_with_delay(),
            Err(Error::DelayNonPositive(_))
        ));
    }

    fn inv_strategy() -> impl Strategy<Value = InvestmentParams> {
        (3.0..15.0f64, 0.002..0.03f64, 0.01..0.05f64, 2.0..6.0f64)
            .prop_map(|(a, c, d, v)| InvestmentParams { a, c, d, v })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn inversion_identity(inv in inv_strategy(), frac in 0.01..0.99f64, delta in 0.001..0.02f64) {
            let (lo, hi) = inv.growth_bounds(delta);
            let g = lo + frac * (hi - lo);
            let x = solve_x_star(&inv, g, delta).unwrap();
            prop_assert!((inv.phi(x) - (g + delta)).abs() < 1e-10);
            let (iy, _) = investment_derivs(x, &inv, g, delta);
            prop_assert!(iy > 0.0);
            // Φ'(x*) written through the logistic value
            let s = g + delta - inv.c;
            prop_assert!((iy - inv.a * inv.v * s * (inv.d - s) / inv.d).abs() <= 1e-12 * iy.max(1.0));
        }

        #[test]
        fn x_star_increasing_in_g(inv in inv_strategy(), f1 in 0.01..0.98f64, df in 0.001..0.01f64, delta in 0.001..0.02f64) {
            let (lo, hi) = inv.growth_bounds(delta);
            let g1 = lo + f1 * (hi - lo);
            let g2 = lo + (f1 + df) * (hi - lo);
            prop_assert!(solve_x_star(&inv, g2, delta).unwrap() > solve_x_star(&inv, g1, delta).unwrap());
        }

        #[test]
        fn equilibrium_positive_when_returned(
            inv in inv_strategy(), frac in 0.01..0.99f64,
            alpha in 0.2..2.0f64, gamma in 0.02..0.4f64, delta in 0.001..0.02f64, g0 in 0.5..5.0f64,
        ) {
            let (lo, hi) = inv.growth_bounds(delta);
            let p = MacroParams { alpha, gamma, delta, g: lo + frac * (hi - lo), g0, t: 1.0, m: 1 };
            if let Ok(eq) = equilibrium(&p, &inv) {
                prop_assert!(eq.y_star > 0.0 && eq.k_star > 0.0);
                prop_assert!(eq.iy_star > 0.0);
                prop_assert!((eq.ik_star - (p.g + p.delta - eq.x_star * eq.iy_star)).abs() < 1e-15);
            }
        }
    }
}
