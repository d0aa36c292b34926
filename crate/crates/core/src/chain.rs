//! Linear-chain-trick reduction of the distributed-delay model.
//!
//! A gamma kernel of order `m` and mean `T` is replaced by `m` linear stages
//! with rate `m/T`. The resulting system in `(y, u_1, …, u_m, k)` is
//!
//! ```text
//! ẏ   = α [I(y, k) − γ y + G0] − g y
//! u̇_i = (m/T) (u_{i−1} − u_i),   u_0 ≡ y
//! k̇   = I(u_m, k) − (g + δ) k
//! ```
//!
//! For `m = 1` this is the weak-kernel system in `(y, u, k)`; for `m = 2` the
//! chain variables are `w = u_1` (driven by `y`) and `p = u_2` (feeding the
//! investment function).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Equilibrium, InvestmentParams, Linearization, MacroParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub y: f64,
    pub u: Vec<f64>,
    pub k: f64,
}

impl ChainState {
    pub fn new(y: f64, u: Vec<f64>, k: f64) -> Self {
        Self { y, u, k }
    }

    /// State matching a constant initial history `y(t) = y0`, `k(t) = k0`
    /// for `t ≤ 0`: every chain variable starts at `y0`.
    pub fn from_history(y0: f64, k0: f64, m: usize) -> Self {
        Self {
            y: y0,
            u: vec![y0; m],
            k: k0,
        }
    }

    pub fn at_equilibrium(eq: &Equilibrium, m: usize) -> Self {
        Self::from_history(eq.y_star, eq.k_star, m)
    }

    pub fn order(&self) -> usize {
        self.u.len()
    }

    /// Flattened `[y, u_1, …, u_m, k]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.u.len() + 2);
        v.push(self.y);
        v.extend_from_slice(&self.u);
        v.push(self.k);
        v
    }

    pub fn from_slice(s: &[f64]) -> Self {
        assert!(s.len() >= 3, "chain state needs at least 3 components");
        Self {
            y: s[0],
            u: s[1..s.len() - 1].to_vec(),
            k: s[s.len() - 1],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain([&self.y, &self.k])
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
    }
}

/// The `(m + 2)`-dimensional ODE obtained from the chain reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSystem {
    params: MacroParams,
    inv: InvestmentParams,
}

impl ChainSystem {
    pub fn build(p: &MacroParams, inv: &InvestmentParams) -> Result<Self> {
        if p.m < 1 {
            return Err(Error::KernelOrderInvalid(p.m));
        }
        if !(p.t > 0.0 && p.t.is_finite()) {
            return Err(Error::DelayNonPositive(p.t));
        }
        p.validate()?;
        inv.validate()?;
        Ok(Self {
            params: *p,
            inv: *inv,
        })
    }

    pub fn params(&self) -> &MacroParams {
        &self.params
    }

    pub fn investment(&self) -> &InvestmentParams {
        &self.inv
    }

    pub fn order(&self) -> usize {
        self.params.m
    }

    pub fn dimension(&self) -> usize {
        self.params.m + 2
    }

    /// Stage rate `m/T`.
    pub fn rate(&self) -> f64 {
        self.params.m as f64 / self.params.t
    }

    fn check_shape(&self, s: &ChainState) -> Result<()> {
        if s.u.len() != self.params.m {
            return Err(Error::StateShape {
                expected: self.params.m,
                found: s.u.len(),
            });
        }
        if !(s.k > 0.0) {
            return Err(Error::CapitalNonPositive { k: s.k, time: None });
        }
        Ok(())
    }

    pub fn rhs(&self, s: &ChainState) -> Result<ChainState> {
        self.check_shape(s)?;
        let x = s.to_vec();
        let mut dx = vec![0.0; x.len()];
        self.rhs_into(&x, &mut dx)?;
        Ok(ChainState::from_slice(&dx))
    }

    /// Allocation-free right-hand side on the flattened state.
    pub fn rhs_into(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let n = self.dimension();
        debug_assert_eq!(x.len(), n);
        let p = &self.params;
        let y = x[0];
        let k = x[n - 1];
        if !(k > 0.0) {
            return Err(Error::CapitalNonPositive { k, time: None });
        }
        let rate = self.rate();
        dx[0] = p.alpha * (self.inv.investment(y, k) - p.gamma * y + p.g0) - p.g * y;
        let mut upstream = y;
        for i in 1..=p.m {
            dx[i] = rate * (upstream - x[i]);
            upstream = x[i];
        }
        dx[n - 1] = self.inv.investment(upstream, k) - (p.g + p.delta) * k;
        Ok(())
    }

    /// Analytic Jacobian of [`rhs`](Self::rhs) at `s`.
    pub fn jacobian(&self, s: &ChainState) -> Result<DMatrix<f64>> {
        self.check_shape(s)?;
        let p = &self.params;
        let inv = &self.inv;
        let n = self.dimension();
        let last = n - 1;
        let rate = self.rate();
        let mut j = DMatrix::zeros(n, n);

        let x = s.y / s.k;
        // ∂I/∂y = Φ'(x), ∂I/∂k = Φ(x) − x Φ'(x)
        let iy = inv.phi_prime(x);
        let ik = inv.phi(x) - x * iy;
        j[(0, 0)] = p.alpha * (iy - p.gamma) - p.g;
        j[(0, last)] = p.alpha * ik;

        for i in 1..=p.m {
            j[(i, i - 1)] = rate;
            j[(i, i)] = -rate;
        }

        let z = s.u[p.m - 1] / s.k;
        let iu = inv.phi_prime(z);
        j[(last, p.m)] = iu;
        j[(last, last)] = inv.phi(z) - z * iu - (p.g + p.delta);
        Ok(j)
    }
}

/// Jacobian at the equilibrium, assembled from the linearisation constants.
/// Defined on the whole admissible growth interval, including where the
/// equilibrium itself is not in the positive quadrant.
pub fn equilibrium_jacobian(p: &MacroParams, lin: &Linearization) -> Result<DMatrix<f64>> {
    if p.m < 1 {
        return Err(Error::KernelOrderInvalid(p.m));
    }
    if !(p.t > 0.0 && p.t.is_finite()) {
        return Err(Error::DelayNonPositive(p.t));
    }
    let n = p.m + 2;
    let last = n - 1;
    let rate = p.m as f64 / p.t;
    let mut j = DMatrix::zeros(n, n);
    j[(0, 0)] = p.alpha * (lin.iy_star - p.gamma) - p.g;
    j[(0, last)] = p.alpha * lin.ik_star;
    for i in 1..=p.m {
        j[(i, i - 1)] = rate;
        j[(i, i)] = -rate;
    }
    j[(last, p.m)] = lin.iy_star;
    j[(last, last)] = lin.ik_star - (p.g + p.delta);
    Ok(j)
}
