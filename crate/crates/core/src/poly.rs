//! Polynomial and eigenvalue helpers.
//!
//! Polynomials are stored monic, highest power first without the leading 1:
//! `[a1, …, an]` stands for `λⁿ + a1 λⁿ⁻¹ + … + an`.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a real square matrix, sorted by decreasing real part
/// (ties broken by imaginary part) so results are reproducible.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::EigenFailure)?;
    let mut ev: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    sort_roots(&mut ev);
    Ok(ev)
}

pub fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Evaluates the monic polynomial at a complex point.
pub fn eval_monic(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &c| acc * z + c)
}

fn eval_monic_deriv(coeffs: &[f64], z: Complex64) -> Complex64 {
    let n = coeffs.len();
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().take(n) {
        dp = dp * z + p;
        p = p * z + c;
    }
    dp
}

/// Evaluates a general real polynomial (highest power first).
pub fn eval_real(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Companion matrix of the monic polynomial.
pub fn companion(coeffs: &[f64]) -> DMatrix<f64> {
    let n = coeffs.len();
    let mut m = DMatrix::zeros(n, n);
    for (j, &c) in coeffs.iter().enumerate() {
        m[(0, j)] = -c;
    }
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    m
}

/// Roots of a monic polynomial via the eigenvalues of its companion matrix,
/// each refined by a few Newton steps and checked against the residual bound
/// `|p(λ)| < 1e-8 (1 + |λ|ⁿ)`.
pub fn roots_monic(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut roots = eigenvalues(&companion(coeffs))?;
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = eval_monic_deriv(coeffs, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = eval_monic(coeffs, *r) / d;
            let next = *r - step;
            if eval_monic(coeffs, next).norm() < eval_monic(coeffs, *r).norm() {
                *r = next;
            } else {
                break;
            }
        }
        // Keep conjugate symmetry exact for real input.
        if r.im.abs() <= 1e-14 * r.norm().max(1.0) {
            r.im = 0.0;
        }
        let scale = 1.0 + r.norm().powi(n as i32);
        let residual = eval_monic(coeffs, *r).norm();
        if residual >= 1e-8 * scale {
            return Err(Error::RootResidual { residual });
        }
    }
    sort_roots(&mut roots);
    Ok(roots)
}

/// Roots of a general real polynomial (highest power first). Leading zero
/// coefficients are dropped.
pub fn roots_real(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let first = coeffs.iter().position(|&c| c != 0.0);
    let Some(first) = first else {
        return Ok(Vec::new());
    };
    let lead = coeffs[first];
    let monic: Vec<f64> = coeffs[first + 1..].iter().map(|c| c / lead).collect();
    roots_monic(&monic)
}

/// Monic characteristic polynomial `det(λI − A)` by the Faddeev–LeVerrier
/// recursion. Adequate for the small systems handled here.
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = Vec::with_capacity(n);
    let mut m = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        let am = a * &m;
        let c = -am.trace() / k as f64;
        coeffs.push(c);
        m = am + DMatrix::identity(n, n) * c;
    }
    coeffs
}

/// Hurwitz determinants `Δ_1 … Δ_n` of a monic polynomial. All roots have
/// negative real parts iff every determinant is positive.
pub fn hurwitz_determinants(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let coeff = |i: isize| -> f64 {
        match i {
            0 => 1.0,
            i if i > 0 && (i as usize) <= n => coeffs[i as usize - 1],
            _ => 0.0,
        }
    };
    (1..=n)
        .map(|k| {
            let h = DMatrix::from_fn(k, k, |r, c| coeff(2 * (c as isize) - (r as isize) + 1));
            h.determinant()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn expand(roots: &[Complex64]) -> Vec<f64> {
        let mut p = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
            for (i, c) in p.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * r;
            }
            p = next;
        }
        p[1..].iter().map(|c| c.re).collect()
    }

    #[test]
    fn cubic_roots_via_companion() {
        let r = roots_monic(&[-6.0, 11.0, -6.0]).unwrap();
        let re: Vec<f64> = r.iter().map(|z| z.re).collect();
        assert_relative_eq!(re[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(re[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(re[2], 1.0, epsilon = 1e-12);
        let r = roots_monic(&[-1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(r[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r[1].im.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn leading_zeros_are_dropped() {
        let r = roots_real(&[0.0, 2.0, -4.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r[0].re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn faddeev_matches_root_expansion() {
        let a = DMatrix::from_row_slice(4, 4, &[
            0.1, 0.0, 0.0, -0.03,
            2.0, -2.0, 0.0, 0.0,
            0.0, 2.0, -2.0, 0.0,
            0.0, 0.0, 0.25, -0.06,
        ]);
        let cp = char_poly(&a);
        let oracle = expand(&eigenvalues(&a).unwrap());
        for (x, y) in cp.iter().zip(&oracle) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn hurwitz_determinants_of_cubic() {
        let (a1, a2, a3) = (2.0, 3.0, 1.5);
        let d = hurwitz_determinants(&[a1, a2, a3]);
        assert_relative_eq!(d[0], a1);
        assert_relative_eq!(d[1], a1 * a2 - a3, epsilon = 1e-14);
        assert_relative_eq!(d[2], a3 * (a1 * a2 - a3), epsilon = 1e-14);
    }
}
