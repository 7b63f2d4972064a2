//! Tridiagonal solvers. Row `i` of a system is
//! `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`;
//! `lower[0]` and `upper[n-1]` are ignored.

use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Thomas factorisation, reusable for many right-hand sides. Stable for
/// diagonally dominant or symmetric positive definite matrices.
#[derive(Debug, Clone)]
pub struct TridiagonalLu<T> {
    lower: Vec<T>,
    upper_mod: Vec<T>,
    pivot: Vec<T>,
}

impl<T: Scalar> TridiagonalLu<T> {
    pub fn new(lower: &[T], diag: &[T], upper: &[T]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::InvalidArgument(
                "tridiagonal band lengths differ".into(),
            ));
        }
        let mut upper_mod = vec![T::zero(); n];
        let mut pivot = vec![T::zero(); n];
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * upper_mod[i - 1]
            };
            if p.modulus() == 0.0 || !p.modulus().is_finite() {
                return Err(Error::Singular(i));
            }
            pivot[i] = p;
            if i + 1 < n {
                upper_mod[i] = upper[i] / p;
            }
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper_mod,
            pivot,
        })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = x.len();
        x[0] = x[0] / self.pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) / self.pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] = x[i] - self.upper_mod[i] * x[i + 1];
        }
    }
}

pub fn solve_tridiagonal<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
) -> Result<Vec<T>> {
    Ok(TridiagonalLu::new(lower, diag, upper)?.solve(rhs))
}

/// Gaussian elimination with partial pivoting, for indefinite systems such as
/// Newton Jacobians at saddle points.
pub fn solve_tridiagonal_pivoted(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::InvalidArgument(
            "tridiagonal band lengths differ".into(),
        ));
    }
    if n == 1 {
        if diag[0] == 0.0 {
            return Err(Error::Singular(0));
        }
        return Ok(vec![rhs[0] / diag[0]]);
    }
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut dl: Vec<f64> = (0..n - 1).map(|i| lower[i + 1]).collect();
    let mut du2 = vec![0.0; n];
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return Err(Error::Singular(i));
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            du2[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
        dl[i] = 0.0;
    }
    if d[n - 1] == 0.0 || !d[n - 1].is_finite() {
        return Err(Error::Singular(n - 1));
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    for i in (0..n - 2).rev() {
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn thomas_recovers_solution() {
        let n = 50;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -1.0 + 0.005 * i as f64).collect();
        let diag = vec![4.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = apply(&lower, &diag, &upper, &x);
        let y = solve_tridiagonal(&lower, &diag, &upper, &b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_diagonal() {
        let n = 40;
        let lower = vec![1.0; n];
        let upper = vec![1.0; n];
        let diag: Vec<f64> = (0..n)
            .map(|i| if i % 3 == 0 { 0.0 } else { -0.5 })
            .collect();
        let x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let b = apply(&lower, &diag, &upper, &x);
        assert!(solve_tridiagonal(&lower, &diag, &upper, &b).is_err());
        let y = solve_tridiagonal_pivoted(&lower, &diag, &upper, &b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-11, "{a} {b}");
        }
    }

    #[test]
    fn complex_factorisation_reused() {
        let n = 30;
        let i = Complex64::new(0.0, 1.0);
        let lower = vec![-0.5 * i; n];
        let upper = vec![-0.5 * i; n];
        let diag = vec![Complex64::new(1.0, 0.0) + i; n];
        let lu = TridiagonalLu::new(&lower, &diag, &upper).unwrap();
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let b: Vec<Complex64> = (0..n)
            .map(|k| {
                let mut s = diag[k] * x[k];
                if k > 0 {
                    s += lower[k] * x[k - 1];
                }
                if k + 1 < n {
                    s += upper[k] * x[k + 1];
                }
                s
            })
            .collect();
        let y = lu.solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
