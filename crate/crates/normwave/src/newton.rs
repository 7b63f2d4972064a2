//! Newton polishing of discrete solutions of `-Delta u + mu u = f(u)`, either at
//! fixed `mu` or at fixed mass with `mu` as an extra unknown (bordered system).

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal_pivoted;
use crate::model::NonlinearityModel;
use crate::radial::{residual, RealField};

#[derive(Debug, Clone)]
pub struct Polished {
    pub field: RealField,
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn jacobian(u: &RealField, mu: f64, model: &NonlinearityModel) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (lower, mut diag, upper) = u.grid().stiffness_bands();
    for ((d, w), &x) in diag.iter_mut().zip(u.grid().weights()).zip(u.values()) {
        *d += w * (mu - model.derivative(x));
    }
    (lower, diag, upper)
}

/// `S u + W (mu u - f(u))`.
fn weak_residual(u: &RealField, mu: f64, model: &NonlinearityModel) -> Vec<f64> {
    let su = u.grid().stiffness_apply(u.values());
    su.iter()
        .zip(u.grid().weights())
        .zip(u.values())
        .map(|((s, w), &x)| s + w * (mu * x - model.eval(x)))
        .collect()
}

/// Smallest relative residual the discrete Laplacian can resolve: rounding in
/// `S u / w` grows like `eps / h^2`.
pub fn residual_floor(u: &RealField) -> f64 {
    1e-14 / u.grid().spacing().powi(2)
}

fn relative_residual(u: &RealField, mu: f64, model: &NonlinearityModel) -> Result<f64> {
    Ok(residual(u, mu, model)? / u.norm().max(f64::MIN_POSITIVE))
}

/// Solves at fixed frequency `omega`. Stops when the residual relative to
/// `||u||_w` drops below `tol`, or below `residual_floor` if that is larger.
pub fn polish_fixed_frequency(
    seed: &RealField,
    omega: f64,
    model: &NonlinearityModel,
    tol: f64,
    max_iter: usize,
) -> Result<Polished> {
    let mut u = seed.clone();
    let tol = tol.max(residual_floor(&u));
    let mut res = relative_residual(&u, omega, model)?;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(Polished {
                residual: res * u.norm(),
                field: u,
                mu: omega,
                iterations: it,
            });
        }
        let (l, d, up) = jacobian(&u, omega, model);
        let r: Vec<f64> = weak_residual(&u, omega, model).iter().map(|x| -x).collect();
        let step = solve_tridiagonal_pivoted(&l, &d, &up, &r)?;
        let mut alpha = 1.0;
        loop {
            let trial = RealField::from_parts(
                u.grid().clone(),
                u.values()
                    .iter()
                    .zip(&step)
                    .map(|(a, s)| a + alpha * s)
                    .collect(),
            );
            let tres = relative_residual(&trial, omega, model)?;
            if tres < res || alpha < 1e-4 {
                u = trial;
                res = tres;
                break;
            }
            alpha *= 0.5;
        }
    }
    if res <= tol {
        Ok(Polished {
            residual: res * u.norm(),
            field: u,
            mu: omega,
            iterations: max_iter,
        })
    } else {
        Err(Error::NoConvergence(format!(
            "fixed-frequency Newton stalled at relative residual {res:e}"
        )))
    }
}

/// Solves at fixed mass, treating `mu` as unknown. The mass constraint is
/// re-imposed exactly after every step. The tolerance is floored as in
/// `polish_fixed_frequency`.
pub fn polish_fixed_mass(
    seed: &RealField,
    mass: f64,
    model: &NonlinearityModel,
    tol: f64,
    max_iter: usize,
) -> Result<Polished> {
    let mut u = crate::radial::scale_mass(seed, mass)?;
    let tol = tol.max(residual_floor(&u));
    let mut mu = crate::radial::functionals(&u, model)?.multiplier;
    let mut res = relative_residual(&u, mu, model)?;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(Polished {
                residual: res * u.norm(),
                field: u,
                mu,
                iterations: it,
            });
        }
        let (l, d, up) = jacobian(&u, mu, model);
        let r: Vec<f64> = weak_residual(&u, mu, model).iter().map(|x| -x).collect();
        let wu: Vec<f64> = u
            .grid()
            .weights()
            .iter()
            .zip(u.values())
            .map(|(w, x)| w * x)
            .collect();
        let x1 = solve_tridiagonal_pivoted(&l, &d, &up, &r)?;
        let x2 = solve_tridiagonal_pivoted(&l, &d, &up, &wu)?;
        let a: f64 = wu.iter().zip(&x1).map(|(p, q)| p * q).sum();
        let b: f64 = wu.iter().zip(&x2).map(|(p, q)| p * q).sum();
        let gap = 0.5 * (mass - u.mass());
        if b == 0.0 || !b.is_finite() {
            return Err(Error::Singular(0));
        }
        let dmu = (a - gap) / b;
        let du: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| p - dmu * q).collect();
        let mut alpha = 1.0;
        loop {
            let trial = RealField::from_parts(
                u.grid().clone(),
                u.values()
                    .iter()
                    .zip(&du)
                    .map(|(x, s)| x + alpha * s)
                    .collect(),
            );
            let trial = crate::radial::scale_mass(&trial, mass)?;
            let tmu = mu + alpha * dmu;
            let tres = relative_residual(&trial, tmu, model)?;
            if tres < res || alpha < 1e-4 {
                u = trial;
                mu = tmu;
                res = tres;
                break;
            }
            alpha *= 0.5;
        }
    }
    if res <= tol {
        Ok(Polished {
            residual: res * u.norm(),
            field: u,
            mu,
            iterations: max_iter,
        })
    } else {
        Err(Error::NoConvergence(format!(
            "fixed-mass Newton stalled at relative residual {res:e}"
        )))
    }
}
