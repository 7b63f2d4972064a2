//! Radial time evolution `i psi_t = -Delta psi - g(|psi|^2) psi`, with
//! `f(u) = g(u^2) u`, by Strang splitting: exact nonlinear phase rotations
//! around a Crank-Nicolson step of the discrete Laplacian. Every sub-step is
//! unitary in the weighted norm, so mass is conserved to rounding. Standing
//! waves are `e^{i omega t} u` with `-Delta u + omega u = f(u)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::TridiagonalLu;
use crate::model::NonlinearityModel;
use crate::radial::{RadialGrid, RealField};

#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<RadialGrid>,
    values: Vec<Complex64>,
}

impl PartialEq for ComplexField {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.values == other.values
    }
}

impl ComplexField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "complex field has non-finite entries".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(u: &RealField) -> Self {
        Self {
            grid: u.grid().clone(),
            values: u.values().iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `sum w conj(self) other`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a.conj() * b * w)
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(z, w)| w * z.norm_sqr())
            .sum()
    }

    pub fn kinetic(&self) -> f64 {
        let u = &self.values;
        let n = u.len();
        self.grid
            .conductance()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = if i + 1 < n { u[i + 1] - u[i] } else { -u[i] };
                a * d.norm_sqr()
            })
            .sum()
    }

    pub fn h1_norm(&self) -> f64 {
        (self.mass() + self.kinetic()).sqrt()
    }

    pub fn modulus(&self) -> RealField {
        RealField::from_parts(
            self.grid.clone(),
            self.values.iter().map(|z| z.norm()).collect(),
        )
    }
}

/// `K/2 - sum w F(|psi|)`, conserved by the continuous evolution.
pub fn hamiltonian(psi: &ComplexField, model: &NonlinearityModel) -> f64 {
    let pot: f64 = psi
        .values
        .iter()
        .zip(psi.grid.weights())
        .map(|(z, w)| w * model.primitive(z.norm()))
        .sum();
    0.5 * psi.kinetic() - pot
}

/// `min_theta ||psi - e^{i theta} u||_{H^1}`, with `theta` the angle that
/// minimises the weighted L2 part.
pub fn orbit_distance(psi: &ComplexField, u: &RealField) -> Result<f64> {
    if !psi.grid.same_as(u.grid()) {
        return Err(Error::GridMismatch(
            "field and reference live on different grids".into(),
        ));
    }
    let reference = ComplexField::from_real(u);
    let overlap = reference.inner(psi);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let diff = ComplexField {
        grid: psi.grid.clone(),
        values: psi
            .values
            .iter()
            .zip(u.values())
            .map(|(z, &x)| z - phase * x)
            .collect(),
    };
    Ok(diff.h1_norm())
}

/// Split-step propagator for a fixed step size.
pub struct Propagator<'a> {
    model: &'a NonlinearityModel,
    dt: f64,
    lu: TridiagonalLu<Complex64>,
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl<'a> Propagator<'a> {
    pub fn new(grid: &RadialGrid, model: &'a NonlinearityModel, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be finite and nonzero, got {dt}"
            )));
        }
        if grid.dimension() != model.dimension() {
            return Err(Error::GridMismatch(
                "grid and model dimensions differ".into(),
            ));
        }
        let (l, d, u) = grid.stiffness_bands();
        let half = Complex64::new(0.0, 0.5 * dt);
        let lhs = |s: f64| half * s;
        let lo: Vec<Complex64> = l.iter().map(|&s| lhs(s)).collect();
        let up: Vec<Complex64> = u.iter().map(|&s| lhs(s)).collect();
        let di: Vec<Complex64> = d
            .iter()
            .zip(grid.weights())
            .map(|(&s, &w)| w + lhs(s))
            .collect();
        let lu = TridiagonalLu::new(&lo, &di, &up)?;
        let lower = l.iter().map(|&s| -lhs(s)).collect();
        let upper = u.iter().map(|&s| -lhs(s)).collect();
        let diag = d
            .iter()
            .zip(grid.weights())
            .map(|(&s, &w)| w - lhs(s))
            .collect();
        Ok(Self {
            model,
            dt,
            lu,
            lower,
            diag,
            upper,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rotate(&self, psi: &mut [Complex64], tau: f64) {
        for z in psi.iter_mut() {
            let g = self.model.phase_rate(z.norm_sqr());
            *z *= Complex64::from_polar(1.0, tau * g);
        }
    }

    fn linear(&self, psi: &mut [Complex64]) {
        let n = psi.len();
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = self.diag[i] * psi[i];
            if i > 0 {
                s += self.lower[i] * psi[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * psi[i + 1];
            }
            rhs[i] = s;
        }
        self.lu.solve_in_place(&mut rhs);
        psi.copy_from_slice(&rhs);
    }

    pub fn step(&self, psi: &mut ComplexField) {
        self.rotate(&mut psi.values, 0.5 * self.dt);
        self.linear(&mut psi.values);
        self.rotate(&mut psi.values, 0.5 * self.dt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// Orbit distance to the reference standing wave, when one is tracked.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub final_state: ComplexField,
    pub steps: usize,
}

impl Trajectory {
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.samples[0].mass;
        self.samples.iter().fold(0.0f64, |d, s| {
            d.max((s.mass - m0).abs() / m0.max(f64::MIN_POSITIVE))
        })
    }

    /// Largest `|E(t) - E(0)| / max(1, |E(0)|)`.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        self.samples.iter().fold(0.0f64, |d, s| {
            d.max((s.energy - e0).abs() / e0.abs().max(1.0))
        })
    }

    pub fn max_distance(&self) -> Option<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.distance)
            .reduce(f64::max)
    }

    pub fn to_csv(&self) -> String {
        use crate::radial::fmt_num;
        let mut out = String::from("# normwave-trajectory v1\nt,mass,energy,d\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_num(s.t),
                fmt_num(s.mass),
                fmt_num(s.energy),
                s.distance.map(fmt_num).unwrap_or_default()
            ));
        }
        out
    }
}

/// Evolves `psi0` over `[0, T]` (or backwards for `dt < 0`) with
/// `round(|T/dt|)` steps, sampling every `record_every` steps.
pub fn evolve(
    psi0: &ComplexField,
    horizon: f64,
    dt: f64,
    model: &NonlinearityModel,
    record_every: usize,
    reference: Option<&RealField>,
) -> Result<Trajectory> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be nonnegative, got {horizon}"
        )));
    }
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be finite and nonzero, got {dt}"
        )));
    }
    let prop = Propagator::new(psi0.grid(), model, dt)?;
    let steps = (horizon / dt.abs()).round() as usize;
    let every = record_every.max(1);
    let mut psi = psi0.clone();
    let sample = |psi: &ComplexField, k: usize| -> Result<TrajectorySample> {
        Ok(TrajectorySample {
            t: k as f64 * dt,
            mass: psi.mass(),
            energy: hamiltonian(psi, model),
            distance: reference.map(|u| orbit_distance(psi, u)).transpose()?,
        })
    };
    let mut samples = vec![sample(&psi, 0)?];
    for k in 1..=steps {
        prop.step(&mut psi);
        if k % every == 0 || k == steps {
            let s = sample(&psi, k)?;
            if !(s.mass.is_finite() && s.energy.is_finite()) {
                return Err(Error::NoConvergence(format!(
                    "evolution became non-finite at t = {}",
                    s.t
                )));
            }
            samples.push(s);
        }
    }
    Ok(Trajectory {
        samples,
        final_state: psi,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    StaysClose,
    Departs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub epsilon: f64,
    pub horizon: f64,
    pub max_distance: f64,
    /// `factor * epsilon * ||U||_{H^1}` plus a `1e-6` allowance for scheme error.
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Smooth radial bump of unit height, its width the half-maximum radius of `u`.
pub fn perturbation_bump(u: &RealField) -> RealField {
    let amp = u.max_abs();
    let nodes = u.grid().nodes();
    let idx = u
        .values()
        .iter()
        .rposition(|x| x.abs() >= 0.5 * amp)
        .unwrap_or(0);
    let width = nodes[idx].max(u.grid().spacing());
    RealField::from_parts(
        u.grid().clone(),
        nodes.iter().map(|r| (-(r / width).powi(2)).exp()).collect(),
    )
}

/// Evolves `U (1 + eps bump)` and compares the largest orbit distance with
/// `factor * eps * ||U||_{H^1}` (plus `1e-6`). A heuristic within the radial
/// class.
pub fn stability_probe(
    u: &RealField,
    epsilon: f64,
    horizon: f64,
    dt: f64,
    model: &NonlinearityModel,
    factor: f64,
    record_every: usize,
) -> Result<(StabilityVerdict, Trajectory)> {
    if !(0.0..=0.1).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 0.1], got {epsilon}"
        )));
    }
    if !(factor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold factor must be positive, got {factor}"
        )));
    }
    let bump = perturbation_bump(u);
    let values = u
        .values()
        .iter()
        .zip(bump.values())
        .map(|(&x, &b)| Complex64::new(x * (1.0 + epsilon * b), 0.0))
        .collect();
    let psi0 = ComplexField::new(u.grid().clone(), values)?;
    let traj = evolve(&psi0, horizon, dt, model, record_every, Some(u))?;
    let max_distance = traj.max_distance().unwrap_or(0.0);
    let threshold = factor * epsilon * u.h1_norm() + 1e-6;
    let verdict = if max_distance <= threshold {
        Verdict::StaysClose
    } else {
        Verdict::Departs
    };
    Ok((
        StabilityVerdict {
            epsilon,
            horizon,
            max_distance,
            threshold,
            verdict,
        },
        traj,
    ))
}
