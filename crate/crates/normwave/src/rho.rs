//! Small-gradient radius: the largest `rho` such that every probe with mass at
//! most `m` and kinetic at most `4 rho` satisfies `I >= K/4` and `P >= K/2`.
//!
//! Along a dilation fiber the power moments scale exactly
//! (`int |theta * u|^p = e^{(Np/2 - N) theta} int |u|^p`), so each probe is
//! evaluated analytically over a dense range of kinetic levels.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{abs_pow, NonlinearityModel};
use crate::radial::{RadialGrid, RealField};

pub const DEFAULT_PROBE_SEED: u64 = 0x5eed_0f_2a11;
const PROBE_COUNT: usize = 50;
const MASS_FRACTIONS: [f64; 4] = [1.0, 0.75, 0.5, 0.25];
const LEVELS: usize = 2000;
const LOG_K_MIN: f64 = -12.0;
const LOG_K_MAX: f64 = 6.0;

#[derive(Debug, Clone)]
pub struct ProbeFamily {
    fields: Vec<RealField>,
}

impl ProbeFamily {
    /// Four fixed shapes (Gaussian, sech, plateau, shell) plus random sums of
    /// Gaussian bumps, 50 fields in total.
    pub fn standard(grid: &Arc<RadialGrid>, seed: u64) -> Result<Self> {
        let scale = (20.0 * grid.spacing()).max(1.0);
        let mut fields = vec![
            RealField::from_fn(grid.clone(), |r| (-0.5 * (r / scale).powi(2)).exp())?,
            RealField::from_fn(grid.clone(), |r| 1.0 / (r / scale).cosh())?,
            RealField::from_fn(grid.clone(), |r| 0.5 * (1.0 - (r / scale - 4.0).tanh()))?,
            RealField::from_fn(grid.clone(), |r| {
                let x = r / scale;
                x * x * (-0.5 * x * x).exp()
            })?,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while fields.len() < PROBE_COUNT {
            let bumps = rng.gen_range(1..=3);
            let params: Vec<(f64, f64, f64)> = (0..bumps)
                .map(|_| {
                    (
                        rng.gen_range(0.2..1.0),
                        rng.gen_range(0.0..3.0),
                        rng.gen_range(0.5..2.0),
                    )
                })
                .collect();
            fields.push(RealField::from_fn(grid.clone(), |r| {
                let x = r / scale;
                params
                    .iter()
                    .map(|(a, c, s)| a * (-((x - c) / s).powi(2)).exp())
                    .sum()
            })?);
        }
        Ok(Self { fields })
    }

    pub fn from_fields(fields: Vec<RealField>) -> Self {
        Self { fields }
    }

    pub fn fields(&self) -> &[RealField] {
        &self.fields
    }

    pub fn extend(&mut self, other: &ProbeFamily) {
        self.fields.extend(other.fields.iter().cloned());
    }
}

struct ProbePoint {
    kinetic: f64,
    ok: bool,
}

fn probe_points(model: &NonlinearityModel, mass: f64, family: &ProbeFamily) -> Vec<ProbePoint> {
    let n = model.dimension() as f64;
    let terms = model.terms();
    let mut out = Vec::new();
    for field in family.fields() {
        let m0 = field.mass();
        let k0 = field.kinetic();
        if m0 <= 0.0 || k0 <= 0.0 {
            continue;
        }
        let moments: Vec<f64> = terms
            .iter()
            .map(|t| {
                field
                    .grid()
                    .weights()
                    .iter()
                    .zip(field.values())
                    .map(|(w, &u)| w * abs_pow(u, t.exponent))
                    .sum()
            })
            .collect();
        for frac in MASS_FRACTIONS {
            let c2 = frac * mass / m0;
            for l in 0..LEVELS {
                let log_k = LOG_K_MIN + (LOG_K_MAX - LOG_K_MIN) * l as f64 / (LEVELS - 1) as f64;
                let kinetic = 10f64.powf(log_k);
                // e^{2 theta} c^2 K0 = kinetic
                let e2 = kinetic / (c2 * k0);
                let mut potential = 0.0;
                let mut excess = 0.0;
                for (t, &mom) in terms.iter().zip(&moments) {
                    let p = t.exponent;
                    let scaled = c2.powf(0.5 * p) * e2.powf(0.25 * n * p - 0.5 * n) * mom;
                    potential += t.coefficient / p * scaled;
                    excess += t.coefficient * (1.0 - 2.0 / p) * scaled;
                }
                let energy = 0.5 * kinetic - potential;
                let pohozaev = kinetic - 0.5 * n * excess;
                out.push(ProbePoint {
                    kinetic,
                    ok: energy >= 0.25 * kinetic && pohozaev >= 0.5 * kinetic,
                });
            }
        }
    }
    out
}

/// Estimates `rho(m)` on the standard probe family of the grid.
pub fn estimate_rho(model: &NonlinearityModel, mass: f64, grid: &Arc<RadialGrid>) -> Result<f64> {
    estimate_rho_seeded(model, mass, grid, DEFAULT_PROBE_SEED)
}

pub fn estimate_rho_seeded(
    model: &NonlinearityModel,
    mass: f64,
    grid: &Arc<RadialGrid>,
    seed: u64,
) -> Result<f64> {
    let family = ProbeFamily::standard(grid, seed)?;
    estimate_rho_with(model, mass, &family)
}

pub fn estimate_rho_with(
    model: &NonlinearityModel,
    mass: f64,
    family: &ProbeFamily,
) -> Result<f64> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mass must be positive, got {mass}"
        )));
    }
    let report = model.check_hypotheses();
    if !report.f4.holds() || !report.a3.holds() {
        return Err(Error::Hypothesis(
            "the small-gradient bounds need (f4) and (A.3)".into(),
        ));
    }
    if family.fields().is_empty() {
        return Err(Error::InvalidArgument("empty probe family".into()));
    }
    let points = probe_points(model, mass, family);
    let predicate = |rho: f64| points.iter().all(|p| p.ok || p.kinetic > 4.0 * rho);
    let (mut lo, mut hi) = (10f64.powf(LOG_K_MIN), 0.25 * 10f64.powf(LOG_K_MAX));
    if !predicate(lo) {
        return Err(Error::NoConvergence(format!(
            "probe family violates the bounds already at rho = {lo}"
        )));
    }
    if predicate(hi) {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if predicate(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    Ok(lo)
}
