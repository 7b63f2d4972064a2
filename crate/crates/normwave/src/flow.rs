//! Mass-preserving gradient flow of `I` and the threshold masses built on it.
//!
//! One step solves `(1 - dt Delta) v = u + dt f(u)` and rescales `v` to the
//! mass of `u`. Near convergence the flow hands over to constrained Newton.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::TridiagonalLu;
use crate::model::NonlinearityModel;
use crate::newton::polish_fixed_mass;
use crate::radial::{
    dilate, functionals, residual, scale_mass, Functionals, RadialGrid, RealField,
};
use crate::rho::{estimate_rho_seeded, DEFAULT_PROBE_SEED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub dt: f64,
    /// Upper bound for the adaptive step, used once `dt max|f'(u)|` is small.
    pub dt_max: f64,
    pub max_steps: usize,
    pub tol: f64,
    pub rho_hat: Option<f64>,
    /// Defaults to `rho_hat / 10`.
    pub spread_kinetic_floor: Option<f64>,
    pub record_every: usize,
    /// Width of the Gaussian seed used by the global solver.
    pub seed_width: f64,
    pub polish: bool,
    /// Seed of the random part of the probe family behind `rho_hat`.
    pub probe_seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            dt_max: 20.0,
            max_steps: 200_000,
            tol: 1e-6,
            rho_hat: None,
            spread_kinetic_floor: None,
            record_every: 10,
            seed_width: 3.0,
            polish: true,
            probe_seed: DEFAULT_PROBE_SEED,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.dt_max < self.dt {
            return Err(Error::InvalidArgument("dt_max must be at least dt".into()));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "tol must lie in (0, 1e-3], got {}",
                self.tol
            )));
        }
        if self.max_steps == 0 || self.record_every == 0 {
            return Err(Error::InvalidArgument(
                "max_steps and record_every must be positive".into(),
            ));
        }
        if let Some(r) = self.rho_hat {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("rho_hat must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    ConvergedCritical,
    Vanished,
    DriftedOutOfLocalWell,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub energy: f64,
    pub kinetic: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: RealField,
    pub functionals: Functionals,
    pub mu: f64,
    pub residual: f64,
    pub classification: Classification,
    pub steps: usize,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl SolveReport {
    pub fn energy(&self) -> f64 {
        self.functionals.energy
    }

    pub fn mass(&self) -> f64 {
        self.functionals.mass
    }

    pub fn kinetic(&self) -> f64 {
        self.functionals.kinetic
    }

    pub fn converged(&self) -> bool {
        self.classification == Classification::ConvergedCritical
    }
}

/// Assembled `W + dt S`, factorised once per step size.
pub(crate) struct ImplicitOperator {
    pub(crate) dt: f64,
    lu: TridiagonalLu<f64>,
}

impl ImplicitOperator {
    pub(crate) fn new(grid: &RadialGrid, dt: f64) -> Result<Self> {
        let (l, d, u) = grid.stiffness_bands();
        let l: Vec<f64> = l.iter().map(|x| dt * x).collect();
        let u: Vec<f64> = u.iter().map(|x| dt * x).collect();
        let d: Vec<f64> = d
            .iter()
            .zip(grid.weights())
            .map(|(x, w)| w + dt * x)
            .collect();
        Ok(Self {
            dt,
            lu: TridiagonalLu::new(&l, &d, &u)?,
        })
    }

    pub(crate) fn step(&self, u: &RealField, model: &NonlinearityModel) -> Result<RealField> {
        let w = u.grid().weights();
        let mut rhs: Vec<f64> = u
            .values()
            .iter()
            .zip(w)
            .map(|(&x, w)| w * (x + self.dt * model.eval(x)))
            .collect();
        self.lu.solve_in_place(&mut rhs);
        scale_mass(&RealField::from_parts(u.grid().clone(), rhs), u.mass())
    }
}

/// One semi-implicit step. Mass is preserved to rounding.
pub fn flow_step(u: &RealField, model: &NonlinearityModel, dt: f64) -> Result<RealField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if u.mass() <= 0.0 {
        return Err(Error::ZeroMass);
    }
    ImplicitOperator::new(u.grid(), dt)?.step(u, model)
}

/// Step size below which the explicit nonlinear part is well damped.
pub fn stability_bound(u: &RealField, model: &NonlinearityModel) -> f64 {
    let lip = u
        .values()
        .iter()
        .fold(0.0f64, |m, &x| m.max(model.derivative(x).abs()));
    if lip > 0.0 {
        1.0 / lip
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum FlowMode {
    Global { rho: Option<f64> },
    Local { rho: f64 },
}

pub(crate) fn report(
    u: RealField,
    model: &NonlinearityModel,
    classification: Classification,
    steps: usize,
    trajectory: Vec<TrajectoryPoint>,
) -> Result<SolveReport> {
    let f = functionals(&u, model)?;
    let mu = f.multiplier;
    let res = residual(&u, mu, model)?;
    Ok(SolveReport {
        field: u,
        functionals: f,
        mu,
        residual: res,
        classification,
        steps,
        trajectory,
    })
}

pub(crate) fn run_flow(
    seed: &RealField,
    model: &NonlinearityModel,
    mass: f64,
    cfg: &FlowConfig,
    mode: FlowMode,
) -> Result<SolveReport> {
    cfg.validate()?;
    let mut u = scale_mass(seed, mass)?;
    let grid = u.grid().clone();
    let mut f = functionals(&u, model)?;
    let rho = match mode {
        FlowMode::Global { rho } => rho,
        FlowMode::Local { rho } => Some(rho),
    };
    let floor = cfg.spread_kinetic_floor.or(rho.map(|r| 0.1 * r));
    let mut trajectory = vec![TrajectoryPoint {
        step: 0,
        energy: f.energy,
        kinetic: f.kinetic,
        mass: f.mass,
    }];
    let mut op: Option<ImplicitOperator> = None;
    let mut last_polish = 0usize;
    for step in 1..=cfg.max_steps {
        let target = (0.5 * stability_bound(&u, model)).clamp(cfg.dt, cfg.dt_max);
        let mut dt = match &op {
            Some(o) if o.dt <= target && o.dt >= 0.5 * target => o.dt,
            _ => target,
        };
        let (v, fv) = loop {
            if op.as_ref().map(|o| o.dt) != Some(dt) {
                op = Some(ImplicitOperator::new(&grid, dt)?);
            }
            let v = op.as_ref().unwrap().step(&u, model)?;
            let fv = functionals(&v, model)?;
            if fv.energy <= f.energy + 1e-14 * f.energy.abs().max(1.0) || dt <= 1e-3 * cfg.dt {
                break (v, fv);
            }
            dt *= 0.5;
        };
        let decrease = (f.energy - fv.energy).abs() / fv.energy.abs().max(1.0);
        u = v;
        f = fv;
        if step % cfg.record_every == 0 {
            trajectory.push(TrajectoryPoint {
                step,
                energy: f.energy,
                kinetic: f.kinetic,
                mass: f.mass,
            });
        }
        match mode {
            FlowMode::Local { rho } if f.kinetic < rho => {
                return report(
                    u,
                    model,
                    Classification::DriftedOutOfLocalWell,
                    step,
                    trajectory,
                );
            }
            FlowMode::Global { .. } => {
                let below_floor = floor.is_some_and(|fl| f.kinetic < fl);
                // Below rho the energy dominates K/4, so a flow with I < rho/4
                // can never climb back over the barrier: it is spreading.
                let trapped = rho.is_some_and(|r| f.kinetic < r && f.energy < 0.25 * r);
                if below_floor || trapped {
                    return report(u, model, Classification::Vanished, step, trajectory);
                }
            }
            _ => {}
        }
        let scale = u.norm().max(1.0);
        let res = residual(&u, f.multiplier, model)?;
        if decrease < cfg.tol && res < cfg.tol * scale {
            return report(
                u,
                model,
                Classification::ConvergedCritical,
                step,
                trajectory,
            );
        }
        if cfg.polish && res < 1e-2 * scale && step >= last_polish + 50 {
            last_polish = step;
            if let Ok(p) = polish_fixed_mass(&u, mass, model, 1e-12, 40) {
                let fp = functionals(&p.field, model)?;
                let sign_kept = p.field.sign_changes(1e-8) == u.sign_changes(1e-8);
                let lower = fp.energy <= f.energy + 1e-10 * f.energy.abs().max(1.0);
                let in_well = match mode {
                    FlowMode::Local { rho } => fp.kinetic > rho,
                    _ => true,
                };
                if sign_kept && lower && in_well {
                    trajectory.push(TrajectoryPoint {
                        step,
                        energy: fp.energy,
                        kinetic: fp.kinetic,
                        mass: fp.mass,
                    });
                    return report(
                        p.field,
                        model,
                        Classification::ConvergedCritical,
                        step,
                        trajectory,
                    );
                }
            }
        }
    }
    report(
        u,
        model,
        Classification::MaxSteps,
        cfg.max_steps,
        trajectory,
    )
}

pub fn gaussian_seed(grid: &Arc<RadialGrid>, mass: f64, width: f64) -> Result<RealField> {
    let field = RealField::from_fn(grid.clone(), |r| (-0.5 * (r / width).powi(2)).exp())?;
    scale_mass(&field, mass)
}

fn require_existence_hypotheses(model: &NonlinearityModel) -> Result<()> {
    let h = model.check_hypotheses();
    for (name, v) in [("f1", h.f1), ("f2", h.f2), ("f3", h.f3)] {
        if !v.holds() {
            return Err(Error::Hypothesis(format!("({name}) does not hold")));
        }
    }
    Ok(())
}

fn resolve_rho(
    model: &NonlinearityModel,
    mass: f64,
    grid: &Arc<RadialGrid>,
    cfg: &FlowConfig,
) -> Option<f64> {
    cfg.rho_hat
        .or_else(|| estimate_rho_seeded(model, mass, grid, cfg.probe_seed).ok())
}

/// Global minimisation at fixed mass from the configured Gaussian seed.
///
/// A converged critical point with positive energy cannot be the global
/// minimiser (dilating any field to infinity drives `I` to zero), so the solver
/// then follows that spreading direction and reports whichever run ends lower.
pub fn solve_global(
    model: &NonlinearityModel,
    mass: f64,
    grid: &Arc<RadialGrid>,
    cfg: &FlowConfig,
) -> Result<SolveReport> {
    require_existence_hypotheses(model)?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mass must be positive, got {mass}"
        )));
    }
    if grid.dimension() != model.dimension() {
        return Err(Error::GridMismatch(
            "grid and model dimensions differ".into(),
        ));
    }
    let rho = resolve_rho(model, mass, grid, cfg);
    let seed = gaussian_seed(grid, mass, cfg.seed_width)?;
    let first = run_flow(&seed, model, mass, cfg, FlowMode::Global { rho })?;
    if !(first.converged() && first.energy() > 0.0) {
        return Ok(first);
    }
    let k_target = rho.map(|r| 0.25 * r).unwrap_or(1e-2 * first.kinetic());
    let theta = (0.5 * (k_target / first.kinetic()).ln()).clamp(-6.0, 0.0);
    let spread = dilate(&first.field, theta)?;
    let second = run_flow(&spread, model, mass, cfg, FlowMode::Global { rho })?;
    Ok(if second.energy() < first.energy() {
        second
    } else {
        first
    })
}

/// Local minimisation inside the well `{K > rho}` starting from `seed`.
pub fn solve_local(
    model: &NonlinearityModel,
    mass: f64,
    seed: &RealField,
    cfg: &FlowConfig,
) -> Result<SolveReport> {
    require_existence_hypotheses(model)?;
    let rho = cfg
        .rho_hat
        .ok_or_else(|| Error::InvalidArgument("local minimisation needs rho_hat".into()))?;
    let n = model.dimension() as f64;
    let lambda = (0.25f64).min(1.0 / n) * rho;
    let seed = scale_mass(seed, mass)?;
    let fs = functionals(&seed, model)?;
    if !(fs.kinetic > 4.0 * rho && fs.energy < lambda) {
        return Err(Error::Precondition(format!(
            "seed needs K > 4 rho = {} and I < Lambda = {lambda}; got K = {}, I = {}",
            4.0 * rho,
            fs.kinetic,
            fs.energy
        )));
    }
    let out = run_flow(&seed, model, mass, cfg, FlowMode::Local { rho })?;
    if out.converged() {
        if !(out.mu > 0.0) {
            return Err(Error::Invariant(format!(
                "local minimiser has multiplier {}",
                out.mu
            )));
        }
        if out.field.sign_changes(1e-8) != 0 {
            return Err(Error::Invariant("local minimiser changes sign".into()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassProbe {
    pub mass: f64,
    pub below_zero: bool,
    pub classification: Classification,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct MstarEstimate {
    pub m_star: f64,
    pub bracket: (f64, f64),
    /// Flow minimiser at `m_star`.
    pub minimizer: SolveReport,
    pub probes: Vec<MassProbe>,
}

fn mstar_probe(
    model: &NonlinearityModel,
    mass: f64,
    grid: &Arc<RadialGrid>,
    cfg: &FlowConfig,
) -> Result<(MassProbe, SolveReport)> {
    let rho = resolve_rho(model, mass, grid, cfg);
    let seed = gaussian_seed(grid, mass, cfg.seed_width)?;
    let out = run_flow(&seed, model, mass, cfg, FlowMode::Global { rho })?;
    let below_zero = out.converged() && out.energy() < -10.0 * cfg.tol;
    Ok((
        MassProbe {
            mass,
            below_zero,
            classification: out.classification,
            energy: out.energy(),
        },
        out,
    ))
}

/// Bisects on "the flow converges to a state with negative energy". The final
/// estimate interpolates the zero of `I` between the two bracketing branch
/// states when both converged.
pub fn estimate_mstar(
    model: &NonlinearityModel,
    grid: &Arc<RadialGrid>,
    cfg: &FlowConfig,
    bracket: (f64, f64),
) -> Result<MstarEstimate> {
    require_existence_hypotheses(model)?;
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "bad mass bracket ({lo}, {hi})"
        )));
    }
    let mut probes = Vec::new();
    let (p_lo, mut r_lo) = mstar_probe(model, lo, grid, cfg)?;
    let (p_hi, mut r_hi) = mstar_probe(model, hi, grid, cfg)?;
    let straddles = !p_lo.below_zero && p_hi.below_zero;
    probes.push(p_lo);
    probes.push(p_hi);
    if !straddles {
        return Err(Error::NotStraddling(format!(
            "negative-energy minimisers at ({lo}: {}, {hi}: {})",
            probes[0].below_zero, probes[1].below_zero
        )));
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        let (p, r) = mstar_probe(model, mid, grid, cfg)?;
        let below = p.below_zero;
        probes.push(p);
        if below {
            hi = mid;
            r_hi = r;
        } else {
            lo = mid;
            r_lo = r;
        }
    }
    let m_star = if r_lo.converged() && r_hi.converged() && r_lo.energy() > r_hi.energy() {
        let t = r_lo.energy() / (r_lo.energy() - r_hi.energy());
        lo + t.clamp(0.0, 1.0) * (hi - lo)
    } else {
        0.5 * (lo + hi)
    };
    let rho = resolve_rho(model, m_star, grid, cfg);
    let minimizer = run_flow(&r_hi.field, model, m_star, cfg, FlowMode::Global { rho })?;
    if !minimizer.converged() {
        return Err(Error::NoConvergence(format!(
            "flow at m* = {m_star} did not converge"
        )));
    }
    Ok(MstarEstimate {
        m_star,
        bracket: (lo, hi),
        minimizer,
        probes,
    })
}

#[derive(Debug, Clone)]
pub struct MstarstarEstimate {
    pub m_star_star: f64,
    pub bracket: (f64, f64),
    pub rho_hat: f64,
    pub lambda_hat: f64,
}

/// Continuation predicate below `m*`: the rescaled `m*`-minimiser starts under
/// the barrier and the local flow converges to a state with `I < Lambda`.
pub fn local_branch_exists(
    model: &NonlinearityModel,
    mass: f64,
    mstar: &MstarEstimate,
    rho: f64,
    cfg: &FlowConfig,
) -> Result<Option<SolveReport>> {
    let lambda = (0.25f64).min(1.0 / model.dimension() as f64) * rho;
    let local_cfg = FlowConfig {
        rho_hat: Some(rho),
        ..cfg.clone()
    };
    match solve_local(model, mass, &mstar.minimizer.field, &local_cfg) {
        Ok(r) if r.converged() && r.energy() < lambda => Ok(Some(r)),
        Ok(_) | Err(Error::Precondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn estimate_mstarstar(
    model: &NonlinearityModel,
    grid: &Arc<RadialGrid>,
    cfg: &FlowConfig,
    mstar: &MstarEstimate,
) -> Result<MstarstarEstimate> {
    let m_star = mstar.m_star;
    let rho = cfg
        .rho_hat
        .map(Ok)
        .unwrap_or_else(|| estimate_rho_seeded(model, m_star, grid, cfg.probe_seed))?;
    let lambda = (0.25f64).min(1.0 / model.dimension() as f64) * rho;
    let mut hi = m_star;
    if local_branch_exists(model, hi, mstar, rho, cfg)?.is_none() {
        return Err(Error::NoConvergence(
            "no local minimiser below the barrier at m*".into(),
        ));
    }
    let mut lo = 0.5 * m_star;
    while local_branch_exists(model, lo, mstar, rho, cfg)?.is_some() {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-3 * m_star {
            return Err(Error::NoBracket(
                "local branch persists to vanishing mass".into(),
            ));
        }
    }
    while hi - lo > 1e-3 * m_star {
        let mid = 0.5 * (lo + hi);
        if local_branch_exists(model, mid, mstar, rho, cfg)?.is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MstarstarEstimate {
        m_star_star: hi,
        bracket: (lo, hi),
        rho_hat: rho,
        lambda_hat: lambda,
    })
}
