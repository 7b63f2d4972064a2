//! Mountain-pass search on the mass sphere. A path of fields joins a spread
//! state below the kinetic barrier to a compact state beyond it; interior
//! nodes descend with the flow kernel while the path is kept evenly spaced,
//! and the highest node is then polished into a critical point.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    report, solve_global, solve_local, Classification, FlowConfig, ImplicitOperator, MstarEstimate,
    SolveReport,
};
use crate::model::NonlinearityModel;
use crate::newton::polish_fixed_mass;
use crate::radial::{dilate, fmt_num, functionals, scale_mass, RadialGrid, RealField};
use crate::rho::estimate_rho_seeded;
use crate::shooting::{match_mass, Branch, Curve, ShootOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimaxConfig {
    /// Number of path segments; the path has `segments + 1` nodes.
    pub segments: usize,
    pub max_iters: usize,
    /// Upper bound on the descent step of interior nodes.
    pub dt: f64,
    pub redistribute_every: usize,
    /// Stop when the path maximum falls by less than `stall_tol` (relative)
    /// over `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Relative residual targeted by the final Newton polish.
    pub polish_tol: f64,
    pub climb_iters: usize,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        Self {
            segments: 32,
            max_iters: 3000,
            dt: 2.0,
            redistribute_every: 10,
            stall_window: 50,
            stall_tol: 1e-8,
            polish_tol: 1e-10,
            climb_iters: 4000,
        }
    }
}

impl MinimaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segments < 8 {
            return Err(Error::InvalidArgument(format!(
                "path needs at least 8 segments, got {}",
                self.segments
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "minimax dt must be positive, got {}",
                self.dt
            )));
        }
        if self.redistribute_every == 0 || self.stall_window == 0 {
            return Err(Error::InvalidArgument(
                "minimax intervals must be positive".into(),
            ));
        }
        if !(self.polish_tol > 0.0 && self.polish_tol < 1e-5) {
            return Err(Error::InvalidArgument(format!(
                "polish_tol must lie in (0, 1e-5), got {}",
                self.polish_tol
            )));
        }
        Ok(())
    }
}

/// Nodes `gamma[0..=K]` on the mass sphere with frozen endpoints.
#[derive(Debug, Clone)]
pub struct DiscretePath {
    pub mass: f64,
    pub nodes: Vec<RealField>,
    pub rho_hat: f64,
    pub kinetic_start: f64,
    pub kinetic_end: f64,
    pub energy_start: f64,
    pub energy_end: f64,
}

impl DiscretePath {
    pub fn energies(&self, model: &NonlinearityModel) -> Result<Vec<f64>> {
        self.nodes
            .par_iter()
            .map(|u| Ok(functionals(u, model)?.energy))
            .collect()
    }

    pub fn kinetics(&self) -> Vec<f64> {
        self.nodes.iter().map(|u| u.kinetic()).collect()
    }

    /// The three endpoint conditions of the admissible path class, plus the
    /// mass of every node.
    pub fn check_admissible(&self) -> Result<()> {
        let rho = self.rho_hat;
        if !(self.kinetic_start < rho) {
            return Err(Error::Invariant(format!(
                "start kinetic {} not below rho {rho}",
                self.kinetic_start
            )));
        }
        if !(self.kinetic_end > 4.0 * rho) {
            return Err(Error::Invariant(format!(
                "end kinetic {} not above 4 rho {}",
                self.kinetic_end,
                4.0 * rho
            )));
        }
        let top = self.energy_start.max(self.energy_end);
        if !(top < 0.5 * rho) {
            return Err(Error::Invariant(format!(
                "endpoint energy {top} not below rho/2 {}",
                0.5 * rho
            )));
        }
        for (j, u) in self.nodes.iter().enumerate() {
            if (u.mass() / self.mass - 1.0).abs() > 1e-10 {
                return Err(Error::Invariant(format!(
                    "node {j} has mass {} instead of {}",
                    u.mass(),
                    self.mass
                )));
            }
        }
        Ok(())
    }

    /// One row per grid node: `r` then the value of every path node.
    pub fn to_csv(&self) -> String {
        let g = self.nodes[0].grid();
        let mut out = format!(
            "# normwave-path v1 N={} r_max={} n={} nodes={} mass={}\nr",
            g.dimension(),
            fmt_num(g.r_max()),
            g.len(),
            self.nodes.len(),
            fmt_num(self.mass)
        );
        for j in 0..self.nodes.len() {
            out.push_str(&format!(",g{j}"));
        }
        out.push('\n');
        for (i, r) in g.nodes().iter().enumerate() {
            out.push_str(&fmt_num(*r));
            for u in &self.nodes {
                out.push(',');
                out.push_str(&fmt_num(u.values()[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// `u` with its far tail rolled off smoothly between the radius where `|u|`
/// last exceeds `level * max|u|` and 1.5 times that radius.
pub fn taper_tail(u: &RealField, level: f64) -> Result<RealField> {
    let cut = level * u.max_abs();
    let nodes = u.grid().nodes();
    let last = u.values().iter().rposition(|x| x.abs() > cut).unwrap_or(0);
    let r0 = nodes[last].max(u.grid().spacing());
    let r1 = 1.5 * r0;
    let v = nodes
        .iter()
        .zip(u.values())
        .map(|(&r, &x)| {
            let chi = if r <= r0 {
                1.0
            } else if r >= r1 {
                0.0
            } else {
                let s = (r - r0) / (r1 - r0);
                0.5 * (1.0 + (std::f64::consts::PI * s).cos())
            };
            chi * x
        })
        .collect();
    RealField::new(u.grid().clone(), v)
}

/// `gamma[j] = dilate(terminal, lambda (1 - j/K))` with `lambda < 0` spread far
/// enough that the start node has kinetic and potential below `rho/4`.
pub fn build_admissible_path(
    model: &NonlinearityModel,
    mass: f64,
    terminal: &RealField,
    rho_hat: f64,
    segments: usize,
) -> Result<DiscretePath> {
    // Spreading stretches the slowly decaying tail of a minimiser far
    // beyond any practical grid, so it is rolled off first.
    let end = scale_mass(&taper_tail(terminal, 1e-3)?, mass)?;
    let fe = functionals(&end, model)?;
    if !(fe.kinetic > 4.0 * rho_hat && fe.energy < 0.5 * rho_hat) {
        return Err(Error::Precondition(format!(
            "terminal field needs K > {} and I < {}; got K = {}, I = {}",
            4.0 * rho_hat,
            0.5 * rho_hat,
            fe.kinetic,
            fe.energy
        )));
    }
    let mut lambda = (0.5 * (rho_hat / (8.0 * fe.kinetic)).ln()).min(-0.1);
    let start = loop {
        let start = scale_mass(&dilate(&end, lambda)?, mass)?;
        let fs = functionals(&start, model)?;
        if fs.kinetic < 0.25 * rho_hat && fs.potential.abs() < 0.25 * rho_hat {
            break start;
        }
        lambda -= 0.25;
        if lambda < -12.0 {
            return Err(Error::Precondition(format!(
                "no dilation brings the path start under the barrier within r_max = {}; enlarge the grid",
                end.grid().r_max()
            )));
        }
    };
    let mut nodes = Vec::with_capacity(segments + 1);
    nodes.push(start);
    for j in 1..segments {
        let theta = lambda * (1.0 - j as f64 / segments as f64);
        nodes.push(scale_mass(&dilate(&end, theta)?, mass)?);
    }
    nodes.push(end);
    let fs = functionals(&nodes[0], model)?;
    let path = DiscretePath {
        mass,
        nodes,
        rho_hat,
        kinetic_start: fs.kinetic,
        kinetic_end: fe.kinetic,
        energy_start: fs.energy,
        energy_end: fe.energy,
    };
    path.check_admissible()?;
    Ok(path)
}

/// A path node whose kinetic energy lies within `4 rho (1 +- 1/K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierWitness {
    /// Position along the path in units of segments.
    pub position: f64,
    pub kinetic: f64,
    pub energy: f64,
}

/// Bisects along the chord between the nodes straddling `K = 4 rho`.
pub fn barrier_witness(path: &DiscretePath, model: &NonlinearityModel) -> Result<BarrierWitness> {
    let target = 4.0 * path.rho_hat;
    let band = target / path.nodes.len().saturating_sub(1).max(1) as f64;
    let ks = path.kinetics();
    let j = ks
        .windows(2)
        .position(|w| (w[0] - target) * (w[1] - target) <= 0.0)
        .ok_or_else(|| Error::Invariant("path never crosses the kinetic barrier".into()))?;
    let (a, b) = (&path.nodes[j], &path.nodes[j + 1]);
    let at = |t: f64| -> Result<RealField> {
        let v = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect();
        scale_mass(&RealField::new(a.grid().clone(), v)?, path.mass)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let rising = ks[j + 1] > ks[j];
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let u = at(mid)?;
        let k = u.kinetic();
        if (k - target).abs() <= band {
            return Ok(BarrierWitness {
                position: j as f64 + mid,
                kinetic: k,
                energy: functionals(&u, model)?.energy,
            });
        }
        if (k < target) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(
        "barrier witness bisection did not converge".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingCheck {
    pub omega: f64,
    pub energy: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone)]
pub struct MountainPassReport {
    pub mass: f64,
    pub rho_hat: f64,
    /// Path maximum after relaxation, an upper estimate of the level.
    pub level: f64,
    pub argmax: usize,
    pub candidate: RealField,
    /// Polished saddle point.
    pub saddle: SolveReport,
    /// Reference minimiser at the same mass (global or local).
    pub minimizer: Option<SolveReport>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub barrier: BarrierWitness,
    pub shooting: Option<ShootingCheck>,
    /// The relaxed path.
    pub path: DiscretePath,
}

impl MountainPassReport {
    pub fn level_bound_holds(&self) -> bool {
        self.level >= self.rho_hat - 1e-8
    }
}

fn difference(a: &RealField, b: &RealField) -> RealField {
    let v = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .collect();
    RealField::from_parts(a.grid().clone(), v)
}

/// Unit tangent at `u` (weighted norm), orthogonal to `u` itself.
fn unit_tangent(prev: &RealField, u: &RealField, next: &RealField) -> Option<RealField> {
    let t = difference(next, prev);
    let c = t.inner(u) / u.mass();
    let t = difference(&t, &u.scaled(c));
    let n = t.norm();
    (n > 0.0).then(|| t.scaled(1.0 / n))
}

/// Flow step of one interior node with the component along the path
/// removed, so nodes move towards the valley floor without sliding along the
/// path. Halves the step until the energy does not increase.
fn node_step(
    prev: &RealField,
    u: &RealField,
    next: &RealField,
    model: &NonlinearityModel,
    dt_cap: f64,
) -> Result<RealField> {
    let e0 = functionals(u, model)?.energy;
    let tau = unit_tangent(prev, u, next);
    let mut dt = (0.5 * crate::flow::stability_bound(u, model)).min(dt_cap);
    loop {
        let v = ImplicitOperator::new(u.grid(), dt)?.step(u, model)?;
        let mut s = difference(&v, u);
        if let Some(t) = &tau {
            s = difference(&s, &t.scaled(s.inner(t)));
        }
        let moved: Vec<f64> = u
            .values()
            .iter()
            .zip(s.values())
            .map(|(a, b)| a + b)
            .collect();
        let w = scale_mass(&RealField::from_parts(u.grid().clone(), moved), u.mass())?;
        if functionals(&w, model)?.energy <= e0 {
            return Ok(w);
        }
        if dt < 1e-6 * dt_cap {
            return Ok(u.clone());
        }
        dt *= 0.5;
    }
}

/// Moves interior nodes to equal spacing in the kinetic seminorm.
fn redistribute(nodes: &[RealField], mass: f64) -> Result<Vec<RealField>> {
    let mut s = vec![0.0];
    for w in nodes.windows(2) {
        let d: Vec<f64> = w[1]
            .values()
            .iter()
            .zip(w[0].values())
            .map(|(a, b)| a - b)
            .collect();
        let seg = RealField::new(w[0].grid().clone(), d)?.kinetic().sqrt();
        s.push(s.last().unwrap() + seg);
    }
    let total = *s.last().unwrap();
    let k = nodes.len() - 1;
    let mut out = Vec::with_capacity(nodes.len());
    out.push(nodes[0].clone());
    let mut i = 0;
    for j in 1..k {
        let target = total * j as f64 / k as f64;
        while i + 1 < k && s[i + 1] < target {
            i += 1;
        }
        let span = s[i + 1] - s[i];
        let t = if span > 0.0 {
            (target - s[i]) / span
        } else {
            0.0
        };
        let v = nodes[i]
            .values()
            .iter()
            .zip(nodes[i + 1].values())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        out.push(scale_mass(
            &RealField::new(nodes[0].grid().clone(), v)?,
            mass,
        )?);
    }
    out.push(nodes[k].clone());
    Ok(out)
}

fn max_of(e: &[f64]) -> (usize, f64) {
    e.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |(j, m), (i, &x)| if x > m { (i, x) } else { (j, m) },
    )
}

/// Climbing-image iteration: descent with the component along the path
/// tangent reversed, driving the node up to the saddle.
fn climb(
    x: &RealField,
    tangent: &RealField,
    mass: f64,
    model: &NonlinearityModel,
    dt_cap: f64,
    iters: usize,
    tol: f64,
) -> Result<RealField> {
    let dt = (0.5 * crate::flow::stability_bound(x, model)).min(dt_cap);
    let op = ImplicitOperator::new(x.grid(), dt)?;
    let mut x = x.clone();
    let mut tau = tangent.clone();
    for _ in 0..iters {
        let f = functionals(&x, model)?;
        if crate::radial::residual(&x, f.multiplier, model)? <= tol * x.norm() {
            break;
        }
        let v = op.step(&x, model)?;
        let c = tau.inner(&x) / x.mass();
        let t: Vec<f64> = tau
            .values()
            .iter()
            .zip(x.values())
            .map(|(a, b)| a - c * b)
            .collect();
        let t = RealField::new(x.grid().clone(), t)?;
        let tn = t.norm();
        if tn == 0.0 {
            break;
        }
        tau = t.scaled(1.0 / tn);
        let s: Vec<f64> = v
            .values()
            .iter()
            .zip(x.values())
            .map(|(a, b)| a - b)
            .collect();
        let s = RealField::new(x.grid().clone(), s)?;
        let along = s.inner(&tau);
        let next: Vec<f64> = x
            .values()
            .iter()
            .zip(s.values())
            .zip(tau.values())
            .map(|((a, ds), t)| a + ds - 2.0 * along * t)
            .collect();
        x = scale_mass(&RealField::new(x.grid().clone(), next)?, mass)?;
    }
    Ok(x)
}

fn polish(
    seed: &RealField,
    tangent: &RealField,
    mass: f64,
    model: &NonlinearityModel,
    cfg: &MinimaxConfig,
    steps: usize,
) -> Result<SolveReport> {
    let accept = |p: &crate::newton::Polished| -> Result<bool> {
        let f = functionals(&p.field, model)?;
        Ok(p.mu > 0.0 && f.pohozaev.abs() <= 1e-6 * f.kinetic && p.field.sign_changes(1e-8) == 0)
    };
    // The relaxation history lives in the report trace.
    let trajectory = Vec::new;
    if let Ok(p) = polish_fixed_mass(seed, mass, model, cfg.polish_tol, 60) {
        if accept(&p)? {
            return report(
                p.field,
                model,
                Classification::ConvergedCritical,
                steps,
                trajectory(),
            );
        }
    }
    let climbed = climb(seed, tangent, mass, model, cfg.dt, cfg.climb_iters, 1e-3)?;
    match polish_fixed_mass(&climbed, mass, model, cfg.polish_tol, 60) {
        Ok(p) if accept(&p)? => report(
            p.field,
            model,
            Classification::ConvergedCritical,
            steps,
            trajectory(),
        ),
        _ => report(
            climbed,
            model,
            Classification::MaxSteps,
            steps,
            trajectory(),
        ),
    }
}

/// Relaxes the interior of `path` and polishes its highest node.
pub fn relax_path(
    path: DiscretePath,
    model: &NonlinearityModel,
    cfg: &MinimaxConfig,
) -> Result<MountainPassReport> {
    cfg.validate()?;
    path.check_admissible()?;
    let mass = path.mass;
    let k = path.nodes.len() - 1;
    let all_energies = |nodes: &[RealField]| -> Result<Vec<f64>> {
        nodes
            .par_iter()
            .map(|u| Ok(functionals(u, model)?.energy))
            .collect()
    };
    // Start from an evenly spaced path; afterwards every block of descent
    // iterations ends with a redistribution, and a block whose redistributed
    // maximum exceeds its last descent maximum (a gap opened at the ridge)
    // is rolled back and retried with half the step.
    let mut nodes = redistribute(&path.nodes, mass)?;
    let mut energies = all_energies(&nodes)?;
    let mut trace = vec![max_of(&energies).1];
    let mut dt = cfg.dt;
    let mut iterations = 0;
    'outer: while iterations < cfg.max_iters {
        let checkpoint = (nodes.clone(), energies.clone(), trace.len());
        let mut block = Vec::with_capacity(cfg.redistribute_every);
        for _ in 0..cfg.redistribute_every {
            let stepped: Vec<RealField> = (1..k)
                .into_par_iter()
                .map(|j| node_step(&nodes[j - 1], &nodes[j], &nodes[j + 1], model, dt))
                .collect::<Result<_>>()?;
            for (slot, v) in nodes[1..k].iter_mut().zip(stepped) {
                *slot = v;
            }
            energies = all_energies(&nodes)?;
            block.push(max_of(&energies).1);
        }
        let moved = redistribute(&nodes, mass)?;
        let e = all_energies(&moved)?;
        let top = max_of(&e).1;
        let last = *block.last().unwrap();
        if top > last + 1e-10 * last.abs().max(1.0) {
            (nodes, energies, _) = checkpoint;
            dt *= 0.5;
            if dt < 1e-8 * cfg.dt {
                break;
            }
            continue;
        }
        nodes = moved;
        energies = e;
        *block.last_mut().unwrap() = top;
        for m in block {
            iterations += 1;
            let prev = *trace.last().unwrap();
            if m > prev + 1e-10 * prev.abs().max(1.0) {
                return Err(Error::Invariant(format!(
                    "path maximum rose from {prev} to {m}"
                )));
            }
            trace.push(m);
            if trace.len() > cfg.stall_window {
                let old = trace[trace.len() - 1 - cfg.stall_window];
                if (old - m) <= cfg.stall_tol * m.abs().max(1e-300) {
                    break 'outer;
                }
            }
        }
        dt = (2.0 * dt).min(cfg.dt);
    }
    let relaxed = DiscretePath { nodes, ..path };
    relaxed.check_admissible()?;
    let (argmax, level) = max_of(&energies);
    let candidate = relaxed.nodes[argmax].clone();
    let (lo, hi) = (argmax.saturating_sub(1), (argmax + 1).min(k));
    let tangent: Vec<f64> = relaxed.nodes[hi]
        .values()
        .iter()
        .zip(relaxed.nodes[lo].values())
        .map(|(a, b)| a - b)
        .collect();
    let tangent = RealField::new(candidate.grid().clone(), tangent)?;
    let saddle = polish(&candidate, &tangent, mass, model, cfg, iterations)?;
    let barrier = barrier_witness(&relaxed, model)?;
    Ok(MountainPassReport {
        mass,
        rho_hat: relaxed.rho_hat,
        level,
        argmax,
        candidate,
        saddle,
        minimizer: None,
        trace,
        iterations,
        barrier,
        shooting: None,
        path: relaxed,
    })
}

/// Shooting data used to cross-check the saddle at equal mass.
pub struct ShootingReference<'a> {
    pub curve: &'a Curve,
    pub grid: &'a Arc<RadialGrid>,
    pub opts: &'a ShootOptions,
}

/// Terminal field, barrier surrogate and reference minimiser at `mass`:
/// the global minimiser when `mass >= m*`, otherwise the rescaled
/// `m*`-minimiser and the local minimiser continued from it.
pub fn path_endpoint(
    model: &NonlinearityModel,
    mass: f64,
    grid: &Arc<RadialGrid>,
    flow: &FlowConfig,
    mstar: &MstarEstimate,
    m_star_star: f64,
) -> Result<(RealField, f64, SolveReport)> {
    if !(mass > m_star_star) {
        return Err(Error::NoBracket(format!(
            "mass {mass} is not above m** = {m_star_star}"
        )));
    }
    let on_grid = |u: &RealField| -> Result<RealField> {
        if u.grid().same_as(grid) {
            Ok(u.clone())
        } else {
            crate::radial::resample(u, grid.clone())
        }
    };
    if mass >= mstar.m_star {
        let rho = estimate_rho_seeded(model, mass, grid, flow.probe_seed)?;
        let cfg = FlowConfig {
            rho_hat: Some(rho),
            ..flow.clone()
        };
        let global = solve_global(model, mass, grid, &cfg)?;
        if global.converged() && global.energy() <= 0.0 {
            return Ok((global.field.clone(), rho, global));
        }
        let seed = scale_mass(&on_grid(&mstar.minimizer.field)?, mass)?;
        let again = crate::flow::run_flow(
            &seed,
            model,
            mass,
            &cfg,
            crate::flow::FlowMode::Global { rho: Some(rho) },
        )?;
        if again.converged() {
            return Ok((again.field.clone(), rho, again));
        }
        return Err(Error::NoConvergence(format!(
            "no global minimiser at mass {mass}"
        )));
    }
    let rho = estimate_rho_seeded(model, mstar.m_star, grid, flow.probe_seed)?;
    let seed = scale_mass(&on_grid(&mstar.minimizer.field)?, mass)?;
    let cfg = FlowConfig {
        rho_hat: Some(rho),
        ..flow.clone()
    };
    let local = solve_local(model, mass, &seed, &cfg)?;
    Ok((seed, rho, local))
}

pub fn saddle_report(
    model: &NonlinearityModel,
    mass: f64,
    grid: &Arc<RadialGrid>,
    flow: &FlowConfig,
    cfg: &MinimaxConfig,
    mstar: &MstarEstimate,
    m_star_star: f64,
    shooting: Option<ShootingReference>,
) -> Result<MountainPassReport> {
    let (terminal, rho, minimizer) = path_endpoint(model, mass, grid, flow, mstar, m_star_star)?;
    let path = build_admissible_path(model, mass, &terminal, rho, cfg.segments)?;
    let mut out = relax_path(path, model, cfg)?;
    out.minimizer = Some(minimizer);
    // A curve that does not reach `mass` leaves the cross-check empty.
    if let Some(s) = shooting {
        match match_mass(model, mass, Branch::LowOmega, s.curve, s.grid, s.opts) {
            Ok(hit) => {
                let e = out.saddle.energy();
                out.shooting = Some(ShootingCheck {
                    omega: hit.omega,
                    energy: hit.energy,
                    relative_difference: (e - hit.energy).abs()
                        / hit.energy.abs().max(f64::MIN_POSITIVE),
                });
            }
            Err(Error::NoBracket(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
