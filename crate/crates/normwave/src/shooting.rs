//! Shooting for radial solutions of `-u'' - (N-1)/r u' + omega u = f(u)` at
//! fixed frequency, and continuation of the ground-state branch in `omega`.
//!
//! A shot from `u(0) = u0` overshoots when it crosses zero once too often and
//! undershoots when it turns back before reaching zero. Bisection between the
//! two isolates the decaying solution; its far field is replaced by the exact
//! linear tail `r^{-nu} K_nu(sqrt(omega) r)`, `nu = N/2 - 1`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NonlinearityModel;
use crate::newton::polish_fixed_frequency;
use crate::ode::{integrate, Control, State, Tolerances};
use crate::radial::{fmt_num, sphere_area, RadialGrid, RealField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitKind {
    Decayed,
    Diverged,
    Oscillating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot {
    pub u0: f64,
    pub exit: ExitKind,
    pub nodes: usize,
    pub r_exit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootOptions {
    pub scan_probes: usize,
    pub u0_min: f64,
    pub u0_max: f64,
    /// Relative width at which bisection stops.
    pub rel_width: f64,
    /// Shots are integrated up to this multiple of the grid radius.
    pub reach: f64,
    /// Maximum relative log-derivative mismatch accepted at the tail splice.
    pub match_tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            scan_probes: 400,
            u0_min: 1e-3,
            u0_max: 10.0,
            rel_width: 1e-12,
            reach: 4.0,
            match_tol: 1e-2,
        }
    }
}

impl ShootOptions {
    pub fn validate(&self) -> Result<()> {
        if self.scan_probes < 8 {
            return Err(Error::InvalidArgument(format!(
                "scan_probes must be at least 8, got {}",
                self.scan_probes
            )));
        }
        if !(self.u0_min > 0.0 && self.u0_max > self.u0_min && self.u0_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude range ({}, {}) is not a positive interval",
                self.u0_min, self.u0_max
            )));
        }
        if !(self.rel_width > 0.0 && self.rel_width < 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "rel_width must lie in (0, 1e-3), got {}",
                self.rel_width
            )));
        }
        if !(self.reach >= 1.0 && self.reach.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reach must be at least 1, got {}",
                self.reach
            )));
        }
        if !(self.match_tol > 0.0 && self.match_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "match_tol must lie in (0, 1), got {}",
                self.match_tol
            )));
        }
        Ok(())
    }
}

/// `e^x K_nu(x)` from `int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt`.
pub fn scaled_bessel_k(nu: f64, x: f64) -> f64 {
    let dt: f64 = 0.02;
    let mut sum = 0.5;
    let mut t: f64 = dt;
    loop {
        let term = (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        t += dt;
    }
    sum * dt
}

/// Decaying solution of the linearised equation, `r^{-nu} K_nu(kappa r)`.
#[derive(Debug, Clone, Copy)]
struct LinearTail {
    nu: f64,
    kappa: f64,
}

impl LinearTail {
    fn new(dimension: usize, omega: f64) -> Self {
        Self {
            nu: 0.5 * dimension as f64 - 1.0,
            kappa: omega.sqrt(),
        }
    }

    /// `T(r) / T(r0)`.
    fn ratio(&self, r: f64, r0: f64) -> f64 {
        let (x, x0) = (self.kappa * r, self.kappa * r0);
        (r / r0).powf(-self.nu) * scaled_bessel_k(self.nu, x) / scaled_bessel_k(self.nu, x0)
            * (x0 - x).exp()
    }

    /// `T'(r) / T(r)`.
    fn log_derivative(&self, r: f64) -> f64 {
        let x = self.kappa * r;
        -2.0 * self.nu / r
            - self.kappa * scaled_bessel_k(self.nu - 1.0, x) / scaled_bessel_k(self.nu, x)
    }
}

/// Initial data for a shot. `Plateau` starts just below an unstable
/// equilibrium `ue` with `u(0) = ue - delta`, where `delta` may be far below
/// the resolution of `ue` in floating point: the shot is seeded at the radius
/// where the linearised deviation `delta phi(r)` becomes resolvable.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Start {
    Origin { u0: f64 },
    Plateau { ue: f64, lambda: f64, delta: f64 },
}

impl Start {
    fn u0(&self) -> f64 {
        match *self {
            Start::Origin { u0 } => u0,
            Start::Plateau { ue, delta, .. } => ue - delta,
        }
    }
}

/// `phi(r) = Gamma(nu+1) (2/(lambda r))^nu I_nu(lambda r)` and `phi'(r)`:
/// the regular solution of `phi'' + (N-1)/r phi' = lambda^2 phi`, `phi(0) = 1`.
fn growth_profile(nu: f64, lambda: f64, r: f64) -> (f64, f64) {
    let x = lambda * r;
    let q = 0.25 * x * x;
    let (mut term, mut sum, mut dsum) = (1.0f64, 1.0f64, 0.0f64);
    let mut k = 1.0;
    loop {
        term *= q / (k * (nu + k));
        sum += term;
        dsum += k * term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    let deriv = if x > 0.0 {
        2.0 * lambda * dsum / x
    } else {
        0.0
    };
    (sum, deriv)
}

struct Ivp<'a> {
    model: &'a NonlinearityModel,
    omega: f64,
    dim: f64,
    sigma: f64,
}

impl<'a> Ivp<'a> {
    fn new(model: &'a NonlinearityModel, omega: f64) -> Self {
        let n = model.dimension();
        Self {
            model,
            omega,
            dim: n as f64,
            sigma: sphere_area(n),
        }
    }

    /// `(u, u', mass, kinetic, int F, int f(u) u)` accumulated from the origin.
    fn rhs(&self, r: f64, y: &State) -> State {
        let (u, v) = (y[0], y[1]);
        let fu = self.model.eval(u);
        let jac = self.sigma * r.powi(self.dim as i32 - 1);
        [
            v,
            -(self.dim - 1.0) / r * v + self.omega * u - fu,
            jac * u * u,
            jac * v * v,
            jac * self.model.primitive(u),
            jac * fu * u,
        ]
    }

    fn start(&self, start: Start) -> (f64, State) {
        match start {
            Start::Origin { u0 } => self.origin_start(u0),
            Start::Plateau { ue, lambda, delta } => self.plateau_start(ue, lambda, delta),
        }
    }

    /// Value and slope below the seeding radius of a plateau start.
    fn plateau_value(&self, ue: f64, lambda: f64, delta: f64, r: f64) -> (f64, f64) {
        let (phi, dphi) = growth_profile(0.5 * self.dim - 1.0, lambda, r);
        (ue - delta * phi, -delta * dphi)
    }

    fn plateau_seed_radius(&self, ue: f64, lambda: f64, delta: f64) -> f64 {
        let target = 1e-8 * ue.abs();
        if delta >= target {
            return 1e-4 / (1.0 + lambda);
        }
        let nu = 0.5 * self.dim - 1.0;
        let (mut lo, mut hi) = (0.0f64, 1.0 / lambda);
        while delta * growth_profile(nu, lambda, hi).0 < target {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if delta * growth_profile(nu, lambda, mid).0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn plateau_start(&self, ue: f64, lambda: f64, delta: f64) -> (f64, State) {
        let rs = self.plateau_seed_radius(ue, lambda, delta);
        let (u, v) = self.plateau_value(ue, lambda, delta, rs);
        let q = simpson(
            |r| {
                let (u, v) = self.plateau_value(ue, lambda, delta, r);
                let jac = self.sigma * r.powi(self.dim as i32 - 1);
                let fu = self.model.eval(u);
                [
                    jac * u * u,
                    jac * v * v,
                    jac * self.model.primitive(u),
                    jac * fu * u,
                ]
            },
            0.0,
            rs,
            400,
        );
        (rs, [u, v, q[0], q[1], q[2], q[3]])
    }

    fn origin_start(&self, u0: f64) -> (f64, State) {
        let a = (self.omega * u0 - self.model.eval(u0)) / (2.0 * self.dim);
        let r0 = 1e-4 / (1.0 + self.omega.sqrt());
        let u = u0 + a * r0 * r0;
        let v = 2.0 * a * r0;
        let vol = self.sigma * r0.powi(self.dim as i32) / self.dim;
        (
            r0,
            [
                u,
                v,
                vol * u0 * u0,
                0.0,
                vol * self.model.primitive(u0),
                vol * self.model.eval(u0) * u0,
            ],
        )
    }

    /// Integrates one shot and classifies it. Stops after `node_budget + 1`
    /// nodes, at the first turn back, on divergence, or at `r_end`.
    fn shoot(
        &self,
        start: Start,
        r_end: f64,
        node_budget: usize,
        rtol: f64,
        mut record: Option<&mut Vec<(f64, State)>>,
    ) -> Result<Shot> {
        let u0 = start.u0();
        let (r0, y0) = self.start(start);
        let cap = 10.0 * u0.abs().max(1.0);
        let outward = u0 * y0[1] > 0.0;
        let mut nodes = 0usize;
        let mut extrema = 0usize;
        let mut exit = None;
        if let Some(rec) = record.as_deref_mut() {
            rec.clear();
            rec.push((r0, y0));
        }
        let tol = Tolerances {
            rtol,
            atol: 1e-15 * u0.abs().max(1e-300),
            controlled: 2,
            h_max: 0.25,
        };
        let (r_last, y_last) = integrate(
            |r, y| self.rhs(r, y),
            r0,
            y0,
            r_end,
            1e-3,
            tol,
            |_, yp, r, y| {
                if let Some(rec) = record.as_deref_mut() {
                    rec.push((r, *y));
                }
                if !y[0].is_finite() || y[0].abs() > cap {
                    exit = Some(ExitKind::Diverged);
                    return Control::Stop;
                }
                if yp[0] * y[0] < 0.0 || (y[0] == 0.0 && yp[0] != 0.0) {
                    nodes += 1;
                    if nodes > node_budget {
                        exit = Some(ExitKind::Oscillating);
                        return Control::Stop;
                    }
                }
                if yp[1] * y[1] < 0.0 {
                    extrema += 1;
                    // A solution heading for zero has exactly one extremum per
                    // lobe; an extra one means it turned back. Starting outward,
                    // the first extremum already shows bounded motion.
                    if extrema > nodes || (outward && extrema >= 1) {
                        exit = Some(ExitKind::Oscillating);
                        return Control::Stop;
                    }
                }
                Control::Continue
            },
        )?;
        let exit = exit.unwrap_or(if y_last[0].abs() <= 1e-8 * u0.abs() {
            ExitKind::Decayed
        } else {
            ExitKind::Oscillating
        });
        Ok(Shot {
            u0,
            exit,
            nodes,
            r_exit: r_last,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ShotClass {
    Under,
    Over,
    Decayed,
    Diverged,
    Other,
}

fn classify(shot: &Shot, k: usize) -> ShotClass {
    if shot.nodes > k {
        ShotClass::Over
    } else if shot.exit == ExitKind::Diverged {
        ShotClass::Diverged
    } else if shot.nodes < k {
        ShotClass::Other
    } else if shot.exit == ExitKind::Decayed {
        ShotClass::Decayed
    } else {
        ShotClass::Under
    }
}

/// Integrates one shot from `u0` over `[0, reach * r_max]` and samples the
/// trajectory onto the grid (zero beyond the exit radius).
pub fn shoot_once(
    model: &NonlinearityModel,
    omega: f64,
    u0: f64,
    grid: &Arc<RadialGrid>,
) -> Result<(Shot, RealField)> {
    check_inputs(model, omega, grid)?;
    let ivp = Ivp::new(model, omega);
    let mut rec = Vec::new();
    let shot = ivp.shoot(
        Start::Origin { u0 },
        grid.r_max(),
        usize::MAX - 1,
        1e-10,
        Some(&mut rec),
    )?;
    let first = rec[0].1[0];
    let profile = sample_trajectory(&rec, grid, |_| first, |_| 0.0);
    Ok((shot, profile))
}

fn check_inputs(model: &NonlinearityModel, omega: f64, grid: &Arc<RadialGrid>) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "omega must be positive, got {omega}"
        )));
    }
    if grid.dimension() != model.dimension() {
        return Err(Error::GridMismatch(
            "grid and model dimensions differ".into(),
        ));
    }
    Ok(())
}

/// Cubic Hermite interpolation of recorded `(r, u, u')` onto the grid nodes;
/// `before` and `beyond` supply values outside the recorded range.
fn sample_trajectory(
    rec: &[(f64, State)],
    grid: &Arc<RadialGrid>,
    before: impl Fn(f64) -> f64,
    beyond: impl Fn(f64) -> f64,
) -> RealField {
    let r_last = rec.last().map(|s| s.0).unwrap_or(0.0);
    let mut j = 0usize;
    let vals = grid
        .nodes()
        .iter()
        .map(|&r| {
            if r > r_last {
                return beyond(r);
            }
            if r <= rec[0].0 {
                return before(r);
            }
            while rec[j + 1].0 < r {
                j += 1;
            }
            let (x0, y0) = (rec[j].0, &rec[j].1);
            let (x1, y1) = (rec[j + 1].0, &rec[j + 1].1);
            let h = x1 - x0;
            let s = (r - x0) / h;
            let (s2, s3) = (s * s, s * s * s);
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0[0]
                + (s3 - 2.0 * s2 + s) * h * y0[1]
                + (-2.0 * s3 + 3.0 * s2) * y1[0]
                + (s3 - s2) * h * y1[1]
        })
        .collect();
    RealField::from_parts(grid.clone(), vals)
}

/// A decaying solution at fixed frequency. Scalars are continuum integrals
/// (quadrature along the shot plus the analytic tail); `profile` is the
/// solution of the discrete equation on the grid.
#[derive(Debug, Clone)]
pub struct ShootResult {
    pub omega: f64,
    pub u0: f64,
    pub nodes: usize,
    pub exit: ExitKind,
    pub mass: f64,
    pub kinetic: f64,
    pub energy: f64,
    pub action: f64,
    pub pohozaev: f64,
    pub profile: RealField,
    /// Weighted norm of the discrete residual of `profile`.
    pub residual: f64,
    pub r_match: f64,
    pub match_mismatch: f64,
    /// Undershoot/overshoot pair that isolated `u0`.
    pub bracket: (f64, f64),
    /// `(ue, delta)` when `u0 = ue - delta` sits closer to an unstable
    /// equilibrium than floating point resolves.
    pub plateau: Option<(f64, f64)>,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

/// Parameter along which shots are scanned and bisected: the amplitude
/// `u0`, or `ln delta` below an unstable equilibrium (`u0 = ue - delta`).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    Amplitude,
    Plateau { ue: f64, lambda: f64 },
}

impl Axis {
    fn start(&self, p: f64) -> Start {
        match *self {
            Axis::Amplitude => Start::Origin { u0: p },
            Axis::Plateau { ue, lambda } => Start::Plateau {
                ue,
                lambda,
                delta: p.exp(),
            },
        }
    }

    /// Bisection stops at `|a - b| <= rel_width * scale`.
    fn scale(&self, p: f64) -> f64 {
        match self {
            Axis::Amplitude => p.abs(),
            Axis::Plateau { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bracket {
    axis: Axis,
    a: f64,
    b: f64,
}

/// Isolated shooting parameter: the undershooting and overshooting ends.
#[derive(Debug, Clone, Copy)]
struct Isolated {
    axis: Axis,
    under: f64,
    over: f64,
}

struct Searcher<'a> {
    ivp: Ivp<'a>,
    k: usize,
    r_end: f64,
}

impl Searcher<'_> {
    fn class_of(&self, start: Start, rtol: f64) -> Result<ShotClass> {
        Ok(classify(
            &self.ivp.shoot(start, self.r_end, self.k, rtol, None)?,
            self.k,
        ))
    }

    fn scan(&self, axis: Axis, probes: &[f64]) -> Result<Vec<Bracket>> {
        let classes = probes
            .iter()
            .map(|&p| self.class_of(axis.start(p), 1e-10))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for i in 0..probes.len().saturating_sub(1) {
            let (a, b) = (probes[i], probes[i + 1]);
            use ShotClass::*;
            match (classes[i], classes[i + 1]) {
                (Decayed, _) => out.push(Bracket { axis, a, b: a }),
                (Under, Over) | (Over, Under) => out.push(Bracket { axis, a, b }),
                (Under, Diverged) | (Diverged, Under) if axis == Axis::Amplitude => {
                    let (u, d) = if classes[i] == Under { (a, b) } else { (b, a) };
                    out.extend(self.hidden_window(u, d)?);
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Adjacent under/over pairs in an amplitude scan, plus over-windows
    /// hidden between an undershoot and a divergent shot.
    fn brackets(&self, probes: &[f64]) -> Result<Vec<Bracket>> {
        self.scan(Axis::Amplitude, probes)
    }

    /// Bisects an undershoot/divergence boundary. A narrow overshoot window
    /// usually sits there; when it is thinner than the spacing of doubles the
    /// boundary is an unstable equilibrium and the search continues in
    /// `ln delta` below it.
    fn hidden_window(&self, mut u: f64, mut d: f64) -> Result<Option<Bracket>> {
        let axis = Axis::Amplitude;
        loop {
            let mid = 0.5 * (u + d);
            if mid == u || mid == d {
                break;
            }
            match self.class_of(axis.start(mid), 1e-10)? {
                ShotClass::Under => u = mid,
                ShotClass::Diverged => d = mid,
                ShotClass::Over => return Ok(Some(Bracket { axis, a: u, b: mid })),
                ShotClass::Decayed => {
                    return Ok(Some(Bracket {
                        axis,
                        a: mid,
                        b: mid,
                    }))
                }
                ShotClass::Other => return Ok(None),
            }
        }
        let Some((ue, lambda)) = self.unstable_equilibrium(u, d) else {
            return Ok(None);
        };
        let plateau = Axis::Plateau { ue, lambda };
        // Decreasing delta means increasing u0, matching the amplitude scan.
        let hi = (1e-6 * ue.abs()).ln();
        let lo = (1e-60 * ue.abs()).ln();
        let probes: Vec<f64> = (0..=120)
            .map(|i| hi + (lo - hi) * i as f64 / 120.0)
            .collect();
        Ok(self.scan(plateau, &probes)?.into_iter().next())
    }

    /// Root of `omega u - f(u)` near `[u, d]` with positive slope.
    fn unstable_equilibrium(&self, u: f64, d: f64) -> Option<(f64, f64)> {
        let model = self.ivp.model;
        let omega = self.ivp.omega;
        let g = |x: f64| omega * x - model.eval(x);
        let dg = |x: f64| omega - model.derivative(x);
        let mut x = 0.5 * (u + d);
        for _ in 0..50 {
            let step = g(x) / dg(x);
            if !step.is_finite() {
                return None;
            }
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        let slope = dg(x);
        let close = (x - u).abs() <= 1e-6 * u.abs().max(1e-300);
        (slope > 0.0 && close && x.is_finite()).then(|| (x, slope.sqrt()))
    }

    /// Profiles with a long plateau are sensitive far beyond the resolution
    /// of `u0`; continue in `ln delta` when `u0` sits just below an unstable
    /// equilibrium.
    fn refine_near_plateau(&self, iso: Isolated, rel_width: f64) -> Result<Isolated> {
        if iso.axis != Axis::Amplitude || iso.under == iso.over {
            return Ok(iso);
        }
        let Some((ue, lambda)) = self.unstable_equilibrium(iso.under, iso.over) else {
            return Ok(iso);
        };
        if ue <= iso.under.max(iso.over) {
            return Ok(iso);
        }
        let axis = Axis::Plateau { ue, lambda };
        let bracket = Bracket {
            axis,
            a: (ue - iso.under).ln(),
            b: (ue - iso.over).ln(),
        };
        match self.bisect(bracket, rel_width) {
            Ok(refined) => Ok(refined),
            Err(Error::NoBracket(_)) => Ok(iso),
            Err(e) => Err(e),
        }
    }

    /// Bisects until `|under - over| <= rel_width * scale`.
    fn bisect(&self, bracket: Bracket, rel_width: f64) -> Result<Isolated> {
        let Bracket { axis, a, b } = bracket;
        if a == b {
            return Ok(Isolated {
                axis,
                under: a,
                over: a,
            });
        }
        let ca = self.class_of(axis.start(a), 1e-12)?;
        let cb = self.class_of(axis.start(b), 1e-12)?;
        let (mut under, mut over) = match (ca, cb) {
            (ShotClass::Under, ShotClass::Over) => (a, b),
            (ShotClass::Over, ShotClass::Under) => (b, a),
            (ShotClass::Decayed, _) => {
                return Ok(Isolated {
                    axis,
                    under: a,
                    over: a,
                })
            }
            (_, ShotClass::Decayed) => {
                return Ok(Isolated {
                    axis,
                    under: b,
                    over: b,
                })
            }
            (ca, cb) => {
                return Err(Error::NoBracket(format!(
                    "bracket ({a}, {b}) classified as {ca:?}/{cb:?} at full accuracy"
                )))
            }
        };
        while (over - under).abs() > rel_width * axis.scale(under) {
            let mid = 0.5 * (under + over);
            if mid == under || mid == over {
                break;
            }
            match self.class_of(axis.start(mid), 1e-12)? {
                ShotClass::Under => under = mid,
                ShotClass::Over => over = mid,
                ShotClass::Decayed => {
                    return Ok(Isolated {
                        axis,
                        under: mid,
                        over: mid,
                    })
                }
                c => {
                    return Err(Error::NoBracket(format!(
                        "inconsistent shot classification {c:?} at parameter {mid}"
                    )))
                }
            }
        }
        Ok(Isolated { axis, under, over })
    }
}

/// Finds the decaying solution with exactly `k` nodes at frequency `omega`.
pub fn find_state(
    model: &NonlinearityModel,
    omega: f64,
    k: usize,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    find_state_hinted(model, omega, k, grid, opts, None)
}

pub fn find_ground_state(
    model: &NonlinearityModel,
    omega: f64,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    find_state(model, omega, 0, grid, opts)
}

/// As [`find_state`], first scanning a 20%-inflated neighbourhood of `hint`.
pub fn find_state_hinted(
    model: &NonlinearityModel,
    omega: f64,
    k: usize,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
    hint: Option<(f64, f64)>,
) -> Result<ShootResult> {
    check_inputs(model, omega, grid)?;
    let searcher = Searcher {
        ivp: Ivp::new(model, omega),
        k,
        r_end: opts.reach * grid.r_max(),
    };
    let mut brackets = Vec::new();
    if let Some((a, b)) = hint {
        let (lo, hi) = (a.min(b) * 0.8, a.max(b) * 1.2);
        brackets = searcher.brackets(&log_spaced(lo.max(opts.u0_min), hi.min(opts.u0_max), 40))?;
    }
    if brackets.is_empty() {
        brackets = searcher.brackets(&log_spaced(opts.u0_min, opts.u0_max, opts.scan_probes))?;
    }
    let first = *brackets.first().ok_or_else(|| {
        Error::NoBracket(format!("no {k}-node shooting bracket at omega = {omega}"))
    })?;
    let mut iso = searcher.bisect(first, opts.rel_width)?;
    iso = searcher.refine_near_plateau(iso, opts.rel_width)?;
    build_solution(&searcher, iso, grid, opts)
}

/// Number of distinct `k`-node brackets over the full scan range.
pub fn count_brackets(
    model: &NonlinearityModel,
    omega: f64,
    k: usize,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<usize> {
    check_inputs(model, omega, grid)?;
    let searcher = Searcher {
        ivp: Ivp::new(model, omega),
        k,
        r_end: opts.reach * grid.r_max(),
    };
    Ok(searcher
        .brackets(&log_spaced(opts.u0_min, opts.u0_max, opts.scan_probes))?
        .len())
}

fn simpson(f: impl Fn(f64) -> [f64; 4], a: f64, b: f64, intervals: usize) -> [f64; 4] {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = [0.0; 4];
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = f(a + h * i as f64);
        for d in 0..4 {
            acc[d] += w * v[d];
        }
    }
    acc.map(|x| x * h / 3.0)
}

fn build_solution(
    searcher: &Searcher,
    iso: Isolated,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    let ivp = &searcher.ivp;
    let omega = ivp.omega;
    let start = iso.axis.start(iso.under);
    let u0 = start.u0();
    let mut rec = Vec::new();
    let shot = ivp.shoot(start, searcher.r_end, searcher.k, 1e-12, Some(&mut rec))?;
    let tail = LinearTail::new(ivp.model.dimension(), omega);
    let amp = rec.iter().fold(0.0f64, |m, s| m.max(s.1[0].abs()));

    // Splice where the trajectory best matches the decaying linear mode,
    // restricted to the final lobe, heading to zero, in the linear regime.
    let mut crossings = 0usize;
    let mut best: Option<(usize, f64)> = None;
    for i in 1..rec.len() {
        let (r, y) = (rec[i].0, &rec[i].1);
        if rec[i - 1].1[0] * y[0] < 0.0 {
            crossings += 1;
        }
        if crossings != searcher.k || y[0] == 0.0 || y[0] * y[1] >= 0.0 || y[0].abs() > 1e-2 * amp {
            continue;
        }
        let l = tail.log_derivative(r);
        let mismatch = ((y[1] / y[0]) / l - 1.0).abs();
        if best.map_or(true, |(_, m)| mismatch < m) {
            best = Some((i, mismatch));
        }
    }
    let (im, mismatch) = best.ok_or_else(|| {
        Error::NoConvergence(format!("no tail matching region at omega = {omega}"))
    })?;
    if mismatch > opts.match_tol {
        return Err(Error::NoConvergence(format!(
            "tail mismatch {mismatch:e} exceeds {} at omega = {omega}",
            opts.match_tol
        )));
    }
    let (r_m, y_m) = (rec[im].0, rec[im].1);
    let a_m = y_m[0];
    let model = ivp.model;
    let sigma = ivp.sigma;
    let n = ivp.dim as i32;
    let span = 40.0 / tail.kappa;
    let tail_int = simpson(
        |r| {
            let u = a_m * tail.ratio(r, r_m);
            let du = u * tail.log_derivative(r);
            let jac = sigma * r.powi(n - 1);
            [
                jac * u * u,
                jac * du * du,
                jac * model.primitive(u),
                jac * model.eval(u) * u,
            ]
        },
        r_m,
        r_m + span,
        1000,
    );
    let mass = y_m[2] + tail_int[0];
    let kinetic = y_m[3] + tail_int[1];
    let potential = y_m[4] + tail_int[2];
    let work = y_m[5] + tail_int[3];
    let f =
        crate::radial::Functionals::from_parts(mass, kinetic, potential, work, model.dimension());

    let tail_at_edge = a_m * tail.ratio(grid.r_max().max(r_m), r_m);
    if grid.r_max() > r_m && tail_at_edge.abs() > 1e-8 * u0.abs() {
        return Err(Error::Precondition(format!(
            "profile has not decayed by r_max = {} (|u| = {:e}); enlarge the grid",
            grid.r_max(),
            tail_at_edge.abs()
        )));
    }
    let spliced = sample_trajectory(
        &rec[..=im],
        grid,
        |r| match start {
            Start::Plateau { ue, lambda, delta } => ivp.plateau_value(ue, lambda, delta, r).0,
            Start::Origin { u0 } => u0,
        },
        |r| a_m * tail.ratio(r, r_m),
    );
    let polished = polish_fixed_frequency(&spliced, omega, model, 1e-10, 40)?;
    Ok(ShootResult {
        omega,
        u0,
        nodes: searcher.k,
        exit: if shot.exit == ExitKind::Diverged {
            ExitKind::Diverged
        } else {
            ExitKind::Decayed
        },
        mass,
        kinetic,
        energy: f.energy,
        action: f.action(omega),
        pohozaev: f.pohozaev,
        profile: polished.field,
        residual: polished.residual,
        r_match: r_m,
        match_mismatch: mismatch,
        bracket: (
            iso.axis.start(iso.under).u0(),
            iso.axis.start(iso.over).u0(),
        ),
        plateau: match start {
            Start::Plateau { ue, delta, .. } => Some((ue, delta)),
            Start::Origin { .. } => None,
        },
    })
}

/// Nodal states; `k = 0` is the ground state.
pub fn find_nodal_state(
    model: &NonlinearityModel,
    omega: f64,
    k: usize,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    find_state(model, omega, k, grid, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub omega: f64,
    pub u0: f64,
    pub mass: f64,
    pub energy: f64,
    pub action: f64,
    pub nodes: usize,
}

impl From<&ShootResult> for CurvePoint {
    fn from(s: &ShootResult) -> Self {
        Self {
            omega: s.omega,
            u0: s.u0,
            mass: s.mass,
            energy: s.energy,
            action: s.action,
            nodes: s.nodes,
        }
    }
}

/// Ground-state branch sampled over increasing frequencies; `None` marks a
/// frequency where no solution was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub omegas: Vec<f64>,
    pub points: Vec<Option<CurvePoint>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Frequencies below the sampled mass minimum.
    LowOmega,
    /// Frequencies above the sampled mass minimum.
    HighOmega,
}

impl Curve {
    pub fn present(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().flatten()
    }

    /// Sampled frequency of least mass.
    pub fn omega_star(&self) -> Option<f64> {
        self.present()
            .min_by(|a, b| a.mass.total_cmp(&b.mass))
            .map(|p| p.omega)
    }

    /// Number of strict local minima of the mass over consecutive present
    /// points, excluding the two ends.
    pub fn interior_mass_minima(&self) -> usize {
        let pts: Vec<&CurvePoint> = self.present().collect();
        pts.windows(3)
            .filter(|w| w[1].mass < w[0].mass && w[1].mass < w[2].mass)
            .count()
    }

    pub fn branch(&self, branch: Branch) -> Vec<CurvePoint> {
        let Some(ws) = self.omega_star() else {
            return Vec::new();
        };
        self.present()
            .filter(|p| match branch {
                Branch::LowOmega => p.omega <= ws,
                Branch::HighOmega => p.omega >= ws,
            })
            .copied()
            .collect()
    }

    /// Consecutive present points between which the energy changes sign.
    pub fn energy_sign_changes(&self) -> Vec<(CurvePoint, CurvePoint)> {
        let pts: Vec<&CurvePoint> = self.present().collect();
        pts.windows(2)
            .filter(|w| (w[0].energy > 0.0) != (w[1].energy > 0.0))
            .map(|w| (*w[0], *w[1]))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# normwave-curve v1\nomega,u0,mass,energy,action,nodes\n");
        for (w, p) in self.omegas.iter().zip(&self.points) {
            match p {
                Some(p) => out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_num(*w),
                    fmt_num(p.u0),
                    fmt_num(p.mass),
                    fmt_num(p.energy),
                    fmt_num(p.action),
                    p.nodes
                )),
                None => out.push_str(&format!("{},,,,,\n", fmt_num(*w))),
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut omegas = Vec::new();
        let mut points = Vec::new();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {s:?} in curve CSV")))
        };
        for line in text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("omega"))
        {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::Parse(format!("curve row needs 6 columns: {line:?}")));
            }
            let omega = num(cols[0])?;
            omegas.push(omega);
            if cols[1].trim().is_empty() {
                points.push(None);
            } else {
                points.push(Some(CurvePoint {
                    omega,
                    u0: num(cols[1])?,
                    mass: num(cols[2])?,
                    energy: num(cols[3])?,
                    action: num(cols[4])?,
                    nodes: cols[5]
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad node count in {line:?}")))?,
                }));
            }
        }
        Ok(Self { omegas, points })
    }
}

/// Ground states along `omegas` (strictly increasing). Points are computed
/// in `chunks` contiguous runs, each continued sequentially from its first
/// point; runs execute concurrently. A missing solution leaves a gap.
pub fn sweep_curve(
    model: &NonlinearityModel,
    omegas: &[f64],
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
    chunks: usize,
) -> Result<Curve> {
    if omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sweep frequencies must increase strictly".into(),
        ));
    }
    if let Some(&w) = omegas.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "sweep frequency {w} is not positive"
        )));
    }
    check_inputs(model, omegas.first().copied().unwrap_or(1.0), grid)?;
    let size = omegas.len().div_ceil(chunks.max(1)).max(1);
    let runs: Vec<Vec<Result<Option<CurvePoint>>>> = omegas
        .par_chunks(size)
        .map(|run| {
            let mut hint = None;
            run.iter()
                .map(
                    |&w| match find_state_hinted(model, w, 0, grid, opts, hint) {
                        Ok(s) => {
                            hint = Some(s.bracket);
                            Ok(Some(CurvePoint::from(&s)))
                        }
                        Err(Error::NoBracket(_)) => {
                            hint = None;
                            Ok(None)
                        }
                        Err(e) => Err(e),
                    },
                )
                .collect()
        })
        .collect();
    let points = runs.into_iter().flatten().collect::<Result<Vec<_>>>()?;
    Ok(Curve {
        omegas: omegas.to_vec(),
        points,
    })
}

/// Illinois iteration in `omega` for a scalar `value` changing sign between
/// the shooting solutions `a` and `b`.
fn secant_root(
    a: ShootResult,
    b: ShootResult,
    solve: impl Fn(f64, (f64, f64)) -> Result<ShootResult>,
    value: impl Fn(&ShootResult) -> f64,
    done: impl Fn(&ShootResult) -> bool,
) -> Result<ShootResult> {
    let (mut fa, mut fb) = (value(&a), value(&b));
    let (mut a, mut b) = (a, b);
    for _ in 0..100 {
        let mut w = b.omega - fb * (b.omega - a.omega) / (fb - fa);
        if !(w > a.omega.min(b.omega) && w < a.omega.max(b.omega)) {
            w = 0.5 * (a.omega + b.omega);
        }
        let near = if (w - a.omega).abs() < (w - b.omega).abs() {
            &a
        } else {
            &b
        };
        let c = solve(w, near.bracket)?;
        let fc = value(&c);
        if done(&c) || (b.omega - a.omega).abs() <= 1e-15 * w {
            return Ok(c);
        }
        if (fc > 0.0) != (fb > 0.0) {
            a = std::mem::replace(&mut b, c);
            fa = fb;
        } else {
            fa *= 0.5;
            b = c;
        }
        fb = fc;
    }
    Err(Error::NoConvergence(
        "secant iteration in omega did not converge".into(),
    ))
}

/// Ground state of the requested branch whose mass equals `target` within
/// `1e-6` relative.
pub fn match_mass(
    model: &NonlinearityModel,
    target: f64,
    branch: Branch,
    curve: &Curve,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    let pts = curve.branch(branch);
    let pair = pts
        .windows(2)
        .find(|w| (w[0].mass - target) * (w[1].mass - target) <= 0.0)
        .ok_or_else(|| {
            let (lo, hi) = pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                    (l.min(p.mass), h.max(p.mass))
                });
            Error::NoBracket(format!(
                "mass {target} outside the sampled {branch:?} range [{lo}, {hi}]"
            ))
        })?;
    let solve = |w: f64, hint: (f64, f64)| find_state_hinted(model, w, 0, grid, opts, Some(hint));
    let value = |s: &ShootResult| s.mass - target;
    let done = |s: &ShootResult| (s.mass - target).abs() <= 1e-6 * target;
    let a = solve(pair[0].omega, (pair[0].u0, pair[0].u0))?;
    let b = solve(pair[1].omega, (pair[1].u0, pair[1].u0))?;
    for s in [&a, &b] {
        if done(s) {
            return Ok(s.clone());
        }
    }

    secant_root(a, b, solve, value, done)
}

/// Ground state of zero energy between the first pair of sampled points
/// where the energy changes sign.
pub fn zero_energy_state(
    model: &NonlinearityModel,
    curve: &Curve,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    let (p, q) = *curve
        .energy_sign_changes()
        .first()
        .ok_or_else(|| Error::NoBracket("energy does not change sign along the curve".into()))?;
    let solve = |w: f64, hint: (f64, f64)| find_state_hinted(model, w, 0, grid, opts, Some(hint));
    let value = |s: &ShootResult| s.energy;
    let done = |s: &ShootResult| s.energy.abs() <= 1e-9 * s.kinetic;
    let a = solve(p.omega, (p.u0, p.u0))?;
    let b = solve(q.omega, (q.u0, q.u0))?;
    secant_root(a, b, solve, value, done)
}
