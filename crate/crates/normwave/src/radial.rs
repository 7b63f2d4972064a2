//! Cell-centred radial grid, radial fields and the discrete functionals.
//!
//! Nodes sit at `r_i = (i + 1/2) h`. Face `i + 1/2` lies at `(i + 1) h`; the flux
//! through `r = 0` vanishes and a ghost value `u_n = 0` imposes the Dirichlet
//! condition at the outer edge. With `a_{i+1/2} = sigma_N r_{i+1/2}^{N-1} / h`
//! the stiffness matrix `S` is symmetric, `-Delta = W^{-1} S`, and the kinetic
//! term `sum a (u_{i+1} - u_i)^2` equals `<-Delta u, u>_w` exactly.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NonlinearityModel;

/// Surface area of the unit sphere in `R^N`.
pub fn sphere_area(dimension: usize) -> f64 {
    match dimension {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dimension: usize,
    r_max: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    conductance: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dimension: usize, r_max: f64, n: usize) -> Result<Arc<Self>> {
        if dimension == 0 {
            return Err(Error::InvalidArgument(
                "dimension must be at least 1".into(),
            ));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        if n < 4 {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 nodes, got {n}"
            )));
        }
        let h = r_max / n as f64;
        let sigma = sphere_area(dimension);
        let e = dimension as i32 - 1;
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let weights = nodes.iter().map(|r| sigma * r.powi(e) * h).collect();
        let conductance = (0..n)
            .map(|i| sigma * ((i as f64 + 1.0) * h).powi(e) / h)
            .collect();
        Ok(Arc::new(Self {
            dimension,
            r_max,
            n,
            h,
            nodes,
            weights,
            conductance,
        }))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Face coefficients `a_{i+1/2}`; the last one couples to the ghost.
    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    /// Bands of the stiffness matrix `S` in the `(lower, diag, upper)` layout of
    /// [`crate::linalg`].
    pub fn stiffness_bands(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let a = &self.conductance;
        let n = self.n;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            diag[i] = a[i] + if i > 0 { a[i - 1] } else { 0.0 };
            if i > 0 {
                lower[i] = -a[i - 1];
            }
            if i + 1 < n {
                upper[i] = -a[i];
            }
        }
        (lower, diag, upper)
    }

    /// `S u`.
    pub fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        let a = &self.conductance;
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            let mut s = a[i] * (u[i] - right);
            if i > 0 {
                s += a[i - 1] * (u[i] - u[i - 1]);
            }
            out[i] = s;
        }
        out
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.dimension == other.dimension && self.n == other.n && self.r_max == other.r_max
    }
}

/// A real radial profile sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl PartialEq for RealField {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.values == other.values
    }
}

impl RealField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "field contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Builds a field without validating values; for internal hot loops.
    pub(crate) fn from_parts(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn check_same_grid(&self, other: &RealField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    /// `sum w u v`.
    pub fn inner(&self, other: &RealField) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .zip(&other.values)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    /// `sum w u^2`.
    pub fn mass(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `sum a (u_{i+1} - u_i)^2` with the zero ghost beyond the last node.
    pub fn kinetic(&self) -> f64 {
        let u = &self.values;
        let n = u.len();
        self.grid
            .conductance()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = if i + 1 < n { u[i + 1] - u[i] } else { -u[i] };
                a * d * d
            })
            .sum()
    }

    pub fn h1_norm(&self) -> f64 {
        (self.mass() + self.kinetic()).sqrt()
    }

    /// Number of sign changes, ignoring entries below `floor * max|u|`.
    pub fn sign_changes(&self, floor: f64) -> usize {
        let amp = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut last = 0.0f64;
        let mut count = 0;
        for &v in &self.values {
            if v.abs() <= floor * amp {
                continue;
            }
            if last != 0.0 && last.signum() != v.signum() {
                count += 1;
            }
            last = v;
        }
        count
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Discrete functionals of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub mass: f64,
    pub kinetic: f64,
    /// `sum w F(u)`.
    pub potential: f64,
    /// `sum w f(u) u`.
    pub work: f64,
    /// `I(u) = K/2 - sum w F(u)`.
    pub energy: f64,
    /// `P(u) = K - (N/2) sum w (f(u) u - 2 F(u))`.
    pub pohozaev: f64,
    /// Lagrange multiplier estimate `(sum w f(u) u - K) / m`.
    pub multiplier: f64,
    pub dimension: usize,
}

impl Functionals {
    pub fn from_parts(
        mass: f64,
        kinetic: f64,
        potential: f64,
        work: f64,
        dimension: usize,
    ) -> Self {
        let energy = 0.5 * kinetic - potential;
        let pohozaev = kinetic - 0.5 * dimension as f64 * (work - 2.0 * potential);
        let multiplier = if mass > 0.0 {
            (work - kinetic) / mass
        } else {
            f64::NAN
        };
        Self {
            mass,
            kinetic,
            potential,
            work,
            energy,
            pohozaev,
            multiplier,
            dimension,
        }
    }

    /// `J_omega = I + omega/2 * mass`.
    pub fn action(&self, omega: f64) -> f64 {
        self.energy + 0.5 * omega * self.mass
    }

    /// `Q_mu = (N-2)/(2N) K + mu/2 * mass - sum w F`.
    pub fn q_functional(&self, mu: f64) -> f64 {
        let n = self.dimension as f64;
        (n - 2.0) / (2.0 * n) * self.kinetic + 0.5 * mu * self.mass - self.potential
    }
}

fn check_dimension(field: &RealField, model: &NonlinearityModel) -> Result<()> {
    if field.grid().dimension() != model.dimension() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} but model dimension {}",
            field.grid().dimension(),
            model.dimension()
        )));
    }
    Ok(())
}

pub fn functionals(field: &RealField, model: &NonlinearityModel) -> Result<Functionals> {
    check_dimension(field, model)?;
    let mut potential = 0.0;
    let mut work = 0.0;
    for (w, &u) in field.grid().weights().iter().zip(field.values()) {
        potential += w * model.primitive(u);
        work += w * model.eval(u) * u;
    }
    Ok(Functionals::from_parts(
        field.mass(),
        field.kinetic(),
        potential,
        work,
        model.dimension(),
    ))
}

/// Discrete Laplacian `-W^{-1} S u`.
pub fn laplacian(field: &RealField) -> RealField {
    let su = field.grid().stiffness_apply(field.values());
    let vals = su
        .iter()
        .zip(field.grid().weights())
        .map(|(s, w)| -s / w)
        .collect();
    RealField::from_parts(field.grid().clone(), vals)
}

/// `-Delta u + mu u - f(u)` at every node.
pub fn residual_vector(field: &RealField, mu: f64, model: &NonlinearityModel) -> Result<Vec<f64>> {
    check_dimension(field, model)?;
    let su = field.grid().stiffness_apply(field.values());
    Ok(su
        .iter()
        .zip(field.grid().weights())
        .zip(field.values())
        .map(|((s, w), &u)| s / w + mu * u - model.eval(u))
        .collect())
}

/// Weighted norm of `-Delta u + mu u - f(u)`.
pub fn residual(field: &RealField, mu: f64, model: &NonlinearityModel) -> Result<f64> {
    let r = residual_vector(field, mu, model)?;
    Ok(r.iter()
        .zip(field.grid().weights())
        .map(|(r, w)| w * r * r)
        .sum::<f64>()
        .sqrt())
}

/// Rescales a field to the given mass.
pub fn scale_mass(field: &RealField, mass: f64) -> Result<RealField> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target mass must be positive, got {mass}"
        )));
    }
    let current = field.mass();
    if current <= 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(field.scaled((mass / current).sqrt()))
}

/// Monotone cubic interpolant through the nodes, extended evenly across `r = 0`
/// and to zero at the ghost node `r_max + h/2`.
pub struct MonotoneInterpolant {
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneInterpolant {
    pub fn new(field: &RealField) -> Self {
        let h = field.grid().spacing();
        let u = field.values();
        let n = u.len();
        // values[j] sits at (j - 1/2) h.
        let mut values = Vec::with_capacity(n + 2);
        values.push(u[0]);
        values.extend_from_slice(u);
        values.push(0.0);
        let m = values.len();
        let secant: Vec<f64> = (0..m - 1)
            .map(|j| (values[j + 1] - values[j]) / h)
            .collect();
        let mut slopes = vec![0.0; m];
        slopes[0] = secant[0];
        slopes[m - 1] = secant[m - 2];
        for j in 1..m - 1 {
            let (a, b) = (secant[j - 1], secant[j]);
            slopes[j] = if a * b <= 0.0 {
                0.0
            } else {
                2.0 * a * b / (a + b)
            };
        }
        Self { h, values, slopes }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let t = r / self.h + 0.5;
        let j = t.floor() as usize;
        if j + 1 >= self.values.len() {
            return 0.0;
        }
        let s = t - j as f64;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.slopes[j] * self.h, self.slopes[j + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }
}

/// Mass-preserving dilation `e^{N theta/2} u(e^theta r)`, zero beyond the grid.
/// Accuracy degrades for `|theta| > 2` when contracting; compose small steps.
pub fn dilate(field: &RealField, theta: f64) -> Result<RealField> {
    if !theta.is_finite() || theta.abs() > 20.0 {
        return Err(Error::InvalidArgument(format!(
            "dilation parameter {theta} outside [-20, 20]"
        )));
    }
    let interp = MonotoneInterpolant::new(field);
    let scale = theta.exp();
    let amp = (0.5 * field.grid().dimension() as f64 * theta).exp();
    let vals = field
        .grid()
        .nodes()
        .iter()
        .map(|&r| amp * interp.eval(scale * r))
        .collect();
    Ok(RealField::from_parts(field.grid().clone(), vals))
}

/// Resamples a field onto another grid of the same dimension.
pub fn resample(field: &RealField, grid: Arc<RadialGrid>) -> Result<RealField> {
    if grid.dimension() != field.grid().dimension() {
        return Err(Error::GridMismatch("resampling across dimensions".into()));
    }
    let interp = MonotoneInterpolant::new(field);
    let vals = grid.nodes().iter().map(|&r| interp.eval(r)).collect();
    Ok(RealField::from_parts(grid, vals))
}

/// `%.17g`-equivalent formatting used by every output file.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn field_to_csv(field: &RealField) -> String {
    let g = field.grid();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# normwave-field N={} r_max={} n={}",
        g.dimension(),
        fmt_num(g.r_max()),
        g.len()
    );
    s.push_str("r,u\n");
    for (r, u) in g.nodes().iter().zip(field.values()) {
        let _ = writeln!(s, "{},{}", fmt_num(*r), fmt_num(*u));
    }
    s
}

pub fn field_from_csv(text: &str) -> Result<RealField> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))?;
    let header = header
        .strip_prefix("# normwave-field")
        .ok_or_else(|| Error::Parse("missing field header".into()))?;
    let (mut dim, mut r_max, mut n) = (None, None, None);
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token {tok}")))?;
        match k {
            "N" => dim = v.parse::<usize>().ok(),
            "r_max" => r_max = v.parse::<f64>().ok(),
            "n" => n = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (dim, r_max, n) = match (dim, r_max, n) {
        (Some(d), Some(r), Some(n)) => (d, r, n),
        _ => return Err(Error::Parse("header must carry N, r_max and n".into())),
    };
    let grid = RadialGrid::new(dim, r_max, n)?;
    if lines.next().map(str::trim) != Some("r,u") {
        return Err(Error::Parse("missing column header r,u".into()));
    }
    let mut values = Vec::with_capacity(n);
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let (r, u) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("bad row {line}")))?;
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad radius {r}")))?;
        let u: f64 = u
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad value {u}")))?;
        if i >= n || (r - grid.nodes()[i]).abs() > 1e-9 * r_max {
            return Err(Error::Parse(format!("row {i} does not match the grid")));
        }
        values.push(u);
    }
    RealField::new(grid, values).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_field_csv(path: &Path, field: &RealField) -> Result<()> {
    std::fs::write(path, field_to_csv(field))?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<RealField> {
    field_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Arc<RadialGrid>) -> RealField {
        RealField::from_fn(grid.clone(), |r| (-0.5 * r * r).exp()).unwrap()
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integrals() {
        let grid = RadialGrid::new(3, 20.0, 4096).unwrap();
        let g = gaussian(&grid);
        let pi32 = PI.powf(1.5);
        assert!((g.mass() / pi32 - 1.0).abs() < 1e-5);
        // |grad|^2 integral of e^{-r^2/2} is (3/2) pi^{3/2}.
        assert!((g.kinetic() / (1.5 * pi32) - 1.0).abs() < 1e-4);
        let grid1 = RadialGrid::new(1, 20.0, 4096).unwrap();
        assert!((gaussian(&grid1).mass() / PI.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn laplacian_of_gaussian() {
        let grid = RadialGrid::new(3, 20.0, 4096).unwrap();
        let lap = laplacian(&gaussian(&grid));
        // Truncation error grows like h^2/r^2 towards the origin.
        for (i, &r) in grid.nodes().iter().enumerate().skip(200).step_by(97) {
            if r > 8.0 {
                break;
            }
            let exact = (r * r - 3.0) * (-0.5 * r * r).exp();
            assert!(
                (lap.values()[i] - exact).abs() < 1e-4,
                "r={r} {} {exact}",
                lap.values()[i]
            );
        }
    }

    #[test]
    fn summation_by_parts() {
        for dim in 1..=3 {
            let grid = RadialGrid::new(dim, 12.0, 777).unwrap();
            let u =
                RealField::from_fn(grid.clone(), |r| (1.0 + r).recip() * (r * 0.7).cos()).unwrap();
            let lap = laplacian(&u);
            let lhs = -lap.inner(&u);
            assert!((lhs - u.kinetic()).abs() <= 1e-10 * u.kinetic());
        }
    }

    #[test]
    fn dilation_scales_kinetic() {
        let grid = RadialGrid::new(3, 40.0, 4096).unwrap();
        let g = gaussian(&grid);
        let d = dilate(&g, 1.0).unwrap();
        assert!((d.mass() / g.mass() - 1.0).abs() < 1e-4);
        assert!((d.kinetic() / g.kinetic() - (2.0f64).exp()).abs() < 1e-3 * 7.4);
        let back = dilate(&d, -1.0).unwrap();
        let err = back
            .values()
            .iter()
            .zip(g.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 2e-4, "{err}");
    }

    #[test]
    fn functionals_of_cubic_quintic() {
        let grid = RadialGrid::new(3, 20.0, 2048).unwrap();
        let g = gaussian(&grid);
        let f = functionals(&g, &NonlinearityModel::cubic_quintic()).unwrap();
        let pi32 = PI.powf(1.5);
        // int e^{-2r^2} = (pi/2)^{3/2}, int e^{-3r^2} = (pi/3)^{3/2}.
        let quartic = pi32 / 2f64.powf(1.5);
        let sextic = pi32 / 3f64.powf(1.5);
        assert!((f.potential - (quartic / 4.0 - sextic / 6.0)).abs() < 1e-5);
        assert!((f.work - (quartic - sextic)).abs() < 1e-5);
        let omega = 0.3;
        assert!((f.action(omega) - f.energy - 0.5 * omega * f.mass).abs() < 1e-14);
        let mu = 0.7;
        let q = f.q_functional(mu);
        assert!(((f.energy - q) - (f.kinetic / 3.0 - 0.5 * mu * f.mass)).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let grid = RadialGrid::new(2, 7.5, 64).unwrap();
        let u = RealField::from_fn(grid, |r| (r * 1.3).sin() / (1.0 + r)).unwrap();
        let back = field_from_csv(&field_to_csv(&u)).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(field_from_csv("r,u\n1,2\n").is_err());
        assert!(field_from_csv("# normwave-field N=3 n=4\nr,u\n").is_err());
    }
}
