use std::f64::consts::PI;
use std::sync::Arc;

use normwave::radial::{
    dilate, field_from_csv, field_to_csv, functionals, laplacian, read_field_csv, residual,
    residual_vector, scale_mass, sphere_area, write_field_csv,
};
use normwave::rho::estimate_rho;
use normwave::{Error, NonlinearityModel, PowerTerm, RadialGrid, RealField};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

/// `sum a_k exp(-(r/s_k)^2)`: smooth, even at the origin, decayed by `r = 30`.
#[derive(Debug, Clone)]
struct Bumps(Vec<(f64, f64)>);

impl Bumps {
    fn at(&self, r: f64) -> f64 {
        self.0
            .iter()
            .map(|&(a, s)| a * (-(r / s).powi(2)).exp())
            .sum()
    }

    fn field(&self, grid: &Arc<RadialGrid>) -> RealField {
        RealField::from_fn(grid.clone(), |r| self.at(r)).unwrap()
    }
}

fn arb_bumps() -> impl Strategy<Value = Bumps> {
    prop::collection::vec((-1.2f64..1.2, 1.0f64..4.0), 1..=3)
        .prop_filter("negligible field", |v| {
            v.iter().map(|(a, _)| a.abs()).sum::<f64>() > 0.2
        })
        .prop_map(Bumps)
}

fn model_in(n: usize) -> NonlinearityModel {
    NonlinearityModel::cubic_quintic()
        .with_dimension(n)
        .unwrap()
}

fn gaussian(grid: &Arc<RadialGrid>) -> RealField {
    RealField::from_fn(grid.clone(), |r| (-0.5 * r * r).exp()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn dilation_derivative_is_pohozaev(b in arb_bumps(), n in 1usize..=3) {
        let grid = RadialGrid::new(n, 30.0, 2048).unwrap();
        let model = model_in(n);
        let u = b.field(&grid);
        let eps = 1e-3;
        let ip = functionals(&dilate(&u, eps).unwrap(), &model).unwrap().energy;
        let im = functionals(&dilate(&u, -eps).unwrap(), &model).unwrap().energy;
        let slope = (ip - im) / (2.0 * eps);
        let p = functionals(&u, &model).unwrap().pohozaev;
        prop_assert!((slope - p).abs() <= 1e-2 * p.abs(), "N={} slope={} P={}", n, slope, p);
    }

    #[test]
    fn gradient_matches_finite_differences(b in arb_bumps(), n in 1usize..=3, picks in prop::collection::vec(0usize..400, 20)) {
        // Nodes of r in (0.5, 6.4) carry both field and weight.
        let grid = RadialGrid::new(n, 30.0, 2048).unwrap();
        let model = model_in(n);
        let u = b.field(&grid);
        let grad = residual_vector(&u, 0.0, &model).unwrap();
        let energy = |v: &RealField| functionals(v, &model).unwrap().energy;
        for k in picks {
            let i = 35 + k;
            let h = 1e-5 * u.values()[i].abs().max(1e-2);
            let mut plus = u.clone();
            plus.values_mut()[i] += h;
            let mut minus = u.clone();
            minus.values_mut()[i] -= h;
            let fd = (energy(&plus) - energy(&minus)) / (2.0 * h);
            let exact = grid.weights()[i] * grad[i];
            // The quotient cannot resolve differences below the rounding of
            // the two energy sums.
            let f = functionals(&u, &model).unwrap();
            let floor = 1e-14 * (f.kinetic + f.potential.abs()) / h;
            prop_assert!((fd - exact).abs() <= 1e-4 * exact.abs() + floor,
                "N={} node {}: fd={} exact={}", n, i, fd, exact);
        }
    }

    #[test]
    fn laplacian_is_self_adjoint(a in arb_bumps(), b in arb_bumps(), n in 1usize..=3) {
        let grid = RadialGrid::new(n, 30.0, 1000).unwrap();
        let (u, v) = (a.field(&grid), b.field(&grid));
        let lhs = laplacian(&u).inner(&v);
        let rhs = u.inner(&laplacian(&v));
        let scale = u.kinetic().sqrt() * v.kinetic().sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        let k = -laplacian(&u).inner(&u);
        prop_assert!((k - u.kinetic()).abs() <= 1e-8 * u.kinetic());
    }

    #[test]
    fn scale_mass_hits_the_target(b in arb_bumps(), m in 1e-3f64..1e3) {
        let grid = RadialGrid::new(3, 30.0, 512).unwrap();
        let v = scale_mass(&b.field(&grid), m).unwrap();
        prop_assert!((v.mass() / m - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact(b in arb_bumps(), n in 1usize..=3) {
        let grid = RadialGrid::new(n, 17.25, 300).unwrap();
        let u = b.field(&grid);
        prop_assert_eq!(field_from_csv(&field_to_csv(&u)).unwrap(), u);
    }

    #[test]
    fn random_fields_have_positive_residual(b in arb_bumps(), mu in 0.0f64..1.0) {
        let grid = RadialGrid::new(3, 30.0, 512).unwrap();
        prop_assert!(residual(&b.field(&grid), mu, &model_in(3)).unwrap() > 0.0);
    }
}

#[test]
fn weights_sum_to_ball_volume() {
    for n in 1..=3 {
        for nodes in [256, 1000, 4096] {
            let grid = RadialGrid::new(n, 7.0, nodes).unwrap();
            assert!(grid.weights().iter().all(|&w| w > 0.0));
            let volume = sphere_area(n) / n as f64 * 7f64.powi(n as i32);
            let sum: f64 = grid.weights().iter().sum();
            assert!(
                (sum / volume - 1.0).abs() < 5e-3,
                "N={n} n={nodes}: {sum} vs {volume}"
            );
        }
    }
}

#[test]
fn gaussian_mass_in_three_dimensions() {
    let grid = RadialGrid::new(3, 16.0, 4096).unwrap();
    let g = gaussian(&grid);
    assert!((g.mass() / PI.powf(1.5) - 1.0).abs() < 1e-6);
    let z = RealField::zeros(grid.clone());
    assert_eq!(z.mass(), 0.0);
    let f = functionals(&z, &model_in(3)).unwrap();
    assert_eq!(
        (f.mass, f.kinetic, f.potential, f.energy, f.pohozaev),
        (0.0, 0.0, 0.0, 0.0, 0.0)
    );
    assert_eq!(residual(&z, 0.7, &model_in(3)).unwrap(), 0.0);
    assert!(laplacian(&z).values().iter().all(|&x| x == 0.0));
    assert!(matches!(scale_mass(&z, 1.0), Err(Error::ZeroMass)));
    let same = scale_mass(&g, g.mass()).unwrap();
    assert!(same
        .values()
        .iter()
        .zip(g.values())
        .all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs()));
}

#[test]
fn dilation_preserves_mass_and_scales_kinetic() {
    let grid = RadialGrid::new(3, 40.0, 4096).unwrap();
    let g = gaussian(&grid);
    assert_eq!(dilate(&g, 0.0).unwrap(), g);
    for theta in [-2.0, -1.0, -0.3, 0.5, 1.0, 2.0] {
        let d = dilate(&g, theta).unwrap();
        assert!(
            (d.mass() / g.mass() - 1.0).abs() < 1e-4,
            "theta={theta}: {}",
            d.mass() / g.mass()
        );
    }
    let ratio = dilate(&g, 1.0).unwrap().kinetic() / g.kinetic();
    assert!((ratio / 1f64.exp().powi(2) - 1.0).abs() < 1e-3, "{ratio}");
    assert!(dilate(&g, 21.0).is_err());
    assert!(dilate(&g, f64::NAN).is_err());
}

#[test]
fn csv_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("normwave-radial-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.csv");
    let grid = RadialGrid::new(2, 9.0, 128).unwrap();
    let g = gaussian(&grid);
    write_field_csv(&path, &g).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with('#') && header.contains("N=2") && header.contains("n=128"));
    assert!(header.contains("r_max="));
    assert_eq!(read_field_csv(&path).unwrap(), g);
    std::fs::remove_dir_all(&dir).unwrap();
}

/// `A exp(-(r/s)^2)` at mass `m`, with `s` chosen for kinetic `k`.
fn gaussian_with(grid: &Arc<RadialGrid>, m: f64, k: f64) -> RealField {
    // In three dimensions kinetic/mass = 3/s^2 for exp(-(r/s)^2).
    let s = (3.0 * m / k).sqrt();
    scale_mass(
        &RealField::from_fn(grid.clone(), |r| (-(r / s).powi(2)).exp()).unwrap(),
        m,
    )
    .unwrap()
}

#[test]
fn energy_grows_with_kinetic_on_a_mass_sphere() {
    let grid = RadialGrid::new(3, 60.0, 8192).unwrap();
    let model = model_in(3);
    let m = 240.0;
    let levels: Vec<(f64, f64)> = [10.0, 1e2, 1e3]
        .iter()
        .map(|&k| {
            let u = gaussian_with(&grid, m, k);
            let f = functionals(&u, &model).unwrap();
            assert!((f.kinetic / k - 1.0).abs() < 2e-2, "{} vs {k}", f.kinetic);
            (f.kinetic, f.energy)
        })
        .collect();
    assert!(levels.windows(2).all(|w| w[1].1 > w[0].1), "{levels:?}");
    // A single constant C makes I >= K/4 - C at every level, and the
    // margin grows with K.
    let c = levels
        .iter()
        .map(|(k, e)| k / 4.0 - e)
        .fold(f64::NEG_INFINITY, f64::max);
    let margins: Vec<f64> = levels.iter().map(|(k, e)| e - (k / 4.0 - c)).collect();
    assert!(
        margins[2] > margins[1] && margins[1] >= margins[0],
        "{margins:?}"
    );
}

#[test]
fn small_gradient_bound_below_four_rho() {
    let grid = RadialGrid::new(3, 160.0, 4096).unwrap();
    let model = model_in(3);
    let m = 240.0;
    let rho = estimate_rho(&model, m, &grid).unwrap();
    assert!(rho > 0.0);
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut checked = 0;
    for _ in 0..40 {
        let b = arb_bumps().new_tree(&mut runner).unwrap().current();
        let frac = 0.1 + 0.9 * (checked as f64 / 40.0);
        let base = scale_mass(&b.field(&grid), m).unwrap();
        // At fixed mass, stretching r by L divides the kinetic energy by L^2.
        let stretch = (base.kinetic() / (frac * 4.0 * rho)).sqrt();
        let u = scale_mass(
            &RealField::from_fn(grid.clone(), |r| b.at(r / stretch)).unwrap(),
            m,
        )
        .unwrap();
        let f = functionals(&u, &model).unwrap();
        if f.kinetic > 4.0 * rho {
            continue;
        }
        checked += 1;
        assert!(
            f.energy >= 0.25 * f.kinetic,
            "K={} I={} rho={rho}",
            f.kinetic,
            f.energy
        );
        assert!(
            f.pohozaev >= 0.5 * f.kinetic,
            "K={} P={} rho={rho}",
            f.kinetic,
            f.pohozaev
        );
    }
    assert!(checked >= 30, "only {checked} fields below 4 rho");
}

#[test]
fn functionals_require_matching_dimension() {
    let grid = RadialGrid::new(2, 10.0, 64).unwrap();
    let u = gaussian(&grid);
    assert!(matches!(
        functionals(&u, &model_in(3)),
        Err(Error::GridMismatch(_))
    ));
    let model = NonlinearityModel::power_sum(vec![PowerTerm::new(1.0, 3.0)], 2).unwrap();
    let f = functionals(&u, &model).unwrap();
    assert_eq!(f.energy, 0.5 * f.kinetic - f.potential);
    assert!((f.action(0.3) - f.energy - 0.15 * f.mass).abs() <= 1e-15 * f.mass);
}
