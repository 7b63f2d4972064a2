//! Acceptance run: one PASS/FAIL line per criterion with the measured numbers
//! and the runtime against its limit. Failing criteria are reported, not
//! hidden; the process exits nonzero only when the harness itself breaks.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use normwave::dynamics::{evolve, stability_probe, ComplexField, Verdict as Stability};
use normwave::flow::{
    estimate_mstar, estimate_mstarstar, solve_global, solve_local, Classification, FlowConfig,
    MstarEstimate,
};
use normwave::minimax::{saddle_report, MinimaxConfig, MountainPassReport, ShootingReference};
use normwave::radial::{dilate, functionals, residual_vector};
use normwave::shooting::{
    find_ground_state, find_nodal_state, match_mass, sweep_curve, zero_energy_state, Branch, Curve,
    ShootOptions, ShootResult,
};
use normwave::{Error, NonlinearityModel, PowerTerm, RadialGrid, RealField, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

struct Line {
    id: usize,
    pass: bool,
    text: String,
}

fn criterion(
    lines: &mut Vec<Line>,
    id: usize,
    name: &str,
    limit_s: f64,
    f: impl FnOnce() -> Outcome,
) {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (ok, detail) = match out {
        Ok((ok, d)) => (ok, d),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = secs <= limit_s;
    let pass = ok && in_time;
    let text = format!(
        "{} {id:>2} {name}: {detail} [{secs:.1} s, limit {limit_s:.0} s{}]",
        if pass { "PASS" } else { "FAIL" },
        if in_time { "" } else { ", over time" }
    );
    println!("{text}");
    lines.push(Line { id, pass, text });
}

fn err(e: Error) -> String {
    e.to_string()
}

fn cq() -> NonlinearityModel {
    NonlinearityModel::cubic_quintic()
}

fn power_sum(terms: &[(f64, f64)], n: usize) -> NonlinearityModel {
    NonlinearityModel::power_sum(
        terms.iter().map(|&(c, p)| PowerTerm::new(c, p)).collect(),
        n,
    )
    .unwrap()
}

fn c1_hypotheses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = cq().check_hypotheses();
    let cq_ok = ["f1", "f2", "f3", "f4", "f5", "a3"]
        .iter()
        .all(|n| r.verdict(n) == Some(Verdict::Holds));
    let mut two_fail = 0;
    for i in 0..300 {
        let n = 1 + i % 3;
        let lo = 2.0 + 4.0 / n as f64;
        let cap = if n == 3 { 6.0 } else { lo + 8.0 };
        let q = rng.gen_range(lo + 0.02..cap);
        let p = rng.gen_range(lo + 0.01..q - 0.005);
        let (a, b) = (rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0));
        let h = power_sum(&[(a, p), (-b, q)], n).check_hypotheses();
        if !["f1", "f2", "f3", "f4", "f5"]
            .iter()
            .all(|x| h.verdict(x) == Some(Verdict::Holds))
        {
            two_fail += 1;
        }
    }
    let (mut closed_bad, mut scan_bad, mut scanned, mut holds) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let (a, b, c) = (
            rng.gen_range(0.1..4.0),
            rng.gen_range(0.1..4.0),
            rng.gen_range(0.001..2.0),
        );
        let r = rng.gen_range(2.1..4.0);
        let p = r + rng.gen_range(0.1..1.0) * (5.5 - r);
        let q = p + rng.gen_range(0.1..1.0) * (6.0 - p);
        if q - p < 0.05 {
            continue;
        }
        let m = power_sum(&[(a, p), (-b, q), (-c, r)], 3);
        let f3 = m.check_hypotheses().f3.holds();
        holds += f3 as usize;
        let lhs = (a / (p * (q - r))).powf(q - r);
        let rhs = (b / (q * (p - r))).powf(p - r) * (c / (r * (q - p))).powf(q - p);
        closed_bad += (f3 != (lhs > rhs)) as usize;
        // A finite scan cannot resolve max F arbitrarily close to zero.
        if (lhs / rhs).ln().abs() > 0.5 {
            scanned += 1;
            let scan =
                (0..1000).any(|i| m.primitive(10f64.powf(-3.0 + 6.0 * i as f64 / 999.0)) > 0.0);
            scan_bad += (f3 != scan) as usize;
        }
    }
    let ok = cq_ok && two_fail == 0 && closed_bad == 0 && scan_bad == 0;
    Ok((
        ok,
        format!(
            "cubic-quintic f1-f5,a3 {cq_ok}; two-power failures {two_fail}/300; three-power closed-form mismatches {closed_bad}, scan mismatches {scan_bad}/{scanned} ({holds} with f3)"
        ),
    ))
}

fn bumps(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    loop {
        let k = rng.gen_range(1..=3);
        let v: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.gen_range(-1.2..1.2), rng.gen_range(1.0..4.0)))
            .collect();
        if v.iter().map(|(a, _)| f64::abs(*a)).sum::<f64>() > 0.2 {
            return v;
        }
    }
}

fn c2_functionals() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_dil, mut worst_grad, mut within) = (0.0f64, 0.0f64, true);
    for i in 0..20 {
        let n = 1 + i % 3;
        let grid = RadialGrid::new(n, 30.0, 2048).map_err(err)?;
        let model = cq().with_dimension(n).map_err(err)?;
        let b = bumps(&mut rng);
        let u = RealField::from_fn(grid.clone(), |r| {
            b.iter().map(|&(a, s)| a * (-(r / s).powi(2)).exp()).sum()
        })
        .map_err(err)?;
        let e = |v: &RealField| functionals(v, &model).unwrap().energy;
        let eps = 1e-3;
        let slope =
            (e(&dilate(&u, eps).map_err(err)?) - e(&dilate(&u, -eps).map_err(err)?)) / (2.0 * eps);
        let f = functionals(&u, &model).map_err(err)?;
        worst_dil = worst_dil.max((slope - f.pohozaev).abs() / f.pohozaev.abs());
        let grad = residual_vector(&u, 0.0, &model).map_err(err)?;
        for _ in 0..20 {
            let j = 35 + rng.gen_range(0..400);
            let h = 1e-5 * u.values()[j].abs().max(1e-2);
            let (mut p, mut m) = (u.clone(), u.clone());
            p.values_mut()[j] += h;
            m.values_mut()[j] -= h;
            let fd = (e(&p) - e(&m)) / (2.0 * h);
            let exact = grid.weights()[j] * grad[j];
            // Differences below the rounding of the energy sums are not resolvable.
            let floor = 1e-14 * (f.kinetic + f.potential.abs()) / h;
            worst_grad = worst_grad.max((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
            within &= (fd - exact).abs() <= 1e-4 * exact.abs() + floor;
        }
    }
    Ok((
        worst_dil <= 1e-2 && within,
        format!(
            "worst dilation-derivative error {worst_dil:.2e} (<= 1e-2); worst raw gradient error {worst_grad:.2e}, all within 1e-4 plus rounding floor: {within}"
        ),
    ))
}

/// Certificate of one accepted solution, gathered for the Pohozaev criterion.
struct Certificate {
    label: String,
    pohozaev_ratio: f64,
    residual: f64,
    seconds: Option<f64>,
}

fn shooting_certificate(label: String, s: &ShootResult, secs: f64) -> Certificate {
    Certificate {
        label,
        pohozaev_ratio: s.pohozaev.abs() / s.kinetic,
        residual: s.residual,
        seconds: Some(secs),
    }
}

fn c4_window(certs: &mut Vec<Certificate>) -> Outcome {
    let grid = RadialGrid::new(3, 160.0, 4096).map_err(err)?;
    let opts = ShootOptions::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for omega in [0.02, 0.05, 0.10, 0.15, 0.18] {
        let t = Instant::now();
        match find_ground_state(&cq(), omega, &grid, &opts) {
            Ok(s) => {
                certs.push(shooting_certificate(
                    format!("ground omega={omega}"),
                    &s,
                    t.elapsed().as_secs_f64(),
                ));
                notes.push(format!("{omega}: u0={:.4}", s.u0));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{omega}: {e}"));
            }
        }
    }
    for omega in [0.20, 0.25] {
        let r = find_ground_state(&cq(), omega, &grid, &opts);
        let nb = matches!(r, Err(Error::NoBracket(_)));
        ok &= nb;
        notes.push(format!(
            "{omega}: {}",
            if nb { "NoBracket" } else { "unexpected result" }
        ));
    }
    Ok((ok, notes.join(", ")))
}

struct Thresholds {
    grid: Arc<RadialGrid>,
    mstar: MstarEstimate,
    m_star_star: f64,
    rho_hat: f64,
}

fn thresholds(grid: Arc<RadialGrid>) -> Result<Thresholds, String> {
    let cfg = FlowConfig::default();
    let mstar = estimate_mstar(&cq(), &grid, &cfg, (100.0, 400.0)).map_err(err)?;
    let mss = estimate_mstarstar(&cq(), &grid, &cfg, &mstar).map_err(err)?;
    Ok(Thresholds {
        grid,
        mstar,
        m_star_star: mss.m_star_star,
        rho_hat: mss.rho_hat,
    })
}

fn c6_consistency(t: &Thresholds, zero_mass: Option<f64>) -> Outcome {
    let m = t.mstar.m_star;
    let cfg = FlowConfig::default();
    let mut notes = vec![format!("m* = {m:.4}")];
    let mut ok = true;
    for factor in [1.02, 1.05, 1.10, 0.98, 0.95, 0.90] {
        let r = solve_global(&cq(), factor * m, &t.grid, &cfg).map_err(err)?;
        let good = if factor > 1.0 {
            r.converged() && r.energy() < 0.0
        } else {
            r.classification == Classification::Vanished
        };
        ok &= good;
        notes.push(format!(
            "{factor}m*: {:?} I={:.3e}",
            r.classification,
            r.energy()
        ));
    }
    match zero_mass {
        Some(z) => {
            let rel = (z / m - 1.0).abs();
            ok &= rel <= 0.02;
            notes.push(format!(
                "least nonpositive-energy shooting mass {z:.4} ({rel:.1e} from m*)"
            ));
        }
        None => {
            ok = false;
            notes.push("no zero-energy shooting state".into());
        }
    }
    Ok((ok, notes.join(", ")))
}

fn c5_figure(t: &Thresholds, zero_mass: &mut Option<f64>) -> Outcome {
    let grid = t.grid.clone();
    let opts = ShootOptions::default();
    let omegas: Vec<f64> = (0..40).map(|i| 0.01 + 0.17 * i as f64 / 39.0).collect();
    let curve = sweep_curve(&cq(), &omegas, &grid, &opts, 8).map_err(err)?;
    let present = curve.present().count();
    let minima = curve.interior_mass_minima();
    let pos = curve.present().any(|p| p.energy > 0.0);
    let neg = curve.present().any(|p| p.energy < 0.0);
    let zero = zero_energy_state(&cq(), &curve, &grid, &opts).map_err(err)?;
    *zero_mass = Some(zero.mass);
    let rel = (zero.mass / t.mstar.m_star - 1.0).abs();
    Ok((
        present == 40 && minima == 1 && pos && neg && rel <= 0.02,
        format!(
            "{present}/40 points, {minima} interior mass minimum at omega={:.4}, I>0 and I<0 sub-branches {pos}/{neg}, I=0 at mass {:.4} vs flow m* {:.4} ({rel:.1e}, <= 2e-2)",
            curve.omega_star().unwrap_or(f64::NAN),
            zero.mass,
            t.mstar.m_star
        ),
    ))
}

fn c7_local(t: &Thresholds) -> Outcome {
    let cfg = FlowConfig {
        rho_hat: Some(t.rho_hat),
        ..FlowConfig::default()
    };
    let (lo, hi) = (t.m_star_star, t.mstar.m_star);
    let mut energies = Vec::new();
    let mut ok = true;
    for frac in [0.25, 0.5, 0.75] {
        let m = lo + frac * (hi - lo);
        let r = solve_local(&cq(), m, &t.mstar.minimizer.field, &cfg).map_err(err)?;
        ok &= r.converged() && r.energy() > 0.0 && r.mu > 0.0 && r.field.sign_changes(1e-8) == 0;
        energies.push((m, r.energy(), r.mu));
    }
    ok &= energies.windows(2).all(|w| w[1].1 < w[0].1);
    let list: Vec<String> = energies
        .iter()
        .map(|(m, e, mu)| format!("m={m:.3}: I={e:.4e} mu={mu:.4}"))
        .collect();
    Ok((
        ok,
        format!("m** = {lo:.4}, m* = {hi:.4}; {}", list.join("; ")),
    ))
}

fn c8_mountain_pass(certs: &mut Vec<Certificate>) -> Outcome {
    let t = thresholds(RadialGrid::new(3, 800.0, 16000).map_err(err)?)?;
    let grid = t.grid.clone();
    let opts = ShootOptions::default();
    let omegas: Vec<f64> = (0..28).map(|i| 0.003 + 0.027 * i as f64 / 27.0).collect();
    let curve: Curve = sweep_curve(&cq(), &omegas, &grid, &opts, 4).map_err(err)?;
    let m_star = t.mstar.m_star;
    let mut notes = vec![format!("m* = {m_star:.4}, m** = {:.4}", t.m_star_star)];
    let mut ok = true;
    let run = |m: f64| -> Result<MountainPassReport, String> {
        let reference = ShootingReference {
            curve: &curve,
            grid: &grid,
            opts: &opts,
        };
        saddle_report(
            &cq(),
            m,
            &grid,
            &FlowConfig::default(),
            &MinimaxConfig::default(),
            &t.mstar,
            t.m_star_star,
            Some(reference),
        )
        .map_err(err)
    };
    let between = 0.5 * (t.m_star_star + m_star);
    for (label, m, scored) in [
        ("m*", m_star, true),
        ("1.5m*", 1.5 * m_star, true),
        ("0.9m*", 0.9 * m_star, true),
        ("(m**+m*)/2", between, false),
    ] {
        if !(m > t.m_star_star) {
            ok &= !scored;
            notes.push(format!(
                "{label} = {m:.3} is not above m**: no local minimiser, regime unavailable"
            ));
            continue;
        }
        let rep = run(m)?;
        let w = &rep.saddle;
        let v = rep.minimizer.as_ref().ok_or("no minimiser")?;
        let level_ok = rep.level >= rep.rho_hat - 1e-8 && w.energy() >= rep.rho_hat - 1e-8;
        // In every regime the saddle lies above the minimiser; at and above m*
        // the minimiser has nonpositive energy.
        let order_ok = w.converged()
            && w.energy() > v.energy()
            && if m >= m_star {
                v.energy() <= 1e-6 * v.kinetic()
            } else {
                v.energy() > 0.0
            };
        let (shoot_ok, shoot_note) = match &rep.shooting {
            Some(s) => (
                s.relative_difference <= 1e-2,
                format!("shooting I={:.5} ({:.1e})", s.energy, s.relative_difference),
            ),
            None => (false, "no shooting match".to_string()),
        };
        let f = functionals(&w.field, &cq()).map_err(err)?;
        certs.push(Certificate {
            label: format!("saddle m={m:.3}"),
            pohozaev_ratio: f.pohozaev.abs() / f.kinetic,
            residual: w.residual,
            seconds: None,
        });
        let good = level_ok && order_ok && shoot_ok;
        if scored {
            ok &= good;
        }
        notes.push(format!(
            "{label}: level {:.5} >= rho {:.5}, I(w)={:.5} I(v)={:.4e}, {shoot_note}{}{}",
            rep.level,
            rep.rho_hat,
            w.energy(),
            v.energy(),
            if good { "" } else { " [fails]" },
            if scored { "" } else { " [informative]" }
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn c9_multiplicity(certs: &mut Vec<Certificate>) -> Outcome {
    let grid = RadialGrid::new(3, 300.0, 8192).map_err(err)?;
    let opts = ShootOptions::default();
    let omega = 0.02;
    let mut states = Vec::new();
    for k in 0..=2 {
        let t = Instant::now();
        let s = find_nodal_state(&cq(), omega, k, &grid, &opts).map_err(err)?;
        certs.push(shooting_certificate(
            format!("nodal k={k}"),
            &s,
            t.elapsed().as_secs_f64(),
        ));
        states.push(s);
    }
    let nodes_ok = states
        .iter()
        .enumerate()
        .all(|(k, s)| s.nodes == k && s.profile.sign_changes(1e-8 * s.u0) == k);
    let distinct = states.windows(2).all(|w| w[0].u0 != w[1].u0);
    let increasing = states.windows(2).all(|w| w[1].action > w[0].action);
    let actions: Vec<String> = states.iter().map(|s| format!("{:.5}", s.action)).collect();
    Ok((
        nodes_ok && distinct && increasing,
        format!(
            "omega={omega}: J = [{}], nodes match {nodes_ok}, increasing {increasing}",
            actions.join(", ")
        ),
    ))
}

fn c10_dynamics() -> Outcome {
    let grid = RadialGrid::new(3, 256.0, 4096).map_err(err)?;
    let model = cq();
    let opts = ShootOptions::default();
    let omegas: Vec<f64> = (0..24).map(|i| 0.005 + 0.075 * i as f64 / 23.0).collect();
    let curve = sweep_curve(&model, &omegas, &grid, &opts, 4).map_err(err)?;
    let m = 239.0;
    let v = match_mass(&model, m, Branch::HighOmega, &curve, &grid, &opts).map_err(err)?;
    let w = match_mass(&model, m, Branch::LowOmega, &curve, &grid, &opts).map_err(err)?;
    let (horizon, dt) = (50.0, 1e-3);

    let bumped: Vec<num_complex::Complex64> = v
        .profile
        .values()
        .iter()
        .zip(grid.nodes())
        .map(|(&x, &r)| {
            num_complex::Complex64::new(x * (1.0 + 0.05 * (-r * r / 64.0).exp()), 0.02 * x)
        })
        .collect();
    let psi0 = ComplexField::new(grid.clone(), bumped).map_err(err)?;
    let traj = evolve(&psi0, horizon, dt, &model, 1000, None).map_err(err)?;
    let (md, ed) = (traj.max_mass_drift(), traj.max_energy_drift());
    let conserve = md <= 1e-10 && ed <= 1e-6;

    let phase_t = 10.0;
    let run = evolve(
        &ComplexField::from_real(&v.profile),
        phase_t,
        dt,
        &model,
        1000,
        None,
    )
    .map_err(err)?;
    let angle = ComplexField::from_real(&v.profile)
        .inner(&run.final_state)
        .arg();
    let expected = (v.omega * phase_t + std::f64::consts::PI)
        .rem_euclid(2.0 * std::f64::consts::PI)
        - std::f64::consts::PI;
    let phase_err = ((angle - expected) / (v.omega * phase_t)).abs();
    let modulus = run.final_state.modulus();
    let mod_err = modulus
        .values()
        .iter()
        .zip(v.profile.values())
        .fold(0.0f64, |d, (a, b)| d.max((a - b).abs()))
        / v.profile.max_abs();
    let phase_ok = phase_err <= 1e-4 && mod_err <= 1e-5;

    let eps = 1e-2;
    let (sv, _) = stability_probe(&v.profile, eps, horizon, dt, &model, 10.0, 100).map_err(err)?;
    let (sw, tw) = stability_probe(&w.profile, eps, horizon, dt, &model, 10.0, 100).map_err(err)?;
    let crossed = tw
        .samples
        .iter()
        .find(|s| s.distance.is_some_and(|d| d > sw.threshold))
        .map(|s| s.t);
    let ok = conserve
        && phase_ok
        && sv.verdict == Stability::StaysClose
        && sw.verdict == Stability::Departs;
    Ok((
        ok,
        format!(
            "mass drift {md:.1e}, energy drift {ed:.1e}; phase error {phase_err:.1e}, |psi| drift {mod_err:.1e}; v (omega={:.4}): {:?} d={:.3e} vs {:.3e}; w (omega={:.4}): {:?} d={:.3e} vs {:.3e}, threshold crossed at {}",
            v.omega,
            sv.verdict,
            sv.max_distance,
            sv.threshold,
            w.omega,
            sw.verdict,
            sw.max_distance,
            sw.threshold,
            crossed.map_or("no time within T".to_string(), |t| format!("t = {t}"))
        ),
    ))
}

fn c11_plane() -> Outcome {
    let grid = RadialGrid::new(2, 100.0, 16384).map_err(err)?;
    let model = cq().with_dimension(2).map_err(err)?;
    let sextic = |u: &RealField| -> f64 {
        u.values()
            .iter()
            .zip(u.grid().weights())
            .map(|(x, w)| w * x.powi(6))
            .sum::<f64>()
            / 6.0
    };
    let mut worst = 0.0f64;
    let mut all_negative = true;
    let mut count = 0;
    let mut check = |u: &RealField| -> Result<(), String> {
        let f = functionals(u, &model).map_err(err)?;
        let s = sextic(u);
        worst = worst.max((f.energy + s).abs() / s);
        all_negative &= f.energy < 0.0;
        count += 1;
        Ok(())
    };
    for omega in [0.05, 0.08, 0.12, 0.16] {
        check(
            &find_ground_state(&model, omega, &grid, &ShootOptions::default())
                .map_err(err)?
                .profile,
        )?;
    }
    for mass in [20.0, 40.0, 80.0] {
        let r = solve_global(&model, mass, &grid, &FlowConfig::default()).map_err(err)?;
        if !r.converged() {
            return Err(format!("flow at mass {mass} ended {:?}", r.classification));
        }
        check(&r.field)?;
    }
    Ok((
        worst <= 1e-5 && all_negative,
        format!("{count} critical points, worst |I + sextic/6| / (sextic/6) = {worst:.2e} (<= 1e-5), all I < 0: {all_negative}"),
    ))
}

fn c3_certificates(certs: &[Certificate]) -> Outcome {
    let mut bad = Vec::new();
    let mut slowest = 0.0f64;
    for c in certs {
        if !(c.pohozaev_ratio <= 1e-6 && c.residual <= 1e-6) {
            bad.push(format!(
                "{} (|P|/K={:.1e}, residual={:.1e})",
                c.label, c.pohozaev_ratio, c.residual
            ));
        }
        if let Some(s) = c.seconds {
            slowest = slowest.max(s);
            if s > 1.0 {
                bad.push(format!("{} took {s:.2} s", c.label));
            }
        }
    }
    let worst_p = certs.iter().map(|c| c.pohozaev_ratio).fold(0.0, f64::max);
    let worst_r = certs.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok((
        bad.is_empty() && !certs.is_empty(),
        format!(
            "{} solutions, worst |P|/K {worst_p:.1e}, worst residual {worst_r:.1e}, slowest shooting solve {slowest:.2} s{}",
            certs.len(),
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    ))
}

fn main() {
    // Runs only under `cargo test`'s harness-free invocation; extra arguments
    // (filters, --nocapture) are ignored.
    let total = Instant::now();
    let mut lines = Vec::new();
    let mut certs = Vec::new();
    criterion(&mut lines, 1, "hypothesis checker", 1.0, c1_hypotheses);
    criterion(&mut lines, 2, "functional identities", 10.0, c2_functionals);
    criterion(&mut lines, 4, "frequency window", 30.0, || {
        c4_window(&mut certs)
    });
    let start = Instant::now();
    let base = thresholds(RadialGrid::new(3, 160.0, 4096).unwrap());
    let threshold_secs = start.elapsed().as_secs_f64();
    match base {
        Ok(t) => {
            let mut zero_mass = None;
            criterion(&mut lines, 5, "mass and energy curve", 300.0, || {
                c5_figure(&t, &mut zero_mass)
            });
            criterion(
                &mut lines,
                6,
                "threshold consistency",
                600.0 - threshold_secs,
                || c6_consistency(&t, zero_mass),
            );
            criterion(
                &mut lines,
                7,
                "positive-energy local minimisers",
                300.0,
                || c7_local(&t),
            );
        }
        Err(e) => {
            for (id, name) in [
                (5, "mass and energy curve"),
                (6, "threshold consistency"),
                (7, "positive-energy local minimisers"),
            ] {
                criterion(&mut lines, id, name, 1.0, || {
                    Err(format!("thresholds failed: {e}"))
                });
            }
        }
    }
    criterion(&mut lines, 8, "mountain pass", 900.0, || {
        c8_mountain_pass(&mut certs)
    });
    criterion(&mut lines, 9, "nodal multiplicity", 120.0, || {
        c9_multiplicity(&mut certs)
    });
    // The one-second bound applies per solution and is checked inside.
    criterion(
        &mut lines,
        3,
        "Pohozaev certificates",
        f64::INFINITY,
        || c3_certificates(&certs),
    );
    criterion(&mut lines, 10, "dynamics", 600.0, c10_dynamics);
    criterion(&mut lines, 11, "plane sign identity", 60.0, c11_plane);

    lines.sort_by_key(|l| l.id);
    let passed = lines.iter().filter(|l| l.pass).count();
    println!(
        "\nsummary ({:.0} s; m* thresholds on (160, 4096) took {threshold_secs:.1} s):",
        total.elapsed().as_secs_f64()
    );
    for l in &lines {
        println!("{}", l.text);
    }
    println!("{passed} of {} criteria pass", lines.len());
}
