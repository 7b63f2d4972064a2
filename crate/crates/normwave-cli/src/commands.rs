//! One function per subcommand. Each writes its artifacts through `Output`
//! and returns the error that selects the exit code, after the artifacts of
//! a non-converged run have been written.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use normwave::dynamics::{evolve, stability_probe, ComplexField};
use normwave::flow::{
    estimate_mstar, estimate_mstarstar, solve_global, solve_local, Classification, FlowConfig,
    MassProbe, MstarEstimate, SolveReport,
};
use normwave::minimax::{saddle_report, ShootingReference};
use normwave::radial::{functionals, read_field_csv, resample, residual, RealField};
use normwave::report::{EvolveDoc, FieldRef, ShootDoc, SolveReportDoc, StabilityDoc};
use normwave::shooting::{find_nodal_state, sweep_curve, zero_energy_state, Curve};
use normwave::{HypothesisReport, RadialGrid, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{relative_to, Output};
use crate::plot::curve_svg;

fn not_converged(what: &str, report: &SolveReport) -> Result<(), CliError> {
    match report.classification {
        Classification::MaxSteps | Classification::DriftedOutOfLocalWell => {
            Err(CliError::NoConvergence(format!(
                "{what} ended as {:?} after {} steps",
                report.classification, report.steps
            )))
        }
        _ => Ok(()),
    }
}

fn on_grid(u: &RealField, grid: &Arc<RadialGrid>) -> Result<RealField, CliError> {
    Ok(if u.grid().same_as(grid) {
        u.clone()
    } else {
        resample(u, grid.clone())?
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckDoc {
    pub report: HypothesisReport,
    pub required: Vec<String>,
    pub failed: Vec<String>,
}

pub fn check(res: &Resolved, out: &mut Output, require: &[String]) -> Result<(), CliError> {
    let report = res.model.check_hypotheses();
    let mut failed = Vec::new();
    for name in require {
        match report.verdict(name) {
            None => return Err(CliError::Config(format!("unknown hypothesis {name:?}"))),
            Some(v) if !v.holds() => failed.push(name.to_ascii_lowercase()),
            Some(_) => {}
        }
    }
    println!("dimension {}", report.dimension);
    for (name, v) in report.flags() {
        let mark = match v {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Undetermined => "undetermined",
        };
        println!("  {name:<3} {mark}");
    }
    if let Some(t) = report.theta {
        println!("  theta {t}");
    }
    let doc = CheckDoc {
        report,
        required: require.to_vec(),
        failed: failed.clone(),
    };
    out.write_json("json", &doc)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Hypothesis(format!(
            "required hypotheses fail: {}",
            failed.join(", ")
        )))
    }
}

fn write_report(out: &mut Output, report: &SolveReport) -> Result<(), CliError> {
    let field = out.write_field("field.csv", &report.field)?;
    out.write_json("json", &report.to_doc(FieldRef::csv(field)))?;
    Ok(())
}

pub fn ground(res: &Resolved, out: &mut Output, mass: f64) -> Result<(), CliError> {
    let report = solve_global(&res.model, mass, &res.grid, &res.config.flow)?;
    write_report(out, &report)?;
    println!(
        "ground: {:?}, I = {}, mu = {}, steps = {}",
        report.classification,
        report.energy(),
        report.mu,
        report.steps
    );
    not_converged("global flow", &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsDoc {
    pub m_star: f64,
    pub m_star_bracket: (f64, f64),
    pub m_star_star: f64,
    pub m_star_star_bracket: (f64, f64),
    /// Barrier estimate at `m_star`, used for the local well below it.
    pub rho_hat: f64,
    pub lambda_hat: f64,
    pub probes: Vec<MassProbe>,
    pub minimizer: SolveReportDoc,
}

pub struct Thresholds {
    pub mstar: MstarEstimate,
    pub m_star_star: f64,
    pub rho_hat: f64,
}

fn compute_thresholds(res: &Resolved) -> Result<(Thresholds, ThresholdsDoc), CliError> {
    let cfg = &res.config.flow;
    let mstar = estimate_mstar(&res.model, &res.grid, cfg, res.config.thresholds.bracket)?;
    let mss = estimate_mstarstar(&res.model, &res.grid, cfg, &mstar)?;
    let doc = ThresholdsDoc {
        m_star: mstar.m_star,
        m_star_bracket: mstar.bracket,
        m_star_star: mss.m_star_star,
        m_star_star_bracket: mss.bracket,
        rho_hat: mss.rho_hat,
        lambda_hat: mss.lambda_hat,
        probes: mstar.probes.clone(),
        minimizer: mstar.minimizer.to_doc(FieldRef::csv(String::new())),
    };
    Ok((
        Thresholds {
            mstar,
            m_star_star: mss.m_star_star,
            rho_hat: mss.rho_hat,
        },
        doc,
    ))
}

pub fn thresholds(res: &Resolved, out: &mut Output) -> Result<(), CliError> {
    let (t, mut doc) = compute_thresholds(res)?;
    let field = out.write_field("minimizer.csv", &t.mstar.minimizer.field)?;
    doc.minimizer.field = FieldRef::csv(field);
    out.write_json("json", &doc)?;
    println!(
        "m* = {}, m** = {}, rho(m*) = {}",
        doc.m_star, doc.m_star_star, doc.rho_hat
    );
    Ok(())
}

/// Reads a thresholds document and rebuilds the minimiser it references.
pub fn load_thresholds(path: &Path, res: &Resolved) -> Result<Thresholds, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let doc: ThresholdsDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let field = match &doc.minimizer.field {
        FieldRef::Csv { path: p } => read_field_csv(&relative_to(path, p))?,
        FieldRef::Inline { .. } => {
            return Err(CliError::Config(
                "thresholds minimiser must be stored as CSV".into(),
            ))
        }
    };
    if field.grid().dimension() != res.model.dimension() {
        return Err(CliError::Config(
            "thresholds were computed in another dimension".into(),
        ));
    }
    let f = functionals(&field, &res.model)?;
    let minimizer = SolveReport {
        residual: residual(&field, f.multiplier, &res.model)?,
        mu: f.multiplier,
        functionals: f,
        field,
        classification: doc.minimizer.classification,
        steps: doc.minimizer.steps,
        trajectory: Vec::new(),
    };
    Ok(Thresholds {
        mstar: MstarEstimate {
            m_star: doc.m_star,
            bracket: doc.m_star_bracket,
            minimizer,
            probes: doc.probes,
        },
        m_star_star: doc.m_star_star,
        rho_hat: doc.rho_hat,
    })
}

fn thresholds_from(res: &Resolved, path: Option<&Path>) -> Result<Thresholds, CliError> {
    match path {
        Some(p) => load_thresholds(p, res),
        None => compute_thresholds(res).map(|(t, _)| t),
    }
}

pub fn local(
    res: &Resolved,
    out: &mut Output,
    mass: f64,
    thresholds: Option<&Path>,
) -> Result<(), CliError> {
    let t = thresholds_from(res, thresholds)?;
    let seed = on_grid(&t.mstar.minimizer.field, &res.grid)?;
    let cfg = FlowConfig {
        rho_hat: Some(t.rho_hat),
        ..res.config.flow.clone()
    };
    let report = solve_local(&res.model, mass, &seed, &cfg)?;
    write_report(out, &report)?;
    println!(
        "local: {:?}, I = {}, mu = {}, steps = {}",
        report.classification,
        report.energy(),
        report.mu,
        report.steps
    );
    not_converged("local flow", &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootFamilyDoc {
    pub omega: f64,
    pub states: Vec<ShootDoc>,
    /// Whether the action strictly increases with the node count.
    pub actions_increasing: bool,
}

pub fn shoot(res: &Resolved, out: &mut Output, omega: f64, nodes: usize) -> Result<(), CliError> {
    let mut states = Vec::new();
    for k in 0..=nodes {
        let s = find_nodal_state(&res.model, omega, k, &res.grid, &res.config.shooting)?;
        let field = out.write_field(&format!("k{k}.csv"), &s.profile)?;
        println!(
            "shoot: omega = {omega}, nodes = {k}, u0 = {}, mass = {}, J = {}",
            s.u0, s.mass, s.action
        );
        states.push(s.to_doc(FieldRef::csv(field)));
    }
    let actions_increasing = states.windows(2).all(|w| w[1].action > w[0].action);
    out.write_json(
        "json",
        &ShootFamilyDoc {
            omega,
            states,
            actions_increasing,
        },
    )?;
    Ok(())
}

/// Zero-energy solution located by secant iteration between sampled points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroEnergy {
    pub omega: f64,
    pub mass: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDoc {
    pub samples: usize,
    pub present: usize,
    pub omega_star: Option<f64>,
    pub min_mass: Option<f64>,
    pub interior_mass_minima: usize,
    pub energy_sign_changes: usize,
    pub zero_energy: Option<ZeroEnergy>,
    pub curve: String,
    pub plot: String,
}

pub fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
        .collect()
}

pub fn sweep(res: &Resolved, out: &mut Output, a: f64, b: f64, k: f64) -> Result<(), CliError> {
    if !(k.fract() == 0.0 && k >= 2.0) {
        return Err(CliError::Config(format!(
            "sweep count must be an integer of at least 2, got {k}"
        )));
    }
    if !(a > 0.0 && b > a) {
        return Err(CliError::Config(format!(
            "sweep needs 0 < a < b, got ({a}, {b})"
        )));
    }
    let omegas = linspace(a, b, k as usize);
    let curve = sweep_curve(
        &res.model,
        &omegas,
        &res.grid,
        &res.config.shooting,
        res.config.sweep.chunks,
    )?;
    let csv = out.write("curve.csv", &curve.to_csv())?;
    let svg = out.write("svg", &curve_svg(&curve))?;
    let zero_energy = match zero_energy_state(&res.model, &curve, &res.grid, &res.config.shooting) {
        Ok(s) => Some(ZeroEnergy {
            omega: s.omega,
            mass: s.mass,
            energy: s.energy,
        }),
        Err(normwave::Error::NoBracket(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let min = curve.present().min_by(|p, q| p.mass.total_cmp(&q.mass));
    let doc = SweepDoc {
        samples: curve.omegas.len(),
        present: curve.present().count(),
        omega_star: curve.omega_star(),
        min_mass: min.map(|p| p.mass),
        interior_mass_minima: curve.interior_mass_minima(),
        energy_sign_changes: curve.energy_sign_changes().len(),
        zero_energy,
        curve: csv,
        plot: svg,
    };
    out.write_json("json", &doc)?;
    println!(
        "sweep: {} of {} points, interior mass minima {}, omega* = {:?}, zero-energy mass {:?}",
        doc.present,
        doc.samples,
        doc.interior_mass_minima,
        doc.omega_star,
        doc.zero_energy.map(|z| z.mass)
    );
    Ok(())
}

pub fn mpass(
    res: &Resolved,
    out: &mut Output,
    mass: f64,
    thresholds: Option<&Path>,
    curve: Option<&Path>,
    snapshot: bool,
) -> Result<(), CliError> {
    let t = thresholds_from(res, thresholds)?;
    let curve = match curve {
        Some(p) => Some(Curve::from_csv(
            &std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        )?),
        None => None,
    };
    let reference = curve.as_ref().map(|c| ShootingReference {
        curve: c,
        grid: &res.grid,
        opts: &res.config.shooting,
    });
    let report = saddle_report(
        &res.model,
        mass,
        &res.grid,
        &res.config.flow,
        &res.config.minimax,
        &t.mstar,
        t.m_star_star,
        reference,
    )?;
    if snapshot {
        out.write("path.csv", &report.path.to_csv())?;
    }
    let cand = out.write_field("candidate.csv", &report.candidate)?;
    let saddle = out.write_field("saddle.csv", &report.saddle.field)?;
    let minimizer = match &report.minimizer {
        Some(m) => out.write_field("minimizer.csv", &m.field)?,
        None => String::new(),
    };
    match (&curve, &report.shooting) {
        (Some(_), None) => {
            println!("mpass: the curve does not reach mass {mass} on the low-frequency branch")
        }
        (_, Some(s)) => println!(
            "mpass: shooting at omega = {} gives I = {} ({:e} relative)",
            s.omega, s.energy, s.relative_difference
        ),
        _ => {}
    }
    let doc = report.to_doc(
        FieldRef::csv(cand),
        FieldRef::csv(saddle),
        FieldRef::csv(minimizer),
    );
    out.write_json("json", &doc)?;
    println!(
        "mpass: level = {}, rho = {}, saddle I = {}, {:?}",
        report.level,
        report.rho_hat,
        report.saddle.energy(),
        report.saddle.classification
    );
    not_converged("saddle polish", &report.saddle)
}

fn read_field(path: &Path, res: &Resolved) -> Result<RealField, CliError> {
    let u = read_field_csv(path)?;
    if u.grid().dimension() != res.model.dimension() {
        return Err(CliError::Config(format!(
            "{} is a {}-dimensional field but the model has N = {}",
            path.display(),
            u.grid().dimension(),
            res.model.dimension()
        )));
    }
    Ok(u)
}

pub fn evolve_cmd(
    res: &Resolved,
    out: &mut Output,
    field: &PathBuf,
    horizon: f64,
) -> Result<(), CliError> {
    let u = read_field(field, res)?;
    let d = &res.config.dynamics;
    let traj = evolve(
        &ComplexField::from_real(&u),
        horizon,
        d.dt,
        &res.model,
        d.record_every,
        Some(&u),
    )?;
    let csv = out.write("trajectory.csv", &traj.to_csv())?;
    let doc = EvolveDoc::new(&traj, horizon, d.dt, csv);
    out.write_json("json", &doc)?;
    println!(
        "evolve: {} steps, mass drift {:e}, energy drift {:e}",
        doc.steps, doc.max_mass_drift, doc.max_energy_drift
    );
    Ok(())
}

pub fn stability(
    res: &Resolved,
    out: &mut Output,
    field: &PathBuf,
    epsilon: f64,
    horizon: f64,
) -> Result<(), CliError> {
    let u = read_field(field, res)?;
    let d = &res.config.dynamics;
    let (verdict, traj) = stability_probe(
        &u,
        epsilon,
        horizon,
        d.dt,
        &res.model,
        d.threshold_factor,
        d.record_every,
    )?;
    let csv = out.write("trajectory.csv", &traj.to_csv())?;
    let doc = StabilityDoc {
        verdict: verdict.clone(),
        run: EvolveDoc::new(&traj, horizon, d.dt, csv),
    };
    out.write_json("json", &doc)?;
    println!(
        "stability: {:?}, max distance {:e} against threshold {:e}",
        verdict.verdict, verdict.max_distance, verdict.threshold
    );
    Ok(())
}
