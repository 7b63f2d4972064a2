//! JSON documents for solver results. Floats are written with 17 significant
//! digits; non-finite values become `null`.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::dynamics::{StabilityVerdict, Trajectory};
use crate::error::Result;
use crate::flow::{Classification, SolveReport};
use crate::minimax::{BarrierWitness, MountainPassReport, ShootingCheck};
use crate::radial::RealField;
use crate::shooting::{ExitKind, ShootResult};

/// Pretty printer that writes every float as `{:.16e}`.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// A field either embedded or referenced by the path of its CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "storage", rename_all = "snake_case")]
pub enum FieldRef {
    Inline {
        dimension: usize,
        r_max: f64,
        n: usize,
        r: Vec<f64>,
        u: Vec<f64>,
    },
    Csv {
        path: String,
    },
}

impl FieldRef {
    pub fn inline(field: &RealField) -> Self {
        let g = field.grid();
        Self::Inline {
            dimension: g.dimension(),
            r_max: g.r_max(),
            n: g.len(),
            r: g.nodes().to_vec(),
            u: field.values().to_vec(),
        }
    }

    pub fn csv(path: impl Into<String>) -> Self {
        Self::Csv { path: path.into() }
    }
}

/// Recorded flow diagnostics, one array per quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryArrays {
    pub step: Vec<usize>,
    pub energy: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReportDoc {
    pub classification: Classification,
    pub mass: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub pohozaev: f64,
    pub mu: f64,
    pub residual: f64,
    pub sign_changes: usize,
    pub steps: usize,
    pub trajectory: TrajectoryArrays,
    pub field: FieldRef,
}

impl SolveReport {
    pub fn to_doc(&self, field: FieldRef) -> SolveReportDoc {
        let f = &self.functionals;
        let mut t = TrajectoryArrays::default();
        for p in &self.trajectory {
            t.step.push(p.step);
            t.energy.push(p.energy);
            t.kinetic.push(p.kinetic);
            t.mass.push(p.mass);
        }
        SolveReportDoc {
            classification: self.classification,
            mass: f.mass,
            energy: f.energy,
            kinetic: f.kinetic,
            potential: f.potential,
            pohozaev: f.pohozaev,
            mu: self.mu,
            residual: self.residual,
            sign_changes: self.field.sign_changes(1e-8 * self.field.max_abs()),
            steps: self.steps,
            trajectory: t,
            field,
        }
    }

    pub fn to_json(&self, field: FieldRef) -> Result<String> {
        to_json(&self.to_doc(field))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountainPassDoc {
    pub mass: f64,
    pub rho_hat: f64,
    pub level: f64,
    pub level_bound_holds: bool,
    pub argmax: usize,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub barrier: BarrierWitness,
    pub shooting: Option<ShootingCheck>,
    pub candidate: FieldRef,
    pub saddle: SolveReportDoc,
    pub minimizer: Option<SolveReportDoc>,
}

impl MountainPassReport {
    /// Takes the storage of the candidate, saddle and minimiser fields.
    pub fn to_doc(
        &self,
        candidate: FieldRef,
        saddle: FieldRef,
        minimizer: FieldRef,
    ) -> MountainPassDoc {
        MountainPassDoc {
            mass: self.mass,
            rho_hat: self.rho_hat,
            level: self.level,
            level_bound_holds: self.level_bound_holds(),
            argmax: self.argmax,
            iterations: self.iterations,
            trace: self.trace.clone(),
            barrier: self.barrier,
            shooting: self.shooting,
            candidate,
            saddle: self.saddle.to_doc(saddle),
            minimizer: self.minimizer.as_ref().map(|m| m.to_doc(minimizer)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootDoc {
    pub omega: f64,
    pub u0: f64,
    pub nodes: usize,
    pub exit: ExitKind,
    pub mass: f64,
    pub kinetic: f64,
    pub energy: f64,
    pub action: f64,
    pub pohozaev: f64,
    pub residual: f64,
    pub r_match: f64,
    pub match_mismatch: f64,
    pub bracket: (f64, f64),
    pub plateau: Option<(f64, f64)>,
    pub field: FieldRef,
}

impl ShootResult {
    pub fn to_doc(&self, field: FieldRef) -> ShootDoc {
        ShootDoc {
            omega: self.omega,
            u0: self.u0,
            nodes: self.nodes,
            exit: self.exit,
            mass: self.mass,
            kinetic: self.kinetic,
            energy: self.energy,
            action: self.action,
            pohozaev: self.pohozaev,
            residual: self.residual,
            r_match: self.r_match,
            match_mismatch: self.match_mismatch,
            bracket: self.bracket,
            plateau: self.plateau,
            field,
        }
    }
}

/// Summary of a propagation run; the samples go to the trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveDoc {
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
    pub max_distance: Option<f64>,
    pub trajectory: String,
}

impl EvolveDoc {
    pub fn new(traj: &Trajectory, horizon: f64, dt: f64, trajectory: impl Into<String>) -> Self {
        Self {
            horizon,
            dt,
            steps: traj.steps,
            samples: traj.samples.len(),
            max_mass_drift: traj.max_mass_drift(),
            max_energy_drift: traj.max_energy_drift(),
            max_distance: traj.max_distance(),
            trajectory: trajectory.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDoc {
    #[serde(flatten)]
    pub verdict: StabilityVerdict,
    pub run: EvolveDoc,
}
