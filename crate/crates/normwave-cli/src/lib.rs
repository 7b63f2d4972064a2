//! Command-line front end: configuration, artifact persistence and the
//! subcommands wrapping the solver modules.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{RunConfig, OUT_ENV};
use crate::error::CliError;
use crate::output::Output;

#[derive(Debug, Parser)]
#[command(
    name = "normwave",
    version,
    about = "Normalized standing waves of radial nonlinear Schroedinger equations"
)]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps and path relaxation (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural hypotheses of the configured nonlinearity.
    Check {
        /// Hypotheses that must hold (f1..f5, a1..a3), comma separated or repeated.
        #[arg(long, value_delimiter = ',')]
        require: Vec<String>,
    },
    /// Global minimisation at fixed mass.
    Ground { mass: f64 },
    /// Local minimisation inside the barrier, seeded by the m* minimiser.
    Local {
        mass: f64,
        /// Thresholds document from an earlier `thresholds` run.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Estimate m*, m** and the barrier rho.
    Thresholds,
    /// Shoot at one frequency, or sweep a frequency range.
    Shoot {
        #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
        omega: Option<f64>,
        /// Also solve for profiles with 1..=K sign changes.
        #[arg(long, default_value_t = 0, conflicts_with = "sweep")]
        nodes: usize,
        /// `A B K`: K equally spaced frequencies from A to B.
        #[arg(long, num_args = 3, value_names = ["A", "B", "K"], allow_negative_numbers = true)]
        sweep: Option<Vec<f64>>,
    },
    /// Mountain-pass saddle at fixed mass.
    Mpass {
        mass: f64,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Curve CSV from `shoot --sweep`, for the equal-mass cross-check.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Also write the relaxed path, one column per node.
        #[arg(long)]
        snapshot: bool,
    },
    /// Propagate a field CSV over [0, T].
    Evolve { field: PathBuf, horizon: f64 },
    /// Perturb a standing wave by `eps` and track its orbit distance.
    Stability {
        field: PathBuf,
        epsilon: f64,
        horizon: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Ground { .. } => "ground",
            Command::Local { .. } => "local",
            Command::Thresholds => "thresholds",
            Command::Shoot { sweep: Some(_), .. } => "sweep",
            Command::Shoot { .. } => "shoot",
            Command::Mpass { .. } => "mpass",
            Command::Evolve { .. } => "evolve",
            Command::Stability { .. } => "stability",
        }
    }
}

/// Runs one command; `arguments` are recorded in the manifest.
pub fn run(cli: Cli, arguments: Vec<String>) -> Result<(), CliError> {
    let out_override = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let resolved = RunConfig::load(cli.config.as_deref())?.resolve(out_override)?;
    if cli.jobs > 0 {
        // Fails only when a pool already exists, which keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    let mut out = Output::new(&resolved, cli.command.name(), arguments)?;
    let r = &resolved;
    let result = match &cli.command {
        Command::Check { require } => commands::check(r, &mut out, require),
        Command::Ground { mass } => commands::ground(r, &mut out, *mass),
        Command::Local { mass, thresholds } => {
            commands::local(r, &mut out, *mass, thresholds.as_deref())
        }
        Command::Thresholds => commands::thresholds(r, &mut out),
        Command::Shoot { sweep: Some(s), .. } => commands::sweep(r, &mut out, s[0], s[1], s[2]),
        Command::Shoot { omega, nodes, .. } => {
            let omega =
                omega.ok_or_else(|| CliError::Config("shoot needs --omega or --sweep".into()))?;
            commands::shoot(r, &mut out, omega, *nodes)
        }
        Command::Mpass {
            mass,
            thresholds,
            curve,
            snapshot,
        } => commands::mpass(
            r,
            &mut out,
            *mass,
            thresholds.as_deref(),
            curve.as_deref(),
            *snapshot,
        ),
        Command::Evolve { field, horizon } => commands::evolve_cmd(r, &mut out, field, *horizon),
        Command::Stability {
            field,
            epsilon,
            horizon,
        } => commands::stability(r, &mut out, field, *epsilon, *horizon),
    };
    out.finish()?;
    result
}
