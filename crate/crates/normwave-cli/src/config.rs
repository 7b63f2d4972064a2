//! Run configuration read from TOML. Grammar:
//!
//! ```toml
//! output_dir = "normwave-out"   # NORMWAVE_OUT overrides
//!
//! [model]
//! kind = "cubic_quintic"        # or "power_sum"
//! dimension = 3
//! terms = [{ coefficient = 1.0, exponent = 4.0 }]   # power_sum only
//!
//! [grid]
//! r_max = 160.0
//! n = 4096
//!
//! [flow]          # dt, dt_max, max_steps, tol, rho_hat, spread_kinetic_floor,
//!                 # record_every, seed_width, polish, probe_seed
//! [thresholds]    # bracket = [lo, hi] for the m* bisection
//! [shooting]      # scan_probes, u0_min, u0_max, rel_width, reach, match_tol
//! [sweep]         # chunks: contiguous warm-started runs of a sweep
//! [minimax]       # segments, max_iters, dt, redistribute_every, stall_window,
//!                 # stall_tol, polish_tol, climb_iters
//! [dynamics]      # dt, record_every, threshold_factor
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use normwave::flow::FlowConfig;
use normwave::minimax::MinimaxConfig;
use normwave::shooting::ShootOptions;
use normwave::{NonlinearityKind, NonlinearityModel, PowerTerm, RadialGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const OUT_ENV: &str = "NORMWAVE_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: NonlinearityKind,
    pub dimension: usize,
    pub terms: Option<Vec<PowerTerm>>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: NonlinearityKind::CubicQuintic,
            dimension: 3,
            terms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub r_max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r_max: 160.0,
            n: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSpec {
    pub bracket: (f64, f64),
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        Self {
            bracket: (100.0, 400.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Fixed independently of `--jobs` so results do not depend on the pool.
    pub chunks: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { chunks: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSpec {
    pub dt: f64,
    pub record_every: usize,
    pub threshold_factor: f64,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            record_every: 100,
            threshold_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub flow: FlowConfig,
    pub thresholds: ThresholdSpec,
    pub shooting: ShootOptions,
    pub sweep: SweepSpec,
    pub minimax: MinimaxConfig,
    pub dynamics: DynamicsSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("normwave-out"),
            model: ModelSpec::default(),
            grid: GridSpec::default(),
            flow: FlowConfig::default(),
            thresholds: ThresholdSpec::default(),
            shooting: ShootOptions::default(),
            sweep: SweepSpec::default(),
            minimax: MinimaxConfig::default(),
            dynamics: DynamicsSpec::default(),
        }
    }
}

/// A validated configuration with its model and grid built.
pub struct Resolved {
    pub config: RunConfig,
    pub model: NonlinearityModel,
    pub grid: Arc<RadialGrid>,
    /// The echoed configuration and its SHA-256.
    pub text: String,
    pub hash: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn build_model(&self) -> Result<NonlinearityModel, CliError> {
        let m = &self.model;
        let built = match m.kind {
            NonlinearityKind::CubicQuintic => {
                let base = NonlinearityModel::cubic_quintic();
                if let Some(t) = &m.terms {
                    if t.as_slice() != base.terms() {
                        return Err(CliError::Config(
                            "cubic_quintic takes no custom terms".into(),
                        ));
                    }
                }
                base.with_dimension(m.dimension)
            }
            NonlinearityKind::PowerSum => {
                let terms = m
                    .terms
                    .clone()
                    .ok_or_else(|| CliError::Config("power_sum needs a term list".into()))?;
                NonlinearityModel::power_sum(terms, m.dimension)
            }
        };
        built.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies the output override, validates every block and fills in the
    /// resolved term list.
    pub fn resolve(mut self, out_override: Option<PathBuf>) -> Result<Resolved, CliError> {
        if let Some(dir) = out_override {
            self.output_dir = dir;
        }
        let model = self.build_model()?;
        self.model.terms = Some(model.terms().to_vec());
        let grid = RadialGrid::new(self.model.dimension, self.grid.r_max, self.grid.n)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let bad = |e: normwave::Error| CliError::Config(e.to_string());
        self.flow.validate().map_err(bad)?;
        self.minimax.validate().map_err(bad)?;
        self.shooting.validate().map_err(bad)?;
        let (lo, hi) = self.thresholds.bracket;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(CliError::Config(format!(
                "threshold bracket ({lo}, {hi}) is not a positive interval"
            )));
        }
        if self.sweep.chunks == 0 {
            return Err(CliError::Config("sweep.chunks must be positive".into()));
        }
        let d = &self.dynamics;
        if !(d.dt > 0.0 && d.dt.is_finite()) || d.record_every == 0 || !(d.threshold_factor > 0.0) {
            return Err(CliError::Config(
                "dynamics needs dt > 0, record_every > 0, threshold_factor > 0".into(),
            ));
        }
        let text = toml::to_string(&self).map_err(|e| CliError::Config(e.to_string()))?;
        let hash = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok(Resolved {
            config: self,
            model,
            grid,
            text,
            hash,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let r = RunConfig::parse("").unwrap().resolve(None).unwrap();
        assert_eq!(r.model, NonlinearityModel::cubic_quintic());
        assert_eq!(r.grid.len(), 4096);
        assert_eq!(r.hash.len(), 64);
    }

    #[test]
    fn resolved_text_round_trips() {
        let text = "[model]\ndimension = 2\n[grid]\nn = 512\n[flow]\ndt = 0.25\n";
        let r = RunConfig::parse(text).unwrap().resolve(None).unwrap();
        let again = RunConfig::parse(&r.text).unwrap();
        assert_eq!(again, r.config);
        assert_eq!(again.resolve(None).unwrap().hash, r.hash);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("[grid]\nnodes = 10\n").is_err());
        let bad = RunConfig::parse("[flow]\ndt = -1.0\n").unwrap();
        assert!(matches!(bad.resolve(None), Err(CliError::Config(_))));
        let no_terms = RunConfig::parse("[model]\nkind = \"power_sum\"\n").unwrap();
        assert!(no_terms.resolve(None).is_err());
    }

    #[test]
    fn override_changes_output_and_hash() {
        let a = RunConfig::default().resolve(None).unwrap();
        let b = RunConfig::default()
            .resolve(Some("elsewhere".into()))
            .unwrap();
        assert_eq!(b.config.output_dir, PathBuf::from("elsewhere"));
        assert_ne!(a.hash, b.hash);
    }
}
