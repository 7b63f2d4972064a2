//! Normalized standing waves of radial nonlinear Schroedinger equations:
//! prescribed-mass minimisers, mountain-pass solutions, shooting and dynamics.

pub mod dynamics;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod minimax;
pub mod model;
pub mod newton;
pub mod ode;
pub mod radial;
pub mod report;
pub mod rho;
pub mod shooting;

pub use error::{Error, Result};
pub use model::{HypothesisReport, NonlinearityKind, NonlinearityModel, PowerTerm, Verdict};
pub use radial::{Functionals, RadialGrid, RealField};
