//! Current steering for directional deep brain stimulation leads.
//!
//! The crate turns a lead placement and a labelled point cloud (target points
//! that should be activated, constraint points that should not) into an
//! optimal per-contact current distribution. Two formulations are provided:
//!
//! - a linear program that maximizes the summed field at the targets while a
//!   fraction `theta` of the constraint points stays below threshold, and
//! - a mixed-integer program with one binary indicator per point that
//!   directly minimizes the fraction of missed targets plus activated
//!   constraints.
//!
//! Both sit on top of an in-crate revised simplex ([`lp`]) and a best-first
//! branch-and-bound ([`milp`]). Fields come from an analytic point-source
//! model ([`field`]) or from an externally computed transfer matrix CSV.
//!
//! Units are fixed throughout: millimetres for positions, milliamperes for
//! currents, V/mm for field norms. Contact order is distal ring first, then
//! rows towards the proximal end, segments A, B, C.

pub mod cli;
pub mod cloud;
pub mod error;
pub mod field;
pub mod lead;
pub mod lp;
pub mod metrics;
pub mod milp;
pub mod program;

pub use cloud::{Label, LabeledCloud};
pub use error::{Error, Result};
pub use field::{ActivationMask, FieldModelConfig, TransferMatrix};
pub use lead::{LeadInstance, LeadModel};
pub use lp::{LinearProgram, LpOptions, LpSolution, LpStatus};
pub use milp::{MilpOptions, MilpSolution, MilpStatus, MixedIntegerProgram};
pub use program::{CurrentDistribution, Method, OptimizationReport, ProblemParams, StimulationProblem};

/// 3-vector in millimetres.
pub type Vec3 = nalgebra::Vector3<f64>;
