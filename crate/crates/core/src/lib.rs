//! Numerical laboratory for McKean–Vlasov SDEs with distribution-dependent
//! noise and singular drift.
//!
//! The crate simulates the equation with interacting particles, realizes the
//! fixed point of the frozen-drift map on measure flows by Picard iteration,
//! evaluates transition densities by the frozen-Gaussian parametrix series,
//! solves the one-dimensional Zvonkin PDE, and checks the associated metric
//! inequalities and kernel bounds numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coefficients;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod parametrix;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod zvonkin;

pub use coefficients::{CoefficientSet, Constants, LawView};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentKind, ExperimentReport};
pub use measures::{EmpiricalMeasure, FlowMetric, MeasureFlow, MetricReport};
pub use parametrix::{FrozenKernel, KernelContext, KernelQuadrature, ParametrixResult};
pub use simulator::{ParticleEnsemble, SimulationPlan};
pub use zvonkin::{GateReport, GridSpec, ZvonkinSolution};
