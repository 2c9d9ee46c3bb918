//! Sequential and batch Bayesian optimization over sampling distributions.

pub mod acquisition;
pub mod domain;
pub mod dist;
pub mod error;
pub mod gp;
pub mod objectives;
pub mod metrics;
pub mod optimizer;
pub mod penalty;
pub mod scalar;

pub use error::{Result, SsboError};
pub use scalar::Scalar;

pub type Gp = gp::GpModel<f64>;
pub type Kernel = gp::KernelSpec<f64>;
pub type Grid = domain::GridDomain<f64>;
pub type Sequences = domain::SequenceDomain<f64>;
pub type Problem = optimizer::Problem<f64>;
pub type Settings = optimizer::RunSettings<f64>;
pub type Trace = optimizer::RunTrace<f64>;
pub type Summary = metrics::CurveSummary<f64>;
pub type Bound = metrics::BoundReport<f64>;
