//! Bayesian reconstruction of a planar fault and its slip from surface
//! displacements in a homogeneous elastic half space.
//!
//! The crate is organised bottom-up: [`green`] evaluates the half-space
//! response to a point dislocation, [`grid`] discretizes the fault, [`forward`]
//! assembles the linear operator from slip to station data, [`solver`] handles
//! the regularized slip problem and the choice of `C`, and [`posterior`] sweeps
//! the geometry box. [`scenario`], [`io`] and [`pipeline`] provide
//! configuration, file formats and the end-to-end run.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod forward;
pub mod green;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod posterior;
pub mod scenario;
pub mod solver;

pub use error::{Error, ErrorKind, Result};
pub use exec::Exec;
pub use forward::{ForwardSystem, StationSet};
pub use green::{DislocationSource, ElasticMedium, GeometryParam};
pub use grid::{DifferenceOperators, FaultGrid, Rake};
pub use posterior::{AxisRange, ParameterBox, PosteriorGrid};
pub use scenario::{ScenarioConfig, SyntheticTruth};
