//! Chance-constrained steady-state optimal gas flow.
//!
//! The crate is organized bottom-up: [`network`] describes the pipeline,
//! [`stochastic`] discretizes a scalar uncertain withdrawal into cells,
//! [`steady`] solves the flow equations for fixed controls, [`nlp`] is the
//! interior-point solver, [`ogf`] assembles and decodes the optimization
//! problems and [`pricing`] turns per-cell solutions into distributions and
//! reports.

pub mod error;
pub mod network;
pub mod nlp;
pub mod ogf;
pub mod pricing;
pub mod scaling;
pub mod steady;
pub mod stochastic;

pub use error::{GridError, NetworkError, NlpError, OgfError, PricingError, SteadyError};
pub use network::{Compressor, EdgeRef, Incidence, Network, Node, NodeKind, Pipe};
pub use stochastic::{StochasticGrid, UncertaintySpec};
