//! Spectral shift functions of self-adjoint pairs computed from logarithms of
//! matrix Nevanlinna functions, with finite-rank pairs and 1D boundary models.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod linalg;
pub mod models;
pub mod nevlog;
pub mod opcore;
pub mod quad;
pub mod sampling;
pub mod ssf;
pub mod triple;
pub mod verify;

pub use error::{Result, SsfError};
pub use exec::Execution;
pub use nevlog::{EpsilonSchedule, LogMethod, NevanlinnaFunction};
pub use opcore::HermitianOperator;
pub use ssf::SsfGrid;
pub use triple::PerturbationPair;
