//! Lower bounds on the minimum time of a quantum measurement, verified by
//! exact unitary propagation of truncated system-apparatus-environment
//! states.
//!
//! The crate has three layers:
//!
//! * numerics — [`hilbert`] (dense operators on labelled tensor spaces),
//!   [`entropy`] (entropy, varentropy, relative entropy, outcome-count caps),
//!   [`bath`] (thermal occupations, truncated Gibbs states, bath integrals);
//! * physics — [`models`] (the spin-boson and boson-boson measurement
//!   models), [`dynamics`] (trajectory propagation and the speed-limit /
//!   rate-identity verifiers), [`bounds`] (the closed-form timescale bound);
//! * tooling — [`config`], [`output`] and [`cli`] behind the `taubound`
//!   binary.

pub mod bath;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod hilbert;
pub mod models;
pub mod output;

pub use error::{Error, Result};
