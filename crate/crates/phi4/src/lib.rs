//! Classical simulation toolkit for lattice phi^4 scalar field theory on qubits.
//!
//! The crate covers the full pipeline: discretized field operators and exact
//! diagonalization ([`model`]), Trotter-step circuits in a small gate IR
//! ([`circuits`]), statevector execution ([`simulator`]), variational local
//! state preparation ([`varprep`]), adiabatic evolution with schedule search
//! ([`adiabatic`]), and the effective two-level model for adiabatic-time
//! scaling ([`twolevel`]).

pub mod circuits;
pub mod error;
mod linalg;
pub mod model;
pub mod simulator;
pub mod twolevel;
pub mod varprep;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
