//! Exact diagonalization of interacting bosons on an open chain with a
//! quasi-periodic (Aubry-André) on-site potential, together with the
//! machinery needed to test eigenstate thermalization:
//!
//! - [`basis`]: occupation-number basis with O(M) ranking.
//! - [`hamiltonian`]: sparse assembly of the Bose-Hubbard/Aubry-André operator.
//! - [`spectral`]: dense symmetric eigendecomposition and gap-ratio statistics.
//! - [`observables`]: single-site number distributions, entanglement entropy,
//!   participation ratios and windowed dispersion of eigenstate expectation values.
//! - [`dynamics`]: spectral propagation of quenched occupation states and
//!   equilibrium (snapshot / diagonal ensemble / time-window) values.
//! - [`thermalization`]: microcanonical references, trace distance and verdicts.
//! - [`campaign`]: disorder-realization ensembles, deterministic seeding and CSV output.
//!
//! Parallel loops go through [`parallel`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod basis;
pub mod campaign;
pub mod check;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod observables;
pub mod oracle;
pub mod parallel;
pub mod spectral;
pub mod thermalization;

pub use basis::{dimension, FockBasis, FockState};
pub use error::{Error, Result};
pub use hamiltonian::{ModelParams, SparseHamiltonian};
pub use observables::{SiteDistribution, StateVector};
pub use spectral::SpectralData;
