//! Simulation and analysis of finite Su-Schrieffer-Heeger (SSH) chains realized
//! as microwave-coupled ladders of Rydberg levels.
//!
//! The crate is organized around the single-particle chain Hamiltonian:
//!
//! - [`lattice`]: chain description, Hamiltonian, chiral and cell-position operators.
//! - [`spectra`]: exact diagonalization, stick spectra, Lorentzian broadening,
//!   infinite-lattice bands.
//! - [`dynamics`]: quench evolution, mean chiral displacement and its averages.
//! - [`fitting`]: shared-width multi-Lorentzian least squares.
//! - [`disorder`]: seeded ensembles of perturbed chains.
//! - [`scenario`]: JSON scenario configs, presets and output writers used by the
//!   `ssh-sim` binary.
//!
//! Energies are frequencies in kHz, times are in µs.

pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod lattice;
pub mod par;
pub mod scenario;
pub mod spectra;

pub use error::{Error, Result};
pub use lattice::{ChainSpec, HamiltonianMatrix, SiteOperator};
pub use par::Execution;
pub use spectra::EigenSystem;
