//! Simulation engine for single-excitation dynamics of pigment-protein
//! networks under non-Markovian (hierarchical) and Markovian (Redfield)
//! open-system models, with entanglement quantification along trajectories.
//!
//! The crate is organized around the seven-site FMO monomer as a preset,
//! but every routine takes the site count from its inputs:
//!
//! - [`exciton`]: density matrices, the electronic Hamiltonian, exciton
//!   decomposition.
//! - [`entanglement`]: concurrence, witness, global relative-entropy
//!   measure, closest separable state.
//! - [`bath`]: Drude–Lorentz spectral density and its exponential
//!   correlation expansion.
//! - [`heom`]: the auxiliary-density-operator hierarchy solver.
//! - [`redfield`]: full and secular Redfield tensors and Gibbs utilities.
//! - [`propagation`]: RK4/adaptive integration and the unitary test oracle.
//! - [`trajectory`]: recorded observables and CSV serialization.

pub mod bath;
pub mod entanglement;
pub mod error;
pub mod exciton;
pub mod heom;
pub mod propagation;
pub mod redfield;
pub mod trajectory;
pub mod units;

pub use bath::{BathSpec, CorrelationExpansion};
pub use entanglement::EntanglementReport;
pub use error::{Error, Result};
pub use exciton::{
    ElectronicHamiltonian, ExcitonDecomposition, SingleExcitationState, StateDiagnostics,
};
pub use heom::{HeomConfig, HeomSystem, HierarchyState, TrappingSpec};
pub use propagation::{IntegrationMethod, IntegratorOptions};
pub use redfield::RedfieldTensor;
pub use trajectory::{SolverKind, Trajectory, TrajectoryPoint, ValidityTolerances};
pub use units::UnitContext;
