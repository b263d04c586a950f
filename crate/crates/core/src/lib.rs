//! Optimal control of HOMO–LUMO excitations in a one-dimensional
//! Kohn–Sham model of a 20-atom nanocrystal.
//!
//! The pipeline: build a [`Model`], solve the self-consistent ground state
//! of a [`DopingProfile`] with [`scf_ground_state`], extract the
//! [`ExcitationPair`], score it with the excitation functionals, search the
//! integer doping profiles with [`optimizer::search`], and check the
//! persistence of the excitation with [`tddft`].

pub mod error;
pub mod excitation;
pub mod grid;
pub mod kernel;
pub mod ks;
pub mod model;
pub mod nuclear;
pub mod optimizer;
pub mod special;
pub mod tddft;
pub mod tridiag;

pub use error::{Error, Result};

pub use grid::Grid;
pub use kernel::{CoulombKernel, KernelRule};
pub use excitation::{homo_lumo, ExcitationPair, Functionals, GoalKind};
pub use ks::{scf_ground_state, GroundState, Hamiltonian, MixingScheme, ScfParams};
pub use model::Model;
pub use nuclear::{validate_profile, DopingProfile, ModelParams, ProfileConstraints};
