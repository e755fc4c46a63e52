//! Two-scale numerical laboratory for conservative Ginzburg-Landau spin
//! systems.
//!
//! The crate builds the microscopic Kawasaki dynamics on the mean-constrained
//! hyperplane, its block coarse-graining, the macroscopic gradient flow, and
//! the hydrodynamic nonlinear diffusion on the torus, together with the
//! entropy / Fisher / Wasserstein functionals that tie the scales together.
//! The experiment harness wires these into reproducible desk-scale runs with
//! CSV reports.
//!
//! All numerics are generic over the scalar type ([`scalar::Scalar`], i.e.
//! `f32` or `f64`); `f64` aliases for the main types live at the crate root.

pub mod coarse_grain;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod hydro_pde;
pub mod linalg;
pub mod macro_ode;
pub mod microscale;
pub mod potentials;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};

/// f64 aliases for the commonly used types.
pub type TabulatedFunction64 = potentials::TabulatedFunction<f64>;
pub type GridSpec64 = potentials::GridSpec<f64>;
pub type MicroEnsemble64 = microscale::MicroEnsemble<f64>;
pub type KawasakiOperator64 = microscale::KawasakiOperator<f64>;
pub type GridDensity64 = microscale::GridDensity<f64>;
pub type MacroProfile64 = coarse_grain::MacroProfile<f64>;
pub type CoarseHamiltonian64 = coarse_grain::CoarseHamiltonian<f64>;
pub type GaussianState64 = functionals::GaussianState<f64>;
pub type ConstantsLedger64 = functionals::ConstantsLedger<f64>;
pub type HydroField64 = hydro_pde::HydroField<f64>;
pub type MacroTrajectory64 = macro_ode::MacroTrajectory<f64>;
