//! Entropy, Fisher information, and Wasserstein functionals, the HWI and
//! second-moment inequality checkers, the abstract convergence envelope, and
//! the Gaussian analytic oracle for the quadratic potential.

mod envelope;
mod gaussian;
mod grid;
mod inequalities;
mod wasserstein;

pub use envelope::{free_energy_gap_bound, local_gibbs_entropy_bound, xi_bound, ConstantsLedger};
pub use gaussian::GaussianState;
pub use grid::{entropy_grid, fisher_grid};
pub use inequalities::{hwi_check, second_moment_lemma_check, HwiReport, LemmaReport};
pub use wasserstein::{
    w2_empirical_1d, w2_empirical_nd, w2_grid_1d, w2_to_dirac_grid, w2_to_dirac_samples,
};
