//! Spectral laboratory for the classical Keller-Segel chemotaxis system
//!
//! The model couples a cell density `rho` to a chemoattractant concentration
//! `c` on a box with homogeneous Neumann boundary conditions:
//!
//! ```text
//! rho_t - lap(rho) = -div(rho grad(c)),
//! gamma c_t - lap(c) + c = rho,          gamma in {0, 1}.
//! ```
//!
//! Total cell mass is conserved, so everything here works in the reduced
//! variables `u = rho - M`, `v = c - M`, where `M` is the spatial mean of
//! `rho`. The reduced system is
//!
//! ```text
//! u_t - lap(u) + M lap(v) = -div(u grad(v)),
//! gamma v_t - lap(v) + v = u,
//! ```
//!
//! whose linearization about zero is diagonal in the Neumann cosine basis.
//! That structure is the point of this crate: every linear flow is evolved
//! exactly per mode, the nonlinearity is evaluated pseudo-spectrally, and
//! the measured decay rates can be compared against the closed-form
//! predictions
//!
//! ```text
//! mu0 = lambda1 (1 - M / (1 + lambda1))            (gamma = 0),
//! mu1 = lambda1 - (sqrt(4 lambda1 M + 1) - 1) / 2  (gamma = 1),
//! ```
//!
//! both positive exactly when `M < 1 + lambda1`, with `lambda1` the smallest
//! positive Neumann eigenvalue of the box.
//!
//! Modules:
//! - [`domain`]: boxes, cosine/sine collocation transforms, spectral operators
//! - [`norms`]: Lebesgue norms, means, the Poincare ratio
//! - [`semigroup`]: exact linearized flows, decay-rate tables, mode matrices
//! - [`bounds`]: empirical smoothing-estimate and integral-bound checks
//! - [`solver`]: IMEX pseudo-spectral integrator for the full nonlinear system
//! - [`analysis`]: decay fits, threshold sweeps, disk constants, lemma suites

pub mod analysis;
pub mod bounds;
pub mod domain;
mod error;
pub mod norms;
pub mod semigroup;
pub mod solver;

pub use analysis::{
    compare_linear_nonlinear, disk_constants, energy_suite, fit_decay_rate, threshold_sweep,
    verify_lemma_suite, CheckReport, DecayFit, DiskConstants, LemmaSuite, SuiteReport, SweepCell,
    SweepOutcome, TimeSeries, SUITE_SEED,
};
pub use bounds::{check_lmint_bound, check_lp_lq_bound, BoundReport, IntegralBoundReport, SemigroupBound};
pub use domain::{build_domain, Basis, Domain, EigenPair, EigenSpectrum, SpectralField};
pub use error::Error;
pub use norms::{grad_lp_norm, lp_norm, mass, mean, mean_zero_project, poincare_ratio, NormReport};
pub use semigroup::{
    heat_apply, rate_table, semigroup_gamma0_apply, semigroup_gamma1_apply, LinearState,
    ModeMatrix, RateTable,
};
pub use solver::{
    gaussian_bump, nonlinear_term, simulate, step, Dealias, RunRecord, RunStatus, Scheme,
    SimState, SolverConfig, StepOutcome,
};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
