//! Numerical laboratory for herd/herder interacting particle systems.
//!
//! The herd is a cloud of `N` particles driven by pairwise interaction,
//! attraction to `M` herders, idiosyncratic noise and a common noise shared
//! by the whole herd. Herders follow an ODE steered by a separated control
//! `u_m(t, y, nu) = h_m(t) g_m(y, nu)`. The crate simulates the finite system
//! and a large-ensemble proxy of its mean-field limit, measures how fast the
//! two approach each other, checks the weak Fokker-Planck identity and the
//! Feynman-Kac duality along simulated flows, and minimizes the associated
//! control costs.
//!
//! Module map:
//! - [`model`]: problem definition, coefficient families, drift/diffusion
//!   evaluation and assumption validators.
//! - [`measures`]: empirical measures, exact Wasserstein distances, moments
//!   and the measure feature vector.
//! - [`dynamics`]: noise streams, the Euler-Maruyama integrator and the
//!   coupled mean-field reference.
//! - [`chaos`]: propagation-of-chaos rate tables and covariance tests.
//! - [`fokker_planck`]: weak-form residuals and Feynman-Kac duality.
//! - [`control`]: separated controls, cost functionals, pattern search and
//!   the minima-convergence experiment.
//! - [`scenario`]: JSON scenarios, command dispatch, manifests and CSV output.

pub mod chaos;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod fokker_planck;
pub mod measures;
pub mod model;
pub mod scenario;
pub mod streams;
pub(crate) mod stats;

pub use error::{HerdError, Result};
