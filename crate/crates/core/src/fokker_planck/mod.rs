//! Weak-form checks along simulated measure flows: the Fokker-Planck
//! residual (with the common-noise stochastic integral) and the
//! Feynman-Kac duality in the zero-common-noise case.

mod bank;
mod feynman_kac;
mod residual;

pub use bank::{default_bank, TestFunction};
pub use feynman_kac::{
    duality_check, duality_on_flow, feynman_kac_u, DualityReport, DualityRow, FeynmanKacEstimate, DUALITY_HEADER,
};
pub use residual::{plateau_leakage_bound, weak_residual, WeakResidualReport, RESIDUAL_HEADER};
