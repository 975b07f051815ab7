//! Propagation-of-chaos experiments: predicted empirical-measure rates,
//! coupled-error and Wasserstein tables over `N`, log-log fits, and the
//! (conditional) pair-covariance test.

mod covariance;
mod rates;

pub use covariance::{conditional_chaos_test, CovarianceReport, COVARIANCE_HEADER, CovarianceRow, Observable};
pub use rates::{
    fit_loglog_slope, fit_power_law, predicted_exponent, run_rate_experiment, LogLogFit, RateColumn,
    RateExponents, RateRegime, RateRow, RateTable, RATE_TABLE_HEADER,
};
