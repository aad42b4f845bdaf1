//! Statistical checks of samplers and networks against their limiting laws.

mod cf;
mod checks;
mod convergence;
mod ks;
mod rates;
mod tail;

pub use cf::{empirical_cf, standard_t_grid, CfReport};
pub use checks::{consistency_check, cramer_wold_check, moment_estimate, CramerWoldSpec};
pub use convergence::{cf_gap_experiment, CfGapRow, CfGapSpec};
pub use ks::{kolmogorov_survival, ks_two_sample, KsResult, KS_MIN_SAMPLES};
pub use rates::{gap_samples, joint_thresholds, rate_experiment, RateRegime, RateReport, RateSpec, GAP_FUNCTIONAL};
pub use tail::{tail_check, tail_radius, TailReport};
