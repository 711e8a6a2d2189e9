//! Quantitative side of the convergence argument: auxiliary constants, exact
//! energy-estimate coefficients and their certification, the energy
//! functional, and empirical rate fits.

mod coefficients;
mod constants;
mod energy;
mod rates;

pub use coefficients::{certify, certify_report, coefficients, Certificate, CoefficientValues, ConditionResult, CONDITIONS};
pub use constants::{k_bound, s5_interval, select_proof_constants, tau_max, ProofConstants, K_FRACTION};
pub use energy::{anchor_distance, energy, energy_envelope, operator_norm_from, u_monotone_form, EnergyBreakdown};
pub use rates::{fit_rate, rates_csv, ratio_stability, sup_ratio, RateFit, RatioStability, MIN_WINDOW_SAMPLES};
