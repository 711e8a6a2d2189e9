//! Simulation and certification toolkit for Tikhonov-regularized second-order
//! dynamics driven by monotone operators.
//!
//! ```text
//! ẍ + α/t^q ẋ + β t^q d/dt A(x) + (1 − γ/t^s) A(x) + c/t^{2q+s} x = 0
//! ```
//!
//! The crate integrates the flow, tracks the regularization path `x_t`,
//! evaluates the Lyapunov machinery behind its convergence, fits empirical
//! rates, and runs the primal-dual specialization for linearly constrained
//! convex programs. Grid-shaped work (probes, sweeps, path grids) runs on
//! rayon when the `parallel` feature is enabled; results do not depend on the
//! execution policy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod operators;
pub mod primal_dual;
pub mod tikhonov;
pub mod vector;

pub use error::{Error, Result};
pub use exec::Execution;

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV line of 17-significant-digit floats, newline-terminated.
pub fn csv_row(values: &[f64]) -> String {
    let mut line = values.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.320794416806389e-4, -7.5e300, 5e-324] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
        assert_eq!(csv_row(&[1.0, f64::NAN]), "1.0000000000000000e0,NaN\n");
    }
}
