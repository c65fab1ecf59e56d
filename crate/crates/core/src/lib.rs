//! Optimal FIR synthesis banks for multirate observations.
//!
//! Given an FIR analysis bank (uniform or non-uniform, any number of
//! channels relative to the decimation factor) and the second-order
//! statistics of a wide-sense stationary input, this crate
//!
//! * designs the whole family of MSE-optimal FIR matrix synthesis filters
//!   ([`wiener`]),
//! * reports the analytic minimum MSE per channel and versus delay,
//! * certifies whether perfect reconstruction is reachable and for which
//!   delays, and builds the PR synthesis family ([`pr`]),
//! * simulates the complete analysis / low-rate synthesis / unblocking
//!   chain on sample signals ([`runtime`]).
//!
//! Everything is expressed through time-domain matrix operators built in
//! [`mrmat`]. The central one is the stacked decimate-convolve matrix
//! [`bank::KMatrix`], which maps the time-reversed input block
//! `[u(Mn), u(Mn-1), ..., u(Mn-q+1)]` to the stacked subband observation
//! vector.
//!
//! ```
//! use wiener_fb::{bank::Bank, stochastic::SignalModel, wiener};
//!
//! // Two-channel "lazy" bank: h0 = δ(n), h1 = δ(n-1), decimated by 2.
//! let bank = Bank::uniform(vec![vec![1.0], vec![0.0, 1.0]], 2).unwrap();
//! let k = bank.build_k(1).unwrap();
//! let model = SignalModel::white(1.0);
//! let problem = wiener::WienerProblem::new(k, &model, 0).unwrap();
//! let solution = wiener::solve(&problem, None).unwrap();
//! assert!(solution.total_mse.unwrap() < 1e-12);
//! ```

pub mod bank;
pub mod error;
pub mod experiments;
pub mod mrmat;
pub mod pr;
pub mod runtime;
pub mod stochastic;
pub mod wiener;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;

/// Converts a linear power value to decibels, `10·log10(x)`.
///
/// Non-positive inputs map to negative infinity.
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        10.0 * x.log10()
    } else {
        f64::NEG_INFINITY
    }
}
