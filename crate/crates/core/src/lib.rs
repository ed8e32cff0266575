//! Digital-twin estimation for stochastic nonlinear multi-degree-of-freedom
//! systems.
//!
//! The pipeline runs on two timescales. On the fast timescale (seconds) a
//! joint state–parameter unscented Kalman filter estimates stiffnesses from
//! short windows of noisy acceleration data. On the slow timescale (days)
//! Gaussian-process regression learns how those estimates drift and
//! extrapolates them, and the predicted parameters drive high-fidelity
//! response simulations.
//!
//! * [`model`]: chain systems, state-space forms, measurement and degradation laws
//! * [`sde`]: Euler–Maruyama and order-1.5 Taylor integrators, noise injection
//! * [`ukf`]: sigma points, predict/update, process noise, window filtering
//! * [`gpr`]: kernels, marginal-likelihood training, prediction
//! * [`twin`]: campaign generation, assimilation, snapshots, forecasting

pub mod error;
pub mod gpr;
pub mod model;
pub mod rng;
pub mod sde;
pub mod twin;
pub mod ukf;

pub use error::{Result, TwinError};
