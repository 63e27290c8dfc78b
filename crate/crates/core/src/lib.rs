//! Best linear unbiased prediction for multivariate temporal point processes.
//!
//! The crate covers the full workflow:
//!
//! * [`events`] / [`grids`] — event streams, lag grids, sampled matrix
//!   kernels and covariance densities, with CSV/JSON interchange formats;
//! * [`simulate`] — reproducible Poisson, Hawkes (Ogata thinning) and
//!   Neyman-Scott cluster simulation;
//! * [`moments`] — mean-rate and covariance-density estimation from event
//!   data, plus an analytic spectral oracle for the 1-d exponential Hawkes
//!   process;
//! * [`wh`] — three solvers for the discretised Wiener-Hopf equation that
//!   characterises the best linear predictor kernel: a dense block solver,
//!   Whittle (multivariate Durbin-Levinson) recursions, and Bellman-Krein
//!   forward/backward integration;
//! * [`innovations`] — the innovations algorithm (moving-average form of the
//!   predictor) and shot-kernel recovery for cluster processes;
//! * [`predict`] — assembling unbiased predictors from either representation
//!   and scoring them against event data.
//!
//! All randomised routines take an explicit 64-bit seed and are
//! bit-reproducible across platforms (counter-based ChaCha generator).

pub mod error;
pub mod events;
pub mod grids;
pub mod innovations;
pub mod kernels;
pub(crate) mod lapack;
pub(crate) mod linalg;
pub mod moments;
pub mod predict;
pub mod simulate;
pub mod wh;

pub use error::{Error, Result};
pub use events::EventStream;
pub use grids::{CovarianceGrid, KernelGrid, LagGrid};
pub use kernels::{MatrixKernel, ScalarKernel};
