//! Pseudospectral abscissa of retarded time-delay systems
//! `x'(t) = sum_i A_i x(t - tau_i)` under weighted perturbations of the
//! system matrices.
//!
//! The computation runs in two steps:
//!
//! 1. **Prediction** ([`predictor`]): the delay equation is discretized by
//!    Chebyshev collocation ([`discretization`]), and a bisection on the real
//!    part finds where a Hamiltonian matrix built from the discretization
//!    stops having imaginary-axis eigenvalues.
//! 2. **Correction** ([`corrector`]): the predicted point and frequencies
//!    seed Gauss-Newton on a set of `4n + 3` real equations that
//!    characterize the rightmost points of the pseudospectrum exactly.
//!
//! [`oracle`] holds brute-force grid references and contour extraction;
//! [`cli`] the file formats and commands behind the `tds-psa` binary.
//!
//! ```no_run
//! use tds_psa::{model::{PerturbationSpec, TimeDelaySystem}, numerics::RMatrix, PsaOptions};
//!
//! let sys = TimeDelaySystem::new(
//!     vec![0.0, 1.0],
//!     vec![RMatrix::from_element(1, 1, 0.0), RMatrix::from_element(1, 1, -1.0)],
//! )?;
//! let pert = PerturbationSpec::unit(1, 0.1)?;
//! let res = tds_psa::pseudospectral_abscissa(&sys, &pert, &PsaOptions::default())?;
//! println!("alpha_eps = {} at omega = {}", res.alpha_eps, res.omega_eps);
//! # Ok::<(), tds_psa::PsaError>(())
//! ```

pub mod cli;
pub mod corrector;
pub mod discretization;
pub mod error;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod predictor;
pub mod random;

pub use error::{PsaError, Result};
pub use pipeline::{pseudospectral_abscissa, PsaOptions, PsaResult};
