//! Prediction followed by correction.

use crate::corrector::{self, CorrectionResult, GaussNewtonOptions};
use crate::error::Result;
use crate::model::{PerturbationSpec, TimeDelaySystem};
use crate::predictor::{self, PredictionResult, PredictorOptions, SpectralAbscissa};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsaOptions {
    pub predictor: PredictorOptions,
    pub corrector: GaussNewtonOptions,
}

impl PsaOptions {
    pub fn with_n(mut self, n: usize) -> Self {
        self.predictor.n = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.predictor.bisection.tol = tol;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsaResult {
    pub alpha_eps: f64,
    pub omega_eps: f64,
    pub spectral: SpectralAbscissa,
    pub prediction: PredictionResult,
    pub correction: CorrectionResult,
    pub warnings: Vec<String>,
}

/// Pseudospectral abscissa `alpha_eps(F)` of `sys` under `pert`.
pub fn pseudospectral_abscissa(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    opts: &PsaOptions,
) -> Result<PsaResult> {
    let (prediction, spectral) = predictor::predict(sys, pert, &opts.predictor)?;
    let correction = corrector::correct(sys, pert, &prediction, &opts.corrector)?;
    let mut warnings = Vec::new();
    if !spectral.converged {
        warnings.push("Newton refinement of the rightmost characteristic roots failed; the shift uses alpha(F_N)".into());
    }
    warnings.extend(correction.warnings.iter().cloned());
    Ok(PsaResult {
        alpha_eps: correction.alpha_eps,
        omega_eps: correction.omega_eps,
        spectral,
        prediction,
        correction,
        warnings,
    })
}
