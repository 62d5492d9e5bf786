//! Retarded time-delay systems `x'(t) = sum_i A_i x(t - tau_i)` and the
//! weighted level-set function whose superlevel set is the pseudospectrum.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PsaError, Result};
use crate::numerics::{self, CMatrix, RMatrix};

/// A point `sigma + j omega` of the complex plane.
pub type ComplexPoint = Complex64;

/// `x'(t) = sum_{i=0}^m A_i x(t - tau_i)` with `tau_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDelaySystem {
    delays: Vec<f64>,
    matrices: Vec<RMatrix>,
}

impl TimeDelaySystem {
    /// Validates and builds a system. `delays[0]` must be exactly zero.
    pub fn new(delays: Vec<f64>, matrices: Vec<RMatrix>) -> Result<Self> {
        validate_system(Self { delays, matrices })
    }

    /// Delay-free system `x' = A_0 x`.
    pub fn delay_free(a0: RMatrix) -> Result<Self> {
        Self::new(vec![0.0], vec![a0])
    }

    pub fn n(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Number of delayed terms `m`.
    pub fn m(&self) -> usize {
        self.delays.len() - 1
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn matrices(&self) -> &[RMatrix] {
        &self.matrices
    }

    pub fn tau_max(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_delay_free(&self) -> bool {
        self.m() == 0
    }

    /// `sum_i ||A_i||_inf`, a crude magnitude used to scale tolerances.
    pub fn scale(&self) -> f64 {
        self.matrices.iter().map(numerics::norm_inf).sum()
    }
}

/// Checks the structural invariants of a system.
pub fn validate_system(raw: TimeDelaySystem) -> Result<TimeDelaySystem> {
    if raw.delays.is_empty() || raw.delays.len() != raw.matrices.len() {
        return Err(PsaError::DimensionMismatch(format!(
            "{} delays for {} matrices",
            raw.delays.len(),
            raw.matrices.len()
        )));
    }
    if raw.delays[0] != 0.0 {
        return Err(PsaError::MissingZeroDelay(raw.delays[0]));
    }
    for (index, &value) in raw.delays.iter().enumerate().skip(1) {
        if value <= 0.0 || !value.is_finite() {
            return Err(PsaError::NonpositiveDelay { index, value });
        }
    }
    let n = raw.matrices[0].nrows();
    if n == 0 {
        return Err(PsaError::DimensionMismatch(
            "state dimension is zero".into(),
        ));
    }
    for (i, a) in raw.matrices.iter().enumerate() {
        if a.nrows() != n || a.ncols() != n {
            return Err(PsaError::DimensionMismatch(format!(
                "A_{i} is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(PsaError::DimensionMismatch(format!(
                "A_{i} has non-finite entries"
            )));
        }
    }
    Ok(raw)
}

/// Perturbation weight on one system matrix. `Infinite` means that matrix is
/// not perturbed. Serialized as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Finite(f64),
    Infinite,
}

impl Weight {
    /// `1 / w`, zero for an infinite weight.
    pub fn reciprocal(self) -> f64 {
        match self {
            Weight::Finite(w) => 1.0 / w,
            Weight::Infinite => 0.0,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Weight::Finite(_))
    }

    pub fn scaled(self, factor: f64) -> Self {
        match self {
            Weight::Finite(w) => Weight::Finite(w * factor),
            Weight::Infinite => Weight::Infinite,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Finite(w) => write!(f, "{w}"),
            Weight::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Weight::Finite(w) => s.serialize_f64(*w),
            Weight::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(w) if w > 0.0 && w.is_finite() => Ok(Weight::Finite(w)),
            Raw::Num(w) => Err(serde::de::Error::custom(format!(
                "weight must be positive, got {w}"
            ))),
            Raw::Str(s) if s.eq_ignore_ascii_case("inf") => Ok(Weight::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "weight must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Weights `w_0..w_m` and perturbation size `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    weights: Vec<Weight>,
    epsilon: f64,
}

impl PerturbationSpec {
    pub fn new(weights: Vec<Weight>, epsilon: f64) -> Result<Self> {
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(PsaError::InvalidPerturbation(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            if let Weight::Finite(x) = w {
                if *x <= 0.0 || !x.is_finite() {
                    return Err(PsaError::InvalidPerturbation(format!(
                        "w_{i} must be positive, got {x}"
                    )));
                }
            }
        }
        if !weights.iter().any(|w| w.is_finite()) {
            return Err(PsaError::InvalidPerturbation(
                "at least one weight must be finite".into(),
            ));
        }
        Ok(Self { weights, epsilon })
    }

    /// All weights equal to one.
    pub fn unit(m: usize, epsilon: f64) -> Result<Self> {
        Self::new(vec![Weight::Finite(1.0); m + 1], epsilon)
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.weights.clone(), epsilon)
    }

    /// Checks that the weights match the system's delay count.
    pub fn check_against(&self, sys: &TimeDelaySystem) -> Result<()> {
        if self.weights.len() != sys.m() + 1 {
            return Err(PsaError::DimensionMismatch(format!(
                "{} weights for {} system matrices",
                self.weights.len(),
                sys.m() + 1
            )));
        }
        Ok(())
    }
}

/// Characteristic matrix `F(lambda) = lambda I - sum_i A_i exp(-lambda tau_i)`.
pub fn eval_characteristic(sys: &TimeDelaySystem, lambda: ComplexPoint) -> CMatrix {
    let n = sys.n();
    let mut f = CMatrix::identity(n, n) * lambda;
    for (a, &tau) in sys.matrices.iter().zip(&sys.delays) {
        let e = (-lambda * tau).exp();
        f.zip_apply(a, |fz, x| *fz -= e * x);
    }
    f
}

/// `dF/dlambda = I + sum_i tau_i A_i exp(-lambda tau_i)`.
pub fn eval_characteristic_derivative(sys: &TimeDelaySystem, lambda: ComplexPoint) -> CMatrix {
    let n = sys.n();
    let mut d = CMatrix::identity(n, n);
    for (a, &tau) in sys.matrices.iter().zip(&sys.delays).skip(1) {
        let e = (-lambda * tau).exp() * tau;
        d.zip_apply(a, |dz, x| *dz += e * x);
    }
    d
}

/// `w(sigma) = sum_i exp(-sigma tau_i) / w_i`, infinite weights dropped.
pub fn eval_weight(pert: &PerturbationSpec, sys: &TimeDelaySystem, sigma: f64) -> f64 {
    weight_and_derivative(pert, sys, sigma).0
}

/// `(w(sigma), w'(sigma))`.
pub fn weight_and_derivative(
    pert: &PerturbationSpec,
    sys: &TimeDelaySystem,
    sigma: f64,
) -> (f64, f64) {
    pert.weights
        .iter()
        .zip(&sys.delays)
        .fold((0.0, 0.0), |(w, dw), (wi, &tau)| {
            let term = (-sigma * tau).exp() * wi.reciprocal();
            (w + term, dw - tau * term)
        })
}

/// Level-set function `f(lambda) = w(Re lambda) / sigma_min(F(lambda))`;
/// `+inf` at characteristic roots.
pub fn eval_level(sys: &TimeDelaySystem, pert: &PerturbationSpec, lambda: ComplexPoint) -> f64 {
    let smin = numerics::singular_values(&eval_characteristic(sys, lambda))
        .last()
        .copied()
        .unwrap_or(0.0);
    let w = eval_weight(pert, sys, lambda.re);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        w / smin
    }
}

/// Substitutes `lambda <- lambda + alpha`: returns matrices `A_0 - alpha I`,
/// `A_i exp(-tau_i alpha)` and weights `w_i exp(alpha tau_i)`, so that the
/// shifted level-set function satisfies `f_hat(mu) = f(mu + alpha)`.
pub fn shift_system(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    alpha: f64,
) -> (TimeDelaySystem, PerturbationSpec) {
    let n = sys.n();
    let matrices = sys
        .matrices
        .iter()
        .zip(&sys.delays)
        .enumerate()
        .map(|(i, (a, &tau))| {
            if i == 0 {
                a - DMatrix::identity(n, n) * alpha
            } else {
                a * (-alpha * tau).exp()
            }
        })
        .collect();
    let weights = pert
        .weights
        .iter()
        .zip(&sys.delays)
        .map(|(w, &tau)| w.scaled((alpha * tau).exp()))
        .collect();
    (
        TimeDelaySystem {
            delays: sys.delays.clone(),
            matrices,
        },
        PerturbationSpec {
            weights,
            epsilon: pert.epsilon,
        },
    )
}
