//! Correction step: Gauss-Newton on the extremality conditions of the
//! rightmost pseudospectrum points.
//!
//! For fixed `sigma`, the singular values of `F(sigma + j omega)^{-1}` equal
//! to `xi` show up as imaginary-axis roots `lambda = j omega` of the
//! `2n x 2n` delay eigenproblem
//!
//! ```text
//! H(lambda, sigma, xi) = [ F_s(lambda)   -xi^{-2} I                                  ]
//!                        [ I              lambda I + A_s0^T + sum A_si^T e^{lambda tau_i} ]
//! ```
//!
//! with `A_s0 = A_0 - sigma I`, `A_si = A_i e^{-sigma tau_i}` and
//! `F_s(lambda) = F(lambda + sigma)`. At the pseudospectral abscissa the root
//! `j omega` is double, which gives the `4n + 3` real equations
//! `H [u; v] = 0`, `c^* [u; v] = 1`, `Im{v^* (I + sum tau_i A_si e^{-j omega tau_i}) u} = 0`
//! in the `4n + 2` unknowns `(u, v, omega, sigma)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{PsaError, Result};
use crate::model::{self, PerturbationSpec, TimeDelaySystem};
use crate::numerics::{self, CMatrix, CVector, RMatrix, RVector};
use crate::predictor::PredictionResult;

pub const DEFAULT_GN_TOL: f64 = 1e-10;
pub const DEFAULT_GN_MAX_ITER: usize = 50;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// `xi(sigma) = 1 / (epsilon w(sigma))` and its derivative in `sigma`.
pub fn xi_of_sigma(pert: &PerturbationSpec, sys: &TimeDelaySystem, sigma: f64) -> (f64, f64) {
    let (w, dw) = model::weight_and_derivative(pert, sys, sigma);
    let xi = 1.0 / (pert.epsilon() * w);
    (xi, -xi * dw / w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NleigMatrix {
    pub entries: CMatrix,
}

/// `H(lambda, sigma, xi)` for a system already shifted by `sigma`
/// (see [`model::shift_system`]).
pub fn build_nleig(shifted: &TimeDelaySystem, lambda: Complex64, xi: f64) -> NleigMatrix {
    let n = shifted.n();
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n))
        .copy_from(&model::eval_characteristic(shifted, lambda));
    let inv_xi2 = Complex64::new(xi.powi(-2), 0.0);
    let mut br = CMatrix::identity(n, n) * lambda;
    for (a, &tau) in shifted.matrices().iter().zip(shifted.delays()) {
        let e = (lambda * tau).exp();
        br.zip_apply(&a.transpose(), |z, x| *z += e * x);
    }
    for i in 0..n {
        h[(i, n + i)] = -inv_xi2;
        h[(n + i, i)] = ONE;
    }
    h.view_mut((n, n), (n, n)).copy_from(&br);
    NleigMatrix { entries: h }
}

/// `dH/dlambda`, block diagonal.
pub fn nleig_lambda_derivative(shifted: &TimeDelaySystem, lambda: Complex64) -> CMatrix {
    let n = shifted.n();
    let mut d = CMatrix::identity(2 * n, 2 * n);
    for (a, &tau) in shifted.matrices().iter().zip(shifted.delays()).skip(1) {
        let em = (-lambda * tau).exp() * tau;
        let ep = (lambda * tau).exp() * tau;
        for r in 0..n {
            for c in 0..n {
                d[(r, c)] += em * a[(r, c)];
                d[(n + r, n + c)] += ep * a[(c, r)];
            }
        }
    }
    d
}

/// Unit right singular vector for the smallest singular value, with its
/// largest entry rotated to be real and positive.
pub fn start_vector(h: &NleigMatrix) -> CVector {
    let (_, mut x) = numerics::smallest_singular_pair(&h.entries);
    numerics::fix_phase(&mut x);
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorState {
    pub u: CVector,
    pub v: CVector,
    pub omega: f64,
    pub sigma: f64,
    /// Fixed normalization anchor: the equations include `c^* [u; v] = 1`.
    pub anchor: CVector,
}

impl CorrectorState {
    /// Starting state at `(omega, sigma)` from the approximate null vector.
    pub fn from_prediction(
        sys: &TimeDelaySystem,
        pert: &PerturbationSpec,
        omega: f64,
        sigma: f64,
    ) -> Self {
        let (shifted, _) = model::shift_system(sys, pert, sigma);
        let (xi, _) = xi_of_sigma(pert, sys, sigma);
        let x = start_vector(&build_nleig(&shifted, Complex64::new(0.0, omega), xi));
        let n = sys.n();
        Self {
            u: x.rows(0, n).into_owned(),
            v: x.rows(n, n).into_owned(),
            omega,
            sigma,
            anchor: x,
        }
    }

    pub fn stacked(&self) -> CVector {
        let n = self.u.len();
        CVector::from_iterator(2 * n, self.u.iter().chain(self.v.iter()).copied())
    }

    /// Real unknowns `(Re u, Im u, Re v, Im v, omega, sigma)`.
    pub fn to_real(&self) -> RVector {
        let n = self.u.len();
        let mut x = RVector::zeros(4 * n + 2);
        for i in 0..n {
            x[i] = self.u[i].re;
            x[n + i] = self.u[i].im;
            x[2 * n + i] = self.v[i].re;
            x[3 * n + i] = self.v[i].im;
        }
        x[4 * n] = self.omega;
        x[4 * n + 1] = self.sigma;
        x
    }

    pub fn with_real(&self, x: &RVector) -> Self {
        let n = self.u.len();
        Self {
            u: CVector::from_fn(n, |i, _| Complex64::new(x[i], x[n + i])),
            v: CVector::from_fn(n, |i, _| Complex64::new(x[2 * n + i], x[3 * n + i])),
            omega: x[4 * n],
            sigma: x[4 * n + 1],
            anchor: self.anchor.clone(),
        }
    }

    /// The mirror solution at `-omega`.
    pub fn conjugate(&self) -> Self {
        Self {
            u: self.u.map(|z| z.conj()),
            v: self.v.map(|z| z.conj()),
            omega: -self.omega,
            sigma: self.sigma,
            anchor: self.anchor.map(|z| z.conj()),
        }
    }
}

/// Everything the residual and Jacobian need at one `(omega, sigma)`.
struct Pieces {
    h: CMatrix,
    dh_domega: CMatrix,
    dh_dsigma: CMatrix,
    k: CMatrix,
    dk_domega: CMatrix,
    dk_dsigma: CMatrix,
}

fn pieces(sys: &TimeDelaySystem, pert: &PerturbationSpec, omega: f64, sigma: f64) -> Pieces {
    let n = sys.n();
    let lambda = Complex64::new(0.0, omega);
    let (shifted, _) = model::shift_system(sys, pert, sigma);
    let (w, dw) = model::weight_and_derivative(pert, sys, sigma);
    let eps = pert.epsilon();
    let h = build_nleig(&shifted, lambda, 1.0 / (eps * w)).entries;
    let dh_domega = nleig_lambda_derivative(&shifted, lambda) * J;

    let mut dh_dsigma = CMatrix::zeros(2 * n, 2 * n);
    let d_inv_xi2 = Complex64::new(2.0 * eps * eps * w * dw, 0.0);
    for i in 0..n {
        dh_dsigma[(i, i)] += ONE;
        dh_dsigma[(n + i, n + i)] -= ONE;
        dh_dsigma[(i, n + i)] = -d_inv_xi2;
    }
    let mut k = CMatrix::identity(n, n);
    let mut dk_domega = CMatrix::zeros(n, n);
    let mut dk_dsigma = CMatrix::zeros(n, n);
    for (a, &tau) in shifted.matrices().iter().zip(shifted.delays()).skip(1) {
        let em = (-lambda * tau).exp();
        let ep = (lambda * tau).exp();
        for r in 0..n {
            for c in 0..n {
                dh_dsigma[(r, c)] += em * tau * a[(r, c)];
                dh_dsigma[(n + r, n + c)] -= ep * tau * a[(c, r)];
                k[(r, c)] += em * tau * a[(r, c)];
                dk_domega[(r, c)] += em * (-J * tau * tau) * a[(r, c)];
                dk_dsigma[(r, c)] -= em * tau * tau * a[(r, c)];
            }
        }
    }
    Pieces {
        h,
        dh_domega,
        dh_dsigma,
        k,
        dk_domega,
        dk_dsigma,
    }
}

/// The `4n + 3` real residuals: `Re`/`Im` of `H [u; v]`, `Re`/`Im` of
/// `c^* [u; v] - 1`, and `Im{v^* K u}`.
pub fn residual(sys: &TimeDelaySystem, pert: &PerturbationSpec, state: &CorrectorState) -> RVector {
    let p = pieces(sys, pert, state.omega, state.sigma);
    assemble_residual(&p, state)
}

fn assemble_residual(p: &Pieces, state: &CorrectorState) -> RVector {
    let n = state.u.len();
    let x = state.stacked();
    let hx = &p.h * &x;
    let norm = state.anchor.dotc(&x) - ONE;
    let z = state.v.dotc(&(&p.k * &state.u));
    let mut r = RVector::zeros(4 * n + 3);
    for i in 0..2 * n {
        r[i] = hx[i].re;
        r[2 * n + i] = hx[i].im;
    }
    r[4 * n] = norm.re;
    r[4 * n + 1] = norm.im;
    r[4 * n + 2] = z.im;
    r
}

/// Analytic `(4n + 3) x (4n + 2)` Jacobian of [`residual`].
pub fn jacobian(sys: &TimeDelaySystem, pert: &PerturbationSpec, state: &CorrectorState) -> RMatrix {
    let p = pieces(sys, pert, state.omega, state.sigma);
    assemble_jacobian(&p, state)
}

fn assemble_jacobian(p: &Pieces, state: &CorrectorState) -> RMatrix {
    let n = state.u.len();
    let x = state.stacked();
    let vk = p.k.adjoint() * &state.v; // (v^* K)^* as a column
    let ku = &p.k * &state.u;
    let mut jac = RMatrix::zeros(4 * n + 3, 4 * n + 2);
    let mut put = |col: usize, dhx: CVector, dnorm: Complex64, dz: Complex64| {
        for i in 0..2 * n {
            jac[(i, col)] = dhx[i].re;
            jac[(2 * n + i, col)] = dhx[i].im;
        }
        jac[(4 * n, col)] = dnorm.re;
        jac[(4 * n + 1, col)] = dnorm.im;
        jac[(4 * n + 2, col)] = dz.im;
    };
    for (block, (offset, scale)) in [(0usize, ONE), (0, J), (n, ONE), (n, J)]
        .into_iter()
        .enumerate()
    {
        for i in 0..n {
            let idx = offset + i;
            let dhx = p.h.column(idx) * scale;
            let dnorm = state.anchor[idx].conj() * scale;
            let dz = if offset == 0 {
                vk[i].conj() * scale
            } else {
                scale.conj() * ku[i]
            };
            put(block * n + i, dhx, dnorm, dz);
        }
    }
    let zero = Complex64::new(0.0, 0.0);
    put(
        4 * n,
        &p.dh_domega * &x,
        zero,
        state.v.dotc(&(&p.dk_domega * &state.u)),
    );
    put(
        4 * n + 1,
        &p.dh_dsigma * &x,
        zero,
        state.v.dotc(&(&p.dk_dsigma * &state.u)),
    );
    jac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonOptions {
    /// Converged once `||r|| <= tol (1 + scale)`, `scale = sum ||A_i||_inf`.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking on the residual norm; off by default.
    pub damped: bool,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_GN_TOL,
            max_iter: DEFAULT_GN_MAX_ITER,
            damped: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussNewtonRun {
    pub state: CorrectorState,
    pub iterations: usize,
    /// `||r||` before the first step and after every step.
    pub residual_history: Vec<f64>,
}

impl GaussNewtonRun {
    pub fn final_residual(&self) -> f64 {
        *self
            .residual_history
            .last()
            .expect("history is never empty")
    }
}

/// Undamped Gauss-Newton from `start`. The converged state is folded to
/// `omega >= 0`.
pub fn gauss_newton(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    start: CorrectorState,
    opts: &GaussNewtonOptions,
) -> Result<GaussNewtonRun> {
    let threshold = opts.tol * (1.0 + sys.scale());
    let mut state = start;
    let mut p = pieces(sys, pert, state.omega, state.sigma);
    let mut r = assemble_residual(&p, &state);
    let mut history = vec![r.norm()];
    let mut growth = 0;
    let mut iterations = 0;
    loop {
        let rn = *history.last().unwrap();
        if !rn.is_finite() {
            return Err(PsaError::Diverged);
        }
        if rn <= threshold {
            break;
        }
        if iterations == opts.max_iter {
            return Err(PsaError::GaussNewtonMaxIterations(opts.max_iter));
        }
        iterations += 1;
        let jac = assemble_jacobian(&p, &state);
        let step = numerics::least_squares_real(&jac, &r)?;
        let x = state.to_real();
        let mut t = 1.0;
        let (next, next_p, next_r) = loop {
            let cand = state.with_real(&(&x + &step * t));
            let cp = pieces(sys, pert, cand.omega, cand.sigma);
            let cr = assemble_residual(&cp, &cand);
            if !opts.damped || cr.norm() < rn || t < 1e-3 {
                break (cand, cp, cr);
            }
            t *= 0.5;
        };
        state = next;
        p = next_p;
        r = next_r;
        let new_norm = r.norm();
        growth = if new_norm > rn { growth + 1 } else { 0 };
        history.push(new_norm);
        if growth >= 3 {
            return Err(PsaError::Diverged);
        }
        if step.norm() * t <= 1e-14 * (1.0 + x.norm()) {
            if new_norm <= 1e3 * threshold {
                break;
            }
            return Err(PsaError::Diverged);
        }
    }
    if state.omega < 0.0 {
        state = state.conjugate();
    }
    Ok(GaussNewtonRun {
        state,
        iterations,
        residual_history: history,
    })
}

/// Outcome of one corrector start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome {
    pub start_omega: f64,
    pub converged: bool,
    pub sigma: f64,
    pub omega: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub error: Option<PsaError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    pub alpha_eps: f64,
    pub omega_eps: f64,
    /// One entry per start, in start order.
    pub per_start: Vec<StartOutcome>,
    /// Distinct converged `(sigma, omega)` points.
    pub solutions: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Runs Gauss-Newton from every predicted frequency and keeps the largest
/// corrected `sigma`.
pub fn correct(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    prediction: &PredictionResult,
    opts: &GaussNewtonOptions,
) -> Result<CorrectionResult> {
    let sigma0 = prediction.alpha_pred;
    let per_start: Vec<StartOutcome> = prediction
        .frequencies
        .par_iter()
        .map(|&omega| {
            let start = CorrectorState::from_prediction(sys, pert, omega, sigma0);
            match gauss_newton(sys, pert, start, opts) {
                Ok(run) => StartOutcome {
                    start_omega: omega,
                    converged: true,
                    sigma: run.state.sigma,
                    omega: run.state.omega,
                    iterations: run.iterations,
                    final_residual: run.final_residual(),
                    residual_history: run.residual_history,
                    error: None,
                },
                Err(e) => StartOutcome {
                    start_omega: omega,
                    converged: false,
                    sigma: f64::NAN,
                    omega: f64::NAN,
                    iterations: 0,
                    final_residual: f64::NAN,
                    residual_history: vec![],
                    error: Some(e),
                },
            }
        })
        .collect();

    let mut solutions: Vec<(f64, f64)> = Vec::new();
    for s in per_start.iter().filter(|s| s.converged) {
        let close = |&(a, b): &(f64, f64)| {
            (a - s.sigma).abs() <= 1e-8 * (1.0 + a.abs())
                && (b - s.omega).abs() <= 1e-8 * (1.0 + b.abs())
        };
        if !solutions.iter().any(close) {
            solutions.push((s.sigma, s.omega));
        }
    }
    let Some(&(alpha_eps, omega_eps)) = solutions.iter().max_by(|a, b| a.0.total_cmp(&b.0)) else {
        let first = per_start
            .iter()
            .find_map(|s| s.error.as_ref())
            .map_or_else(|| "no starts".to_string(), |e| e.to_string());
        return Err(PsaError::AllStartsFailed {
            starts: per_start.len(),
            first,
        });
    };

    let mut warnings = Vec::new();
    let failed = per_start.iter().filter(|s| !s.converged).count();
    if failed > 0 {
        warnings.push(format!(
            "{failed} of {} corrector starts failed to converge; try a smaller prediction tolerance or a larger N",
            per_start.len()
        ));
    }
    let width = prediction.bracket.width();
    if (alpha_eps - sigma0).abs() > 10.0 * width {
        warnings.push(format!(
            "corrected abscissa {alpha_eps:.6e} moved {:.3e} from the prediction, more than 10x the final bracket width {width:.3e}; \
             try a smaller prediction tolerance or a larger N",
            (alpha_eps - sigma0).abs()
        ));
    }
    Ok(CorrectionResult {
        alpha_eps,
        omega_eps,
        per_start,
        solutions,
        warnings,
    })
}
