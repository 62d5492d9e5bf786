//! Prediction step: bisection on `sigma` for the approximate pseudospectral
//! abscissa of the rational approximation `F_N`, where every step asks
//! whether a Hamiltonian matrix built from `(A_N, B_N)` has eigenvalues on
//! the imaginary axis.

use num_complex::Complex64;

use crate::discretization::{self, Discretization, DEFAULT_N};
use crate::error::{PsaError, Result};
use crate::model::{self, eval_weight, PerturbationSpec, TimeDelaySystem};
use crate::numerics::{self, CMatrix, CVector, RMatrix};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_BISECTION_ITER: usize = 100;
pub const DEFAULT_TOL_IM_FACTOR: f64 = 1e-8;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
const ROOT_STARTS: usize = 10;
const NEWTON_MAX_ITER: usize = 50;

/// Upper end of the bisection bracket; starts out unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperBound {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: UpperBound,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        match self.upper {
            UpperBound::Finite(u) => u - self.lower,
            UpperBound::Infinite => f64::INFINITY,
        }
    }

    fn shifted(self, by: f64) -> Self {
        Bracket {
            lower: self.lower + by,
            upper: match self.upper {
                UpperBound::Finite(u) => UpperBound::Finite(u + by),
                UpperBound::Infinite => UpperBound::Infinite,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// `alpha_eps^N(F)`, the final lower bound.
    pub alpha_pred: f64,
    /// Frequencies `omega >= 0` of the imaginary-axis eigenvalues at the lower bound.
    pub frequencies: Vec<f64>,
    pub iterations: usize,
    pub bracket: Bracket,
    /// Real shift applied before discretizing (the spectral abscissa `alpha(F)`).
    pub shift_used: f64,
    /// Bracket after every iteration, starting with the initial one.
    pub trace: Vec<Bracket>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative factor for the default imaginary-axis tolerance.
    pub tol_im_factor: f64,
    /// Initial step `Delta sigma`; `None` uses `tol`.
    pub initial_step: Option<f64>,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_BISECTION_ITER,
            tol_im_factor: DEFAULT_TOL_IM_FACTOR,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorOptions {
    pub n: usize,
    pub bisection: BisectionOptions,
    pub newton_tol: f64,
}

impl Default for PredictorOptions {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            bisection: BisectionOptions::default(),
            newton_tol: DEFAULT_NEWTON_TOL,
        }
    }
}

/// Spectral abscissa `alpha(F)` of the delay equation itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAbscissa {
    pub value: f64,
    /// Newton-refined characteristic roots, rightmost first.
    pub roots: Vec<Complex64>,
    /// `false` when no Newton start converged and `value` is `alpha(F_N)`.
    pub converged: bool,
}

/// Refines the rightmost eigenvalues of `A_N` into characteristic roots of
/// `F` by Newton's method on `F(lambda) v = 0, c^* v = 1`.
pub fn spectral_abscissa_exact(
    sys: &TimeDelaySystem,
    disc: &Discretization,
    newton_tol: f64,
) -> Result<SpectralAbscissa> {
    let mut eigs = discretization::roots_fn(disc)?;
    let fallback = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    eigs.retain(|z| z.im >= 0.0);
    eigs.sort_by(|a, b| b.re.total_cmp(&a.re));
    eigs.truncate(ROOT_STARTS.min(disc.dim()));

    let mut roots: Vec<Complex64> = Vec::new();
    for start in eigs {
        if let Some(root) = newton_root(sys, start, newton_tol) {
            let root = if root.im < 0.0 { root.conj() } else { root };
            let scale = 1.0 + root.norm();
            if !roots.iter().any(|r| (r - root).norm() <= 1e-8 * scale) {
                roots.push(root);
            }
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(match roots.first() {
        Some(r) => SpectralAbscissa {
            value: r.re,
            converged: true,
            roots,
        },
        None => SpectralAbscissa {
            value: fallback,
            roots,
            converged: false,
        },
    })
}

fn newton_root(sys: &TimeDelaySystem, start: Complex64, tol: f64) -> Option<Complex64> {
    let n = sys.n();
    let (_, mut v) = numerics::smallest_singular_pair(&model::eval_characteristic(sys, start));
    let anchor = v.clone();
    let mut lambda = start;
    for _ in 0..NEWTON_MAX_ITER {
        let f = model::eval_characteristic(sys, lambda);
        let df = model::eval_characteristic_derivative(sys, lambda);
        let mut jac = CMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&f);
        jac.view_mut((0, n), (n, 1)).copy_from(&(&df * &v));
        jac.view_mut((n, 0), (1, n)).copy_from(&anchor.adjoint());
        let mut rhs = CVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(&f * &v));
        rhs[n] = anchor.dotc(&v) - Complex64::new(1.0, 0.0);
        let step =
            numerics::solve_complex(&jac, &CMatrix::from_column_slice(n + 1, 1, rhs.as_slice()))
                .ok()?;
        for i in 0..n {
            v[i] -= step[(i, 0)];
        }
        let dl = step[(n, 0)];
        lambda -= dl;
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return None;
        }
        if dl.norm() <= tol * (1.0 + lambda.norm()) {
            let f = model::eval_characteristic(sys, lambda);
            let resid = (&f * &v).norm() / v.norm();
            let fscale = 1.0 + f.norm() + sys.scale();
            return (resid <= 1e-8 * fscale).then_some(lambda);
        }
    }
    None
}

/// Real Hamiltonian matrix of size `2 n (N + 1)` whose imaginary-axis
/// eigenvalues `j omega` mark frequencies where the shifted transfer
/// function has singular value `1 / (epsilon w(sigma))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub entries: RMatrix,
}

pub fn build_hamiltonian(
    disc: &Discretization,
    pert: &PerturbationSpec,
    sigma: f64,
) -> HamiltonianMatrix {
    let d = disc.dim();
    let gain = eval_weight(pert, &disc.system, sigma) * pert.epsilon();
    let mut shifted = disc.a_n.clone();
    for i in 0..d {
        shifted[(i, i)] -= sigma;
    }
    let bbt = &disc.b_n * disc.b_n.transpose() * gain;
    let mut h = RMatrix::zeros(2 * d, 2 * d);
    h.view_mut((0, 0), (d, d)).copy_from(&shifted);
    h.view_mut((0, d), (d, d)).copy_from(&bbt);
    h.view_mut((d, 0), (d, d)).copy_from(&(-bbt));
    h.view_mut((d, d), (d, d))
        .copy_from(&(-shifted.transpose()));
    HamiltonianMatrix { entries: h }
}

/// `factor * max(1, ||H||_inf)`.
pub fn default_tol_im(h: &HamiltonianMatrix, factor: f64) -> f64 {
    factor * numerics::norm_inf(&h.entries).max(1.0)
}

/// Frequencies `omega >= 0` of the eigenvalues with
/// `|Re lambda| <= tol_im max(1, |lambda|)`, sorted and deduplicated.
pub fn imaginary_axis_frequencies(h: &HamiltonianMatrix, tol_im: f64) -> Result<Vec<f64>> {
    let eig = numerics::eig_real(&h.entries)?;
    let omegas = eig
        .eigenvalues
        .iter()
        .filter(|z| z.re.abs() <= tol_im * z.norm().max(1.0))
        .map(|z| z.im.abs())
        .collect();
    Ok(merge_frequencies(omegas))
}

fn merge_frequencies(mut omegas: Vec<f64>) -> Vec<f64> {
    omegas.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(omegas.len());
    for w in omegas {
        match out.last() {
            Some(&prev) if (w - prev).abs() <= 1e-8 * (1.0 + w) => {}
            _ => out.push(w),
        }
    }
    out
}

fn has_imaginary_axis_eigenvalues(
    disc: &Discretization,
    pert: &PerturbationSpec,
    sigma: f64,
    factor: f64,
) -> Result<bool> {
    let h = build_hamiltonian(disc, pert, sigma);
    let tol = default_tol_im(&h, factor);
    Ok(!imaginary_axis_frequencies(&h, tol)?.is_empty())
}

/// Bisection for `alpha_eps^N`, starting from `sigma_L = alpha(F_N)` and an
/// unbounded `sigma_R`, with the step doubled until an upper bound is found.
pub fn bisect(
    disc: &Discretization,
    pert: &PerturbationSpec,
    opts: &BisectionOptions,
) -> Result<PredictionResult> {
    let alpha_fn = discretization::spectral_abscissa_fn(disc)?;
    let mut bracket = Bracket {
        lower: alpha_fn,
        upper: UpperBound::Infinite,
    };
    let mut step = opts.initial_step.unwrap_or(opts.tol);
    let mut trace = vec![bracket];
    let mut iterations = 0;
    while bracket.width() > opts.tol {
        if iterations == opts.max_iter {
            return Err(PsaError::MaxIterationsExceeded(opts.max_iter));
        }
        iterations += 1;
        let mid = match bracket.upper {
            UpperBound::Infinite => {
                step *= 2.0;
                bracket.lower + step
            }
            UpperBound::Finite(u) => 0.5 * (bracket.lower + u),
        };
        if has_imaginary_axis_eigenvalues(disc, pert, mid, opts.tol_im_factor)? {
            bracket.lower = mid;
        } else {
            bracket.upper = UpperBound::Finite(mid);
        }
        trace.push(bracket);
    }

    let h = build_hamiltonian(disc, pert, bracket.lower);
    let mut frequencies = imaginary_axis_frequencies(&h, default_tol_im(&h, opts.tol_im_factor))?;
    if frequencies.is_empty() {
        if bracket.lower != alpha_fn {
            return Err(PsaError::EmptyFrequencyAnomaly(bracket.lower));
        }
        // Never moved off alpha(F_N): start from the rightmost roots of F_N.
        let roots = discretization::roots_fn(disc)?;
        frequencies = merge_frequencies(
            roots
                .iter()
                .filter(|z| z.re >= alpha_fn - 1e-12 * (1.0 + alpha_fn.abs()))
                .map(|z| z.im.abs())
                .collect(),
        );
    }
    Ok(PredictionResult {
        alpha_pred: bracket.lower,
        frequencies,
        iterations,
        bracket,
        shift_used: 0.0,
        trace,
    })
}

/// Full prediction: computes `alpha(F)`, shifts the system so the rational
/// approximation is centered there, bisects, and maps the result back.
pub fn predict(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    opts: &PredictorOptions,
) -> Result<(PredictionResult, SpectralAbscissa)> {
    pert.check_against(sys)?;
    let order = effective_order(sys, opts.n);
    let spectral =
        spectral_abscissa_exact(sys, &discretization::assemble(sys, order)?, opts.newton_tol)?;
    let alpha = spectral.value;
    let (ssys, spert) = model::shift_system(sys, pert, alpha);
    let disc = discretization::assemble(&ssys, order)?;
    let mut res = bisect(&disc, &spert, &opts.bisection)?;
    res.alpha_pred += alpha;
    res.bracket = res.bracket.shifted(alpha);
    res.trace.iter_mut().for_each(|b| *b = b.shifted(alpha));
    res.shift_used = alpha;
    Ok((res, spectral))
}

/// Delay-free systems are represented exactly with `N = 0`.
pub fn effective_order(sys: &TimeDelaySystem, n: usize) -> usize {
    if sys.is_delay_free() {
        0
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, transfer_function};
    use crate::random::random_system;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};

    fn scalar(values: &[f64], delays: &[f64]) -> TimeDelaySystem {
        TimeDelaySystem::new(
            delays.to_vec(),
            values
                .iter()
                .map(|&v| RMatrix::from_element(1, 1, v))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_spectral_abscissa_examples() {
        let free = TimeDelaySystem::delay_free(RMatrix::from_diagonal(&DVector::from_vec(vec![
            -1.0, -3.0,
        ])))
        .unwrap();
        let sa = spectral_abscissa_exact(&free, &assemble(&free, 0).unwrap(), 1e-12).unwrap();
        assert!(sa.converged);
        assert_abs_diff_eq!(sa.value, -1.0, epsilon = 1e-14);

        let neg = scalar(&[0.0, -1.0], &[0.0, 1.0]);
        let sa = spectral_abscissa_exact(&neg, &assemble(&neg, 15).unwrap(), 1e-12).unwrap();
        assert_abs_diff_eq!(sa.value, -0.318131505204764, epsilon = 1e-12);
        assert_abs_diff_eq!(sa.roots[0].im, 1.337235701430689, epsilon = 1e-12);

        let unstable = scalar(&[1.0], &[0.0]);
        let sa =
            spectral_abscissa_exact(&unstable, &assemble(&unstable, 0).unwrap(), 1e-12).unwrap();
        assert_abs_diff_eq!(sa.value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hamiltonian_scalar_closed_form() {
        let (a, eps) = (0.7, 0.2);
        let sys = scalar(&[a], &[0.0]);
        let pert = PerturbationSpec::unit(0, eps).unwrap();
        let disc = assemble(&sys, 0).unwrap();
        let sigma = -0.4;
        let h = build_hamiltonian(&disc, &pert, sigma);
        let want = RMatrix::from_row_slice(2, 2, &[a - sigma, eps, -eps, -(a - sigma)]);
        assert_eq!(h.entries, want);

        let at_a = build_hamiltonian(&disc, &pert, a);
        let freqs = imaginary_axis_frequencies(&at_a, default_tol_im(&at_a, 1e-8)).unwrap();
        assert_eq!(freqs.len(), 1);
        assert_abs_diff_eq!(freqs[0], eps, epsilon = 1e-14);

        let right = build_hamiltonian(&disc, &pert, a + 2.0 * eps);
        let ev = numerics::eig_real(&right.entries).unwrap().eigenvalues;
        for z in ev {
            assert_abs_diff_eq!(z.re.abs(), eps * 3f64.sqrt(), epsilon = 1e-14);
        }
        assert!(
            imaginary_axis_frequencies(&right, default_tol_im(&right, 1e-8))
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn hamiltonian_spectrum_is_symmetric() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(31);
        for _ in 0..5 {
            let sys = random_system(&mut rng, 3, 2);
            let pert = PerturbationSpec::unit(sys.m(), 0.1).unwrap();
            let disc = assemble(&sys, effective_order(&sys, 8)).unwrap();
            let sigma =
                discretization::spectral_abscissa_fn(&disc).unwrap() + rng.gen_range(0.01..1.0);
            let h = build_hamiltonian(&disc, &pert, sigma);
            let ev = numerics::eig_real(&h.entries).unwrap().eigenvalues;
            let scale = numerics::norm_inf(&h.entries);
            for z in &ev {
                let mirror = -z.conj();
                let best = ev
                    .iter()
                    .map(|w| (w - mirror).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= 1e-8 * scale.max(1.0), "{z}: {best}");
            }
        }
    }

    #[test]
    fn frequencies_match_transfer_singular_values() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..10 {
            let sys = random_system(&mut rng, 3, 2);
            let pert = PerturbationSpec::unit(sys.m(), 0.3).unwrap();
            let disc = assemble(&sys, effective_order(&sys, 10)).unwrap();
            let sigma = discretization::spectral_abscissa_fn(&disc).unwrap() + 0.05;
            let h = build_hamiltonian(&disc, &pert, sigma);
            let level = 1.0 / (pert.epsilon() * eval_weight(&pert, &sys, sigma));
            for w in imaginary_axis_frequencies(&h, default_tol_im(&h, 1e-8)).unwrap() {
                let g = transfer_function(&disc, Complex64::new(sigma, w)).unwrap();
                let sv = numerics::singular_values(&g);
                let best = sv
                    .iter()
                    .map(|s| (s - level).abs() / level)
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= 1e-6, "omega={w}: {sv:?} vs {level}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn disk_case_bisection() {
        for (a, eps) in [(0.0, 0.25), (1.0, 0.5)] {
            let sys = scalar(&[a], &[0.0]);
            let pert = PerturbationSpec::unit(0, eps).unwrap();
            let opts = PredictorOptions {
                bisection: BisectionOptions {
                    tol: 1e-6,
                    ..Default::default()
                },
                ..Default::default()
            };
            let (res, _) = predict(&sys, &pert, &opts).unwrap();
            assert!((res.alpha_pred - (a + eps)).abs() <= 1e-6);
            assert!(res.bracket.width() <= 1e-6);
            assert_eq!(res.frequencies.len(), 1);
            let expect = (eps * eps - (a - res.alpha_pred).powi(2)).sqrt();
            assert_abs_diff_eq!(res.frequencies[0], expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn bracket_trace_is_monotone() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        let sys = random_system(&mut rng, 3, 2);
        let pert = PerturbationSpec::unit(sys.m(), 0.1).unwrap();
        let (res, _) = predict(&sys, &pert, &PredictorOptions::default()).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].lower >= w[0].lower);
            let (u0, u1) = (w[0].upper, w[1].upper);
            if let (UpperBound::Finite(x), UpperBound::Finite(y)) = (u0, u1) {
                assert!(y <= x);
            }
            if u0 != UpperBound::Infinite {
                assert_ne!(u1, UpperBound::Infinite);
            }
        }
        assert!(res.bracket.width() <= 1e-3);
        assert!(!res.frequencies.is_empty());
        assert!(res.frequencies.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn max_iterations_reported() {
        let sys = scalar(&[0.0], &[0.0]);
        let pert = PerturbationSpec::unit(0, 10.0).unwrap();
        let disc = assemble(&sys, 0).unwrap();
        let opts = BisectionOptions {
            tol: 1e-9,
            max_iter: 5,
            ..Default::default()
        };
        assert_eq!(
            bisect(&disc, &pert, &opts),
            Err(PsaError::MaxIterationsExceeded(5))
        );
    }
}
