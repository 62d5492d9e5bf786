#![allow(dead_code)]

use nalgebra::Complex;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use tds_psa::corrector::{self, CorrectorState};
use tds_psa::discretization;
use tds_psa::model::{self, PerturbationSpec, TimeDelaySystem};
use tds_psa::numerics::{CMatrix, CVector, RMatrix};
use tds_psa::oracle::{self, GridRegion};
use tds_psa::predictor;

pub type Rng64 = rand::rngs::StdRng;

pub fn rng(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

pub fn scalar(delays: &[f64], values: &[f64]) -> TimeDelaySystem {
    TimeDelaySystem::new(
        delays.to_vec(),
        values
            .iter()
            .map(|&v| RMatrix::from_element(1, 1, v))
            .collect(),
    )
    .unwrap()
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_cvector(rng: &mut Rng64, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn det(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

/// `alpha(F)` from the discretization plus Newton refinement.
pub fn spectral_abscissa(sys: &TimeDelaySystem) -> f64 {
    let n = predictor::effective_order(sys, 20);
    let disc = discretization::assemble(sys, n).unwrap();
    predictor::spectral_abscissa_exact(sys, &disc, 1e-13)
        .unwrap()
        .value
}

/// Grid oracle over a region enclosing the pseudospectrum to the right of
/// `alpha(F) - 0.5`, 400 x 400 nodes, three refinement rounds.
pub fn oracle_alpha(sys: &TimeDelaySystem, pert: &PerturbationSpec) -> oracle::GridPsa {
    let region = GridRegion::enclosing(sys, pert, spectral_abscissa(sys) - 0.5, 400, 400).unwrap();
    oracle::grid_psa(sys, pert, &region, 3).unwrap()
}

pub fn random_state(rng: &mut Rng64, n: usize) -> CorrectorState {
    CorrectorState {
        u: random_cvector(rng, n),
        v: random_cvector(rng, n),
        omega: rng.gen_range(0.1..3.0),
        sigma: rng.gen_range(-0.5..1.0),
        anchor: random_cvector(rng, 2 * n),
    }
}

/// Central differences with step `1e-6 (1 + |x_j|)`.
pub fn fd_jacobian(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    state: &CorrectorState,
) -> RMatrix {
    let x = state.to_real();
    let m = corrector::residual(sys, pert, state).len();
    let mut fd = RMatrix::zeros(m, x.len());
    for j in 0..x.len() {
        let h = 1e-6 * (1.0 + x[j].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let rp = corrector::residual(sys, pert, &state.with_real(&xp));
        let rm = corrector::residual(sys, pert, &state.with_real(&xm));
        fd.set_column(j, &((rp - rm) / (2.0 * h)));
    }
    fd
}

/// `H(lambda, sigma, xi)` in the original coordinates.
pub fn nleig(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    lambda: Complex<f64>,
    sigma: f64,
    xi: f64,
) -> CMatrix {
    let (shifted, _) = model::shift_system(sys, pert, sigma);
    corrector::build_nleig(&shifted, lambda, xi).entries
}
