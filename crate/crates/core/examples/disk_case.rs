//! The analytic disk case: for `x' = a x` with a single perturbed matrix the
//! pseudospectrum is the disk of radius `eps` around `a`, so the
//! pseudospectral abscissa is `a + eps`.
//!
//! ```text
//! cargo run --release --example disk_case
//! ```

use tds_psa::model::{PerturbationSpec, TimeDelaySystem};
use tds_psa::numerics::RMatrix;
use tds_psa::{pseudospectral_abscissa, PsaOptions};

fn main() -> Result<(), tds_psa::PsaError> {
    for (a, eps) in [(0.0, 0.25), (1.0, 0.5), (-2.0, 0.1)] {
        let sys = TimeDelaySystem::delay_free(RMatrix::from_element(1, 1, a))?;
        let pert = PerturbationSpec::unit(0, eps)?;
        let res = pseudospectral_abscissa(&sys, &pert, &PsaOptions::default().with_tol(1e-2))?;
        println!(
            "a = {a:5.2}, eps = {eps:4.2}: alpha_eps = {:.12} (exact {:.2}), predicted {:.6}",
            res.alpha_eps,
            a + eps,
            res.prediction.alpha_pred
        );
    }
    Ok(())
}
