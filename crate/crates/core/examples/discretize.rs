//! Chebyshev collocation of `x'(t) = -x(t - 1)`: the rightmost eigenvalues
//! of `A_N` converge to the characteristic roots, and the rational
//! functions `p_N(-tau; lambda)` converge to `exp(-lambda tau)`.
//!
//! ```text
//! cargo run --release --example discretize
//! ```

use num_complex::Complex64;
use tds_psa::discretization::{self, chebyshev_mesh};
use tds_psa::model::TimeDelaySystem;
use tds_psa::numerics::RMatrix;
use tds_psa::predictor;

fn main() -> Result<(), tds_psa::PsaError> {
    let sys = TimeDelaySystem::new(
        vec![0.0, 1.0],
        vec![
            RMatrix::from_element(1, 1, 0.0),
            RMatrix::from_element(1, 1, -1.0),
        ],
    )?;

    let mesh = chebyshev_mesh(4, 1.0)?;
    println!("mesh N = 4: {:?}", mesh.points);

    let lambda = Complex64::new(0.5, 1.5);
    let exact = (-lambda).exp();
    println!("\n  N   alpha(F_N)          |p_N(-1; {lambda}) - exp(-lambda)|");
    for n in [2, 4, 6, 8, 10, 15, 20] {
        let disc = discretization::assemble(&sys, n)?;
        let alpha = discretization::spectral_abscissa_fn(&disc)?;
        let err = (discretization::eval_pn(&disc, 1.0, lambda)? - exact).norm();
        println!("{n:3}   {alpha:+.15}  {err:.3e}");
    }

    let disc = discretization::assemble(&sys, 15)?;
    let refined = predictor::spectral_abscissa_exact(&sys, &disc, 1e-14)?;
    println!(
        "\nNewton-refined rightmost roots (alpha(F) = {:.15}):",
        refined.value
    );
    for z in &refined.roots {
        println!("  {:+.15} {:+.15}j", z.re, z.im);
    }
    Ok(())
}
