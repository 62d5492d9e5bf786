//! The prediction step on its own: bisection on the real part using the
//! Hamiltonian imaginary-axis test, printed bracket by bracket.
//!
//! ```text
//! cargo run --release --example predict
//! ```

use rand::SeedableRng;
use tds_psa::model::PerturbationSpec;
use tds_psa::predictor::{self, BisectionOptions, PredictorOptions, UpperBound};
use tds_psa::random::random_plant;

fn main() -> Result<(), tds_psa::PsaError> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let sys = random_plant(&mut rng, 4, 2);
    let pert = PerturbationSpec::unit(2, 0.1)?;
    let opts = PredictorOptions {
        n: 10,
        bisection: BisectionOptions {
            tol: 1e-6,
            ..Default::default()
        },
        ..Default::default()
    };
    let (pred, spectral) = predictor::predict(&sys, &pert, &opts)?;

    println!("alpha(F) = {:.10}, used as the shift", spectral.value);
    println!("\nstep  sigma_L          sigma_R");
    for (k, b) in pred.trace.iter().enumerate() {
        let upper = match b.upper {
            UpperBound::Finite(u) => format!("{u:.10}"),
            UpperBound::Infinite => "inf".to_string(),
        };
        println!("{k:4}  {:.10}  {upper}", b.lower);
    }
    println!(
        "\nalpha_eps^N ~ {:.10} after {} steps",
        pred.alpha_pred, pred.iterations
    );
    println!(
        "imaginary-axis frequencies at sigma_L: {:?}",
        pred.frequencies
    );
    Ok(())
}
