//! Timing on random plants of increasing size (entries uniform in [-1, 1],
//! delays uniform in (0, 1], unit weights, eps = 0.1, N = 15).
//!
//! ```text
//! cargo run --release --example scale_benchmark
//! ```

use std::time::Instant;

use rand::SeedableRng;
use tds_psa::model::PerturbationSpec;
use tds_psa::random::random_plant;
use tds_psa::{pseudospectral_abscissa, PsaOptions};

fn main() -> Result<(), tds_psa::PsaError> {
    println!(" n  m  dim(A_N)  alpha(F)     alpha_eps    bisection  time");
    for (k, (n, m)) in [(2, 1), (4, 2), (6, 3), (8, 5), (10, 7), (15, 4)]
        .into_iter()
        .enumerate()
    {
        let mut rng = rand::rngs::StdRng::seed_from_u64(k as u64);
        let sys = random_plant(&mut rng, n, m);
        let pert = PerturbationSpec::unit(m, 0.1)?;
        let started = Instant::now();
        let res = pseudospectral_abscissa(&sys, &pert, &PsaOptions::default())?;
        println!(
            "{n:2} {m:2}  {:8}  {:+.8}  {:+.8}  {:9}  {:.3} s",
            n * 16,
            res.spectral.value,
            res.alpha_eps,
            res.prediction.iterations,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
