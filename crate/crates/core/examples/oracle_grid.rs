//! Brute-force check: evaluate `f` on a grid, refine around the rightmost
//! superlevel nodes, and compare with the corrected abscissa.
//!
//! ```text
//! cargo run --release --example oracle_grid
//! ```

use rand::SeedableRng;
use tds_psa::model::PerturbationSpec;
use tds_psa::oracle::{self, GridRegion};
use tds_psa::random::random_system;
use tds_psa::{pseudospectral_abscissa, PsaOptions};

fn main() -> Result<(), tds_psa::PsaError> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    for _ in 0..5 {
        let sys = random_system(&mut rng, 3, 2);
        let pert = PerturbationSpec::unit(sys.m(), 0.1)?;
        let res = pseudospectral_abscissa(&sys, &pert, &PsaOptions::default())?;
        let region = GridRegion::enclosing(&sys, &pert, res.spectral.value - 0.5, 300, 300)?;
        let grid = oracle::grid_psa(&sys, &pert, &region, oracle::DEFAULT_REFINE_ITERS)?;
        println!(
            "n = {}, m = {}: corrector {:+.8}, grid {:+.8} (resolution {:.1e}), gap {:.1e}",
            sys.n(),
            sys.m(),
            res.alpha_eps,
            grid.alpha,
            grid.resolution,
            (res.alpha_eps - grid.alpha).abs()
        );
    }
    Ok(())
}
