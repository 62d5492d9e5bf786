//! The correction step: Gauss-Newton on the extremality equations from a
//! coarse prediction, showing the residual history of every start.
//!
//! ```text
//! cargo run --release --example correct
//! ```

use rand::SeedableRng;
use tds_psa::corrector::{self, GaussNewtonOptions};
use tds_psa::model::{self, PerturbationSpec};
use tds_psa::predictor::{self, BisectionOptions, PredictorOptions};
use tds_psa::random::random_plant;

fn main() -> Result<(), tds_psa::PsaError> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let sys = random_plant(&mut rng, 3, 2);
    let pert = PerturbationSpec::unit(2, 0.1)?;
    let opts = PredictorOptions {
        bisection: BisectionOptions {
            tol: 1e-2,
            ..Default::default()
        },
        ..Default::default()
    };
    let (pred, _) = predictor::predict(&sys, &pert, &opts)?;
    println!(
        "prediction {:.6} with starts at omega = {:?}",
        pred.alpha_pred, pred.frequencies
    );

    let res = corrector::correct(&sys, &pert, &pred, &GaussNewtonOptions::default())?;
    for s in &res.per_start {
        let history: Vec<String> = s
            .residual_history
            .iter()
            .map(|r| format!("{r:.1e}"))
            .collect();
        println!(
            "start omega = {:.4}: sigma = {:.12}, omega = {:.8}, residuals [{}]",
            s.start_omega,
            s.sigma,
            s.omega,
            history.join(", ")
        );
    }
    let f = model::eval_level(
        &sys,
        &pert,
        num_complex::Complex64::new(res.alpha_eps, res.omega_eps),
    );
    println!(
        "\nalpha_eps = {:.12}, f there = {f:.12} (1/eps = {})",
        res.alpha_eps,
        1.0 / pert.epsilon()
    );
    Ok(())
}
