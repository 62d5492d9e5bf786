//! Building a system programmatically, saving it in the JSON system-file
//! format, and running `compute` on it as the binary would.

use rand::SeedableRng;
use tds_psa::cli::{self, ComputeOptions, SystemFile};
use tds_psa::model::{PerturbationSpec, Weight};
use tds_psa::random::random_plant;

fn main() -> Result<(), cli::CliError> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(42);
    let sys = random_plant(&mut rng, 2, 2);
    // perturb A_0 and A_2 only, A_2 twice as strongly
    let pert = PerturbationSpec::new(
        vec![Weight::Finite(1.0), Weight::Infinite, Weight::Finite(0.5)],
        0.05,
    )?;
    let file = SystemFile::from_problem("weighted", &sys, &pert);
    println!("{}", file.to_json());

    let again = SystemFile::parse(&file.to_json())?;
    assert_eq!(again, file);

    let record = cli::cmd_compute(
        &again,
        &ComputeOptions {
            n: 20,
            ..Default::default()
        },
    )?;
    println!(
        "\n{}",
        serde_json::to_string_pretty(&record).expect("record serializes")
    );
    Ok(())
}
