//! Seeded random plants for benchmarks, property tests and the CLI.

use rand::Rng;

use crate::model::TimeDelaySystem;
use crate::numerics::RMatrix;

/// Plant with exactly `n` states and `m` delays: entries uniform in
/// `[-1, 1]`, delays uniform in `(0, 1]` and sorted.
pub fn random_plant<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> TimeDelaySystem {
    let mut delays: Vec<f64> = (0..m).map(|_| 1.0 - rng.gen::<f64>()).collect();
    delays.sort_by(f64::total_cmp);
    delays.insert(0, 0.0);
    let matrices = (0..=m)
        .map(|_| RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0)))
        .collect();
    TimeDelaySystem::new(delays, matrices).expect("random plant is valid by construction")
}

/// Plant with `1 <= n <= max_n` states and `0 <= m <= max_m` delays.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_m: usize) -> TimeDelaySystem {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(0..=max_m);
    random_plant(rng, n, m)
}

/// Plant with fixed delays, matrices scaled by `scale`.
pub fn random_plant_with_delays<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    delays: &[f64],
    scale: f64,
) -> TimeDelaySystem {
    let mut all = vec![0.0];
    all.extend_from_slice(delays);
    let matrices = all
        .iter()
        .map(|_| RMatrix::from_fn(n, n, |_, _| scale * rng.gen_range(-1.0..=1.0)))
        .collect();
    TimeDelaySystem::new(all, matrices).expect("delays must be positive")
}
