#![allow(dead_code)]

use oscbath::{DiscreteBath, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random bath with distinct frequencies in [0.5, 5] and couplings up to `fmax`.
pub fn random_bath(rng: &mut ChaCha8Rng, n: usize, fmax: f64) -> DiscreteBath {
    let mut omegas: Vec<f64> = Vec::new();
    while omegas.len() < n {
        let w = rng.gen_range(0.5..5.0);
        if omegas.iter().all(|&o: &f64| (o - w).abs() > 0.05) {
            omegas.push(w);
        }
    }
    let couplings = (0..n).map(|_| rng.gen_range(0.0..fmax)).collect();
    DiscreteBath::new(omegas, couplings).unwrap()
}

pub fn corpus(seed: u64, count: usize, max_n: usize, fmax: f64) -> Vec<DiscreteBath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_n);
            random_bath(&mut rng, n, fmax)
        })
        .collect()
}

pub fn unit() -> SystemParams {
    SystemParams::default()
}
