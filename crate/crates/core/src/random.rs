//! Seeded random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::Instance;

/// Inclusive ranges for every generated quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub n: usize,
    pub m: usize,
    pub max_value: u64,
    pub min_size: u64,
    pub max_size: u64,
    pub max_budget: u64,
}

/// Values in `[0, max_value]`, sizes in `[1, max_size]`, budgets in `[1, max_budget]`.
pub fn gen_random(seed: u64, n: usize, m: usize, max_value: u64, max_size: u64, max_budget: u64) -> Instance {
    let bounds = Bounds {
        n,
        m,
        max_value,
        min_size: 1,
        max_size,
        max_budget,
    };
    gen_with(&mut ChaCha8Rng::seed_from_u64(seed), &bounds)
}

/// Draws one instance from `rng`. Panics if `n`, `m`, `max_budget` are 0 or
/// `min_size > max_size`.
pub fn gen_with<R: Rng>(rng: &mut R, b: &Bounds) -> Instance {
    assert!(b.n >= 1 && b.m >= 1 && b.max_budget >= 1 && b.min_size <= b.max_size);
    let matrix = |rng: &mut R, lo: u64, hi: u64| -> Vec<Vec<u64>> {
        (0..b.n)
            .map(|_| (0..b.m).map(|_| rng.gen_range(lo..=hi)).collect())
            .collect()
    };
    let values = matrix(rng, 0, b.max_value);
    let sizes = matrix(rng, b.min_size, b.max_size);
    let budgets = (0..b.n).map(|_| rng.gen_range(1..=b.max_budget)).collect();
    Instance::new(values, sizes, budgets).expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_in_range() {
        let a = gen_random(7, 3, 5, 10, 4, 9);
        assert_eq!(a, gen_random(7, 3, 5, 10, 4, 9));
        assert_ne!(a, gen_random(8, 3, 5, 10, 4, 9));
        assert!(a.values().iter().flatten().all(|&v| v <= 10));
        assert!(a.sizes().iter().flatten().all(|&s| (1..=4).contains(&s)));
        assert!(a.budgets().iter().all(|&b| (1..=9).contains(&b)));
    }
}
