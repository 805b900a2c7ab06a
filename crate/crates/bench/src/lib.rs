//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sage_core::{BinaryMask, GridDims, SalMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_map(rng: &mut ChaCha8Rng, dims: GridDims) -> SalMap {
    SalMap::new(dims, (0..dims.len()).map(|_| rng.random::<f32>()).collect()).unwrap()
}

pub fn random_mask(rng: &mut ChaCha8Rng, dims: GridDims, density: f64) -> BinaryMask {
    BinaryMask::from_fn(dims, |_, _| rng.random_bool(density))
}
