//! Shared fixtures for the propagation benchmarks.

use std::sync::Arc;

use ldgcn::harness::random_adjacency;
use ldgcn::tensor::glorot_uniform;
use ldgcn::{Result, SparseAdjacency, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub adjacency: Arc<SparseAdjacency>,
    pub features: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// A random `n`-node graph with `m` entries and `d`-wide features.
pub fn fixture(n: usize, m: usize, d: usize, seed: u64) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adjacency = Arc::new(random_adjacency(n, m, &mut rng)?);
    let features = Tensor::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    Ok(Fixture {
        adjacency,
        features,
        weight: glorot_uniform(d, d, &mut rng),
        bias: Tensor::zeros(1, d),
    })
}
