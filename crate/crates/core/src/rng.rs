//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit seed; independent draws use
//! distinct ChaCha streams of that seed, which keeps results identical
//! between the parallel and sequential builds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
