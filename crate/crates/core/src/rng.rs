//! Seeded random streams.
//!
//! Every random quantity comes from a ChaCha8 generator keyed by the user
//! seed, with a fixed stream id per consumer so that consumers never share
//! draws:
//!
//! | stream | consumer                                   |
//! |--------|--------------------------------------------|
//! | 0      | parent noise field of a simulated scenario |
//! | 1      | neighbor exclusion / resampling of the composite null estimator |
//! | 2      | Monte Carlo null laws (even neighborhood sizes) |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const NOISE_STREAM: u64 = 0;
pub const RESAMPLING_STREAM: u64 = 1;
pub const MONTE_CARLO_STREAM: u64 = 2;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
