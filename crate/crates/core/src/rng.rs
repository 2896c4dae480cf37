//! Reproducible random substreams for Monte Carlo replications.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies one independent random substream: a master seed plus the
/// replication counter.
///
/// Every replication draws from its own ChaCha stream (the stream word is the
/// replication counter), so results do not depend on scheduling order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}
