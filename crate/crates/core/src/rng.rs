//! Counter-addressed random streams.
//!
//! A [`RandomStream`] names a ChaCha8 keystream by `(master_seed, stream_index)`.
//! Parallel work is partitioned by stream index, never by thread, so results do
//! not depend on how many workers run them.

use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator type handed out by [`RandomStream::rng`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Derived stream for sub-task `k`. Distinct `(self, k)` pairs map to distinct
    /// indices with overwhelming probability.
    pub fn child(&self, k: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_index: mix64(self.stream_index ^ mix64(k).rotate_left(17)),
        }
    }
}

/// Runs `f` on consecutive chunks of `total` work items, chunk `c` receiving
/// the generator of `stream.child(c)` and its item count. Output order follows
/// chunk order whatever the thread count.
pub fn par_chunks<T, F>(total: u64, chunk: u64, stream: RandomStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, u64) -> T + Sync,
{
    assert!(chunk > 0);
    let chunks = total.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = chunk.min(total - c * chunk);
            let mut rng = stream.child(c).rng();
            f(&mut rng, len)
        })
        .collect()
}
