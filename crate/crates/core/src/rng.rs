//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by a user
//! seed and addressed by a 64-bit stream id (band/voxel index, pixel index,
//! channel index). The values a voxel receives therefore do not depend on how
//! work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Returns the generator for `stream` under `seed`, positioned at word 0.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
