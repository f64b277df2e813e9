//! Seeded random streams.
//!
//! Every episode draws from its own ChaCha stream derived from the root seed,
//! so results do not depend on the order (or thread) episodes run in.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Stream domains, kept in the top byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Init = 1,
    Train = 2,
    Eval = 3,
    Split = 4,
    Probe = 5,
}

pub fn stream(seed: u64, domain: Domain, batch: u64, episode: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | ((batch & 0xff_ffff_ffff) << 16) | (episode & 0xffff));
    rng
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
