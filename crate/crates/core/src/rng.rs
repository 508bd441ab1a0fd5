//! Seed discipline.
//!
//! A master seed is split into independent ChaCha streams, one per
//! component, so that changing how many draws one component makes never
//! shifts the draws of another. The stream word is `component << 32 | index`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Component {
    Layout = 1,
    Channel = 2,
    InitialPhases = 3,
    NetworkInit = 4,
    Exploration = 5,
    Replay = 6,
    Codebook = 7,
    NoSimChannel = 8,
    Test = 99,
}

/// Independent stream for `component` under `master`.
pub fn stream(master: u64, component: Component) -> ChaCha8Rng {
    indexed_stream(master, component, 0)
}

/// Independent stream for the `index`-th use of `component` (e.g. per episode).
pub fn indexed_stream(master: u64, component: Component, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((component as u64) << 32) | index as u64);
    rng
}
