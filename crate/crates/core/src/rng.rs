//! Named random streams derived from one master seed, so each stochastic
//! sub-stage can be reproduced on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Library = 1,
    Start = 2,
    Anneal = 3,
    Fixture = 4,
}

/// Independent stream for `(master, purpose, index, attempt)`.
pub fn stream(master: u64, purpose: Purpose, index: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 56) | ((attempt & 0xff) << 48) | (index & 0xffff_ffff_ffff));
    rng
}
