//! Counter-style random streams keyed by `(seed, trial, purpose)`.
//!
//! Every trial draws from its own ChaCha key, so results for one trial never
//! depend on how many other trials or sweep points exist, or on which thread
//! runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Channel,
    Data,
    /// Unit-variance noise for OFDM symbol `n`.
    Noise(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Channel => 0,
            Stream::Data => 1,
            Stream::Noise(n) => 2 + n as u64,
        }
    }
}

pub fn stream_rng(seed: u64, trial: u64, stream: Stream) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(stream.id());
    rng
}
