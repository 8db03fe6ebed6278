//! Deterministic random substreams.
//!
//! Every stochastic step in the crate draws from a [`RngStream`], a
//! `(master_seed, stream_id)` pair mapped onto a ChaCha8 key and stream.
//! Identical pairs replay bit-identical sequences; distinct stream ids under
//! one key are independent ChaCha streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Offset added to a training-seed index to form its stream id.
pub const SEED_STREAM_OFFSET: u64 = 1 << 32;
/// Offset for the single retry of a failed bootstrap replicate.
pub const RETRY_STREAM_OFFSET: u64 = 1 << 40;
/// Offset for auxiliary streams (data simulation, MCMC, test grids, ...).
pub const AUX_STREAM_OFFSET: u64 = 1 << 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// Stream for bootstrap replicate `b`.
    pub fn replicate(master_seed: u64, b: u64) -> Self {
        Self::new(master_seed, b)
    }

    /// Stream for training seed `s`.
    pub fn training_seed(master_seed: u64, s: u64) -> Self {
        Self::new(master_seed, SEED_STREAM_OFFSET + s)
    }

    /// Auxiliary stream identified by `tag`.
    pub fn aux(master_seed: u64, tag: u64) -> Self {
        Self::new(master_seed, AUX_STREAM_OFFSET + tag)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A fresh 64-bit seed drawn from this stream, for nesting whole
    /// experiments under one master seed.
    pub fn derive_seed(&self) -> u64 {
        use rand::RngCore;
        self.rng().next_u64()
    }
}
