//! Named, reproducible random substreams.
//!
//! Every draw in a trial comes from a ChaCha8 stream keyed by
//! `(master seed, purpose, round, device)`. Two paradigms run from the same
//! master seed therefore see the same participant sets and channel draws,
//! while their transport draws (quantiser and outage for digital, receiver
//! noise for analog) stay independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Sampler = 1,
    Channel = 2,
    /// Quantiser and outage draws of the digital uplink.
    Quantizer = 3,
    /// Receiver noise of the analog uplink.
    Noise = 5,
}

/// Marks streams that are not tied to one device.
pub const ALL_DEVICES: u32 = 0x00FF_FFFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stream id layout: 8 bits purpose, 32 bits round, 24 bits device.
    pub fn get(&self, purpose: Purpose, round: u64, device: u32) -> ChaCha8Rng {
        let id = ((purpose as u64) << 56)
            | ((round & 0xFFFF_FFFF) << 24)
            | u64::from(device & ALL_DEVICES);
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(id);
        rng
    }

    pub fn round(&self, purpose: Purpose, round: u64) -> ChaCha8Rng {
        self.get(purpose, round, ALL_DEVICES)
    }
}
