//! Stable seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus the identity of
//! the entity it belongs to (transmitter, target, burst, label). Streams are
//! therefore independent of the order in which workers pick up entities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate. Algorithms accept any `rand::Rng`;
/// this is the counter-based one the pipelines hand out.
pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incrementally hashes a key path into a 64-bit seed.
#[derive(Debug, Clone, Copy)]
pub struct SeedKey(u64);

impl SeedKey {
    pub fn new(master: u64) -> Self {
        SeedKey(FNV_OFFSET).u64(master)
    }

    fn bytes(mut self, bytes: &[u8]) -> Self {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    pub fn str(self, s: &str) -> Self {
        // length prefix keeps ("ab","c") distinct from ("a","bc")
        self.u64(s.len() as u64).bytes(s.as_bytes())
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn seed(self) -> u64 {
        splitmix64(self.0)
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.seed())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
