//! Reproducible per-replication random streams.
//!
//! Each `(seed, stream_id)` pair maps to a PCG-64 generator (128-bit state,
//! period 2¹²⁸) whose increment is derived from the stream id, so distinct
//! ids select distinct sequences.

use rand::RngCore;
use rand_pcg::Pcg64;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: Pcg64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let hi = splitmix64(seed);
        let lo = splitmix64(hi ^ 0x6A09_E667_F3BC_C909);
        let state = ((hi as u128) << 64) | lo as u128;
        let stream = ((splitmix64(seed ^ 0xBB67_AE85_84CA_A73B) as u128) << 64) | stream_id as u128;
        Self {
            seed,
            stream_id,
            inner: Pcg64::new(state, stream),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Derives a sub-seed for a labelled job, e.g. one table cell.
pub fn derive_seed(seed: u64, job: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(job.wrapping_add(0x3C6E_F372_FE94_F82B)))
}
