//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by a 64-bit key and a 64-bit
//! stream id. ChaCha is counter based, so streams with different ids never
//! overlap and a `(key, id)` pair always replays the same draws no matter
//! which thread consumes it.

use rand::RngCore;
use rand_distr::{Distribution, Poisson};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(key: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(key);
        inner.set_stream(stream);
        Self { key, stream, inner }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Derives an independent stream without advancing `self`.
    pub fn child(&self, index: u64) -> RngStream {
        let key = mix64(self.key ^ mix64(self.stream ^ GOLDEN.rotate_left(17)));
        RngStream::new(key, index)
    }

    /// Uniform draw on (0, 1]; safe to feed into `ln` and negative powers.
    pub fn open01(&mut self) -> f64 {
        // 53 random bits, shifted off zero.
        ((self.inner.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        // Knuth's product method is exact and cheap for the small means that
        // dominate branching simulations.
        if mean < 12.0 {
            let limit = (-mean).exp();
            let mut k = 0;
            let mut p = self.open01();
            while p > limit {
                k += 1;
                p *= self.open01();
            }
            return k;
        }
        Poisson::new(mean).expect("finite positive mean").sample(self) as u64
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Stream for replicate `index` of a run seeded with `seed`.
pub fn split_stream(seed: u64, index: u64) -> RngStream {
    RngStream::new(seed, index)
}

/// Like [`split_stream`] but additionally keyed by a module tag, so two
/// modules consuming the same replicate index never share draws.
pub fn split_stream_tagged(seed: u64, index: u64, tag: &str) -> RngStream {
    RngStream::new(mix64(seed ^ fnv1a(tag)), index)
}
