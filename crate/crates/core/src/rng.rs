//! Seeded, splittable random streams.
//!
//! Every random draw in the crate goes through an [`RngStream`], a `(seed,
//! stream_id)` pair backed by ChaCha20. ChaCha's native stream counter gives
//! independent sequences per stream id, so bootstrap replicates and tuning
//! candidates can each own a stream and the results do not depend on the
//! order in which they are evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Child stream for sub-task `index`; distinct from `self` and from every
    /// other index.
    pub fn split(&self, index: u64) -> Self {
        // splitmix64 finalizer over (stream_id, index)
        let mut z = self
            .stream_id
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(index.wrapping_add(1))
            ^ index.rotate_left(32);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self::new(self.seed, z)
    }

    pub fn generator(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A 64-bit seed drawn from this stream, for APIs that take a bare seed.
    pub fn derive_seed(&self) -> u64 {
        self.generator().random()
    }
}

/// Draw from U[lo, hi).
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Laplace(0, 1) by inversion.
pub fn standard_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // u in (-1/2, 1/2); reject the endpoint so ln never sees 0
    loop {
        let u = rng.random::<f64>() - 0.5;
        if u != -0.5 {
            return -u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_seed_and_stream_reproduce_bytes() {
        let s = RngStream::new(42, 7);
        let mut a = [0u8; 256];
        let mut b = [0u8; 256];
        s.generator().fill_bytes(&mut a);
        s.generator().fill_bytes(&mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ() {
        let a = RngStream::new(42, 0).generator().next_u64();
        let b = RngStream::new(42, 1).generator().next_u64();
        let c = RngStream::new(43, 0).generator().next_u64();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_children_are_distinct() {
        let root = RngStream::new(1, 0);
        let ids: std::collections::HashSet<u64> = (0..1000).map(|i| root.split(i).stream_id).collect();
        assert_eq!(ids.len(), 1000);
    }

    #[test]
    fn pinned_first_draw() {
        // guards against an accidental change of generator or seeding scheme
        let first = RngStream::new(0, 0).generator().next_u64();
        let again = ChaCha20Rng::seed_from_u64(0).next_u64();
        assert_eq!(first, again);
    }

    #[test]
    fn laplace_is_symmetric_with_unit_scale() {
        let mut rng = RngStream::new(3, 0).generator();
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| standard_laplace(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let mean_abs = draws.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        // E|X| = 1, Var|X| = 1
        assert!(mean.abs() < 5.0 * (2.0 / n as f64).sqrt());
        assert!((mean_abs - 1.0).abs() < 5.0 / (n as f64).sqrt());
    }
}
