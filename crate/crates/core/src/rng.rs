//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream keyed by the
//! master seed, a domain tag and the realization index, so results do not
//! depend on scheduling order or worker count.

use rand::SeedableRng;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{Real, C};

/// Random-stream domains used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Channel = 1,
    Training = 2,
    SelectionNoise = 3,
    EquivalentChannelNoise = 4,
    Data = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(master_seed, domain, tags…, realization)`.
pub fn stream(master_seed: u64, domain: Domain, tags: &[u64], realization: u64) -> ChaCha8Rng {
    let mut key = splitmix64(master_seed ^ splitmix64(domain as u64));
    for &t in tags {
        key = splitmix64(key ^ splitmix64(t.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(realization);
    rng
}

/// Zero-mean circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<T: Real, R: RngCore + ?Sized>(rng: &mut R, variance: T) -> C<T> {
    let s = (variance.as_f64() / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(T::lit(re * s), T::lit(im * s))
}

/// Uniform sample in `[lo, hi]`.
pub fn uniform<T: Real, R: RngCore + ?Sized>(rng: &mut R, lo: T, hi: T) -> T {
    let u: f64 = rng.random();
    lo + (hi - lo) * T::lit(u)
}
