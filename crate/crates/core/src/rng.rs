//! Counter-based seed splitting.
//!
//! A master seed is expanded into independent ChaCha8 streams addressed by
//! `(domain, index)`: the domain key is `splitmix64(seed ^ splitmix64(domain))`
//! expanded to a 256-bit ChaCha key, and `index` selects the ChaCha stream
//! (nonce). Consumers never share a stream, so results do not depend on the
//! order in which trials, donors or steps are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream families. Each is a separate key space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// The experiment's fixed demand realization.
    Realization = 1,
    /// Per-trial seeds.
    Trial = 2,
    /// Per-(donor, step) policy decisions within one trial.
    Decision = 3,
    /// Per-(donor, step) pre-match sampling within one trial.
    Plan = 4,
    /// Per-trial resampled demand realizations.
    TrialRealization = 5,
    /// Simulation rounds of the β estimator.
    Beta = 6,
    /// Scenario generation.
    Generator = 7,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of a family of independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seeds {
    master: u64,
}

impl Seeds {
    pub const fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Deterministic 64-bit value for `(domain, index)`.
    pub fn derive(&self, domain: Domain, index: u64) -> u64 {
        let key = splitmix64(self.master ^ splitmix64(domain as u64));
        splitmix64(key ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
    }

    /// Child seed tree, e.g. one per trial.
    pub fn child(&self, domain: Domain, index: u64) -> Seeds {
        Seeds::new(self.derive(domain, index))
    }

    /// Independent generator for `(domain, index)`.
    pub fn stream(&self, domain: Domain, index: u64) -> StreamRng {
        let k0 = splitmix64(self.master ^ splitmix64(domain as u64));
        let mut key = [0u8; 32];
        let mut z = k0;
        for chunk in key.chunks_exact_mut(8) {
            z = splitmix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

/// Uniform draw in `[0, 1)`.
#[inline]
pub fn unit<R: rand::RngCore + ?Sized>(rng: &mut R) -> f64 {
    // 53 random mantissa bits.
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n`, `n > 0`.
#[inline]
pub fn below<R: rand::RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    debug_assert!(n > 0);
    // Lemire's nearly-divisionless method on 64 bits.
    let n = n as u64;
    loop {
        let x = rng.next_u64();
        let m = (x as u128) * (n as u128);
        let lo = m as u64;
        if lo >= n || lo >= n.wrapping_neg() % n {
            return (m >> 64) as usize;
        }
    }
}
