//! Deterministic counter-based random streams.
//!
//! Every random quantity in this crate is derived from a 64-bit seed through
//! the same primitive so that outputs are byte-reproducible and independent
//! streams can be split off by name without coordination.
//!
//! Stream algorithm (`splitmix64-counter-v1`):
//!   out[i] = mix(key + (i + 1) * 0x9E3779B97F4A7C15)
//! where `mix` is the splitmix64 finalizer
//!   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!   z ^= z >> 27; z *= 0x94D049BB133111EB;
//!   z ^= z >> 31;
//! (all arithmetic wrapping, all shifts logical) and
//!   key = mix(seed ^ fnv1a64(stream name)).
//!
//! Uniform doubles map the top 53 bits into (0, 1]; normal deviates use the
//! Box-Muller cosine branch on consecutive uniform pairs. Data files produced
//! by the synthetic generator carry the algorithm tag and seed in a header
//! comment so the byte stream can be re-derived outside this crate.

use rand::RngCore;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a byte string, used to derive stream keys from labels.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives an independent 64-bit seed for a named sub-task (e.g. a per-series
/// model fit) from a run seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    mix(seed ^ fnv1a64(label.as_bytes()))
}

/// Counter-based generator; see the module docs for the exact stream recipe.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Stream keyed directly by `seed`.
    pub fn new(seed: u64) -> Self {
        Self { key: mix(seed), counter: 0 }
    }

    /// Independent named stream: `key = mix(seed ^ fnv1a64(name))`.
    pub fn stream(seed: u64, name: &str) -> Self {
        Self { key: derive_seed(seed, name), counter: 0 }
    }

    /// Next raw 64-bit output.
    #[inline]
    pub fn next_raw(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform double in (0, 1].
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_raw() >> 11) as f64 + 1.0) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal deviate (Box-Muller, cosine branch).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, bound)` by scaling; `bound` must be nonzero.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        let u = self.uniform();
        // uniform() is in (0,1]; flip so the result never reaches `bound`.
        (((1.0 - u) * bound as f64) as usize).min(bound - 1)
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_raw() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_raw()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        rand::rand_core::impls::fill_bytes_via_next(self, dest)
    }
}
