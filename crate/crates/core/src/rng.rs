//! Portable counter-based random numbers.
//!
//! Output `i` (zero-based) of a generator keyed by `(seed, stream)` is
//!
//! ```text
//! key     = mix(mix(seed) ^ (stream * 0xD1B54A32D192ED03))
//! out(i)  = mix(key + (i + 1) * 0x9E3779B97F4A7C15)
//! mix(z)  = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!           z ^= z >> 27; z *= 0x94D049BB133111EB;
//!           z ^ (z >> 31)
//! ```
//!
//! with all arithmetic wrapping modulo 2^64. `mix` is the SplitMix64
//! finalizer, so a single stream is exactly SplitMix64 started at `key`.
//! Because every output is a pure function of `(key, i)`, the sequence is
//! identical on every platform and can be re-derived without replaying it.
//!
//! Conversions:
//! - uniform `[0, 1)`: `(x >> 11) * 2^-53`
//! - uniform `(0, 1]`: `((x >> 11) + 1) * 2^-53`
//! - standard normals come in pairs from two consecutive outputs `a`, `b`:
//!   `u1 = (0,1] from a`, `u2 = [0,1) from b`,
//!   `r = sqrt(-2 ln u1)`, first `r cos(2π u2)` then `r sin(2π u2)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream identifiers used across the crate. Distinct streams keyed by the
/// same seed are statistically independent.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const BLOBS: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const GRADCHECK: u64 = 4;
    /// Epoch `e` (1-based) shuffles with stream `SHUFFLE_BASE + e`.
    pub const SHUFFLE_BASE: u64 = 1 << 32;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    spare_normal: Option<u64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix(mix(seed) ^ stream.wrapping_mul(STREAM_MUL)),
            counter: 0,
            spare_normal: None,
        }
    }

    /// Output at absolute position `index`, independent of the current state.
    pub fn at(&self, index: u64) -> u64 {
        mix(self.key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = self.at(self.counter);
        self.counter += 1;
        x
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform in `(0, 1]`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` by rejection, so there is no modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Standard normal variate. Pairs are generated by Box–Muller; the sine
    /// branch is held back and returned by the following call.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(bits) = self.spare_normal.take() {
            return f64::from_bits(bits);
        }
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some((r * libm::sin(theta)).to_bits());
        r * libm::cos(theta)
    }

    /// In-place Fisher–Yates, walking from the last index down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
