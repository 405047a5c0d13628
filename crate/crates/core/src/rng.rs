//! Counter-based random numbers keyed by coordinates.
//!
//! Every draw is a pure function of `(seed, stream, junction, x, y)` through
//! Philox4x32-10, so results do not depend on evaluation order or on how
//! work is split across threads.

use statrs::function::erf::erfc_inv;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, ctr[0]);
        let (hi1, lo1) = mulhilo(M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// Independent purposes get disjoint counter spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Stream {
    Thickness = 1,
    Topography = 2,
    DetectorNoise = 3,
    Derived = 4,
    Synthetic = 5,
    ThinPoint = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedRng {
    key: [u32; 2],
}

impl KeyedRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    #[inline]
    pub fn block(&self, stream: Stream, junction: u32, x: u32, y: u32) -> [u32; 4] {
        philox4x32_10([x, y, junction, stream as u32], self.key)
    }

    /// Uniform in the open interval `(0, 1)` with 52 random bits.
    #[inline]
    pub fn uniform(&self, stream: Stream, junction: u32, x: u32, y: u32) -> f64 {
        let w = self.block(stream, junction, x, y);
        bits_to_open_unit(((w[0] as u64) << 32) | w[1] as u64)
    }

    /// Standard normal by inversion, monotone in the underlying uniform.
    #[inline]
    pub fn standard_normal(&self, stream: Stream, junction: u32, x: u32, y: u32) -> f64 {
        standard_normal_quantile(self.uniform(stream, junction, x, y))
    }

    /// A child seed for sub-problem `(a, b)`.
    pub fn derive_seed(&self, a: u32, b: u32) -> u64 {
        let w = self.block(Stream::Derived, 0, a, b);
        ((w[0] as u64) << 32) | w[1] as u64
    }
}

#[inline]
pub fn bits_to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Inverse CDF of the standard normal.
#[inline]
pub fn standard_normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}
