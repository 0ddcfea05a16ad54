//! Pinned deterministic random stream.
//!
//! Every seeded operation in the crate draws from [`Stream`], a SplitMix64
//! counter sequence. The algorithm is fixed here (not delegated to `rand`) so
//! the same seed produces the same bits on every platform and in every port:
//!
//! ```text
//! state  += 0x9E37_79B9_7F4A_7C15
//! z       = state
//! z       = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//! z       = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//! output  = z ^ (z >> 31)
//! ```
//!
//! Uniform reals take the top 53 bits of one output. Standard normals use
//! Box-Muller on two uniforms and keep only the cosine branch, so each normal
//! consumes exactly two outputs. Transcendentals come from `libm` rather than
//! the platform math library.

use std::f64::consts::TAU;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 stream. Cheap to construct; clone it to fork a replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Fair coin: the top bit of one output.
    #[inline]
    pub fn next_bool(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Index in `0..n` by modulo reduction. `n` must be nonzero.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal variate via the cosine branch of Box-Muller.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        // 1 - U keeps u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(TAU * u2)
    }
}
