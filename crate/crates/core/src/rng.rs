//! Counter-based random numbers.
//!
//! Every Gaussian drawn by the crate is a pure function of
//! `(master seed, stream, replica, counter)` through Philox4x32-10, so a
//! replica's noise never depends on which thread produced it or on what
//! was sampled before it.

use serde::{Deserialize, Serialize};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Independent substreams sharing one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u32)]
pub enum Stream {
    Noise = 0,
    Bootstrap = 1,
    Synthetic = 2,
}

/// Master seed plus replica index. The substream for a cell is
/// `philox(counter = [cell_lo, cell_hi, replica, stream], key = master)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    pub replica: u32,
}

impl SeedSpec {
    pub fn new(master: u64, replica: u32) -> Self {
        Self { master, replica }
    }

    pub fn with_replica(self, replica: u32) -> Self {
        Self { replica, ..self }
    }

    fn key(&self) -> [u32; 2] {
        [self.master as u32, (self.master >> 32) as u32]
    }

    pub fn block(&self, stream: Stream, counter: u64) -> [u32; 4] {
        philox4x32_10(
            [counter as u32, (counter >> 32) as u32, self.replica, stream as u32],
            self.key(),
        )
    }

    /// Two uniforms, the first in `(0, 1]`, the second in `[0, 1)`.
    pub fn uniforms(&self, stream: Stream, counter: u64) -> (f64, f64) {
        let w = self.block(stream, counter);
        let a = (u64::from(w[0]) << 32) | u64::from(w[1]);
        let b = (u64::from(w[2]) << 32) | u64::from(w[3]);
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (((a >> 11) + 1) as f64 * SCALE, (b >> 11) as f64 * SCALE)
    }

    /// Standard normal via Box-Muller (cosine branch) on one counter.
    pub fn gaussian(&self, stream: Stream, counter: u64) -> f64 {
        let (u1, u2) = self.uniforms(stream, counter);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Seed for a conventional sequential generator (bootstrap resampling).
    pub fn derived_u64(&self, stream: Stream, counter: u64) -> u64 {
        let w = self.block(stream, counter);
        (u64::from(w[0]) << 32) | u64::from(w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 library.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn uniforms_in_range() {
        let s = SeedSpec::new(7, 3);
        for c in 0..10_000 {
            let (a, b) = s.uniforms(Stream::Noise, c);
            assert!(a > 0.0 && a <= 1.0);
            assert!((0.0..1.0).contains(&b));
        }
    }

    #[test]
    fn streams_and_replicas_differ() {
        let s = SeedSpec::new(1, 0);
        assert_ne!(s.gaussian(Stream::Noise, 5), s.gaussian(Stream::Bootstrap, 5));
        assert_ne!(s.gaussian(Stream::Noise, 5), s.with_replica(1).gaussian(Stream::Noise, 5));
        assert_eq!(s.gaussian(Stream::Noise, 5), s.gaussian(Stream::Noise, 5));
    }

    #[test]
    fn gaussian_moments() {
        let s = SeedSpec::new(2024, 0);
        let n = 200_000u64;
        let (mut m1, mut m2, mut m4) = (0.0, 0.0, 0.0);
        for c in 0..n {
            let z = s.gaussian(Stream::Noise, c);
            m1 += z;
            m2 += z * z;
            m4 += z.powi(4);
        }
        let n = n as f64;
        assert!((m1 / n).abs() < 4.0 / n.sqrt());
        assert!((m2 / n - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert!((m4 / n - 3.0).abs() < 4.0 * (96.0 / n).sqrt());
    }
}
