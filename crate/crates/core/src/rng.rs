//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, stream_id, counter)` through the
//! Philox4x32-10 block cipher, so streams can be split, handed to workers and
//! replayed without any shared state. Each draw kind consumes exactly one
//! counter step, which keeps two code paths in lockstep when one of them
//! skips a draw kind that the other never makes.

use crate::error::{Error, Result};

const PHILOX_M0: u64 = 0xD251_1F53;
const PHILOX_M1: u64 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// One Philox4x32 block with 10 rounds.
pub fn philox4x32_10(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = PHILOX_M0 * c[0] as u64;
        let p1 = PHILOX_M1 * c[2] as u64;
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// SplitMix64 finalizer; a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single-owner random stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self {
            seed,
            stream_id,
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Raw 64 bits; advances the counter by one.
    pub fn next_u64(&mut self) -> u64 {
        let ctr = [
            self.counter as u32,
            (self.counter >> 32) as u32,
            self.stream_id as u32,
            (self.stream_id >> 32) as u32,
        ];
        let key = [self.seed as u32, (self.seed >> 32) as u32];
        let out = philox4x32_10(ctr, key);
        self.counter = self.counter.wrapping_add(1);
        (out[0] as u64) | ((out[1] as u64) << 32)
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.standard_normal();
        }
    }

    /// Exponential draw with the given rate (mean `1 / rate`).
    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(exponential_from_uniform(self.uniform(), rate))
    }

    /// `n` child streams with distinct ids. The parent is left untouched and
    /// the first `k` children of `split(n)` do not depend on `n`.
    pub fn split(&self, n: usize) -> Vec<RngStream> {
        (0..n).map(|k| self.child(k)).collect()
    }

    /// Child `k` of [`split`](Self::split), without building the others.
    pub fn child(&self, k: usize) -> RngStream {
        let base = mix64(self.stream_id ^ 0x6A09_E667_F3BC_C909).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        RngStream {
            seed: self.seed,
            stream_id: mix64(base.wrapping_add(k as u64)),
            counter: 0,
        }
    }

    /// A fresh independent stream; consumes one draw of the parent so repeated
    /// forks differ.
    pub fn fork(&mut self) -> RngStream {
        let id = self.next_u64();
        RngStream {
            seed: self.seed,
            stream_id: mix64(id ^ self.stream_id.rotate_left(17)),
            counter: 0,
        }
    }
}

/// Inverse CDF of the exponential distribution.
pub fn exponential_from_uniform(u: f64, rate: f64) -> f64 {
    -(-u).ln_1p() / rate
}

/// Inverse of the standard normal CDF (Wichura, AS241 PPND16).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_13) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_46)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((r * 5226.495_278_852_546 + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_597)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((r * 1.050_750_071_644_416_8e-9 + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.010_334_399_292_288e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_888)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::normal_cdf;

    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0; 4], [0; 2]),
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
    fn same_seed_same_draws() {
        let mut a = RngStream::new(1);
        let mut b = RngStream::new(1);
        let (a1, a2) = (a.standard_normal(), a.standard_normal());
        assert_ne!(a1, a2);
        assert_eq!(a1.to_bits(), b.standard_normal().to_bits());
        assert_eq!(a2.to_bits(), b.standard_normal().to_bits());
    }

    #[test]
    fn counter_advance_is_fixed_per_draw() {
        let mut s = RngStream::new(3);
        s.standard_normal();
        assert_eq!(s.counter(), 1);
        s.uniform();
        assert_eq!(s.counter(), 2);
        s.exponential(2.0).unwrap();
        assert_eq!(s.counter(), 3);
    }

    #[test]
    fn normal_moments() {
        let mut s = RngStream::new(11);
        let n = 1_000_000;
        let (mut m, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.standard_normal();
            m += z;
            m2 += z * z;
        }
        let mean = m / n as f64;
        let var = m2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.006, "var {var}");
    }

    #[test]
    fn inverse_cdf_round_trips() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let z = inverse_normal_cdf(p);
            assert!((normal_cdf(z) - p).abs() < 1e-14 * p.max(1e-3), "p={p}");
        }
        for &p in &[1e-300, 1e-100, 1e-20, 1e-10, 1e-5] {
            let z = inverse_normal_cdf(p);
            assert!(((normal_cdf(z) - p) / p).abs() < 1e-12, "p={p}");
            assert!((inverse_normal_cdf(1.0 - p) + z).abs() < 1e-6 || p < 1e-16);
        }
    }

    #[test]
    fn exponential_draws() {
        assert!((exponential_from_uniform(0.5, 1.0) - 2f64.ln()).abs() < 1e-15);
        let mut s = RngStream::new(5);
        for (rate, tol) in [(1.0, 0.004), (2.0, 0.002)] {
            let n = 1_000_000;
            let mean: f64 = (0..n).map(|_| s.exponential(rate).unwrap()).sum::<f64>() / n as f64;
            assert!((mean - 1.0 / rate).abs() < tol, "rate {rate} mean {mean}");
        }
        assert!(s.exponential(0.0).is_err());
        assert!(s.exponential(-1.0).is_err());
    }

    #[test]
    fn split_streams_are_distinct_and_parent_unchanged() {
        let parent = RngStream::with_stream(9, 4);
        let before = parent.clone();
        let kids = parent.split(64);
        assert_eq!(parent, before);
        let mut ids: Vec<u64> = kids.iter().map(|k| k.stream_id()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 64);
        assert!(!ids.contains(&parent.stream_id()));
        assert_eq!(parent.split(1)[0], kids[0]);
        assert_eq!(parent.child(5), kids[5]);
    }

    #[test]
    fn split_single_child_is_deterministic() {
        let p = RngStream::new(2);
        let mut a = p.split(1).remove(0);
        let mut b = p.split(1).remove(0);
        assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
    }

    #[test]
    fn siblings_are_uncorrelated() {
        let kids = RngStream::new(21).split(2);
        let (mut a, mut b) = (kids[0].clone(), kids[1].clone());
        let n = 100_000;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (x, y) = (a.standard_normal(), b.standard_normal());
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        let r = sab / (saa * sbb).sqrt();
        assert!(r.abs() < 0.01, "r = {r}");
    }
}
