//! Counter-based random number generation.
//!
//! The generator is Philox-4x64 with 10 rounds: a keyed bijection of a
//! 256-bit counter, so any (seed, stream_id, draw index) addresses its
//! output directly. That gives bit-identical sequences on every platform
//! and cheap, statistically independent substreams without bookkeeping.
//! Output order and test vectors match the reference implementation used
//! by numpy's `Philox` bit generator.

const M0: u64 = 0xD2E7_470E_E14C_6C93;
const M1: u64 = 0xCA5A_8263_9512_1157;
const W0: u64 = 0x9E37_79B9_7F4A_7C15;
const W1: u64 = 0xBB67_AE85_84CA_A73B;

#[inline]
fn mul_hilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// One 10-round Philox-4x64 block.
#[inline]
pub fn philox4x64(mut ctr: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut k0 = key[0];
    let mut k1 = key[1];
    for round in 0..10 {
        let (hi0, lo0) = mul_hilo(M0, ctr[0]);
        let (hi1, lo1) = mul_hilo(M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0];
        if round < 9 {
            k0 = k0.wrapping_add(W0);
            k1 = k1.wrapping_add(W1);
        }
    }
    ctr
}

/// SplitMix64 finalizer; used to derive substream identifiers.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic, index-addressable random stream.
///
/// Identified by `(seed, stream_id)`: the pair forms the Philox key, and the
/// block counter advances as values are drawn. Distinct stream ids give
/// independent sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    block: u64,
    buf: [u64; 4],
    idx: usize,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream {
            seed,
            stream_id,
            block: 0,
            buf: [0; 4],
            idx: 4,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream derived from this stream's identity and `tag`;
    /// the parent's draw position is irrelevant.
    pub fn substream(&self, tag: u64) -> RngStream {
        RngStream::new(self.seed, mix64(self.stream_id ^ mix64(tag)))
    }

    pub fn next_u64(&mut self) -> u64 {
        if self.idx == 4 {
            self.buf = philox4x64(
                [self.block, 0, 0, 0],
                [self.seed, self.stream_id],
            );
            self.block = self.block.wrapping_add(1);
            self.idx = 0;
        }
        let v = self.buf[self.idx];
        self.idx += 1;
        v
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn philox_known_answers() {
        // Reference vectors from numpy.random.Philox (Random123
        // Philox-4x64-10), adjusted for numpy's counter pre-increment.
        assert_eq!(
            philox4x64([0, 0, 0, 0], [0, 0]),
            [
                0x1655_4d9e_ca36_314c,
                0xdb20_fe9d_672d_0fdc,
                0xd7e7_72ce_e186_176b,
                0x7e68_b68a_ec7b_a23b
            ]
        );
        assert_eq!(
            philox4x64([1, 2, 3, 4], [0xdead_beef, 0xcafe_f00d]),
            [
                0x035b_afa6_8db6_579e,
                0x7175_a7a3_4496_2967,
                0x879f_ca13_b23b_8182,
                0x0e9e_0b09_af67_f478
            ]
        );
        assert_eq!(
            philox4x64([u64::MAX; 4], [u64::MAX; 2]),
            [
                0x87b0_92c3_013f_e90b,
                0x438c_3c67_be8d_0224,
                0x9cc7_d7c6_9cd7_77b6,
                0xa09c_aebf_594f_0ba0
            ]
        );
        assert_eq!(
            philox4x64(
                [
                    0x243f_6a88_85a3_08d3,
                    0x1319_8a2e_0370_7344,
                    0xa409_3822_299f_31d0,
                    0x082e_fa98_ec4e_6c89
                ],
                [0x4528_21e6_38d0_1377, 0xbe54_66cf_34e9_0c6c]
            ),
            [
                0xa528_f454_03e6_1d95,
                0x38c7_2dbd_566e_9788,
                0xa5a1_610e_72fd_18b5,
                0x57bd_43b5_e52b_7fe6
            ]
        );
    }

    #[test]
    fn stream_matches_block_layout() {
        // 12 successive draws = blocks 0,1,2 of the keyed bijection,
        // matching numpy's counter advance.
        let mut s = RngStream::new(42, 7);
        let mut got = Vec::new();
        for _ in 0..12 {
            got.push(s.next_u64());
        }
        let expect: Vec<u64> = vec![
            0x2fd1_bc0d_2c86_97bb,
            0x8ee1_7f67_a549_bba6,
            0x1bdc_e1f8_47e7_df47,
            0xe123_b6bb_e4e8_9f03,
            0xa640_64f3_4e84_b9a3,
            0xe287_959a_866a_08fd,
            0x8dc1_81f0_09b9_6c03,
            0xf3f6_001d_4fa8_3454,
            0x69c6_33ee_791d_f6b3,
            0x8932_7f7a_8f01_27a4,
            0x1ed8_2604_5899_6ff6,
            0x4299_f743_3fb1_683e,
        ];
        assert_eq!(got, expect);
    }

    #[test]
    fn determinism_and_stream_separation() {
        let a: Vec<u64> = {
            let mut s = RngStream::new(1, 2);
            (0..64).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = RngStream::new(1, 2);
            (0..64).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut s = RngStream::new(1, 3);
            (0..64).map(|_| s.next_u64()).collect()
        };
        assert_ne!(a, c);
        // substream derivation is position-independent
        let s1 = RngStream::new(9, 1);
        let mut s2 = RngStream::new(9, 1);
        for _ in 0..17 {
            s2.next_u64();
        }
        let mut d1 = s1.substream(5);
        let mut d2 = s2.substream(5);
        assert_eq!(d1.next_u64(), d2.next_u64());
    }

    #[test]
    fn uniform_range_and_moments() {
        let mut s = RngStream::new(2024, 0);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sum2 += u * u;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.005, "var {var}");
    }
}
