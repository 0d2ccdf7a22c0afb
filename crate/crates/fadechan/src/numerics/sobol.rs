//! Owen-scrambled Sobol points for up to 10 dimensions.
//!
//! Direction numbers follow the Joe-Kuo table (primitive polynomial plus
//! initial values per dimension); the recurrence fills 31 levels, enough for
//! 2^31 points. Randomization is a hash-based nested-uniform (Owen) scramble
//! in reversed-bit space: every output bit is XORed with a function of the
//! strictly higher-order bits, so each scramble seed yields a valid
//! digit-scrambled (t, s)-sequence and distinct seeds give independent
//! randomizations.

const SOBOL_BITS: u32 = 31;
pub const SOBOL_MAX_DIM: usize = 10;

/// (polynomial degree s, coefficient bits a, initial direction numbers m)
/// for dimensions 2..=10; dimension 1 is the van der Corput sequence.
const JOE_KUO: [(u32, u32, [u32; 5]); 9] = [
    (1, 0, [1, 0, 0, 0, 0]),
    (2, 1, [1, 3, 0, 0, 0]),
    (3, 1, [1, 3, 1, 0, 0]),
    (3, 2, [1, 1, 1, 0, 0]),
    (4, 1, [1, 1, 3, 3, 0]),
    (4, 4, [1, 3, 5, 13, 0]),
    (5, 2, [1, 1, 5, 5, 17]),
    (5, 4, [1, 1, 5, 5, 5]),
    (5, 7, [1, 1, 7, 11, 19]),
];

/// Direction vectors: v[d][j] has the j-th direction number in the top bits.
fn direction_table() -> [[u32; SOBOL_BITS as usize]; SOBOL_MAX_DIM] {
    let mut v = [[0u32; SOBOL_BITS as usize]; SOBOL_MAX_DIM];
    for j in 0..SOBOL_BITS {
        v[0][j as usize] = 1u32 << (31 - j);
    }
    for (d, &(s, a, m)) in JOE_KUO.iter().enumerate() {
        let dim = d + 1;
        for j in 0..s.min(SOBOL_BITS) {
            v[dim][j as usize] = m[j as usize] << (31 - j);
        }
        for j in s..SOBOL_BITS {
            let mut value = v[dim][(j - s) as usize] ^ (v[dim][(j - s) as usize] >> s);
            for k in 1..s {
                if (a >> (s - 1 - k)) & 1 == 1 {
                    value ^= v[dim][(j - k) as usize];
                }
            }
            v[dim][j as usize] = value;
        }
    }
    v
}

static DIRECTIONS: std::sync::OnceLock<[[u32; SOBOL_BITS as usize]; SOBOL_MAX_DIM]> =
    std::sync::OnceLock::new();

/// Raw (unscrambled) Sobol integer for point `index`, dimension `dim`.
#[inline]
pub fn sobol_u32(index: u32, dim: usize) -> u32 {
    let v = DIRECTIONS.get_or_init(direction_table);
    debug_assert!(dim < SOBOL_MAX_DIM);
    let mut x = 0u32;
    let mut n = index;
    let mut j = 0usize;
    while n != 0 {
        if n & 1 == 1 {
            x ^= v[dim][j];
        }
        n >>= 1;
        j += 1;
    }
    x
}

/// Hash-based Owen scramble (applied in reversed-bit space).
///
/// Multiplier constants are even, so in reversed space every bit is XORed
/// only with functions of strictly lower bits: a nested-uniform scramble.
#[inline]
fn owen_scramble(x: u32, seed: u32) -> u32 {
    let mut n = x.reverse_bits();
    n ^= n.wrapping_mul(0x3d20_adea);
    n = n.wrapping_add(seed);
    n = n.wrapping_mul((seed >> 16) | 1);
    n ^= n.wrapping_mul(0x0552_6c56);
    n ^= n.wrapping_mul(0x53a2_2864);
    n.reverse_bits()
}

/// Owen-scrambled Sobol coordinate in (0, 1).
///
/// The scramble seed should combine dimension and replicate so that each
/// (dimension, replicate) pair gets an independent randomization. The output
/// is kept strictly inside (0, 1) for inverse-CDF transforms.
#[inline]
pub fn sobol_owen(index: u32, dim: usize, scramble_seed: u32) -> f64 {
    let x = owen_scramble(sobol_u32(index, dim), scramble_seed);
    let u = (x as f64 + 0.5) * (1.0 / 4294967296.0);
    debug_assert!(u > 0.0 && u < 1.0);
    u
}
