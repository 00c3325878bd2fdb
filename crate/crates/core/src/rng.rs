//! Seeding conventions. All randomness flows through ChaCha8, whose output
//! stream is specified independently of platform and word size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

/// Stride between replicate seeds (odd, so the map `i -> base + i * stride` is
/// injective modulo 2^64).
pub const REPLICATE_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn seeded(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_seed(base: u64, replicate: usize) -> u64 {
    base.wrapping_add((replicate as u64).wrapping_mul(REPLICATE_STRIDE))
}

/// Derive an independent sub-seed for a named stream (splitmix64 finalizer).
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
