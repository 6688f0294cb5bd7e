//! Counter-derived random substreams.
//!
//! Every Monte Carlo draw owns one stream per input parameter. The stream key
//! is a pure function of `(seed, draw index, parameter index)`, so results do
//! not depend on how draws are scheduled across threads.
//!
//! Key derivation (fixed; changing it changes every published result):
//!
//! ```text
//! k0  = splitmix64(seed)
//! k1  = splitmix64(k0 ^ draw  * 0x9E37_79B9_7F4A_7C15)
//! key = splitmix64(k1 ^ (param + 1) * 0xD1B5_4A32_D192_ED03)
//! ```
//!
//! The key seeds a `ChaCha8Rng` via `SeedableRng::seed_from_u64`. Uniform
//! variates are taken from the top 53 bits of `next_u64` and shifted by half
//! an ulp so they lie strictly inside (0, 1).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for the stream of `param` within `draw` under `seed`.
pub fn substream_key(seed: u64, draw: u64, param: u64) -> u64 {
    let k0 = splitmix64(seed);
    let k1 = splitmix64(k0 ^ draw.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    splitmix64(k1 ^ param.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Stream for one (draw, parameter) cell.
pub fn substream(seed: u64, draw: u64, param: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_key(seed, draw, param))
}

/// Seeded stream for whole-run consumers (shuffles, test data).
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform variate strictly inside (0, 1).
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}
