use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Concrete generator used for every stochastic component.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for the stream identified by `(seed, parts...)`.
///
/// Rollout `i` of iteration `k` under `seed` always sees the same stream, regardless of
/// which worker thread runs it.
pub fn derive_rng(seed: u64, parts: &[u64]) -> StreamRng {
    let mut h = splitmix64(seed);
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    StreamRng::seed_from_u64(h)
}
