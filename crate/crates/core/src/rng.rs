//! Labeled, splittable random streams.
//!
//! Every random quantity derives from one user seed. A label names the
//! consumer ("haar", "draws", ...) and an index selects an independent
//! ChaCha stream within it, so draw `i` sees the same randomness no matter
//! how many draws run before it or on which worker.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

/// 256-bit key for `(seed, label)`.
pub fn derive_key(seed: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

/// Stream `index` of the generator keyed by `(seed, label)`.
pub fn stream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::from_seed(derive_key(seed, label));
    rng.set_stream(index);
    rng
}

/// Derives a child seed, for handing to components that take a plain `u64`.
pub fn child_seed(seed: u64, label: &str, index: u64) -> u64 {
    let key = derive_key(seed, label);
    let mut h = Sha256::new();
    h.update(key);
    h.update(index.to_le_bytes());
    let out: [u8; 32] = h.finalize().into();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}
