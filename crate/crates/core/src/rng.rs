//! Random streams keyed by `(seed, scene index)`.
//!
//! Each scene gets its own ChaCha stream so any subset of a dataset can be
//! regenerated independently and scenes can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SceneRng = ChaCha8Rng;

fn stream(seed: u64, id: u64) -> SceneRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream driving shape, anchor and candidate sampling for scene `index`.
pub fn scene_rng(seed: u64, index: u64) -> SceneRng {
    stream(seed, index.wrapping_mul(2))
}

/// Stream driving intensity sampling and noise when rendering scene `index`.
pub fn render_rng(seed: u64, index: u64) -> SceneRng {
    stream(seed, index.wrapping_mul(2).wrapping_add(1))
}
