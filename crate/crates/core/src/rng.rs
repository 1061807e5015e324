//! Deterministic random streams keyed by `(master_seed, stream_id)`.
//!
//! Each stream is a ChaCha20 keystream: the key is derived from the master
//! seed and the 64-bit ChaCha stream selector is the stream id, so streams are
//! independent and can be generated in any order or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Purpose tags occupying the top byte of a stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamKind {
    Input = 1,
    Feature = 2,
    Scalar = 3,
}

/// Stream id for the `index`-th draw of a given purpose. `salt` separates
/// families of draws (e.g. feature sets of different sizes) and is kept to
/// 24 bits.
pub fn stream_id(kind: StreamKind, salt: u64, index: u64) -> u64 {
    ((kind as u64) << 56) | ((salt & 0xff_ffff) << 32) | (index & 0xffff_ffff)
}

pub fn stream(master_seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// `count` i.i.d. standard normals from the given stream.
pub fn standard_normals(master_seed: u64, stream_id: u64, count: usize) -> Vec<f64> {
    let mut rng = stream(master_seed, stream_id);
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// `count` i.i.d. uniforms on (0, 1) from the given stream.
pub fn uniforms(master_seed: u64, stream_id: u64, count: usize) -> Vec<f64> {
    let mut rng = stream(master_seed, stream_id);
    (0..count)
        .map(|_| loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        })
        .collect()
}
