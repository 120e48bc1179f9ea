//! Reproducible Gaussian streams.
//!
//! Sample `i` of a `d`-dimensional draw under seed `s` is built from the
//! ChaCha8 keystream of `ChaCha8Rng::seed_from_u64(s)` on stream 0: its
//! `j`-th coordinate uses the 64-bit word at position `i * d + j`, mapped to
//! `u = ((w >> 12) + 0.5) * 2^-52` in the open unit interval and then through
//! the standard normal quantile. A correlated draw is `mu + Sigma^{1/2} z`.
//!
//! Because every sample is addressed by its index, chunks can be generated
//! on any thread in any order with identical results.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::gaussian::{std_quantile, ProbLevel};
use crate::model::GaussianReference;

const CHUNK: usize = 4096;

/// Uniform on (0, 1) from the top 52 bits of a word; never 0 or 1.
#[inline]
pub fn open_unit(w: u64) -> f64 {
    ((w >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[inline]
fn normal_from(w: u64) -> f64 {
    std_quantile(ProbLevel::new(open_unit(w)).expect("open_unit lies in (0, 1)"))
}

fn stream_at(seed: u64, stream: u64, word: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // Word positions count 32-bit words.
    rng.set_word_pos(2 * word as u128);
    rng
}

/// Standard normals for samples `first..first + count` of dimension `dim`,
/// written row-major into `out`.
pub fn standard_normals(seed: u64, dim: usize, first: usize, out: &mut [f64]) {
    let mut rng = stream_at(seed, 0, (first * dim) as u64);
    for v in out.iter_mut() {
        *v = normal_from(rng.next_u64());
    }
}

/// Apply `f` to `n` draws from `reference`, in sample order.
pub fn map_samples<T, F>(reference: &GaussianReference, n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&DVector<f64>) -> T + Sync,
{
    let d = reference.dim();
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let first = c * CHUNK;
            let len = CHUNK.min(n - first);
            let mut z = vec![0.0; len * d];
            standard_normals(seed, d, first, &mut z);
            let mut out = Vec::with_capacity(len);
            let mut zi = DVector::zeros(d);
            for i in 0..len {
                zi.copy_from_slice(&z[i * d..(i + 1) * d]);
                let xi = reference.mean() + reference.sqrt_cov() * &zi;
                out.push(f(&xi));
            }
            out
        })
        .collect()
}

/// Uniform indices in `0..n` for bootstrap resample `r`, drawn from stream
/// `1 + r` of the same seed.
pub fn resample_indices(seed: u64, r: u64, n: usize, out: &mut Vec<usize>) {
    let mut rng = stream_at(seed, 1 + r, 0);
    out.clear();
    out.extend((0..n).map(|_| ((rng.next_u64() as u128 * n as u128) >> 64) as usize));
}
