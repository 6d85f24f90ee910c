#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_eie::compress::{Codebook, QuantizedMatrix};
use sparse_eie::fixed::{Fixed16, QFormat};
use sparse_eie::matrix::{ActivationVector, DenseMatrix};

pub const PE_CHOICES: [usize; 5] = [1, 2, 4, 8, 16];
pub const FIFO_CHOICES: [usize; 4] = [1, 2, 8, 64];
pub const DENSITIES: [f64; 8] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 15 distinct sorted raw centroids. Wide codebooks push the accumulator
/// into wraparound and the narrowing into saturation.
pub fn random_codebook(rng: &mut ChaCha8Rng, q: QFormat, wide: bool) -> Codebook {
    let span: i16 = if wide { i16::MAX } else { 512 };
    let mut raw: Vec<i16> = Vec::new();
    while raw.len() < 15 {
        let v = rng.gen_range(-span..=span);
        if !raw.contains(&v) {
            raw.push(v);
        }
    }
    raw.sort_unstable();
    Codebook::from_learned(4, q, &raw).unwrap()
}

pub fn random_quantized(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64, wide: bool) -> QuantizedMatrix {
    let cb = random_codebook(rng, QFormat::Q8_8, wide);
    let idx = (0..rows * cols)
        .map(|_| {
            if rng.gen_bool(density) {
                rng.gen_range(1..=15u8)
            } else {
                0
            }
        })
        .collect();
    QuantizedMatrix::new(rows, cols, idx, cb).unwrap()
}

/// Activation vector with roughly `nz_frac` nonzeros.
pub fn random_activations(rng: &mut ChaCha8Rng, len: usize, nz_frac: f64, wide: bool) -> ActivationVector {
    let span: i16 = if wide { i16::MAX } else { 512 };
    ActivationVector::new(
        (0..len)
            .map(|_| {
                if rng.gen_bool(nz_frac) {
                    Fixed16(rng.gen_range(-span..=span))
                } else {
                    Fixed16::ZERO
                }
            })
            .collect(),
    )
}

pub fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
    )
    .unwrap()
}

/// Each row scaled by its own factor spanning two orders of magnitude, so
/// global magnitude pruning piles its survivors onto a few PEs.
pub fn row_skewed(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let scales: Vec<f32> = (0..rows).map(|_| 10f32.powf(rng.gen_range(-1.0..1.0))).collect();
    DenseMatrix::new(
        rows,
        cols,
        (0..rows * cols)
            .map(|e| scales[e / cols] * rng.gen_range(-1.0f32..1.0))
            .collect(),
    )
    .unwrap()
}

pub fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    *xs.choose(rng).unwrap()
}

/// The 64x64 matrix behind the storage worked example: 410 large weights
/// laid out so no column gap exceeds 15, everything else tiny.
pub fn worked_example_matrix() -> DenseMatrix {
    let mut v = vec![0.0f32; 64 * 64];
    let mut n = 0;
    for r in 0..64 {
        for c in 0..64 {
            let e = r * 64 + c;
            if (r + c) % 10 == 0 || (r, c) == (63, 63) {
                v[e] = if n % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + (n % 7) as f32 * 0.25);
                n += 1;
            } else {
                v[e] = 0.001 * (1 + (e % 13)) as f32;
            }
        }
    }
    assert_eq!(n, 410);
    DenseMatrix::new(64, 64, v).unwrap()
}
