use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{simulate_spmv, SimConfig};
use crate::compress::{kmeans_codebook, KmeansConfig, PrunePolicy};
use crate::error::{Error, Result};
use crate::fixed::{Fixed16, QFormat};
use crate::matrix::{ActivationVector, DenseMatrix};
use crate::sparse::CompressedModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sim: SimConfig,
    pub kmeans: KmeansConfig,
    /// Seeds the activation vector.
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(num_pes: usize, seed: u64) -> Self {
        Self {
            sim: SimConfig::new(num_pes),
            kmeans: KmeansConfig {
                seed,
                ..KmeansConfig::default()
            },
            seed,
        }
    }
}

/// One density point. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub density: f64,
    pub sparse_cycles: u64,
    pub dense_cycles: u64,
    pub speedup: f64,
    pub compression_ratio: f64,
    pub load_imbalance: f64,
    pub energy_proxy: f64,
}

/// Activations with every element nonzero, magnitudes in (0, 1].
pub fn random_dense_activations(len: usize, q: QFormat, seed: u64) -> ActivationVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = 1i32 << q.frac_bits();
    ActivationVector::new(
        (0..len)
            .map(|_| {
                let mag = rng.gen_range(1..=one.min(i16::MAX as i32));
                let raw = if rng.gen::<bool>() { mag } else { -mag };
                Fixed16(raw as i16)
            })
            .collect(),
    )
}

/// Compress, encode and simulate `w` at each density. Points run in
/// parallel; rows come back in input order.
pub fn density_sweep(
    w: &DenseMatrix,
    densities: &[f64],
    policy: PrunePolicy,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if matches!(policy, PrunePolicy::Nm { .. }) {
        return Err(Error::invalid(
            "N:M pruning fixes its own density; sweep with magnitude or balanced",
        ));
    }
    if let Some(d) = densities.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::invalid(format!("density must be in (0, 1], got {d}")));
    }
    let x = random_dense_activations(w.cols(), cfg.kmeans.q_format, cfg.seed);
    densities
        .par_iter()
        .map(|&density| {
            let mask = policy.apply(w, density, cfg.sim.num_pes)?;
            let qm = kmeans_codebook(w, &mask, &cfg.kmeans)?;
            let model = CompressedModel::from_quantized(&qm, cfg.sim.num_pes)?;
            let (_, report) = simulate_spmv(&model, &x, &cfg.sim)?;
            Ok(SweepRow {
                density,
                sparse_cycles: report.total_cycles,
                dense_cycles: report.dense_cycles,
                speedup: report.speedup,
                compression_ratio: report.storage.compression_ratio,
                load_imbalance: report.load_imbalance,
                energy_proxy: report.energy_proxy,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn activations_are_dense_and_seeded() {
        let a = random_dense_activations(100, QFormat::Q8_8, 3);
        assert_eq!(a.nnz(), 100);
        assert_eq!(a, random_dense_activations(100, QFormat::Q8_8, 3));
        assert_ne!(a, random_dense_activations(100, QFormat::Q8_8, 4));
        assert!(a.values().iter().all(|v| v.raw().abs() <= 256));
    }

    #[test]
    fn sweep_shape_and_monotonicity() {
        let w = random_matrix(48, 40, 11);
        let densities = [1.0, 0.5, 0.25, 0.1, 0.05];
        let rows = density_sweep(&w, &densities, PrunePolicy::Magnitude, &SweepConfig::new(4, 0)).unwrap();
        assert_eq!(rows.len(), densities.len());
        for (r, d) in rows.iter().zip(densities) {
            assert_eq!(r.density, d);
            assert_eq!(r.dense_cycles, 12 * 40);
        }
        assert!(rows[0].speedup <= 1.0);
        assert!(rows[1].sparse_cycles < rows[1].dense_cycles);
        assert!(rows.windows(2).all(|p| p[1].sparse_cycles <= p[0].sparse_cycles));
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let w = random_matrix(4, 4, 1);
        let cfg = SweepConfig::new(1, 0);
        assert!(density_sweep(&w, &[0.0], PrunePolicy::Magnitude, &cfg).is_err());
        assert!(density_sweep(&w, &[0.5], PrunePolicy::Nm { n_keep: 2, m_group: 4 }, &cfg).is_err());
    }
}
