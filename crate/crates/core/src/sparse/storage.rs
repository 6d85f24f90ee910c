use serde::{Deserialize, Serialize};

use super::model::CompressedModel;

pub const WEIGHT_INDEX_BITS: u64 = 4;
pub const ROW_GAP_BITS: u64 = 4;
/// Column pointers are charged at 32 bits each, per PE.
pub const OFFSET_BITS: u64 = 32;
pub const CODEBOOK_BITS: u64 = 16 * 16;
pub const DENSE_FLOAT_BITS: u64 = 32;

/// Bit-level storage breakdown of a compressed model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageStats {
    pub dense_bits: u64,
    pub weight_bits: u64,
    pub index_bits: u64,
    pub offset_bits: u64,
    pub codebook_bits: u64,
    pub total_bits: u64,
    /// `dense_bits / total_bits`.
    pub compression_ratio: f64,
    /// `index_bits / weight_bits`; 0 for a model without entries.
    pub index_overhead_fraction: f64,
}

impl StorageStats {
    /// Same total measured against a packed 4-bit dense grid instead of
    /// 32-bit floats.
    pub fn ratio_vs_dense4(&self) -> f64 {
        let dense4 = self.dense_bits / DENSE_FLOAT_BITS * WEIGHT_INDEX_BITS;
        dense4 as f64 / self.total_bits as f64
    }
}

pub fn storage_stats(m: &CompressedModel) -> StorageStats {
    let entries: u64 = m.slices().iter().map(|s| s.entry_count() as u64).sum();
    let weight_bits = WEIGHT_INDEX_BITS * entries;
    let index_bits = ROW_GAP_BITS * entries;
    let offset_bits = OFFSET_BITS * m.num_pes() as u64 * (m.cols() as u64 + 1);
    let codebook_bits = CODEBOOK_BITS;
    let total_bits = weight_bits + index_bits + offset_bits + codebook_bits;
    let dense_bits = DENSE_FLOAT_BITS * m.rows() as u64 * m.cols() as u64;
    StorageStats {
        dense_bits,
        weight_bits,
        index_bits,
        offset_bits,
        codebook_bits,
        total_bits,
        compression_ratio: dense_bits as f64 / total_bits as f64,
        index_overhead_fraction: if weight_bits == 0 {
            0.0
        } else {
            index_bits as f64 / weight_bits as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{Codebook, QuantizedMatrix};
    use crate::fixed::QFormat;

    #[test]
    fn worked_example_64x64_ten_percent() {
        // 410 nonzeros placed so no column needs a filler.
        let mut idx = vec![0u8; 64 * 64];
        let mut n = 0;
        for c in 0..64 {
            for r in 0..64 {
                if (r + c) % 10 == 0 || (r, c) == (63, 63) {
                    idx[r * 64 + c] = 1 + (n % 15) as u8;
                    n += 1;
                }
            }
        }
        assert_eq!(n, 410);
        let learned: Vec<i16> = (1..=15).collect();
        let cb = Codebook::from_learned(4, QFormat::Q8_8, &learned).unwrap();
        let qm = QuantizedMatrix::new(64, 64, idx, cb).unwrap();
        let m = CompressedModel::from_quantized(&qm, 1).unwrap();
        let s = storage_stats(&m);
        assert_eq!(m.slices()[0].filler_count(), 0);
        assert_eq!(s.weight_bits, 410 * 4);
        assert_eq!(s.index_bits, s.weight_bits);
        assert_eq!(s.offset_bits, 65 * 32);
        assert_eq!(s.codebook_bits, 256);
        assert_eq!(s.total_bits, 5616);
        assert_eq!(s.dense_bits, 131072);
        assert!((s.compression_ratio - 23.3).abs() < 0.1);
        assert_eq!(s.index_overhead_fraction, 1.0);
    }

    #[test]
    fn empty_model_is_offsets_and_codebook() {
        let cb = Codebook::from_learned(4, QFormat::Q8_8, &[]).unwrap();
        let qm = QuantizedMatrix::new(8, 3, vec![0; 24], cb).unwrap();
        let m = CompressedModel::from_quantized(&qm, 2).unwrap();
        let s = storage_stats(&m);
        assert_eq!(s.weight_bits, 0);
        assert_eq!(s.total_bits, 2 * 4 * 32 + 256);
        assert_eq!(s.index_overhead_fraction, 0.0);
        assert_eq!(s.compression_ratio, (8 * 3 * 32) as f64 / s.total_bits as f64);
    }
}
