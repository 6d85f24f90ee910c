//! Pruning and codebook quantization.
//!
//! A [`PruneMask`] selects which weights survive; [`kmeans_codebook`] then
//! clusters the survivors into at most 15 shared values. Codebook slot 0 is
//! reserved for an exact zero, used by pruned weights and by CSC filler
//! entries.

mod kmeans;
mod prune;

pub use kmeans::{kmeans_codebook, kmeans_codebook_traced, quantization_sse, KmeansConfig, KmeansOutcome};
pub use prune::{prune_load_balanced, prune_magnitude, prune_structured_nm, PrunePolicy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::{Fixed16, QFormat};

/// Bit-per-element keep mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl PruneMask {
    pub fn new(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} mask needs {} bits, got {}",
                rows * cols,
                keep.len()
            )));
        }
        Ok(Self { rows, cols, keep })
    }

    pub fn all(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![true; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.keep[row * self.cols + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.keep
    }

    pub fn popcount(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn density(&self) -> f64 {
        if self.keep.is_empty() {
            0.0
        } else {
            self.popcount() as f64 / self.keep.len() as f64
        }
    }

    /// Kept elements per PE under row interleaving (row r belongs to PE r mod num_pes).
    pub fn per_pe_counts(&self, num_pes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_pes];
        for r in 0..self.rows {
            counts[r % num_pes] += self.keep[r * self.cols..(r + 1) * self.cols]
                .iter()
                .filter(|&&k| k)
                .count();
        }
        counts
    }
}

/// Shared-weight table addressed by an `n_bits` index.
///
/// Always holds `2^n_bits` entries: slot 0 is exactly zero, slots
/// `1..=learned` hold the learned centroids in strictly increasing raw
/// order, and any remaining slots are zero padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    n_bits: u8,
    q_format: QFormat,
    entries: Vec<Fixed16>,
}

impl Codebook {
    pub const MAX_BITS: u8 = 4;

    fn check_bits(n_bits: u8) -> Result<usize> {
        if !(1..=Self::MAX_BITS).contains(&n_bits) {
            return Err(Error::invalid(format!(
                "codebook index width must be 1..=4 bits, got {n_bits}"
            )));
        }
        Ok(1usize << n_bits)
    }

    /// `learned` must be strictly increasing and hold at most `2^n_bits - 1` values.
    pub fn from_learned(n_bits: u8, q_format: QFormat, learned: &[i16]) -> Result<Self> {
        let size = Self::check_bits(n_bits)?;
        if learned.len() >= size {
            return Err(Error::invalid(format!(
                "{} learned centroids do not fit a {n_bits}-bit codebook",
                learned.len()
            )));
        }
        if learned.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("learned centroids must be strictly increasing"));
        }
        let mut entries = vec![Fixed16::ZERO; size];
        for (slot, &raw) in entries[1..].iter_mut().zip(learned) {
            *slot = Fixed16(raw);
        }
        Ok(Self {
            n_bits,
            q_format,
            entries,
        })
    }

    /// Validates a full table, as read from disk.
    pub fn from_entries(n_bits: u8, q_format: QFormat, entries: Vec<Fixed16>) -> Result<Self> {
        let size = Self::check_bits(n_bits)?;
        if entries.len() != size {
            return Err(Error::invalid(format!(
                "{n_bits}-bit codebook needs {size} entries, got {}",
                entries.len()
            )));
        }
        if !entries[0].is_zero() {
            return Err(Error::invalid("codebook entry 0 must be zero"));
        }
        let cb = Self {
            n_bits,
            q_format,
            entries,
        };
        let used = cb.learned_len();
        if cb.entries[1 + used..].iter().any(|e| !e.is_zero()) {
            return Err(Error::invalid(
                "codebook centroids must be strictly increasing followed by zero padding",
            ));
        }
        Ok(cb)
    }

    #[inline]
    pub fn n_bits(&self) -> u8 {
        self.n_bits
    }

    #[inline]
    pub fn q_format(&self) -> QFormat {
        self.q_format
    }

    #[inline]
    pub fn entries(&self) -> &[Fixed16] {
        &self.entries
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn decode(&self, index: u8) -> Fixed16 {
        self.entries[index as usize]
    }

    /// Length of the strictly increasing run starting at slot 1. A trailing
    /// learned centroid of raw 0 is indistinguishable from padding; both
    /// decode to zero.
    pub fn learned_len(&self) -> usize {
        let tail = &self.entries[1..];
        if tail.is_empty() {
            return 0;
        }
        1 + tail.windows(2).take_while(|w| w[0] < w[1]).count()
    }

    pub fn learned(&self) -> &[Fixed16] {
        &self.entries[1..1 + self.learned_len()]
    }
}

/// Row-major grid of codebook indices plus the codebook they address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    idx: Vec<u8>,
    codebook: Codebook,
}

impl QuantizedMatrix {
    pub fn new(rows: usize, cols: usize, idx: Vec<u8>, codebook: Codebook) -> Result<Self> {
        if idx.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} index grid needs {} entries, got {}",
                rows * cols,
                idx.len()
            )));
        }
        if let Some(bad) = idx.iter().find(|&&i| i as usize >= codebook.size()) {
            return Err(Error::invalid(format!(
                "index {bad} out of range for a {}-entry codebook",
                codebook.size()
            )));
        }
        Ok(Self {
            rows,
            cols,
            idx,
            codebook,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> u8 {
        self.idx[row * self.cols + col]
    }

    #[inline]
    pub fn indices(&self) -> &[u8] {
        &self.idx
    }

    #[inline]
    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    #[inline]
    pub fn decode(&self, row: usize, col: usize) -> Fixed16 {
        self.codebook.decode(self.index(row, col))
    }

    /// Number of nonzero indices.
    pub fn nnz(&self) -> usize {
        self.idx.iter().filter(|&&i| i != 0).count()
    }
}
