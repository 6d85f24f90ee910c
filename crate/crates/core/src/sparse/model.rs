use super::csc::{decode_pe_csc, encode_pe_csc, global_row, local_row_count, partition_rows, PeSlice};
use crate::compress::{Codebook, QuantizedMatrix};
use crate::error::{Error, Result};
use crate::fixed::QFormat;

/// The full compressed layer: codebook plus one CSC slice per PE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedModel {
    rows: usize,
    cols: usize,
    codebook: Codebook,
    slices: Vec<PeSlice>,
}

impl CompressedModel {
    pub fn from_quantized(qm: &QuantizedMatrix, num_pes: usize) -> Result<Self> {
        let slices = partition_rows(qm, num_pes)?
            .iter()
            .enumerate()
            .map(|(pe, grid)| encode_pe_csc(pe, grid))
            .collect();
        Ok(Self {
            rows: qm.rows(),
            cols: qm.cols(),
            codebook: qm.codebook().clone(),
            slices,
        })
    }

    pub fn from_parts(rows: usize, cols: usize, codebook: Codebook, slices: Vec<PeSlice>) -> Result<Self> {
        let num_pes = slices.len();
        if num_pes == 0 {
            return Err(Error::invalid("model needs at least one PE slice"));
        }
        for (pe, s) in slices.iter().enumerate() {
            let want_rows = local_row_count(rows, num_pes, pe);
            if s.pe_id() != pe || s.cols() != cols || s.local_rows() != want_rows {
                return Err(Error::CorruptSlice {
                    pe,
                    reason: format!(
                        "slice shape (pe {}, {}x{}) does not match expected (pe {pe}, {want_rows}x{cols})",
                        s.pe_id(),
                        s.local_rows(),
                        s.cols()
                    ),
                });
            }
            if let Some(&bad) = s.v().iter().find(|&&i| i as usize >= codebook.size()) {
                return Err(Error::CorruptSlice {
                    pe,
                    reason: format!("index {bad} exceeds the {}-entry codebook", codebook.size()),
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            codebook,
            slices,
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
    pub fn num_pes(&self) -> usize {
        self.slices.len()
    }

    #[inline]
    pub fn q_format(&self) -> QFormat {
        self.codebook.q_format()
    }

    #[inline]
    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    #[inline]
    pub fn slices(&self) -> &[PeSlice] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<PeSlice> {
        self.slices
    }

    /// Reassembles the dense index grid from the per-PE slices.
    pub fn to_quantized(&self) -> Result<QuantizedMatrix> {
        let n = self.num_pes();
        let mut idx = vec![0u8; self.rows * self.cols];
        for slice in &self.slices {
            let grid = decode_pe_csc(slice)?;
            for l in 0..grid.rows {
                let g = global_row(l, slice.pe_id(), n);
                idx[g * self.cols..(g + 1) * self.cols].copy_from_slice(&grid.idx[l * self.cols..(l + 1) * self.cols]);
            }
        }
        QuantizedMatrix::new(self.rows, self.cols, idx, self.codebook.clone())
    }
}
