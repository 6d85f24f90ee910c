use crate::compress::QuantizedMatrix;
use crate::error::{Error, Result};

/// Largest gap a 4-bit relative row index can express.
pub const MAX_GAP: u8 = 15;
const NIBBLE_MAX: u8 = 15;

/// Dense row-major grid of codebook indices for one PE's local rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexGrid {
    pub rows: usize,
    pub cols: usize,
    pub idx: Vec<u8>,
}

impl IndexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            idx: vec![0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.idx[row * self.cols + col]
    }
}

/// Number of global rows owned by `pe`.
#[inline]
pub fn local_row_count(rows: usize, num_pes: usize, pe: usize) -> usize {
    if pe >= rows {
        0
    } else {
        (rows - pe).div_ceil(num_pes)
    }
}

#[inline]
pub fn global_row(local: usize, pe: usize, num_pes: usize) -> usize {
    local * num_pes + pe
}

/// (pe, local row) for a global row.
#[inline]
pub fn local_row(global: usize, num_pes: usize) -> (usize, usize) {
    (global % num_pes, global / num_pes)
}

/// Splits rows round-robin: PE k receives rows k, k+N, k+2N, ...
pub fn partition_rows(qm: &QuantizedMatrix, num_pes: usize) -> Result<Vec<IndexGrid>> {
    if num_pes == 0 {
        return Err(Error::invalid("num_pes must be at least 1"));
    }
    let cols = qm.cols();
    Ok((0..num_pes)
        .map(|pe| {
            let idx = (pe..qm.rows())
                .step_by(num_pes)
                .flat_map(|r| &qm.indices()[r * cols..(r + 1) * cols])
                .copied()
                .collect();
            IndexGrid {
                rows: local_row_count(qm.rows(), num_pes, pe),
                cols,
                idx,
            }
        })
        .collect())
}

/// One PE's compressed-sparse-column share of the matrix.
///
/// Entry `e` of column `j` lives in `p[j]..p[j+1]`. `z[e]` counts the zero
/// rows skipped since the previous entry in the same column (or since local
/// row 0), and `v[e]` is the codebook index. Runs of more than 15 zeros are
/// bridged with filler entries `(v = 0, z = 15)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeSlice {
    pe_id: usize,
    local_rows: usize,
    cols: usize,
    v: Vec<u8>,
    z: Vec<u8>,
    p: Vec<u32>,
}

impl PeSlice {
    /// Checks every structural invariant, including that decoding stays
    /// inside `local_rows`.
    pub fn from_parts(
        pe_id: usize,
        local_rows: usize,
        cols: usize,
        v: Vec<u8>,
        z: Vec<u8>,
        p: Vec<u32>,
    ) -> Result<Self> {
        let corrupt = |reason: String| Error::CorruptSlice { pe: pe_id, reason };
        if v.len() != z.len() {
            return Err(corrupt(format!("v has {} entries, z has {}", v.len(), z.len())));
        }
        if p.len() != cols + 1 {
            return Err(corrupt(format!(
                "offset array has {} entries, expected {}",
                p.len(),
                cols + 1
            )));
        }
        if p[0] != 0 {
            return Err(corrupt("first column offset is not zero".into()));
        }
        if let Some(j) = p.windows(2).position(|w| w[0] > w[1]) {
            return Err(corrupt(format!("column offsets decrease at column {j}")));
        }
        if p[cols] as usize != v.len() {
            return Err(corrupt(format!(
                "last offset {} does not match entry count {}",
                p[cols],
                v.len()
            )));
        }
        if let Some(e) = v.iter().zip(&z).position(|(&a, &b)| a > NIBBLE_MAX || b > NIBBLE_MAX) {
            return Err(corrupt(format!("nibble out of range at entry {e}")));
        }
        let s = Self {
            pe_id,
            local_rows,
            cols,
            v,
            z,
            p,
        };
        for j in 0..cols {
            if let Some((_, row, _)) = s.column_entries(j).last() {
                if row >= local_rows {
                    return Err(corrupt(format!(
                        "column {j} decodes to local row {row}, slice has {local_rows}"
                    )));
                }
            }
        }
        Ok(s)
    }

    #[inline]
    pub fn pe_id(&self) -> usize {
        self.pe_id
    }

    #[inline]
    pub fn local_rows(&self) -> usize {
        self.local_rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn v(&self) -> &[u8] {
        &self.v
    }

    #[inline]
    pub fn z(&self) -> &[u8] {
        &self.z
    }

    #[inline]
    pub fn p(&self) -> &[u32] {
        &self.p
    }

    #[inline]
    pub fn entry_count(&self) -> usize {
        self.v.len()
    }

    #[inline]
    pub fn column_range(&self, col: usize) -> std::ops::Range<usize> {
        self.p[col] as usize..self.p[col + 1] as usize
    }

    /// Entries of one column as (entry index, local row, codebook index),
    /// fillers included.
    pub fn column_entries(&self, col: usize) -> impl Iterator<Item = (usize, usize, u8)> + '_ {
        let mut pos = 0usize;
        self.column_range(col).map(move |e| {
            pos += self.z[e] as usize;
            let row = pos;
            pos += 1;
            (e, row, self.v[e])
        })
    }

    pub fn filler_count(&self) -> usize {
        self.v.iter().filter(|&&v| v == 0).count()
    }

    /// Non-filler entries in one column.
    pub fn column_work(&self, col: usize) -> usize {
        self.v[self.column_range(col)].iter().filter(|&&v| v != 0).count()
    }
}

/// Canonical column-major encoding with the minimum number of fillers.
pub fn encode_pe_csc(pe_id: usize, grid: &IndexGrid) -> PeSlice {
    let mut v = Vec::new();
    let mut z = Vec::new();
    let mut p = Vec::with_capacity(grid.cols + 1);
    p.push(0u32);
    for col in 0..grid.cols {
        let mut pos = 0usize;
        for row in 0..grid.rows {
            let index = grid.get(row, col);
            if index == 0 {
                continue;
            }
            let mut gap = row - pos;
            while gap > MAX_GAP as usize {
                v.push(0);
                z.push(MAX_GAP);
                gap -= MAX_GAP as usize + 1;
            }
            v.push(index);
            z.push(gap as u8);
            pos = row + 1;
        }
        p.push(v.len() as u32);
    }
    PeSlice {
        pe_id,
        local_rows: grid.rows,
        cols: grid.cols,
        v,
        z,
        p,
    }
}

pub fn decode_pe_csc(slice: &PeSlice) -> Result<IndexGrid> {
    let mut grid = IndexGrid::zeros(slice.local_rows, slice.cols);
    for col in 0..slice.cols {
        for (_, row, index) in slice.column_entries(col) {
            if row >= slice.local_rows {
                return Err(Error::CorruptSlice {
                    pe: slice.pe_id,
                    reason: format!(
                        "column {col} decodes to local row {row}, slice has {}",
                        slice.local_rows
                    ),
                });
            }
            if index != 0 {
                grid.idx[row * slice.cols + col] = index;
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::Codebook;
    use crate::fixed::QFormat;

    fn grid_from_columns(rows: usize, columns: &[&[u8]]) -> IndexGrid {
        let cols = columns.len();
        let mut g = IndexGrid::zeros(rows, cols);
        for (c, col) in columns.iter().enumerate() {
            for (r, &i) in col.iter().enumerate() {
                g.idx[r * cols + c] = i;
            }
        }
        g
    }

    #[test]
    fn encode_hand_example() {
        let g = grid_from_columns(4, &[&[5, 0, 0, 7], &[0, 0, 0, 0]]);
        let s = encode_pe_csc(0, &g);
        assert_eq!(s.v(), &[5, 7]);
        assert_eq!(s.z(), &[0, 2]);
        assert_eq!(s.p(), &[0, 2, 2]);
        assert_eq!(decode_pe_csc(&s).unwrap(), g);
    }

    #[test]
    fn encode_empty() {
        let g = IndexGrid::zeros(3, 4);
        let s = encode_pe_csc(0, &g);
        assert!(s.v().is_empty() && s.z().is_empty());
        assert_eq!(s.p(), &[0; 5]);
        assert_eq!(decode_pe_csc(&s).unwrap(), g);
    }

    #[test]
    fn encode_filler_bridges_long_gap() {
        let mut col = vec![0u8; 21];
        col[0] = 3;
        col[20] = 9;
        let g = grid_from_columns(21, &[&col]);
        let s = encode_pe_csc(0, &g);
        assert_eq!(s.v(), &[3, 0, 9]);
        assert_eq!(s.z(), &[0, 15, 3]);
        let rows: Vec<usize> = s.column_entries(0).map(|(_, r, _)| r).collect();
        assert_eq!(rows, vec![0, 16, 20]);
        assert_eq!(decode_pe_csc(&s).unwrap(), g);
    }

    #[test]
    fn filler_exact_multiples() {
        // Gaps of exactly 15 need no filler; 16 needs one.
        for (row, fillers) in [(15usize, 0usize), (16, 1), (31, 1), (32, 2), (47, 2), (48, 3)] {
            let mut col = vec![0u8; row + 1];
            col[row] = 1;
            let s = encode_pe_csc(0, &grid_from_columns(row + 1, &[&col]));
            assert_eq!(s.filler_count(), fillers, "row {row}");
            assert_eq!(s.filler_count(), row / 16);
        }
    }

    #[test]
    fn from_parts_rejects_corruption() {
        // z nibble out of range.
        assert!(PeSlice::from_parts(0, 30, 1, vec![5], vec![20], vec![0, 1]).is_err());
        // p non-monotone.
        assert!(PeSlice::from_parts(0, 4, 2, vec![1, 2], vec![0, 0], vec![0, 2, 1]).is_err());
        // p[0] != 0.
        assert!(PeSlice::from_parts(0, 4, 1, vec![1], vec![0], vec![1, 1]).is_err());
        // p[cols] != len.
        assert!(PeSlice::from_parts(0, 4, 1, vec![1, 2], vec![0, 0], vec![0, 1]).is_err());
        // Decodes past local_rows.
        let err = PeSlice::from_parts(0, 2, 1, vec![1, 2], vec![0, 1], vec![0, 2]).unwrap_err();
        assert!(matches!(err, Error::CorruptSlice { pe: 0, .. }));
        assert!(PeSlice::from_parts(0, 3, 1, vec![1, 2], vec![0, 1], vec![0, 2]).is_ok());
    }

    #[test]
    fn decode_reports_out_of_range_rows() {
        let mut s = encode_pe_csc(0, &grid_from_columns(2, &[&[1, 1]]));
        s.local_rows = 1;
        assert!(matches!(decode_pe_csc(&s), Err(Error::CorruptSlice { .. })));
    }

    #[test]
    fn partition_examples() {
        let cb = Codebook::from_learned(4, QFormat::Q8_8, &[1, 2, 3, 4, 5]).unwrap();
        let qm = QuantizedMatrix::new(5, 1, vec![1, 2, 3, 4, 5], cb).unwrap();
        let parts = partition_rows(&qm, 2).unwrap();
        assert_eq!(parts[0].idx, vec![1, 3, 5]);
        assert_eq!(parts[1].idx, vec![2, 4]);
        assert_eq!(parts[0].rows, 3);
        assert_eq!(parts[1].rows, 2);
        let one = partition_rows(&qm, 1).unwrap();
        assert_eq!(one[0].idx, qm.indices());
        let many = partition_rows(&qm, 8).unwrap();
        assert_eq!(many[6].rows, 0);
        assert!(partition_rows(&qm, 0).is_err());
    }

    #[test]
    fn interleave_maps_are_inverse() {
        for num_pes in 1..=9 {
            for rows in 0..40 {
                let mut seen = vec![false; rows];
                for pe in 0..num_pes {
                    for l in 0..local_row_count(rows, num_pes, pe) {
                        let g = global_row(l, pe, num_pes);
                        assert!(g < rows);
                        assert_eq!(local_row(g, num_pes), (pe, l));
                        assert!(!seen[g]);
                        seen[g] = true;
                    }
                }
                assert!(seen.into_iter().all(|s| s));
            }
        }
    }
}
