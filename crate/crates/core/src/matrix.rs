//! Dense matrix and activation vector types, the DMAT1 file format, and the
//! dense GEMV reference that every sparse result is checked against.

use std::path::Path;

use crate::compress::QuantizedMatrix;
use crate::error::{Error, Result};
use crate::fixed::{quantize_value, Acc32, Fixed16, QFormat};
use crate::fsutil;

pub const DMAT_MAGIC: &str = "DMAT1";

/// Row-major matrix of 32-bit floats. Always at least 1x1 and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        let expected = rows.checked_mul(cols).ok_or(Error::DimensionOverflow {
            rows: rows as u64,
            cols: cols as u64,
        })?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite weight {} at element {i}",
                values[i]
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[&[f32]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
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
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// 16-bit fixed-point activation vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActivationVector {
    values: Vec<Fixed16>,
}

impl ActivationVector {
    pub fn new(values: Vec<Fixed16>) -> Self {
        Self { values }
    }

    pub fn from_raw(raw: &[i16]) -> Self {
        Self::new(raw.iter().copied().map(Fixed16).collect())
    }

    pub fn quantize(values: &[f32], q: QFormat) -> Result<Self> {
        values
            .iter()
            .map(|&x| quantize_value(x, q))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![Fixed16::ZERO; len])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[Fixed16] {
        &self.values
    }

    pub fn raw(&self) -> Vec<i16> {
        self.values.iter().map(|v| v.raw()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| !v.is_zero()).count()
    }

    pub fn to_f32(&self, q: QFormat) -> Vec<f32> {
        self.values
            .iter()
            .map(|&v| crate::fixed::dequantize_value(v, q))
            .collect()
    }
}

/// Bit-exact dense reference: 16x16->32 products, wraparound accumulation,
/// truncating narrow, optional ReLU.
pub fn gemv_dense_oracle(qm: &QuantizedMatrix, x: &ActivationVector, apply_relu: bool) -> Result<ActivationVector> {
    if x.len() != qm.cols() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, activation vector has {} elements",
            qm.cols(),
            x.len()
        )));
    }
    let q = qm.codebook().q_format();
    let out = (0..qm.rows())
        .map(|i| {
            let mut acc = Acc32::default();
            for (j, &xj) in x.values().iter().enumerate() {
                acc.mac(qm.decode(i, j), xj);
            }
            relu_if(acc.narrow(q), apply_relu)
        })
        .collect();
    Ok(ActivationVector::new(out))
}

#[inline]
pub(crate) fn relu_if(v: Fixed16, apply_relu: bool) -> Fixed16 {
    if apply_relu && v.raw() < 0 {
        Fixed16::ZERO
    } else {
        v
    }
}

/// Raw DMAT1 contents. Zero dimensions are allowed at this level so that
/// empty activation vectors can be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct DmatContents {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

pub fn parse_dmat(bytes: &[u8]) -> Result<DmatContents> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header newline".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let mut fields = header.split(' ');
    if fields.next() != Some(DMAT_MAGIC) {
        return Err(Error::MalformedHeader(format!(
            "expected `{DMAT_MAGIC} <rows> <cols>`, got `{header}`"
        )));
    }
    let mut dim = |name: &str| -> Result<u64> {
        let field = fields
            .next()
            .ok_or_else(|| Error::MalformedHeader(format!("missing {name}")))?;
        if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::MalformedHeader(format!("bad {name} `{field}`")));
        }
        field
            .parse::<u64>()
            .map_err(|_| Error::MalformedHeader(format!("bad {name} `{field}`")))
    };
    let rows = dim("rows")?;
    let cols = dim("cols")?;
    if fields.next().is_some() {
        return Err(Error::MalformedHeader("trailing header fields".into()));
    }
    let overflow = Error::DimensionOverflow { rows, cols };
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or(Error::DimensionOverflow { rows, cols })?;
    let expected = count.checked_mul(4).ok_or(overflow)?;
    let payload = &bytes[nl + 1..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(DmatContents {
        rows: rows as usize,
        cols: cols as usize,
        values,
    })
}

pub fn encode_dmat(rows: usize, cols: usize, values: &[f32]) -> Vec<u8> {
    debug_assert_eq!(values.len(), rows * cols);
    let mut out = format!("{DMAT_MAGIC} {rows} {cols}\n").into_bytes();
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_matrix_file(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let c = parse_dmat(&bytes)?;
    DenseMatrix::new(c.rows, c.cols, c.values)
}

pub fn write_matrix_file(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path, &encode_dmat(m.rows, m.cols, &m.values))
}

/// Reads a `len x 1` DMAT1 file. An empty vector (`0 x 1`) is accepted.
pub fn parse_vector_file(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let c = parse_dmat(&bytes)?;
    if c.cols != 1 {
        return Err(Error::DimensionMismatch(format!(
            "activation file must have 1 column, got {}",
            c.cols
        )));
    }
    Ok(c.values)
}

pub fn write_vector_file(values: &[f32], path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path, &encode_dmat(values.len(), 1, values))
}
