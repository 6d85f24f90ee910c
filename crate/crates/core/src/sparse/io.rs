//! EIEM1 on-disk model format (all integers little-endian):
//!
//! ```text
//! magic        6 bytes  "EIEM1\0"
//! version      u16      1
//! rows, cols   u32, u32
//! num_pes      u16
//! q_frac_bits  u8
//! n_bits       u8
//! codebook     16 x u16 (raw i16 bits; slots past 2^n_bits are zero)
//! per PE:
//!   entry_count  u32
//!   offsets      (cols + 1) x u32
//!   v            ceil(entry_count / 2) bytes, low nibble first, zero padded
//!   z            same packing as v
//! ```

use std::path::Path;

use super::csc::{local_row_count, PeSlice};
use super::model::CompressedModel;
use crate::compress::Codebook;
use crate::error::{Error, Result};
use crate::fixed::{Fixed16, QFormat};
use crate::fsutil;

pub const MODEL_MAGIC: &[u8; 6] = b"EIEM1\0";
pub const MODEL_VERSION: u16 = 1;
const CODEBOOK_SLOTS: usize = 16;

fn pack_nibbles(out: &mut Vec<u8>, nibbles: &[u8]) {
    for pair in nibbles.chunks(2) {
        let lo = pair[0] & 0x0f;
        let hi = pair.get(1).map_or(0, |&n| n & 0x0f);
        out.push(lo | (hi << 4));
    }
}

fn unpack_nibbles(bytes: &[u8], count: usize) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(count);
    for &b in bytes {
        out.push(b & 0x0f);
        out.push(b >> 4);
    }
    // The padding nibble of an odd count must be zero.
    if out.len() > count && out[count] != 0 {
        return None;
    }
    out.truncate(count);
    Some(out)
}

pub fn encode_model(m: &CompressedModel) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::invalid("rows exceed u32"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::invalid("cols exceed u32"))?;
    let num_pes = u16::try_from(m.num_pes()).map_err(|_| Error::invalid("num_pes exceeds u16"))?;
    let cb = m.codebook();

    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&num_pes.to_le_bytes());
    out.push(m.q_format().frac_bits());
    out.push(cb.n_bits());
    for slot in 0..CODEBOOK_SLOTS {
        let raw = cb.entries().get(slot).map_or(0, |c| c.raw());
        out.extend_from_slice(&raw.to_le_bytes());
    }
    for s in m.slices() {
        out.extend_from_slice(&(s.entry_count() as u32).to_le_bytes());
        for &off in s.p() {
            out.extend_from_slice(&off.to_le_bytes());
        }
        pack_nibbles(&mut out, s.v());
        pack_nibbles(&mut out, s.z());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::TruncatedPayload {
                expected: self.pos.saturating_add(n),
                found: self.buf.len(),
            }),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<CompressedModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MODEL_MAGIC.len()).map_err(|_| Error::BadMagic)? != MODEL_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let num_pes = r.u16()? as usize;
    if num_pes == 0 {
        return Err(Error::MalformedHeader("num_pes is zero".into()));
    }
    let q = QFormat::new(r.u8()?).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let n_bits = r.u8()?;
    let mut entries = Vec::with_capacity(CODEBOOK_SLOTS);
    for _ in 0..CODEBOOK_SLOTS {
        entries.push(Fixed16(r.u16()? as i16));
    }
    if !(1..=Codebook::MAX_BITS).contains(&n_bits) {
        return Err(Error::MalformedHeader(format!("unsupported index width {n_bits}")));
    }
    let size = 1usize << n_bits;
    if entries[size..].iter().any(|e| !e.is_zero()) {
        return Err(Error::MalformedHeader("unused codebook slots are not zero".into()));
    }
    entries.truncate(size);
    let codebook = Codebook::from_entries(n_bits, q, entries).map_err(|e| Error::MalformedHeader(e.to_string()))?;

    let mut slices = Vec::with_capacity(num_pes);
    for pe in 0..num_pes {
        let count = r.u32()? as usize;
        let mut p = Vec::with_capacity(cols.min(bytes.len() / 4) + 1);
        for _ in 0..=cols {
            p.push(r.u32()?);
        }
        let packed = count.div_ceil(2);
        let bad_pad = || Error::CorruptSlice {
            pe,
            reason: "nonzero padding nibble".into(),
        };
        let v = unpack_nibbles(r.take(packed)?, count).ok_or_else(bad_pad)?;
        let z = unpack_nibbles(r.take(packed)?, count).ok_or_else(bad_pad)?;
        slices.push(PeSlice::from_parts(
            pe,
            local_row_count(rows, num_pes, pe),
            cols,
            v,
            z,
            p,
        )?);
    }
    if r.pos != bytes.len() {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after last PE slice",
            bytes.len() - r.pos
        )));
    }
    CompressedModel::from_parts(rows, cols, codebook, slices)
}

pub fn write_model(m: &CompressedModel, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path, &encode_model(m)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<CompressedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::QuantizedMatrix;

    fn sample() -> CompressedModel {
        let cb = Codebook::from_learned(4, QFormat::Q8_8, &[-300, -2, 5, 700]).unwrap();
        let mut idx = vec![0u8; 40 * 3];
        idx[0] = 1;
        idx[3 * 39 + 2] = 4;
        idx[3 * 7 + 1] = 2;
        idx[3 * 8 + 1] = 3;
        let qm = QuantizedMatrix::new(40, 3, idx, cb).unwrap();
        CompressedModel::from_quantized(&qm, 2).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_model(&sample()).unwrap();
        assert_eq!(&bytes[..6], b"EIEM1\0");
        assert_eq!(&bytes[6..8], &[1, 0]);
        assert_eq!(&bytes[8..12], &40u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..18], &2u16.to_le_bytes());
        assert_eq!(bytes[18], 8);
        assert_eq!(bytes[19], 4);
        assert_eq!(&bytes[20..22], &[0, 0]);
        assert_eq!(&bytes[22..24], &(-300i16).to_le_bytes());
    }

    #[test]
    fn nibble_packing_low_first() {
        let mut out = Vec::new();
        pack_nibbles(&mut out, &[1, 2, 3]);
        assert_eq!(out, vec![0x21, 0x03]);
        assert_eq!(unpack_nibbles(&out, 3).unwrap(), vec![1, 2, 3]);
        assert!(unpack_nibbles(&[0x21, 0x43], 3).is_none());
    }

    #[test]
    fn roundtrip() {
        let m = sample();
        let bytes = encode_model(&m).unwrap();
        assert_eq!(decode_model(&bytes).unwrap(), m);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.eiem");
        write_model(&m, &path).unwrap();
        assert_eq!(read_model(&path).unwrap(), m);
    }

    #[test]
    fn every_truncation_fails() {
        let bytes = encode_model(&sample()).unwrap();
        for len in 0..bytes.len() {
            assert!(decode_model(&bytes[..len]).is_err(), "prefix {len} parsed");
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_model(&sample()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::BadMagic)));
        let mut bytes = encode_model(&sample()).unwrap();
        bytes[6] = 2;
        assert!(matches!(decode_model(&bytes), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn non_monotone_offsets_rejected() {
        let m = sample();
        let mut bytes = encode_model(&m).unwrap();
        // PE 0 offsets start after header (20 + 32) and its entry count.
        let base = 52 + 4;
        let p1 = u32::from_le_bytes(bytes[base + 4..base + 8].try_into().unwrap());
        assert!(p1 > 0);
        bytes[base + 8..base + 12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_model(&bytes), Err(Error::CorruptSlice { .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_model(&sample()).unwrap();
        bytes.push(0);
        assert!(decode_model(&bytes).is_err());
    }

    #[test]
    fn short_codebook_roundtrip() {
        let cb = Codebook::from_learned(2, QFormat::new(4).unwrap(), &[-7, 3]).unwrap();
        let qm = QuantizedMatrix::new(2, 2, vec![1, 0, 2, 3], cb).unwrap();
        let m = CompressedModel::from_quantized(&qm, 1).unwrap();
        let back = decode_model(&encode_model(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
