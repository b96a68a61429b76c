//! On-disk formats.
//!
//! ```text
//! EMB1: "EMB1" | n: u32 LE | d: u32 LE | n*d f32 LE, row-major
//! LBL1: "LBL1" | n: u32 LE | n u32 LE labels
//! split manifest: {"base": [..], "novel": [..]}
//! ```
//!
//! Embeddings are widened to `f64` on load and narrowed to `f32` on write, so a
//! write/load round trip of file contents is bit-exact.

use std::fs;
use std::path::Path;

use super::{LabeledEmbeddings, SplitManifest};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::ClassId;

const EMB_MAGIC: &[u8; 4] = b"EMB1";
const LBL_MAGIC: &[u8; 4] = b"LBL1";

fn check_magic(bytes: &[u8], magic: &[u8; 4]) -> Result<()> {
    let found = bytes.get(..4).unwrap_or(bytes);
    if found != magic {
        return Err(Error::BadMagic {
            offset: 0,
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(found).into_owned(),
        });
    }
    Ok(())
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let chunk = bytes.get(offset..offset + 4).ok_or(Error::Truncated {
        offset,
        expected: 4,
        actual: bytes.len().saturating_sub(offset) as u64,
    })?;
    Ok(u32::from_le_bytes(chunk.try_into().expect("4-byte slice")))
}

fn payload(bytes: &[u8], offset: usize, count: u64, width: u64) -> Result<&[u8]> {
    let expected = count.checked_mul(width).ok_or(Error::Overflow { offset })?;
    let actual = (bytes.len() - offset) as u64;
    if actual != expected {
        return Err(Error::Truncated { offset, expected, actual });
    }
    Ok(&bytes[offset..])
}

/// Parse an EMB1 buffer. Rows are returned as stored, not normalized.
pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    check_magic(bytes, EMB_MAGIC)?;
    let n = read_u32(bytes, 4)?;
    let d = read_u32(bytes, 8)?;
    let count = u64::from(n).checked_mul(u64::from(d)).ok_or(Error::Overflow { offset: 4 })?;
    let data = payload(bytes, 12, count, 4)?;
    let values =
        data.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4-byte chunk")))).collect();
    EmbeddingMatrix::new(n as usize, d as usize, values)
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Result<Vec<u8>> {
    let n = u32::try_from(m.rows()).map_err(|_| Error::Overflow { offset: 4 })?;
    let d = u32::try_from(m.dim()).map_err(|_| Error::Overflow { offset: 8 })?;
    let mut out = Vec::with_capacity(12 + m.values().len() * 4);
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for &v in m.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<ClassId>> {
    check_magic(bytes, LBL_MAGIC)?;
    let n = read_u32(bytes, 4)?;
    let data = payload(bytes, 8, u64::from(n), 4)?;
    Ok(data.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk"))).collect())
}

pub fn encode_labels(labels: &[ClassId]) -> Result<Vec<u8>> {
    let n = u32::try_from(labels.len()).map_err(|_| Error::Overflow { offset: 4 })?;
    let mut out = Vec::with_capacity(8 + labels.len() * 4);
    out.extend_from_slice(LBL_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    decode_embeddings(&fs::read(path)?)
}

pub fn write_embeddings(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    fs::write(path, encode_embeddings(m)?)?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<ClassId>> {
    decode_labels(&fs::read(path)?)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[ClassId]) -> Result<()> {
    fs::write(path, encode_labels(labels)?)?;
    Ok(())
}

pub fn load_split(path: impl AsRef<Path>) -> Result<SplitManifest> {
    let split: SplitManifest = serde_json::from_slice(&fs::read(path)?)?;
    split.validate()?;
    Ok(split)
}

pub fn write_split(path: impl AsRef<Path>, split: &SplitManifest) -> Result<()> {
    fs::write(path, serde_json::to_vec(split)?)?;
    Ok(())
}

/// Read a CSV with a header row, `d` decimal feature columns and a final
/// integer label column.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledEmbeddings> {
    read_csv(csv::Reader::from_path(path).map_err(|e| Error::Csv(e.to_string()))?)
}

pub fn parse_csv(text: &str) -> Result<LabeledEmbeddings> {
    read_csv(csv::Reader::from_reader(text.as_bytes()))
}

fn read_csv<R: std::io::Read>(mut reader: csv::Reader<R>) -> Result<LabeledEmbeddings> {
    let columns = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.len();
    if columns < 3 {
        return Err(Error::Csv(format!("need at least 2 feature columns and a label, got {columns} columns")));
    }
    let dim = columns - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        for field in record.iter().take(dim) {
            let v: f64 =
                field.trim().parse().map_err(|_| Error::Csv(format!("record {line}: bad number {field:?}")))?;
            values.push(v);
        }
        let label = record.get(dim).unwrap_or_default().trim();
        labels.push(label.parse().map_err(|_| Error::Csv(format!("record {line}: bad label {label:?}")))?);
    }
    LabeledEmbeddings::new(EmbeddingMatrix::new(labels.len(), dim, values)?, labels)
}
