//! Embedding sets and the OODEMB1 on-disk format.
//!
//! Layout of an OODEMB1 file:
//!
//! ```text
//! OODEMB1\n
//! {"dim":d,"count":n,"classes":[...],"modality":"image"|"text","normalized":bool}\n
//! n*d little-endian f32, row-major
//! n little-endian i32 labels, -1 for unlabeled
//! ```
//!
//! The header is written compactly with keys in the order above. Files
//! produced by [`save_embedding_set`] reproduce byte-for-byte through a
//! load/save cycle. Vectors are widened to `f64` in memory.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm};

pub const MAGIC: &[u8; 8] = b"OODEMB1\n";

/// Tolerance on the unit norm of vectors in a set flagged as normalized.
pub const NORMALIZED_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub label: Option<usize>,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, label: Option<usize>, vector: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            label,
            vector,
        }
    }
}

/// A validated, immutable collection of embeddings sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    class_names: Vec<String>,
    modality: Modality,
    normalized: bool,
    records: Vec<EmbeddingRecord>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    count: usize,
    classes: Vec<String>,
    modality: Modality,
    normalized: bool,
}

impl EmbeddingSet {
    pub fn new(
        dim: usize,
        class_names: Vec<String>,
        modality: Modality,
        normalized: bool,
        records: Vec<EmbeddingRecord>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadHeader("dim must be positive".into()));
        }
        let mut seen = HashSet::new();
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::BadHeader(format!("duplicate class name {name:?}")));
            }
        }
        for r in &records {
            if r.vector.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: r.vector.len(),
                });
            }
            if r.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding vector"));
            }
            if let Some(l) = r.label {
                if l >= class_names.len() {
                    return Err(Error::BadLabel {
                        label: l as i64,
                        classes: class_names.len(),
                    });
                }
            }
            if normalized && (norm(&r.vector) - 1.0).abs() > NORMALIZED_TOL {
                return Err(Error::BadHeader(format!(
                    "record {:?} is not unit norm but the set is flagged normalized",
                    r.id
                )));
            }
        }
        Ok(Self {
            dim,
            class_names,
            modality,
            normalized,
            records,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.vector.as_slice())
    }

    /// Labeled rows as `(label, vector)`; unlabeled rows are skipped.
    pub fn labeled(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.records
            .iter()
            .filter_map(|r| r.label.map(|l| (l, r.vector.as_slice())))
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }

    /// Same vocabulary and metadata, different rows.
    pub fn with_records(&self, records: Vec<EmbeddingRecord>) -> Result<Self> {
        Self::new(
            self.dim,
            self.class_names.clone(),
            self.modality,
            self.normalized,
            records,
        )
    }
}

/// Rescales every vector to unit ℓ₂ norm.
pub fn normalize_set(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let records = set
        .records
        .iter()
        .map(|r| {
            Ok(EmbeddingRecord {
                id: r.id.clone(),
                label: r.label,
                vector: linalg::normalized(&r.vector)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(
        set.dim,
        set.class_names.clone(),
        set.modality,
        true,
        records,
    )
}

pub fn encode_embedding_set(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let header = Header {
        dim: set.dim,
        count: set.records.len(),
        classes: set.class_names.clone(),
        modality: set.modality,
        normalized: set.normalized,
    };
    let mut out = Vec::with_capacity(64 + set.records.len() * (set.dim + 1) * 4);
    out.extend_from_slice(MAGIC);
    serde_json::to_writer(&mut out, &header)?;
    out.push(b'\n');
    for r in &set.records {
        for x in &r.vector {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    for r in &set.records {
        let label: i32 = match r.label {
            Some(l) => i32::try_from(l).map_err(|_| Error::BadLabel {
                label: l as i64,
                classes: set.class_names.len(),
            })?,
            None => -1,
        };
        out.extend_from_slice(&label.to_le_bytes());
    }
    Ok(out)
}

/// Parses OODEMB1 bytes. Record ids are not stored on disk; loaded rows
/// are named by their zero-based row index.
pub fn decode_embedding_set(bytes: &[u8]) -> Result<EmbeddingSet> {
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or(Error::BadMagic)?;
    let newline = rest
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::BadHeader("missing header terminator".into()))?;
    let header: Header = serde_json::from_slice(&rest[..newline])
        .map_err(|e| Error::BadHeader(e.to_string()))?;
    let payload = &rest[newline + 1..];

    let (n, d) = (header.count, header.dim);
    if d == 0 {
        return Err(Error::BadHeader("dim must be positive".into()));
    }
    let expected = n * (d * 4 + 4);
    if payload.len() != expected {
        // Infer the per-row width the payload actually holds, if it is consistent.
        if n > 0 && payload.len() % n == 0 && (payload.len() / n) % 4 == 0 {
            let words = payload.len() / n / 4;
            return Err(Error::DimMismatch {
                expected: d,
                found: words.saturating_sub(1),
            });
        }
        return Err(Error::BadHeader(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }

    let (floats, labels) = payload.split_at(n * d * 4);
    let mut records = Vec::with_capacity(n);
    for (i, (row, label)) in floats
        .chunks_exact(d * 4)
        .zip(labels.chunks_exact(4))
        .enumerate()
    {
        let vector: Vec<f64> = row
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding payload"));
        }
        let raw = i32::from_le_bytes([label[0], label[1], label[2], label[3]]);
        let label = match raw {
            -1 => None,
            l if l >= 0 && (l as usize) < header.classes.len() => Some(l as usize),
            l => {
                return Err(Error::BadLabel {
                    label: i64::from(l),
                    classes: header.classes.len(),
                })
            }
        };
        records.push(EmbeddingRecord::new(i.to_string(), label, vector));
    }
    EmbeddingSet::new(
        d,
        header.classes,
        header.modality,
        header.normalized,
        records,
    )
}

pub fn load_embedding_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    decode_embedding_set(&fs::read(path)?)
}

pub fn save_embedding_set(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_embedding_set(set)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    /// Writes an OODEMB1 file field by field, independent of the encoder.
    fn hand_written(header: &str, floats: &[f32], labels: &[i32]) -> Vec<u8> {
        let mut b = b"OODEMB1\n".to_vec();
        b.extend_from_slice(header.as_bytes());
        b.push(b'\n');
        for f in floats {
            b.extend_from_slice(&f.to_le_bytes());
        }
        for l in labels {
            b.extend_from_slice(&l.to_le_bytes());
        }
        b
    }

    #[test]
    fn decodes_hand_constructed_file() {
        let bytes = hand_written(
            r#"{"dim":2,"count":1,"classes":["a"],"modality":"image","normalized":false}"#,
            &[1.0, 0.0],
            &[0],
        );
        let set = decode_embedding_set(&bytes).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.class_names(), ["a".to_string()]);
        assert_eq!(set.records()[0].vector, vec![1.0, 0.0]);
        assert_eq!(set.records()[0].label, Some(0));
        assert_eq!(encode_embedding_set(&set).unwrap(), bytes);
    }

    #[test]
    fn short_rows_are_a_dim_mismatch() {
        let bytes = hand_written(
            r#"{"dim":3,"count":2,"classes":["a"],"modality":"image","normalized":false}"#,
            &[1.0, 0.0, 0.5, 0.5],
            &[0, -1],
        );
        assert!(matches!(
            decode_embedding_set(&bytes),
            Err(Error::DimMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn rejects_bad_magic_labels_and_nan() {
        assert!(matches!(
            decode_embedding_set(b"OODEMB2\n{}\n"),
            Err(Error::BadMagic)
        ));
        let bad_label = hand_written(
            r#"{"dim":1,"count":1,"classes":["a"],"modality":"text","normalized":false}"#,
            &[1.0],
            &[1],
        );
        assert!(matches!(
            decode_embedding_set(&bad_label),
            Err(Error::BadLabel { label: 1, .. })
        ));
        let nan = hand_written(
            r#"{"dim":1,"count":1,"classes":["a"],"modality":"text","normalized":false}"#,
            &[f32::NAN],
            &[-1],
        );
        assert!(matches!(
            decode_embedding_set(&nan),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn unlabeled_rows_use_minus_one() {
        let set = EmbeddingSet::new(
            1,
            names(2),
            Modality::Image,
            false,
            vec![
                EmbeddingRecord::new("0", None, vec![0.5]),
                EmbeddingRecord::new("1", Some(1), vec![0.25]),
            ],
        )
        .unwrap();
        let bytes = encode_embedding_set(&set).unwrap();
        let tail = &bytes[bytes.len() - 8..];
        assert_eq!(&tail[..4], &(-1i32).to_le_bytes());
        assert_eq!(&tail[4..], &1i32.to_le_bytes());
        assert_eq!(decode_embedding_set(&bytes).unwrap(), set);
    }

    #[test]
    fn construction_validates_invariants() {
        let dup = EmbeddingSet::new(
            1,
            vec!["a".into(), "a".into()],
            Modality::Image,
            false,
            vec![],
        );
        assert!(matches!(dup, Err(Error::BadHeader(_))));
        let flagged = EmbeddingSet::new(
            2,
            names(1),
            Modality::Image,
            true,
            vec![EmbeddingRecord::new("x", None, vec![3.0, 4.0])],
        );
        assert!(flagged.is_err());
        let wrong_dim = EmbeddingSet::new(
            2,
            names(1),
            Modality::Image,
            false,
            vec![EmbeddingRecord::new("x", None, vec![3.0])],
        );
        assert!(matches!(wrong_dim, Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn normalize_examples() {
        let set = EmbeddingSet::new(
            2,
            names(1),
            Modality::Image,
            false,
            vec![
                EmbeddingRecord::new("a", Some(0), vec![3.0, 4.0]),
                EmbeddingRecord::new("b", None, vec![1.0, 0.0]),
            ],
        )
        .unwrap();
        let n = normalize_set(&set).unwrap();
        assert!(n.is_normalized());
        assert_eq!(n.records()[0].vector, vec![0.6, 0.8]);
        assert_eq!(n.records()[1].vector, vec![1.0, 0.0]);
        assert_eq!(normalize_set(&n).unwrap(), n);

        let zero = set
            .with_records(vec![EmbeddingRecord::new("z", None, vec![0.0, 0.0])])
            .unwrap();
        assert!(matches!(normalize_set(&zero), Err(Error::ZeroVector)));
    }
}
