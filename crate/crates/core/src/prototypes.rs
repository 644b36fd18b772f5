//! Per-class reference vectors for each modality.

use crate::encoder::{TextEncoder, TokenSequence};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};
use crate::store::{EmbeddingRecord, EmbeddingSet, Modality, NORMALIZED_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    modality: Modality,
    dim: usize,
    normalized: bool,
    vectors: Vec<Vec<f64>>,
}

impl PrototypeSet {
    pub fn new(modality: Modality, vectors: Vec<Vec<f64>>, normalized: bool) -> Result<Self> {
        let dim = vectors.first().ok_or(Error::EmptyInput)?.len();
        for v in &vectors {
            check_dim(dim, v.len())?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("prototype"));
            }
            if normalized && (norm(v) - 1.0).abs() > NORMALIZED_TOL {
                return Err(Error::BadConfig("prototype flagged normalized is not unit".into()));
            }
        }
        Ok(Self {
            modality,
            dim,
            normalized,
            vectors,
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn get(&self, class: usize) -> &[f64] {
        &self.vectors[class]
    }

    /// One record per class, labeled with its class index and named after it.
    pub fn to_embedding_set(&self, class_names: &[String]) -> Result<EmbeddingSet> {
        if class_names.len() != self.vectors.len() {
            return Err(Error::ClassCountMismatch(class_names.len(), self.vectors.len()));
        }
        let records = self
            .vectors
            .iter()
            .zip(class_names)
            .enumerate()
            .map(|(c, (v, name))| EmbeddingRecord::new(name.clone(), Some(c), v.clone()))
            .collect();
        EmbeddingSet::new(
            self.dim,
            class_names.to_vec(),
            self.modality,
            self.normalized,
            records,
        )
    }

    /// Reads prototypes back from a set holding exactly one labeled record per
    /// class, in any row order.
    pub fn from_embedding_set(set: &EmbeddingSet) -> Result<Self> {
        let c = set.class_count();
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; c];
        for (label, v) in set.labeled() {
            if slots[label].replace(v.to_vec()).is_some() {
                return Err(Error::BadConfig(format!(
                    "class {label} has more than one prototype record"
                )));
            }
        }
        let vectors = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or(Error::EmptyClass(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(set.modality(), vectors, set.is_normalized())
    }
}

/// Class-wise mean of labeled image embeddings, optionally rescaled to unit
/// norm afterwards. Unlabeled rows are ignored.
pub fn compute_image_prototypes(base: &EmbeddingSet, normalize_output: bool) -> Result<PrototypeSet> {
    if base.modality() != Modality::Image {
        return Err(Error::BadConfig("image prototypes need an image set".into()));
    }
    let c = base.class_count();
    let d = base.dim();
    let mut sums = vec![vec![0.0; d]; c];
    let mut counts = vec![0usize; c];
    for (label, v) in base.labeled() {
        linalg::axpy(&mut sums[label], 1.0, v);
        counts[label] += 1;
    }
    if counts.iter().all(|n| *n == 0) {
        return Err(Error::NoLabels);
    }
    let vectors = sums
        .into_iter()
        .zip(&counts)
        .enumerate()
        .map(|(class, (mut s, n))| {
            if *n == 0 {
                return Err(Error::EmptyClass(class));
            }
            s.iter_mut().for_each(|x| *x /= *n as f64);
            if normalize_output {
                linalg::normalized(&s)
            } else {
                Ok(s)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PrototypeSet::new(Modality::Image, vectors, normalize_output)
}

/// Prototype `c` is `encoder.encode(template ++ [class_tokens[c]])`.
pub fn text_prototypes_zero_shot<E: TextEncoder + ?Sized>(
    encoder: &E,
    class_tokens: &[Vec<f64>],
    template_tokens: &[Vec<f64>],
) -> Result<PrototypeSet> {
    let n_lm = encoder.token_dim();
    for t in template_tokens.iter().chain(class_tokens) {
        check_dim(n_lm, t.len())?;
    }
    let vectors = class_tokens
        .iter()
        .map(|ct| {
            let mut tokens = template_tokens.to_vec();
            tokens.push(ct.clone());
            encoder.encode(&TokenSequence::new(tokens)?)
        })
        .collect::<Result<Vec<_>>>()?;
    PrototypeSet::new(Modality::Text, vectors, false)
}
