//! Maximum-softmax OOD scores over text and image prototypes.
//!
//! * MCM: `max_c softmax_c(cos(I, P_c) / τ)` over one prototype set.
//! * MMP: mean of MCM against image and text prototypes.
//! * GMP: mean of the four MCM terms pairing `{I, I'}` with
//!   `{P_txt, P_img}`, where `I'` is the image embedding mapped into the text
//!   side by the learned image-to-text map.
//!
//! A sample is flagged OOD when its score is `<= γ`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};
use crate::prototypes::PrototypeSet;

pub const DEFAULT_TAU: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub tau: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU }
    }
}

impl ScoreConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::BadConfig(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { tau })
    }
}

fn cosines(image: &[f64], prototypes: &PrototypeSet) -> Result<Vec<f64>> {
    if prototypes.class_count() == 0 {
        return Err(Error::EmptyInput);
    }
    check_dim(prototypes.dim(), image.len())?;
    if norm(image) == 0.0 {
        return Err(Error::ZeroVector);
    }
    prototypes
        .vectors()
        .iter()
        .map(|p| linalg::cosine(image, p))
        .collect()
}

/// Max softmax probability of `cosines / τ`.
pub fn max_softmax(cosines: &[f64], tau: f64) -> f64 {
    let logits: Vec<f64> = cosines.iter().map(|c| c / tau).collect();
    linalg::softmax(&logits)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn mcm_score(image: &[f64], prototypes: &PrototypeSet, cfg: &ScoreConfig) -> Result<f64> {
    Ok(max_softmax(&cosines(image, prototypes)?, cfg.tau))
}

fn same_classes(a: &PrototypeSet, b: &PrototypeSet) -> Result<()> {
    if a.class_count() != b.class_count() {
        return Err(Error::ClassCountMismatch(a.class_count(), b.class_count()));
    }
    check_dim(a.dim(), b.dim())
}

pub fn mmp_score(
    image: &[f64],
    text: &PrototypeSet,
    image_protos: &PrototypeSet,
    cfg: &ScoreConfig,
) -> Result<f64> {
    same_classes(text, image_protos)?;
    let s_img = mcm_score(image, image_protos, cfg)?;
    let s_txt = mcm_score(image, text, cfg)?;
    Ok((s_img + s_txt) / 2.0)
}

pub fn gmp_score(
    image: &[f64],
    mapped: &[f64],
    text: &PrototypeSet,
    image_protos: &PrototypeSet,
    cfg: &ScoreConfig,
) -> Result<f64> {
    same_classes(text, image_protos)?;
    let terms = [
        mcm_score(image, text, cfg)?,
        mcm_score(image, image_protos, cfg)?,
        mcm_score(mapped, text, cfg)?,
        mcm_score(mapped, image_protos, cfg)?,
    ];
    Ok((terms[0] + terms[1] + terms[2] + terms[3]) / 4.0)
}

/// `argmax_c cos(I, P_c)`, lowest index on ties.
pub fn predict_class(image: &[f64], prototypes: &PrototypeSet) -> Result<usize> {
    let cos = cosines(image, prototypes)?;
    let mut best = 0;
    for (c, v) in cos.iter().enumerate() {
        if *v > cos[best] {
            best = c;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Id,
    Ood,
}

pub fn decide(score: f64, gamma: f64) -> Decision {
    if score <= gamma {
        Decision::Ood
    } else {
        Decision::Id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Mcm,
    Mmp,
    Gmp,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Mcm => "mcm",
            ScoreKind::Mmp => "mmp",
            ScoreKind::Gmp => "gmp",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcm" => Ok(ScoreKind::Mcm),
            "mmp" => Ok(ScoreKind::Mmp),
            "gmp" => Ok(ScoreKind::Gmp),
            other => Err(Error::BadConfig(format!("unknown score kind {other:?}"))),
        }
    }
}

/// One row of the batch score CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub score_kind: ScoreKind,
    pub score: f64,
    pub predicted_class: usize,
}

/// Per-record scores for each requested kind plus the predicted class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreReport {
    pub ids: Vec<String>,
    pub scores: Vec<(ScoreKind, Vec<f64>)>,
    pub predicted: Vec<usize>,
}

impl ScoreReport {
    pub fn scores_for(&self, kind: ScoreKind) -> Option<&[f64]> {
        self.scores
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, v)| v.as_slice())
    }

    pub fn rows(&self) -> Vec<ScoreRow> {
        let mut rows = Vec::new();
        for (kind, scores) in &self.scores {
            for (i, s) in scores.iter().enumerate() {
                rows.push(ScoreRow {
                    id: self.ids[i].clone(),
                    score_kind: *kind,
                    score: *s,
                    predicted_class: self.predicted[i],
                });
            }
        }
        rows
    }
}

pub fn write_score_csv<W: Write>(rows: &[ScoreRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_score_csv<R: Read>(input: R) -> Result<Vec<ScoreRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
