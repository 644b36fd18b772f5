//! Out-of-distribution detection with multi-modal class prototypes.
//!
//! Image embeddings are scored against text prototypes (MCM), text and image
//! prototypes together (MMP), and additionally through a learned
//! image-to-text map (GMP). The [`tuner`] module learns prompts and the
//! cross-modal maps from a few labeled images per class with exact
//! hand-written gradients.


pub mod cli;
pub mod encoder;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod prototypes;
pub mod rng;
pub mod scoring;
pub mod store;
pub mod synth;

pub mod tuner;

pub use error::{Error, Result};
pub use prototypes::{compute_image_prototypes, text_prototypes_zero_shot, PrototypeSet};
pub use scoring::{gmp_score, mcm_score, mmp_score, ScoreConfig, ScoreKind};
pub use store::{load_embedding_set, save_embedding_set, EmbeddingRecord, EmbeddingSet, Modality};
