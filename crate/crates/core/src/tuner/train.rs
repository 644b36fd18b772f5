use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoder::{ClassTokenTable, EncoderSpec, FrozenTextEncoder, TextEncoder};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::metrics;
use crate::prototypes::PrototypeSet;
use crate::rng;
use crate::scoring::{self, ScoreConfig, ScoreKind};
use crate::store::{EmbeddingSet, Modality};

use super::backprop::{batch_loss, forward_backward, LossWeights, Sample};
use super::ops::{build_idbp, meta_net};
use super::optim::sgd_step;
use super::params::{ParamGroup, TunerDims, TunerParams};
use super::{LossBreakdown, TrainConfig};

pub const MODEL_FORMAT: &str = "mmp-ood-model/1";

/// Which embedding feeds the meta-net when building inference prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// The test image itself.
    #[default]
    PerImage,
    /// The mean of the training images.
    TrainMean,
}

/// Tuned parameters together with the frozen pieces needed to use them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub encoder: FrozenTextEncoder,
    pub class_tokens: ClassTokenTable,
    pub class_names: Vec<String>,
    pub params: TunerParams,
    pub train_mean: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    config: TrainConfig,
    encoder: EncoderSpec,
    class_token_seed: u64,
    classes: Vec<String>,
    dims: TunerDims,
    blocks: Vec<BlockInfo>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockInfo {
    name: String,
    rows: usize,
    cols: usize,
}

impl TrainedModel {
    pub fn dims(&self) -> TunerDims {
        self.params.dims()
    }

    /// Text prototypes for one test image, with the bias fixed at its mean.
    pub fn infer_prototypes(&self, image: &[f64], conditioning: Conditioning) -> Result<PrototypeSet> {
        check_dim(self.params.w_it.cols(), image.len())?;
        let cond_input = match conditioning {
            Conditioning::PerImage => image,
            Conditioning::TrainMean => &self.train_mean,
        };
        let m = meta_net(cond_input, &self.params)?;
        let vectors = (0..self.class_tokens.len())
            .map(|c| {
                let seq = build_idbp(&self.params.context, &m, &self.params.mu, self.class_tokens.token(c))?;
                self.encoder.encode(&seq)
            })
            .collect::<Result<Vec<_>>>()?;
        PrototypeSet::new(Modality::Text, vectors, false)
    }

    /// `W_it · I`.
    pub fn map_image(&self, image: &[f64]) -> Result<Vec<f64>> {
        self.params.w_it.matvec(image)
    }

    /// Scores one image with prompts inferred for it. MMP and GMP need the
    /// image prototypes.
    pub fn score(
        &self,
        image: &[f64],
        image_protos: Option<&PrototypeSet>,
        kind: ScoreKind,
        cfg: &ScoreConfig,
        conditioning: Conditioning,
    ) -> Result<f64> {
        let text = self.infer_prototypes(image, conditioning)?;
        let need = || image_protos.ok_or_else(|| Error::MissingInput("image prototypes".into()));
        match kind {
            ScoreKind::Mcm => scoring::mcm_score(image, &text, cfg),
            ScoreKind::Mmp => scoring::mmp_score(image, &text, need()?, cfg),
            ScoreKind::Gmp => {
                let mapped = self.map_image(image)?;
                scoring::gmp_score(image, &mapped, &text, need()?, cfg)
            }
        }
    }

    /// Centroid distance between the unit-normalized mapped images `W_it·I`
    /// and the unit-normalized text prototypes inferred for each image.
    pub fn mapped_modality_gap(&self, images: &EmbeddingSet, conditioning: Conditioning) -> Result<f64> {
        let mut mapped = Vec::with_capacity(images.len());
        let mut text = Vec::with_capacity(images.len() * self.class_tokens.len());
        for x in images.vectors() {
            mapped.push(linalg::normalized(&self.map_image(x)?)?);
            for p in self.infer_prototypes(x, conditioning)?.vectors() {
                text.push(linalg::normalized(p)?);
            }
        }
        metrics::modality_gap_norm(&mapped, &text)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let dims = self.dims();
        let manifest = Manifest {
            format: MODEL_FORMAT.into(),
            config: self.config,
            encoder: self.encoder.spec(),
            class_token_seed: self.class_tokens.seed(),
            classes: self.class_names.clone(),
            dims,
            blocks: ParamGroup::ALL
                .iter()
                .map(|g| {
                    let (rows, cols) = dims.shape(*g);
                    BlockInfo {
                        name: g.name().into(),
                        rows,
                        cols,
                    }
                })
                .chain(std::iter::once(BlockInfo {
                    name: "train_mean".into(),
                    rows: 1,
                    cols: dims.image_dim,
                }))
                .collect(),
        };
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        fs::write(dir.join("model.json"), json)?;
        let mut bytes = self.params.to_le_bytes();
        for x in &self.train_mean {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        fs::write(dir.join("params.bin"), bytes)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("model.json"))?)?;
        if manifest.format != MODEL_FORMAT {
            return Err(Error::BadConfig(format!("unknown model format {:?}", manifest.format)));
        }
        let dims = manifest.dims;
        if dims != TunerDims::new(dims.image_dim, dims.token_dim, dims.context_length) {
            return Err(Error::BadConfig("inconsistent meta-net width".into()));
        }
        let bytes = fs::read(dir.join("params.bin"))?;
        let param_bytes = TunerParams::zeros(&dims).param_count() * 8;
        if bytes.len() != param_bytes + dims.image_dim * 8 {
            return Err(Error::DimMismatch {
                expected: param_bytes + dims.image_dim * 8,
                found: bytes.len(),
            });
        }
        let params = TunerParams::from_le_bytes(&dims, &bytes[..param_bytes])?;
        let train_mean = bytes[param_bytes..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let encoder = FrozenTextEncoder::new(manifest.encoder)?;
        let class_tokens = ClassTokenTable::new(
            manifest.class_token_seed,
            manifest.classes.len(),
            dims.token_dim,
        );
        Ok(Self {
            config: manifest.config,
            encoder,
            class_tokens,
            class_names: manifest.classes,
            params,
            train_mean,
        })
    }
}

fn weights(cfg: &TrainConfig) -> LossWeights {
    LossWeights {
        alpha: cfg.alpha,
        beta: cfg.beta,
        tau: cfg.tau,
    }
}

fn labeled_samples(set: &EmbeddingSet) -> Vec<Sample<'_>> {
    set.labeled()
        .map(|(label, image)| Sample { label, image })
        .collect()
}

/// Mean loss over the whole labeled set with the bias at its mean (zero noise).
pub fn dataset_loss(
    set: &EmbeddingSet,
    params: &TunerParams,
    encoder: &FrozenTextEncoder,
    class_tokens: &ClassTokenTable,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let samples = labeled_samples(set);
    let zero = vec![0.0; params.mu.len()];
    batch_loss(&samples, params, encoder, class_tokens, &weights(cfg), &zero)
}

fn check_train_inputs(
    set: &EmbeddingSet,
    encoder: &FrozenTextEncoder,
    class_tokens: &ClassTokenTable,
) -> Result<()> {
    check_dim(set.dim(), encoder.output_dim())?;
    if class_tokens.len() != set.class_count() {
        return Err(Error::ClassCountMismatch(class_tokens.len(), set.class_count()));
    }
    if class_tokens.tokens().iter().any(|t| t.len() != encoder.token_dim()) {
        return Err(Error::DimMismatch {
            expected: encoder.token_dim(),
            found: class_tokens.token(0).len(),
        });
    }
    let mut counts = vec![0usize; set.class_count()];
    for (l, _) in set.labeled() {
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|n| *n == 0) {
        return Err(Error::EmptyClass(c));
    }
    Ok(())
}

/// Runs `epochs × batches` of momentum SGD over seeded shuffles of the
/// labeled records.
///
/// The returned history has `epochs + 1` entries: entry `e` is
/// [`dataset_loss`] after `e` epochs, so entry 0 is the loss at
/// initialization.
pub fn train(
    train_set: &EmbeddingSet,
    encoder: &FrozenTextEncoder,
    class_tokens: &ClassTokenTable,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, Vec<LossBreakdown>)> {
    cfg.validate()?;
    check_train_inputs(train_set, encoder, class_tokens)?;
    let dims = TunerDims::new(train_set.dim(), encoder.token_dim(), cfg.context_length);
    let mut params = TunerParams::init(&dims, cfg.seed)?;
    let mut velocity = TunerParams::zeros(&dims);
    let samples = labeled_samples(train_set);
    let w = weights(cfg);

    let mut shuffle_rng = rng::stream(cfg.seed, "tuner.shuffle");
    let mut noise_rng = rng::stream(cfg.seed, "tuner.noise");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = vec![dataset_loss(train_set, &params, encoder, class_tokens, cfg)?];

    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample<'_>> = chunk.iter().map(|i| samples[*i]).collect();
            let noise = rng::normal_vec(&mut noise_rng, dims.token_dim, 1.0);
            let (_, grads) = forward_backward(&batch, &params, encoder, class_tokens, &w, &noise)?;
            sgd_step(&mut params, &grads, &mut velocity, cfg.learning_rate, cfg.momentum)?;
        }
        history.push(dataset_loss(train_set, &params, encoder, class_tokens, cfg)?);
    }

    let train_mean = linalg::mean_of(samples.iter().map(|s| s.image), dims.image_dim)?;
    Ok((
        TrainedModel {
            config: *cfg,
            encoder: encoder.clone(),
            class_tokens: class_tokens.clone(),
            class_names: train_set.class_names().to_vec(),
            params,
            train_mean,
        },
        history,
    ))
}

pub fn write_loss_history<W: Write>(history: &[LossBreakdown], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "l_id", "l_inter", "l_intra", "l_bias", "total"])?;
    for (e, l) in history.iter().enumerate() {
        w.write_record([
            e.to_string(),
            l.l_id.to_string(),
            l.l_inter.to_string(),
            l.l_intra.to_string(),
            l.l_bias.to_string(),
            l.total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Identity-initialized maps make this the untrained starting point.
pub fn initial_model(
    train_set: &EmbeddingSet,
    encoder: &FrozenTextEncoder,
    class_tokens: &ClassTokenTable,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let zero_epochs = TrainConfig { epochs: 0, ..*cfg };
    Ok(train(train_set, encoder, class_tokens, &zero_epochs)?.0)
}
