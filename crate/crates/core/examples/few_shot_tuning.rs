//! Few-shot prompt tuning on a 16-shot synthetic training set, followed by
//! GMP scoring with the learned meta-net and cross-modal maps.
//!
//!     cargo run --release --example few_shot_tuning

use mmp_ood::cli::{build_encoder, EncoderConfig};
use mmp_ood::metrics::{auroc, ks_statistic};
use mmp_ood::synth::{generate_world, SynthConfig};
use mmp_ood::tuner::train::initial_model;
use mmp_ood::tuner::{train, Conditioning, TrainConfig, TrainedModel};
use mmp_ood::{compute_image_prototypes, EmbeddingSet, PrototypeSet, ScoreConfig, ScoreKind};

fn report(label: &str, model: &TrainedModel, test: &EmbeddingSet, ood: &EmbeddingSet, image: &PrototypeSet) -> mmp_ood::Result<()> {
    let cfg = ScoreConfig::default();
    let scores = |set: &EmbeddingSet, kind| -> mmp_ood::Result<Vec<f64>> {
        set.vectors()
            .map(|x| model.score(x, Some(image), kind, &cfg, Conditioning::PerImage))
            .collect()
    };
    for kind in [ScoreKind::Mcm, ScoreKind::Gmp] {
        let (id, o) = (scores(test, kind)?, scores(ood, kind)?);
        println!(
            "{label:>8} {:>3}: AUROC {:.4}  KS {:.4}",
            kind.as_str(),
            auroc(&id, &o)?,
            ks_statistic(&id, &o)?
        );
    }
    Ok(())
}

fn main() -> mmp_ood::Result<()> {
    let world = generate_world(&SynthConfig {
        dim: 32,
        ..Default::default()
    })?;
    let cfg = TrainConfig::default();
    let (encoder, tokens) = build_encoder(&cfg, &EncoderConfig::default(), 32, 10)?;
    let image = compute_image_prototypes(&world.train, true)?;

    let before = initial_model(&world.train, &encoder, &tokens, &cfg)?;
    report("init", &before, &world.test, &world.ood, &image)?;

    let (model, history) = train(&world.train, &encoder, &tokens, &cfg)?;
    for (epoch, l) in history.iter().enumerate().step_by(10) {
        println!(
            "epoch {epoch:>3}  total {:.4}  id {:.4}  inter {:.4}  intra {:.4}  bias {:.4}",
            l.total, l.l_id, l.l_inter, l.l_intra, l.l_bias
        );
    }
    report("tuned", &model, &world.test, &world.ood, &image)?;

    let dir = std::env::temp_dir().join("mmp-ood-example-model");
    std::fs::create_dir_all(&dir)?;
    model.save(&dir)?;
    let reloaded = TrainedModel::load(&dir)?;
    assert_eq!(reloaded.params, model.params);
    println!("model written to {}", dir.display());
    Ok(())
}
