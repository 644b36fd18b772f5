//! Central finite-difference check of [`forward_backward`] on a seeded small
//! instance.

use serde::{Deserialize, Serialize};

use crate::encoder::{ClassTokenTable, FrozenTextEncoder};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

use super::backprop::{batch_loss, forward_backward, LossWeights, Sample};
use super::params::{ParamGroup, TunerDims, TunerParams};

pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub image_dim: usize,
    pub classes: usize,
    pub context_length: usize,
    pub token_dim: usize,
    pub batch_size: usize,
    pub step: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    pub tolerance: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    /// Scale applied to the perturbation added on top of the default init.
    pub perturb: f64,
    /// Deliberately corrupts one analytic gradient block by 1%.
    #[serde(skip)]
    pub mutate: Option<ParamGroup>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            image_dim: 8,
            classes: 3,
            context_length: 2,
            token_dim: 8,
            batch_size: 4,
            step: 1e-5,
            floor: 1e-6,
            tolerance: DEFAULT_TOLERANCE,
            alpha: 1.0,
            beta: 1.0,
            tau: 0.5,
            perturb: 0.1,
            mutate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub group: String,
    pub params: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub groups: Vec<GroupError>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct Instance {
    encoder: FrozenTextEncoder,
    tokens: ClassTokenTable,
    params: TunerParams,
    images: Vec<Vec<f64>>,
    labels: Vec<usize>,
    noise: Vec<f64>,
    weights: LossWeights,
}

fn instance(cfg: &GradcheckConfig) -> Result<Instance> {
    if cfg.classes == 0 || cfg.batch_size == 0 || cfg.image_dim == 0 || cfg.token_dim == 0 {
        return Err(Error::BadConfig("gradcheck sizes must be positive".into()));
    }
    if !(cfg.step > 0.0 && cfg.floor > 0.0 && cfg.tau > 0.0) {
        return Err(Error::BadConfig("step, floor and tau must be positive".into()));
    }
    let dims = TunerDims::new(cfg.image_dim, cfg.token_dim, cfg.context_length);
    let encoder = FrozenTextEncoder::with_default_hidden(
        rng::subseed(cfg.seed, "gradcheck.encoder"),
        cfg.token_dim,
        cfg.image_dim,
    )?;
    let tokens = ClassTokenTable::new(
        rng::subseed(cfg.seed, "gradcheck.class-tokens"),
        cfg.classes,
        cfg.token_dim,
    );
    // Move away from the identity maps and zero mean so that no ℓ₁ residual
    // sits exactly on a kink.
    let mut params = TunerParams::init(&dims, cfg.seed)?;
    let mut r = rng::stream(cfg.seed, "gradcheck.perturb");
    for g in ParamGroup::ALL {
        let block = params.group_mut(g);
        let delta = rng::normal_vec(&mut r, block.len(), cfg.perturb);
        linalg::axpy(block, 1.0, &delta);
    }
    let mut r = rng::stream(cfg.seed, "gradcheck.data");
    let images = (0..cfg.batch_size)
        .map(|_| linalg::normalized(&rng::normal_vec(&mut r, cfg.image_dim, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..cfg.batch_size).map(|i| i % cfg.classes).collect();
    let noise = rng::normal_vec(&mut r, cfg.token_dim, 1.0);
    Ok(Instance {
        encoder,
        tokens,
        params,
        images,
        labels,
        noise,
        weights: LossWeights {
            alpha: cfg.alpha,
            beta: cfg.beta,
            tau: cfg.tau,
        },
    })
}

/// Compares every analytic gradient component with
/// `(f(θ + h) − f(θ − h)) / 2h`, using `|a − n| / max(|a|, |n|, floor)`.
pub fn gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let inst = instance(cfg)?;
    let batch: Vec<Sample<'_>> = inst
        .images
        .iter()
        .zip(&inst.labels)
        .map(|(image, &label)| Sample { label, image })
        .collect();
    let total = |p: &TunerParams| -> Result<f64> {
        Ok(batch_loss(&batch, p, &inst.encoder, &inst.tokens, &inst.weights, &inst.noise)?.total)
    };
    let (_, mut grads) =
        forward_backward(&batch, &inst.params, &inst.encoder, &inst.tokens, &inst.weights, &inst.noise)?;
    if let Some(g) = cfg.mutate {
        grads.group_mut(g).iter_mut().for_each(|x| *x *= 1.01);
    }

    let mut probe = inst.params.clone();
    let mut groups = Vec::with_capacity(ParamGroup::ALL.len());
    for g in ParamGroup::ALL {
        let mut worst = 0.0f64;
        for i in 0..probe.group(g).len() {
            let orig = probe.group(g)[i];
            probe.group_mut(g)[i] = orig + cfg.step;
            let up = total(&probe)?;
            probe.group_mut(g)[i] = orig - cfg.step;
            let down = total(&probe)?;
            probe.group_mut(g)[i] = orig;
            let numeric = (up - down) / (2.0 * cfg.step);
            let analytic = grads.group(g)[i];
            let denom = analytic.abs().max(numeric.abs()).max(cfg.floor);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
        groups.push(GroupError {
            group: g.name().into(),
            params: probe.group(g).len(),
            max_rel_error: worst,
        });
    }
    let max_rel_error = groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        groups,
        max_rel_error,
        tolerance: cfg.tolerance,
        pass: max_rel_error <= cfg.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_instance_passes() {
        let r = gradcheck(&GradcheckConfig::default()).unwrap();
        assert!(r.pass, "{r:#?}");
        assert_eq!(r.groups.len(), ParamGroup::ALL.len());
    }

    #[test]
    fn mutation_is_detected() {
        let cfg = GradcheckConfig {
            mutate: Some(ParamGroup::Sigma),
            ..Default::default()
        };
        let r = gradcheck(&cfg).unwrap();
        assert!(!r.pass);
        let sigma = r.groups.iter().find(|g| g.group == "sigma").unwrap();
        assert!(sigma.max_rel_error > 5e-3);
    }
}
