//! Seeded synthetic embedding worlds and a Monte-Carlo check that combining
//! image and text prototypes widens the ID/OOD score gap.
//!
//! Geometry of a world with `C` classes in `R^d`:
//!
//! * image prototypes `p_c` are orthonormal (Gram-Schmidt of Gaussian draws);
//! * a unit anchor `a` is orthogonal to every `p_c`;
//! * text prototypes are `normalize((1 − γ) p_c + γ a)`, so `γ` sets the
//!   modality gap and `γ = 0` reproduces the image prototypes exactly;
//! * ID samples are `normalize(p_c + ε z)` with `z ~ N(0, I)`;
//! * OOD samples are `normalize(u + ε z⊥)`, where `u` is the unit centroid of
//!   the prototypes and `z⊥` is Gaussian noise with its component in
//!   `span{p_c}` removed. Every OOD sample is therefore equally similar to
//!   all classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot};
use crate::prototypes::PrototypeSet;
use crate::rng;
use crate::scoring::{mcm_score, mmp_score, ScoreConfig};
use crate::store::{EmbeddingRecord, EmbeddingSet, Modality};

pub const MIN_TRIALS: usize = 10;
pub const A4_SPREAD_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub classes: usize,
    pub dim: usize,
    pub n_per_class_train: usize,
    pub n_per_class_test: usize,
    pub n_ood: usize,
    pub noise_scale: f64,
    pub gap: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 64,
            n_per_class_train: 16,
            n_per_class_test: 200,
            n_ood: 2000,
            noise_scale: 0.15,
            gap: 0.5,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if self.classes == 0 {
            return bad("classes must be positive".into());
        }
        if self.dim < self.classes + 1 {
            return bad(format!("dim {} must be at least classes + 1", self.dim));
        }
        if self.n_per_class_train == 0 || self.n_per_class_test == 0 || self.n_ood == 0 {
            return bad("sample counts must be positive".into());
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return bad("noise_scale must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gap) {
            return bad("gap must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub image_prototypes: PrototypeSet,
    pub text_prototypes: PrototypeSet,
    pub anchor: Vec<f64>,
    pub train: EmbeddingSet,
    pub test: EmbeddingSet,
    pub ood: EmbeddingSet,
}

pub fn class_names(classes: usize) -> Vec<String> {
    (0..classes).map(|c| format!("class_{c}")).collect()
}

/// Modified Gram-Schmidt over fresh Gaussian draws until `count` unit
/// vectors are collected.
fn orthonormal_basis(r: &mut impl rand::Rng, dim: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = rng::normal_vec(r, dim, 1.0);
        for b in &basis {
            let proj = dot(&v, b);
            axpy(&mut v, -proj, b);
        }
        if linalg::norm(&v) > 1e-8 {
            basis.push(linalg::normalized(&v)?);
        }
    }
    Ok(basis)
}

fn id_set(
    protos: &[Vec<f64>],
    per_class: usize,
    eps: f64,
    seed: u64,
    split: &str,
    names: &[String],
) -> Result<EmbeddingSet> {
    let mut r = rng::stream(seed, split);
    let mut records = Vec::with_capacity(protos.len() * per_class);
    for (c, p) in protos.iter().enumerate() {
        for i in 0..per_class {
            let mut v = p.clone();
            axpy(&mut v, eps, &rng::normal_vec(&mut r, p.len(), 1.0));
            records.push(EmbeddingRecord::new(
                format!("{split}-{c}-{i}"),
                Some(c),
                linalg::normalized(&v)?,
            ));
        }
    }
    EmbeddingSet::new(protos[0].len(), names.to_vec(), Modality::Image, true, records)
}

fn ood_set(protos: &[Vec<f64>], count: usize, eps: f64, seed: u64, names: &[String]) -> Result<EmbeddingSet> {
    let dim = protos[0].len();
    let centroid = linalg::normalized(&linalg::mean_of(protos.iter().map(Vec::as_slice), dim)?)?;
    let mut r = rng::stream(seed, "synth.ood");
    let records = (0..count)
        .map(|i| {
            let mut z = rng::normal_vec(&mut r, dim, 1.0);
            for p in protos {
                let proj = dot(&z, p);
                axpy(&mut z, -proj, p);
            }
            let mut v = centroid.clone();
            axpy(&mut v, eps, &z);
            Ok(EmbeddingRecord::new(format!("ood-{i}"), None, linalg::normalized(&v)?))
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(dim, names.to_vec(), Modality::Image, true, records)
}

pub fn generate_world(cfg: &SynthConfig) -> Result<World> {
    cfg.validate()?;
    let names = class_names(cfg.classes);
    let mut r = rng::stream(cfg.seed, "synth.prototypes");
    let mut basis = orthonormal_basis(&mut r, cfg.dim, cfg.classes + 1)?;
    let anchor = basis.pop().expect("classes + 1 vectors");
    let text = basis
        .iter()
        .map(|p| {
            let mut t: Vec<f64> = p.iter().map(|x| (1.0 - cfg.gap) * x).collect();
            axpy(&mut t, cfg.gap, &anchor);
            linalg::normalized(&t)
        })
        .collect::<Result<Vec<_>>>()?;
    let train = id_set(&basis, cfg.n_per_class_train, cfg.noise_scale, cfg.seed, "synth.train", &names)?;
    let test = id_set(&basis, cfg.n_per_class_test, cfg.noise_scale, cfg.seed, "synth.test", &names)?;
    let ood = ood_set(&basis, cfg.n_ood, cfg.noise_scale, cfg.seed, &names)?;
    Ok(World {
        image_prototypes: PrototypeSet::new(Modality::Image, basis, true)?,
        text_prototypes: PrototypeSet::new(Modality::Text, text, true)?,
        anchor,
        train,
        test,
        ood,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Mean cos(ID, own image prototype) minus mean cos(ID, own text prototype).
    pub a2_margin: f64,
    pub a2_pass: bool,
    pub a3_intra: f64,
    pub a3_inter: f64,
    pub a3_margin: f64,
    pub a3_pass: bool,
    /// Largest max-minus-min of per-class mean OOD cosines, over both
    /// prototype sets.
    pub a4_spread: f64,
    pub a4_pass: bool,
    pub pass: bool,
}

fn class_spread(ood: &EmbeddingSet, protos: &PrototypeSet) -> Result<f64> {
    let means = protos
        .vectors()
        .iter()
        .map(|p| {
            let sum = ood
                .vectors()
                .map(|x| linalg::cosine(x, p))
                .sum::<Result<f64>>()?;
            Ok(sum / ood.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Diagnostics on the test ID set and the OOD set.
///
/// The A2 check is only enforced when the text prototypes differ from the
/// image prototypes; with no gap its margin is reported but always passes.
pub fn check_assumptions(world: &World) -> Result<AssumptionReport> {
    let (mut own_img, mut own_txt) = (0.0, 0.0);
    let c = world.image_prototypes.class_count();
    let d = world.image_prototypes.dim();
    let mut sums = vec![vec![0.0; d]; c];
    let mut counts = vec![0usize; c];
    let mut n = 0usize;
    for (label, x) in world.test.labeled() {
        own_img += linalg::cosine(x, world.image_prototypes.get(label))?;
        own_txt += linalg::cosine(x, world.text_prototypes.get(label))?;
        axpy(&mut sums[label], 1.0, &linalg::normalized(x)?);
        counts[label] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoLabels);
    }
    let a2_margin = (own_img - own_txt) / n as f64;
    let gap_present = world.image_prototypes.vectors() != world.text_prototypes.vectors();

    // Pairwise cosines of unit vectors from class sums:
    // Σ_{i≠j∈c} xᵢ·xⱼ = ‖S_c‖² − n_c and Σ_{c≠c'} S_c·S_c' = ‖ΣS‖² − Σ‖S_c‖².
    let total: Vec<f64> = (0..d).map(|k| sums.iter().map(|s| s[k]).sum()).collect();
    let sq: Vec<f64> = sums.iter().map(|s| dot(s, s)).collect();
    let intra_pairs: f64 = counts.iter().map(|&k| (k * k.saturating_sub(1)) as f64).sum();
    let inter_pairs = (n * n) as f64 - counts.iter().map(|&k| (k * k) as f64).sum::<f64>();
    let intra_sum: f64 = sq.iter().zip(&counts).map(|(s, &k)| s - k as f64).sum();
    let inter_sum = dot(&total, &total) - sq.iter().sum::<f64>();
    let a3_intra = if intra_pairs > 0.0 { intra_sum / intra_pairs } else { 1.0 };
    let a3_inter = if inter_pairs > 0.0 { inter_sum / inter_pairs } else { 0.0 };
    let a3_margin = a3_intra - a3_inter;

    let a4_spread = class_spread(&world.ood, &world.image_prototypes)?
        .max(class_spread(&world.ood, &world.text_prototypes)?);

    let a2_pass = !gap_present || a2_margin > 0.0;
    let a3_pass = a3_margin > 0.0;
    let a4_pass = a4_spread <= A4_SPREAD_LIMIT;
    Ok(AssumptionReport {
        a2_margin,
        a2_pass,
        a3_intra,
        a3_inter,
        a3_margin,
        a3_pass,
        a4_spread,
        a4_pass,
        pass: a2_pass && a3_pass && a4_pass,
    })
}

/// Per-sample MCM (text prototypes) and MMP scores of the test and OOD sets.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldScores {
    pub mcm_id: Vec<f64>,
    pub mcm_ood: Vec<f64>,
    pub mmp_id: Vec<f64>,
    pub mmp_ood: Vec<f64>,
}

pub fn score_world(world: &World, cfg: &ScoreConfig) -> Result<WorldScores> {
    let score = |set: &EmbeddingSet| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut mcm = Vec::with_capacity(set.len());
        let mut mmp = Vec::with_capacity(set.len());
        for x in set.vectors() {
            mcm.push(mcm_score(x, &world.text_prototypes, cfg)?);
            mmp.push(mmp_score(x, &world.text_prototypes, &world.image_prototypes, cfg)?);
        }
        Ok((mcm, mmp))
    };
    let (mcm_id, mmp_id) = score(&world.test)?;
    let (mcm_ood, mmp_ood) = score(&world.ood)?;
    Ok(WorldScores {
        mcm_id,
        mcm_ood,
        mmp_id,
        mmp_ood,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub delta_mmp: f64,
    pub delta_mcm: f64,
    pub stderr_mmp: f64,
    pub stderr_mcm: f64,
    pub trials: usize,
    pub tau: f64,
    /// Assumption diagnostics of the first trial's world.
    pub assumptions: AssumptionReport,
    pub pass: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn stderr(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// Trial `t` uses a world seeded by `indexed_subseed(cfg.seed, "synth.trial", t)`.
pub fn trial_config(cfg: &SynthConfig, trial: usize) -> SynthConfig {
    SynthConfig {
        seed: rng::indexed_subseed(cfg.seed, "synth.trial", trial as u64),
        ..*cfg
    }
}

/// Estimates `Δ = E[S(ID)] − E[S(OOD)]` for MMP and MCM over independent
/// worlds. Passes when `Δ_MMP ≥ Δ_MCM − 2·sqrt(se_MMP² + se_MCM²)` and the
/// first world satisfies [`check_assumptions`].
pub fn verify_theorem(cfg: &SynthConfig, trials: usize, score_cfg: &ScoreConfig) -> Result<TheoremReport> {
    cfg.validate()?;
    if trials < MIN_TRIALS {
        return Err(Error::BadConfig(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let mut d_mmp = Vec::with_capacity(trials);
    let mut d_mcm = Vec::with_capacity(trials);
    let mut assumptions = None;
    for t in 0..trials {
        let world = generate_world(&trial_config(cfg, t))?;
        if assumptions.is_none() {
            assumptions = Some(check_assumptions(&world)?);
        }
        let s = score_world(&world, score_cfg)?;
        d_mmp.push(mean(&s.mmp_id) - mean(&s.mmp_ood));
        d_mcm.push(mean(&s.mcm_id) - mean(&s.mcm_ood));
    }
    let assumptions = assumptions.expect("at least one trial");
    let (delta_mmp, delta_mcm) = (mean(&d_mmp), mean(&d_mcm));
    let (stderr_mmp, stderr_mcm) = (stderr(&d_mmp), stderr(&d_mcm));
    let combined = (stderr_mmp * stderr_mmp + stderr_mcm * stderr_mcm).sqrt();
    Ok(TheoremReport {
        delta_mmp,
        delta_mcm,
        stderr_mmp,
        stderr_mcm,
        trials,
        tau: score_cfg.tau,
        assumptions,
        pass: delta_mmp >= delta_mcm - 2.0 * combined && assumptions.pass,
    })
}
