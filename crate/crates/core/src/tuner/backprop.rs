//! Forward pass of the full tuning objective with hand-derived reverse-mode
//! gradients for every parameter block.
//!
//! Per image `I` with label `y` and the batch-shared bias draw `b`:
//!
//! ```text
//! m    = W2m · relu(W1m · I + b1m) + b2m
//! P_c  = f_text([V_k + (m + b)]_k ++ [y_c])
//! J    = W_it · I,   Q_c = W_ti · P_c
//! l_id    = CE(cos(I, P) / τ, y)
//! l_inter = CE(cos(I, Q) / τ, y) + CE(cos(J, P) / τ, y)
//! l_intra = ‖I − W_ti J‖₁ + Σ_c ‖P_c − W_it Q_c‖₁
//! l_bias  = ‖μ − m‖₁ + ‖b − m‖₁
//! total   = l_id + α (l_intra + l_inter) + β l_bias
//! ```
//!
//! Gradients reach `σ` through `b = μ + σ ⊙ noise`. The ℓ₁ terms use
//! `sign(0) = 0`.

use crate::encoder::{ClassTokenTable, DifferentiableEncoder, TokenSequence};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, cosine_grads, cross_entropy, sign, softmax};

use super::ops::{build_idbp, meta_forward, sample_bias};
use super::params::TunerParams;
use super::LossBreakdown;

/// Loss weights and temperature of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
}

/// One labeled training image.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub label: usize,
    pub image: &'a [f64],
}

#[derive(Default, Clone, Copy)]
struct Parts {
    id: f64,
    inter: f64,
    intra: f64,
    bias: f64,
}

fn image_step<E: DifferentiableEncoder>(
    sample: Sample<'_>,
    params: &TunerParams,
    encoder: &E,
    class_tokens: &ClassTokenTable,
    w: &LossWeights,
    bias: &[f64],
    noise: &[f64],
    grads: Option<(&mut TunerParams, f64)>,
) -> Result<Parts> {
    let img = sample.image;
    let classes = class_tokens.len();
    let y = sample.label;
    if y >= classes {
        return Err(Error::BadClass { class: y, classes });
    }
    let tau = w.tau;

    let meta = meta_forward(img, params)?;
    let m = &meta.out;
    let seqs = (0..classes)
        .map(|c| build_idbp(&params.context, m, bias, class_tokens.token(c)))
        .collect::<Result<Vec<TokenSequence>>>()?;
    let protos = seqs
        .iter()
        .map(|s| encoder.encode(s))
        .collect::<Result<Vec<_>>>()?;
    check_dim(img.len(), protos[0].len())?;

    let id_cos: Vec<_> = protos.iter().map(|p| cosine_grads(img, p)).collect();
    let id_logits: Vec<f64> = id_cos.iter().map(|c| c.0 / tau).collect();

    let q: Vec<Vec<f64>> = protos
        .iter()
        .map(|p| params.w_ti.matvec(p))
        .collect::<Result<_>>()?;
    let q_cos: Vec<_> = q.iter().map(|qc| cosine_grads(img, qc)).collect();
    let q_logits: Vec<f64> = q_cos.iter().map(|c| c.0 / tau).collect();

    let j = params.w_it.matvec(img)?;
    let j_cos: Vec<_> = protos.iter().map(|p| cosine_grads(&j, p)).collect();
    let j_logits: Vec<f64> = j_cos.iter().map(|c| c.0 / tau).collect();

    let back_img = params.w_ti.matvec(&j)?;
    let r_img: Vec<f64> = img.iter().zip(&back_img).map(|(a, b)| a - b).collect();
    let r_protos: Vec<Vec<f64>> = protos
        .iter()
        .zip(&q)
        .map(|(p, qc)| {
            let u = params.w_it.matvec(qc)?;
            Ok(p.iter().zip(&u).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_>>()?;

    let d_mu: Vec<f64> = params.mu.iter().zip(m).map(|(a, b)| a - b).collect();
    let d_b: Vec<f64> = bias.iter().zip(m).map(|(a, b)| a - b).collect();

    let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
    let parts = Parts {
        id: cross_entropy(&id_logits, y),
        inter: cross_entropy(&q_logits, y) + cross_entropy(&j_logits, y),
        intra: l1(&r_img) + r_protos.iter().map(|r| l1(r)).sum::<f64>(),
        bias: l1(&d_mu) + l1(&d_b),
    };

    let Some((g, scale)) = grads else {
        return Ok(parts);
    };

    let d = img.len();
    let n_lm = params.mu.len();
    let mut g_p = vec![vec![0.0; d]; classes];
    let mut g_j = vec![0.0; d];
    let delta = |c: usize| if c == y { 1.0 } else { 0.0 };

    // l_id
    let p_id = softmax(&id_logits);
    for c in 0..classes {
        let gc = scale * (p_id[c] - delta(c)) / tau;
        axpy(&mut g_p[c], gc, &id_cos[c].2);
    }

    // l_inter, first term: cos(I, W_ti P_c)
    let p_q = softmax(&q_logits);
    for c in 0..classes {
        let gc = scale * w.alpha * (p_q[c] - delta(c)) / tau;
        let g_q: Vec<f64> = q_cos[c].2.iter().map(|x| gc * x).collect();
        g.w_ti.add_outer(1.0, &g_q, &protos[c]);
        axpy(&mut g_p[c], 1.0, &params.w_ti.matvec_t(&g_q)?);
    }

    // l_inter, second term: cos(W_it I, P_c)
    let p_j = softmax(&j_logits);
    for c in 0..classes {
        let gc = scale * w.alpha * (p_j[c] - delta(c)) / tau;
        axpy(&mut g_j, gc, &j_cos[c].1);
        axpy(&mut g_p[c], gc, &j_cos[c].2);
    }

    // l_intra, image side: r = I − W_ti J
    let s_img: Vec<f64> = r_img.iter().map(|r| scale * w.alpha * sign(*r)).collect();
    g.w_ti.add_outer(-1.0, &s_img, &j);
    axpy(&mut g_j, -1.0, &params.w_ti.matvec_t(&s_img)?);

    // l_intra, text side: r_c = P_c − W_it Q_c
    for c in 0..classes {
        let s_c: Vec<f64> = r_protos[c]
            .iter()
            .map(|r| scale * w.alpha * sign(*r))
            .collect();
        axpy(&mut g_p[c], 1.0, &s_c);
        g.w_it.add_outer(-1.0, &s_c, &q[c]);
        let g_q: Vec<f64> = params.w_it.matvec_t(&s_c)?.into_iter().map(|x| -x).collect();
        g.w_ti.add_outer(1.0, &g_q, &protos[c]);
        axpy(&mut g_p[c], 1.0, &params.w_ti.matvec_t(&g_q)?);
    }

    // J = W_it I
    g.w_it.add_outer(1.0, &g_j, img);

    // Through the frozen encoder into context tokens and the shared shift m + b.
    let mut g_shift = vec![0.0; n_lm];
    let context_len = params.context.rows();
    for c in 0..classes {
        let token_grads = encoder.encode_vjp(&seqs[c], &g_p[c])?;
        for (k, tg) in token_grads.iter().take(context_len).enumerate() {
            let row = &mut g.context.as_mut_slice()[k * n_lm..(k + 1) * n_lm];
            axpy(row, 1.0, tg);
            axpy(&mut g_shift, 1.0, tg);
        }
    }

    // l_bias
    let mut g_m = g_shift.clone();
    let mut g_b = g_shift;
    for i in 0..n_lm {
        let s_mu = scale * w.beta * sign(d_mu[i]);
        let s_b = scale * w.beta * sign(d_b[i]);
        g.mu[i] += s_mu;
        g_m[i] -= s_mu + s_b;
        g_b[i] += s_b;
    }

    // b = μ + σ ⊙ noise
    for i in 0..n_lm {
        g.mu[i] += g_b[i];
        g.sigma[i] += g_b[i] * noise[i];
    }

    // Meta-net.
    g.meta_w2.add_outer(1.0, &g_m, &meta.hidden);
    axpy(&mut g.meta_b2, 1.0, &g_m);
    let g_hidden = params.meta_w2.matvec_t(&g_m)?;
    let g_pre: Vec<f64> = g_hidden
        .iter()
        .zip(&meta.pre)
        .map(|(gh, z)| if *z > 0.0 { *gh } else { 0.0 })
        .collect();
    g.meta_w1.add_outer(1.0, &g_pre, img);
    axpy(&mut g.meta_b1, 1.0, &g_pre);

    Ok(parts)
}

fn run<E: DifferentiableEncoder>(
    batch: &[Sample<'_>],
    params: &TunerParams,
    encoder: &E,
    class_tokens: &ClassTokenTable,
    weights: &LossWeights,
    noise: &[f64],
    mut grads: Option<&mut TunerParams>,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_dim(params.mu.len(), encoder.token_dim())?;
    check_dim(params.w_it.rows(), encoder.output_dim())?;
    check_dim(params.mu.len(), noise.len())?;
    let bias = sample_bias(&params.mu, &params.sigma, noise)?;
    let scale = 1.0 / batch.len() as f64;
    let mut sum = Parts::default();
    for s in batch {
        check_dim(params.w_it.cols(), s.image.len())?;
        let g = grads.as_deref_mut().map(|g| (g, scale));
        let p = image_step(*s, params, encoder, class_tokens, weights, &bias, noise, g)?;
        sum.id += p.id;
        sum.inter += p.inter;
        sum.intra += p.intra;
        sum.bias += p.bias;
    }
    Ok(LossBreakdown::combine(
        sum.id * scale,
        sum.inter * scale,
        sum.intra * scale,
        sum.bias * scale,
        weights.alpha,
        weights.beta,
    ))
}

/// Batch-mean loss breakdown and its exact gradient with respect to every
/// parameter block. `noise` is the single standard-normal draw shared by the
/// batch.
pub fn forward_backward<E: DifferentiableEncoder>(
    batch: &[Sample<'_>],
    params: &TunerParams,
    encoder: &E,
    class_tokens: &ClassTokenTable,
    weights: &LossWeights,
    noise: &[f64],
) -> Result<(LossBreakdown, TunerParams)> {
    let mut grads = TunerParams::zeros(&params.dims());
    let loss = run(batch, params, encoder, class_tokens, weights, noise, Some(&mut grads))?;
    Ok((loss, grads))
}

/// Forward pass only.
pub fn batch_loss<E: DifferentiableEncoder>(
    batch: &[Sample<'_>],
    params: &TunerParams,
    encoder: &E,
    class_tokens: &ClassTokenTable,
    weights: &LossWeights,
    noise: &[f64],
) -> Result<LossBreakdown> {
    run(batch, params, encoder, class_tokens, weights, noise, None)
}
