//! Forward building blocks of the tuning objective.

use crate::encoder::TokenSequence;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{cosine, cross_entropy, l1_norm, Matrix};

use super::params::TunerParams;

/// Reparameterized draw `b = μ + σ ⊙ noise`.
pub fn sample_bias(mu: &[f64], sigma: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    check_dim(mu.len(), sigma.len())?;
    check_dim(mu.len(), noise.len())?;
    Ok(mu
        .iter()
        .zip(sigma)
        .zip(noise)
        .map(|((m, s), n)| m + s * n)
        .collect())
}

pub(crate) struct MetaForward {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) fn meta_forward(image: &[f64], params: &TunerParams) -> Result<MetaForward> {
    let mut pre = params.meta_w1.matvec(image)?;
    for (p, b) in pre.iter_mut().zip(&params.meta_b1) {
        *p += b;
    }
    let hidden: Vec<f64> = pre.iter().map(|x| x.max(0.0)).collect();
    let mut out = params.meta_w2.matvec(&hidden)?;
    for (o, b) in out.iter_mut().zip(&params.meta_b2) {
        *o += b;
    }
    Ok(MetaForward { pre, hidden, out })
}

/// Linear-ReLU-Linear conditioning network `m(I)`.
pub fn meta_net(image: &[f64], params: &TunerParams) -> Result<Vec<f64>> {
    Ok(meta_forward(image, params)?.out)
}

/// `[V₁ + m(I) + b, …, V_L + m(I) + b, class_token]`.
pub fn build_idbp(
    context: &Matrix,
    conditioning: &[f64],
    bias: &[f64],
    class_token: &[f64],
) -> Result<TokenSequence> {
    let n = context.cols();
    check_dim(n, conditioning.len())?;
    check_dim(n, bias.len())?;
    check_dim(n, class_token.len())?;
    let mut tokens: Vec<Vec<f64>> = (0..context.rows())
        .map(|k| {
            context
                .row(k)
                .iter()
                .zip(conditioning)
                .zip(bias)
                .map(|((v, m), b)| v + (m + b))
                .collect()
        })
        .collect();
    tokens.push(class_token.to_vec());
    TokenSequence::new(tokens)
}

fn check_class(class: usize, classes: usize) -> Result<()> {
    if class < classes {
        Ok(())
    } else {
        Err(Error::BadClass { class, classes })
    }
}

fn ce_over(anchor: &[f64], others: &[Vec<f64>], class: usize, tau: f64) -> Result<f64> {
    let logits = others
        .iter()
        .map(|p| Ok(cosine(anchor, p)? / tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(cross_entropy(&logits, class))
}

/// Prompt classification cross-entropy over cosine logits.
pub fn loss_id(image: &[f64], prototypes: &[Vec<f64>], class: usize, tau: f64) -> Result<f64> {
    check_class(class, prototypes.len())?;
    ce_over(image, prototypes, class, tau)
}

/// Cross-entropy of `I` against text-to-image mapped prototypes plus
/// cross-entropy of the image-to-text mapped `I` against the prototypes.
pub fn loss_inter(
    image: &[f64],
    prototypes: &[Vec<f64>],
    class: usize,
    w_it: &Matrix,
    w_ti: &Matrix,
    tau: f64,
) -> Result<f64> {
    check_class(class, prototypes.len())?;
    let mapped_protos = prototypes
        .iter()
        .map(|p| w_ti.matvec(p))
        .collect::<Result<Vec<_>>>()?;
    let mapped_image = w_it.matvec(image)?;
    Ok(ce_over(image, &mapped_protos, class, tau)? + ce_over(&mapped_image, prototypes, class, tau)?)
}

/// ℓ₁ reconstruction error of each vector after a round trip through both maps.
pub fn loss_intra(image: &[f64], prototypes: &[Vec<f64>], w_it: &Matrix, w_ti: &Matrix) -> Result<f64> {
    let back = w_ti.matvec(&w_it.matvec(image)?)?;
    let mut total = l1_diff(image, &back);
    for p in prototypes {
        let back = w_it.matvec(&w_ti.matvec(p)?)?;
        total += l1_diff(p, &back);
    }
    Ok(total)
}

/// `‖μ − m(I)‖₁ + ‖b − m(I)‖₁`.
pub fn loss_bias(mu: &[f64], bias: &[f64], conditioning: &[f64]) -> Result<f64> {
    check_dim(mu.len(), conditioning.len())?;
    check_dim(bias.len(), conditioning.len())?;
    Ok(l1_diff(mu, conditioning) + l1_diff(bias, conditioning))
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l1_norm(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuner::params::TunerDims;

    #[test]
    fn bias_sampling() {
        assert_eq!(sample_bias(&[1.0, -2.0], &[0.3, 0.3], &[0.0, 0.0]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(sample_bias(&[1.0], &[2.0], &[0.5]).unwrap(), vec![2.0]);
        assert_eq!(sample_bias(&[1.5], &[0.0], &[123.0]).unwrap(), vec![1.5]);
        assert!(sample_bias(&[1.0], &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn meta_net_cases() {
        let dims = TunerDims::new(4, 3, 1);
        let mut p = TunerParams::zeros(&dims);
        assert_eq!(meta_net(&[1.0, 2.0, 3.0, 4.0], &p).unwrap(), vec![0.0; 3]);

        p.meta_w1.as_mut_slice().fill(-1.0);
        p.meta_w2.as_mut_slice().fill(5.0);
        p.meta_b2 = vec![0.1, 0.2, 0.3];
        assert_eq!(meta_net(&[1.0, 1.0, 1.0, 1.0], &p).unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(meta_net(&[1.0], &p).is_err());
    }

    #[test]
    fn meta_net_matches_scalar_loops() {
        let dims = TunerDims::new(5, 3, 1);
        let mut p = TunerParams::init(&dims, 2).unwrap();
        p.meta_b1 = vec![0.1, -0.2, 0.05, 0.3];
        p.meta_b2 = vec![-0.1, 0.0, 0.4];
        let x = [0.7, -0.3, 1.1, 0.0, -0.8];
        let mut want = vec![0.0; 3];
        for (o, w) in want.iter_mut().enumerate() {
            let mut acc = p.meta_b2[o];
            for j in 0..dims.meta_hidden {
                let mut z = p.meta_b1[j];
                for (i, xi) in x.iter().enumerate() {
                    z += p.meta_w1.get(j, i) * xi;
                }
                acc += p.meta_w2.get(o, j) * if z > 0.0 { z } else { 0.0 };
            }
            *w = acc;
        }
        let got = meta_net(&x, &p).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn idbp_tokens() {
        let v = Matrix::from_rows(1, 2, vec![1.0, 2.0]).unwrap();
        let seq = build_idbp(&v, &[0.5, 0.5], &[0.1, -0.1], &[9.0, 9.0]).unwrap();
        assert!((seq.tokens()[0][0] - 1.6).abs() < 1e-15);
        assert!((seq.tokens()[0][1] - 2.4).abs() < 1e-15);
        assert_eq!(seq.tokens()[1], vec![9.0, 9.0]);

        let plain = build_idbp(&v, &[0.0, 0.0], &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(plain.tokens(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);

        let a = build_idbp(&v, &[0.3, 0.1], &[0.2, 0.7], &[0.0, 1.0]).unwrap();
        let b = build_idbp(&v, &[0.2, 0.7], &[0.3, 0.1], &[0.0, 1.0]).unwrap();
        assert_eq!(a, b);
        assert!(build_idbp(&v, &[0.0], &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    fn with_cosines(cos: &[f64]) -> Vec<Vec<f64>> {
        cos.iter().map(|c| vec![*c, (1.0 - c * c).sqrt()]).collect()
    }

    #[test]
    fn id_loss_examples() {
        let p = with_cosines(&[0.8, 0.2]);
        let l = loss_id(&[1.0, 0.0], &p, 0, 1.0).unwrap();
        let want = (1.0 + (0.2f64 - 0.8).exp()).ln();
        assert!((l - want).abs() < 1e-12);
        assert!((l - 0.43749).abs() < 5e-6);
        assert_eq!(loss_id(&[1.0, 0.0], &with_cosines(&[0.3]), 0, 1.0).unwrap(), 0.0);
        let uniform = loss_id(&[1.0, 0.0], &with_cosines(&[0.5, 0.5, 0.5]), 2, 0.01).unwrap();
        assert!((uniform - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(loss_id(&[1.0, 0.0], &p, 2, 1.0), Err(Error::BadClass { .. })));
    }

    #[test]
    fn inter_loss_examples() {
        let id = Matrix::identity(2);
        let p = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let l = loss_inter(&[1.0, 0.0], &p, 0, &id, &id, 1.0).unwrap();
        let want = 2.0 * (1.0 + (-1f64).exp()).ln();
        assert!((l - want).abs() < 1e-12);
        assert!((l - 0.62652).abs() < 5e-6);
        assert_eq!(loss_inter(&[1.0, 0.0], &p[..1], 0, &id, &id, 1.0).unwrap(), 0.0);

        let w = Matrix::from_rows(2, 2, vec![0.9, 0.2, -0.1, 1.1]).unwrap();
        let three = with_cosines(&[0.9, 0.1, -0.4]);
        let swapped = vec![three[0].clone(), three[2].clone(), three[1].clone()];
        let a = loss_inter(&[0.6, 0.8], &three, 0, &w, &id, 0.5).unwrap();
        let b = loss_inter(&[0.6, 0.8], &swapped, 0, &w, &id, 0.5).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn intra_loss_examples() {
        let id = Matrix::identity(2);
        let p = vec![vec![0.3, 0.4], vec![1.0, -2.0]];
        assert_eq!(loss_intra(&[0.5, 0.5], &p, &id, &id).unwrap(), 0.0);

        // Both round trips are diag(0.9, 1.1): image [1,1] leaves residual
        // [0.1,-0.1] and prototype [0,5] leaves residual [0,-0.5].
        let w_it = Matrix::from_rows(2, 2, vec![0.9, 0.0, 0.0, 1.1]).unwrap();
        let w_ti = Matrix::identity(2);
        let l = loss_intra(&[1.0, 1.0], &[vec![0.0, 5.0]], &w_it, &w_ti).unwrap();
        assert!((l - 0.7).abs() < 1e-12);

        let rev: Vec<_> = p.iter().rev().cloned().collect();
        assert_eq!(
            loss_intra(&[0.5, 0.1], &p, &w_it, &w_ti).unwrap(),
            loss_intra(&[0.5, 0.1], &rev, &w_it, &w_ti).unwrap()
        );
    }

    #[test]
    fn bias_loss_examples() {
        assert_eq!(loss_bias(&[0.2, 0.1], &[0.2, 0.1], &[0.2, 0.1]).unwrap(), 0.0);
        assert_eq!(loss_bias(&[0.0, 0.0], &[0.5, 0.5], &[1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(
            loss_bias(&[0.0, 0.0], &[0.5, 0.5], &[1.0, 1.0]).unwrap(),
            loss_bias(&[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0]).unwrap()
        );
    }
}
