//! Evaluation metrics: FPR at a target TPR, AUROC, KS, top-1 accuracy,
//! modality gap and ECDF export.
//!
//! Throughout, ID is the positive class and higher scores mean "more ID".

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};

fn check_scores(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("score"));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Threshold `t` is the largest score with `#{id >= t} / n >= tpr_level`;
/// the returned FPR is `#{ood >= t} / m`.
pub fn fpr_at_tpr(id_scores: &[f64], ood_scores: &[f64], tpr_level: f64) -> Result<(f64, f64)> {
    check_scores(id_scores)?;
    check_scores(ood_scores)?;
    if !(tpr_level > 0.0 && tpr_level <= 1.0) {
        return Err(Error::BadConfig(format!("tpr level {tpr_level} not in (0, 1]")));
    }
    let n = id_scores.len();
    let frac = |k: usize| k as f64 / n as f64;
    // Smallest k with k/n >= tpr_level, evaluated with the same comparison
    // a direct count would use.
    let mut k = ((tpr_level * n as f64).ceil() as usize).clamp(1, n);
    while k > 1 && frac(k - 1) >= tpr_level {
        k -= 1;
    }
    while k < n && frac(k) < tpr_level {
        k += 1;
    }
    let mut desc = sorted(id_scores);
    desc.reverse();
    let threshold = desc[k - 1];
    let fp = ood_scores.iter().filter(|s| **s >= threshold).count();
    Ok((fp as f64 / ood_scores.len() as f64, threshold))
}

/// Probability that an ID score exceeds an OOD score, ties counted half.
///
/// Computed from mid-ranks of the pooled sample in O((n+m) log(n+m)).
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_scores(id_scores)?;
    check_scores(ood_scores)?;
    let n = id_scores.len();
    let m = ood_scores.len();
    let mut pooled: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|s| (*s, true))
        .chain(ood_scores.iter().map(|s| (*s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the ID rank sum, with 1-based mid-ranks for tie groups.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let ids = pooled[i..=j].iter().filter(|p| p.1).count() as u128;
        twice_rank_sum += twice_mid * ids;
        i = j + 1;
    }
    let n128 = n as u128;
    let twice_u = twice_rank_sum - n128 * (n128 + 1);
    Ok(twice_u as f64 / 2.0 / (n as f64 * m as f64))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_id(x) - F_ood(x)|`.
pub fn ks_statistic(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_scores(id_scores)?;
    check_scores(ood_scores)?;
    let a = sorted(id_scores);
    let b = sorted(ood_scores);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.min(*q),
            (Some(p), None) => *p,
            (None, Some(q)) => *q,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(best)
}

pub fn top1_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `‖mean(a) − mean(b)‖₂`.
pub fn modality_gap_norm(set_a: &[Vec<f64>], set_b: &[Vec<f64>]) -> Result<f64> {
    let first = set_a.first().ok_or(Error::EmptyInput)?;
    let dim = first.len();
    if let Some(b0) = set_b.first() {
        check_dim(dim, b0.len())?;
    }
    let ma = linalg::mean_of(set_a.iter().map(Vec::as_slice), dim)?;
    let mb = linalg::mean_of(set_b.iter().map(Vec::as_slice), dim)?;
    let diff: Vec<f64> = ma.iter().zip(&mb).map(|(x, y)| x - y).collect();
    Ok(norm(&diff))
}

/// `(value, F(value))` at each distinct score, ascending.
pub fn ecdf(scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_scores(scores)?;
    let s = sorted(scores);
    let n = s.len() as f64;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (i, x) in s.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match rows.last_mut() {
            Some(last) if last.0 == *x => last.1 = f,
            _ => rows.push((*x, f)),
        }
    }
    Ok(rows)
}

pub fn write_ecdf_csv<W: Write>(scores: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["score", "cumulative"])?;
    for (x, f) in ecdf(scores)? {
        w.write_record([x.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn ecdf_export(scores: &[f64], path: impl AsRef<std::path::Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_ecdf_csv(scores, f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fpr95: f64,
    pub auroc: f64,
    pub ks: f64,
    pub top1: Option<f64>,
    pub gap_norm: Option<f64>,
    pub threshold_used: f64,
}

pub fn evaluate(id_scores: &[f64], ood_scores: &[f64]) -> Result<EvalReport> {
    let (fpr95, threshold_used) = fpr_at_tpr(id_scores, ood_scores, 0.95)?;
    Ok(EvalReport {
        fpr95,
        auroc: auroc(id_scores, ood_scores)?,
        ks: ks_statistic(id_scores, ood_scores)?,
        top1: None,
        gap_norm: None,
        threshold_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fpr_examples() {
        let (fpr, _) = fpr_at_tpr(&[0.9, 0.8], &[0.1, 0.2], 0.95).unwrap();
        assert_eq!(fpr, 0.0);
        let (fpr, t) =
            fpr_at_tpr(&[0.9, 0.8, 0.7, 0.6], &[0.75, 0.65, 0.55, 0.45], 0.95).unwrap();
        assert_eq!((fpr, t), (0.5, 0.6));
        let same = [0.9, 0.8, 0.7, 0.6];
        let (fpr, t) = fpr_at_tpr(&same, &same, 0.95).unwrap();
        assert_eq!((fpr, t), (1.0, 0.6));
        assert!(matches!(fpr_at_tpr(&[], &[0.1], 0.95), Err(Error::EmptyInput)));
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.9, 0.6], &[0.7, 0.4]).unwrap(), 0.75);
        assert!(auroc(&[0.1], &[]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.8, 0.9], &[0.1, 0.2, 0.3]).unwrap(), 1.0);
        let k = ks_statistic(&[0.1, 0.2, 0.3], &[0.25, 0.35, 0.45]).unwrap();
        assert!((k - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn top1_examples() {
        assert_eq!(top1_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(top1_accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(top1_accuracy(&[0, 1, 2, 3], &[0, 1, 2, 0]).unwrap(), 0.75);
        assert!(matches!(top1_accuracy(&[0], &[0, 1]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(top1_accuracy(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn gap_examples() {
        let a = vec![vec![1.0, 0.0], vec![0.5, 0.5]];
        assert_eq!(modality_gap_norm(&a, &a).unwrap(), 0.0);
        let g = modality_gap_norm(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]]).unwrap();
        assert!((g - 2f64.sqrt()).abs() < 1e-15);
        let rev: Vec<_> = a.iter().rev().cloned().collect();
        assert_eq!(
            modality_gap_norm(&a, &[vec![0.0, 0.0]]).unwrap(),
            modality_gap_norm(&rev, &[vec![0.0, 0.0]]).unwrap()
        );
        assert!(matches!(
            modality_gap_norm(&[vec![1.0]], &[vec![1.0, 2.0]]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(modality_gap_norm(&[], &[vec![1.0]]).is_err());
    }

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf(&[0.5]).unwrap(), vec![(0.5, 1.0)]);
        assert_eq!(ecdf(&[0.2, 0.1]).unwrap(), vec![(0.1, 0.5), (0.2, 1.0)]);
        assert_eq!(ecdf(&[0.3, 0.3, 0.6]).unwrap(), vec![(0.3, 2.0 / 3.0), (0.6, 1.0)]);
        let mut buf = Vec::new();
        write_ecdf_csv(&[0.2, 0.1], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "score,cumulative\n0.1,0.5\n0.2,1\n");
    }
}
