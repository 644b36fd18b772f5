use crate::error::{check_dim, Error, Result};

use super::params::{ParamGroup, TunerParams};

/// Classical momentum on flat slices: `v ← momentum·v + g; p ← p − lr·v`.
pub fn sgd_update(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    check_dim(params.len(), grads.len())?;
    check_dim(params.len(), velocity.len())?;
    let new_v: Vec<f64> = velocity
        .iter()
        .zip(grads)
        .map(|(v, g)| momentum * v + g)
        .collect();
    let new_p: Vec<f64> = params.iter().zip(&new_v).map(|(p, v)| p - lr * v).collect();
    if new_v.iter().chain(&new_p).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("sgd update"));
    }
    velocity.copy_from_slice(&new_v);
    params.copy_from_slice(&new_p);
    Ok(())
}

/// Applies [`sgd_update`] to every block. On error nothing is modified.
pub fn sgd_step(
    params: &mut TunerParams,
    grads: &TunerParams,
    velocity: &mut TunerParams,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    let mut p = params.clone();
    let mut v = velocity.clone();
    for g in ParamGroup::ALL {
        sgd_update(p.group_mut(g), grads.group(g), v.group_mut(g), lr, momentum)?;
    }
    *params = p;
    *velocity = v;
    Ok(())
}
