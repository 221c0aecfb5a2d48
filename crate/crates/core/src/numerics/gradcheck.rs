use alloc::vec::Vec;

use super::{Graph, Tensor, Var};
use crate::error::{bail, Result};

/// Denominator floor for the relative error. Gradients smaller than this
/// are compared absolutely, which keeps central-difference round-off on
/// near-zero coordinates from dominating the score.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

fn evaluate<F>(f: &F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: Fn(&mut Graph<'static, f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::detached();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let v = g.value(out);
    if v.len() != 1 {
        bail!(
            Shape,
            "grad check needs a scalar function, got {:?}",
            v.shape()
        );
    }
    Ok(v.data()[0])
}

/// Compares supplied gradients against central differences
/// `(f(x + eps) - f(x - eps)) / 2 eps`, coordinate by coordinate, and returns
/// the largest relative error.
pub fn grad_check_against<F>(
    f: F,
    inputs: &[Tensor<f64>],
    analytic: &[Vec<f64>],
    eps: f64,
) -> Result<f64>
where
    F: Fn(&mut Graph<'static, f64>, &[Var]) -> Result<Var>,
{
    if analytic.len() != inputs.len() {
        bail!(
            Shape,
            "{} gradients for {} inputs",
            analytic.len(),
            inputs.len()
        );
    }
    let mut worst = 0.0f64;
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        if analytic[i].len() != input.len() {
            bail!(
                Shape,
                "gradient {} has {} entries for {}",
                i,
                analytic[i].len(),
                input.len()
            );
        }
        for k in 0..input.len() {
            let x0 = input.data()[k];
            probe[i].data_mut()[k] = x0 + eps;
            let up = evaluate(&f, &probe)?;
            probe[i].data_mut()[k] = x0 - eps;
            let down = evaluate(&f, &probe)?;
            probe[i].data_mut()[k] = x0;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic[i][k], numeric));
        }
    }
    Ok(worst)
}

/// Analytic gradients of a scalar function with respect to each input.
pub fn analytic_grads<F>(f: &F, inputs: &[Tensor<f64>]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut Graph<'static, f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::detached();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward_leaves(out)?;
    Ok(vars
        .iter()
        .map(|&v| grads.get(v).map(<[f64]>::to_vec).unwrap_or_default())
        .collect())
}

/// Maximum relative error between the tape's backward pass and central
/// differences, evaluated at 64-bit precision.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<'static, f64>, &[Var]) -> Result<Var>,
{
    let analytic = analytic_grads(&f, inputs)?;
    grad_check_against(f, inputs, &analytic, eps)
}
