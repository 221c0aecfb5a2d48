use alloc::vec;
use alloc::vec::Vec;

use super::{ParamGrads, ParamSet, Scalar};
use crate::error::{bail, Result};

/// Hyperparameters of the adaptive-moment optimizer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay, applied as `w -= lr * wd * w`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.7,
            beta2: 0.99,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Moment buffers and per-parameter step counts.
///
/// Step counts are per parameter so that a group unfrozen late starts its
/// bias correction from step one.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<S> {
    pub config: AdamConfig,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
    steps: Vec<u64>,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new(params: &ParamSet<S>, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .ids()
                .map(|id| vec![S::ZERO; params.get(id).len()])
                .collect()
        };
        OptimizerState {
            config,
            first: zeros(),
            second: zeros(),
            steps: vec![0; params.len()],
        }
    }

    pub fn steps(&self, index: usize) -> u64 {
        self.steps[index]
    }

    pub fn first_moment(&self, index: usize) -> &[S] {
        &self.first[index]
    }

    pub fn second_moment(&self, index: usize) -> &[S] {
        &self.second[index]
    }
}

/// One bias-corrected Adam update. `lrs[i]` is the step size for parameter
/// `i`; `None` leaves that parameter and its moments untouched (frozen).
pub fn adam_step<S: Scalar>(
    params: &mut ParamSet<S>,
    grads: &ParamGrads<S>,
    state: &mut OptimizerState<S>,
    lrs: &[Option<f64>],
) -> Result<()> {
    if lrs.len() != params.len() || grads.len() != params.len() || state.steps.len() != params.len()
    {
        bail!(Shape, "optimizer/parameter count mismatch");
    }
    for id in params.ids() {
        if lrs[id.0].is_some() && grads.get(id).iter().any(|g| !g.is_finite()) {
            bail!(
                Numerics,
                "non-finite gradient in parameter `{}`",
                params.name(id)
            );
        }
    }
    let AdamConfig {
        beta1,
        beta2,
        eps,
        weight_decay,
    } = state.config;
    for id in params.ids() {
        let Some(lr) = lrs[id.0] else { continue };
        let i = id.0;
        state.steps[i] += 1;
        let t = state.steps[i] as i32;
        let bc1 = 1.0 - libm::pow(beta1, t as f64);
        let bc2 = 1.0 - libm::pow(beta2, t as f64);
        let step = S::from_f64(lr / bc1);
        let inv_bc2 = S::from_f64(1.0 / bc2);
        let (b1, b2) = (S::from_f64(beta1), S::from_f64(beta2));
        let (one_b1, one_b2) = (S::from_f64(1.0 - beta1), S::from_f64(1.0 - beta2));
        let eps = S::from_f64(eps);
        let decay = S::from_f64(1.0 - lr * weight_decay);
        let w = params.get_mut(id).data_mut();
        let (m, v) = (&mut state.first[i], &mut state.second[i]);
        for (k, &g) in grads.get(id).iter().enumerate() {
            m[k] = b1 * m[k] + one_b1 * g;
            v[k] = b2 * v[k] + one_b2 * g * g;
            if weight_decay != 0.0 {
                w[k] *= decay;
            }
            w[k] -= step * m[k] / ((v[k] * inv_bc2).sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn scalar_problem(value: f64) -> (ParamSet<f64>, ParamGrads<f64>) {
        let mut p = ParamSet::new();
        p.add("w", Tensor::from_vec(&[1], vec![value]).unwrap())
            .unwrap();
        let g = p.zero_grads();
        (p, g)
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        let (mut p, mut g) = scalar_problem(0.0);
        g.get_mut(crate::numerics::ParamId(0))[0] = 1.0;
        let mut st = OptimizerState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut st, &[Some(0.1)]).unwrap();
        // m_hat = 1, v_hat = 1 -> delta = -0.1 / (1 + 1e-8)
        let w = p.get(crate::numerics::ParamId(0)).data()[0];
        assert!((w + 0.1).abs() < 1e-8, "{w}");
    }

    #[test]
    fn zero_grads_leave_params_and_decay_moments() {
        let (mut p, g) = scalar_problem(1.5);
        let mut st = OptimizerState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut st, &[Some(0.1)]).unwrap();
        assert_eq!(p.get(crate::numerics::ParamId(0)).data()[0], 1.5);

        let (mut p, mut g) = scalar_problem(0.0);
        g.get_mut(crate::numerics::ParamId(0))[0] = 1.0;
        adam_step(&mut p, &g, &mut st, &[Some(0.1)]).unwrap();
        let m1 = st.first_moment(0)[0];
        let v1 = st.second_moment(0)[0];
        let zero = p.zero_grads();
        adam_step(&mut p, &zero, &mut st, &[Some(0.1)]).unwrap();
        assert!((st.first_moment(0)[0] - 0.7 * m1).abs() < 1e-15);
        assert!((st.second_moment(0)[0] - 0.99 * v1).abs() < 1e-15);
    }

    #[test]
    fn frozen_parameters_are_untouched() {
        let (mut p, mut g) = scalar_problem(2.0);
        g.get_mut(crate::numerics::ParamId(0))[0] = 3.0;
        let mut st = OptimizerState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut st, &[None]).unwrap();
        assert_eq!(p.get(crate::numerics::ParamId(0)).data()[0], 2.0);
        assert_eq!(st.steps(0), 0);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let (mut p, mut g) = scalar_problem(2.0);
        g.get_mut(crate::numerics::ParamId(0))[0] = f64::NAN;
        let mut st = OptimizerState::new(&p, AdamConfig::default());
        let err = adam_step(&mut p, &g, &mut st, &[Some(0.1)]).unwrap_err();
        assert!(matches!(&err, crate::Error::Numerics(m) if m.contains("`w`")));
    }
}
