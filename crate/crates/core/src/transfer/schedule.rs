use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Slanted triangular learning-rate schedule over `total_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StlrConfig {
    pub lr_max: f64,
    pub cut_frac: f64,
    pub ratio: f64,
    pub total_steps: usize,
}

impl StlrConfig {
    pub fn new(lr_max: f64, total_steps: usize) -> StlrConfig {
        StlrConfig {
            lr_max,
            cut_frac: 0.1,
            ratio: 32.0,
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_max > 0.0 && self.lr_max.is_finite()) {
            bail!(
                Config,
                "lr_max must be positive and finite, got {}",
                self.lr_max
            );
        }
        if !(self.cut_frac > 0.0 && self.cut_frac < 1.0) {
            bail!(Config, "cut_frac {} outside (0, 1)", self.cut_frac);
        }
        if !(self.ratio > 1.0) {
            bail!(Config, "ratio must exceed 1, got {}", self.ratio);
        }
        Ok(())
    }

    /// Step of the peak, `floor(cut_frac * T)`, raised to 1 so the warm-up
    /// never divides by zero on very short runs.
    pub fn cut(&self) -> usize {
        ((self.cut_frac * self.total_steps as f64) as usize).max(1)
    }

    /// Learning rate at step `t`, `0 <= t <= T`.
    pub fn lr(&self, t: usize) -> Result<f64> {
        self.validate()?;
        if t > self.total_steps {
            bail!(Config, "step {} outside [0, {}]", t, self.total_steps);
        }
        let cut = self.cut() as f64;
        let t = t as f64;
        let p = if t < cut {
            t / cut
        } else {
            1.0 - (t - cut) / (cut * (1.0 / self.cut_frac - 1.0))
        };
        // Rounding cut down can push the last steps a hair past the floor.
        let p = p.max(0.0);
        Ok(self.lr_max * (1.0 + p * (self.ratio - 1.0)) / self.ratio)
    }
}

/// Free-function form of [`StlrConfig::lr`].
pub fn stlr(t: usize, cfg: &StlrConfig) -> Result<f64> {
    cfg.lr(t)
}

/// `[base, base / factor, base / factor^2, ...]`, head first.
pub fn discriminative_lrs(base_lr: f64, n_groups: usize, factor: f64) -> Result<Vec<f64>> {
    if n_groups < 1 {
        bail!(Config, "need at least one layer group");
    }
    if !(factor > 1.0 && factor.is_finite()) {
        bail!(
            Config,
            "discriminative factor must exceed 1, got {}",
            factor
        );
    }
    if !(base_lr > 0.0 && base_lr.is_finite()) {
        bail!(
            Config,
            "base learning rate must be positive, got {}",
            base_lr
        );
    }
    let mut out = Vec::with_capacity(n_groups);
    let mut lr = base_lr;
    for _ in 0..n_groups {
        out.push(lr);
        lr /= factor;
    }
    Ok(out)
}

/// How the base learning rate evolves over a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    Constant { lr: f64 },
    Slanted(StlrConfig),
}

impl Schedule {
    pub fn lr(&self, t: usize) -> Result<f64> {
        match self {
            Schedule::Constant { lr } => {
                if !(*lr > 0.0) {
                    bail!(Config, "learning rate must be positive, got {}", lr);
                }
                Ok(*lr)
            }
            Schedule::Slanted(cfg) => cfg.lr(t),
        }
    }
}
