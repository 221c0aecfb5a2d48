use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::lm::{param_names, LmConfig};
use crate::numerics::ParamSet;

/// Ordered parameter groups, index 0 the deepest (embedding and first
/// layer), the last one the head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerGroups {
    groups: Vec<Vec<String>>,
}

/// Which head sits on top of the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Decoder,
    Classifier,
}

impl LayerGroups {
    /// `n_layers + 1` groups: `{embedding, layer 0}`, `{layer 1}`, ...,
    /// `{head}`.
    pub fn new(config: &LmConfig, head: HeadKind) -> LayerGroups {
        let mut groups: Vec<Vec<String>> = (0..config.n_layers).map(layer_names).collect();
        groups[0].insert(0, String::from(param_names::EMBEDDING));
        groups.push(match head {
            HeadKind::Decoder => {
                let mut v = alloc::vec![String::from(param_names::DECODER_BIAS)];
                if !config.tie_weights {
                    v.push(String::from(param_names::DECODER_WEIGHT));
                }
                v
            }
            HeadKind::Classifier => param_names::HEAD.iter().map(|s| String::from(*s)).collect(),
        });
        LayerGroups { groups }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn names(&self, group: usize) -> &[String] {
        &self.groups[group]
    }

    pub fn group_of(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.iter().any(|n| n == name))
    }

    /// Group index of every parameter in `params`, checking that the groups
    /// partition the parameter names exactly.
    pub fn assign<S>(&self, params: &ParamSet<S>) -> Result<Vec<usize>>
    where
        S: crate::numerics::Scalar,
    {
        let mut out = Vec::with_capacity(params.len());
        for (name, _) in params.iter() {
            match self.group_of(name) {
                Some(g) => out.push(g),
                None => bail!(Config, "parameter `{}` belongs to no layer group", name),
            }
        }
        let listed: usize = self.groups.iter().map(Vec::len).sum();
        if listed != params.len() {
            bail!(
                Config,
                "layer groups list {} names for {} parameters",
                listed,
                params.len()
            );
        }
        Ok(out)
    }
}

fn layer_names(l: usize) -> Vec<String> {
    alloc::vec![
        param_names::w_ih(l),
        param_names::w_hh(l),
        param_names::bias(l)
    ]
}

/// When frozen groups become trainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfreezePolicy {
    /// The initial frozen set holds for the whole run.
    AllAtOnce,
    /// One more group, counted from the head, becomes trainable each epoch.
    Gradual,
}

impl UnfreezePolicy {
    /// Number of deepest groups frozen during epoch `epoch` (0-based).
    pub fn frozen_at(self, frozen_initial: usize, epoch: usize) -> usize {
        match self {
            UnfreezePolicy::AllAtOnce => frozen_initial,
            UnfreezePolicy::Gradual => frozen_initial.saturating_sub(epoch),
        }
    }
}
