//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ulmfit_core::corpus::CleanProfile;
use ulmfit_core::lm::{Dropouts, LmConfig, Preset};
use ulmfit_core::transfer::{FineTunePlan, PlanStage, UnfreezePolicy};

use crate::error::{Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 5] = [5.0, 10.0, 20.0, 50.0, 80.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub preset: Preset,
    pub paths: Paths,
    pub data: DataConfig,
    pub lm: LmOverrides,
    pub finetune_lm: PlanConfig,
    pub classifier: PlanConfig,
    pub ablation: AblationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Labeled tweet CSV. Without one, a synthetic corpus is generated.
    pub corpus: Option<PathBuf>,
    /// General-domain text, one document per line. Defaults to the bundled
    /// corpus.
    pub general: Option<PathBuf>,
    /// Defaults to `<out>/checkpoints`.
    pub checkpoints: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub cleaning: CleanProfile,
    pub synthetic_count: usize,
    pub train_ratio: f64,
    pub stratified: bool,
    /// Percent of the training split whose labels the classifier sees.
    pub label_percent: f64,
    pub min_freq: usize,
    pub max_vocab: Option<usize>,
    /// Share of general-corpus lines held out for perplexity.
    pub heldout_fraction: f64,
    pub top_k: usize,
}

/// Per-field overrides of the preset's language-model settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmOverrides {
    pub emb_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub n_layers: Option<usize>,
    pub bptt_len: Option<usize>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub base_lr: Option<f64>,
    pub dropout_mult: Option<f64>,
    pub tie_weights: Option<bool>,
}

/// Overrides of a fine-tuning plan. Unset fields keep the stage default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub lr_max: Option<f64>,
    pub cut_frac: Option<f64>,
    pub ratio: Option<f64>,
    pub disc_factor: Option<f64>,
    pub epochs: Option<usize>,
    pub unfreeze: Option<UnfreezePolicy>,
    pub frozen_groups_initial: Option<usize>,
    pub batch_size: Option<usize>,
    pub dropout_mult: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub fractions: Vec<f64>,
    /// Classifier seeds; empty means the run seed only.
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            preset: Preset::Desk,
            paths: Paths::default(),
            data: DataConfig::default(),
            lm: LmOverrides::default(),
            finetune_lm: PlanConfig::default(),
            classifier: PlanConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: None,
            general: None,
            checkpoints: None,
            out: PathBuf::from("out"),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            cleaning: CleanProfile::Model,
            synthetic_count: 2000,
            train_ratio: 0.7,
            stratified: true,
            label_percent: 5.0,
            min_freq: 1,
            max_vocab: None,
            heldout_fraction: 0.05,
            top_k: 20,
        }
    }
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            seeds: Vec::new(),
        }
    }
}

fn check_percent(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::Core(ulmfit_core::Error::Config(format!(
            "{name} {p} outside (0, 100]"
        ))));
    }
    Ok(())
}

impl PlanConfig {
    fn apply(&self, mut plan: FineTunePlan) -> FineTunePlan {
        let s = &mut plan.stlr;
        if let Some(v) = self.lr_max {
            s.lr_max = v;
        }
        if let Some(v) = self.cut_frac {
            s.cut_frac = v;
        }
        if let Some(v) = self.ratio {
            s.ratio = v;
        }
        if let Some(v) = self.disc_factor {
            plan.disc_factor = v;
        }
        if let Some(v) = self.epochs {
            plan.epochs = v;
        }
        if let Some(v) = self.unfreeze {
            plan.unfreeze_policy = v;
        }
        if let Some(v) = self.frozen_groups_initial {
            plan.frozen_groups_initial = v;
        }
        if let Some(v) = self.batch_size {
            plan.batch_size = v;
        }
        if let Some(v) = self.dropout_mult {
            plan.dropout_mult = v;
        }
        plan
    }

    fn filled(plan: &FineTunePlan) -> PlanConfig {
        PlanConfig {
            lr_max: Some(plan.stlr.lr_max),
            cut_frac: Some(plan.stlr.cut_frac),
            ratio: Some(plan.stlr.ratio),
            disc_factor: Some(plan.disc_factor),
            epochs: Some(plan.epochs),
            unfreeze: Some(plan.unfreeze_policy),
            frozen_groups_initial: Some(plan.frozen_groups_initial),
            batch_size: Some(plan.batch_size),
            dropout_mult: Some(plan.dropout_mult),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| {
            Error::Core(ulmfit_core::Error::Config(format!(
                "config: {}",
                e.message()
            )))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config is always serializable")
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.paths
            .checkpoints
            .clone()
            .unwrap_or_else(|| self.paths.out.join("checkpoints"))
    }

    pub fn checkpoint_path(&self, name: &str) -> PathBuf {
        self.checkpoint_dir().join(format!("{name}.ckpt"))
    }

    pub fn ablation_seeds(&self) -> Vec<u64> {
        if self.ablation.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.ablation.seeds.clone()
        }
    }

    /// Language-model settings for a vocabulary of `vocab_size`.
    pub fn lm_config(&self, vocab_size: usize) -> LmConfig {
        let mut c = LmConfig::preset(self.preset, vocab_size);
        let o = &self.lm;
        c.emb_dim = o.emb_dim.unwrap_or(c.emb_dim);
        c.hidden_dim = o.hidden_dim.unwrap_or(c.hidden_dim);
        c.n_layers = o.n_layers.unwrap_or(c.n_layers);
        c.bptt_len = o.bptt_len.unwrap_or(c.bptt_len);
        c.batch_size = o.batch_size.unwrap_or(c.batch_size);
        c.epochs = o.epochs.unwrap_or(c.epochs);
        c.base_lr = o.base_lr.unwrap_or(c.base_lr);
        c.tie_weights = o.tie_weights.unwrap_or(c.tie_weights);
        c.dropouts = Dropouts::scaled(self.lm_dropout_mult());
        c
    }

    fn lm_dropout_mult(&self) -> f64 {
        self.lm
            .dropout_mult
            .unwrap_or_else(|| self.preset.dropout_mult())
    }

    fn n_layers(&self) -> usize {
        self.lm
            .n_layers
            .unwrap_or_else(|| LmConfig::preset(self.preset, 1).n_layers)
    }

    pub fn finetune_plan(&self) -> FineTunePlan {
        self.finetune_lm.apply(FineTunePlan::lm_finetune())
    }

    pub fn classifier_plan(&self) -> FineTunePlan {
        self.classifier
            .apply(FineTunePlan::classifier(self.n_layers()))
    }

    /// Every optional setting filled in with the value that will be used.
    pub fn resolved(&self) -> RunConfig {
        let mut r = self.clone();
        let lm = self.lm_config(1);
        r.lm = LmOverrides {
            emb_dim: Some(lm.emb_dim),
            hidden_dim: Some(lm.hidden_dim),
            n_layers: Some(lm.n_layers),
            bptt_len: Some(lm.bptt_len),
            batch_size: Some(lm.batch_size),
            epochs: Some(lm.epochs),
            base_lr: Some(lm.base_lr),
            dropout_mult: Some(self.lm_dropout_mult()),
            tie_weights: Some(lm.tie_weights),
        };
        r.finetune_lm = PlanConfig::filled(&self.finetune_plan());
        r.classifier = PlanConfig::filled(&self.classifier_plan());
        r.paths.checkpoints = Some(self.checkpoint_dir());
        r.ablation.seeds = self.ablation_seeds();
        r
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if !(d.train_ratio > 0.0 && d.train_ratio < 1.0) {
            return Err(Error::Core(ulmfit_core::Error::Config(format!(
                "train_ratio {} outside (0, 1)",
                d.train_ratio
            ))));
        }
        if !(0.0..1.0).contains(&d.heldout_fraction) {
            return Err(Error::Core(ulmfit_core::Error::Config(format!(
                "heldout_fraction {} outside [0, 1)",
                d.heldout_fraction
            ))));
        }
        check_percent("label_percent", d.label_percent)?;
        for &f in &self.ablation.fractions {
            check_percent("ablation fraction", f)?;
        }
        let lm = self.lm_config(8);
        lm.validate()?;
        let groups = lm.n_layers + 1;
        self.finetune_plan()
            .validate(PlanStage::LmFinetune, groups)?;
        self.classifier_plan()
            .validate(PlanStage::Classifier, groups)?;
        Ok(())
    }
}

/// Parses `5,10,20` into percentages.
pub fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            let v: f64 = p
                .parse()
                .map_err(|_| Error::Usage(format!("bad fraction `{p}` in --fractions")))?;
            check_percent("fraction", v)?;
            Ok(v)
        })
        .collect()
}
