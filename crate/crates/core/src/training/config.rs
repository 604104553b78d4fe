use serde::{Deserialize, Serialize};

use crate::model::ModelDims;

/// Training hyperparameters. Every field has a desk-scale default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Halve the learning rate whenever dev cross-entropy fails to improve.
    pub lr_halving: bool,
    pub batch_size: usize,
    /// Minibatches per length-sorted window.
    pub sort_window: usize,
    pub clip_threshold: f64,
    /// Weight noise stddev; 0 disables.
    pub noise_stddev: f64,
    /// Output-layer dropout probability; 0 disables.
    pub dropout_p: f64,
    /// Monolingual dummy-source instances per parallel instance.
    pub mono_ratio: f64,
    /// Synthetic pairs drawn per epoch; `None` uses the whole pool.
    pub synthetic_cap: Option<usize>,
    pub max_epochs: usize,
    pub checkpoint_every_updates: u64,
    pub eval_every_updates: u64,
    /// Stop once the best dev BLEU is this many evaluations old.
    pub patience: usize,
    pub seed: u64,
    /// Freeze both embedding matrices (used when fine-tuning).
    pub fine_tune_fixed_embeddings: bool,
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub output: usize,
    pub init_scale: f64,
    pub vocab_size: usize,
    /// Pairs whose token-count ratio exceeds this are dropped.
    pub max_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            lr_halving: false,
            batch_size: 32,
            sort_window: 20,
            clip_threshold: 1.0,
            noise_stddev: 0.0,
            dropout_p: 0.0,
            mono_ratio: 0.0,
            synthetic_cap: None,
            max_epochs: 10,
            checkpoint_every_updates: 500,
            eval_every_updates: 100,
            patience: 10,
            seed: 1,
            fine_tune_fixed_embeddings: false,
            embed: 64,
            hidden: 128,
            attention: 128,
            output: 128,
            init_scale: 0.01,
            vocab_size: 90000,
            max_ratio: 9.0,
        }
    }
}

impl TrainConfig {
    /// The regularized profile: weight noise, output dropout and clipping
    /// at 5.
    pub fn regularized() -> Self {
        TrainConfig {
            noise_stddev: 0.01,
            dropout_p: 0.5,
            clip_threshold: 5.0,
            ..Self::default()
        }
    }

    /// Out-of-range values, one message per problem.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(msg);
            }
        };
        check(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            format!("learning_rate must be > 0, got {}", self.learning_rate),
        );
        check(self.batch_size >= 1, "batch_size must be >= 1".into());
        check(self.sort_window >= 1, "sort_window must be >= 1".into());
        check(
            self.clip_threshold > 0.0,
            format!("clip_threshold must be > 0, got {}", self.clip_threshold),
        );
        check(
            self.noise_stddev >= 0.0 && self.noise_stddev.is_finite(),
            format!("noise_stddev must be >= 0, got {}", self.noise_stddev),
        );
        check(
            (0.0..1.0).contains(&self.dropout_p),
            format!("dropout_p must be in [0, 1), got {}", self.dropout_p),
        );
        check(
            self.mono_ratio >= 0.0 && self.mono_ratio.is_finite(),
            format!("mono_ratio must be >= 0, got {}", self.mono_ratio),
        );
        check(
            self.checkpoint_every_updates >= 1,
            "checkpoint_every_updates must be >= 1".into(),
        );
        check(self.eval_every_updates >= 1, "eval_every_updates must be >= 1".into());
        check(self.patience >= 1, "patience must be >= 1".into());
        for (name, v) in [
            ("embed", self.embed),
            ("hidden", self.hidden),
            ("attention", self.attention),
            ("output", self.output),
        ] {
            check(v >= 1, format!("{name} must be >= 1"));
        }
        check(
            self.init_scale >= 0.0 && self.init_scale.is_finite(),
            format!("init_scale must be >= 0, got {}", self.init_scale),
        );
        check(self.vocab_size >= 3, "vocab_size must be >= 3".into());
        check(
            self.max_ratio > 0.0,
            format!("max_ratio must be > 0, got {}", self.max_ratio),
        );
        out
    }

    pub fn validate(&self) -> crate::Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Config(d.join("; ")))
        }
    }

    pub fn model_dims(&self, src_vocab: usize, tgt_vocab: usize) -> ModelDims {
        ModelDims {
            embed: self.embed,
            hidden: self.hidden,
            attention: self.attention,
            output: self.output,
            src_vocab,
            tgt_vocab,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::io::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(TrainConfig::default().diagnostics().is_empty());
        assert!(TrainConfig::regularized().diagnostics().is_empty());
    }

    #[test]
    fn out_of_range_values_are_named() {
        let c = TrainConfig {
            learning_rate: -1.0,
            dropout_p: 1.0,
            ..TrainConfig::default()
        };
        let d = c.diagnostics();
        assert!(d.iter().any(|m| m.contains("learning_rate")));
        assert!(d.iter().any(|m| m.contains("dropout_p")));
    }

    #[test]
    fn clip_thresholds_accepted() {
        for t in [1.0, 5.0] {
            let c = TrainConfig {
                clip_threshold: t,
                ..TrainConfig::default()
            };
            assert!(c.validate().is_ok());
        }
    }
}
