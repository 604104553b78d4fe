//! Evaluation: BLEU, corpus cross-entropy, learning curves and the
//! novel-word fluency analysis.

mod bleu;
mod curves;
mod fluency;

pub use bleu::{bleu, bleu_tokens, BleuReport};
pub use curves::{curve_csv, curves_json, emit_curves, parse_metrics_log, InstanceUnit, CURVE_HEADER};
pub use fluency::{blind_samples, fluency_analysis, BlindedSample, FluencyReport};

use crate::corpus::TrainingExample;
use crate::model::ModelParams;

/// Per-token cross-entropy in bits with regularizers disabled.
pub fn corpus_cross_entropy(model: &ModelParams, pairs: &[TrainingExample]) -> crate::Result<f64> {
    let mut nats = 0.0;
    let mut tokens = 0usize;
    for p in pairs {
        let (l, n) = model.sequence_nll(p, None)?;
        nats += l;
        tokens += n;
    }
    if tokens == 0 {
        return Err(crate::Error::EmptyCorpus("no target tokens to score".into()));
    }
    Ok(nats / tokens as f64 / std::f64::consts::LN_2)
}
