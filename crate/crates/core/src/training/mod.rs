//! Minibatch SGD over parallel, synthetic and dummy-source monolingual
//! data, with checkpointing, early stopping and fine-tuning.

mod checkpoint;
mod config;

pub use checkpoint::{sidecar_path, Checkpoint, CheckpointInfo};
pub use config::TrainConfig;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_minibatches, tokenize, Minibatch, MixedDataset, Origin, SentencePair, TrainingExample};
use crate::decoding::{default_max_len, greedy_decode};
use crate::error::{Error, Result};
use crate::eval::{bleu, corpus_cross_entropy};
use crate::io::write_atomic;
use crate::model::{loss_and_gradients, Dropout, ModelParams};
use crate::nn::{add_gaussian_noise, clip_gradients, sgd_step, Matrix, ParamGroup};
use crate::pipeline::Preprocessor;
use crate::rng::{derive_seed, Rng};

/// Examples per gradient work unit. Chunks are summed in order, so results
/// do not depend on the thread count.
const GRAD_CHUNK: usize = 4;

/// Held-out pairs plus their word-level reference translations.
#[derive(Debug, Clone)]
pub struct DevSet {
    pub pairs: Vec<TrainingExample>,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub parallel: Vec<TrainingExample>,
    /// Back-translated pairs, treated exactly like `parallel`.
    pub synthetic: Vec<TrainingExample>,
    /// Target-side id sequences used as dummy-source instances.
    pub mono: Vec<Vec<u32>>,
    pub dev: Option<DevSet>,
}

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: u64,
    pub epoch: u64,
    pub train_ce_bits: f64,
    pub dev_ce_bits: Option<f64>,
    pub dev_bleu: Option<f64>,
    pub wall_seconds: f64,
    pub instances: u64,
}

pub const METRICS_HEADER: &str =
    "update,epoch,train_ce_bits,dev_ce_bits,dev_bleu,wall_seconds,instances";

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        format!(
            "{},{},{:.6},{},{},{:.3},{}",
            self.update,
            self.epoch,
            self.train_ce_bits,
            opt(self.dev_ce_bits),
            opt(self.dev_bleu),
            self.wall_seconds,
            self.instances
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || Error::Malformed(format!("bad metrics row: {line:?}"));
        if f.len() < 6 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        Ok(MetricsRow {
            update: f[0].parse().map_err(|_| bad())?,
            epoch: f[1].parse().map_err(|_| bad())?,
            train_ce_bits: num(f[2])?,
            dev_ce_bits: opt(f[3])?,
            dev_bleu: opt(f[4])?,
            wall_seconds: num(f[5])?,
            instances: match f.get(6) {
                Some(s) => s.parse().map_err(|_| bad())?,
                None => 0,
            },
        })
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(MetricsRow::from_csv)
        .collect()
}

/// True once the best score in `history` is at least `patience`
/// evaluations old. Ties do not count as improvements.
pub fn early_stop(history: &[f64], patience: usize) -> bool {
    match best_index(history) {
        Some(best) => history.len() - 1 - best >= patience,
        None => false,
    }
}

/// Index of the first maximum.
pub fn best_index(history: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in history.iter().enumerate() {
        if best.is_none_or(|b| v > history[b]) {
            best = Some(i);
        }
    }
    best
}

/// The last `k` checkpoints of a run.
pub fn select_ensemble(checkpoints: &[Checkpoint], k: usize) -> Result<Vec<Checkpoint>> {
    if k == 0 || k > checkpoints.len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {k} checkpoints, {} available",
            checkpoints.len()
        )));
    }
    Ok(checkpoints[checkpoints.len() - k..].to_vec())
}

/// Best-dev checkpoint of each run.
pub fn best_of_runs(runs: &[TrainOutcome]) -> Vec<Checkpoint> {
    runs.iter().map(|r| r.best.clone()).collect()
}

/// Observes every update; used to audit freezing.
pub trait TrainObserver {
    fn before_update(&mut self, _batch: &Minibatch, _model: &ModelParams) {}
    fn after_update(&mut self, _batch: &Minibatch, _model: &ModelParams) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Periodic checkpoints in update order; the last one is the final model.
    pub checkpoints: Vec<Checkpoint>,
    /// Highest dev BLEU (the final model when there is no dev set).
    pub best: Checkpoint,
    pub metrics: Vec<MetricsRow>,
    pub bleu_history: Vec<f64>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least the final checkpoint")
    }

    /// Update index of the lowest dev cross-entropy, if any was measured.
    pub fn min_dev_ce_update(&self) -> Option<(u64, f64)> {
        self.metrics
            .iter()
            .filter_map(|m| m.dev_ce_bits.map(|c| (m.update, c)))
            .fold(None, |acc: Option<(u64, f64)>, (u, c)| match acc {
                Some((_, best)) if best <= c => acc,
                _ => Some((u, c)),
            })
    }
}

/// Where to write checkpoints and metrics; nothing is written when `None`.
#[derive(Debug, Clone, Default)]
pub struct TrainOutput {
    pub dir: Option<PathBuf>,
}

/// Trains a fresh model.
pub fn train(
    config: &TrainConfig,
    pre: &Preprocessor,
    data: &TrainData,
    out: &TrainOutput,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    let dims = config.model_dims(pre.src_vocab.len(), pre.tgt_vocab.len());
    let mut init_rng = Rng::new(derive_seed(config.seed, "init"));
    let model = ModelParams::new(dims, config.init_scale, &mut init_rng)?;
    run(config, pre, model, data, out, observer)
}

/// Continues training from `base` with the base model's preprocessing.
pub fn fine_tune(
    base: &Checkpoint,
    data: &TrainData,
    config: &TrainConfig,
    out: &TrainOutput,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    run(config, &base.preprocessor, base.model.clone(), data, out, observer)
}

struct Evaluation {
    ce_bits: f64,
    bleu: f64,
}

fn evaluate(model: &ModelParams, pre: &Preprocessor, dev: &DevSet) -> Result<Evaluation> {
    let ce_bits = corpus_cross_entropy(model, &dev.pairs)?;
    let models = std::slice::from_ref(model);
    let hyps = dev
        .pairs
        .par_iter()
        .map(|p| {
            let h = greedy_decode(models, &p.source, default_max_len(p.source.len()))?;
            Ok(pre.postprocess(h.tokens()).join(" "))
        })
        .collect::<Result<Vec<String>>>()?;
    let refs: Vec<String> = dev.references.iter().map(|r| tokenize(r).join(" ")).collect();
    Ok(Evaluation {
        ce_bits,
        bleu: bleu(&hyps, &refs, 4, true)?.bleu,
    })
}

fn check_data(pre: &Preprocessor, data: &TrainData) -> Result<()> {
    if data.parallel.is_empty() && data.synthetic.is_empty() && data.mono.is_empty() {
        return Err(Error::EmptyCorpus("no training data".into()));
    }
    let (sv, tv) = (pre.src_vocab.len() as u32, pre.tgt_vocab.len() as u32);
    let bad = |what: &str| {
        Err(Error::Dimension(format!(
            "{what} contains ids outside the model vocabulary"
        )))
    };
    for p in data.parallel.iter().chain(&data.synthetic) {
        if p.source.iter().any(|&i| i >= sv) || p.target.iter().any(|&i| i >= tv) {
            return bad("training pair");
        }
    }
    if data.mono.iter().flatten().any(|&i| i >= tv) {
        return bad("monolingual data");
    }
    Ok(())
}

fn run(
    config: &TrainConfig,
    pre: &Preprocessor,
    mut model: ModelParams,
    data: &TrainData,
    out: &TrainOutput,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    check_data(pre, data)?;
    let dims = model.dims();
    if dims.src_vocab != pre.src_vocab.len() || dims.tgt_vocab != pre.tgt_vocab.len() {
        return Err(Error::Dimension(format!(
            "model vocabularies {}x{} do not match data vocabularies {}x{}",
            dims.src_vocab,
            dims.tgt_vocab,
            pre.src_vocab.len(),
            pre.tgt_vocab.len()
        )));
    }
    let mut dataset = MixedDataset::new(data.parallel.clone(), config.seed);
    dataset.synthetic = data.synthetic.clone();
    dataset.synthetic_cap = config.synthetic_cap;
    dataset.mono_pool = data.mono.clone();
    dataset.ratio = if data.mono.is_empty() { 0.0 } else { config.mono_ratio };
    if dataset.parallel.is_empty() && dataset.synthetic.is_empty() {
        // Monolingual-only training: one dummy instance per mono line.
        dataset.parallel = data
            .mono
            .iter()
            .map(|t| SentencePair::mono_dummy(t.clone()))
            .collect();
        dataset.ratio = 0.0;
    }

    let config_hash = config.hash();
    let mut noise_rng = Rng::new(derive_seed(config.seed, "noise"));
    let mut lr = config.learning_rate;
    let mut updates = 0u64;
    let mut instances = 0u64;
    let mut epoch = 0u64;
    let started = Instant::now();
    let mut metrics = Vec::new();
    let mut history = Vec::new();
    let mut best_ce = f64::INFINITY;
    let mut checkpoints = Vec::new();
    let mut best: Option<Checkpoint> = None;
    let mut window = (0.0f64, 0usize);
    let mut stopped_early = false;

    let snapshot = |model: &ModelParams, updates, epoch, instances, rng: &Rng, ev: Option<&Evaluation>| {
        let mut m = model.clone();
        m.set_frozen(&[]);
        Checkpoint {
            model: m,
            preprocessor: pre.clone(),
            rng: Some(rng.state()),
            info: CheckpointInfo {
                updates,
                epoch,
                instances,
                dev_bleu: ev.map(|e| e.bleu),
                dev_ce_bits: ev.map(|e| e.ce_bits),
                config_hash: Some(config_hash.clone()),
                sha256: None,
            },
        }
    };
    let save = |ck: &Checkpoint, name: &str| -> Result<()> {
        if let Some(dir) = &out.dir {
            ck.save(&dir.join(name))?;
        }
        Ok(())
    };

    'epochs: for e in 0..config.max_epochs {
        epoch = e as u64;
        let stream = dataset.epoch_stream(e)?;
        let batches = make_minibatches(&stream, config.batch_size, config.sort_window);
        for batch in &batches {
            let mono = batch.is_mono_dummy();
            if batch
                .examples
                .iter()
                .any(|e| (e.origin == Origin::MonoDummy) != mono)
            {
                return Err(Error::InvalidArgument(
                    "minibatch mixes mono-dummy and parallel examples".into(),
                ));
            }
            model.freeze_for_origin(if mono { Origin::MonoDummy } else { Origin::Parallel });
            if config.fine_tune_fixed_embeddings {
                let mut frozen = model.frozen_groups();
                frozen.extend([ParamGroup::SrcEmbed, ParamGroup::TgtEmbed]);
                model.set_frozen(&frozen);
            }
            observer.before_update(batch, &model);

            let noise = add_gaussian_noise(model.params_mut(), config.noise_stddev, &mut noise_rng);
            let result = batch_gradients(&model, batch, config, updates);
            noise.restore(model.params_mut());
            let (grads, nats, tokens) = result?;

            for (p, g) in model.params_mut().iter_mut().zip(grads) {
                p.grad = if p.frozen {
                    Matrix::zeros(g.rows(), g.cols())
                } else {
                    g
                };
            }
            clip_gradients(model.params_mut(), config.clip_threshold);
            sgd_step(model.params_mut(), lr);
            if !model.params().iter().all(|p| p.value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "parameters became non-finite at update {}",
                    updates + 1
                )));
            }
            updates += 1;
            instances += batch.len() as u64;
            window.0 += nats;
            window.1 += tokens;
            observer.after_update(batch, &model);

            if updates.is_multiple_of(config.eval_every_updates) {
                let train_ce = window.0 / window.1.max(1) as f64 / std::f64::consts::LN_2;
                window = (0.0, 0);
                let ev = match &data.dev {
                    Some(dev) => Some(evaluate(&model, pre, dev)?),
                    None => None,
                };
                metrics.push(MetricsRow {
                    update: updates,
                    epoch,
                    train_ce_bits: train_ce,
                    dev_ce_bits: ev.as_ref().map(|e| e.ce_bits),
                    dev_bleu: ev.as_ref().map(|e| e.bleu),
                    wall_seconds: started.elapsed().as_secs_f64(),
                    instances,
                });
                if let Some(ev) = ev {
                    if config.lr_halving && ev.ce_bits >= best_ce {
                        lr *= 0.5;
                    }
                    best_ce = best_ce.min(ev.ce_bits);
                    history.push(ev.bleu);
                    if best_index(&history) == Some(history.len() - 1) {
                        let ck = snapshot(&model, updates, epoch, instances, &noise_rng, Some(&ev));
                        save(&ck, "best.btx")?;
                        best = Some(ck);
                    }
                    if early_stop(&history, config.patience) {
                        stopped_early = true;
                        break 'epochs;
                    }
                }
            }
            if updates.is_multiple_of(config.checkpoint_every_updates) {
                let ck = snapshot(&model, updates, epoch, instances, &noise_rng, None);
                save(&ck, &format!("ckpt-{updates:08}.btx"))?;
                checkpoints.push(ck);
            }
        }
    }

    let final_ck = snapshot(&model, updates, epoch, instances, &noise_rng, None);
    save(&final_ck, "final.btx")?;
    if checkpoints.last().is_none_or(|c| c.info.updates != updates) {
        checkpoints.push(final_ck.clone());
    }
    let best = match best {
        Some(b) => b,
        None => {
            save(&final_ck, "best.btx")?;
            final_ck
        }
    };
    if let Some(dir) = &out.dir {
        write_metrics(&dir.join("metrics.csv"), &metrics)?;
    }
    Ok(TrainOutcome {
        checkpoints,
        best,
        metrics,
        bleu_history: history,
        stopped_early,
    })
}

/// Summed gradients of the mean per-sentence loss over a minibatch, plus
/// total loss and token count. Example `i` of update `u` draws dropout from
/// its own stream, so chunking never changes the result.
fn batch_gradients(
    model: &ModelParams,
    batch: &Minibatch,
    config: &TrainConfig,
    update: u64,
) -> Result<(Vec<Matrix>, f64, usize)> {
    let scale = 1.0 / batch.len() as f64;
    let parts = batch
        .examples
        .par_chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut grads = model.zero_grads();
            let mut nats = 0.0;
            let mut tokens = 0;
            for (k, ex) in chunk.iter().enumerate() {
                let i = c * GRAD_CHUNK + k;
                let (l, n) = if config.dropout_p > 0.0 {
                    let mut rng = Rng::new(derive_seed(config.seed, &format!("dropout-{update}-{i}")));
                    let mut d = Dropout {
                        p: config.dropout_p,
                        rng: &mut rng,
                    };
                    loss_and_gradients(model, ex, Some(&mut d), scale, &mut grads)?
                } else {
                    loss_and_gradients(model, ex, None, scale, &mut grads)?
                };
                nats += l;
                tokens += n;
            }
            Ok((grads, nats, tokens))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut total, mut nats, mut tokens) = iter.next().expect("nonempty batch");
    for (g, l, n) in iter {
        for (t, x) in total.iter_mut().zip(&g) {
            t.add_scaled(x, 1.0);
        }
        nats += l;
        tokens += n;
    }
    Ok((total, nats, tokens))
}
