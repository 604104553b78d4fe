//! Experiment profiles: ordered pipeline stages writing into one artifact
//! directory. A stage is skipped when its recorded hash matches and its
//! artifacts are intact, so interrupted runs resume where they stopped.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtranslation::{back_translate, sample_lines};
use crate::corpus::{read_parallel, tokenize, Origin, SentencePair};
use crate::decoding::{SearchMode, Translator};
use crate::error::{Error, Result};
use crate::eval::bleu;
use crate::io::{read_lines, sha256_file, sha256_hex, write_atomic, write_lines};
use crate::pipeline::Preprocessor;
use crate::rng::derive_seed;
use crate::subword::{BpeModel, Segmenter, DEFAULT_MARKER};
use crate::toy::{Domain, ToyCorpus, ToyLanguage};
use crate::training::{train, Checkpoint, DevSet, TrainConfig, TrainData, TrainOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentProfile {
    pub name: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyDomain {
    #[default]
    Any,
    A,
    B,
}

impl From<ToyDomain> for Domain {
    fn from(d: ToyDomain) -> Self {
        match d {
            ToyDomain::Any => Domain::Any,
            ToyDomain::A => Domain::A,
            ToyDomain::B => Domain::B,
        }
    }
}

fn default_marker() -> String {
    DEFAULT_MARKER.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Stage {
    /// Generates the synthetic language pair.
    ToyData {
        name: String,
        n_parallel: usize,
        n_mono: usize,
        n_dev: usize,
        #[serde(default)]
        domain: ToyDomain,
    },
    /// Copies existing text files into the artifact directory.
    Files {
        name: String,
        train_src: PathBuf,
        train_tgt: PathBuf,
        #[serde(default)]
        mono: Option<PathBuf>,
        dev_src: PathBuf,
        dev_tgt: PathBuf,
    },
    /// Joint BPE over both sides of a data stage's training text.
    LearnBpe {
        name: String,
        data: String,
        merges: usize,
        #[serde(default = "default_marker")]
        marker: String,
    },
    Train {
        name: String,
        data: String,
        #[serde(default)]
        bpe: Option<String>,
        /// Train target-to-source.
        #[serde(default)]
        reverse: bool,
        /// Add the data stage's monolingual text as dummy-source instances.
        #[serde(default)]
        mono: bool,
        /// A backtranslate stage whose output joins the parallel data.
        #[serde(default)]
        synthetic: Option<String>,
        #[serde(default)]
        config: TrainConfig,
    },
    Backtranslate {
        name: String,
        data: String,
        model: String,
        mode: SearchMode,
        #[serde(default)]
        sample: Option<usize>,
    },
    /// Translates the dev set of `data` with a trained model.
    Decode {
        name: String,
        model: String,
        data: String,
        mode: SearchMode,
    },
    Score {
        name: String,
        decode: String,
    },
}

impl Stage {
    pub fn name(&self) -> &str {
        match self {
            Stage::ToyData { name, .. }
            | Stage::Files { name, .. }
            | Stage::LearnBpe { name, .. }
            | Stage::Train { name, .. }
            | Stage::Backtranslate { name, .. }
            | Stage::Decode { name, .. }
            | Stage::Score { name, .. } => name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Stage::ToyData { .. } => "toy-data",
            Stage::Files { .. } => "files",
            Stage::LearnBpe { .. } => "learn-bpe",
            Stage::Train { .. } => "train",
            Stage::Backtranslate { .. } => "backtranslate",
            Stage::Decode { .. } => "decode",
            Stage::Score { .. } => "score",
        }
    }

    /// `(referenced stage, expected kinds)` pairs.
    fn inputs(&self) -> Vec<(&str, &'static [&'static str])> {
        const DATA: &[&str] = &["toy-data", "files"];
        match self {
            Stage::ToyData { .. } | Stage::Files { .. } => vec![],
            Stage::LearnBpe { data, .. } => vec![(data, DATA)],
            Stage::Train {
                data,
                bpe,
                synthetic,
                ..
            } => {
                let mut v = vec![(data.as_str(), DATA)];
                if let Some(b) = bpe {
                    v.push((b, &["learn-bpe"]));
                }
                if let Some(s) = synthetic {
                    v.push((s, &["backtranslate"]));
                }
                v
            }
            Stage::Backtranslate { data, model, .. } => vec![(data, DATA), (model, &["train"])],
            Stage::Decode { model, data, .. } => vec![(model, &["train"]), (data, DATA)],
            Stage::Score { decode, .. } => vec![(decode, &["decode"])],
        }
    }
}

impl ExperimentProfile {
    /// Schema problems, one message each.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.stages.is_empty() {
            out.push("profile has no stages".to_string());
        }
        let mut seen: HashMap<&str, &str> = HashMap::new();
        for stage in &self.stages {
            let name = stage.name();
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                out.push(format!("invalid stage name {name:?}"));
            }
            for (input, kinds) in stage.inputs() {
                match seen.get(input) {
                    None => out.push(format!(
                        "stage {name:?} references {input:?}, which is not an earlier stage"
                    )),
                    Some(k) if !kinds.contains(k) => out.push(format!(
                        "stage {name:?} expects {input:?} to be one of {kinds:?}, found {k}"
                    )),
                    _ => {}
                }
            }
            if let Stage::Train { config, .. } = stage {
                out.extend(config.diagnostics().into_iter().map(|d| format!("stage {name:?}: {d}")));
            }
            if let Stage::Backtranslate { sample: Some(0), .. } = stage {
                out.push(format!("stage {name:?}: sample must be >= 1"));
            }
            if seen.insert(name, stage.kind()).is_some() {
                out.push(format!("duplicate stage name {name:?}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("; ")))
        }
    }
}

/// Desk-scale settings used by the built-in toy profiles.
pub fn toy_train_config(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        embed: 32,
        hidden: 48,
        attention: 32,
        output: 32,
        init_scale: 0.1,
        learning_rate: 1.0,
        clip_threshold: 1.0,
        batch_size: 16,
        max_epochs,
        eval_every_updates: 500,
        checkpoint_every_updates: 1000,
        patience: 100,
        ..TrainConfig::default()
    }
}

pub const BUILTIN_PROFILES: [&str; 2] = ["toy-backtranslation", "toy-dummy-source"];

pub fn builtin_profile(name: &str) -> Option<ExperimentProfile> {
    let data = Stage::ToyData {
        name: "data".into(),
        n_parallel: 1000,
        n_mono: 10000,
        n_dev: 200,
        domain: ToyDomain::Any,
    };
    let bpe = Stage::LearnBpe {
        name: "bpe".into(),
        data: "data".into(),
        merges: 100,
        marker: default_marker(),
    };
    let train = |name: &str, reverse, mono, synthetic: Option<&str>, epochs| Stage::Train {
        name: name.into(),
        data: "data".into(),
        bpe: Some("bpe".into()),
        reverse,
        mono,
        synthetic: synthetic.map(str::to_string),
        config: toy_train_config(epochs),
    };
    let decode = |name: &str, model: &str| Stage::Decode {
        name: name.into(),
        model: model.into(),
        data: "data".into(),
        mode: SearchMode::Beam(5),
    };
    let score = |name: &str, d: &str| Stage::Score {
        name: name.into(),
        decode: d.into(),
    };
    let stages = match name {
        "toy-backtranslation" => vec![
            data,
            bpe,
            train("train-reverse", true, false, None, 60),
            Stage::Backtranslate {
                name: "backtranslate".into(),
                data: "data".into(),
                model: "train-reverse".into(),
                mode: SearchMode::Greedy,
                sample: None,
            },
            train("train-baseline", false, false, None, 96),
            train("train-synthetic", false, false, Some("backtranslate"), 9),
            decode("decode-baseline", "train-baseline"),
            decode("decode-synthetic", "train-synthetic"),
            score("score-baseline", "decode-baseline"),
            score("score-synthetic", "decode-synthetic"),
        ],
        "toy-dummy-source" => {
            let mut mono = toy_train_config(48);
            mono.mono_ratio = 1.0;
            vec![
                data,
                bpe,
                train("train-baseline", false, false, None, 96),
                Stage::Train {
                    name: "train-mono".into(),
                    data: "data".into(),
                    bpe: Some("bpe".into()),
                    reverse: false,
                    mono: true,
                    synthetic: None,
                    config: mono,
                },
                decode("decode-baseline", "train-baseline"),
                decode("decode-mono", "train-mono"),
                score("score-baseline", "decode-baseline"),
                score("score-mono", "decode-mono"),
            ]
        }
        _ => return None,
    };
    Some(ExperimentProfile {
        name: name.to_string(),
        seed: 1,
        stages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

/// Completion record written into each stage directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub profile: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

/// A stage that failed, by name.
#[derive(Debug)]
pub struct StageFailure {
    pub stage: String,
    pub error: Error,
}

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {:?} failed: {}", self.stage, self.error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub manifest: Manifest,
    /// Names of stages that were skipped as already complete.
    pub skipped: Vec<String>,
    /// BLEU per score stage.
    pub scores: BTreeMap<String, f64>,
}

const RECORD_FILE: &str = "stage.json";
/// Written alongside artifacts but carries wall-clock times, so it is not
/// hashed into the stage record.
const LOG_FILES: [&str; 1] = ["metrics.csv"];

fn record_is_current(dir: &Path, hash: &str) -> Option<StageRecord> {
    let bytes = std::fs::read(dir.join(RECORD_FILE)).ok()?;
    let rec: StageRecord = serde_json::from_slice(&bytes).ok()?;
    if rec.config_hash != hash {
        return None;
    }
    for a in &rec.artifacts {
        if sha256_file(&dir.join(&a.path)).ok()? != a.sha256 {
            return None;
        }
    }
    Some(rec)
}

fn list_artifacts(dir: &Path) -> Result<Vec<Artifact>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != RECORD_FILE && !LOG_FILES.contains(&n.as_str()) && !n.starts_with('.'))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            Ok(Artifact {
                sha256: sha256_file(&dir.join(&n))?,
                path: n,
            })
        })
        .collect()
}

/// Runs every stage in order under `out_dir`.
pub fn run_profile(
    profile: &ExperimentProfile,
    out_dir: &Path,
    log: &mut dyn FnMut(&str),
) -> std::result::Result<RunReport, StageFailure> {
    profile.validate().map_err(|error| StageFailure {
        stage: "<profile>".into(),
        error,
    })?;
    let mut hashes: HashMap<String, String> = HashMap::new();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut scores = BTreeMap::new();
    let ctx = Context {
        profile,
        root: out_dir,
    };
    for stage in &profile.stages {
        let name = stage.name().to_string();
        let fail = |error| StageFailure {
            stage: name.clone(),
            error,
        };
        let seed = derive_seed(profile.seed, &name);
        let upstream: Vec<&str> = stage
            .inputs()
            .iter()
            .map(|(i, _)| hashes[*i].as_str())
            .collect();
        let definition = serde_json::to_string(stage).expect("stage serializes");
        let hash = sha256_hex(format!("{definition}\n{seed}\n{}", upstream.join(",")).as_bytes());
        let dir = out_dir.join(&name);
        let record = match record_is_current(&dir, &hash) {
            Some(rec) => {
                log(&format!("[{name}] up to date, skipping"));
                skipped.push(name.clone());
                rec
            }
            None => {
                log(&format!("[{name}] running {}", stage.kind()));
                if dir.exists() {
                    std::fs::remove_dir_all(&dir).map_err(|e| fail(Error::io(&dir, e)))?;
                }
                std::fs::create_dir_all(&dir).map_err(|e| fail(Error::io(&dir, e)))?;
                ctx.run_stage(stage, seed, &dir).map_err(fail)?;
                let rec = StageRecord {
                    name: name.clone(),
                    kind: stage.kind().to_string(),
                    config_hash: hash.clone(),
                    seed,
                    artifacts: list_artifacts(&dir).map_err(fail)?,
                };
                let json = serde_json::to_vec_pretty(&rec).expect("record serializes");
                write_atomic(&dir.join(RECORD_FILE), &json).map_err(fail)?;
                rec
            }
        };
        if let Stage::Score { .. } = stage {
            let path = dir.join("bleu.json");
            let v: serde_json::Value = std::fs::read(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|b| Ok(serde_json::from_slice(&b)?))
                .map_err(fail)?;
            if let Some(b) = v["bleu"].as_f64() {
                log(&format!("[{name}] BLEU {b:.2}"));
                scores.insert(name.clone(), b);
            }
        }
        hashes.insert(name, hash);
        records.push(record);
    }
    let manifest = Manifest {
        profile: profile.name.clone(),
        seed: profile.seed,
        stages: records,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out_dir.join("manifest.json"), &json).map_err(|error| StageFailure {
        stage: "<manifest>".into(),
        error,
    })?;
    Ok(RunReport {
        manifest,
        skipped,
        scores,
    })
}

struct Context<'a> {
    profile: &'a ExperimentProfile,
    root: &'a Path,
}

fn read_pairs(dir: &Path, split: &str) -> Result<Vec<SentencePair>> {
    read_parallel(
        &dir.join(format!("{split}.src")),
        &dir.join(format!("{split}.tgt")),
    )
}

fn swap(pairs: Vec<SentencePair>) -> Vec<SentencePair> {
    pairs
        .into_iter()
        .map(|p| SentencePair::new(p.target, p.source, p.origin))
        .collect()
}

impl Context<'_> {
    fn stage(&self, name: &str) -> &Stage {
        self.profile
            .stages
            .iter()
            .find(|s| s.name() == name)
            .expect("validated reference")
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn model_is_reverse(&self, model: &str) -> bool {
        matches!(self.stage(model), Stage::Train { reverse: true, .. })
    }

    fn run_stage(&self, stage: &Stage, seed: u64, dir: &Path) -> Result<()> {
        match stage {
            Stage::ToyData {
                n_parallel,
                n_mono,
                n_dev,
                domain,
                ..
            } => {
                let lang = ToyLanguage::new(self.profile.seed);
                let c = ToyCorpus::generate(&lang, (*domain).into(), *n_parallel, *n_mono, *n_dev, seed);
                write_lines(&dir.join("train.src"), &ToyCorpus::source_lines(&c.parallel))?;
                write_lines(&dir.join("train.tgt"), &ToyCorpus::target_lines(&c.parallel))?;
                write_lines(&dir.join("mono.tgt"), &c.mono)?;
                write_lines(&dir.join("dev.src"), &ToyCorpus::source_lines(&c.dev))?;
                write_lines(&dir.join("dev.tgt"), &ToyCorpus::target_lines(&c.dev))
            }
            Stage::Files {
                train_src,
                train_tgt,
                mono,
                dev_src,
                dev_tgt,
                ..
            } => {
                let copy = |from: &Path, to: &str| -> Result<()> {
                    let bytes = std::fs::read(from).map_err(|e| Error::io(from, e))?;
                    write_atomic(&dir.join(to), &bytes)
                };
                copy(train_src, "train.src")?;
                copy(train_tgt, "train.tgt")?;
                copy(dev_src, "dev.src")?;
                copy(dev_tgt, "dev.tgt")?;
                match mono {
                    Some(m) => copy(m, "mono.tgt"),
                    None => write_atomic(&dir.join("mono.tgt"), b""),
                }
            }
            Stage::LearnBpe {
                data,
                merges,
                marker,
                ..
            } => {
                let pairs = read_pairs(&self.dir(data), "train")?;
                let mut freqs = BTreeMap::new();
                for p in &pairs {
                    for w in p.source.iter().chain(&p.target) {
                        *freqs.entry(w.clone()).or_insert(0u64) += 1;
                    }
                }
                BpeModel::learn(&freqs, *merges, marker)?.save(&dir.join("bpe.model"))
            }
            Stage::Train {
                data,
                bpe,
                reverse,
                mono,
                synthetic,
                config,
                ..
            } => {
                let segmenter = match bpe {
                    Some(b) => Segmenter::Bpe(BpeModel::load(&self.dir(b).join("bpe.model"))?),
                    None => Segmenter::Identity,
                };
                let mut parallel = read_pairs(&self.dir(data), "train")?;
                let mut dev = read_pairs(&self.dir(data), "dev")?;
                if *reverse {
                    parallel = swap(parallel);
                    dev = swap(dev);
                }
                let config = TrainConfig {
                    seed,
                    ..config.clone()
                };
                let pre = Preprocessor::build(segmenter, &parallel, config.vocab_size)?;
                let mut train_data = TrainData {
                    parallel: pre.prepare(&parallel, config.max_ratio),
                    dev: Some(DevSet {
                        pairs: dev.iter().map(|p| pre.encode_segmented(&segment(&pre, p))).collect(),
                        references: dev.iter().map(|p| p.target.join(" ")).collect(),
                    }),
                    ..TrainData::default()
                };
                if *mono {
                    let lines = read_lines(&self.dir(data).join("mono.tgt"))?;
                    train_data.mono = lines
                        .iter()
                        .map(|l| pre.encode_target_line(l))
                        .filter(|ids| ids.len() > 1)
                        .collect();
                }
                if let Some(s) = synthetic {
                    let pairs = read_pairs(&self.dir(s), "synth")?;
                    let synth: Vec<SentencePair> = pairs
                        .into_iter()
                        .map(|p| SentencePair::new(p.source, p.target, Origin::Synthetic))
                        .collect();
                    train_data.synthetic = pre.prepare(&synth, config.max_ratio);
                }
                let out = TrainOutput {
                    dir: Some(dir.to_path_buf()),
                };
                train(&config, &pre, &train_data, &out, &mut ())?;
                Ok(())
            }
            Stage::Backtranslate {
                data,
                model,
                mode,
                sample,
                ..
            } => {
                let reverse = Checkpoint::load(&self.dir(model).join("best.btx"))?;
                let path = self.dir(data).join("mono.tgt");
                let mut lines = read_lines(&path)?;
                if let Some(n) = sample {
                    lines = sample_lines(lines.into_iter().map(Ok), *n, seed)?.lines;
                }
                let mut synth = back_translate(&reverse, &lines, *mode);
                synth.provenance.seed = Some(seed);
                synth.save(
                    &dir.join("synth.src"),
                    &dir.join("synth.tgt"),
                    &dir.join("provenance.json"),
                )
            }
            Stage::Decode {
                model, data, mode, ..
            } => {
                let ck = Checkpoint::load(&self.dir(model).join("best.btx"))?;
                let side = if self.model_is_reverse(model) { "dev.tgt" } else { "dev.src" };
                let input = read_lines(&self.dir(data).join(side))?;
                let translator = Translator {
                    models: std::slice::from_ref(&ck.model),
                    src_vocab: &ck.preprocessor.src_vocab,
                    tgt_vocab: &ck.preprocessor.tgt_vocab,
                    segmenter: &ck.preprocessor.segmenter,
                    mode: *mode,
                };
                let out = translator.translate_corpus(&input);
                if let Some((i, msg)) = out.failures.first() {
                    return Err(Error::InvalidArgument(format!("line {}: {msg}", i + 1)));
                }
                write_lines(&dir.join("hyp.txt"), &out.lines)
            }
            Stage::Score { decode, .. } => {
                let Stage::Decode { model, data, .. } = self.stage(decode) else {
                    unreachable!("validated reference");
                };
                let side = if self.model_is_reverse(model) { "dev.src" } else { "dev.tgt" };
                let hyp = read_lines(&self.dir(decode).join("hyp.txt"))?;
                let refs: Vec<String> = read_lines(&self.dir(data).join(side))?
                    .iter()
                    .map(|l| tokenize(l).join(" "))
                    .collect();
                let report = bleu(&hyp, &refs, 4, true)?;
                write_atomic(&dir.join("bleu.json"), &serde_json::to_vec_pretty(&report)?)
            }
        }
    }
}

fn segment(pre: &Preprocessor, p: &SentencePair) -> SentencePair {
    SentencePair::new(
        pre.segmenter.segment(&p.source),
        pre.segmenter.segment(&p.target),
        p.origin,
    )
}
