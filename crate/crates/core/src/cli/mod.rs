//! Command-line interface shared by the `btx` binary.

pub mod config;
pub mod profile;

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::backtranslation::{back_translate, sample_monolingual};
use crate::corpus::{read_parallel, tokenize, Origin, SentencePair};
use crate::decoding::{SearchMode, Translator};
use crate::error::Error;
use crate::eval::{
    bleu, corpus_cross_entropy, emit_curves, fluency_analysis, parse_metrics_log, InstanceUnit,
};
use crate::io::{read_lines, write_atomic, write_lines};
use crate::pipeline::Preprocessor;
use crate::rng::Rng;
use crate::subword::{most_frequent_words, BpeModel, Segmenter, DEFAULT_MARKER};
use crate::training::{self, Checkpoint, DevSet, TrainConfig, TrainData, TrainOutput};

use self::profile::{builtin_profile, run_profile, ExperimentProfile, BUILTIN_PROFILES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_STAGE: i32 = 3;

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "btx", version, about = "Back-translation NMT workbench")]
pub struct Cli {
    /// Cap on sentence-level worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn BPE merges from tokenized text.
    BpeLearn {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        merges: usize,
        #[arg(long, default_value = DEFAULT_MARKER)]
        marker: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Segment text with a BPE model.
    BpeApply {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: TextIo,
    },
    /// Segment text into character bigrams, keeping frequent words whole.
    BigramApply {
        /// Text used to find the most frequent words.
        #[arg(long)]
        vocab_from: PathBuf,
        #[arg(long)]
        keep: usize,
        #[arg(long, default_value = DEFAULT_MARKER)]
        marker: String,
        #[command(flatten)]
        io: TextIo,
    },
    /// Train a model.
    Train(TrainArgs),
    /// Continue training a checkpoint on new data.
    FineTune {
        #[arg(long)]
        base: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate text with one model or an ensemble.
    Translate {
        #[arg(long = "model", required = true, num_args = 1.., value_delimiter = ',')]
        models: Vec<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        io: TextIo,
    },
    /// Build a synthetic parallel corpus from monolingual target text.
    Backtranslate {
        #[arg(long)]
        reverse_model: PathBuf,
        #[arg(long)]
        mono: PathBuf,
        /// Lines to sample; all lines when omitted.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        out_src: PathBuf,
        #[arg(long)]
        out_tgt: PathBuf,
        #[arg(long)]
        provenance: PathBuf,
    },
    /// Corpus BLEU of tokenized hypotheses against references.
    ScoreBleu {
        hyp: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        lowercase: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Per-token cross-entropy in bits.
    ScoreCe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Count novel multi-unit words in segmented output.
    AnalyzeFluency {
        /// Segmented system output (before desegmentation).
        #[arg(long)]
        output: PathBuf,
        /// Target side of the parallel training text.
        #[arg(long)]
        parallel: PathBuf,
        #[arg(long)]
        mono: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 100)]
        sample_n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_MARKER)]
        marker: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Turn metrics logs into learning-curve data.
    EmitCurves {
        /// `run_id=path/to/metrics.csv`, repeatable.
        #[arg(long = "run", required = true, num_args = 1..)]
        runs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Report instances in millions.
        #[arg(long)]
        millions: bool,
    },
    /// Run an experiment profile (built-in name or file).
    RunProfile {
        profile: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a training config or profile file.
    ValidateConfig {
        path: PathBuf,
        /// Treat the file as a profile instead of a training config.
        #[arg(long)]
        profile: bool,
    },
}

#[derive(Debug, Args)]
pub struct TextIo {
    /// Input file; stdin when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, conflicts_with = "beam")]
    pub greedy: bool,
    #[arg(long)]
    pub beam: Option<usize>,
}

impl SearchArgs {
    fn mode(&self, default_beam: usize) -> CliResult<SearchMode> {
        match (self.greedy, self.beam) {
            (true, _) => Ok(SearchMode::Greedy),
            (false, Some(0)) => Err(CliError::usage("--beam must be at least 1")),
            (false, Some(b)) => Ok(SearchMode::Beam(b)),
            (false, None) => Ok(SearchMode::Beam(default_beam)),
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    /// Monolingual target text used as dummy-source instances.
    #[arg(long)]
    pub mono: Option<PathBuf>,
    #[arg(long, requires = "synthetic_tgt")]
    pub synthetic_src: Option<PathBuf>,
    #[arg(long, requires = "synthetic_src")]
    pub synthetic_tgt: Option<PathBuf>,
    #[arg(long, requires = "dev_tgt")]
    pub dev_src: Option<PathBuf>,
    #[arg(long, requires = "dev_src")]
    pub dev_tgt: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "bigram_keep")]
    pub bpe: Option<PathBuf>,
    /// Character-bigram segmentation keeping this many frequent words.
    #[arg(long)]
    pub bigram_keep: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::BpeLearn {
            input,
            merges,
            marker,
            output,
        } => {
            let mut freqs = BTreeMap::new();
            for path in &input {
                for line in read_lines(path)? {
                    for w in tokenize(&line) {
                        *freqs.entry(w).or_insert(0u64) += 1;
                    }
                }
            }
            let model = BpeModel::learn(&freqs, merges, &marker)?;
            model.save(&output)?;
            eprintln!("learned {} merges", model.merges().len());
            Ok(())
        }
        Command::BpeApply { model, io } => {
            let seg = Segmenter::Bpe(BpeModel::load(&model)?);
            map_lines(&io, |l| seg.segment(&tokenize(l)).join(" "))
        }
        Command::BigramApply {
            vocab_from,
            keep,
            marker,
            io,
        } => {
            let text = read_lines(&vocab_from)?;
            let tokens: Vec<String> = text.iter().flat_map(|l| tokenize(l)).collect();
            let seg = Segmenter::Bigram {
                keep: most_frequent_words(tokens.iter().map(String::as_str), keep),
                marker,
            };
            map_lines(&io, |l| seg.segment(&tokenize(l)).join(" "))
        }
        Command::Train(args) => cmd_train(args),
        Command::FineTune {
            base,
            data,
            config,
            out,
        } => {
            let base = Checkpoint::load(&base)?;
            let config = load_train_config(config.as_deref())?;
            let train_data = load_data(&base.preprocessor, &data, &config)?;
            let result = training::fine_tune(
                &base,
                &train_data,
                &config,
                &TrainOutput { dir: Some(out) },
                &mut (),
            )?;
            eprintln!("fine-tuned for {} updates", result.last().info.updates);
            Ok(())
        }
        Command::Translate { models, search, io } => {
            let cks = models
                .iter()
                .map(|p| Checkpoint::load(p))
                .collect::<crate::Result<Vec<_>>>()?;
            let pre = &cks[0].preprocessor;
            if cks.iter().any(|c| c.preprocessor != *pre) {
                return Err(CliError::usage(
                    "ensemble members must share vocabularies and segmentation",
                ));
            }
            let params: Vec<_> = cks.iter().map(|c| c.model.clone()).collect();
            let translator = Translator {
                models: &params,
                src_vocab: &pre.src_vocab,
                tgt_vocab: &pre.tgt_vocab,
                segmenter: &pre.segmenter,
                mode: search.mode(12)?,
            };
            let input = read_input(io.input.as_deref())?;
            let out = translator.translate_corpus(&input);
            for (i, msg) in &out.failures {
                eprintln!("line {}: {msg}", i + 1);
            }
            write_output(io.output.as_deref(), &out.lines)?;
            if out.failures.is_empty() {
                Ok(())
            } else {
                Err(CliError {
                    code: EXIT_DATA,
                    message: format!("{} lines failed to translate", out.failures.len()),
                })
            }
        }
        Command::Backtranslate {
            reverse_model,
            mono,
            sample,
            seed,
            search,
            out_src,
            out_tgt,
            provenance,
        } => {
            let reverse = Checkpoint::load(&reverse_model)?;
            let lines = match sample {
                Some(n) => {
                    let s = sample_monolingual(&mono, n, seed)?;
                    if s.corpus_size < n {
                        eprintln!(
                            "warning: asked for {n} lines, corpus has {}; using all",
                            s.corpus_size
                        );
                    }
                    s.lines
                }
                None => read_lines(&mono)?,
            };
            let mut synth = back_translate(&reverse, &lines, search.mode(12)?);
            synth.provenance.seed = Some(seed);
            for (i, msg) in &synth.provenance.failures {
                eprintln!("line {}: {msg}", i + 1);
            }
            synth.save(&out_src, &out_tgt, &provenance)?;
            Ok(())
        }
        Command::ScoreBleu {
            hyp,
            reference,
            lowercase,
            json,
        } => {
            let report = bleu(&read_lines(&hyp)?, &read_lines(&reference)?, 4, !lowercase)?;
            println!(
                "BLEU = {:.2}, {} (BP={:.3}, hyp_len={}, ref_len={})",
                report.bleu,
                report
                    .precisions
                    .iter()
                    .map(|p| format!("{:.1}", 100.0 * p))
                    .collect::<Vec<_>>()
                    .join("/"),
                report.brevity_penalty,
                report.hyp_len,
                report.ref_len
            );
            write_json(json.as_deref(), &report)
        }
        Command::ScoreCe {
            model,
            src,
            tgt,
            json,
        } => {
            let ck = Checkpoint::load(&model)?;
            let pairs: Vec<_> = read_parallel(&src, &tgt)?
                .iter()
                .map(|p| {
                    let seg = SentencePair::new(
                        ck.preprocessor.segmenter.segment(&p.source),
                        ck.preprocessor.segmenter.segment(&p.target),
                        Origin::Parallel,
                    );
                    ck.preprocessor.encode_segmented(&seg)
                })
                .collect();
            let bits = corpus_cross_entropy(&ck.model, &pairs)?;
            println!("{bits:.6} bits/token");
            write_json(json.as_deref(), &serde_json::json!({ "ce_bits": bits }))
        }
        Command::AnalyzeFluency {
            output,
            parallel,
            mono,
            reference,
            sample_n,
            seed,
            marker,
            json,
        } => {
            let words = |p: &Path| -> crate::Result<HashSet<String>> {
                Ok(read_lines(p)?.iter().flat_map(|l| tokenize(l)).collect())
            };
            let report = fluency_analysis(
                &read_lines(&output)?,
                &marker,
                &words(&parallel)?,
                &words(&mono)?,
                &read_lines(&reference)?,
                &mut Rng::new(seed),
                sample_n,
            )?;
            println!(
                "produced {}  attested {:.1}%",
                report.produced,
                100.0 * report.attested
            );
            write_json(json.as_deref(), &report)
        }
        Command::EmitCurves {
            runs,
            out,
            millions,
        } => {
            let mut parsed = Vec::new();
            for spec in &runs {
                let (id, path) = spec
                    .split_once('=')
                    .ok_or_else(|| CliError::usage(format!("expected run_id=path, got {spec:?}")))?;
                let path = Path::new(path);
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let (rows, skipped) = parse_metrics_log(&text);
                if skipped > 0 {
                    eprintln!("warning: {id}: skipped {skipped} malformed rows");
                }
                parsed.push((id.to_string(), rows));
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let unit = if millions {
                InstanceUnit::Millions
            } else {
                InstanceUnit::Raw
            };
            emit_curves(&parsed, unit, &out)?;
            Ok(())
        }
        Command::RunProfile { profile, out } => {
            let mut p = load_profile(&profile)?;
            if let Some(seed) = config::seed_override()? {
                p.seed = seed;
            }
            p.validate()?;
            match run_profile(&p, &out, &mut |msg| eprintln!("{msg}")) {
                Ok(report) => {
                    eprintln!(
                        "{} stages, {} skipped; manifest at {}",
                        report.manifest.stages.len(),
                        report.skipped.len(),
                        out.join("manifest.json").display()
                    );
                    Ok(())
                }
                Err(f) => Err(CliError {
                    code: EXIT_STAGE,
                    message: f.to_string(),
                }),
            }
        }
        Command::ValidateConfig { path, profile } => {
            let diagnostics = if profile {
                let value = config::read_object(&path)?;
                match config::from_object::<ExperimentProfile>(value) {
                    Ok(p) => p.diagnostics(),
                    Err(e) => vec![e.to_string()],
                }
            } else {
                let value = config::read_object(&path)?;
                match config::from_object::<TrainConfig>(value) {
                    Ok(c) => c.diagnostics(),
                    Err(e) => vec![e.to_string()],
                }
            };
            if diagnostics.is_empty() {
                println!("{}: ok", path.display());
                Ok(())
            } else {
                for d in &diagnostics {
                    println!("{}: {d}", path.display());
                }
                Err(CliError::usage(format!("{} problem(s)", diagnostics.len())))
            }
        }
    }
}

fn load_profile(name_or_path: &str) -> CliResult<ExperimentProfile> {
    if let Some(p) = builtin_profile(name_or_path) {
        return Ok(p);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(CliError::usage(format!(
            "no such profile {name_or_path:?}; built-in profiles: {}",
            BUILTIN_PROFILES.join(", ")
        )));
    }
    Ok(config::from_object(config::read_object(path)?)?)
}

/// Defaults, then the config file, then `BTX_SEED`.
pub fn load_train_config(path: Option<&Path>) -> crate::Result<TrainConfig> {
    let mut c: TrainConfig = match path {
        Some(p) => config::from_object(config::read_object(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = config::seed_override()? {
        c.seed = seed;
    }
    c.validate()?;
    Ok(c)
}

fn load_data(pre: &Preprocessor, args: &DataArgs, config: &TrainConfig) -> crate::Result<TrainData> {
    let parallel = read_parallel(&args.src, &args.tgt)?;
    let mut data = TrainData {
        parallel: pre.prepare(&parallel, config.max_ratio),
        ..TrainData::default()
    };
    if let Some(m) = &args.mono {
        data.mono = read_lines(m)?
            .iter()
            .map(|l| pre.encode_target_line(l))
            .filter(|ids| ids.len() > 1)
            .collect();
    }
    if let (Some(s), Some(t)) = (&args.synthetic_src, &args.synthetic_tgt) {
        let synth: Vec<SentencePair> = read_parallel(s, t)?
            .into_iter()
            .map(|p| SentencePair::new(p.source, p.target, Origin::Synthetic))
            .collect();
        data.synthetic = pre.prepare(&synth, config.max_ratio);
    }
    if let (Some(s), Some(t)) = (&args.dev_src, &args.dev_tgt) {
        let dev = read_parallel(s, t)?;
        data.dev = Some(DevSet {
            pairs: dev
                .iter()
                .map(|p| {
                    pre.encode_segmented(&SentencePair::new(
                        pre.segmenter.segment(&p.source),
                        pre.segmenter.segment(&p.target),
                        Origin::Parallel,
                    ))
                })
                .collect(),
            references: dev.iter().map(|p| p.target.join(" ")).collect(),
        });
    }
    Ok(data)
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let config = load_train_config(args.config.as_deref())?;
    let parallel = read_parallel(&args.data.src, &args.data.tgt)?;
    let segmenter = match (&args.bpe, args.bigram_keep) {
        (Some(p), _) => Segmenter::Bpe(BpeModel::load(p)?),
        (None, Some(k)) => {
            let tokens = parallel
                .iter()
                .flat_map(|p| p.source.iter().chain(&p.target))
                .map(String::as_str);
            Segmenter::Bigram {
                keep: most_frequent_words(tokens, k),
                marker: DEFAULT_MARKER.into(),
            }
        }
        (None, None) => Segmenter::Identity,
    };
    let pre = Preprocessor::build(segmenter, &parallel, config.vocab_size)?;
    let data = load_data(&pre, &args.data, &config)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let config_json = serde_json::to_vec_pretty(&config).map_err(Error::from)?;
    write_atomic(&args.out.join("config.json"), &config_json)?;
    let outcome = training::train(
        &config,
        &pre,
        &data,
        &TrainOutput {
            dir: Some(args.out.clone()),
        },
        &mut (),
    )?;
    eprintln!(
        "{} updates, {} instances{}",
        outcome.last().info.updates,
        outcome.last().info.instances,
        if outcome.stopped_early {
            ", stopped early"
        } else {
            ""
        }
    );
    Ok(())
}

fn read_input(path: Option<&Path>) -> crate::Result<Vec<String>> {
    match path {
        Some(p) => read_lines(p),
        None => {
            let mut text = String::new();
            std::io::stdin()
                .lock()
                .read_to_string(&mut text)
                .map_err(|e| Error::io("<stdin>", e))?;
            Ok(text.lines().map(str::to_string).collect())
        }
    }
}

fn write_output(path: Option<&Path>, lines: &[String]) -> crate::Result<()> {
    match path {
        Some(p) => write_lines(p, lines),
        None => {
            let mut out = std::io::stdout().lock();
            for l in lines {
                writeln!(out, "{l}").map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(())
        }
    }
}

fn map_lines(io: &TextIo, f: impl Fn(&str) -> String) -> CliResult {
    let lines: Vec<String> = match &io.input {
        Some(p) => read_lines(p)?,
        None => std::io::stdin()
            .lock()
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io("<stdin>", e))?,
    };
    let out: Vec<String> = lines.iter().map(|l| f(l)).collect();
    Ok(write_output(io.output.as_deref(), &out)?)
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> CliResult {
    if let Some(p) = path {
        let bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
        write_atomic(p, &bytes)?;
    }
    Ok(())
}
