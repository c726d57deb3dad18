//! The `isni` command line: vocabulary induction, G2P inspection,
//! alignment, training, corruption and evaluation.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use isni::corpus::{align_pair, induce_vocab, parse_texts, read_corpus, training_items_for_corpus, SubwordVocab};
use isni::eval::EvalReport;
use isni::generation::{corrupt_corpus, PlanSource};
use isni::intervention::{estimate_conditional_prior, ConditionalPriorTable};
use isni::model::{Model, SupervisionTable};
use isni::phonetics::{Inventory, PronouncingLexicon};
use isni::training::{load_checkpoint, prepare_items, save_checkpoint, train};

pub use config::{load_config, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "isni", version, about = "Phoneme-aware pseudo-transcript generation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Constant corruption prior.
    #[arg(long = "p-z", global = true)]
    pub p_z: Option<f64>,
    #[arg(long = "lambda-w", global = true)]
    pub lambda_w: Option<f64>,
    #[arg(long = "lambda-ph", global = true)]
    pub lambda_ph: Option<f64>,
    /// Decoding mode: greedy or sample.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Pronouncing lexicon TSV (`word<TAB>PHONEMES`).
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    /// Phoneme inventory TSV.
    #[arg(long, global = true)]
    pub inventory: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Induce a subword vocabulary from a parallel corpus.
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Print phonetic codes of words.
    G2p {
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Align a parallel corpus word by word.
    Align {
        #[arg(long)]
        corpus: PathBuf,
        /// Also write the per-token corruption frequency table.
        #[arg(long)]
        prior_table: Option<PathBuf>,
    },
    /// Train a corruption model; `--out` is the checkpoint path.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Vocabulary file; induced from the corpus when absent.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        loss_log: Option<PathBuf>,
        /// Train without the phoneme head.
        #[arg(long)]
        no_phoneme_head: bool,
    },
    /// Corrupt clean texts into pseudo transcripts.
    Corrupt {
        /// One text per line.
        #[arg(long)]
        input: PathBuf,
        /// Span report TSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Use per-token frequencies instead of the constant prior.
        #[arg(long)]
        prior_table: Option<PathBuf>,
    },
    /// Score hypotheses against references.
    Eval {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        /// CSV twin of the report; defaults to `<out>.csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Vocab { .. } => "vocab",
            Command::G2p { .. } => "g2p",
            Command::Align { .. } => "align",
            Command::Train { .. } => "train",
            Command::Corrupt { .. } => "corrupt",
            Command::Eval { .. } => "eval",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] isni::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for usage and configuration problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn require_out(global: &GlobalArgs) -> CliResult<&Path> {
    global
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --out".into()))
}

/// Resolves the run configuration from defaults, `--config` and flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, ConfigError> {
    let mut overrides: Vec<(&str, String)> = Vec::new();
    if let Some(v) = global.seed {
        overrides.push(("seed", v.to_string()));
    }
    if let Some(v) = global.p_z {
        overrides.push(("p_z", v.to_string()));
    }
    if let Some(v) = global.lambda_w {
        overrides.push(("lambda_w", v.to_string()));
    }
    if let Some(v) = global.lambda_ph {
        overrides.push(("lambda_ph", v.to_string()));
    }
    if let Some(v) = &global.mode {
        overrides.push(("mode", v.clone()));
    }
    if let Some(v) = &global.lexicon {
        overrides.push(("lexicon", v.display().to_string()));
    }
    if let Some(v) = &global.inventory {
        overrides.push(("inventory", v.display().to_string()));
    }
    load_config(global.config.as_deref(), &overrides)
}

/// `# isni <command> config=<hash>` provenance line.
fn header(command: &str, cfg: &RunConfig) -> String {
    format!("# isni {command} config={}\n", cfg.hash())
}

fn lexicon(cfg: &RunConfig) -> CliResult<PronouncingLexicon> {
    let inventory = match &cfg.inventory {
        Some(p) => Inventory::parse(&read(p)?)?,
        None => Inventory::builtin(),
    };
    match &cfg.lexicon {
        Some(p) => Ok(PronouncingLexicon::parse(&read(p)?, Arc::new(inventory))?),
        None if cfg.inventory.is_none() => Ok(PronouncingLexicon::builtin()),
        None => Err(CliError::Usage("--inventory requires a matching --lexicon".into())),
    }
}

fn load_model(global: &GlobalArgs) -> CliResult<Model> {
    let path = global
        .checkpoint
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --checkpoint".into()))?;
    Ok(load_checkpoint(path)?)
}

/// Runs one parsed command. Progress and the resolved configuration go to
/// `log`; artifacts go to the declared files (or stdout where noted).
pub fn run(cli: &Cli, log: &mut dyn std::io::Write) -> CliResult<String> {
    let cfg = resolve_config(&cli.global)?;
    let name = cli.command.name();
    let _ = writeln!(log, "isni {name}: resolved configuration (hash {})", cfg.hash());
    for line in cfg.to_text().lines() {
        let _ = writeln!(log, "  {line}");
    }
    let global = &cli.global;
    let mut stdout = String::new();

    match &cli.command {
        Command::Vocab { corpus, size } => {
            let out = require_out(global)?;
            let pairs = read_corpus(corpus)?;
            let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.gt.as_str(), p.asr.as_str()]).collect();
            let vocab = induce_vocab(&texts, size.unwrap_or(cfg.vocab_size))?;
            write(out, header(name, &cfg) + &vocab.to_file_string())?;
            let _ = writeln!(log, "wrote {} pieces to {}", vocab.len(), out.display());
        }
        Command::G2p { words } => {
            let lex = lexicon(&cfg)?;
            for w in words {
                let code = lex.g2p(w)?;
                let source = if lex.get(w.trim_start_matches("##")).is_some() { "lexicon" } else { "fallback" };
                let _ = writeln!(stdout, "{w}\t{}\t{source}", code.canonical());
            }
            if let Some(out) = &global.out {
                write(out, header(name, &cfg) + &stdout)?;
                stdout.clear();
            }
        }
        Command::Align { corpus, prior_table } => {
            let out = require_out(global)?;
            let lex = lexicon(&cfg)?;
            let pairs = read_corpus(corpus)?;
            let mut text = header(name, &cfg);
            text.push_str("pair_id\tindex\tgt\tasr\tlabel\n");
            let mut all = Vec::with_capacity(pairs.len());
            for p in &pairs {
                let alignment = align_pair(&p.gt, &p.asr, &lex);
                for u in &alignment {
                    let _ = writeln!(text, "{}\t{}\t{}\t{}\t{:?}", p.id, u.index, u.gt, u.matched.join(" "), u.label);
                }
                all.push(alignment);
            }
            write(out, text)?;
            if let Some(path) = prior_table {
                let table = estimate_conditional_prior(&all)?;
                write(path, header(name, &cfg) + &table.to_tsv())?;
            }
        }
        Command::Train {
            corpus,
            vocab,
            loss_log,
            no_phoneme_head,
        } => {
            let out = require_out(global)?;
            let lex = lexicon(&cfg)?;
            let pairs = read_corpus(corpus)?;
            let vocab = match vocab {
                Some(p) => SubwordVocab::parse(&read(p)?)?,
                None => {
                    let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.gt.as_str(), p.asr.as_str()]).collect();
                    induce_vocab(&texts, cfg.vocab_size)?
                }
            };
            let mut model_cfg = cfg.model_config();
            if *no_phoneme_head {
                model_cfg = model_cfg.without_phoneme_head();
            }
            let mut model = Model::new(model_cfg, vocab, &lex, cfg.seed)?;
            let items = training_items_for_corpus(&pairs, &model.vocab, &lex);
            let (items, dropped) = prepare_items(items, &model);
            let _ = writeln!(log, "{} training items ({dropped} over-long sentences dropped)", items.len());
            let sup = SupervisionTable::build(&model.vocab, &lex);
            let result = train(&mut model, &items, &sup, &cfg.train_config()).inspect_err(|e| {
                if let isni::Error::NonFiniteLoss { last_good, .. } = e {
                    let mut rescue = model.clone();
                    rescue.params = (**last_good).clone();
                    let path = out.with_extension("last_good");
                    if save_checkpoint(&rescue, &path).is_ok() {
                        let _ = writeln!(log, "saved last good parameters to {}", path.display());
                    }
                }
            })?;
            save_checkpoint(&model, out)?;
            if let Some(path) = loss_log {
                write(path, header(name, &cfg) + &result.to_csv())?;
            }
            let _ = writeln!(
                log,
                "loss {:.4} -> {:.4}; checkpoint {}",
                result.initial().unwrap_or(f64::NAN),
                result.last().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Corrupt {
            input,
            report,
            prior_table,
        } => {
            let out = require_out(global)?;
            let model = load_model(global)?;
            let texts = parse_texts(&read(input)?);
            let table = match prior_table {
                Some(p) => Some(ConditionalPriorTable::parse_tsv(&read(p)?)?),
                None => None,
            };
            let source = match &table {
                Some(t) => PlanSource::Conditional(t),
                None => PlanSource::Interventional(cfg.p_z),
            };
            let result = corrupt_corpus(&model, &texts, source, cfg.seed, cfg.mode)?;
            let mut text = header(name, &cfg);
            for t in result.transcripts() {
                text.push_str(t);
                text.push('\n');
            }
            write(out, text)?;
            if let Some(path) = report {
                write(path, header(name, &cfg) + &result.span_report_tsv())?;
            }
            let counts = result.error_type_counts();
            let _ = writeln!(log, "{} texts corrupted; spans {counts:?}", texts.len());
        }
        Command::Eval {
            reference,
            hypothesis,
            csv,
        } => {
            let lex = lexicon(&cfg)?;
            let refs = parse_texts(&read(reference)?);
            let hyps = parse_texts(&read(hypothesis)?);
            let report = EvalReport::compute(&refs, &hyps, &lex)?;
            match &global.out {
                Some(out) => {
                    write(out, header(name, &cfg) + &report.to_text())?;
                    let csv_path = csv.clone().unwrap_or_else(|| {
                        let mut p = out.clone().into_os_string();
                        p.push(".csv");
                        PathBuf::from(p)
                    });
                    write(&csv_path, header(name, &cfg) + &report.to_csv())?;
                }
                None => stdout.push_str(&report.to_text()),
            }
        }
    }
    Ok(stdout)
}
