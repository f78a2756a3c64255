use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracereform::corpus::Granularity;

mod commands;
mod config;
mod report;
mod selftest;

use config::RunConfig;

/// Reasoning-trace reformulation and evaluation.
#[derive(Parser, Debug)]
#[command(name = "tracereform", version, about)]
struct Cli {
    /// TOML configuration file with per-module sections.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug); RUST_LOG overrides.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus checks and segmentation.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Reformulate or summarize traces through the generation endpoint.
    #[command(subcommand)]
    Rewrite(RewriteCmd),
    /// Lexical and semantic similarity evaluations.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Self-talk frequency scoring and detectability metrics.
    #[command(subcommand)]
    Detect(DetectCmd),
    /// Token-probability and gradient analyses of probability logs.
    #[command(subcommand)]
    Probe(ProbeCmd),
}

#[derive(Subcommand, Debug)]
enum CorpusCmd {
    /// Parse and check a JSONL corpus; prints a summary.
    Validate { path: PathBuf },
    /// Emit the segments of every reasoning trace as JSONL.
    Segment {
        path: PathBuf,
        #[arg(long, default_value = "sentence")]
        granularity: Granularity,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum RewriteCmd {
    /// Rewrite every trace of a corpus; writes a corpus with `reformulated` set.
    Run {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Produce the segment-summary baseline instead of the two-step rewrite.
        #[arg(long)]
        baseline_summary: bool,
    },
}

#[derive(Subcommand, Debug)]
enum EvalCmd {
    /// Match-ratio curves of original segments found in rewritten traces (CSV).
    Lexical(LexicalArgs),
    /// Retrieval of original traces among rewritten candidates (JSON).
    Semantic {
        original: PathBuf,
        part: PathBuf,
        summary: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Embedding cache directory (overrides `[embed] cache_dir`).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct LexicalArgs {
    original: PathBuf,
    /// One or more corpora whose records carry `reformulated` and `method`.
    #[arg(required = true)]
    reformulated: Vec<PathBuf>,
    #[arg(long)]
    granularity: Option<Granularity>,
    /// Threshold grid as start:stop:step (inclusive).
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum DetectCmd {
    /// Per-record self-talk keyword frequency (JSONL).
    Score {
        corpus: PathBuf,
        /// Which trace field to score.
        #[arg(long, value_enum, default_value = "reasoning")]
        field: commands::TraceField,
        /// Class label to attach; defaults to `original` for the reasoning
        /// field and `reformulated` otherwise.
        #[arg(long, value_enum)]
        label: Option<commands::LabelArg>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// F1, ROC and TPR at a false-positive budget over scored files (JSON).
    Eval {
        #[arg(required = true)]
        scored: Vec<PathBuf>,
        #[arg(long)]
        fpr: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ProbeCmd {
    /// Per-stage loss and gradient-norm statistics of a probability log,
    /// or the built-in numerical checks with --self-test.
    Grad {
        #[arg(required_unless_present = "self_test", conflicts_with = "self_test")]
        log: Option<PathBuf>,
        #[arg(long)]
        self_test: bool,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-stage probability gap between self-talk tokens and all tokens.
    Gap {
        log: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    use commands as c;
    match cli.command {
        Command::Corpus(CorpusCmd::Validate { path }) => c::corpus_validate(&path),
        Command::Corpus(CorpusCmd::Segment { path, granularity, out }) => {
            c::corpus_segment(&cfg, &path, granularity, out.as_deref())
        }
        Command::Rewrite(RewriteCmd::Run {
            corpus,
            out,
            baseline_summary,
        }) => c::rewrite_run(&cfg, &corpus, &out, baseline_summary),
        Command::Eval(EvalCmd::Lexical(args)) => {
            if let Some(g) = args.granularity {
                cfg.eval.granularity = g;
            }
            if let Some(t) = args.thresholds {
                cfg.eval.thresholds = t;
            }
            c::eval_lexical(&cfg, &args.original, &args.reformulated, args.out.as_deref())
        }
        Command::Eval(EvalCmd::Semantic {
            original,
            part,
            summary,
            out,
            cache_dir,
        }) => {
            if cache_dir.is_some() {
                cfg.embed.cache_dir = cache_dir;
            }
            c::eval_semantic(&cfg, [&original, &part, &summary], out.as_deref())
        }
        Command::Detect(DetectCmd::Score {
            corpus,
            field,
            label,
            lexicon,
            out,
        }) => {
            if lexicon.is_some() {
                cfg.detect.lexicon = lexicon;
            }
            c::detect_score(&cfg, &corpus, field, label, out.as_deref())
        }
        Command::Detect(DetectCmd::Eval { scored, fpr, out }) => {
            if let Some(f) = fpr {
                cfg.detect.fpr = f;
            }
            c::detect_eval(&cfg, &scored, out.as_deref())
        }
        Command::Probe(ProbeCmd::Grad {
            log,
            self_test,
            lexicon,
            out,
        }) => {
            if lexicon.is_some() {
                cfg.detect.lexicon = lexicon;
            }
            match log {
                _ if self_test => Ok(c::probe_self_test()),
                Some(log) => c::probe_grad(&cfg, &log, out.as_deref()),
                None => unreachable!("clap requires a log without --self-test"),
            }
        }
        Command::Probe(ProbeCmd::Gap { log, lexicon, out }) => {
            if lexicon.is_some() {
                cfg.detect.lexicon = lexicon;
            }
            c::probe_gap(&cfg, &log, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
