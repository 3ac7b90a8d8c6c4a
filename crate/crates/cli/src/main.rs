//! `synens` command-line tool.
//!
//! Exit status: 0 on success, 1 when a command fails (one-line diagnostic on
//! stderr, no output file written), 2 on a usage error.

mod io;
mod models;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use synens::decoder::{decode_ensemble_same, decode_multi_rep, decode_single, DecodeConfig, InternalModel, Model};
use synens::eval::{bleu, paired_bootstrap, words, Smoothing, DEFAULT_SAMPLES};
use synens::scorers::{train_ngram, DEFAULT_SMOOTHING};
use synens::subword::{apply_bpe, learn_bpe, revert_bpe, subword_tree};
use synens::tokens::{Representation, TokenSeq, Vocab, DEFAULT_MARKER};
use synens::trainer::{train, TrainConfig};
use synens::treebank::{
    label_inventory, linear_derivation_to_tree, linearize_tree, parse_ptb, render_ptb, strip_to_plain,
    tree_to_derivation, tree_to_linear_derivation, tree_to_plain, tree_to_pos_text, Derivation, LengthStats,
    Tree, TreeGenerator, DEFAULT_ROOT,
};

use crate::io::{lines_text, read_lines, read_records, write_output};
use crate::models::{load_bpe, load_classifier, load_scorer, transducer_for, ModelSpec, Repr};

#[derive(Parser, Debug)]
#[command(name = "synens", version, about = "Syntax representations, toy scorers and synchronized ensemble decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert trees between representations
    Convert(ConvertArgs),
    /// List every label used in a treebank
    ExtractLabels(InOut),
    /// Mean sequence length of each representation
    Stats(InOut),
    /// Sample random trees from the built-in grammar
    GenerateTrees(GenerateArgs),
    /// Learn BPE merges from plain text (or tree leaves)
    LearnBpe(LearnBpeArgs),
    /// Segment plain text or tree leaves with learned merges
    ApplyBpe(ApplyBpeArgs),
    /// Join subword pieces back into words
    RevertBpe(RevertBpeArgs),
    /// Train an add-k n-gram model on token lines
    TrainNgram(TrainNgramArgs),
    /// Train the recurrent toy model with delayed SGD updates
    TrainToy(TrainToyArgs),
    /// Beam search with one model or an ensemble
    Decode(DecodeArgs),
    /// Corpus BLEU against one reference per line
    EvalBleu(EvalArgs),
    /// Paired bootstrap test of system B against system A
    Significance(SignificanceArgs),
}

#[derive(Args, Debug)]
struct InOut {
    /// Input file (default: stdin)
    #[arg(short, long, alias = "trees", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output file (default: stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, value_enum)]
    from: Repr,
    #[arg(long, value_enum)]
    to: Repr,
    /// Root label restored when reading linearized derivations
    #[arg(long, default_value = DEFAULT_ROOT)]
    root: String,
    /// Label inventory, one per line (needed to read linearized derivations)
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_MARKER)]
    marker: String,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    /// Probability of splitting a word into marker-joined pieces
    #[arg(long, default_value_t = 0.0)]
    split_prob: f64,
    #[arg(long, default_value = DEFAULT_MARKER)]
    marker: String,
}

#[derive(Args, Debug)]
struct LearnBpeArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long)]
    merges: usize,
    #[arg(long, default_value = DEFAULT_MARKER)]
    marker: String,
    /// Read bracketed trees and learn from their leaves
    #[arg(long = "from-trees")]
    from_trees: bool,
}

#[derive(Args, Debug)]
struct ApplyBpeArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, value_name = "FILE")]
    codes: PathBuf,
    /// Input lines are bracketed trees; segment their leaves
    #[arg(long = "from-trees")]
    from_trees: bool,
}

#[derive(Args, Debug)]
struct RevertBpeArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, default_value = DEFAULT_MARKER)]
    marker: String,
}

#[derive(Args, Debug)]
struct TrainNgramArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    k: f64,
}

#[derive(Args, Debug)]
struct TrainToyArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, default_value_t = 4096)]
    batch_tokens: usize,
    #[arg(long, default_value_t = 1)]
    batches_per_update: usize,
    #[arg(long, default_value_t = 0.2)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Average the parameters of the last N updates
    #[arg(long, default_value_t = 1)]
    average_last: usize,
    /// Training log, one line per update (default: stderr)
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Mode {
    Single,
    Ensemble,
    Multirep,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "single")]
    mode: Mode,
    /// KIND=PATH, repeatable; with multirep the first model is external
    #[arg(long = "model", value_name = "KIND=PATH", required = true)]
    models: Vec<ModelSpec>,
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// BPE codes relating words to subwords in plain/plain multirep decoding
    #[arg(long, value_name = "FILE")]
    codes: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_MARKER)]
    marker: String,
    #[arg(long, default_value_t = 4)]
    beam: usize,
    /// Synchronized states per hypothesis (default: 4 x beam)
    #[arg(long)]
    inner_beam: Option<usize>,
    /// Longest output, counting the end-of-sentence token
    #[arg(long, default_value_t = 100)]
    max_len: usize,
    /// Log-score added to every non-terminal of syntax models (<= 0)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma: f64,
    /// Only allow well-formed syntax outputs
    #[arg(long)]
    constrain: bool,
    /// Comma-separated model weights, external first
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Also print the best internal sequence of each internal model
    #[arg(long)]
    show_internal: bool,
    /// Print one machine-readable line per search step to stderr
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct TextForm {
    /// Representation of the input lines; syntax is stripped before scoring
    #[arg(long, value_enum, default_value = "plain")]
    kind: Repr,
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Subword continuation marker, reverted before scoring
    #[arg(long, default_value = DEFAULT_MARKER)]
    marker: String,
    /// Add-one smoothing for n >= 2
    #[arg(long)]
    smooth: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    hyp: PathBuf,
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    form: TextForm,
}

#[derive(Args, Debug)]
struct SignificanceArgs {
    #[arg(long = "hyp-a", value_name = "FILE")]
    hyp_a: PathBuf,
    #[arg(long = "hyp-b", value_name = "FILE")]
    hyp_b: PathBuf,
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    form: TextForm,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert(a) => convert(a),
        Command::ExtractLabels(a) => {
            let trees = read_trees(&a)?;
            let labels: Vec<String> = label_inventory(&trees).into_iter().collect();
            write_output(a.output.as_deref(), &lines_text(labels))
        }
        Command::Stats(a) => {
            let trees = read_trees(&a)?;
            let s = LengthStats::compute(&trees);
            let e = s.with_eos();
            let mut out = format!("sentences={}\n", s.sentences);
            for (name, x, y) in [
                ("plain", s.plain, e.plain),
                ("linear_tree", s.linear_tree, e.linear_tree),
                ("linear_derivation", s.linear_derivation, e.linear_derivation),
                ("pos_text", s.pos_text, e.pos_text),
            ] {
                writeln!(out, "{name}={x:.2}\t{name}_with_eos={y:.2}")?;
            }
            write_output(a.output.as_deref(), &out)
        }
        Command::GenerateTrees(a) => {
            if !(0.0..=1.0).contains(&a.split_prob) {
                bail!("--split-prob must be in [0, 1]");
            }
            let mut g = TreeGenerator::new(a.seed)
                .max_depth(a.max_depth)
                .subword_splits(a.split_prob, &a.marker);
            let lines: Vec<String> = (0..a.count).map(|_| render_ptb(&g.generate())).collect();
            write_output(a.output.as_deref(), &lines_text(lines))
        }
        Command::LearnBpe(a) => {
            let lines = if a.from_trees {
                read_trees(&a.io)?.iter().map(|t| tree_to_plain(t).to_string()).collect()
            } else {
                read_records(a.io.input.as_deref())?
            };
            let model = learn_bpe(&lines, a.merges, &a.marker)?;
            write_output(a.io.output.as_deref(), &model.to_text())
        }
        Command::ApplyBpe(a) => {
            let model = load_bpe(&a.codes)?;
            let out: Vec<String> = if a.from_trees {
                read_trees(&a.io)?.iter().map(|t| render_ptb(&subword_tree(&model, t))).collect()
            } else {
                read_lines(a.io.input.as_deref())?
                    .iter()
                    .map(|l| apply_bpe(&model, &TokenSeq::parse(Representation::PlainText, l)).to_string())
                    .collect()
            };
            write_output(a.io.output.as_deref(), &lines_text(out))
        }
        Command::RevertBpe(a) => {
            let out = read_lines(a.io.input.as_deref())?
                .iter()
                .enumerate()
                .map(|(n, l)| {
                    revert_bpe(&TokenSeq::parse(Representation::PlainText, l), &a.marker)
                        .map(|s| s.to_string())
                        .with_context(|| format!("line {}", n + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            write_output(a.io.output.as_deref(), &lines_text(out))
        }
        Command::TrainNgram(a) => {
            let corpus: Vec<Vec<String>> = read_records(a.io.input.as_deref())?.iter().map(|l| words(l)).collect();
            let model = train_ngram(&corpus, a.order, a.k, None)?;
            write_output(a.io.output.as_deref(), &model.to_text())
        }
        Command::TrainToy(a) => train_toy(a),
        Command::Decode(a) => decode(a),
        Command::EvalBleu(a) => {
            let hyps = read_form(&a.hyp, &a.form)?;
            let refs = read_form(&a.reference, &a.form)?;
            let report = bleu(&hyps, &refs, smoothing(&a.form))?;
            write_output(a.output.as_deref(), &format!("{report}\n"))
        }
        Command::Significance(a) => {
            let hyp_a = read_form(&a.hyp_a, &a.form)?;
            let hyp_b = read_form(&a.hyp_b, &a.form)?;
            let refs = read_form(&a.reference, &a.form)?;
            let report = paired_bootstrap(&hyp_a, &hyp_b, &refs, a.samples, a.seed, smoothing(&a.form))?;
            write_output(a.output.as_deref(), &format!("{report}\n"))
        }
    }
}

fn read_trees(io: &InOut) -> Result<Vec<Tree>> {
    read_records(io.input.as_deref())?
        .iter()
        .enumerate()
        .map(|(n, l)| parse_ptb(l).with_context(|| format!("tree on line {}", n + 1)))
        .collect()
}

fn convert(a: ConvertArgs) -> Result<()> {
    let cls = load_classifier(a.labels.as_deref(), &a.marker)?;
    if a.from == Repr::Linder && a.labels.is_none() {
        bail!("reading linearized derivations needs --labels");
    }
    let records = read_records(a.io.input.as_deref())?;
    let mut out = Vec::with_capacity(records.len());
    for (n, line) in records.iter().enumerate() {
        let at = || format!("line {}", n + 1);
        let tree = match a.from {
            Repr::Tree => Some(parse_ptb(line).with_context(at)?),
            Repr::Derivation => Some(Derivation::parse(line).and_then(|d| d.to_tree()).with_context(at)?),
            Repr::Linder => {
                let seq = TokenSeq::parse(Representation::LinearDerivation, line);
                Some(linear_derivation_to_tree(&seq, &a.root, &cls).with_context(at)?)
            }
            Repr::Plain | Repr::Pos => None,
        };
        let converted = match (tree, a.to) {
            (Some(t), Repr::Plain) => tree_to_plain(&t).to_string(),
            (Some(t), Repr::Tree) => linearize_tree(&t).to_string(),
            (Some(t), Repr::Derivation) => tree_to_derivation(&t).to_string(),
            (Some(t), Repr::Linder) => tree_to_linear_derivation(&t).to_string(),
            (Some(t), Repr::Pos) => tree_to_pos_text(&t).to_string(),
            (None, to) if to == a.from => TokenSeq::parse(Representation::PlainText, line).to_string(),
            (None, Repr::Plain) => {
                let seq = TokenSeq::parse(Representation::PosText, line);
                strip_to_plain(&seq, &cls).with_context(at)?.to_string()
            }
            (None, to) => bail!("cannot recover {to:?} from {:?}: the input has no tree structure", a.from),
        };
        out.push(converted);
    }
    write_output(a.io.output.as_deref(), &lines_text(out))
}

fn train_toy(a: TrainToyArgs) -> Result<()> {
    let lines: Vec<Vec<String>> = read_records(a.io.input.as_deref())?.iter().map(|l| words(l)).collect();
    let vocab = Vocab::from_corpus(&lines);
    let corpus = lines
        .iter()
        .map(|l| vocab.encode(l))
        .collect::<Result<Vec<_>, _>>()
        .map_err(anyhow::Error::msg)?;
    let config = TrainConfig {
        batch_size_tokens: a.batch_tokens,
        batches_per_update: a.batches_per_update,
        learning_rate: a.lr,
        max_steps: a.steps,
        seed: a.seed,
        hidden: a.hidden,
        average_last: a.average_last,
        ..TrainConfig::default()
    };
    let trained = train(&corpus, vocab, &config)?;
    let log = lines_text(trained.log.iter().map(|l| l.to_string()));
    match &a.log {
        Some(p) => write_output(Some(p), &log)?,
        None => eprint!("{log}"),
    }
    write_output(a.io.output.as_deref(), &trained.scorer.to_text())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let cls = load_classifier(a.labels.as_deref(), &a.marker)?;
    let codes = a.codes.as_deref().map(load_bpe).transpose()?;
    let config = DecodeConfig {
        beam: a.beam,
        inner_beam: a.inner_beam,
        max_len: a.max_len,
        nonterminal_gamma: a.gamma,
        constrain_wellformed: a.constrain,
        ensemble_weights: a.weights.clone(),
        trace: a.trace,
        ..DecodeConfig::default()
    };
    let needs_labels = a.models.iter().any(|m| m.repr != Repr::Plain);
    if needs_labels && a.labels.is_none() {
        bail!("syntax models need --labels");
    }
    let model = |spec: &ModelSpec| -> Result<Model> {
        Ok(Model::new(load_scorer(&spec.path)?, spec.repr.kind()?, cls.clone()))
    };
    let out = match a.mode {
        Mode::Single => {
            let [spec] = a.models.as_slice() else {
                bail!("single mode takes exactly one --model");
            };
            decode_single(&model(spec)?, &config)?
        }
        Mode::Ensemble => {
            if a.models.len() < 2 || a.models.iter().any(|m| m.repr != a.models[0].repr) {
                bail!("ensemble mode takes two or more --model of the same kind");
            }
            let models = a.models.iter().map(model).collect::<Result<Vec<_>>>()?;
            decode_ensemble_same(&models, &config)?
        }
        Mode::Multirep => {
            let [ext, rest @ ..] = a.models.as_slice() else {
                bail!("multirep mode needs models");
            };
            if rest.is_empty() {
                bail!("multirep mode takes an external model and at least one internal model");
            }
            let internals = rest
                .iter()
                .map(|spec| {
                    let t = transducer_for(ext.repr, spec.repr, &cls, codes.as_ref())?;
                    Ok(InternalModel::new(load_scorer(&spec.path)?, spec.repr.kind()?, t))
                })
                .collect::<Result<Vec<_>>>()?;
            decode_multi_rep(&model(ext)?, &internals, &config)?
        }
    };
    for line in &out.trace {
        eprintln!("{line}");
    }
    let mut text = format!("{}\n", out.external);
    if a.show_internal {
        for (i, seq) in out.internal.iter().enumerate() {
            writeln!(text, "internal_{}\t{seq}", i + 1)?;
        }
    }
    eprintln!(
        "score={:.6}\texternal_logprob={:.6}\tfinished={}\tdead_pruned={}",
        out.score, out.external_logprob, out.finished, out.dead_pruned
    );
    write_output(a.output.as_deref(), &text)
}

fn smoothing(form: &TextForm) -> Smoothing {
    if form.smooth {
        Smoothing::AddOne
    } else {
        Smoothing::None
    }
}

/// Lines of `path` as words: syntax stripped, subwords joined.
fn read_form(path: &std::path::Path, form: &TextForm) -> Result<Vec<Vec<String>>> {
    let cls = load_classifier(form.labels.as_deref(), &form.marker)?;
    if matches!(form.kind, Repr::Linder | Repr::Pos) && form.labels.is_none() {
        bail!("scoring {:?} lines needs --labels", form.kind);
    }
    read_lines(Some(path))?
        .iter()
        .enumerate()
        .map(|(n, line)| {
            let at = || format!("{} line {}", path.display(), n + 1);
            let plain = match form.kind {
                Repr::Derivation => {
                    tree_to_plain(&Derivation::parse(line).and_then(|d| d.to_tree()).with_context(at)?)
                }
                kind => strip_to_plain(&TokenSeq::parse(kind.kind()?, line), &cls).with_context(at)?,
            };
            Ok(revert_bpe(&plain, &form.marker).with_context(at)?.tokens)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_text;
    use clap::CommandFactory;
    use synens::tokens::Classifier;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_gamma_parses() {
        let cli = Cli::try_parse_from(["synens", "decode", "--model", "plain=m", "--gamma", "-0.5"]).unwrap();
        match cli.command {
            Command::Decode(d) => assert_eq!(d.gamma, -0.5),
            _ => unreachable!(),
        }
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["synens", "stats", "--bogus"]).is_err());
    }

    #[test]
    fn read_text_reports_missing_files() {
        assert!(read_text(Some(std::path::Path::new("/nonexistent/x"))).is_err());
    }

    #[test]
    fn classifier_without_labels_is_lexical() {
        assert_eq!(load_classifier(None, "@@").unwrap(), Classifier::lexical("@@"));
    }
}
