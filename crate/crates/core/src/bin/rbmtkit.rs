use std::collections::HashSet;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rbmtkit::annotate::{self, PosTagMap, CLOSE_BRACKET, OPEN_BRACKET};
use rbmtkit::corpus::{self, AlignmentSet, CorpusError, StatsAccumulator};
use rbmtkit::entity::{self, AttentionMatrix, EntitySpan, PhraseTable, ReplacementSidecar};
use rbmtkit::lexicon::{self, AmbiguityIndex, TermDictionary};
use rbmtkit::metrics::{self, BleuOptions, BootstrapOptions, ChrfOptions, Metric, TerOptions};
use rbmtkit::pipeline::{self, Config, FocusPredicate, ShellTranslator};
use rbmtkit::subword::{self, BpeModel};
use rbmtkit::{Error, ParallelPair, Result, Sentence};

/// Corpus preparation, feature injection and evaluation for hybrid
/// rule-based/neural MT experiments.
#[derive(Parser, Debug)]
#[command(name = "rbmtkit", version)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable); applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Feature separator; shorthand for --set separator=C.
    #[arg(long, global = true)]
    separator: Option<char>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    emit_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct Io {
    /// Input token file (`-` for stdin).
    input: PathBuf,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PairOut {
    #[arg(long)]
    out_source: PathBuf,
    #[arg(long)]
    out_target: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MetricName {
    Bleu,
    Ter,
    Chrf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Append CAT and CL ambiguity-class features from a lexicon.
    Annotate {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        lexicon: PathBuf,
    },
    /// CAT/CL features restricted by an external POS tag sequence.
    Disambiguate {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        lexicon: PathBuf,
        /// Line-parallel tag file.
        #[arg(long)]
        tags: PathBuf,
        /// Tag to category TSV; a built-in Penn map is used otherwise.
        #[arg(long)]
        tag_map: Option<PathBuf>,
    },
    /// Append external POS tags as a feature.
    PosAnnotate {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        tags: PathBuf,
    },
    /// Linearize bracketed parse trees into annotated token lines.
    Linearize {
        #[command(flatten)]
        io: Io,
    },
    /// Learn a BPE model from the surfaces of a token file.
    BpeLearn {
        #[command(flatten)]
        io: Io,
    },
    /// Segment surfaces with a BPE model, copying features to every piece.
    BpeApply {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        model: PathBuf,
    },
    /// Rejoin BPE pieces.
    BpeUndo {
        #[command(flatten)]
        io: Io,
    },
    /// Tag entity spans as a feature or replace them with placeholders.
    EntityTag {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        spans: PathBuf,
        /// Where to write replacement records (replace mode).
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Tag source spans and project them onto the target.
    PreparePairs {
        #[command(flatten)]
        pairs: PairIn,
        #[arg(long)]
        spans: PathBuf,
        #[arg(long)]
        align: PathBuf,
        #[command(flatten)]
        out: PairOut,
    },
    /// Prepare pairs and add an untagged copy of every pair with spans.
    Duplicate {
        #[command(flatten)]
        pairs: PairIn,
        #[arg(long)]
        spans: PathBuf,
        #[arg(long)]
        align: PathBuf,
        #[command(flatten)]
        out: PairOut,
    },
    /// Replace placeholder tags in hypotheses using attention and a dictionary.
    Restore {
        /// Hypothesis token file.
        #[arg(long)]
        hyp: PathBuf,
        /// Tagged source the hypotheses were translated from.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        /// JSON lines, one attention matrix per sentence.
        #[arg(long)]
        attention: PathBuf,
        /// Term dictionary TSV (`source<TAB>target<TAB>label`).
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Count aligned word translations into a phrase table.
    PhraseTable {
        #[command(flatten)]
        pairs: PairIn,
        #[arg(long)]
        align: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Replace unknown-word tokens via attention and a phrase table.
    UnkReplace {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        attention: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Cap the vocabulary, rewriting rare surfaces to the unknown token.
    CapVocab {
        #[command(flatten)]
        io: Io,
        /// Vocabulary file (`surface<TAB>count`).
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Select a focused test set disjoint from training data.
    SelectTestset {
        #[command(flatten)]
        pairs: PairIn,
        /// Surface forms that qualify a line (one or more per line).
        #[arg(long, conflicts_with = "span_presence")]
        forms: Option<PathBuf>,
        /// Keep lines with at least one span instead.
        #[arg(long, requires = "spans")]
        span_presence: bool,
        #[arg(long)]
        spans: Option<PathBuf>,
        /// Source files whose lines must not appear (repeatable).
        #[arg(long)]
        exclude: Vec<PathBuf>,
        /// Keep a seeded random subset of N selected pairs.
        #[arg(long, value_name = "N")]
        take_random: Option<usize>,
        #[command(flatten)]
        out: PairOut,
        #[arg(long)]
        out_spans: Option<PathBuf>,
    },
    /// Word, vocabulary and subword counts.
    Stats {
        input: PathBuf,
        /// Line-parallel BPE-segmented rendering of the input.
        #[arg(long)]
        subwords: Option<PathBuf>,
        /// Do not count linearization bracket tokens.
        #[arg(long)]
        skip_brackets: bool,
        /// `key=value` output instead of a table.
        #[arg(long)]
        kv: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Corpus-level BLEU, TER and chrF.
    Score {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Metrics to report (default: all).
        #[arg(long, value_enum)]
        metric: Vec<MetricName>,
        #[arg(long)]
        lowercase: bool,
        /// Also report per-sentence scores.
        #[arg(long)]
        sentence: bool,
        #[arg(long)]
        json: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Paired bootstrap significance of system A over system B.
    Significance {
        #[arg(long)]
        hyp_a: PathBuf,
        #[arg(long)]
        hyp_b: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "bleu")]
        metric: MetricName,
        #[arg(long)]
        lowercase: bool,
        #[arg(long)]
        json: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Back-translate monolingual target text through a shell command.
    Backtranslate {
        /// Monolingual target token file.
        input: PathBuf,
        /// Command template with `{input}` and `{output}` placeholders.
        #[arg(long)]
        command: String,
        #[command(flatten)]
        out: PairOut,
    },
    /// Check token, alignment and span files for consistency.
    Validate {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, requires = "target")]
        align: Option<PathBuf>,
        #[arg(long)]
        spans: Option<PathBuf>,
        /// Reject plain source words equal to a placeholder tag.
        #[arg(long)]
        reserved_tags: bool,
    },
}

#[derive(Args, Debug)]
struct PairIn {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn at_line(path: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{}:{}: {e}", path.display(), line + 1))
}

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| io_err(path, e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    corpus::read_lines(BufReader::new(text.as_bytes())).map_err(|e| io_err(path, e))
}

fn parse_each<T, E: std::fmt::Display>(path: &Path, f: impl Fn(&str) -> Result<T, E>) -> Result<Vec<T>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| f(l).map_err(|e| at_line(path, i, e)))
        .collect()
}

fn read_sentences(path: &Path, sep: char) -> Result<Vec<Sentence>> {
    parse_each(path, |l| corpus::parse_token_line(l, sep))
}

fn read_alignments(path: &Path) -> Result<Vec<AlignmentSet>> {
    parse_each(path, corpus::read_alignment_line)
}

fn read_spans(path: &Path) -> Result<Vec<Vec<EntitySpan>>> {
    parse_each(path, entity::parse_span_line)
}

fn read_attention(path: &Path) -> Result<Vec<AttentionMatrix>> {
    parse_each(path, AttentionMatrix::from_json_line)
}

fn read_tag_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

fn read_index(path: &Path) -> Result<AmbiguityIndex> {
    let entries =
        lexicon::parse_lexicon(&read_text(path)?).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    Ok(lexicon::build_ambiguity_index(entries))
}

fn read_dictionary(path: Option<&Path>) -> Result<TermDictionary> {
    match path {
        Some(p) => {
            lexicon::parse_term_dictionary(&read_text(p)?).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))
        }
        None => Ok(TermDictionary::new()),
    }
}

fn same_length(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(CorpusError::LineCountMismatch { left, right }.into());
    }
    Ok(())
}

fn read_pairs(input: &PairIn, sep: char) -> Result<Vec<ParallelPair>> {
    let source = read_sentences(&input.source, sep)?;
    let target = read_sentences(&input.target, sep)?;
    same_length(source.len(), target.len())?;
    Ok(source
        .into_iter()
        .zip(target)
        .enumerate()
        .map(|(id, (source, target))| ParallelPair { id, source, target })
        .collect())
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

fn render(sentences: &[Sentence], sep: char) -> Result<String> {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&corpus::render_token_line(s, sep)?);
        out.push('\n');
    }
    Ok(out)
}

fn write_sentences(path: Option<&Path>, sentences: &[Sentence], sep: char) -> Result<()> {
    write_out(path, &render(sentences, sep)?)
}

fn write_pairs(out: &PairOut, pairs: &[ParallelPair], sep: char) -> Result<()> {
    let (src, tgt): (Vec<Sentence>, Vec<Sentence>) = pairs.iter().map(|p| (p.source.clone(), p.target.clone())).unzip();
    write_sentences(Some(&out.out_source), &src, sep)?;
    write_sentences(Some(&out.out_target), &tgt, sep)
}

fn metric_of(name: MetricName, config: &Config) -> Metric {
    match name {
        MetricName::Bleu => Metric::Bleu(BleuOptions {
            smoothing: config.bleu_smoothing,
            ..BleuOptions::default()
        }),
        MetricName::Ter => Metric::Ter(TerOptions::default()),
        MetricName::Chrf => Metric::Chrf(ChrfOptions::default()),
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = Config::default();
    if let Some(path) = &cli.config {
        config
            .apply_text(&read_text(path)?)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k, v).map_err(Error::Invalid)?;
    }
    if let Some(c) = cli.separator {
        config.set("separator", &c.to_string()).map_err(Error::Invalid)?;
    }
    Ok(config)
}

fn prepare_all(
    pairs: &PairIn,
    spans: &Path,
    align: &Path,
    config: &Config,
    duplicate: bool,
) -> Result<Vec<ParallelPair>> {
    let pairs = read_pairs(pairs, config.separator)?;
    let spans = read_spans(spans)?;
    let links = read_alignments(align)?;
    same_length(pairs.len(), spans.len())?;
    same_length(pairs.len(), links.len())?;
    let opts = config.tag_options();
    if duplicate {
        let corpus = pairs
            .iter()
            .zip(&spans)
            .zip(&links)
            .map(|((p, s), a)| (p, s.as_slice(), a));
        return Ok(entity::duplicate_augment(corpus, &opts)?);
    }
    pairs
        .iter()
        .zip(&spans)
        .zip(&links)
        .map(|((p, s), a)| entity::prepare_training_pair(p, s, a, &opts).map_err(|e| at_line(align, p.id, e)))
        .collect()
}

fn lowercase_all(sentences: Vec<Sentence>, lower: bool) -> Vec<Sentence> {
    if lower {
        sentences.iter().map(Sentence::to_lowercase).collect()
    } else {
        sentences
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    if cli.emit_config {
        return write_out(None, &config.to_text());
    }
    let Some(command) = cli.command else {
        return Err(Error::Invalid("no subcommand given; see --help".to_string()));
    };
    let sep = config.separator;
    match command {
        Command::Annotate { io, lexicon } => {
            let index = read_index(&lexicon)?;
            let out: Vec<Sentence> = read_sentences(&io.input, sep)?
                .iter()
                .map(|s| annotate::annotate_catcl(s, &index))
                .collect();
            write_sentences(io.output.as_deref(), &out, sep)
        }
        Command::Disambiguate {
            io,
            lexicon,
            tags,
            tag_map,
        } => {
            let index = read_index(&lexicon)?;
            let map = match tag_map {
                Some(p) => PosTagMap::parse_tsv(&read_text(&p)?)?,
                None => PosTagMap::penn_default(),
            };
            let sentences = read_sentences(&io.input, sep)?;
            let tags = read_tag_lines(&tags)?;
            same_length(sentences.len(), tags.len())?;
            let out = sentences
                .iter()
                .zip(&tags)
                .enumerate()
                .map(|(i, (s, t))| {
                    annotate::disambiguate_catcl(s, t, &map, &index).map_err(|e| at_line(&io.input, i, e))
                })
                .collect::<Result<Vec<_>>>()?;
            write_sentences(io.output.as_deref(), &out, sep)
        }
        Command::PosAnnotate { io, tags } => {
            let sentences = read_sentences(&io.input, sep)?;
            let tags = read_tag_lines(&tags)?;
            same_length(sentences.len(), tags.len())?;
            let out = sentences
                .iter()
                .zip(&tags)
                .enumerate()
                .map(|(i, (s, t))| annotate::annotate_pos(s, t).map_err(|e| at_line(&io.input, i, e)))
                .collect::<Result<Vec<_>>>()?;
            write_sentences(io.output.as_deref(), &out, sep)
        }
        Command::Linearize { io } => {
            let labels: HashSet<String> = config.bracketed_labels.iter().cloned().collect();
            let out = parse_each(&io.input, annotate::parse_bracketed_tree)?
                .iter()
                .map(|t| annotate::linearize_tree(t, &labels))
                .collect::<Vec<_>>();
            write_sentences(io.output.as_deref(), &out, sep)
        }
        Command::BpeLearn { io } => {
            let sentences = read_sentences(&io.input, sep)?;
            let model = subword::bpe_learn(sentences.iter(), config.max_merges, config.min_frequency)
                .with_marker(config.marker);
            eprintln!("learned {} merges", model.len());
            write_out(io.output.as_deref(), &model.to_text())
        }
        Command::BpeApply { io, model } => {
            let model = BpeModel::from_text(&read_text(&model)?)?;
            let out: Vec<Sentence> = read_sentences(&io.input, sep)?
                .iter()
                .map(|s| subword::bpe_apply(s, &model))
                .collect();
            write_sentences(io.output.as_deref(), &out, sep)
        }
        Command::BpeUndo { io } => {
            let mut dangling = 0;
            let out: Vec<Sentence> = read_sentences(&io.input, sep)?
                .iter()
                .map(|s| {
                    let undone = subword::bpe_undo(s, config.marker);
                    dangling += undone.dangling;
                    undone.sentence
                })
                .collect();
            if dangling > 0 {
                eprintln!("warning: stripped {dangling} dangling join markers");
            }
            write_sentences(io.output.as_deref(), &out, sep)
        }
        Command::EntityTag { io, spans, sidecar } => {
            let sentences = read_sentences(&io.input, sep)?;
            let spans = read_spans(&spans)?;
            same_length(sentences.len(), spans.len())?;
            let opts = config.tag_options();
            let mut out = Vec::with_capacity(sentences.len());
            let mut records = String::new();
            for (i, (s, sp)) in sentences.iter().zip(&spans).enumerate() {
                let (tagged, side) = entity::tag_entities(s, sp, &opts).map_err(|e| at_line(&io.input, i, e))?;
                out.push(tagged);
                records.push_str(&side.to_line());
                records.push('\n');
            }
            if let Some(p) = sidecar {
                write_out(Some(&p), &records)?;
            }
            write_sentences(io.output.as_deref(), &out, sep)
        }
        Command::PreparePairs {
            pairs,
            spans,
            align,
            out,
        } => {
            let prepared = prepare_all(&pairs, &spans, &align, &config, false)?;
            write_pairs(&out, &prepared, sep)
        }
        Command::Duplicate {
            pairs,
            spans,
            align,
            out,
        } => {
            let prepared = prepare_all(&pairs, &spans, &align, &config, true)?;
            eprintln!("emitted {} pairs", prepared.len());
            write_pairs(&out, &prepared, sep)
        }
        Command::Restore {
            hyp,
            source,
            sidecar,
            attention,
            dict,
            output,
        } => {
            let hyps = read_sentences(&hyp, sep)?;
            let sources = read_sentences(&source, sep)?;
            let sidecars = parse_each(&sidecar, ReplacementSidecar::from_line)?;
            let attn = read_attention(&attention)?;
            let dict = read_dictionary(dict.as_deref())?;
            same_length(hyps.len(), sources.len())?;
            same_length(hyps.len(), sidecars.len())?;
            same_length(hyps.len(), attn.len())?;
            let labels = config.tag_label_set();
            let mut total = entity::RestoreReport::default();
            let mut out = Vec::with_capacity(hyps.len());
            for i in 0..hyps.len() {
                let (s, report) = entity::restore_tags(&hyps[i], &sources[i], &sidecars[i], &attn[i], &dict, &labels)
                    .map_err(|e| at_line(&hyp, i, e))?;
                total.restored += report.restored;
                total.copied += report.copied;
                total.reused += report.reused;
                total.deleted += report.deleted;
                out.push(s);
            }
            eprintln!(
                "tags: {} from dictionary, {} copied, {} reused, {} deleted",
                total.restored, total.copied, total.reused, total.deleted
            );
            if total.deleted > 0 {
                eprintln!(
                    "warning: {} hypothesis tags had no source tag and were deleted",
                    total.deleted
                );
            }
            write_sentences(output.as_deref(), &out, sep)
        }
        Command::PhraseTable { pairs, align, output } => {
            let pairs = read_pairs(&pairs, sep)?;
            let links = read_alignments(&align)?;
            let table = entity::build_phrase_table(&pairs, &links)?;
            write_out(output.as_deref(), &table.to_tsv())
        }
        Command::UnkReplace {
            hyp,
            source,
            attention,
            table,
            output,
        } => {
            let hyps = read_sentences(&hyp, sep)?;
            let sources = read_sentences(&source, sep)?;
            let attn = read_attention(&attention)?;
            let table = PhraseTable::from_tsv(&read_text(&table)?)?;
            same_length(hyps.len(), sources.len())?;
            same_length(hyps.len(), attn.len())?;
            let before = metrics::count_unks(&hyps, &config.unk_token);
            let out = (0..hyps.len())
                .map(|i| {
                    entity::replace_unknowns(&hyps[i], &sources[i], &attn[i], &table, &config.unk_token)
                        .map_err(|e| at_line(&hyp, i, e))
                })
                .collect::<Result<Vec<_>>>()?;
            let after = metrics::count_unks(&out, &config.unk_token);
            eprintln!("{} tokens: {before} before, {after} after", config.unk_token);
            write_sentences(output.as_deref(), &out, sep)
        }
        Command::CapVocab { io, vocab } => {
            let sentences = read_sentences(&io.input, sep)?;
            let (capped, kept) = pipeline::cap_vocabulary(&sentences, config.vocab_size, &config.unk_token);
            if let Some(p) = vocab {
                let text: String = kept.iter().map(|(w, c)| format!("{w}\t{c}\n")).collect();
                write_out(Some(&p), &text)?;
            }
            write_sentences(io.output.as_deref(), &capped, sep)
        }
        Command::SelectTestset {
            pairs,
            forms,
            span_presence,
            spans,
            exclude,
            take_random,
            out,
            out_spans,
        } => {
            let all = read_pairs(&pairs, sep)?;
            let spans = spans.map(|p| read_spans(&p)).transpose()?;
            let predicate = if span_presence {
                FocusPredicate::SpanPresence
            } else {
                let path =
                    forms.ok_or_else(|| Error::Invalid("either --forms or --span-presence is required".into()))?;
                let text = read_text(&path)?;
                FocusPredicate::surface_set(text.split_whitespace())?
            };
            let mut excluded = HashSet::new();
            for path in &exclude {
                let lines = read_lines(path)?;
                excluded.extend(pipeline::exclusion_set(lines.iter().map(String::as_str)));
            }
            let mut selected = pipeline::select_focused(&all, spans.as_deref(), &predicate, &excluded)?;
            eprintln!("selected {} of {} pairs", selected.len(), all.len());
            if let Some(n) = take_random {
                selected = pipeline::take_random(&selected, n, config.seed);
            }
            write_pairs(&out, &selected, sep)?;
            if let Some(p) = out_spans {
                let spans = spans.ok_or_else(|| Error::Invalid("--out-spans needs --spans".into()))?;
                let text: String = selected
                    .iter()
                    .map(|pair| entity::render_span_line(&spans[pair.id]) + "\n")
                    .collect();
                write_out(Some(&p), &text)?;
            }
            Ok(())
        }
        Command::Stats {
            input,
            subwords,
            skip_brackets,
            kv,
            output,
        } => {
            let words = read_sentences(&input, sep)?;
            let subwords = subwords.map(|p| read_sentences(&p, sep)).transpose()?;
            let mut acc = if skip_brackets {
                StatsAccumulator::skipping([OPEN_BRACKET.to_string(), CLOSE_BRACKET.to_string()])
            } else {
                StatsAccumulator::new()
            };
            for s in &words {
                acc.add_words(s);
            }
            if let Some(sub) = &subwords {
                same_length(words.len(), sub.len())?;
                for s in sub {
                    acc.add_subwords(s);
                }
            }
            let stats = acc.finish();
            let text = if kv { stats.to_key_values() } else { stats.to_table() };
            write_out(output.as_deref(), &text)
        }
        Command::Score {
            hyp,
            reference,
            metric,
            lowercase,
            sentence,
            json,
            output,
        } => {
            let hyps = lowercase_all(read_sentences(&hyp, sep)?, lowercase);
            let refs = lowercase_all(read_sentences(&reference, sep)?, lowercase);
            let names = if metric.is_empty() {
                vec![MetricName::Bleu, MetricName::Ter, MetricName::Chrf]
            } else {
                metric
            };
            let mut text = String::new();
            for name in names {
                let m = metric_of(name, &config);
                let score = m.corpus_score(&hyps, &refs)?;
                if json {
                    text.push_str(&json!({"metric": m.name(), "value": score}).to_string());
                } else {
                    text.push_str(&format!("{}\t{}", m.name(), fmt_score(score)));
                }
                text.push('\n');
                if sentence {
                    for (i, (h, r)) in hyps.iter().zip(&refs).enumerate() {
                        let s = m.score_from_stats(&m.sentence_stats(h, r));
                        if json {
                            text.push_str(&json!({"metric": m.name(), "line": i + 1, "value": s}).to_string());
                        } else {
                            text.push_str(&format!("{}\t{}\t{}", m.name(), i + 1, fmt_score(s)));
                        }
                        text.push('\n');
                    }
                }
            }
            write_out(output.as_deref(), &text)
        }
        Command::Significance {
            hyp_a,
            hyp_b,
            reference,
            metric,
            lowercase,
            json,
            output,
        } => {
            let a = lowercase_all(read_sentences(&hyp_a, sep)?, lowercase);
            let b = lowercase_all(read_sentences(&hyp_b, sep)?, lowercase);
            let refs = lowercase_all(read_sentences(&reference, sep)?, lowercase);
            let opts = BootstrapOptions {
                sample_size: config.sample_size,
                iterations: config.iterations,
                alpha: config.alpha,
                seed: config.seed,
            };
            let r = metrics::bootstrap_significance(&a, &b, &refs, metric_of(metric, &config), opts)?;
            let verdict = if r.significant {
                "significant"
            } else {
                "not significant"
            };
            let text = if json {
                json!({
                    "metric": r.metric,
                    "score_a": r.score_a,
                    "score_b": r.score_b,
                    "wins_a": r.wins_a,
                    "wins_b": r.wins_b,
                    "ties": r.ties,
                    "win_fraction": r.win_fraction,
                    "p_value": r.p_value,
                    "significant": r.significant,
                })
                .to_string()
                    + "\n"
            } else {
                format!(
                    "metric\t{}\nscore_a\t{}\nscore_b\t{}\nwin_fraction\t{}\np_value\t{}\nverdict\t{verdict}\n",
                    r.metric,
                    fmt_score(r.score_a),
                    fmt_score(r.score_b),
                    fmt_score(r.win_fraction),
                    fmt_score(r.p_value)
                )
            };
            write_out(output.as_deref(), &text)
        }
        Command::Backtranslate { input, command, out } => {
            let mono = read_sentences(&input, sep)?;
            let surfaces: Vec<Sentence> = mono.iter().map(Sentence::strip_features).collect();
            let translator = ShellTranslator::new(command, Duration::from_secs(config.translator_timeout_secs));
            let pairs = pipeline::backtranslate_round(&surfaces, &translator)?;
            write_pairs(&out, &pairs, sep)
        }
        Command::Validate {
            source,
            target,
            align,
            spans,
            reserved_tags,
        } => {
            let src = read_sentences(&source, sep)?;
            let arity =
                corpus::validate_arity(&src).map_err(|e| Error::Invalid(format!("{}: {e}", source.display())))?;
            let tgt = target.as_deref().map(|p| read_sentences(p, sep)).transpose()?;
            if let (Some(t), Some(p)) = (&tgt, &target) {
                same_length(src.len(), t.len())?;
                corpus::validate_arity(t).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
            }
            if let (Some(path), Some(t)) = (&align, &tgt) {
                let links = read_alignments(path)?;
                same_length(src.len(), links.len())?;
                for (i, l) in links.iter().enumerate() {
                    l.check_bounds(src[i].len(), t[i].len())
                        .map_err(|e| at_line(path, i, e))?;
                }
            }
            let spans = spans.map(|p| read_spans(&p).map(|s| (p, s))).transpose()?;
            if let Some((path, sp)) = &spans {
                same_length(src.len(), sp.len())?;
                for (i, s) in sp.iter().enumerate() {
                    entity::validate_spans(s, src[i].len()).map_err(|e| at_line(path, i, e))?;
                }
            }
            if reserved_tags {
                pipeline::check_reserved_tags(
                    &src,
                    spans.as_ref().map(|(_, s)| s.as_slice()),
                    &config.tag_label_set(),
                )?;
            }
            eprintln!(
                "ok: {} lines, feature arity {}",
                src.len(),
                arity.map_or("-".to_string(), |a| a.to_string())
            );
            Ok(())
        }
    }
}

/// Fixed four-decimal rendering keeps reports byte-stable.
fn fmt_score(x: f64) -> String {
    format!("{x:.4}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
