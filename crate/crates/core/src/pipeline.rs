//! Orchestration helpers behind the command line: focused test-set
//! selection, back-translation through an external translator, vocabulary
//! capping, corpus validation and the `key = value` configuration.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{AnnotatedToken, ParallelPair, Sentence, DEFAULT_SEPARATOR};
use crate::entity::{EntitySpan, TagMode, TagOptions, TagSet, DEFAULT_UNK};
use crate::metrics::Smoothing;
use crate::subword::{MarkerMode, DEFAULT_MAX_MERGES, DEFAULT_MIN_FREQUENCY};

/// Vocabulary cap used for the reported systems.
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("translator returned {got} lines for {expected} input lines")]
    TranslatorLineMismatch { expected: usize, got: usize },
    #[error("translator timed out after {0:?}")]
    TranslatorTimeout(Duration),
    #[error("translator failed: {0}")]
    TranslatorFailed(String),
    #[error("span-presence selection needs a span file")]
    MissingSpans,
    #[error("{pairs} pairs but {spans} span lines")]
    SpanLineMismatch { pairs: usize, spans: usize },
    #[error("line {line}: reserved tag {token:?} used as a plain word")]
    ReservedTag { line: usize, token: String },
    #[error("surface-set predicate needs at least one surface form")]
    EmptySurfaceSet,
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What a focused test set must contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FocusPredicate {
    /// Any source token is one of these surfaces.
    SurfaceSet(HashSet<String>),
    /// The source line has at least one entity/term span.
    SpanPresence,
}

impl FocusPredicate {
    pub fn surface_set<I, S>(forms: I) -> Result<Self, PipelineError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: HashSet<String> = forms.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(PipelineError::EmptySurfaceSet);
        }
        Ok(FocusPredicate::SurfaceSet(set))
    }
}

/// SHA-256 of a whitespace-normalized, lowercased line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineHash([u8; 32]);

impl LineHash {
    pub fn of(line: &str) -> Self {
        let normalized = line.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let digest = Sha256::digest(normalized.as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        LineHash(out)
    }
}

impl fmt::Display for LineHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Hashes of every line of the given training/development source sides.
pub fn exclusion_set<'a, I: IntoIterator<Item = &'a str>>(lines: I) -> HashSet<LineHash> {
    lines.into_iter().map(LineHash::of).collect()
}

/// Keeps the pairs that match `predicate`, whose source line is not in
/// `exclusion`, dropping repeated source lines. Order is preserved.
pub fn select_focused(
    pairs: &[ParallelPair],
    spans: Option<&[Vec<EntitySpan>]>,
    predicate: &FocusPredicate,
    exclusion: &HashSet<LineHash>,
) -> Result<Vec<ParallelPair>, PipelineError> {
    if let Some(spans) = spans {
        if spans.len() != pairs.len() {
            return Err(PipelineError::SpanLineMismatch {
                pairs: pairs.len(),
                spans: spans.len(),
            });
        }
    }
    if matches!(predicate, FocusPredicate::SpanPresence) && spans.is_none() {
        return Err(PipelineError::MissingSpans);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let matches = match predicate {
            FocusPredicate::SurfaceSet(forms) => pair.source.surfaces().any(|s| forms.contains(s)),
            FocusPredicate::SpanPresence => spans.is_some_and(|sp| !sp[i].is_empty()),
        };
        if !matches {
            continue;
        }
        let hash = LineHash::of(&pair.source.surface_text());
        if exclusion.contains(&hash) || !seen.insert(hash) {
            continue;
        }
        out.push(pair.clone());
    }
    Ok(out)
}

/// Seeded subsample of `n` items, keeping their relative order.
pub fn take_random<T: Clone>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    if n >= items.len() {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, items.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// A line-parallel black-box translator.
pub trait Translator {
    fn translate(&self, lines: &[String]) -> Result<Vec<String>, PipelineError>;
}

impl<F> Translator for F
where
    F: Fn(&[String]) -> Result<Vec<String>, PipelineError>,
{
    fn translate(&self, lines: &[String]) -> Result<Vec<String>, PipelineError> {
        self(lines)
    }
}

/// Runs a shell command that reads `{input}` and writes `{output}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShellTranslator {
    pub command: String,
    pub timeout: Duration,
}

impl ShellTranslator {
    pub fn new(command: impl Into<String>, timeout: Duration) -> Self {
        ShellTranslator {
            command: command.into(),
            timeout,
        }
    }
}

impl Translator for ShellTranslator {
    fn translate(&self, lines: &[String]) -> Result<Vec<String>, PipelineError> {
        let dir = tempfile::tempdir()?;
        let input: PathBuf = dir.path().join("input.txt");
        let output: PathBuf = dir.path().join("output.txt");
        let mut text = lines.join("\n");
        if !lines.is_empty() {
            text.push('\n');
        }
        std::fs::write(&input, text)?;
        let command = self
            .command
            .replace("{input}", &shell_quote(&input.to_string_lossy()))
            .replace("{output}", &shell_quote(&output.to_string_lossy()));
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(&command)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::inherit());
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd.spawn()?;
        let started = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if started.elapsed() >= self.timeout {
                kill_group(child.id());
                let _ = child.kill();
                let _ = child.wait();
                return Err(PipelineError::TranslatorTimeout(self.timeout));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        if !status.success() {
            return Err(PipelineError::TranslatorFailed(format!(
                "{command:?} exited with {status}"
            )));
        }
        let raw = std::fs::read_to_string(&output)?;
        Ok(crate::corpus::read_lines(raw.as_bytes())?)
    }
}

/// Kills the translator's whole process group so that commands it spawned
/// do not outlive the timeout.
fn kill_group(pid: u32) {
    #[cfg(unix)]
    let _ = Command::new("kill")
        .args(["-KILL", "--", &format!("-{pid}")])
        .stderr(Stdio::null())
        .status();
    #[cfg(not(unix))]
    let _ = pid;
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "'\\''"))
}

/// Translates target-language text into synthetic sources and pairs each
/// translation with its original line.
pub fn backtranslate_round<T: Translator + ?Sized>(
    mono_target: &[Sentence],
    translator: &T,
) -> Result<Vec<ParallelPair>, PipelineError> {
    let lines: Vec<String> = mono_target.iter().map(Sentence::surface_text).collect();
    let translated = translator.translate(&lines)?;
    if translated.len() != lines.len() {
        return Err(PipelineError::TranslatorLineMismatch {
            expected: lines.len(),
            got: translated.len(),
        });
    }
    Ok(translated
        .iter()
        .zip(mono_target)
        .enumerate()
        .map(|(id, (src, tgt))| ParallelPair {
            id,
            source: Sentence::from_words(src),
            target: tgt.clone(),
        })
        .collect())
}

/// Keeps the `max_size` most frequent surfaces (ties by lexicographic order)
/// and rewrites every other surface to `unk_token`. The unknown token never
/// competes for a vocabulary slot. Returns the capped corpus and the
/// vocabulary with counts, most frequent first.
pub fn cap_vocabulary(corpus: &[Sentence], max_size: usize, unk_token: &str) -> (Vec<Sentence>, Vec<(String, u64)>) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in corpus {
        for w in s.surfaces().filter(|w| *w != unk_token) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size);
    let keep: HashSet<&str> = ranked.iter().map(|(w, _)| *w).collect();
    let capped = corpus
        .iter()
        .map(|s| {
            Sentence::new(
                s.tokens
                    .iter()
                    .map(|t| {
                        if keep.contains(t.surface.as_str()) || t.surface == unk_token {
                            t.clone()
                        } else {
                            AnnotatedToken {
                                surface: unk_token.to_string(),
                                features: t.features.clone(),
                            }
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    let vocab = ranked.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    (capped, vocab)
}

/// Rejects plain words that collide with placeholder tags. Tokens covered
/// by a span of the line are allowed.
pub fn check_reserved_tags(
    corpus: &[Sentence],
    spans: Option<&[Vec<EntitySpan>]>,
    tag_labels: &HashSet<String>,
) -> Result<(), PipelineError> {
    for (line, sentence) in corpus.iter().enumerate() {
        let covered = |i: usize| {
            spans
                .and_then(|sp| sp.get(line))
                .is_some_and(|sp| sp.iter().any(|s| s.start <= i && i < s.end))
        };
        for (i, token) in sentence.tokens.iter().enumerate() {
            if tag_labels.contains(&token.surface) && !covered(i) {
                return Err(PipelineError::ReservedTag {
                    line,
                    token: token.surface.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Effective settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub separator: char,
    pub marker: MarkerMode,
    pub unk_token: String,
    pub bracketed_labels: Vec<String>,
    pub tag_mode: TagMode,
    pub tagset: TagSet,
    pub binary_tag: String,
    pub default_label: String,
    pub tag_labels: Vec<String>,
    pub max_merges: usize,
    pub min_frequency: u64,
    pub vocab_size: usize,
    pub sample_size: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub bleu_smoothing: Smoothing,
    pub translator_timeout_secs: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            separator: DEFAULT_SEPARATOR,
            marker: MarkerMode::Suffix,
            unk_token: DEFAULT_UNK.to_string(),
            bracketed_labels: crate::annotate::DEFAULT_BRACKETED_LABELS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            tag_mode: TagMode::Feature,
            tagset: TagSet::Class,
            binary_tag: "NE".to_string(),
            default_label: "GEN".to_string(),
            tag_labels: ["NE", "MED", "PERSON", "LOCATION", "ORGANIZATION", "MISC", "TITLE"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            max_merges: DEFAULT_MAX_MERGES,
            min_frequency: DEFAULT_MIN_FREQUENCY,
            vocab_size: DEFAULT_VOCAB_SIZE,
            sample_size: 1000,
            iterations: 1000,
            alpha: 0.05,
            seed: 1,
            bleu_smoothing: Smoothing::None,
            translator_timeout_secs: 3600,
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl Config {
    /// Sets one key. Unknown keys and unparsable values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        let value = value.trim();
        match key.trim() {
            "separator" => {
                let mut chars = value.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if !c.is_whitespace() => self.separator = c,
                    _ => return Err(format!("separator must be one character, got {value:?}")),
                }
            }
            "marker" => self.marker = value.parse().map_err(|e| format!("{e}"))?,
            "unk_token" => self.unk_token = value.to_string(),
            "bracketed_labels" => self.bracketed_labels = list(value),
            "tag_mode" => self.tag_mode = value.parse()?,
            "tagset" => self.tagset = value.parse()?,
            "binary_tag" => self.binary_tag = value.to_string(),
            "default_label" => self.default_label = value.to_string(),
            "tag_labels" => self.tag_labels = list(value),
            "max_merges" => self.max_merges = num(key, value)?,
            "min_frequency" => self.min_frequency = num(key, value)?,
            "vocab_size" => {
                self.vocab_size = num(key, value)?;
                if self.vocab_size == 0 {
                    return Err("vocab_size must be at least 1".to_string());
                }
            }
            "sample_size" => self.sample_size = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "bleu_smoothing" => self.bleu_smoothing = value.parse()?,
            "translator_timeout_secs" => self.translator_timeout_secs = num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of the current settings. Blank
    /// lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PipelineError::Config {
                line: i + 1,
                message: "expected key = value".to_string(),
            })?;
            self.set(key, value)
                .map_err(|message| PipelineError::Config { line: i + 1, message })?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let tag_mode = match self.tag_mode {
            TagMode::Feature => "feature",
            TagMode::Replace => "replace",
        };
        let tagset = match self.tagset {
            TagSet::Binary => "binary",
            TagSet::Class => "class",
        };
        let entries: BTreeMap<&str, String> = [
            ("separator", self.separator.to_string()),
            ("marker", self.marker.to_string()),
            ("unk_token", self.unk_token.clone()),
            ("bracketed_labels", self.bracketed_labels.join(",")),
            ("tag_mode", tag_mode.to_string()),
            ("tagset", tagset.to_string()),
            ("binary_tag", self.binary_tag.clone()),
            ("default_label", self.default_label.clone()),
            ("tag_labels", self.tag_labels.join(",")),
            ("max_merges", self.max_merges.to_string()),
            ("min_frequency", self.min_frequency.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("sample_size", self.sample_size.to_string()),
            ("iterations", self.iterations.to_string()),
            ("alpha", self.alpha.to_string()),
            ("seed", self.seed.to_string()),
            ("bleu_smoothing", self.bleu_smoothing.to_string()),
            ("translator_timeout_secs", self.translator_timeout_secs.to_string()),
        ]
        .into_iter()
        .collect();
        entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn tag_options(&self) -> TagOptions {
        TagOptions {
            mode: self.tag_mode,
            tagset: self.tagset,
            binary_tag: self.binary_tag.clone(),
            default_label: self.default_label.clone(),
        }
    }

    pub fn tag_label_set(&self) -> HashSet<String> {
        self.tag_labels.iter().cloned().collect()
    }
}
