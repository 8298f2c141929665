//! Feature-annotated tokens, parallel pairs, word alignments and corpus
//! statistics, plus the line-oriented text formats they travel in.
//!
//! A token line is a space-delimited list of fields, each of the form
//! `surface[SEP feature]*`. The separator defaults to `￨` (U+FFE8), the
//! character feature-aware NMT toolkits expect; ASCII `|` is accepted too.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

/// Default word-feature separator (U+FFE8 HALFWIDTH FORMS LIGHT VERTICAL).
pub const DEFAULT_SEPARATOR: char = '\u{FFE8}';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("field {field} has an empty surface: {text:?}")]
    EmptySurface { field: usize, text: String },
    #[error("field {field} has an empty feature: {text:?}")]
    EmptyFeature { field: usize, text: String },
    #[error("token {text:?} contains the separator or whitespace")]
    SeparatorCollision { text: String },
    #[error("malformed alignment pair {pair:?}")]
    MalformedPair { pair: String },
    #[error("line count mismatch: {left} vs {right}")]
    LineCountMismatch { left: usize, right: usize },
    #[error("line {line}: feature arity {found}, expected {expected}")]
    RaggedFeatures { line: usize, expected: usize, found: usize },
    #[error("alignment link {src}-{tgt} out of bounds for lengths {src_len}/{tgt_len}")]
    AlignmentOutOfBounds {
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },
}

/// A surface string with an ordered list of word features.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedToken {
    pub surface: String,
    pub features: Vec<String>,
}

impl AnnotatedToken {
    pub fn new(surface: impl Into<String>) -> Self {
        AnnotatedToken {
            surface: surface.into(),
            features: Vec::new(),
        }
    }

    pub fn with_features<I, S>(surface: impl Into<String>, features: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AnnotatedToken {
            surface: surface.into(),
            features: features.into_iter().map(Into::into).collect(),
        }
    }

    /// Returns a copy of this token with `feature` appended.
    pub fn push_feature(mut self, feature: impl Into<String>) -> Self {
        self.features.push(feature.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub tokens: Vec<AnnotatedToken>,
}

impl Sentence {
    pub fn new(tokens: Vec<AnnotatedToken>) -> Self {
        Sentence { tokens }
    }

    /// Builds a feature-less sentence from whitespace-separated words.
    pub fn from_words(text: &str) -> Self {
        Sentence {
            tokens: text.split_whitespace().map(AnnotatedToken::new).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// Surfaces joined by single spaces, features dropped.
    pub fn surface_text(&self) -> String {
        self.surfaces().collect::<Vec<_>>().join(" ")
    }

    /// Copy of the sentence with every feature removed.
    pub fn strip_features(&self) -> Sentence {
        Sentence {
            tokens: self
                .tokens
                .iter()
                .map(|t| AnnotatedToken::new(t.surface.clone()))
                .collect(),
        }
    }

    /// Feature arity if uniform over all tokens, `None` for mixed arity.
    /// An empty sentence reports `Some(0)`.
    pub fn feature_arity(&self) -> Option<usize> {
        let mut arity = None;
        for token in &self.tokens {
            match arity {
                None => arity = Some(token.features.len()),
                Some(a) if a != token.features.len() => return None,
                _ => {}
            }
        }
        Some(arity.unwrap_or(0))
    }

    pub fn to_lowercase(&self) -> Sentence {
        Sentence {
            tokens: self
                .tokens
                .iter()
                .map(|t| AnnotatedToken {
                    surface: t.surface.to_lowercase(),
                    features: t.features.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface_text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub id: usize,
    pub source: Sentence,
    pub target: Sentence,
}

/// Parses one token line.
pub fn parse_token_line(line: &str, separator: char) -> Result<Sentence, CorpusError> {
    let mut tokens = Vec::new();
    for (field_idx, field) in line.split_whitespace().enumerate() {
        let mut parts = field.split(separator);
        let surface = parts.next().unwrap_or_default();
        if surface.is_empty() {
            return Err(CorpusError::EmptySurface {
                field: field_idx,
                text: field.to_string(),
            });
        }
        let mut features = Vec::new();
        for feat in parts {
            if feat.is_empty() {
                return Err(CorpusError::EmptyFeature {
                    field: field_idx,
                    text: field.to_string(),
                });
            }
            features.push(feat.to_string());
        }
        tokens.push(AnnotatedToken {
            surface: surface.to_string(),
            features,
        });
    }
    Ok(Sentence { tokens })
}

fn check_piece(piece: &str, separator: char) -> Result<(), CorpusError> {
    if piece.is_empty() || piece.contains(separator) || piece.chars().any(char::is_whitespace) {
        return Err(CorpusError::SeparatorCollision {
            text: piece.to_string(),
        });
    }
    Ok(())
}

/// Renders a sentence as a token line. Inverse of [`parse_token_line`].
pub fn render_token_line(sentence: &Sentence, separator: char) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (i, token) in sentence.tokens.iter().enumerate() {
        check_piece(&token.surface, separator)?;
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&token.surface);
        for feat in &token.features {
            check_piece(feat, separator)?;
            out.push(separator);
            out.push_str(feat);
        }
    }
    Ok(out)
}

/// A set of word-alignment links, 0-based `(source, target)` indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentSet {
    links: BTreeSet<(usize, usize)>,
}

impl AlignmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: usize, tgt: usize) {
        self.links.insert((src, tgt));
    }

    pub fn contains(&self, src: usize, tgt: usize) -> bool {
        self.links.contains(&(src, tgt))
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Links in ascending `(source, target)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    /// Target indices linked to `src`.
    pub fn targets_of(&self, src: usize) -> impl Iterator<Item = usize> + '_ {
        self.links.range((src, 0)..=(src, usize::MAX)).map(|&(_, t)| t)
    }

    pub fn check_bounds(&self, src_len: usize, tgt_len: usize) -> Result<(), CorpusError> {
        for &(src, tgt) in &self.links {
            if src >= src_len || tgt >= tgt_len {
                return Err(CorpusError::AlignmentOutOfBounds {
                    src,
                    tgt,
                    src_len,
                    tgt_len,
                });
            }
        }
        Ok(())
    }

    /// Pharaoh rendering, `i-j` pairs in ascending order.
    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(|(s, t)| format!("{s}-{t}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl FromIterator<(usize, usize)> for AlignmentSet {
    fn from_iter<T: IntoIterator<Item = (usize, usize)>>(iter: T) -> Self {
        AlignmentSet {
            links: iter.into_iter().collect(),
        }
    }
}

/// Parses a Pharaoh-format alignment line (`0-0 1-2 ...`).
pub fn read_alignment_line(line: &str) -> Result<AlignmentSet, CorpusError> {
    let mut set = AlignmentSet::new();
    for pair in line.split_whitespace() {
        let malformed = || CorpusError::MalformedPair { pair: pair.to_string() };
        let (s, t) = pair.split_once('-').ok_or_else(malformed)?;
        let s: usize = s.parse().map_err(|_| malformed())?;
        let t: usize = t.parse().map_err(|_| malformed())?;
        set.insert(s, t);
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub words: usize,
    pub vocab: usize,
    pub subwords: usize,
    pub subword_vocab: usize,
    pub lines: usize,
}

impl CorpusStats {
    /// Aligned-column report.
    pub fn to_table(&self) -> String {
        let rows = [
            ("lines", self.lines),
            ("words", self.words),
            ("vocab", self.vocab),
            ("subwords", self.subwords),
            ("subword_vocab", self.subword_vocab),
        ];
        let mut out = String::new();
        for (name, value) in rows {
            out.push_str(&format!("{name:<14}{value:>12}\n"));
        }
        out
    }

    /// Machine-readable `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "lines={}\nwords={}\nvocab={}\nsubwords={}\nsubword_vocab={}\n",
            self.lines, self.words, self.vocab, self.subwords, self.subword_vocab
        )
    }
}

/// Streaming accumulator behind [`corpus_stats`]. Accumulators over
/// disjoint chunks merge into the accumulator of the concatenation.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    words: usize,
    lines: usize,
    vocab: HashSet<String>,
    subwords: usize,
    subword_lines: usize,
    subword_vocab: HashSet<String>,
    skip_surfaces: HashSet<String>,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Surfaces ignored by every count (e.g. tree bracket tokens).
    pub fn skipping<I: IntoIterator<Item = String>>(surfaces: I) -> Self {
        StatsAccumulator {
            skip_surfaces: surfaces.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn add_words(&mut self, sentence: &Sentence) {
        self.lines += 1;
        for s in sentence.surfaces() {
            if self.skip_surfaces.contains(s) {
                continue;
            }
            self.words += 1;
            if !self.vocab.contains(s) {
                self.vocab.insert(s.to_string());
            }
        }
    }

    pub fn add_subwords(&mut self, sentence: &Sentence) {
        self.subword_lines += 1;
        for s in sentence.surfaces() {
            if self.skip_surfaces.contains(s) {
                continue;
            }
            self.subwords += 1;
            if !self.subword_vocab.contains(s) {
                self.subword_vocab.insert(s.to_string());
            }
        }
    }

    pub fn merge(mut self, other: StatsAccumulator) -> StatsAccumulator {
        self.words += other.words;
        self.lines += other.lines;
        self.subwords += other.subwords;
        self.subword_lines += other.subword_lines;
        self.vocab.extend(other.vocab);
        self.subword_vocab.extend(other.subword_vocab);
        self.skip_surfaces.extend(other.skip_surfaces);
        self
    }

    pub fn finish(&self) -> CorpusStats {
        CorpusStats {
            words: self.words,
            vocab: self.vocab.len(),
            subwords: self.subwords,
            subword_vocab: self.subword_vocab.len(),
            lines: self.lines,
        }
    }
}

/// Counts words, vocabulary and lines, plus subword counts when a
/// line-parallel segmented rendering is given.
pub fn corpus_stats<'a, W, S>(words: W, subwords: Option<S>) -> Result<CorpusStats, CorpusError>
where
    W: IntoIterator<Item = &'a Sentence>,
    S: IntoIterator<Item = &'a Sentence>,
{
    let mut acc = StatsAccumulator::new();
    for s in words {
        acc.add_words(s);
    }
    if let Some(subwords) = subwords {
        for s in subwords {
            acc.add_subwords(s);
        }
        if acc.subword_lines != acc.lines {
            return Err(CorpusError::LineCountMismatch {
                left: acc.lines,
                right: acc.subword_lines,
            });
        }
    }
    Ok(acc.finish())
}

/// Checks that every token across `sentences` has the same feature arity.
/// Returns the common arity (`None` for a corpus without tokens).
pub fn validate_arity<'a, I>(sentences: I) -> Result<Option<usize>, CorpusError>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut expected: Option<usize> = None;
    for (line, sentence) in sentences.into_iter().enumerate() {
        for token in &sentence.tokens {
            let found = token.features.len();
            match expected {
                None => expected = Some(found),
                Some(e) if e != found => {
                    return Err(CorpusError::RaggedFeatures {
                        line,
                        expected: e,
                        found,
                    })
                }
                _ => {}
            }
        }
    }
    Ok(expected)
}

/// Reads UTF-8 lines, splitting on `\n` and stripping one trailing `\r`.
pub fn read_lines<R: BufRead>(reader: R) -> std::io::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let mut line = line?;
        if line.ends_with('\r') {
            line.pop();
        }
        out.push(line);
    }
    Ok(out)
}
