//! Named-entity and terminology handling: feature tagging, placeholder
//! replacement, alignment projection, duplication augmentation,
//! attention-based placeholder restoration and one-token phrase tables for
//! unknown-word replacement.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AlignmentSet, AnnotatedToken, CorpusError, ParallelPair, Sentence};
use crate::lexicon::TermDictionary;

/// Separates label and phrase inside a sidecar record (U+241F).
pub const SIDECAR_UNIT_SEPARATOR: char = '\u{241F}';
pub const DEFAULT_UNK: &str = "<unk>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntityError {
    #[error("spans {0} and {1} overlap")]
    OverlappingSpans(EntitySpan, EntitySpan),
    #[error("span {span} out of bounds for sentence of length {len}")]
    SpanOutOfBounds { span: EntitySpan, len: usize },
    #[error("malformed span {0:?}")]
    MalformedSpan(String),
    #[error("malformed sidecar record {0:?}")]
    MalformedSidecar(String),
    #[error("attention is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("attention row {row} is invalid: {reason}")]
    InvalidAttention { row: usize, reason: String },
    #[error("malformed attention line: {0}")]
    MalformedAttention(String),
    #[error("sidecar has {records} records but the source has {tags} tag tokens")]
    SidecarMismatch { records: usize, tags: usize },
    #[error("line {line}: malformed phrase table entry")]
    MalformedPhraseTable { line: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// A labelled token range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        EntitySpan {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn width(&self) -> usize {
        self.end - self.start
    }

    fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.label)
    }
}

impl FromStr for EntitySpan {
    type Err = EntityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || EntityError::MalformedSpan(s.to_string());
        let mut parts = s.splitn(3, ':');
        let start = parts.next().and_then(|p| p.parse().ok()).ok_or_else(malformed)?;
        let end = parts.next().and_then(|p| p.parse().ok()).ok_or_else(malformed)?;
        let label = parts.next().filter(|l| !l.is_empty()).ok_or_else(malformed)?;
        if start >= end {
            return Err(malformed());
        }
        Ok(EntitySpan::new(start, end, label))
    }
}

/// Parses a span line: space-separated `start:end:label` triples.
pub fn parse_span_line(line: &str) -> Result<Vec<EntitySpan>, EntityError> {
    line.split_whitespace().map(str::parse).collect()
}

pub fn render_span_line(spans: &[EntitySpan]) -> String {
    spans.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// Checks bounds and overlap; returns the spans sorted by start.
pub fn validate_spans(spans: &[EntitySpan], len: usize) -> Result<Vec<EntitySpan>, EntityError> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for span in &sorted {
        if span.start >= span.end || span.end > len {
            return Err(EntityError::SpanOutOfBounds {
                span: span.clone(),
                len,
            });
        }
    }
    for w in sorted.windows(2) {
        if w[0].overlaps(&w[1]) {
            return Err(EntityError::OverlappingSpans(w[0].clone(), w[1].clone()));
        }
    }
    Ok(sorted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagMode {
    /// Every token gains one feature naming its span label.
    #[default]
    Feature,
    /// Each span collapses to one placeholder token.
    Replace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagSet {
    /// One generic tag for every span.
    Binary,
    /// The span's own label.
    #[default]
    Class,
}

impl FromStr for TagMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "feature" => Ok(TagMode::Feature),
            "replace" => Ok(TagMode::Replace),
            other => Err(format!("unknown tag mode {other:?}")),
        }
    }
}

impl FromStr for TagSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(TagSet::Binary),
            "class" => Ok(TagSet::Class),
            other => Err(format!("unknown tag set {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagOptions {
    pub mode: TagMode,
    pub tagset: TagSet,
    /// Tag used for every span when `tagset` is binary (`NE`, `MED`).
    pub binary_tag: String,
    /// Feature for tokens outside any span.
    pub default_label: String,
}

impl Default for TagOptions {
    fn default() -> Self {
        TagOptions {
            mode: TagMode::Feature,
            tagset: TagSet::Class,
            binary_tag: "NE".to_string(),
            default_label: "GEN".to_string(),
        }
    }
}

impl TagOptions {
    fn tag_for<'a>(&'a self, span: &'a EntitySpan) -> &'a str {
        match self.tagset {
            TagSet::Binary => &self.binary_tag,
            TagSet::Class => &span.label,
        }
    }
}

/// One placeholder emitted during replacement: the span's label and the
/// source phrase it stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SidecarRecord {
    pub label: String,
    pub phrase: String,
}

/// Per-sentence list of replaced phrases, in source order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplacementSidecar {
    pub records: Vec<SidecarRecord>,
}

impl ReplacementSidecar {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Tab-separated `label␟phrase` records.
    pub fn to_line(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{}{}{}", r.label, SIDECAR_UNIT_SEPARATOR, r.phrase))
            .collect::<Vec<_>>()
            .join("\t")
    }

    pub fn from_line(line: &str) -> Result<Self, EntityError> {
        if line.is_empty() {
            return Ok(Self::default());
        }
        let records = line
            .split('\t')
            .map(|rec| {
                rec.split_once(SIDECAR_UNIT_SEPARATOR)
                    .filter(|(l, p)| !l.is_empty() && !p.is_empty())
                    .map(|(l, p)| SidecarRecord {
                        label: l.to_string(),
                        phrase: p.to_string(),
                    })
                    .ok_or_else(|| EntityError::MalformedSidecar(rec.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(ReplacementSidecar { records })
    }
}

/// Tags the spans of one sentence, either as a feature on every token or by
/// replacing each span with a single placeholder token.
pub fn tag_entities(
    sentence: &Sentence,
    spans: &[EntitySpan],
    options: &TagOptions,
) -> Result<(Sentence, ReplacementSidecar), EntityError> {
    let spans = validate_spans(spans, sentence.len())?;
    let mut sidecar = ReplacementSidecar::default();
    let tokens = match options.mode {
        TagMode::Feature => {
            let mut labels = vec![options.default_label.as_str(); sentence.len()];
            for span in &spans {
                for l in &mut labels[span.start..span.end] {
                    *l = options.tag_for(span);
                }
            }
            sentence
                .tokens
                .iter()
                .zip(labels)
                .map(|(t, l)| t.clone().push_feature(l))
                .collect()
        }
        TagMode::Replace => {
            let mut out = Vec::with_capacity(sentence.len());
            let mut next = 0;
            for span in &spans {
                out.extend_from_slice(&sentence.tokens[next..span.start]);
                let covered = &sentence.tokens[span.start..span.end];
                out.push(AnnotatedToken {
                    surface: options.tag_for(span).to_string(),
                    features: covered[0].features.clone(),
                });
                sidecar.records.push(SidecarRecord {
                    label: span.label.clone(),
                    phrase: covered.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "),
                });
                next = span.end;
            }
            out.extend_from_slice(&sentence.tokens[next..]);
            out
        }
    };
    Ok((Sentence::new(tokens), sidecar))
}

/// Projected spans plus the number of spans dropped on conflict.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Projection {
    pub spans: Vec<EntitySpan>,
    pub dropped: usize,
}

/// Carries source spans over to the target through word alignments. Each
/// target span is the smallest contiguous range covering every linked
/// target index. Overlapping projections merge when labels agree; otherwise
/// the later source span is dropped.
pub fn project_spans(src_spans: &[EntitySpan], alignments: &AlignmentSet, tgt_len: usize) -> Projection {
    let mut sorted = src_spans.to_vec();
    sorted.sort();
    let mut accepted: Vec<EntitySpan> = Vec::new();
    let mut dropped = 0;
    for span in &sorted {
        let linked: Vec<usize> = (span.start..span.end)
            .flat_map(|s| alignments.targets_of(s))
            .filter(|&t| t < tgt_len)
            .collect();
        let (Some(&lo), Some(&hi)) = (linked.iter().min(), linked.iter().max()) else {
            continue;
        };
        let mut candidate = EntitySpan::new(lo, hi + 1, span.label.clone());
        let overlapping: Vec<usize> = accepted
            .iter()
            .enumerate()
            .filter(|(_, a)| a.overlaps(&candidate))
            .map(|(i, _)| i)
            .collect();
        if overlapping.iter().any(|&i| accepted[i].label != candidate.label) {
            dropped += 1;
            continue;
        }
        for &i in overlapping.iter().rev() {
            let a = accepted.remove(i);
            candidate.start = candidate.start.min(a.start);
            candidate.end = candidate.end.max(a.end);
        }
        accepted.push(candidate);
    }
    accepted.sort();
    // a merge can grow a span into one accepted earlier
    let mut merged: Vec<EntitySpan> = Vec::with_capacity(accepted.len());
    for span in accepted {
        match merged.last_mut() {
            Some(prev) if prev.overlaps(&span) && prev.label == span.label => {
                prev.end = prev.end.max(span.end);
            }
            Some(prev) if prev.overlaps(&span) => dropped += 1,
            _ => merged.push(span),
        }
    }
    Projection { spans: merged, dropped }
}

/// Applies source tagging to a training pair. In replace mode the aligned
/// target tokens are replaced with the same placeholders; in feature mode
/// the target is left untouched.
pub fn prepare_training_pair(
    pair: &ParallelPair,
    src_spans: &[EntitySpan],
    alignments: &AlignmentSet,
    options: &TagOptions,
) -> Result<ParallelPair, EntityError> {
    alignments.check_bounds(pair.source.len(), pair.target.len())?;
    let (source, _) = tag_entities(&pair.source, src_spans, options)?;
    let target = match options.mode {
        TagMode::Feature => pair.target.clone(),
        TagMode::Replace => {
            let projected = project_spans(src_spans, alignments, pair.target.len());
            tag_entities(&pair.target, &projected.spans, options)?.0
        }
    };
    Ok(ParallelPair {
        id: pair.id,
        source,
        target,
    })
}

/// Emits every pair processed; pairs with at least one span are emitted a
/// second time as if they had none. Output ids are renumbered in order.
pub fn duplicate_augment<'a, I>(corpus: I, options: &TagOptions) -> Result<Vec<ParallelPair>, EntityError>
where
    I: IntoIterator<Item = (&'a ParallelPair, &'a [EntitySpan], &'a AlignmentSet)>,
{
    let mut out = Vec::new();
    for (pair, spans, alignments) in corpus {
        out.push(prepare_training_pair(pair, spans, alignments, options)?);
        if !spans.is_empty() {
            out.push(prepare_training_pair(pair, &[], alignments, options)?);
        }
    }
    for (id, p) in out.iter_mut().enumerate() {
        p.id = id;
    }
    Ok(out)
}

/// Soft alignment between hypothesis tokens (rows) and source tokens
/// (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrix {
    #[serde(rename = "attn")]
    rows: Vec<Vec<f64>>,
}

pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

impl AttentionMatrix {
    /// Validates non-negativity, a uniform row width and rows summing to 1.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, EntityError> {
        let cols = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(EntityError::InvalidAttention {
                    row: i,
                    reason: format!("{} columns, expected {cols}", row.len()),
                });
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(EntityError::InvalidAttention {
                    row: i,
                    reason: "negative or non-finite weight".to_string(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(EntityError::InvalidAttention {
                    row: i,
                    reason: format!("row sums to {sum}"),
                });
            }
        }
        Ok(AttentionMatrix { rows })
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.rows[row]
    }

    /// Highest-weight column of `row` among `cols`; ties go to the lowest
    /// column.
    pub fn argmax_among<I: IntoIterator<Item = usize>>(&self, row: usize, cols: I) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in cols {
            let w = self.rows[row][c];
            match best {
                Some((_, bw)) if w <= bw => {}
                _ => best = Some((c, w)),
            }
        }
        best.map(|(c, _)| c)
    }

    pub fn check_dims(&self, rows: usize, cols: usize) -> Result<(), EntityError> {
        // an empty hypothesis carries no row to tell the width
        let width_ok = self.rows() == 0 || self.cols() == cols;
        if self.rows() != rows || !width_ok {
            return Err(EntityError::DimensionMismatch {
                rows: self.rows(),
                cols: self.cols(),
                expected_rows: rows,
                expected_cols: cols,
            });
        }
        Ok(())
    }

    /// Parses one `{"attn": [[...], ...]}` JSON line.
    pub fn from_json_line(line: &str) -> Result<Self, EntityError> {
        let raw: AttentionMatrix =
            serde_json::from_str(line).map_err(|e| EntityError::MalformedAttention(e.to_string()))?;
        AttentionMatrix::new(raw.rows)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("attention serializes")
    }
}

/// Outcome counters of [`restore_tags`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RestoreReport {
    pub restored: usize,
    /// Placeholders translated by copying the source phrase.
    pub copied: usize,
    /// Hypothesis placeholders whose source tag had already been used.
    pub reused: usize,
    /// Placeholders deleted because the source had no tag at all.
    pub deleted: usize,
}

/// Replaces placeholder tokens of a hypothesis with translations of the
/// source phrases they stand for.
///
/// Hypothesis placeholders are visited left to right. Each is matched to
/// the unused source placeholder with the same label that it attends to
/// most; failing that, to any unused source placeholder; failing that, to
/// the most attended source placeholder overall. The placeholder becomes
/// `dict[(phrase, label)]`, or the source phrase itself on a dictionary
/// miss.
pub fn restore_tags(
    hypothesis: &Sentence,
    processed_source: &Sentence,
    sidecar: &ReplacementSidecar,
    attention: &AttentionMatrix,
    dict: &TermDictionary,
    tag_labels: &HashSet<String>,
) -> Result<(Sentence, RestoreReport), EntityError> {
    attention.check_dims(hypothesis.len(), processed_source.len())?;
    let src_tags: Vec<usize> = processed_source
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| tag_labels.contains(&t.surface))
        .map(|(i, _)| i)
        .collect();
    if src_tags.len() != sidecar.len() {
        return Err(EntityError::SidecarMismatch {
            records: sidecar.len(),
            tags: src_tags.len(),
        });
    }
    let mut consumed = vec![false; src_tags.len()];
    let mut report = RestoreReport::default();
    let mut out = Vec::with_capacity(hypothesis.len());
    for (row, token) in hypothesis.tokens.iter().enumerate() {
        if !tag_labels.contains(&token.surface) {
            out.push(token.clone());
            continue;
        }
        let pick = |filter: &dyn Fn(usize) -> bool| {
            attention
                .argmax_among(row, (0..src_tags.len()).filter(|&k| filter(k)).map(|k| src_tags[k]))
                .map(|col| src_tags.iter().position(|&c| c == col).expect("tag column"))
        };
        let same_label = |k: usize| !consumed[k] && processed_source.tokens[src_tags[k]].surface == token.surface;
        let chosen = pick(&same_label)
            .or_else(|| pick(&|k| !consumed[k]))
            .map(|k| (k, false))
            .or_else(|| pick(&|_| true).map(|k| (k, true)));
        let Some((k, reused)) = chosen else {
            report.deleted += 1;
            continue;
        };
        consumed[k] = true;
        if reused {
            report.reused += 1;
        }
        let record = &sidecar.records[k];
        let phrase: Vec<&str> = record.phrase.split_whitespace().collect();
        let translation: Vec<String> = match dict
            .get(&phrase, &record.label)
            .or_else(|| dict.get(&phrase, &token.surface))
        {
            Some(t) => {
                report.restored += 1;
                t.to_vec()
            }
            None => {
                report.copied += 1;
                phrase.iter().map(|s| s.to_string()).collect()
            }
        };
        out.extend(translation.into_iter().map(|surface| AnnotatedToken {
            surface,
            features: token.features.clone(),
        }));
    }
    Ok((Sentence::new(out), report))
}

/// Single-token translation counts; lookups return the most frequent target.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseTable {
    counts: HashMap<String, BTreeMap<String, u64>>,
}

impl PhraseTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, source: &str, target: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .counts
            .entry(source.to_string())
            .or_default()
            .entry(target.to_string())
            .or_default() += count;
    }

    /// Most frequent target; ties go to the lexicographically smallest.
    pub fn lookup(&self, source: &str) -> Option<&str> {
        let targets = self.counts.get(source)?;
        let mut best: Option<(&str, u64)> = None;
        // BTreeMap iterates in ascending order, so strict > keeps the
        // smallest target among equal counts
        for (t, &c) in targets {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((t, c));
            }
        }
        best.map(|(t, _)| t)
    }

    pub fn merge(mut self, other: PhraseTable) -> PhraseTable {
        for (src, targets) in other.counts {
            let entry = self.counts.entry(src).or_default();
            for (tgt, c) in targets {
                *entry.entry(tgt).or_default() += c;
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `src<TAB>tgt<TAB>count` lines, sorted.
    pub fn to_tsv(&self) -> String {
        let mut sources: Vec<&String> = self.counts.keys().collect();
        sources.sort();
        let mut out = String::new();
        for src in sources {
            for (tgt, c) in &self.counts[src] {
                out.push_str(&format!("{src}\t{tgt}\t{c}\n"));
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, EntityError> {
        let mut table = PhraseTable::new();
        for (line, raw) in text.lines().enumerate() {
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            if raw.is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            let count = match fields.as_slice() {
                [s, t, c] if !s.is_empty() && !t.is_empty() => c
                    .parse::<u64>()
                    .ok()
                    .filter(|&c| c >= 1)
                    .ok_or(EntityError::MalformedPhraseTable { line })?,
                [s, t] if !s.is_empty() && !t.is_empty() => 1,
                _ => return Err(EntityError::MalformedPhraseTable { line }),
            };
            table.add(fields[0], fields[1], count);
        }
        Ok(table)
    }
}

/// Counts aligned `(source surface → target surface)` pairs.
pub fn build_phrase_table<'a, P, A>(pairs: P, alignments: A) -> Result<PhraseTable, EntityError>
where
    P: IntoIterator<Item = &'a ParallelPair>,
    A: IntoIterator<Item = &'a AlignmentSet>,
{
    let pairs: Vec<&ParallelPair> = pairs.into_iter().collect();
    let alignments: Vec<&AlignmentSet> = alignments.into_iter().collect();
    if pairs.len() != alignments.len() {
        return Err(CorpusError::LineCountMismatch {
            left: pairs.len(),
            right: alignments.len(),
        }
        .into());
    }
    let mut table = PhraseTable::new();
    for (pair, links) in pairs.into_iter().zip(alignments) {
        links.check_bounds(pair.source.len(), pair.target.len())?;
        for (s, t) in links.iter() {
            table.add(&pair.source.tokens[s].surface, &pair.target.tokens[t].surface, 1);
        }
    }
    Ok(table)
}

/// Replaces every `unk_token` in the hypothesis by the table translation of
/// its most attended source token, or by that source token itself.
pub fn replace_unknowns(
    hypothesis: &Sentence,
    source: &Sentence,
    attention: &AttentionMatrix,
    table: &PhraseTable,
    unk_token: &str,
) -> Result<Sentence, EntityError> {
    attention.check_dims(hypothesis.len(), source.len())?;
    let tokens = hypothesis
        .tokens
        .iter()
        .enumerate()
        .map(|(row, token)| {
            if token.surface != unk_token {
                return token.clone();
            }
            let Some(col) = attention.argmax_among(row, 0..source.len()) else {
                return token.clone();
            };
            let src = &source.tokens[col].surface;
            AnnotatedToken {
                surface: table.lookup(src).unwrap_or(src).to_string(),
                features: token.features.clone(),
            }
        })
        .collect();
    Ok(Sentence::new(tokens))
}

/// Longest-match scan for dictionary source phrases; returns
/// non-overlapping spans labelled with the dictionary label. When one
/// phrase carries several labels, the lexicographically smallest wins.
pub fn detect_terms(sentence: &Sentence, dict: &TermDictionary) -> Vec<EntitySpan> {
    let mut by_phrase: HashMap<Vec<&str>, &str> = HashMap::new();
    let mut max_len = 0;
    for (src, label, _) in dict.iter() {
        let key: Vec<&str> = src.iter().map(String::as_str).collect();
        max_len = max_len.max(key.len());
        by_phrase
            .entry(key)
            .and_modify(|l| {
                if label < *l {
                    *l = label
                }
            })
            .or_insert(label);
    }
    let words: Vec<&str> = sentence.surfaces().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let longest = (1..=max_len.min(words.len() - i))
            .rev()
            .find_map(|n| by_phrase.get(&words[i..i + n]).map(|l| (n, *l)));
        match longest {
            Some((n, label)) => {
                spans.push(EntitySpan::new(i, i + n, label));
                i += n;
            }
            None => i += 1,
        }
    }
    spans
}
