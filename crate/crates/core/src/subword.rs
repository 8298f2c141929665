//! Byte-pair encoding that keeps word features on every subword piece.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{AnnotatedToken, Sentence};

/// Join marker placed on pieces that continue into a neighbour.
pub const JOIN_MARKER: &str = "@@";
/// End-of-word sentinel used while learning and applying merges.
pub const END_OF_WORD: &str = "</w>";
/// Merge cap used for the reported systems.
pub const DEFAULT_MAX_MERGES: usize = 32_000;
pub const DEFAULT_MIN_FREQUENCY: u64 = 2;

const MODEL_MAGIC: &str = "#bpe";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubwordError {
    #[error("missing or malformed model header")]
    BadHeader,
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown marker convention {0:?}")]
    UnknownMarker(String),
    #[error("line {line}: malformed merge {text:?}")]
    MalformedMerge { line: usize, text: String },
    #[error("line {line}: duplicate merge {text:?}")]
    DuplicateMerge { line: usize, text: String },
}

/// Where the join marker goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MarkerMode {
    /// `cardio@@ logist`: every non-final piece ends with the marker.
    #[default]
    Suffix,
    /// `cardio @@logist`: every non-initial piece starts with the marker.
    Prefix,
}

impl fmt::Display for MarkerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkerMode::Suffix => "suffix",
            MarkerMode::Prefix => "prefix",
        })
    }
}

impl FromStr for MarkerMode {
    type Err = SubwordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "suffix" => Ok(MarkerMode::Suffix),
            "prefix" => Ok(MarkerMode::Prefix),
            other => Err(SubwordError::UnknownMarker(other.to_string())),
        }
    }
}

/// An ordered merge list. Merges apply in learned order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    pub marker: MarkerMode,
}

impl BpeModel {
    pub fn from_merges(merges: Vec<(String, String)>, marker: MarkerMode) -> Self {
        let mut ranks = HashMap::with_capacity(merges.len());
        let mut unique = Vec::with_capacity(merges.len());
        for pair in merges {
            if !ranks.contains_key(&pair) {
                ranks.insert(pair.clone(), unique.len());
                unique.push(pair);
            }
        }
        BpeModel {
            merges: unique,
            ranks,
            marker,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn with_marker(mut self, marker: MarkerMode) -> Self {
        self.marker = marker;
        self
    }

    /// Serializes as a header line followed by one `left right` merge per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_MAGIC} version={MODEL_VERSION} marker={}\n", self.marker);
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SubwordError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(SubwordError::BadHeader)?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(MODEL_MAGIC) {
            return Err(SubwordError::BadHeader);
        }
        let mut version = None;
        let mut marker = None;
        for field in fields {
            match field.split_once('=') {
                Some(("version", v)) => version = Some(v.parse::<u32>().map_err(|_| SubwordError::BadHeader)?),
                Some(("marker", m)) => marker = Some(m.parse::<MarkerMode>()?),
                _ => return Err(SubwordError::BadHeader),
            }
        }
        match version {
            Some(MODEL_VERSION) => {}
            Some(v) => return Err(SubwordError::UnsupportedVersion(v)),
            None => return Err(SubwordError::BadHeader),
        }
        let mut merges = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(l), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(SubwordError::MalformedMerge {
                    line: i + 1,
                    text: line.to_string(),
                });
            };
            if l.is_empty() || r.is_empty() {
                return Err(SubwordError::MalformedMerge {
                    line: i + 1,
                    text: line.to_string(),
                });
            }
            let pair = (l.to_string(), r.to_string());
            if !seen.insert(pair.clone()) {
                return Err(SubwordError::DuplicateMerge {
                    line: i + 1,
                    text: line.to_string(),
                });
            }
            merges.push(pair);
        }
        Ok(BpeModel::from_merges(merges, marker.unwrap_or_default()))
    }

    /// Splits one word into pieces, without join markers.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        if symbols.is_empty() {
            return Vec::new();
        }
        loop {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&rank| (rank, i)))
                .min();
            let Some((rank, _)) = best else { break };
            let (left, right) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == left && &symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        if let Some(last) = symbols.last_mut() {
            let trimmed = last.len() - END_OF_WORD.len();
            last.truncate(trimmed);
        }
        symbols
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    chars
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == n {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

/// Heap key: highest count first, then lexicographically smallest pair.
#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    pair: Reverse<(String, String)>,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count.cmp(&other.count).then_with(|| self.pair.cmp(&other.pair))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Learns merges greedily from word frequencies of the corpus surfaces.
///
/// Stops after `max_merges` merges or when the most frequent pair occurs
/// fewer than `min_frequency` times. Ties go to the lexicographically
/// smallest `(left, right)` pair.
pub fn bpe_learn<'a, I>(corpus: I, max_merges: usize, min_frequency: u64) -> BpeModel
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut word_freq: HashMap<&str, u64> = HashMap::new();
    for sentence in corpus {
        for surface in sentence.surfaces() {
            *word_freq.entry(surface).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = word_freq.into_iter().collect();
    vocab.sort_unstable();
    let mut words: Vec<Vec<String>> = vocab.iter().map(|(w, _)| initial_symbols(w)).collect();
    let freqs: Vec<u64> = vocab.iter().map(|&(_, f)| f).collect();

    let mut pair_counts: HashMap<(String, String), u64> = HashMap::new();
    let mut pair_words: HashMap<(String, String), HashSet<usize>> = HashMap::new();
    for (wi, symbols) in words.iter().enumerate() {
        for w in symbols.windows(2) {
            let pair = (w[0].clone(), w[1].clone());
            *pair_counts.entry(pair.clone()).or_default() += freqs[wi];
            pair_words.entry(pair).or_default().insert(wi);
        }
    }
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .map(|(pair, &count)| Candidate {
            count,
            pair: Reverse(pair.clone()),
        })
        .collect();

    let min_frequency = min_frequency.max(1);
    let mut merges = Vec::new();
    while merges.len() < max_merges {
        let Some(Candidate {
            count,
            pair: Reverse(pair),
        }) = heap.pop()
        else {
            break;
        };
        // skip stale heap entries
        if pair_counts.get(&pair).copied().unwrap_or(0) != count {
            continue;
        }
        if count < min_frequency {
            break;
        }
        let merged_symbol = format!("{}{}", pair.0, pair.1);
        let mut affected: Vec<usize> = pair_words
            .remove(&pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        let mut touched: HashSet<(String, String)> = HashSet::new();
        for wi in affected {
            let freq = freqs[wi];
            let old = std::mem::take(&mut words[wi]);
            for w in old.windows(2) {
                let p = (w[0].clone(), w[1].clone());
                if let Some(c) = pair_counts.get_mut(&p) {
                    *c -= freq;
                }
                touched.insert(p);
            }
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && old[i] == pair.0 && old[i + 1] == pair.1 {
                    new.push(merged_symbol.clone());
                    i += 2;
                } else {
                    new.push(old[i].clone());
                    i += 1;
                }
            }
            for w in new.windows(2) {
                let p = (w[0].clone(), w[1].clone());
                *pair_counts.entry(p.clone()).or_default() += freq;
                pair_words.entry(p.clone()).or_default().insert(wi);
                touched.insert(p);
            }
            words[wi] = new;
        }
        for p in touched {
            let c = pair_counts.get(&p).copied().unwrap_or(0);
            if c == 0 {
                pair_counts.remove(&p);
                pair_words.remove(&p);
            } else {
                heap.push(Candidate {
                    count: c,
                    pair: Reverse(p),
                });
            }
        }
        pair_counts.remove(&pair);
        merges.push(pair);
    }
    BpeModel::from_merges(merges, MarkerMode::Suffix)
}

/// Segments every word of the sentence; pieces inherit the word's features.
pub fn bpe_apply(sentence: &Sentence, model: &BpeModel) -> Sentence {
    let mut tokens = Vec::with_capacity(sentence.len());
    for token in &sentence.tokens {
        let pieces = model.segment_word(&token.surface);
        let last = pieces.len().saturating_sub(1);
        for (i, piece) in pieces.into_iter().enumerate() {
            let surface = match model.marker {
                MarkerMode::Suffix if i < last => format!("{piece}{JOIN_MARKER}"),
                MarkerMode::Prefix if i > 0 => format!("{JOIN_MARKER}{piece}"),
                _ => piece,
            };
            tokens.push(AnnotatedToken {
                surface,
                features: token.features.clone(),
            });
        }
    }
    Sentence::new(tokens)
}

/// Result of [`bpe_undo`]: the rejoined sentence and how many dangling
/// markers were found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Undone {
    pub sentence: Sentence,
    pub dangling: usize,
}

/// Rejoins marked pieces. A joined word keeps the features of its first
/// piece. A marker with nothing to join to is stripped and counted.
pub fn bpe_undo(sentence: &Sentence, marker: MarkerMode) -> Undone {
    let mut out: Vec<AnnotatedToken> = Vec::with_capacity(sentence.len());
    let mut dangling = 0;
    match marker {
        MarkerMode::Suffix => {
            let mut pending: Option<AnnotatedToken> = None;
            for token in &sentence.tokens {
                let (text, continues) = match token.surface.strip_suffix(JOIN_MARKER) {
                    Some(stem) => (stem, true),
                    None => (token.surface.as_str(), false),
                };
                let current = match pending.take() {
                    Some(mut acc) => {
                        acc.surface.push_str(text);
                        acc
                    }
                    None => AnnotatedToken {
                        surface: text.to_string(),
                        features: token.features.clone(),
                    },
                };
                if continues {
                    pending = Some(current);
                } else {
                    out.push(current);
                }
            }
            if let Some(acc) = pending {
                dangling += 1;
                out.push(acc);
            }
        }
        MarkerMode::Prefix => {
            for token in &sentence.tokens {
                match token.surface.strip_prefix(JOIN_MARKER) {
                    Some(rest) => match out.last_mut() {
                        Some(prev) => prev.surface.push_str(rest),
                        None => {
                            dangling += 1;
                            out.push(AnnotatedToken {
                                surface: rest.to_string(),
                                features: token.features.clone(),
                            });
                        }
                    },
                    None => out.push(token.clone()),
                }
            }
        }
    }
    // a bare marker token can leave an empty surface behind
    out.retain(|t| !t.surface.is_empty());
    Undone {
        sentence: Sentence::new(out),
        dangling,
    }
}
