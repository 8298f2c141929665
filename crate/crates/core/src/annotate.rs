//! Source-side representations built from lexicon and parser output:
//! ambiguity-class features, POS-filtered ambiguity classes, raw POS
//! features and linearized parse trees.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::corpus::{AnnotatedToken, Sentence};
use crate::lexicon::{AmbiguityIndex, FeatureBundle, LexiconEntry};

/// Opening bracket token of a linearized constituent (U+2985).
pub const OPEN_BRACKET: &str = "\u{2985}";
/// Closing bracket token of a linearized constituent (U+2986).
pub const CLOSE_BRACKET: &str = "\u{2986}";
/// Feature carried by bracket tokens.
pub const BRACKET_FEATURE: &str = "BR";
/// Sentinel leaf emitted around sentences by the parser.
pub const SENTINEL: &str = "$";

pub const DEFAULT_BRACKETED_LABELS: [&str; 5] = ["CLS", "NP", "PP", "AP", "ADVP"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotateError {
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("unbalanced parentheses at byte {offset}")]
    UnbalancedParens { offset: usize },
    #[error("empty node at byte {offset}")]
    EmptyNode { offset: usize },
    #[error("unexpected input after tree at byte {offset}")]
    TrailingInput { offset: usize },
    #[error("line {line}: malformed tag map entry")]
    MalformedTagMap { line: usize },
}

/// External POS tag → lexicon categories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PosTagMap {
    map: HashMap<String, BTreeSet<String>>,
}

impl PosTagMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a mapping. Empty category sets are ignored so that unmapped
    /// tags stay absent.
    pub fn insert<I, S>(&mut self, tag: impl Into<String>, categories: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let cats: BTreeSet<String> = categories.into_iter().map(Into::into).collect();
        if !cats.is_empty() {
            self.map.entry(tag.into()).or_default().extend(cats);
        }
    }

    pub fn get(&self, tag: &str) -> Option<&BTreeSet<String>> {
        self.map.get(tag)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Parses `TAG<TAB>CAT+CAT...` lines; `#` starts a comment line.
    pub fn parse_tsv(text: &str) -> Result<Self, AnnotateError> {
        let mut map = PosTagMap::new();
        for (line, raw) in text.lines().enumerate() {
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (tag, cats) = raw.split_once('\t').ok_or(AnnotateError::MalformedTagMap { line })?;
            let cats: Vec<&str> = cats.split('+').map(str::trim).filter(|c| !c.is_empty()).collect();
            if tag.trim().is_empty() || cats.is_empty() {
                return Err(AnnotateError::MalformedTagMap { line });
            }
            map.insert(tag.trim(), cats);
        }
        Ok(map)
    }

    /// A best-effort Penn Treebank mapping.
    pub fn penn_default() -> Self {
        let mut map = PosTagMap::new();
        for tag in ["NN", "NNS", "NNP", "NNPS"] {
            map.insert(tag, ["NST"]);
        }
        for tag in ["VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "MD"] {
            map.insert(tag, ["VST"]);
        }
        for tag in ["JJ", "JJR", "JJS"] {
            map.insert(tag, ["AST"]);
        }
        for tag in ["RB", "RBR", "RBS", "WRB"] {
            map.insert(tag, ["ADV"]);
        }
        map.insert("IN", ["PREP", "CONJ"]);
        map.insert("TO", ["PREP"]);
        map.insert("DT", ["DET"]);
        map.insert("PDT", ["DET"]);
        map.insert("WDT", ["DET"]);
        map.insert("PRP", ["PRN"]);
        map.insert("PRP$", ["DET", "PRN"]);
        map.insert("WP", ["PRN"]);
        map.insert("CC", ["CONJ"]);
        map.insert("CD", ["NO"]);
        map
    }
}

fn push_bundle(token: &AnnotatedToken, bundle: FeatureBundle) -> AnnotatedToken {
    token.clone().push_feature(bundle.cat_tag).push_feature(bundle.cl_tag)
}

/// Attaches the `[CAT, CL]` ambiguity-class features to every token.
pub fn annotate_catcl(sentence: &Sentence, index: &AmbiguityIndex) -> Sentence {
    Sentence::new(
        sentence
            .tokens
            .iter()
            .map(|t| push_bundle(t, FeatureBundle::from_entries(index.lookup(&t.surface))))
            .collect(),
    )
}

/// Like [`annotate_catcl`], but analyses whose category is compatible with
/// the external tag are kept when at least one is.
pub fn disambiguate_catcl<S: AsRef<str>>(
    sentence: &Sentence,
    external_tags: &[S],
    map: &PosTagMap,
    index: &AmbiguityIndex,
) -> Result<Sentence, AnnotateError> {
    check_lengths(sentence, external_tags.len())?;
    let tokens = sentence
        .tokens
        .iter()
        .zip(external_tags)
        .map(|(token, tag)| {
            let entries = index.lookup(&token.surface);
            let matching: Vec<&LexiconEntry> = match map.get(tag.as_ref()) {
                Some(cats) => entries.iter().filter(|e| cats.contains(&e.category)).collect(),
                None => Vec::new(),
            };
            let bundle = if matching.is_empty() {
                FeatureBundle::from_entries(entries)
            } else {
                FeatureBundle::from_entries(matching)
            };
            push_bundle(token, bundle)
        })
        .collect();
    Ok(Sentence::new(tokens))
}

/// Attaches each external tag verbatim as a single feature.
pub fn annotate_pos<S: AsRef<str>>(sentence: &Sentence, external_tags: &[S]) -> Result<Sentence, AnnotateError> {
    check_lengths(sentence, external_tags.len())?;
    Ok(Sentence::new(
        sentence
            .tokens
            .iter()
            .zip(external_tags)
            .map(|(t, tag)| t.clone().push_feature(tag.as_ref()))
            .collect(),
    ))
}

fn check_lengths(sentence: &Sentence, tags: usize) -> Result<(), AnnotateError> {
    if sentence.len() != tags {
        return Err(AnnotateError::LengthMismatch {
            tokens: sentence.len(),
            tags,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseTree {
    Node { label: String, children: Vec<ParseTree> },
    Leaf(String),
}

impl ParseTree {
    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        ParseTree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn leaf(surface: impl Into<String>) -> Self {
        ParseTree::Leaf(surface.into())
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            ParseTree::Node { label, .. } => Some(label),
            ParseTree::Leaf(_) => None,
        }
    }

    /// Leaf surfaces in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ParseTree::Leaf(s) => out.push(s),
            ParseTree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    fn leaf_count(&self) -> usize {
        match self {
            ParseTree::Leaf(_) => 1,
            ParseTree::Node { children, .. } => children.iter().map(ParseTree::leaf_count).sum(),
        }
    }

    /// Drops every leaf equal to `sentinel` and any node left childless.
    /// Returns `None` when nothing remains.
    pub fn without_leaves(&self, sentinel: &str) -> Option<ParseTree> {
        match self {
            ParseTree::Leaf(s) if s == sentinel => None,
            ParseTree::Leaf(s) => Some(ParseTree::Leaf(s.clone())),
            ParseTree::Node { label, children } => {
                let children: Vec<ParseTree> = children.iter().filter_map(|c| c.without_leaves(sentinel)).collect();
                if children.is_empty() {
                    None
                } else {
                    Some(ParseTree::node(label.clone(), children))
                }
            }
        }
    }
}

fn strip_rule_id(label: &str) -> &str {
    match label.rsplit_once(':') {
        Some((head, id)) if !head.is_empty() && id.chars().all(|c| c.is_ascii_digit()) => head,
        _ => label,
    }
}

#[derive(Debug)]
enum TreeToken<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
}

fn tree_tokens(text: &str) -> Vec<TreeToken<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(TreeToken::Atom(s, &text[s..i]));
            }
            match c {
                '(' => out.push(TreeToken::Open(i)),
                ')' => out.push(TreeToken::Close(i)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(TreeToken::Atom(s, &text[s..]));
    }
    out
}

/// Parses a `(LABEL child ...)` tree. `:digits` rule ids are stripped from
/// labels and a label-less single-child wrapper is unwrapped.
pub fn parse_bracketed_tree(text: &str) -> Result<ParseTree, AnnotateError> {
    let tokens = tree_tokens(text);
    let mut pos = 0;
    let tree = match tokens.first() {
        Some(TreeToken::Open(_)) => parse_node(&tokens, &mut pos, text.len())?,
        Some(TreeToken::Atom(_, a)) => {
            pos = 1;
            ParseTree::leaf(*a)
        }
        Some(TreeToken::Close(at)) => return Err(AnnotateError::UnbalancedParens { offset: *at }),
        None => return Err(AnnotateError::EmptyNode { offset: 0 }),
    };
    match tokens.get(pos) {
        None => Ok(tree),
        Some(TreeToken::Close(at)) => Err(AnnotateError::UnbalancedParens { offset: *at }),
        Some(TreeToken::Open(at)) | Some(TreeToken::Atom(at, _)) => Err(AnnotateError::TrailingInput { offset: *at }),
    }
}

fn parse_node(tokens: &[TreeToken<'_>], pos: &mut usize, end: usize) -> Result<ParseTree, AnnotateError> {
    let open = match tokens[*pos] {
        TreeToken::Open(at) => at,
        _ => unreachable!("parse_node starts at an opening paren"),
    };
    *pos += 1;
    let label = match tokens.get(*pos) {
        Some(TreeToken::Atom(_, a)) => {
            *pos += 1;
            Some(strip_rule_id(a).to_string())
        }
        Some(TreeToken::Close(_)) => return Err(AnnotateError::EmptyNode { offset: open }),
        Some(TreeToken::Open(_)) => None,
        None => return Err(AnnotateError::UnbalancedParens { offset: open }),
    };
    let mut children = Vec::new();
    loop {
        match tokens.get(*pos) {
            None => return Err(AnnotateError::UnbalancedParens { offset: end.min(open) }),
            Some(TreeToken::Close(_)) => {
                *pos += 1;
                break;
            }
            Some(TreeToken::Open(_)) => children.push(parse_node(tokens, pos, end)?),
            Some(TreeToken::Atom(_, a)) => {
                children.push(ParseTree::leaf(*a));
                *pos += 1;
            }
        }
    }
    match label {
        Some(label) if !children.is_empty() => Ok(ParseTree::node(label, children)),
        None if children.len() == 1 => Ok(children.pop().expect("one child")),
        _ => Err(AnnotateError::EmptyNode { offset: open }),
    }
}

/// Flattens a tree into its word sequence, wrapping every constituent of at
/// least two words whose label is in `bracketed_labels` in `⦅ … ⦆` tokens.
/// A constituent spanning exactly the same words as an already bracketed
/// ancestor is not bracketed again.
///
/// Each word carries one feature: the label two levels above its
/// preterminal, falling back to the preterminal's parent and then the root.
/// Bracket tokens carry [`BRACKET_FEATURE`].
pub fn linearize_tree(tree: &ParseTree, bracketed_labels: &HashSet<String>) -> Sentence {
    let mut out = Vec::new();
    let mut path = Vec::new();
    walk(tree, bracketed_labels, &mut path, None, &mut out);
    Sentence::new(out)
}

fn bracket(surface: &str) -> AnnotatedToken {
    AnnotatedToken::with_features(surface, [BRACKET_FEATURE])
}

fn walk<'a>(
    tree: &'a ParseTree,
    bracketed: &HashSet<String>,
    path: &mut Vec<&'a str>,
    enclosing_width: Option<usize>,
    out: &mut Vec<AnnotatedToken>,
) {
    match tree {
        ParseTree::Leaf(surface) => {
            // path ends at the preterminal
            let n = path.len();
            let phrase = if n >= 3 {
                path[n - 3]
            } else if n == 2 {
                path[0]
            } else {
                path.first().copied().unwrap_or("")
            };
            out.push(AnnotatedToken::with_features(surface.clone(), [phrase]));
        }
        ParseTree::Node { label, children } => {
            let width = tree.leaf_count();
            let open = bracketed.contains(label) && width >= 2 && enclosing_width != Some(width);
            // `enclosing_width` only suppresses unary chains: it resets as
            // soon as a node spans fewer words than the bracketed ancestor.
            let inner_enclosing = if open {
                Some(width)
            } else if enclosing_width == Some(width) {
                enclosing_width
            } else {
                None
            };
            if open {
                out.push(bracket(OPEN_BRACKET));
            }
            path.push(label);
            for child in children {
                walk(child, bracketed, path, inner_enclosing, out);
            }
            path.pop();
            if open {
                out.push(bracket(CLOSE_BRACKET));
            }
        }
    }
}

pub fn default_bracketed_labels() -> HashSet<String> {
    DEFAULT_BRACKETED_LABELS.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
pub(crate) const EXAMPLE_TREE: &str = "(S:169 ($: $) (CLS:135 (NP:97 (NO:57 (PRN I))) \
(PRED:83 (VB:60 (VST own))) (NP:130 (DETP:61 (DET the)) (NO:62 (NST house))) \
(PP:107 (PREPP:68 (PREP down)) (NP:103 (DETP:69 (DET the)) (NO:70 (NST street))))) ($: $))";
