//! Monolingual lexicon entries in s-expression form and bilingual term
//! dictionaries.
//!
//! A lexicon entry looks like
//!
//! ```text
//! ("snake" NST ALO "snake" CL (P-S S-01) KN CNT ON CO SX (N) TYN (ANI))
//! ```
//!
//! The quoted headword comes first, then the category, then alternating
//! `KEY value` pairs where a value is an atom, a quoted string or a
//! parenthesized group.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

/// Placeholder feature for surfaces missing from the lexicon.
pub const UNKNOWN_TAG: &str = "NONE";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("unbalanced parentheses at byte {offset}")]
    UnbalancedParens { offset: usize },
    #[error("unterminated string starting at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("unexpected atom outside a form at byte {offset}")]
    StrayAtom { offset: usize },
    #[error("entry {entry} has no surface")]
    MissingSurface { entry: usize },
    #[error("entry {entry} has no category")]
    MissingCategory { entry: usize },
    #[error("line {line}: expected 3 tab-separated fields")]
    MissingField { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Reader<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn string(&mut self) -> Result<Sexp, LexiconError> {
        let start = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(LexiconError::UnterminatedString { offset: start }),
                Some('"') => return Ok(Sexp::Str(out)),
                Some('\\') => match self.bump() {
                    Some(c) => out.push(c),
                    None => return Err(LexiconError::UnterminatedString { offset: start }),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn atom(&mut self) -> Sexp {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '(' || c == ')' || c == '"' || c == ';' {
                break;
            }
            self.bump();
        }
        Sexp::Atom(self.text[start..self.pos].to_string())
    }

    /// Reads the items of a list whose `(` has already been consumed.
    fn list(&mut self, open: usize) -> Result<Sexp, LexiconError> {
        let mut items = Vec::new();
        loop {
            self.skip_trivia();
            match self.peek() {
                None => return Err(LexiconError::UnbalancedParens { offset: open }),
                Some(')') => {
                    self.bump();
                    return Ok(Sexp::List(items));
                }
                Some('(') => {
                    let at = self.pos;
                    self.bump();
                    items.push(self.list(at)?);
                }
                Some('"') => items.push(self.string()?),
                Some(_) => items.push(self.atom()),
            }
        }
    }

    fn forms(mut self) -> Result<Vec<Sexp>, LexiconError> {
        let mut forms = Vec::new();
        loop {
            self.skip_trivia();
            match self.peek() {
                None => return Ok(forms),
                Some('(') => {
                    let at = self.pos;
                    self.bump();
                    forms.push(self.list(at)?);
                }
                Some(')') => return Err(LexiconError::UnbalancedParens { offset: self.pos }),
                Some(_) => return Err(LexiconError::StrayAtom { offset: self.pos }),
            }
        }
    }
}

/// One lexicon analysis of a surface form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub surface: String,
    pub category: String,
    /// Attribute values in file order. A parenthesized group contributes
    /// one value per member; nested groups are kept verbatim as text.
    pub attributes: IndexMap<String, Vec<String>>,
}

impl LexiconEntry {
    /// Inflexion classes (the `CL` attribute), empty when absent.
    pub fn inflexion_classes(&self) -> &[String] {
        self.attributes.get("CL").map(Vec::as_slice).unwrap_or(&[])
    }
}

fn value_strings(value: &Sexp) -> Vec<String> {
    match value {
        Sexp::Atom(a) | Sexp::Str(a) => vec![a.clone()],
        Sexp::List(items) => items
            .iter()
            .map(|item| match item {
                Sexp::Atom(a) | Sexp::Str(a) => a.clone(),
                list => list.to_string(),
            })
            .collect(),
    }
}

/// Parses every top-level form of a lexicon file.
pub fn parse_lexicon(text: &str) -> Result<Vec<LexiconEntry>, LexiconError> {
    let forms = Reader { text, pos: 0 }.forms()?;
    let mut entries = Vec::with_capacity(forms.len());
    for (entry, form) in forms.into_iter().enumerate() {
        let Sexp::List(items) = form else {
            unreachable!("top-level forms are lists")
        };
        let mut items = items.into_iter();
        let surface = match items.next() {
            Some(Sexp::Str(s)) | Some(Sexp::Atom(s)) if !s.is_empty() => s,
            _ => return Err(LexiconError::MissingSurface { entry }),
        };
        let category = match items.next() {
            Some(Sexp::Atom(c)) | Some(Sexp::Str(c)) if !c.is_empty() => c,
            _ => return Err(LexiconError::MissingCategory { entry }),
        };
        let mut attributes: IndexMap<String, Vec<String>> = IndexMap::new();
        while let Some(key) = items.next() {
            let key = match key {
                Sexp::Atom(k) | Sexp::Str(k) => k,
                // a group in key position has no key; keep it under ""
                list => {
                    attributes.entry(String::new()).or_default().push(list.to_string());
                    continue;
                }
            };
            let values = items.next().map(|v| value_strings(&v)).unwrap_or_default();
            attributes.entry(key).or_default().extend(values);
        }
        entries.push(LexiconEntry {
            surface,
            category,
            attributes,
        });
    }
    Ok(entries)
}

/// Case-folded surface → analyses index.
#[derive(Debug, Clone, Default)]
pub struct AmbiguityIndex {
    entries_by_surface: HashMap<String, Vec<LexiconEntry>>,
}

/// The pair of ambiguity-class tags attached to a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBundle {
    pub cat_tag: String,
    pub cl_tag: String,
}

impl FeatureBundle {
    pub fn unknown() -> Self {
        FeatureBundle {
            cat_tag: UNKNOWN_TAG.to_string(),
            cl_tag: UNKNOWN_TAG.to_string(),
        }
    }

    /// Builds the tags from a set of analyses. The analyses must already be
    /// ordered by category.
    pub fn from_entries<'a, I>(entries: I) -> Self
    where
        I: IntoIterator<Item = &'a LexiconEntry>,
    {
        let entries: Vec<&LexiconEntry> = entries.into_iter().collect();
        if entries.is_empty() {
            return Self::unknown();
        }
        let cats: BTreeSet<&str> = entries.iter().map(|e| e.category.as_str()).collect();
        let cat_tag = cats.into_iter().collect::<Vec<_>>().join("_");
        let cl_tag = entries
            .iter()
            .map(|e| {
                let cl = e.inflexion_classes();
                if cl.is_empty() {
                    UNKNOWN_TAG.to_string()
                } else {
                    cl.join("+")
                }
            })
            .collect::<Vec<_>>()
            .join("_");
        FeatureBundle { cat_tag, cl_tag }
    }
}

impl AmbiguityIndex {
    pub fn build(entries: Vec<LexiconEntry>) -> Self {
        let mut entries_by_surface: HashMap<String, Vec<LexiconEntry>> = HashMap::new();
        for entry in entries {
            entries_by_surface
                .entry(entry.surface.to_lowercase())
                .or_default()
                .push(entry);
        }
        // stable: file order is kept within a category
        for list in entries_by_surface.values_mut() {
            list.sort_by(|a, b| a.category.cmp(&b.category));
        }
        AmbiguityIndex { entries_by_surface }
    }

    /// Analyses of `surface` (case-folded), ordered by category.
    pub fn lookup(&self, surface: &str) -> &[LexiconEntry] {
        self.entries_by_surface
            .get(&surface.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Sorted distinct categories of `surface`.
    pub fn categories(&self, surface: &str) -> BTreeSet<&str> {
        self.lookup(surface).iter().map(|e| e.category.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries_by_surface.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries_by_surface.is_empty()
    }

    /// Indexed headwords containing more than one word.
    pub fn multiword_surfaces(&self) -> impl Iterator<Item = &str> {
        self.entries_by_surface
            .keys()
            .filter(|k| k.contains(char::is_whitespace))
            .map(String::as_str)
    }
}

pub fn build_ambiguity_index(entries: Vec<LexiconEntry>) -> AmbiguityIndex {
    AmbiguityIndex::build(entries)
}

pub fn lookup_features(surface: &str, index: &AmbiguityIndex) -> FeatureBundle {
    FeatureBundle::from_entries(index.lookup(surface))
}

/// (source phrase, label) → target phrase.
#[derive(Debug, Clone, Default)]
pub struct TermDictionary {
    entries: HashMap<(Vec<String>, String), Vec<String>>,
    /// Number of lines that overwrote an earlier entry with the same key.
    pub duplicates: usize,
}

impl TermDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: Vec<String>, label: impl Into<String>, target: Vec<String>) {
        if self.entries.insert((source, label.into()), target).is_some() {
            self.duplicates += 1;
        }
    }

    pub fn get<S: AsRef<str>>(&self, source: &[S], label: &str) -> Option<&[String]> {
        let key = (
            source.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>(),
            label.to_string(),
        );
        self.entries.get(&key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], &str, &[String])> {
        self.entries
            .iter()
            .map(|((src, label), tgt)| (src.as_slice(), label.as_str(), tgt.as_slice()))
    }
}

/// Parses `source<TAB>target<TAB>label` lines. Blank lines are skipped;
/// a repeated key keeps the last line.
pub fn parse_term_dictionary(text: &str) -> Result<TermDictionary, LexiconError> {
    let mut dict = TermDictionary::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(LexiconError::MissingField { line: line_no });
        }
        let source: Vec<String> = fields[0].split_whitespace().map(str::to_string).collect();
        let target: Vec<String> = fields[1].split_whitespace().map(str::to_string).collect();
        let label = fields[2].trim();
        if source.is_empty() || target.is_empty() || label.is_empty() {
            return Err(LexiconError::MissingField { line: line_no });
        }
        dict.insert(source, label, target);
    }
    Ok(dict)
}

#[cfg(test)]
pub(crate) const SNAKE_FORMS: &str = r#"("snake" NST ALO "snake" CL (P-S S-01) KN CNT ON CO SX (N) TYN (ANI))
("snake" VST ALO "snak" ARGS ((($SUBJ N1 (TYN CNC LOC C-POT)) ($ADV DIR)))
    CL (G-ING I-E P-ED PA-ED PR-ES1) ON CO PLC (NF))
"#;
