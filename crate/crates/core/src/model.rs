//! Analyses, tokens, sentences and candidate sets.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Gloss placed on analyses that carry no English sense (backoff, digits,
/// punctuation). Kept verbatim, never lowercased.
pub const NO_GLOSS: &str = "NO_GLOSS";

const KEY_SEP: char = '#';
const GLOSS_SEP: char = ';';
const ESCAPE: char = '\\';

/// A (lemma, POS, glosses) triple.
///
/// Glosses are lowercased, deduplicated and sorted on construction so that
/// two entries listing the same senses in a different order compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LpgEntry {
    lemma: String,
    pos: String,
    glosses: Vec<String>,
}

fn check_field(what: &str, value: &str) -> Result<()> {
    if value.is_empty() {
        return Err(Error::InvalidEntry(format!("empty {what}")));
    }
    if value.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidEntry(format!("{what} {value:?} contains a control separator")));
    }
    Ok(())
}

pub(crate) fn canonical_gloss(g: &str) -> String {
    let g = g.trim();
    if g == NO_GLOSS {
        g.to_owned()
    } else {
        g.to_lowercase()
    }
}

/// Canonical gloss list: trimmed, lowercased, deduplicated, sorted.
pub(crate) fn canonical_glosses<I, S>(glosses: I) -> Result<Vec<String>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = Vec::new();
    for g in glosses {
        let g = canonical_gloss(g.as_ref());
        check_field("gloss", &g)?;
        out.push(g);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

impl LpgEntry {
    pub fn new<I, S>(lemma: impl Into<String>, pos: impl Into<String>, glosses: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let lemma = lemma.into();
        let pos = pos.into();
        check_field("lemma", &lemma)?;
        check_field("POS", &pos)?;
        let glosses = canonical_glosses(glosses)?;
        if glosses.is_empty() {
            return Err(Error::InvalidEntry(format!("{lemma}/{pos} has no gloss")));
        }
        Ok(LpgEntry { lemma, pos, glosses })
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn pos(&self) -> &str {
        &self.pos
    }

    pub fn glosses(&self) -> &[String] {
        &self.glosses
    }

    /// Canonical identifier of the entry; see [`lpg_key`].
    pub fn key(&self) -> String {
        lpg_key(self)
    }

    /// Inverse of [`lpg_key`].
    pub fn from_key(key: &str) -> Result<Self> {
        let parts = split_escaped(key, KEY_SEP);
        if parts.len() != 3 {
            return Err(Error::InvalidEntry(format!("malformed LPG key {key:?}")));
        }
        let glosses: Vec<String> = split_escaped(&parts[2], GLOSS_SEP)
            .iter()
            .map(|g| unescape(g))
            .collect();
        LpgEntry::new(unescape(&parts[0]), unescape(&parts[1]), glosses)
    }

    pub fn gloss_field(&self) -> String {
        self.glosses.join(";")
    }
}

impl fmt::Display for LpgEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.lemma, self.pos, self.gloss_field())
    }
}

fn escape_into(out: &mut String, s: &str) {
    for c in s.chars() {
        if matches!(c, KEY_SEP | GLOSS_SEP | ESCAPE) {
            out.push(ESCAPE);
        }
        out.push(c);
    }
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == ESCAPE {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Split on unescaped `sep`, leaving escapes in place.
fn split_escaped(s: &str, sep: char) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == ESCAPE {
            let last = parts.last_mut().unwrap();
            last.push(c);
            if let Some(n) = chars.next() {
                last.push(n);
            }
        } else if c == sep {
            parts.push(String::new());
        } else {
            parts.last_mut().unwrap().push(c);
        }
    }
    parts
}

/// `lemma#pos#gloss1;gloss2`, with `#`, `;` and `\` escaped inside fields.
/// Injective over canonical entries.
pub fn lpg_key(entry: &LpgEntry) -> String {
    let mut key = String::with_capacity(entry.lemma.len() + entry.pos.len() + 16);
    escape_into(&mut key, &entry.lemma);
    key.push(KEY_SEP);
    escape_into(&mut key, &entry.pos);
    key.push(KEY_SEP);
    for (i, g) in entry.glosses.iter().enumerate() {
        if i > 0 {
            key.push(GLOSS_SEP);
        }
        escape_into(&mut key, g);
    }
    key
}

/// A possibly partial gold reference: any subset of lemma, POS and glosses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gold {
    pub lemma: Option<String>,
    pub pos: Option<String>,
    /// Empty when the source has no gloss annotation.
    pub glosses: Vec<String>,
}

impl Gold {
    pub fn new(lemma: Option<String>, pos: Option<String>, glosses: Vec<String>) -> Result<Self> {
        if let Some(l) = &lemma {
            check_field("lemma", l)?;
        }
        if let Some(p) = &pos {
            check_field("POS", p)?;
        }
        Ok(Gold {
            lemma,
            pos,
            glosses: canonical_glosses(glosses)?,
        })
    }

    pub fn from_entry(entry: &LpgEntry) -> Self {
        Gold {
            lemma: Some(entry.lemma.clone()),
            pos: Some(entry.pos.clone()),
            glosses: entry.glosses.clone(),
        }
    }

    pub fn has_glosses(&self) -> bool {
        !self.glosses.is_empty()
    }

    /// The full entry, when all three components are present.
    pub fn to_entry(&self) -> Option<LpgEntry> {
        match (&self.lemma, &self.pos) {
            (Some(l), Some(p)) if self.has_glosses() => LpgEntry::new(l.clone(), p.clone(), &self.glosses).ok(),
            _ => None,
        }
    }
}

/// One analyzer candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub entry: LpgEntry,
    /// Fully diacritized surface form.
    pub diac: String,
    /// Position in the analyzer output.
    pub source_rank: usize,
    /// Set once a POS tagger top-set has accepted the candidate.
    pub tagger_score: Option<f64>,
}

impl Analysis {
    pub fn new(entry: LpgEntry, diac: impl Into<String>, source_rank: usize) -> Self {
        Analysis {
            entry,
            diac: diac.into(),
            source_rank,
            tagger_score: None,
        }
    }

    pub fn key(&self) -> String {
        self.entry.key()
    }
}

/// A corpus token.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub sentence_id: String,
    pub index: usize,
    pub surface: String,
    pub gold: Gold,
}

impl Token {
    /// Only tokens with a gold lemma count in evaluation.
    pub fn is_evaluatable(&self) -> bool {
        self.gold.lemma.is_some()
    }
}

/// A sentence with its optional English translation and word alignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
    pub translation: Option<Vec<String>>,
    /// Token index to English word indices.
    pub alignment: Option<BTreeMap<usize, Vec<usize>>>,
}

impl Sentence {
    /// Check the token and alignment index invariants.
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i {
                return Err(Error::InvalidEntry(format!(
                    "sentence {}: token {} found at position {i}",
                    self.id, t.index
                )));
            }
        }
        if let Some(alignment) = &self.alignment {
            let n_words = self.translation.as_ref().map_or(0, Vec::len);
            for (&src, targets) in alignment {
                if src >= self.tokens.len() {
                    return Err(Error::AlignmentOutOfRange {
                        sentence: self.id.clone(),
                        detail: format!("source index {src} >= {} tokens", self.tokens.len()),
                    });
                }
                if let Some(&t) = targets.iter().find(|&&t| t >= n_words) {
                    return Err(Error::AlignmentOutOfRange {
                        sentence: self.id.clone(),
                        detail: format!("target index {t} >= {n_words} words"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    All,
    Top,
}

/// Candidate analyses for one token. No two candidates share an LPG key.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub kind: SetKind,
    pub candidates: Vec<Analysis>,
}

impl CandidateSet {
    /// Build a set, dropping later candidates whose LPG repeats an earlier one.
    pub fn new(kind: SetKind, analyses: impl IntoIterator<Item = Analysis>) -> Self {
        let mut seen = HashSet::new();
        let candidates = analyses
            .into_iter()
            .filter(|a| seen.insert(a.key()))
            .collect();
        CandidateSet { kind, candidates }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.candidates.iter().any(|a| a.key() == key)
    }
}

/// Reserved POS tags for analyses the lexicon does not supply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTags {
    pub proper_noun: String,
    pub digit: String,
    pub punct: String,
}

impl Default for SpecialTags {
    fn default() -> Self {
        SpecialTags {
            proper_noun: "noun_prop".to_owned(),
            digit: "digit".to_owned(),
            punct: "punc".to_owned(),
        }
    }
}

/// Closed POS tag inventory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PosInventory {
    tags: BTreeSet<String>,
}

impl PosInventory {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(tags: I) -> Self {
        PosInventory {
            tags: tags.into_iter().map(Into::into).collect(),
        }
    }

    /// One tag per line; blank lines and `#` comments skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let mut tags = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let tag = line.trim();
            if tag.is_empty() || tag.starts_with('#') {
                continue;
            }
            if tag.contains(char::is_whitespace) {
                return Err(Error::parse(&name, i + 1, format!("POS tag {tag:?} contains whitespace")));
            }
            tags.insert(tag.to_owned());
        }
        Ok(PosInventory { tags })
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn insert(&mut self, tag: impl Into<String>) {
        self.tags.insert(tag.into());
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}
