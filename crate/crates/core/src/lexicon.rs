//! Out-of-context lexicon: surface form to candidate analyses, with a
//! proper-noun backoff for unknown words.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Analysis, CandidateSet, LpgEntry, PosInventory, SetKind, SpecialTags, NO_GLOSS};
use crate::normalize::{normalize_lemma, NormProfile};
use crate::translit::{buckwalter_symbols, dediacritize, to_internal};

/// How a token's candidate set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Lexicon,
    Backoff,
    DigitPunct,
}

impl Route {
    pub fn label(self) -> &'static str {
        match self {
            Route::Lexicon => "lexicon",
            Route::Backoff => "backoff",
            Route::DigitPunct => "digit_punct",
        }
    }
}

/// Lookup key: dediacritized, alef variants unified to `A`, `Y` to `y`.
pub fn lookup_key(surface: &str) -> String {
    dediacritize(surface)
        .chars()
        .map(|c| match c {
            '|' | '<' | '>' | '{' => 'A',
            'Y' => 'y',
            c => c,
        })
        .collect()
}

fn is_punct(c: char) -> bool {
    if c.is_ascii() {
        c.is_ascii_punctuation() && !buckwalter_symbols().any(|b| b == c)
    } else {
        matches!(c, '\u{060C}' | '\u{061B}' | '\u{061F}' | '\u{066A}'..='\u{066D}' | '\u{06D4}')
            || matches!(c, '\u{2010}'..='\u{2027}' | '\u{00AB}' | '\u{00BB}')
    }
}

fn is_digit(c: char) -> bool {
    c.is_ascii_digit() || ('\u{0660}'..='\u{0669}').contains(&c)
}

/// Tokens made only of digits and punctuation form one class of their own.
pub fn is_digit_or_punct(surface: &str) -> bool {
    !surface.is_empty() && surface.chars().all(|c| is_digit(c) || is_punct(c))
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Vec<Analysis>>,
    lemma_set: HashSet<String>,
    profile: NormProfile,
    tags: SpecialTags,
}

impl Lexicon {
    pub fn empty(profile: NormProfile, tags: SpecialTags) -> Self {
        Lexicon {
            entries: HashMap::new(),
            lemma_set: HashSet::new(),
            profile,
            tags,
        }
    }

    /// Load a five-column TSV lexicon:
    /// `LOOKUP_SURFACE DIAC_FORM LEMMA POS GLOSSES`, glosses `;`-separated.
    pub fn load(
        path: &Path,
        profile: NormProfile,
        tags: SpecialTags,
        inventory: Option<&PosInventory>,
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), profile, tags, inventory)
    }

    pub fn parse(
        text: &str,
        source_name: &str,
        profile: NormProfile,
        tags: SpecialTags,
        inventory: Option<&PosInventory>,
    ) -> Result<Self> {
        let mut lex = Lexicon::empty(profile, tags);
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("expected 5 columns, found {}", cols.len()),
                ));
            }
            let wrap = |e: Error| Error::parse(source_name, line_no, e.to_string());
            let surface = to_internal(cols[0]).map_err(wrap)?;
            let diac = to_internal(cols[1]).map_err(wrap)?;
            let lemma = normalize_lemma(&to_internal(cols[2]).map_err(wrap)?, &lex.profile);
            let pos = cols[3].trim();
            if surface.is_empty() {
                return Err(Error::parse(source_name, line_no, "empty lookup surface"));
            }
            if let Some(inv) = inventory {
                if !inv.contains(pos) {
                    return Err(Error::parse(source_name, line_no, format!("POS {pos:?} not in inventory")));
                }
            }
            let glosses: Vec<&str> = cols[4].split(';').collect();
            let entry = LpgEntry::new(lemma, pos, glosses).map_err(wrap)?;
            lex.insert(&surface, entry, diac);
        }
        Ok(lex)
    }

    /// Add an analysis under `surface`'s lookup key. Identical analyses are
    /// ignored.
    pub fn insert(&mut self, surface: &str, entry: LpgEntry, diac: String) {
        let group = self.entries.entry(lookup_key(surface)).or_default();
        if group.iter().any(|a| a.entry == entry && a.diac == diac) {
            return;
        }
        self.lemma_set.insert(dediacritize(entry.lemma()));
        let rank = group.len();
        group.push(Analysis::new(entry, diac, rank));
    }

    pub fn profile(&self) -> &NormProfile {
        &self.profile
    }

    pub fn tags(&self) -> &SpecialTags {
        &self.tags
    }

    /// Number of distinct lookup keys.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Raw analyses under the surface's lookup key, in source order.
    pub fn lookup(&self, surface: &str) -> &[Analysis] {
        self.entries
            .get(&lookup_key(surface))
            .map_or(&[], Vec::as_slice)
    }

    /// All candidate LPGs for `surface`, falling back to a proper-noun
    /// reading when the lexicon has none.
    pub fn analyze(&self, surface: &str) -> Result<CandidateSet> {
        if surface.is_empty() {
            return Err(Error::EmptySurface);
        }
        let found = self.lookup(surface);
        if found.is_empty() {
            Ok(CandidateSet::new(SetKind::All, [self.backoff_analysis(surface)?]))
        } else {
            Ok(CandidateSet::new(SetKind::All, found.iter().cloned()))
        }
    }

    /// Candidate set plus the route that produced it. Digits and punctuation
    /// never reach the lexicon.
    pub fn candidates(&self, surface: &str) -> Result<(CandidateSet, Route)> {
        if is_digit_or_punct(surface) {
            let a = self.digit_punct_analysis(surface)?;
            return Ok((CandidateSet::new(SetKind::All, [a]), Route::DigitPunct));
        }
        let set = self.analyze(surface)?;
        let route = if self.lookup(surface).is_empty() {
            Route::Backoff
        } else {
            Route::Lexicon
        };
        Ok((set, route))
    }

    /// Proper-noun reading of an unknown word: the normalized surface as
    /// lemma and the `NO_GLOSS` sentinel.
    pub fn backoff_analysis(&self, surface: &str) -> Result<Analysis> {
        if surface.is_empty() {
            return Err(Error::EmptySurface);
        }
        let lemma = normalize_lemma(surface, &self.profile);
        let entry = LpgEntry::new(lemma, self.tags.proper_noun.clone(), [NO_GLOSS])?;
        Ok(Analysis::new(entry, surface, 0))
    }

    /// Fixed analysis for digit and punctuation tokens.
    pub fn digit_punct_analysis(&self, surface: &str) -> Result<Analysis> {
        if surface.is_empty() {
            return Err(Error::EmptySurface);
        }
        let pos = if surface.chars().any(is_digit) {
            &self.tags.digit
        } else {
            &self.tags.punct
        };
        let entry = LpgEntry::new(surface, pos.clone(), [NO_GLOSS])?;
        Ok(Analysis::new(entry, surface, 0))
    }

    /// Dediacritized projection of every lemma in the lexicon.
    pub fn lemma_inventory(&self) -> &HashSet<String> {
        &self.lemma_set
    }

    /// Every distinct LPG in the lexicon, keyed by [`LpgEntry::key`].
    pub fn all_entries(&self) -> BTreeMap<String, LpgEntry> {
        self.entries
            .values()
            .flatten()
            .map(|a| (a.key(), a.entry.clone()))
            .collect()
    }
}
