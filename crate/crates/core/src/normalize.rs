//! Lemma normalization rules.
//!
//! The rules run in a fixed order and the whole sequence is repeated until
//! the string stops changing, so the result is always a fixpoint.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::translit::{is_diacritic, is_tanween, DAGGER_ALEF, SHADDA};

const FIXPOINT_LIMIT: usize = 64;

/// One normalization rule. Variant order is application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormRule {
    /// `Yi` becomes `yi`.
    AlefMaqsuraKasra,
    /// Shadda comes first in its diacritic cluster; doubled shadda collapses.
    ShaddaOrder,
    /// Lemma `{i` becomes `Ai`.
    AlefWaslaKasra,
    /// Short vowels and sukun directly before alef are dropped.
    LongVowelDiacritics,
    /// `a` before dagger alef is dropped, then dagger alef becomes `a`.
    DaggerAlef,
    /// Tanween written before the last letter moves onto it.
    TanweenPosition,
    /// Vowels and sukun on the last letter are dropped; shadda and tanween stay.
    FinalLetterDiacritics,
    /// A shadda on a lemma-initial sun letter is dropped.
    SunLetterShadda,
    /// Remaining `{` becomes `A`.
    AlefWasla,
}

impl NormRule {
    pub const ALL: [NormRule; 9] = [
        NormRule::AlefMaqsuraKasra,
        NormRule::ShaddaOrder,
        NormRule::AlefWaslaKasra,
        NormRule::LongVowelDiacritics,
        NormRule::DaggerAlef,
        NormRule::TanweenPosition,
        NormRule::FinalLetterDiacritics,
        NormRule::SunLetterShadda,
        NormRule::AlefWasla,
    ];

    fn apply(self, s: &str) -> String {
        match self {
            NormRule::AlefMaqsuraKasra => s.replace("Yi", "yi"),
            NormRule::ShaddaOrder => shadda_first(s),
            NormRule::AlefWaslaKasra => s.replace("{i", "Ai"),
            NormRule::LongVowelDiacritics => drop_vowels_before_alef(s),
            NormRule::DaggerAlef => s.replace("a`", "`").replace(DAGGER_ALEF, "a"),
            NormRule::TanweenPosition => shift_tanween(s),
            NormRule::FinalLetterDiacritics => strip_final_vowels(s),
            NormRule::SunLetterShadda => drop_initial_sun_shadda(s),
            NormRule::AlefWasla => s.replace('{', "A"),
        }
    }
}

/// Which rules run, plus an optional table of whole-lemma substitutions for
/// dataset-specific fixes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormProfile {
    rules: BTreeSet<NormRule>,
    substitutions: BTreeMap<String, String>,
}

impl Default for NormProfile {
    /// Every rule except the Quran-specific sun letter shadda removal.
    fn default() -> Self {
        let rules = NormRule::ALL
            .into_iter()
            .filter(|&r| r != NormRule::SunLetterShadda)
            .collect();
        NormProfile {
            rules,
            substitutions: BTreeMap::new(),
        }
    }
}

impl NormProfile {
    pub fn none() -> Self {
        NormProfile {
            rules: BTreeSet::new(),
            substitutions: BTreeMap::new(),
        }
    }

    pub fn with_rule(mut self, rule: NormRule, enabled: bool) -> Self {
        if enabled {
            self.rules.insert(rule);
        } else {
            self.rules.remove(&rule);
        }
        self
    }

    pub fn with_sun_letter_shadda_removal(self, enabled: bool) -> Self {
        self.with_rule(NormRule::SunLetterShadda, enabled)
    }

    pub fn sun_letter_shadda_removal(&self) -> bool {
        self.rules.contains(&NormRule::SunLetterShadda)
    }

    pub fn is_enabled(&self, rule: NormRule) -> bool {
        self.rules.contains(&rule)
    }

    /// Enabled rules in application order.
    pub fn rules(&self) -> impl Iterator<Item = NormRule> + '_ {
        self.rules.iter().copied()
    }

    /// Install whole-lemma substitutions. A replacement may not itself be a
    /// key, otherwise the table could rewrite forever.
    pub fn with_substitutions(mut self, table: BTreeMap<String, String>) -> Result<Self> {
        if let Some((k, v)) = table.iter().find(|(_, v)| table.contains_key(*v)) {
            return Err(Error::Config(format!(
                "substitution {k:?} -> {v:?} chains into another substitution"
            )));
        }
        self.substitutions = table;
        Ok(self)
    }

    /// Read a two-column TSV substitution table.
    pub fn load_substitutions(self, path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let mut table = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(Error::parse(&name, i + 1, "expected FROM<TAB>TO"));
            }
            let from = crate::translit::to_internal(cols[0])?;
            let to = crate::translit::to_internal(cols[1])?;
            table.insert(from, to);
        }
        self.with_substitutions(table)
    }
}

/// Normalize a Buckwalter lemma under `profile`.
pub fn normalize_lemma(lemma: &str, profile: &NormProfile) -> String {
    let mut current = lemma.to_owned();
    for _ in 0..FIXPOINT_LIMIT {
        let mut next = current.clone();
        for rule in profile.rules() {
            next = rule.apply(&next);
        }
        if let Some(sub) = profile.substitutions.get(&next) {
            next = sub.clone();
        }
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn shadda_first(s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    loop {
        chars.dedup_by(|b, a| *a == SHADDA && *b == SHADDA);
        let mut swapped = false;
        for i in 1..chars.len() {
            if chars[i] == SHADDA && is_diacritic(chars[i - 1]) && chars[i - 1] != SHADDA {
                chars.swap(i - 1, i);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    chars.into_iter().collect()
}

fn is_short_vowel_or_sukun(c: char) -> bool {
    matches!(c, 'a' | 'u' | 'i' | 'o')
}

fn drop_vowels_before_alef(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    for (i, &c) in chars.iter().enumerate() {
        if is_short_vowel_or_sukun(c) && chars.get(i + 1) == Some(&'A') {
            continue;
        }
        out.push(c);
    }
    out
}

fn last_letter(chars: &[char]) -> Option<usize> {
    chars.iter().rposition(|&c| !is_diacritic(c))
}

fn shift_tanween(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let Some(last) = last_letter(&chars) else {
        return s.to_owned();
    };
    let misplaced = chars[..last].iter().copied().find(|&c| is_tanween(c));
    let Some(tanween) = misplaced else {
        return s.to_owned();
    };
    let mut out: Vec<char> = chars
        .iter()
        .enumerate()
        .filter(|&(i, &c)| i > last || !is_tanween(c))
        .map(|(_, &c)| c)
        .collect();
    if !chars[last + 1..].iter().any(|&c| is_tanween(c)) {
        out.push(tanween);
    }
    out.into_iter().collect()
}

fn strip_final_vowels(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let Some(last) = last_letter(&chars) else {
        return s.to_owned();
    };
    chars
        .iter()
        .enumerate()
        .filter(|&(i, &c)| i <= last || !(is_short_vowel_or_sukun(c) || c == DAGGER_ALEF))
        .map(|(_, &c)| c)
        .collect()
}

const SUN_LETTERS: &[char] = &[
    't', 'v', 'd', '*', 'r', 'z', 's', '$', 'S', 'D', 'T', 'Z', 'l', 'n',
];

fn drop_initial_sun_shadda(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    match chars.first() {
        Some(c) if SUN_LETTERS.contains(c) => {}
        _ => return s.to_owned(),
    }
    let cluster_end = chars[1..]
        .iter()
        .position(|&c| !is_diacritic(c))
        .map_or(chars.len(), |p| p + 1);
    chars
        .iter()
        .enumerate()
        .filter(|&(i, &c)| !(i >= 1 && i < cluster_end && c == SHADDA))
        .map(|(_, &c)| c)
        .collect()
}

/// True when no diacritic sits directly before a shadda.
pub fn shadda_leads_clusters(s: &str) -> bool {
    let chars: Vec<char> = s.chars().collect();
    chars
        .windows(2)
        .all(|w| !(w[1] == SHADDA && is_diacritic(w[0])))
}
