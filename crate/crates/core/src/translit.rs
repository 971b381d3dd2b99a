//! Buckwalter transliteration.
//!
//! Internally every lemma, surface and diacritized form is held in
//! Buckwalter ASCII. Arabic script is converted at the I/O boundary.
//!
//! The mapping is a bijection between the Arabic letters and diacritics
//! below and their ASCII symbols. Everything else passes through unchanged,
//! except characters that would make the round trip ambiguous: ASCII letters
//! and Buckwalter punctuation inside Arabic text, and mappable Arabic script
//! inside Buckwalter text. Those are rejected.

use crate::error::{Error, Result};

/// (Buckwalter symbol, Arabic code point)
const TABLE: &[(char, char)] = &[
    ('\'', '\u{0621}'),
    ('|', '\u{0622}'),
    ('>', '\u{0623}'),
    ('&', '\u{0624}'),
    ('<', '\u{0625}'),
    ('}', '\u{0626}'),
    ('A', '\u{0627}'),
    ('b', '\u{0628}'),
    ('p', '\u{0629}'),
    ('t', '\u{062A}'),
    ('v', '\u{062B}'),
    ('j', '\u{062C}'),
    ('H', '\u{062D}'),
    ('x', '\u{062E}'),
    ('d', '\u{062F}'),
    ('*', '\u{0630}'),
    ('r', '\u{0631}'),
    ('z', '\u{0632}'),
    ('s', '\u{0633}'),
    ('$', '\u{0634}'),
    ('S', '\u{0635}'),
    ('D', '\u{0636}'),
    ('T', '\u{0637}'),
    ('Z', '\u{0638}'),
    ('E', '\u{0639}'),
    ('g', '\u{063A}'),
    ('_', '\u{0640}'),
    ('f', '\u{0641}'),
    ('q', '\u{0642}'),
    ('k', '\u{0643}'),
    ('l', '\u{0644}'),
    ('m', '\u{0645}'),
    ('n', '\u{0646}'),
    ('h', '\u{0647}'),
    ('w', '\u{0648}'),
    ('Y', '\u{0649}'),
    ('y', '\u{064A}'),
    ('F', '\u{064B}'),
    ('N', '\u{064C}'),
    ('K', '\u{064D}'),
    ('a', '\u{064E}'),
    ('u', '\u{064F}'),
    ('i', '\u{0650}'),
    ('~', '\u{0651}'),
    ('o', '\u{0652}'),
    ('`', '\u{0670}'),
    ('{', '\u{0671}'),
    ('P', '\u{067E}'),
    ('J', '\u{0686}'),
    ('V', '\u{06A4}'),
    ('G', '\u{06AF}'),
];

pub const FATHA: char = 'a';
pub const DAMMA: char = 'u';
pub const KASRA: char = 'i';
pub const SUKUN: char = 'o';
pub const SHADDA: char = '~';
pub const DAGGER_ALEF: char = '`';
pub const FATHATAN: char = 'F';
pub const DAMMATAN: char = 'N';
pub const KASRATAN: char = 'K';

/// Every Buckwalter symbol that encodes an Arabic code point.
pub fn buckwalter_symbols() -> impl Iterator<Item = char> {
    TABLE.iter().map(|&(b, _)| b)
}

/// Every Arabic code point covered by the mapping.
pub fn arabic_code_points() -> impl Iterator<Item = char> {
    TABLE.iter().map(|&(_, a)| a)
}

fn arabic_to_bw(c: char) -> Option<char> {
    TABLE.iter().find(|&&(_, a)| a == c).map(|&(b, _)| b)
}

fn bw_to_arabic(c: char) -> Option<char> {
    TABLE.iter().find(|&&(b, _)| b == c).map(|&(_, a)| a)
}

fn in_arabic_block(c: char) -> bool {
    ('\u{0600}'..='\u{06FF}').contains(&c)
}

/// Arabic-block characters with no Buckwalter symbol that are still legal
/// text: Arabic-Indic digits and Arabic punctuation.
fn arabic_pass_through(c: char) -> bool {
    matches!(c, '\u{0660}'..='\u{066C}' | '\u{060C}' | '\u{061B}' | '\u{061F}')
}

/// True for ASCII characters that carry meaning in Buckwalter text.
fn reserved_ascii(c: char) -> bool {
    c.is_ascii_alphabetic() || bw_to_arabic(c).is_some()
}

/// Short vowels, sukun, shadda, tanween and dagger alef.
pub fn is_diacritic(c: char) -> bool {
    matches!(
        c,
        FATHA | DAMMA | KASRA | SUKUN | SHADDA | DAGGER_ALEF | FATHATAN | DAMMATAN | KASRATAN
    )
}

pub fn is_tanween(c: char) -> bool {
    matches!(c, FATHATAN | DAMMATAN | KASRATAN)
}

pub fn contains_arabic(s: &str) -> bool {
    s.chars().any(in_arabic_block)
}

/// Convert Arabic script to Buckwalter ASCII.
pub fn to_buckwalter(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    for (pos, c) in text.chars().enumerate() {
        if let Some(b) = arabic_to_bw(c) {
            out.push(b);
        } else if in_arabic_block(c) {
            if !arabic_pass_through(c) {
                return Err(Error::UnmappableCodePoint {
                    code: c as u32,
                    pos,
                });
            }
            out.push(c);
        } else if reserved_ascii(c) {
            return Err(Error::ReservedAscii { ch: c, pos });
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

/// Convert Buckwalter ASCII to Arabic script. Exact inverse of [`to_buckwalter`].
pub fn from_buckwalter(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len() * 2);
    for (pos, c) in text.chars().enumerate() {
        if let Some(a) = bw_to_arabic(c) {
            out.push(a);
        } else if c.is_ascii_alphabetic() {
            return Err(Error::UnknownSymbol { ch: c, pos });
        } else if arabic_to_bw(c).is_some() {
            return Err(Error::AmbiguousSymbol { ch: c, pos });
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

/// Bring a field read from disk into the internal encoding: Arabic script is
/// transliterated, anything else is taken to be Buckwalter already.
pub fn to_internal(field: &str) -> Result<String> {
    if contains_arabic(field) {
        to_buckwalter(field)
    } else {
        Ok(field.to_owned())
    }
}

/// Strip every diacritic symbol, keeping letters in order.
pub fn dediacritize(s: &str) -> String {
    s.chars().filter(|&c| !is_diacritic(c)).collect()
}

/// Fold every hamza carrier (and bare alef) onto a single symbol.
pub fn fold_hamza(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '\'' | '|' | '>' | '&' | '<' | '}' | '{' | 'A' => 'A',
            c => c,
        })
        .collect()
}
