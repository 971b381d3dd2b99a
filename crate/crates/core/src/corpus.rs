//! Readers and writers for corpora, external prediction files, translation
//! files and annotated output.
//!
//! Every format is UTF-8, tab-separated, with `#` comment lines. Corpora and
//! annotated output hold one token per line and separate sentences with a
//! blank line; a `# sent_id = ID` comment names the sentence that follows.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{canonical_glosses, Gold, LpgEntry, Sentence, Token};
use crate::normalize::{normalize_lemma, NormProfile};
use crate::translit::to_internal;

const ABSENT: &str = "_";
const SENT_ID: &str = "# sent_id = ";

/// Position of a token: (sentence id, token index).
pub type TokenKey = (String, usize);

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write `content` to `path`, creating or truncating it.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Render header lines as `#` comments.
pub fn comment_header(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

/// Optional sentence id and the numbered rows of one sentence.
type Block<'a> = (Option<String>, Vec<(usize, &'a str)>);

/// Group non-comment lines into blank-line separated blocks, tracking the
/// `sent_id` directive and 1-based line numbers.
fn sentence_blocks(text: &str) -> Vec<Block<'_>> {
    let mut blocks = Vec::new();
    let mut id = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix(SENT_ID) {
            if !rows.is_empty() {
                blocks.push((id.take(), std::mem::take(&mut rows)));
            }
            id = Some(rest.trim().to_owned());
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !rows.is_empty() {
                blocks.push((id.take(), std::mem::take(&mut rows)));
            }
        } else {
            rows.push((i + 1, line));
        }
    }
    if !rows.is_empty() {
        blocks.push((id.take(), rows));
    }
    blocks
}

fn optional(field: &str) -> Option<&str> {
    (field != ABSENT).then_some(field)
}

/// Read a gold corpus: `INDEX SURFACE LEMMA POS GLOSS`, `_` for absent.
/// Lemmas are transliterated and normalized; glosses lowercased.
pub fn read_corpus(path: &Path, profile: &NormProfile) -> Result<Vec<Sentence>> {
    parse_corpus(&read_text(path)?, &path.display().to_string(), profile)
}

pub fn parse_corpus(text: &str, name: &str, profile: &NormProfile) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    for (n, (id, rows)) in sentence_blocks(text).into_iter().enumerate() {
        let id = id.unwrap_or_else(|| format!("s{}", n + 1));
        let mut tokens = Vec::with_capacity(rows.len());
        for (line, row) in rows {
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::parse(name, line, format!("expected 5 columns, found {}", cols.len())));
            }
            let wrap = |e: Error| Error::parse(name, line, e.to_string());
            let index: usize = cols[0]
                .parse()
                .map_err(|_| Error::parse(name, line, format!("bad token index {:?}", cols[0])))?;
            if index != tokens.len() {
                return Err(Error::parse(
                    name,
                    line,
                    format!("token index {index} out of sequence, expected {}", tokens.len()),
                ));
            }
            if cols[1].is_empty() {
                return Err(Error::parse(name, line, "empty surface"));
            }
            let surface = to_internal(cols[1]).map_err(wrap)?;
            let lemma = optional(cols[2])
                .map(|l| to_internal(l).map(|l| normalize_lemma(&l, profile)))
                .transpose()
                .map_err(wrap)?;
            let pos = optional(cols[3]).map(str::to_owned);
            let glosses = optional(cols[4])
                .map(|g| g.split(';').map(str::to_owned).collect())
                .unwrap_or_default();
            let gold = Gold::new(lemma, pos, glosses).map_err(wrap)?;
            tokens.push(Token {
                sentence_id: id.clone(),
                index,
                surface,
                gold,
            });
        }
        sentences.push(Sentence {
            id,
            tokens,
            translation: None,
            alignment: None,
        });
    }
    Ok(sentences)
}

fn field_or_absent(v: Option<&str>) -> &str {
    v.unwrap_or(ABSENT)
}

/// Render a gold corpus in the format [`read_corpus`] reads.
pub fn format_corpus(sentences: &[Sentence], header: &[String]) -> String {
    let mut out = comment_header(header);
    for (n, s) in sentences.iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{SENT_ID}{}", s.id);
        for t in &s.tokens {
            let glosses = if t.gold.glosses.is_empty() {
                ABSENT.to_owned()
            } else {
                t.gold.glosses.join(";")
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                t.index,
                t.surface,
                field_or_absent(t.gold.lemma.as_deref()),
                field_or_absent(t.gold.pos.as_deref()),
                glosses
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictionKind {
    PosTopset,
    S2sLemma,
    LexcLpg,
    ClusterId,
}

impl PredictionKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictionKind::PosTopset => "pos_topset",
            PredictionKind::S2sLemma => "s2s_lemma",
            PredictionKind::LexcLpg => "lexc_lpg",
            PredictionKind::ClusterId => "cluster_id",
        }
    }
}

impl FromStr for PredictionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos_topset" => Ok(PredictionKind::PosTopset),
            "s2s_lemma" => Ok(PredictionKind::S2sLemma),
            "lexc_lpg" => Ok(PredictionKind::LexcLpg),
            "cluster_id" => Ok(PredictionKind::ClusterId),
            other => Err(Error::Config(format!("unknown prediction kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// POS tags with tagger scores, best first.
    PosTopset(Vec<(String, f64)>),
    /// Generator lemma, transliterated but not normalized.
    Lemma(String),
    /// Classifier LPG key.
    LpgKey(String),
    Cluster(usize),
}

/// Per-token outputs of an external model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub kind: PredictionKind,
    pub records: HashMap<TokenKey, Payload>,
}

impl PredictionFile {
    pub fn get(&self, sentence_id: &str, index: usize) -> Option<&Payload> {
        self.records.get(&(sentence_id.to_owned(), index))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn parse_topset(field: &str) -> std::result::Result<Vec<(String, f64)>, String> {
    let mut tags = Vec::new();
    for item in field.split(';') {
        let (tag, score) = item
            .rsplit_once(':')
            .ok_or_else(|| format!("expected TAG:SCORE, found {item:?}"))?;
        if tag.is_empty() {
            return Err(format!("empty POS tag in {item:?}"));
        }
        let score: f64 = score.parse().map_err(|_| format!("bad score in {item:?}"))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(format!("score {score} outside [0, 1]"));
        }
        tags.push((tag.to_owned(), score));
    }
    tags.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(tags)
}

/// Read a prediction file: `SENTENCE_ID TOKEN_INDEX PAYLOAD`.
pub fn read_predictions(path: &Path, kind: PredictionKind) -> Result<PredictionFile> {
    parse_predictions(&read_text(path)?, &path.display().to_string(), kind)
}

pub fn parse_predictions(text: &str, name: &str, kind: PredictionKind) -> Result<PredictionFile> {
    let mut records = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(name, line_no, format!("expected 3 columns, found {}", cols.len())));
        }
        let index: usize = cols[1]
            .parse()
            .map_err(|_| Error::parse(name, line_no, format!("bad token index {:?}", cols[1])))?;
        let raw = cols[2];
        if raw.is_empty() {
            return Err(Error::parse(name, line_no, "empty payload"));
        }
        let payload = match kind {
            PredictionKind::PosTopset => {
                Payload::PosTopset(parse_topset(raw).map_err(|m| Error::parse(name, line_no, m))?)
            }
            PredictionKind::S2sLemma => {
                Payload::Lemma(to_internal(raw).map_err(|e| Error::parse(name, line_no, e.to_string()))?)
            }
            PredictionKind::LexcLpg => {
                LpgEntry::from_key(raw).map_err(|e| Error::parse(name, line_no, e.to_string()))?;
                Payload::LpgKey(raw.to_owned())
            }
            PredictionKind::ClusterId => Payload::Cluster(
                raw.parse()
                    .map_err(|_| Error::parse(name, line_no, format!("bad cluster id {raw:?}")))?,
            ),
        };
        let key = (cols[0].to_owned(), index);
        if records.contains_key(&key) {
            return Err(Error::parse(
                name,
                line_no,
                format!("duplicate prediction for {}:{}", key.0, key.1),
            ));
        }
        records.insert(key, payload);
    }
    Ok(PredictionFile { kind, records })
}

/// English translation and token-to-word alignment of one sentence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Translation {
    pub words: Vec<String>,
    pub alignment: BTreeMap<usize, Vec<usize>>,
}

fn parse_alignment(line: &str) -> std::result::Result<BTreeMap<usize, Vec<usize>>, String> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for pair in line.split_whitespace() {
        let (src, tgt) = pair
            .split_once('-')
            .ok_or_else(|| format!("malformed alignment pair {pair:?}"))?;
        let src: usize = src.parse().map_err(|_| format!("malformed alignment pair {pair:?}"))?;
        let tgt: usize = tgt.parse().map_err(|_| format!("malformed alignment pair {pair:?}"))?;
        map.entry(src).or_default().push(tgt);
    }
    for targets in map.values_mut() {
        targets.sort_unstable();
        targets.dedup();
    }
    Ok(map)
}

/// Read two-line translation records: `SENTENCE_ID<TAB>english words`
/// followed by a line of `i-j` alignment pairs (possibly empty).
pub fn read_translations(path: &Path) -> Result<BTreeMap<String, Translation>> {
    parse_translations(&read_text(path)?, &path.display().to_string())
}

pub fn parse_translations(text: &str, name: &str) -> Result<BTreeMap<String, Translation>> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l))
        .collect();
    let mut out = BTreeMap::new();
    for record in lines.chunks(2) {
        let (line_no, head) = record[0];
        let Some(&(align_no, align)) = record.get(1) else {
            return Err(Error::parse(name, line_no, "translation record lacks an alignment line"));
        };
        let (id, sentence) = head
            .split_once('\t')
            .ok_or_else(|| Error::parse(name, line_no, "expected SENTENCE_ID<TAB>translation"))?;
        let words = sentence.split_whitespace().map(str::to_lowercase).collect();
        let alignment = parse_alignment(align).map_err(|m| Error::parse(name, align_no, m))?;
        if out
            .insert(id.to_owned(), Translation { words, alignment })
            .is_some()
        {
            return Err(Error::parse(name, line_no, format!("duplicate translation for {id:?}")));
        }
    }
    Ok(out)
}

/// Attach translations to their sentences by id.
pub fn attach_translations(sentences: &mut [Sentence], translations: &BTreeMap<String, Translation>) {
    for s in sentences {
        if let Some(t) = translations.get(&s.id) {
            s.translation = Some(t.words.clone());
            s.alignment = Some(t.alignment.clone());
        }
    }
}

/// Per-token instance vectors: `SENTENCE_ID TOKEN_INDEX v1 v2 ...`
/// (values space-separated).
pub fn read_instance_vectors(path: &Path) -> Result<HashMap<TokenKey, Vec<f64>>> {
    parse_instance_vectors(&read_text(path)?, &path.display().to_string())
}

pub fn parse_instance_vectors(text: &str, name: &str) -> Result<HashMap<TokenKey, Vec<f64>>> {
    let mut out = HashMap::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(name, line_no, format!("expected 3 columns, found {}", cols.len())));
        }
        let index: usize = cols[1]
            .parse()
            .map_err(|_| Error::parse(name, line_no, format!("bad token index {:?}", cols[1])))?;
        let vector = cols[2]
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(name, line_no, "non-numeric vector component"))?;
        match dim {
            None if vector.is_empty() => return Err(Error::parse(name, line_no, "empty vector")),
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::parse(
                    name,
                    line_no,
                    format!("vector has {} components, expected {d}", vector.len()),
                ))
            }
            Some(_) => {}
        }
        if out.insert((cols[0].to_owned(), index), vector).is_some() {
            return Err(Error::parse(name, line_no, "duplicate instance vector"));
        }
    }
    Ok(out)
}

/// One token of annotated output.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedToken {
    pub index: usize,
    pub surface: String,
    pub entry: LpgEntry,
    /// Which stage settled the choice.
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSentence {
    pub id: String,
    pub tokens: Vec<AnnotatedToken>,
}

/// Render annotated output: `INDEX SURFACE PRED_LEMMA PRED_POS PRED_GLOSS STAGE`.
pub fn format_annotated(sentences: &[AnnotatedSentence], header: &[String]) -> String {
    let mut out = comment_header(header);
    for (n, s) in sentences.iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{SENT_ID}{}", s.id);
        for t in &s.tokens {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                t.index,
                t.surface,
                t.entry.lemma(),
                t.entry.pos(),
                t.entry.gloss_field(),
                t.stage
            );
        }
    }
    out
}

pub fn write_annotated(path: &Path, sentences: &[AnnotatedSentence], header: &[String]) -> Result<()> {
    write_text(path, &format_annotated(sentences, header))
}

pub fn read_annotated(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    parse_annotated(&read_text(path)?, &path.display().to_string())
}

pub fn parse_annotated(text: &str, name: &str) -> Result<Vec<AnnotatedSentence>> {
    let mut sentences = Vec::new();
    for (n, (id, rows)) in sentence_blocks(text).into_iter().enumerate() {
        let id = id.unwrap_or_else(|| format!("s{}", n + 1));
        let mut tokens = Vec::with_capacity(rows.len());
        for (line, row) in rows {
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() != 6 {
                return Err(Error::parse(name, line, format!("expected 6 columns, found {}", cols.len())));
            }
            let index: usize = cols[0]
                .parse()
                .map_err(|_| Error::parse(name, line, format!("bad token index {:?}", cols[0])))?;
            if index != tokens.len() {
                return Err(Error::parse(name, line, format!("token index {index} out of sequence")));
            }
            let glosses = canonical_glosses(cols[4].split(';')).map_err(|e| Error::parse(name, line, e.to_string()))?;
            let entry = LpgEntry::new(cols[2], cols[3], glosses).map_err(|e| Error::parse(name, line, e.to_string()))?;
            tokens.push(AnnotatedToken {
                index,
                surface: cols[1].to_owned(),
                entry,
                stage: cols[5].to_owned(),
            });
        }
        sentences.push(AnnotatedSentence { id, tokens });
    }
    Ok(sentences)
}

/// Index annotated output by token position.
pub fn annotated_index(sentences: &[AnnotatedSentence]) -> HashMap<TokenKey, LpgEntry> {
    sentences
        .iter()
        .flat_map(|s| {
            s.tokens
                .iter()
                .map(move |t| ((s.id.clone(), t.index), t.entry.clone()))
        })
        .collect()
}
