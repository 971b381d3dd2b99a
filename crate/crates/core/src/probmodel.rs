//! Additively smoothed unigram model over (lemma, POS) pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::read_text;
use crate::error::{Error, Result};
use crate::model::Sentence;

#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    counts: BTreeMap<(String, String), u64>,
    total: u64,
    alpha: f64,
}

impl UnigramModel {
    /// Count gold (lemma, POS) pairs over evaluatable tokens. Tokens whose
    /// gold lacks a POS are skipped.
    pub fn train(corpus: &[Sentence], alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for token in corpus.iter().flat_map(|s| &s.tokens) {
            if let (Some(l), Some(p)) = (&token.gold.lemma, &token.gold.pos) {
                *counts.entry((l.clone(), p.clone())).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::NoTrainingData);
        }
        let total = counts.values().sum();
        Ok(UnigramModel { counts, total, alpha })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Observed pairs plus one shared slot for everything unseen.
    pub fn vocab(&self) -> u64 {
        self.counts.len() as u64 + 1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn count(&self, lemma: &str, pos: &str) -> u64 {
        self.counts
            .get(&(lemma.to_owned(), pos.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.counts.iter().map(|((l, p), &c)| (l.as_str(), p.as_str(), c))
    }

    /// log((c + alpha) / (N + alpha * V))
    pub fn logp(&self, lemma: &str, pos: &str) -> f64 {
        let c = self.count(lemma, pos) as f64;
        let denom = self.total as f64 + self.alpha * self.vocab() as f64;
        ((c + self.alpha) / denom).ln()
    }

    /// Probability mass of the unseen slot.
    pub fn unseen_mass(&self) -> f64 {
        self.alpha / (self.total as f64 + self.alpha * self.vocab() as f64)
    }

    /// Header line `N=.. V=.. alpha=..`, then `LEMMA POS COUNT` rows.
    pub fn to_tsv(&self, header: &[String]) -> String {
        let mut out = crate::corpus::comment_header(header);
        let _ = writeln!(out, "N={}\tV={}\talpha={}", self.total, self.vocab(), self.alpha);
        for ((l, p), c) in &self.counts {
            let _ = writeln!(out, "{l}\t{p}\t{c}");
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines
            .next()
            .ok_or_else(|| Error::parse(name, 1, "missing N/V/alpha header"))?;
        let mut fields = BTreeMap::new();
        for part in header.split('\t') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(name, hl + 1, format!("bad header field {part:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| -> Result<&str> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse(name, hl + 1, format!("header lacks {k}")))
        };
        let bad = |k: &str| Error::parse(name, hl + 1, format!("bad {k} value"));
        let total: u64 = get("N")?.parse().map_err(|_| bad("N"))?;
        let vocab: u64 = get("V")?.parse().map_err(|_| bad("V"))?;
        let alpha: f64 = get("alpha")?.parse().map_err(|_| bad("alpha"))?;
        check_alpha(alpha).map_err(|e| Error::parse(name, hl + 1, e.to_string()))?;

        let mut counts = BTreeMap::new();
        for (i, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(name, i + 1, format!("expected 3 columns, found {}", cols.len())));
            }
            let c: u64 = cols[2]
                .parse()
                .map_err(|_| Error::parse(name, i + 1, format!("bad count {:?}", cols[2])))?;
            if counts.insert((cols[0].to_owned(), cols[1].to_owned()), c).is_some() {
                return Err(Error::parse(name, i + 1, "duplicate pair"));
            }
        }
        let model = UnigramModel { counts, total, alpha };
        if model.counts.values().sum::<u64>() != total || model.vocab() != vocab {
            return Err(Error::parse(name, hl + 1, "header disagrees with the count rows"));
        }
        Ok(model)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("smoothing constant must be positive, got {alpha}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use crate::normalize::NormProfile;

    fn corpus(text: &str) -> Vec<Sentence> {
        parse_corpus(text, "t", &NormProfile::default()).unwrap()
    }

    fn ktb_model() -> UnigramModel {
        let c = corpus(
            "0\tktb\tktb\tverb\t_\n1\tktb\tktb\tverb\t_\n2\tktb\tktb\tverb\t_\n3\tktb\tktb\tnoun\t_\n",
        );
        UnigramModel::train(&c, 1.0).unwrap()
    }

    #[test]
    fn counts_and_vocab() {
        let m = ktb_model();
        assert_eq!((m.total(), m.vocab()), (4, 3));
        let single = UnigramModel::train(&corpus("0\tx\tx\tnoun\t_\n"), 1.0).unwrap();
        assert_eq!((single.total(), single.vocab()), (1, 2));
    }

    #[test]
    fn smoothed_log_probabilities() {
        let m = ktb_model();
        assert!((m.logp("ktb", "verb") - (4.0f64 / 7.0).ln()).abs() < 1e-12);
        assert!((m.logp("qlm", "noun") - (1.0f64 / 7.0).ln()).abs() < 1e-12);
        assert!(m.logp("ktb", "noun") > m.logp("qlm", "noun"));
    }

    #[test]
    fn lemma_only_corpus_cannot_train() {
        let c = corpus("0\tktb\tktb\t_\t_\n1\tx\t_\t_\t_\n");
        assert!(matches!(UnigramModel::train(&c, 1.0), Err(Error::NoTrainingData)));
    }

    #[test]
    fn serialization_round_trip() {
        let m = ktb_model();
        let text = m.to_tsv(&["lpg train".to_owned()]);
        assert!(text.contains("N=4\tV=3\talpha=1\n"));
        assert_eq!(UnigramModel::parse(&text, "m").unwrap(), m);
        let tampered = text.replace("N=4", "N=5");
        assert!(UnigramModel::parse(&tampered, "m").is_err());
    }

    #[test]
    fn rejects_bad_alpha() {
        let c = corpus("0\tx\tx\tnoun\t_\n");
        assert!(UnigramModel::train(&c, 0.0).is_err());
    }
}
