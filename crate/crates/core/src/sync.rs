//! Dataset synchronization: score each lexicon candidate against a token's
//! gold reference and adopt the best match as the new gold.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Analysis, CandidateSet, Gold, LpgEntry, Sentence, Token};
use crate::lexicon::Lexicon;
use crate::translit::dediacritize;

/// Scores closer than this count as tied.
pub const SCORE_EPSILON: f64 = 1e-12;

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Whether lemma edit distance sees diacritics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LemmaLevel {
    #[default]
    Diacritized,
    Dediacritized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncConfig {
    /// Weights of the lemma, POS and gloss components.
    pub weights: [f64; 3],
    pub lemma_level: LemmaLevel,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            weights: [1.0, 1.0, 1.0],
            lemma_level: LemmaLevel::Diacritized,
        }
    }
}

impl SyncConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Config(format!(
                "sync weights must be positive, got {:?}",
                self.weights
            )));
        }
        Ok(())
    }
}

fn lemma_score(gold: &str, cand: &str, level: LemmaLevel) -> f64 {
    let (g, c) = match level {
        LemmaLevel::Diacritized => (gold.to_owned(), cand.to_owned()),
        LemmaLevel::Dediacritized => (dediacritize(gold), dediacritize(cand)),
    };
    if g == c {
        return 1.0;
    }
    let longest = g.chars().count().max(c.chars().count());
    1.0 - levenshtein(&g, &c) as f64 / longest as f64
}

/// Weighted mean of the lemma, POS and gloss agreement scores over the
/// components the gold reference actually has. Always in [0, 1].
pub fn sync_score(gold: &Gold, cand: &LpgEntry, config: &SyncConfig) -> Result<f64> {
    let lemma = match gold.lemma.as_deref() {
        Some(l) if !l.is_empty() => l,
        _ => return Err(Error::EmptyGoldLemma),
    };
    let [wl, wp, wg] = config.weights;
    let mut total = wl * lemma_score(lemma, cand.lemma(), config.lemma_level);
    let mut weight = wl;
    if let Some(pos) = &gold.pos {
        total += wp * f64::from(u8::from(pos == cand.pos()));
        weight += wp;
    }
    if gold.has_glosses() {
        let shared = gold
            .glosses
            .iter()
            .filter(|g| cand.glosses().contains(g))
            .count();
        total += wg * shared as f64 / gold.glosses.len() as f64;
        weight += wg;
    }
    Ok((total / weight).clamp(0.0, 1.0))
}

/// Candidate order used whenever scores tie: lower source rank first, then
/// lexicographic LPG key.
pub fn tie_order(a: &Analysis, b: &Analysis) -> Ordering {
    a.source_rank
        .cmp(&b.source_rank)
        .then_with(|| a.key().cmp(&b.key()))
}

/// Index of the highest-scoring candidate, ties resolved by [`tie_order`].
/// Returns the index and whether more than one candidate shared the top score.
pub(crate) fn argmax_by_score(candidates: &[Analysis], scores: &[f64]) -> (usize, bool) {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut winners = (0..candidates.len()).filter(|&i| scores[i] >= best - SCORE_EPSILON);
    let mut pick = winners.next().expect("non-empty candidate set");
    let mut tied = false;
    for i in winners {
        tied = true;
        if tie_order(&candidates[i], &candidates[pick]) == Ordering::Less {
            pick = i;
        }
    }
    (pick, tied)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncOutcome {
    pub analysis: Analysis,
    pub score: f64,
    pub evaluatable: bool,
    /// More than one candidate reached the winning score.
    pub tied: bool,
}

/// Pick the candidate that best matches the token's gold reference.
pub fn synchronize_token(token: &Token, candidates: &CandidateSet, config: &SyncConfig) -> Result<SyncOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidEntry(format!(
            "no candidates for token {}:{}",
            token.sentence_id, token.index
        )));
    }
    let scores = candidates
        .candidates
        .iter()
        .map(|c| sync_score(&token.gold, &c.entry, config))
        .collect::<Result<Vec<_>>>()?;
    let (pick, tied) = argmax_by_score(&candidates.candidates, &scores);
    Ok(SyncOutcome {
        analysis: candidates.candidates[pick].clone(),
        score: scores[pick],
        evaluatable: token.is_evaluatable(),
        tied,
    })
}

/// Summary of a synchronization run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyncReport {
    pub tokens: usize,
    pub evaluatable: usize,
    /// Mean score over evaluatable tokens.
    pub mean_score: f64,
    pub ties: usize,
    /// Evaluatable tokens whose gold changed.
    pub changed: usize,
}

impl SyncReport {
    pub fn evaluatable_pct(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            100.0 * self.evaluatable as f64 / self.tokens as f64
        }
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "tokens\tevaluatable\tevaluatable_pct\tmean_score\tties\tchanged\n{}\t{}\t{:.1}\t{:.6}\t{}\t{}\n",
            self.tokens,
            self.evaluatable,
            self.evaluatable_pct(),
            self.mean_score,
            self.ties,
            self.changed
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tokens             {}", self.tokens);
        let _ = writeln!(
            out,
            "evaluatable        {} ({:.1}%)",
            self.evaluatable,
            self.evaluatable_pct()
        );
        let _ = writeln!(out, "mean sync score    {:.6}", self.mean_score);
        let _ = writeln!(out, "ties               {}", self.ties);
        let _ = writeln!(out, "golds changed      {}", self.changed);
        out
    }
}

/// Replace every evaluatable token's gold with its best-matching lexicon
/// entry. Tokens without a gold lemma pass through untouched.
pub fn synchronize_corpus(
    corpus: &[Sentence],
    lexicon: &Lexicon,
    config: &SyncConfig,
) -> Result<(Vec<Sentence>, SyncReport)> {
    config.validate()?;
    let mut report = SyncReport::default();
    let mut score_sum = 0.0;
    let mut out = corpus.to_vec();
    for sentence in &mut out {
        for token in &mut sentence.tokens {
            report.tokens += 1;
            if !token.is_evaluatable() {
                continue;
            }
            let (candidates, _) = lexicon.candidates(&token.surface)?;
            let outcome = synchronize_token(token, &candidates, config)?;
            report.evaluatable += 1;
            score_sum += outcome.score;
            report.ties += usize::from(outcome.tied);
            let synced = Gold::from_entry(&outcome.analysis.entry);
            if synced != token.gold {
                report.changed += 1;
                token.gold = synced;
            }
        }
    }
    if report.evaluatable > 0 {
        report.mean_score = score_sum / report.evaluatable as f64;
    }
    Ok((out, report))
}
