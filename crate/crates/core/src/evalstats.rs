//! Accuracy at lemma, lemma+POS and full LPG granularity, ambiguity
//! statistics, McNemar's test, and automatic error typing.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::corpus::{Payload, PredictionFile, TokenKey};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::model::{CandidateSet, Gold, LpgEntry, Sentence};
use crate::selectors::{filter_top, TopMode};
use crate::translit::{dediacritize, fold_hamza};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Granularity {
    L,
    LP,
    LPG,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::L, Granularity::LP, Granularity::LPG];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::L => "L",
            Granularity::LP => "LP",
            Granularity::LPG => "LPG",
        }
    }
}

/// How glosses are compared at LPG granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlossMatch {
    /// At least one shared gloss.
    #[default]
    Intersect,
    /// Identical gloss sets.
    Exact,
}

/// Whether `pred` agrees with `gold` on every component the granularity
/// covers. Components absent from the gold are not held against it.
pub fn matches(pred: &LpgEntry, gold: &Gold, g: Granularity, gloss: GlossMatch) -> bool {
    let lemma_ok = gold.lemma.as_deref().is_none_or(|l| l == pred.lemma());
    let pos_ok = gold.pos.as_deref().is_none_or(|p| p == pred.pos());
    let gloss_ok = !gold.has_glosses()
        || match gloss {
            GlossMatch::Intersect => gold.glosses.iter().any(|x| pred.glosses().contains(x)),
            GlossMatch::Exact => gold.glosses == pred.glosses(),
        };
    match g {
        Granularity::L => lemma_ok,
        Granularity::LP => lemma_ok && pos_ok,
        Granularity::LPG => lemma_ok && pos_ok && gloss_ok,
    }
}

fn check_available(corpus: &[Sentence], g: Granularity) -> Result<()> {
    let mut evaluatable = corpus.iter().flat_map(|s| &s.tokens).filter(|t| t.is_evaluatable());
    let ok = match g {
        Granularity::L => evaluatable.next().is_some(),
        Granularity::LP => evaluatable.any(|t| t.gold.pos.is_some()),
        Granularity::LPG => evaluatable.any(|t| t.gold.has_glosses()),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::GranularityUnavailable(g.name()))
    }
}

/// Per evaluatable token, in corpus order, whether the prediction is right.
pub fn correctness(
    predictions: &HashMap<TokenKey, LpgEntry>,
    corpus: &[Sentence],
    g: Granularity,
    gloss: GlossMatch,
) -> Result<Vec<bool>> {
    check_available(corpus, g)?;
    let mut out = Vec::new();
    for s in corpus {
        for t in s.tokens.iter().filter(|t| t.is_evaluatable()) {
            let pred = predictions
                .get(&(s.id.clone(), t.index))
                .ok_or_else(|| Error::MissingPrediction {
                    sentence: s.id.clone(),
                    index: t.index,
                })?;
            out.push(matches(pred, &t.gold, g, gloss));
        }
    }
    Ok(out)
}

/// Fraction of evaluatable tokens predicted correctly.
pub fn accuracy(
    predictions: &HashMap<TokenKey, LpgEntry>,
    corpus: &[Sentence],
    g: Granularity,
    gloss: GlossMatch,
) -> Result<f64> {
    let hits = correctness(predictions, corpus, g, gloss)?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// Accuracies of one system; `None` where the gold lacks the component.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub system: String,
    pub tokens: usize,
    pub scores: [Option<f64>; 3],
}

pub fn accuracy_row(
    system: &str,
    predictions: &HashMap<TokenKey, LpgEntry>,
    corpus: &[Sentence],
    gloss: GlossMatch,
) -> Result<AccuracyRow> {
    let mut scores = [None; 3];
    for (slot, g) in scores.iter_mut().zip(Granularity::ALL) {
        *slot = match accuracy(predictions, corpus, g, gloss) {
            Ok(a) => Some(a),
            Err(Error::GranularityUnavailable(_)) => None,
            Err(e) => return Err(e),
        };
    }
    let tokens = corpus.iter().flat_map(|s| &s.tokens).filter(|t| t.is_evaluatable()).count();
    Ok(AccuracyRow {
        system: system.to_owned(),
        tokens,
        scores,
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{:.2}", 100.0 * v))
}

/// TSV: `system tokens L LP LPG`, percentages with two decimals.
pub fn accuracy_tsv(rows: &[AccuracyRow]) -> String {
    let mut out = String::from("system\ttokens\tL\tLP\tLPG\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.system,
            r.tokens,
            pct(r.scores[0]),
            pct(r.scores[1]),
            pct(r.scores[2])
        );
    }
    out
}

pub fn accuracy_text(rows: &[AccuracyRow]) -> String {
    let width = rows.iter().map(|r| r.system.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}\n", "system", "tokens", "L", "LP", "LPG");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}",
            r.system,
            r.tokens,
            pct(r.scores[0]),
            pct(r.scores[1]),
            pct(r.scores[2])
        );
    }
    out
}

/// Fraction of evaluatable tokens whose gold matches some member of their
/// candidate set.
pub fn oracle_recall(
    corpus: &[Sentence],
    sets: &HashMap<TokenKey, CandidateSet>,
    g: Granularity,
    gloss: GlossMatch,
) -> Result<f64> {
    check_available(corpus, g)?;
    let mut hit = 0usize;
    let mut n = 0usize;
    for s in corpus {
        for t in s.tokens.iter().filter(|t| t.is_evaluatable()) {
            let set = sets.get(&(s.id.clone(), t.index)).ok_or_else(|| Error::MissingPrediction {
                sentence: s.id.clone(),
                index: t.index,
            })?;
            n += 1;
            hit += usize::from(set.candidates.iter().any(|a| matches(&a.entry, &t.gold, g, gloss)));
        }
    }
    Ok(hit as f64 / n as f64)
}

/// Representation level for counting unique candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Analysis,
    Lpg,
    Lp,
    L,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Analysis, Level::Lpg, Level::Lp, Level::L];

    pub fn name(self) -> &'static str {
        match self {
            Level::Analysis => "Analysis",
            Level::Lpg => "LPG",
            Level::Lp => "LP",
            Level::L => "L",
        }
    }

    fn granularity(self) -> Option<Granularity> {
        match self {
            Level::Analysis => None,
            Level::Lpg => Some(Granularity::LPG),
            Level::Lp => Some(Granularity::LP),
            Level::L => Some(Granularity::L),
        }
    }
}

fn unique_count(set: &CandidateSet, level: Level) -> usize {
    let project = |a: &crate::model::Analysis| -> String {
        match level {
            Level::Analysis | Level::Lpg => a.key(),
            Level::Lp => format!("{}\u{1}{}", a.entry.lemma(), a.entry.pos()),
            Level::L => a.entry.lemma().to_owned(),
        }
    };
    set.candidates.iter().map(project).collect::<HashSet<_>>().len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityRow {
    pub level: Level,
    pub all_mean: f64,
    pub top_mean: f64,
    /// Relative drop from All to Top, in percent.
    pub reduction_pct: f64,
    pub recall_all: Option<f64>,
    pub recall_top: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityStats {
    pub tokens: usize,
    pub rows: Vec<AmbiguityRow>,
}

/// Candidate sets of every token before and after tagger filtering.
pub fn candidate_sets(
    corpus: &[Sentence],
    lexicon: &Lexicon,
    topset: Option<&PredictionFile>,
) -> Result<(HashMap<TokenKey, CandidateSet>, HashMap<TokenKey, CandidateSet>)> {
    let mut all = HashMap::new();
    let mut top = HashMap::new();
    for s in corpus {
        for t in &s.tokens {
            let (set, _) = lexicon.candidates(&t.surface)?;
            let payload: Option<&Payload> = topset.and_then(|p| p.get(&s.id, t.index));
            let filtered = filter_top(&set, payload, TopMode::Filter)?.set;
            all.insert((s.id.clone(), t.index), set);
            top.insert((s.id.clone(), t.index), filtered);
        }
    }
    Ok((all, top))
}

/// Mean unique candidates per token at each level, over All and Top sets,
/// with oracle recall of both.
pub fn ambiguity_stats(corpus: &[Sentence], lexicon: &Lexicon, topset: Option<&PredictionFile>) -> Result<AmbiguityStats> {
    let (all, top) = candidate_sets(corpus, lexicon, topset)?;
    let keys: Vec<TokenKey> = corpus
        .iter()
        .flat_map(|s| s.tokens.iter().map(move |t| (s.id.clone(), t.index)))
        .collect();
    let n = keys.len();
    // Full analyses may share an LPG, so they are counted from the raw
    // lexicon output rather than the deduplicated candidate sets.
    let mut raw_all = 0usize;
    let mut raw_top = 0usize;
    for s in corpus {
        for t in &s.tokens {
            let key = (s.id.clone(), t.index);
            let raw = lexicon.lookup(&t.surface);
            if raw.is_empty() || crate::lexicon::is_digit_or_punct(&t.surface) {
                raw_all += 1;
                raw_top += 1;
                continue;
            }
            let distinct = |keep: &dyn Fn(&crate::model::Analysis) -> bool| {
                raw.iter()
                    .filter(|a| keep(a))
                    .map(|a| (a.diac.as_str(), a.key()))
                    .collect::<HashSet<_>>()
                    .len()
            };
            raw_all += distinct(&|_| true);
            let top_set = &top[&key];
            raw_top += distinct(&|a| top_set.candidates.iter().any(|c| c.entry.pos() == a.entry.pos()));
        }
    }
    let mut rows = Vec::new();
    for level in Level::ALL {
        let mean = |sets: &HashMap<TokenKey, CandidateSet>| {
            if n == 0 {
                0.0
            } else {
                keys.iter().map(|k| unique_count(&sets[k], level)).sum::<usize>() as f64 / n as f64
            }
        };
        let (all_mean, top_mean) = match level {
            Level::Analysis if n > 0 => (raw_all as f64 / n as f64, raw_top as f64 / n as f64),
            _ => (mean(&all), mean(&top)),
        };
        let reduction_pct = if all_mean > 0.0 {
            100.0 * (1.0 - top_mean / all_mean)
        } else {
            0.0
        };
        let recall = |sets| -> Result<Option<f64>> {
            match level.granularity() {
                None => Ok(None),
                Some(g) => match oracle_recall(corpus, sets, g, GlossMatch::Intersect) {
                    Ok(r) => Ok(Some(r)),
                    Err(Error::GranularityUnavailable(_)) => Ok(None),
                    Err(e) => Err(e),
                },
            }
        };
        rows.push(AmbiguityRow {
            level,
            all_mean,
            top_mean,
            reduction_pct,
            recall_all: recall(&all)?,
            recall_top: recall(&top)?,
        });
    }
    Ok(AmbiguityStats { tokens: n, rows })
}

impl AmbiguityStats {
    pub fn row(&self, level: Level) -> &AmbiguityRow {
        self.rows.iter().find(|r| r.level == level).expect("every level present")
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("level\tall\ttop\tambig_reduction_pct\trecall_all\trecall_top\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{:.2}\t{:.2}\t{:.1}\t{}\t{}",
                r.level.name(),
                r.all_mean,
                r.top_mean,
                r.reduction_pct,
                pct(r.recall_all),
                pct(r.recall_top)
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("tokens {}\n", self.tokens);
        let _ = writeln!(
            out,
            "{:<8}  {:>5}  {:>5}  {:>7}  {:>10}  {:>10}",
            "level", "All", "Top", "Ambig-%", "Recall-All", "Recall-Top"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8}  {:>5.2}  {:>5.2}  {:>7.1}  {:>10}  {:>10}",
                r.level.name(),
                r.all_mean,
                r.top_mean,
                r.reduction_pct,
                pct(r.recall_all),
                pct(r.recall_top)
            );
        }
        out
    }
}

/// McNemar's test on paired per-token outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemar {
    /// Tokens only the first system gets right.
    pub b: usize,
    /// Tokens only the second system gets right.
    pub c: usize,
    /// Continuity-corrected chi-square statistic.
    pub statistic: f64,
    /// Upper tail of chi-square with one degree of freedom.
    pub p_value: f64,
    /// Two-sided exact binomial p, reported when b + c < 25.
    pub exact_p_value: Option<f64>,
}

pub const EXACT_THRESHOLD: usize = 25;

pub fn mcnemar(correct_a: &[bool], correct_b: &[bool]) -> Result<McNemar> {
    if correct_a.len() != correct_b.len() {
        return Err(Error::LengthMismatch(correct_a.len(), correct_b.len()));
    }
    let b = correct_a.iter().zip(correct_b).filter(|(&x, &y)| x && !y).count();
    let c = correct_a.iter().zip(correct_b).filter(|(&x, &y)| !x && y).count();
    Ok(mcnemar_counts(b, c))
}

pub fn mcnemar_counts(b: usize, c: usize) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            exact_p_value: Some(1.0),
        };
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let statistic = diff.powi(2) / n as f64;
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    let p_value = chi.sf(statistic).clamp(0.0, 1.0);
    let exact_p_value = (n < EXACT_THRESHOLD).then(|| {
        let binom = Binomial::new(0.5, n as u64).expect("valid binomial");
        (2.0 * binom.cdf(b.min(c) as u64)).min(1.0)
    });
    McNemar {
        b,
        c,
        statistic,
        p_value,
        exact_p_value,
    }
}

impl McNemar {
    pub fn to_text(&self, name_a: &str, name_b: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "only {name_a} correct\t{}", self.b);
        let _ = writeln!(out, "only {name_b} correct\t{}", self.c);
        let _ = writeln!(out, "statistic\t{:.6}", self.statistic);
        let _ = writeln!(out, "p_value\t{:.6}", self.p_value);
        match self.exact_p_value {
            Some(p) => {
                let _ = writeln!(out, "exact_p_value\t{p:.6}");
            }
            None => out.push_str("exact_p_value\t-\n"),
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    /// Same letters once diacritics and hamza carriers are ignored.
    Diacritization,
    /// A different lemma the lexicon knows.
    Plausible,
    /// A lemma the lexicon does not know.
    Hallucination,
}

impl ErrorType {
    pub fn name(self) -> &'static str {
        match self {
            ErrorType::Diacritization => "diacritization",
            ErrorType::Plausible => "plausible",
            ErrorType::Hallucination => "hallucination",
        }
    }
}

/// Classify a wrong lemma.
pub fn classify_lemma_error(pred: &str, gold: &str, lexicon: &Lexicon) -> ErrorType {
    let bare_pred = dediacritize(pred);
    if fold_hamza(&bare_pred) == fold_hamza(&dediacritize(gold)) {
        ErrorType::Diacritization
    } else if lexicon.lemma_inventory().contains(&bare_pred) {
        ErrorType::Plausible
    } else {
        ErrorType::Hallucination
    }
}

pub fn error_typing(pred: &LpgEntry, gold: &LpgEntry, lexicon: &Lexicon) -> ErrorType {
    classify_lemma_error(pred.lemma(), gold.lemma(), lexicon)
}

/// Counts of each error type over lemma errors on evaluatable tokens.
pub fn error_breakdown(
    predictions: &HashMap<TokenKey, LpgEntry>,
    corpus: &[Sentence],
    lexicon: &Lexicon,
) -> Result<[(ErrorType, usize); 3]> {
    let mut counts = [
        (ErrorType::Diacritization, 0),
        (ErrorType::Plausible, 0),
        (ErrorType::Hallucination, 0),
    ];
    for s in corpus {
        for t in s.tokens.iter().filter(|t| t.is_evaluatable()) {
            let pred = predictions
                .get(&(s.id.clone(), t.index))
                .ok_or_else(|| Error::MissingPrediction {
                    sentence: s.id.clone(),
                    index: t.index,
                })?;
            let gold = t.gold.lemma.as_deref().expect("evaluatable");
            if pred.lemma() != gold {
                let kind = classify_lemma_error(pred.lemma(), gold, lexicon);
                counts.iter_mut().find(|(k, _)| *k == kind).expect("listed").1 += 1;
            }
        }
    }
    Ok(counts)
}
