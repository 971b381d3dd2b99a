//! Candidate selection: POS top-set filtering, stage filters, gloss
//! similarity, the final LogP/Rand choice, and the pipeline that chains them.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::corpus::{read_text, AnnotatedSentence, AnnotatedToken, Payload, PredictionFile, PredictionKind};
use crate::embeddings::{cosine, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Route};
use crate::model::{Analysis, CandidateSet, LpgEntry, Sentence, SetKind, Token};
use crate::normalize::normalize_lemma;
use crate::probmodel::UnigramModel;
use crate::sync::{argmax_by_score, SCORE_EPSILON};
use crate::translit::dediacritize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    All,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    S2s,
    Lexc,
    Clust,
    Simg,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::S2s => "s2s",
            StageKind::Lexc => "lexc",
            StageKind::Clust => "clust",
            StageKind::Simg => "simg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalSelector {
    Logp,
    Rand,
}

impl FinalSelector {
    pub fn name(self) -> &'static str {
        match self {
            FinalSelector::Logp => "logp",
            FinalSelector::Rand => "rand",
        }
    }
}

/// How the tagger top-set is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopMode {
    /// Keep only candidates with the best-scoring predicted POS.
    #[default]
    Filter,
    /// Keep every candidate and rank by tagger score first, LogP second.
    TwoKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaMatch {
    #[default]
    Exact,
    Dediacritized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimgScore {
    /// Best gloss of the candidate.
    #[default]
    Max,
    /// Mean over the candidate's glosses.
    Mean,
}

/// A pipeline configuration, read from JSON such as
/// `{"base":"top","stages":["clust","s2s"],"final":"logp"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub base: Base,
    #[serde(default)]
    pub stages: Vec<StageKind>,
    #[serde(rename = "final")]
    pub final_selector: FinalSelector,
    #[serde(default)]
    pub top_mode: TopMode,
    #[serde(default)]
    pub s2s_match: LemmaMatch,
    #[serde(default)]
    pub simg_score: SimgScore,
}

impl PipelineSpec {
    pub fn new(base: Base, stages: Vec<StageKind>, final_selector: FinalSelector) -> Result<Self> {
        let spec = PipelineSpec {
            base,
            stages,
            final_selector,
            top_mode: TopMode::default(),
            s2s_match: LemmaMatch::default(),
            simg_score: SimgScore::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in &self.stages {
            if !seen.insert(*s) {
                return Err(Error::Config(format!("stage {} listed twice", s.name())));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PipelineSpec =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("pipeline config: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Name in the `Top+Clust+S2S+LogP` style.
    pub fn label(&self) -> String {
        let mut parts = vec![match self.base {
            Base::All => "All",
            Base::Top => "Top",
        }];
        parts.extend(self.stages.iter().map(|s| match s {
            StageKind::S2s => "S2S",
            StageKind::Lexc => "LexC",
            StageKind::Clust => "Clust",
            StageKind::Simg => "SimG",
        }));
        parts.push(match self.final_selector {
            FinalSelector::Logp => "LogP",
            FinalSelector::Rand => "Rand",
        });
        parts.join("+")
    }

    /// Fail with a usage error naming the first stage whose resource is
    /// missing.
    pub fn check_resources(&self, res: &Resources<'_>) -> Result<()> {
        let missing = |stage: &str, flag: &str| {
            Err(Error::MissingResource {
                stage: stage.to_owned(),
                flag: flag.to_owned(),
            })
        };
        if self.base == Base::Top && res.prediction(PredictionKind::PosTopset).is_none() {
            return missing("top", "--predictions pos_topset=PATH");
        }
        for stage in &self.stages {
            match stage {
                StageKind::S2s if res.prediction(PredictionKind::S2sLemma).is_none() => {
                    return missing("s2s", "--predictions s2s_lemma=PATH")
                }
                StageKind::Lexc if res.prediction(PredictionKind::LexcLpg).is_none() => {
                    return missing("lexc", "--predictions lexc_lpg=PATH")
                }
                StageKind::Clust if res.clusters.is_none() => return missing("clust", "--clusters"),
                StageKind::Clust if res.prediction(PredictionKind::ClusterId).is_none() => {
                    return missing("clust", "--predictions cluster_id=PATH")
                }
                StageKind::Simg if !res.translations => return missing("simg", "--translations"),
                StageKind::Simg if res.provider.is_none() => return missing("simg", "--vectors"),
                _ => {}
            }
        }
        if self.final_selector == FinalSelector::Logp && res.model.is_none() {
            return missing("logp", "--model");
        }
        Ok(())
    }
}

/// Everything a pipeline may consult, loaded up front.
#[derive(Debug, Clone, Copy)]
pub struct Resources<'a> {
    pub lexicon: &'a Lexicon,
    pub model: Option<&'a UnigramModel>,
    pub provider: Option<&'a EmbeddingProvider>,
    pub clusters: Option<&'a ClusterModel>,
    pub predictions: &'a HashMap<PredictionKind, PredictionFile>,
    /// Whether sentence translations were attached.
    pub translations: bool,
}

impl<'a> Resources<'a> {
    pub fn new(lexicon: &'a Lexicon, predictions: &'a HashMap<PredictionKind, PredictionFile>) -> Self {
        Resources {
            lexicon,
            model: None,
            provider: None,
            clusters: None,
            predictions,
            translations: false,
        }
    }

    pub fn prediction(&self, kind: PredictionKind) -> Option<&'a PredictionFile> {
        self.predictions.get(&kind)
    }

    fn payload(&self, kind: PredictionKind, token: &Token) -> Option<&'a Payload> {
        self.prediction(kind)?.get(&token.sentence_id, token.index)
    }
}

/// The candidate at `token_index mod n`, in source order.
pub fn select_rand(candidates: &CandidateSet, token_index: usize) -> Result<Analysis> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    Ok(candidates.candidates[token_index % candidates.len()].clone())
}

pub fn logp_scores(candidates: &CandidateSet, model: &UnigramModel) -> Vec<f64> {
    candidates
        .candidates
        .iter()
        .map(|a| model.logp(a.entry.lemma(), a.entry.pos()))
        .collect()
}

/// Highest unigram log probability; ties by source rank, then key.
pub fn select_logp(candidates: &CandidateSet, model: &UnigramModel) -> Result<Analysis> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let (i, _) = argmax_by_score(&candidates.candidates, &logp_scores(candidates, model));
    Ok(candidates.candidates[i].clone())
}

/// Tagger score first, LogP second. Candidates without a tagger score rank
/// below every scored one.
pub fn select_two_key(candidates: &CandidateSet, model: &UnigramModel) -> Result<Analysis> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let tag = |a: &Analysis| a.tagger_score.unwrap_or(f64::NEG_INFINITY);
    let best = candidates.candidates.iter().map(tag).fold(f64::NEG_INFINITY, f64::max);
    let scores: Vec<f64> = candidates
        .candidates
        .iter()
        .map(|a| {
            if tag(a) >= best - SCORE_EPSILON {
                model.logp(a.entry.lemma(), a.entry.pos())
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let (i, _) = argmax_by_score(&candidates.candidates, &scores);
    Ok(candidates.candidates[i].clone())
}

/// Result of one filtering stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub set: CandidateSet,
    /// The stage had nothing usable and returned its input.
    pub fallback: bool,
}

impl Filtered {
    fn unchanged(set: &CandidateSet) -> Self {
        Filtered {
            set: set.clone(),
            fallback: true,
        }
    }
}

fn tag_score(topset: &[(String, f64)], pos: &str) -> Option<f64> {
    topset.iter().find(|(t, _)| t == pos).map(|(_, s)| *s)
}

/// Restrict an All set to the tagger's best POS. Without a payload, or when
/// no candidate carries that POS, the input comes back unchanged.
pub fn filter_top(candidates: &CandidateSet, payload: Option<&Payload>, mode: TopMode) -> Result<Filtered> {
    let topset = match payload {
        None => return Ok(Filtered::unchanged(candidates)),
        Some(Payload::PosTopset(t)) if !t.is_empty() => t,
        Some(Payload::PosTopset(_)) => return Ok(Filtered::unchanged(candidates)),
        Some(_) => return Err(Error::Config("top filter needs a pos_topset payload".into())),
    };
    let scored = candidates.candidates.iter().cloned().map(|mut a| {
        a.tagger_score = tag_score(topset, a.entry.pos());
        a
    });
    match mode {
        TopMode::TwoKey => Ok(Filtered {
            set: CandidateSet::new(SetKind::Top, scored),
            fallback: false,
        }),
        TopMode::Filter => {
            let best = topset.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
            let kept: Vec<Analysis> = scored
                .filter(|a| a.tagger_score.is_some_and(|s| s >= best - SCORE_EPSILON))
                .collect();
            if kept.is_empty() {
                Ok(Filtered::unchanged(candidates))
            } else {
                Ok(Filtered {
                    set: CandidateSet::new(SetKind::Top, kept),
                    fallback: false,
                })
            }
        }
    }
}

/// Options a stage filter reads from the pipeline configuration.
#[derive(Debug, Clone, Copy)]
pub struct FilterContext<'a> {
    pub lexicon: &'a Lexicon,
    pub clusters: Option<&'a ClusterModel>,
    pub s2s_match: LemmaMatch,
}

fn keep(candidates: &CandidateSet, pred: impl Fn(&Analysis) -> bool) -> Filtered {
    let kept: Vec<Analysis> = candidates.candidates.iter().filter(|a| pred(a)).cloned().collect();
    if kept.is_empty() {
        Filtered::unchanged(candidates)
    } else {
        Filtered {
            set: CandidateSet {
                kind: candidates.kind,
                candidates: kept,
            },
            fallback: false,
        }
    }
}

/// Keep the candidates agreeing with an external prediction: the generated
/// lemma (s2s), the classified LPG (lexc) or the predicted cluster (clust).
pub fn stage_filter(
    candidates: &CandidateSet,
    stage: StageKind,
    payload: Option<&Payload>,
    ctx: &FilterContext<'_>,
) -> Result<Filtered> {
    if stage == StageKind::Clust && ctx.clusters.is_none() {
        return Err(Error::MissingResource {
            stage: "clust".into(),
            flag: "--clusters".into(),
        });
    }
    let Some(payload) = payload else {
        return Ok(Filtered::unchanged(candidates));
    };
    match (stage, payload) {
        (StageKind::S2s, Payload::Lemma(lemma)) => {
            let predicted = normalize_lemma(lemma, ctx.lexicon.profile());
            Ok(match ctx.s2s_match {
                LemmaMatch::Exact => keep(candidates, |a| a.entry.lemma() == predicted),
                LemmaMatch::Dediacritized => {
                    let bare = dediacritize(&predicted);
                    keep(candidates, |a| dediacritize(a.entry.lemma()) == bare)
                }
            })
        }
        (StageKind::Lexc, Payload::LpgKey(key)) => {
            let e = LpgEntry::from_key(key)?;
            let key = LpgEntry::new(normalize_lemma(e.lemma(), ctx.lexicon.profile()), e.pos(), e.glosses())?.key();
            Ok(keep(candidates, |a| a.key() == key))
        }
        (StageKind::Clust, Payload::Cluster(id)) => {
            let model = ctx.clusters.expect("checked above");
            Ok(keep(candidates, |a| model.cluster_of(&a.key()) == Some(*id)))
        }
        (StageKind::Simg, _) => Err(Error::Config("simg is scored with select_simg, not a payload".into())),
        (stage, _) => Err(Error::Config(format!("payload does not fit stage {}", stage.name()))),
    }
}

fn target_words(sentence: &Sentence, token_index: usize) -> Result<Vec<&str>> {
    let words = sentence
        .translation
        .as_ref()
        .ok_or_else(|| Error::MissingTranslation(sentence.id.clone()))?;
    let aligned: Vec<&str> = sentence
        .alignment
        .as_ref()
        .and_then(|a| a.get(&token_index))
        .map(|idx| idx.iter().filter_map(|&j| words.get(j)).map(String::as_str).collect())
        .unwrap_or_default();
    if aligned.is_empty() {
        Ok(words.iter().map(String::as_str).collect())
    } else {
        Ok(aligned)
    }
}

fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    match cosine(a, b) {
        Err(Error::ZeroVector) => Ok(f64::NEG_INFINITY),
        other => other,
    }
}

/// Per-candidate similarity between its glosses and the aligned English
/// words, or the whole translation when the token is unaligned.
pub fn simg_scores(
    candidates: &CandidateSet,
    sentence: &Sentence,
    token_index: usize,
    provider: &EmbeddingProvider,
    mode: SimgScore,
) -> Result<Vec<f64>> {
    let words = target_words(sentence, token_index)?;
    let target = match provider.phrase_embedding(&words) {
        Ok(v) => v,
        Err(Error::NoVector(_) | Error::EmptyPhrase) => return Ok(vec![0.0; candidates.len()]),
        Err(e) => return Err(e),
    };
    let mut scores = Vec::with_capacity(candidates.len());
    for a in &candidates.candidates {
        let mut per_gloss = Vec::new();
        for g in a.entry.glosses() {
            match provider.embed_text(g) {
                Ok(v) => per_gloss.push(similarity(&v, &target)?),
                Err(Error::NoVector(_) | Error::EmptyPhrase) => per_gloss.push(f64::NEG_INFINITY),
                Err(e) => return Err(e),
            }
        }
        let score = match mode {
            SimgScore::Max => per_gloss.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            SimgScore::Mean => {
                let finite: Vec<f64> = per_gloss.into_iter().filter(|s| s.is_finite()).collect();
                if finite.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    finite.iter().sum::<f64>() / finite.len() as f64
                }
            }
        };
        scores.push(score);
    }
    Ok(scores)
}

/// Best gloss-to-translation match; ties by source rank, then key.
pub fn select_simg(
    candidates: &CandidateSet,
    sentence: &Sentence,
    token_index: usize,
    provider: &EmbeddingProvider,
    mode: SimgScore,
) -> Result<Analysis> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let scores = simg_scores(candidates, sentence, token_index, provider, mode)?;
    let (i, _) = argmax_by_score(&candidates.candidates, &scores);
    Ok(candidates.candidates[i].clone())
}

/// The simg stage: keep every candidate tied for the best similarity.
pub fn filter_simg(
    candidates: &CandidateSet,
    sentence: &Sentence,
    token_index: usize,
    provider: &EmbeddingProvider,
    mode: SimgScore,
) -> Result<Filtered> {
    let scores = simg_scores(candidates, sentence, token_index, provider, mode)?;
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Ok(Filtered::unchanged(candidates));
    }
    let kept = candidates
        .candidates
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s >= best - SCORE_EPSILON)
        .map(|(a, _)| a.clone())
        .collect();
    Ok(Filtered {
        set: CandidateSet {
            kind: candidates.kind,
            candidates: kept,
        },
        fallback: false,
    })
}

/// Candidate counts around one step of the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageTrace {
    pub stage: &'static str,
    pub input: usize,
    pub output: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenTrace {
    pub sentence_id: String,
    pub index: usize,
    pub surface: String,
    pub route: Route,
    pub analyzed: usize,
    pub steps: Vec<StageTrace>,
    /// The step that settled the choice.
    pub label: String,
}

impl TokenTrace {
    /// `SENTENCE INDEX SURFACE ROUTE STEPS LABEL`, steps written as
    /// `stage:in>out`, with `!` marking a fallback.
    pub fn to_tsv_row(&self) -> String {
        let mut steps = format!("analyze:{}", self.analyzed);
        for s in &self.steps {
            let _ = write!(steps, " {}:{}>{}{}", s.stage, s.input, s.output, if s.fallback { "!" } else { "" });
        }
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.sentence_id,
            self.index,
            self.surface,
            self.route.label(),
            steps,
            self.label
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub analysis: Analysis,
    /// Candidates the analyzer produced before any filtering.
    pub original: CandidateSet,
    pub trace: TokenTrace,
}

/// Choose one analysis for `token` by running `spec` over its candidates.
pub fn run_pipeline(spec: &PipelineSpec, sentence: &Sentence, token: &Token, res: &Resources<'_>) -> Result<PipelineOutcome> {
    let (original, route) = res.lexicon.candidates(&token.surface)?;
    let mut trace = TokenTrace {
        sentence_id: token.sentence_id.clone(),
        index: token.index,
        surface: token.surface.clone(),
        route,
        analyzed: original.len(),
        steps: Vec::new(),
        label: String::new(),
    };
    if route == Route::DigitPunct {
        trace.label = route.label().to_owned();
        let analysis = original.candidates[0].clone();
        return Ok(PipelineOutcome {
            analysis,
            original,
            trace,
        });
    }

    let mut settled_by = "analyzer";
    let mut current = original.clone();
    let mut record = |name: &'static str, before: &CandidateSet, f: &Filtered, settled: &mut &'static str| {
        trace.steps.push(StageTrace {
            stage: name,
            input: before.len(),
            output: f.set.len(),
            fallback: f.fallback,
        });
        if f.set.len() < before.len() {
            *settled = name;
        }
    };

    if spec.base == Base::Top {
        let f = filter_top(&current, res.payload(PredictionKind::PosTopset, token), spec.top_mode)?;
        record("top", &current, &f, &mut settled_by);
        current = f.set;
    }
    let ctx = FilterContext {
        lexicon: res.lexicon,
        clusters: res.clusters,
        s2s_match: spec.s2s_match,
    };
    for &stage in &spec.stages {
        let f = match stage {
            StageKind::Simg => {
                let provider = res.provider.ok_or_else(|| Error::MissingResource {
                    stage: "simg".into(),
                    flag: "--vectors".into(),
                })?;
                filter_simg(&current, sentence, token.index, provider, spec.simg_score)?
            }
            StageKind::S2s => stage_filter(&current, stage, res.payload(PredictionKind::S2sLemma, token), &ctx)?,
            StageKind::Lexc => stage_filter(&current, stage, res.payload(PredictionKind::LexcLpg, token), &ctx)?,
            StageKind::Clust => stage_filter(&current, stage, res.payload(PredictionKind::ClusterId, token), &ctx)?,
        };
        record(stage.name(), &current, &f, &mut settled_by);
        current = f.set;
    }

    let analysis = match spec.final_selector {
        FinalSelector::Rand => select_rand(&current, token.index)?,
        FinalSelector::Logp => {
            let model = res.model.ok_or_else(|| Error::MissingResource {
                stage: "logp".into(),
                flag: "--model".into(),
            })?;
            if spec.base == Base::Top && spec.top_mode == TopMode::TwoKey {
                select_two_key(&current, model)?
            } else {
                select_logp(&current, model)?
            }
        }
    };
    trace.steps.push(StageTrace {
        stage: spec.final_selector.name(),
        input: current.len(),
        output: 1,
        fallback: false,
    });
    if current.len() > 1 {
        settled_by = spec.final_selector.name();
    }
    trace.label = match route {
        Route::Backoff => route.label().to_owned(),
        _ => settled_by.to_owned(),
    };
    Ok(PipelineOutcome {
        analysis,
        original,
        trace,
    })
}

/// Annotated output and per-token traces for a whole corpus, in corpus
/// order whatever the worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRun {
    pub sentences: Vec<AnnotatedSentence>,
    pub traces: Vec<TokenTrace>,
}

impl CorpusRun {
    pub fn traces_tsv(&self, header: &[String]) -> String {
        let mut out = crate::corpus::comment_header(header);
        out.push_str("sentence\tindex\tsurface\troute\tsteps\tlabel\n");
        for t in &self.traces {
            out.push_str(&t.to_tsv_row());
            out.push('\n');
        }
        out
    }
}

fn run_sentence(spec: &PipelineSpec, sentence: &Sentence, res: &Resources<'_>) -> Result<(AnnotatedSentence, Vec<TokenTrace>)> {
    let mut tokens = Vec::with_capacity(sentence.tokens.len());
    let mut traces = Vec::with_capacity(sentence.tokens.len());
    for token in &sentence.tokens {
        let out = run_pipeline(spec, sentence, token, res)?;
        tokens.push(AnnotatedToken {
            index: token.index,
            surface: token.surface.clone(),
            entry: out.analysis.entry,
            stage: out.trace.label.clone(),
        });
        traces.push(out.trace);
    }
    Ok((
        AnnotatedSentence {
            id: sentence.id.clone(),
            tokens,
        },
        traces,
    ))
}

/// Run the pipeline over every token with `jobs` worker threads.
pub fn run_corpus(spec: &PipelineSpec, corpus: &[Sentence], res: &Resources<'_>, jobs: usize) -> Result<CorpusRun> {
    spec.check_resources(res)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_sentence: Vec<(AnnotatedSentence, Vec<TokenTrace>)> = pool.install(|| {
        corpus
            .par_iter()
            .map(|s| run_sentence(spec, s, res))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut run = CorpusRun {
        sentences: Vec::with_capacity(per_sentence.len()),
        traces: Vec::new(),
    };
    for (s, t) in per_sentence {
        run.sentences.push(s);
        run.traces.extend(t);
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpecialTags;
    use crate::normalize::NormProfile;

    const EQD: &str = "Eqd\tEaqada\tEaqad\tverb\ttie\n\
Eqd\tEaq~ada\tEaq~ad\tverb\tcomplicate\n\
Eqd\tEuqida\tEaqad\tverb\tconvene;hold\n\
Eqd\tEaqod\tEaqod\tnoun\tcontract\n\
Eqd\tEaqod\tEaqod\tnoun_prop\tAqd\n\
Eqd\tEiqod\tEiqod\tnoun\tnecklace\n\
Eqd\tEuqad\tEuqodap\tnoun\tcomplex;knot\n\
Eqd\tEuq~ida\tEaq~ad\tverb\tbe complicated\n";

    fn lexicon() -> Lexicon {
        Lexicon::parse(EQD, "lex", NormProfile::default(), SpecialTags::default(), None).unwrap()
    }

    fn set(n: usize) -> CandidateSet {
        CandidateSet::new(
            SetKind::All,
            (0..n).map(|i| Analysis::new(LpgEntry::new(format!("l{i}"), "noun", ["g"]).unwrap(), "d", i)),
        )
    }

    #[test]
    fn rand_is_index_modulo_size() {
        let s = set(3);
        assert_eq!(select_rand(&s, 4).unwrap().source_rank, 1);
        assert_eq!(select_rand(&set(1), 17).unwrap().source_rank, 0);
        assert!(matches!(select_rand(&set(0), 0), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn top_filter_keeps_best_pos() {
        let all = lexicon().analyze("Eqd").unwrap();
        let payload = Payload::PosTopset(vec![("noun".into(), 0.9), ("verb".into(), 0.1)]);
        let f = filter_top(&all, Some(&payload), TopMode::Filter).unwrap();
        assert_eq!(f.set.kind, SetKind::Top);
        assert_eq!(f.set.len(), 3);
        assert!(f.set.candidates.iter().all(|a| a.entry.pos() == "noun" && a.tagger_score == Some(0.9)));

        let none = Payload::PosTopset(vec![("adj".into(), 1.0)]);
        let f = filter_top(&all, Some(&none), TopMode::Filter).unwrap();
        assert!(f.fallback);
        assert_eq!(f.set, all);
        assert_eq!(filter_top(&all, None, TopMode::Filter).unwrap().set.kind, SetKind::All);
    }

    #[test]
    fn stage_filters() {
        let lex = lexicon();
        let all = lex.analyze("Eqd").unwrap();
        let ctx = FilterContext {
            lexicon: &lex,
            clusters: None,
            s2s_match: LemmaMatch::Exact,
        };
        let f = stage_filter(&all, StageKind::S2s, Some(&Payload::Lemma("Eaqod".into())), &ctx).unwrap();
        assert_eq!(f.set.len(), 2);
        assert!(f.set.candidates.iter().all(|a| a.entry.lemma() == "Eaqod"));

        let absent = Payload::LpgKey("Eaqod#noun#treaty".into());
        let f = stage_filter(&all, StageKind::Lexc, Some(&absent), &ctx).unwrap();
        assert!(f.fallback);
        assert_eq!(f.set.len(), 8);
        let present = Payload::LpgKey("Eaqod#noun#contract".into());
        assert_eq!(stage_filter(&all, StageKind::Lexc, Some(&present), &ctx).unwrap().set.len(), 1);

        assert!(matches!(
            stage_filter(&all, StageKind::Clust, Some(&Payload::Cluster(0)), &ctx),
            Err(Error::MissingResource { .. })
        ));
    }

    #[test]
    fn dediacritized_lemma_match() {
        let lex = lexicon();
        let all = lex.analyze("Eqd").unwrap();
        let ctx = FilterContext {
            lexicon: &lex,
            clusters: None,
            s2s_match: LemmaMatch::Dediacritized,
        };
        let f = stage_filter(&all, StageKind::S2s, Some(&Payload::Lemma("Eqd".into())), &ctx).unwrap();
        assert_eq!(f.set.len(), 7);
    }

    #[test]
    fn simg_prefers_aligned_gloss() {
        let provider = EmbeddingProvider::parse("contract 1 0\nnecklace 0 1\ndeal 0.9 0.1\n", "v", 0).unwrap();
        let lex = lexicon();
        let all = lex.analyze("Eqd").unwrap();
        let nouns = CandidateSet::new(
            SetKind::Top,
            all.candidates.into_iter().filter(|a| a.entry.glosses() == ["contract"] || a.entry.glosses() == ["necklace"]),
        );
        let sentence = Sentence {
            id: "s1".into(),
            tokens: Vec::new(),
            translation: Some(vec!["the".into(), "necklace".into()]),
            alignment: Some([(0, vec![1])].into_iter().collect()),
        };
        let pick = select_simg(&nouns, &sentence, 0, &provider, SimgScore::Max).unwrap();
        assert_eq!(pick.entry.glosses(), ["necklace"]);
        let unaligned = Sentence {
            alignment: None,
            translation: Some(vec!["deal".into()]),
            ..sentence.clone()
        };
        let pick = select_simg(&nouns, &unaligned, 0, &provider, SimgScore::Max).unwrap();
        assert_eq!(pick.entry.glosses(), ["contract"]);
        let bare = Sentence {
            translation: None,
            ..sentence
        };
        assert!(matches!(select_simg(&nouns, &bare, 0, &provider, SimgScore::Max), Err(Error::MissingTranslation(_))));
    }

    #[test]
    fn spec_json() {
        let spec = PipelineSpec::from_json(r#"{"base":"top","stages":["clust","s2s"],"final":"logp"}"#).unwrap();
        assert_eq!(spec.label(), "Top+Clust+S2S+LogP");
        assert_eq!(spec.top_mode, TopMode::Filter);
        assert!(PipelineSpec::from_json(r#"{"base":"top","stages":["s2s","s2s"],"final":"logp"}"#).is_err());
        assert!(PipelineSpec::from_json(r#"{"base":"top","stages":[]}"#).is_err());
        assert!(PipelineSpec::from_json(r#"{"base":"all","final":"rand","extra":1}"#).is_err());
    }

    #[test]
    fn missing_resources_name_the_stage() {
        let lex = lexicon();
        let preds = HashMap::new();
        let res = Resources::new(&lex, &preds);
        let spec = PipelineSpec::new(Base::All, vec![StageKind::Clust], FinalSelector::Rand).unwrap();
        match spec.check_resources(&res) {
            Err(Error::MissingResource { stage, flag }) => assert_eq!((stage.as_str(), flag.as_str()), ("clust", "--clusters")),
            other => panic!("unexpected {other:?}"),
        }
        let logp = PipelineSpec::new(Base::All, vec![], FinalSelector::Logp).unwrap();
        assert!(logp.check_resources(&res).is_err());
    }

    #[test]
    fn digits_bypass_the_pipeline() {
        let lex = lexicon();
        let preds = HashMap::new();
        let res = Resources::new(&lex, &preds);
        let spec = PipelineSpec::new(Base::All, vec![], FinalSelector::Rand).unwrap();
        let token = Token {
            sentence_id: "s".into(),
            index: 0,
            surface: "2024".into(),
            gold: Default::default(),
        };
        let out = run_pipeline(&spec, &Sentence::default(), &token, &res).unwrap();
        assert_eq!(out.analysis.entry.pos(), "digit");
        assert_eq!(out.trace.label, "digit_punct");
        assert!(out.trace.steps.is_empty());
    }
}
