//! Lexicon-driven Lemma-POS-Gloss (LPG) lemmatization for Arabic.
//!
//! Candidates come from an out-of-context lexicon and are narrowed by
//! pipelines that consume externally produced predictions (POS top-sets,
//! generated lemmas, classifier LPGs, cluster ids, translations).

pub mod cli;
pub mod clustering;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evalstats;
pub mod lexicon;
pub mod model;
pub mod normalize;
pub mod probmodel;
pub mod selectors;
pub mod sync;
pub mod translit;

pub use error::{Error, Result};
pub use lexicon::Lexicon;
pub use model::{Analysis, CandidateSet, Gold, LpgEntry, Sentence, SetKind, Token, NO_GLOSS};
pub use normalize::{normalize_lemma, NormProfile};
pub use probmodel::UnigramModel;
pub use selectors::{run_pipeline, PipelineSpec};
