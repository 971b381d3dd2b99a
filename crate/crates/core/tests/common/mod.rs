//! Fixture loading shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use lpg::clustering::ClusterModel;
use lpg::corpus::{attach_translations, read_corpus, read_predictions, read_translations, PredictionFile, PredictionKind, TokenKey};
use lpg::embeddings::{EmbeddingProvider, DEFAULT_DIM, DEFAULT_SEED};
use lpg::model::SpecialTags;
use lpg::selectors::{run_corpus, Resources};
use lpg::{Lexicon, LpgEntry, NormProfile, PipelineSpec, Sentence, UnigramModel};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn data(name: &str) -> PathBuf {
    manifest_dir().join("tests/data").join(name)
}

pub fn configs_dir() -> PathBuf {
    manifest_dir().join("../../configs")
}

pub fn lexicon() -> Lexicon {
    Lexicon::load(&data("lexicon.tsv"), NormProfile::default(), SpecialTags::default(), None).unwrap()
}

pub fn corpus(name: &str) -> Vec<Sentence> {
    read_corpus(&data(name), &NormProfile::default()).unwrap()
}

/// The dev corpus with translations attached.
pub fn dev() -> Vec<Sentence> {
    let mut c = corpus("dev.tsv");
    attach_translations(&mut c, &read_translations(&data("translations.tsv")).unwrap());
    c
}

pub fn model() -> UnigramModel {
    UnigramModel::load(&data("model.tsv")).unwrap()
}

pub fn clusters() -> ClusterModel {
    ClusterModel::load(&data("clusters.tsv")).unwrap()
}

pub fn provider() -> EmbeddingProvider {
    EmbeddingProvider::hashing(DEFAULT_DIM, DEFAULT_SEED).unwrap()
}

pub fn predictions() -> HashMap<PredictionKind, PredictionFile> {
    [
        (PredictionKind::PosTopset, "topset.tsv"),
        (PredictionKind::S2sLemma, "s2s.tsv"),
        (PredictionKind::LexcLpg, "lexc.tsv"),
        (PredictionKind::ClusterId, "cluster_ids.tsv"),
    ]
    .into_iter()
    .map(|(k, f)| (k, read_predictions(&data(f), k).unwrap()))
    .collect()
}

/// Every fixture resource loaded at once.
pub struct Fixture {
    pub lexicon: Lexicon,
    pub corpus: Vec<Sentence>,
    pub model: UnigramModel,
    pub clusters: ClusterModel,
    pub provider: EmbeddingProvider,
    pub predictions: HashMap<PredictionKind, PredictionFile>,
}

impl Fixture {
    pub fn load() -> Self {
        Fixture {
            lexicon: lexicon(),
            corpus: dev(),
            model: model(),
            clusters: clusters(),
            provider: provider(),
            predictions: predictions(),
        }
    }

    pub fn resources(&self) -> Resources<'_> {
        Resources {
            lexicon: &self.lexicon,
            model: Some(&self.model),
            provider: Some(&self.provider),
            clusters: Some(&self.clusters),
            predictions: &self.predictions,
            translations: true,
        }
    }

    /// Predicted entry per token under `spec`.
    pub fn predict(&self, spec: &PipelineSpec) -> HashMap<TokenKey, LpgEntry> {
        let run = run_corpus(spec, &self.corpus, &self.resources(), 1).unwrap();
        run.sentences
            .into_iter()
            .flat_map(|s| {
                let id = s.id;
                s.tokens.into_iter().map(move |t| ((id.clone(), t.index), t.entry))
            })
            .collect()
    }
}

/// Every pipeline config shipped in the repository, by file stem.
pub fn shipped_configs() -> Vec<(String, PipelineSpec)> {
    let mut out: Vec<(String, PipelineSpec)> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            (stem, PipelineSpec::load(&p).unwrap())
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Plain dynamic-programming edit distance over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    d[0] = (0..=b.len()).collect();
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}
