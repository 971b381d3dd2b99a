//! K-means over per-LPG embeddings, the cluster compactness ratio (CCR),
//! choice of k, and gloss-based assignment of LPGs that were never clustered.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{comment_header, read_text, TokenKey};
use crate::embeddings::{cosine, mean_vector, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::lexicon::{is_digit_or_punct, Lexicon};
use crate::model::{LpgEntry, Sentence};
use crate::sync::SCORE_EPSILON;

/// Centroids plus the LPG key to cluster id map.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    k: usize,
    dim: usize,
    seed: u64,
    centroids: Vec<Vec<f64>>,
    assignments: BTreeMap<String, usize>,
}

impl ClusterModel {
    pub fn new(
        seed: u64,
        centroids: Vec<Vec<f64>>,
        assignments: BTreeMap<String, usize>,
    ) -> Result<Self> {
        let k = centroids.len();
        if k == 0 {
            return Err(Error::ClusterParams("a cluster model needs at least one centroid".into()));
        }
        let dim = centroids[0].len();
        if let Some(c) = centroids.iter().find(|c| c.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: c.len(),
            });
        }
        if let Some((key, id)) = assignments.iter().find(|(_, &id)| id >= k) {
            return Err(Error::ClusterParams(format!("{key:?} assigned to cluster {id} >= k = {k}")));
        }
        Ok(ClusterModel {
            k,
            dim,
            seed,
            centroids,
            assignments,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    pub fn cluster_of(&self, key: &str) -> Option<usize> {
        self.assignments.get(key).copied()
    }

    /// Keys assigned to each cluster, in key order.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.k];
        for (key, &id) in &self.assignments {
            out[id].push(key.as_str());
        }
        out
    }

    /// Header `k=.. dim=.. seed=..`, then `centroid ID VALUES` and
    /// `assign KEY ID` rows.
    pub fn to_tsv(&self, header: &[String]) -> String {
        let mut out = comment_header(header);
        let _ = writeln!(out, "k={}\tdim={}\tseed={}", self.k, self.dim, self.seed);
        for (id, c) in self.centroids.iter().enumerate() {
            let values: Vec<String> = c.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "centroid\t{id}\t{}", values.join(" "));
        }
        for (key, id) in &self.assignments {
            let _ = writeln!(out, "assign\t{key}\t{id}");
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, usize, u64)> = None;
        let mut centroids: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut assignments = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let Some((hk, hd, _, _)) = header else {
                header = Some(parse_model_header(&cols, line_no).map_err(|m| Error::parse(name, line_no, m))?);
                continue;
            };
            let bad = |m: String| Error::parse(name, line_no, m);
            match cols.as_slice() {
                ["centroid", id, values] => {
                    let id: usize = id.parse().map_err(|_| bad(format!("bad centroid id {id:?}")))?;
                    let v = values
                        .split_whitespace()
                        .map(str::parse::<f64>)
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("non-numeric centroid component".into()))?;
                    if v.len() != hd {
                        return Err(bad(format!("centroid has {} components, expected {hd}", v.len())));
                    }
                    if id >= hk || centroids.insert(id, v).is_some() {
                        return Err(bad(format!("centroid id {id} out of range or repeated")));
                    }
                }
                ["assign", key, id] => {
                    let id: usize = id.parse().map_err(|_| bad(format!("bad cluster id {id:?}")))?;
                    LpgEntry::from_key(key).map_err(|e| bad(e.to_string()))?;
                    if id >= hk {
                        return Err(bad(format!("cluster id {id} >= k = {hk}")));
                    }
                    if assignments.insert((*key).to_owned(), id).is_some() {
                        return Err(bad(format!("{key:?} assigned twice")));
                    }
                }
                _ => return Err(bad("expected a centroid or assign row".into())),
            }
        }
        let (k, _, header_line, seed) = header.ok_or_else(|| Error::parse(name, 1, "missing k/dim/seed header"))?;
        if centroids.len() != k {
            return Err(Error::parse(
                name,
                header_line,
                format!("header announces {k} centroids, found {}", centroids.len()),
            ));
        }
        ClusterModel::new(seed, centroids.into_values().collect(), assignments)
    }
}

fn parse_model_header(cols: &[&str], line_no: usize) -> std::result::Result<(usize, usize, usize, u64), String> {
    let mut fields = HashMap::new();
    for part in cols {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("bad header field {part:?}"))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("header lacks {k}"));
    let k: usize = get("k")?.parse().map_err(|_| "bad k".to_owned())?;
    let dim: usize = get("dim")?.parse().map_err(|_| "bad dim".to_owned())?;
    let seed: u64 = get("seed")?.parse().map_err(|_| "bad seed".to_owned())?;
    if k == 0 || dim == 0 {
        return Err("k and dim must be positive".into());
    }
    Ok((k, dim, line_no, seed))
}

/// Mean instance vector per LPG over tokens with a complete gold entry.
/// Tokens without an instance vector use the provider's vector for their
/// surface, when a provider is given.
pub fn lpg_embeddings(
    corpus: &[Sentence],
    instance_vectors: &HashMap<TokenKey, Vec<f64>>,
    provider: Option<&EmbeddingProvider>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut grouped: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut dim = None;
    for s in corpus {
        for t in &s.tokens {
            let Some(entry) = t.gold.to_entry() else {
                continue;
            };
            let v = match instance_vectors.get(&(s.id.clone(), t.index)) {
                Some(v) => v.clone(),
                None => provider
                    .and_then(|p| p.vector(&t.surface))
                    .ok_or_else(|| Error::NoVector(format!("{}:{}", s.id, t.index)))?,
            };
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: v.len(),
                });
            }
            grouped.entry(entry.key()).or_default().push(v);
        }
    }
    let d = dim.unwrap_or(0);
    grouped
        .into_iter()
        .map(|(key, vs)| {
            let mean = mean_vector(vs.iter().map(Vec::as_slice), d)?.expect("at least one instance");
            Ok((key, mean))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest final objective wins.
    pub n_init: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            seed: 42,
            max_iter: 100,
            tol: 1e-6,
            n_init: 10,
        }
    }
}

/// A fitted model with the objective after every Lloyd iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub model: ClusterModel,
    pub history: Vec<f64>,
    pub objective: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn objective(points: &[&[f64]], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum()
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            // Only duplicates left: take any point not yet used.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points[next]));
        }
    }
    chosen.iter().map(|&i| points[i].to_vec()).collect()
}

/// Move the farthest point of a multi-member cluster into each empty cluster.
fn repair_empty(points: &[&[f64]], centroids: &mut [Vec<f64>], labels: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let far = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .map(|i| (i, sq_dist(points[i], &centroids[labels[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = far else {
            return;
        };
        labels[i] = empty;
        centroids[empty] = points[i].to_vec();
    }
}

/// Centroids, labels, objective history and final objective of one restart.
type Restart = (Vec<Vec<f64>>, Vec<usize>, Vec<f64>, f64);

fn lloyd(points: &[&[f64]], k: usize, params: &KMeansParams, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
    let dim = points[0].len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels: Vec<usize> = points.par_iter().map(|p| nearest(p, &centroids).0).collect();
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..params.max_iter {
        let mut new_labels: Vec<usize> = points.par_iter().map(|p| nearest(p, &centroids).0).collect();
        let mut moved = centroids.clone();
        repair_empty(points, &mut moved, &mut new_labels);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &l) in points.iter().zip(&new_labels) {
            sums[l].iter_mut().zip(p.iter()).for_each(|(s, x)| *s += x);
            sizes[l] += 1;
        }
        for (c, (s, n)) in moved.iter_mut().zip(sums.into_iter().zip(sizes)) {
            if n > 0 {
                *c = s.into_iter().map(|x| x / n as f64).collect();
            }
        }
        let obj = objective(points, &moved, &new_labels);
        if history.last().is_some_and(|&prev| obj > prev) {
            // Rounding pushed the objective up; keep the previous state.
            break;
        }
        let shift = centroids
            .iter()
            .zip(&moved)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = moved;
        labels = new_labels;
        history.push(obj);
        if shift < params.tol {
            break;
        }
    }
    (centroids, labels, history)
}

/// Lloyd's k-means with k-means++ seeding, over points in key order.
pub fn kmeans(points: &BTreeMap<String, Vec<f64>>, k: usize, params: &KMeansParams) -> Result<ClusterModel> {
    kmeans_traced(points, k, params).map(|run| run.model)
}

pub fn kmeans_traced(points: &BTreeMap<String, Vec<f64>>, k: usize, params: &KMeansParams) -> Result<KMeansRun> {
    if k == 0 {
        return Err(Error::ClusterParams("k must be positive".into()));
    }
    if params.max_iter == 0 || params.n_init == 0 {
        return Err(Error::ClusterParams("max_iter and n_init must be at least 1".into()));
    }
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::ClusterParams(format!("tolerance must be positive, got {}", params.tol)));
    }
    if k > points.len() {
        return Err(Error::TooManyClusters { k, points: points.len() });
    }
    let keys: Vec<&String> = points.keys().collect();
    let vecs: Vec<&[f64]> = points.values().map(Vec::as_slice).collect();
    let dim = vecs[0].len();
    if let Some(v) = vecs.iter().find(|v| v.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: v.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Restart> = None;
    for _ in 0..params.n_init {
        let (centroids, labels, history) = lloyd(&vecs, k, params, &mut rng);
        let obj = objective(&vecs, &centroids, &labels);
        if best.as_ref().is_none_or(|b| obj < b.3) {
            best = Some((centroids, labels, history, obj));
        }
    }
    let (centroids, labels, history, objective) = best.expect("n_init >= 1");
    let assignments = keys.into_iter().cloned().zip(labels).collect();
    Ok(KMeansRun {
        model: ClusterModel::new(params.seed, centroids, assignments)?,
        history,
        objective,
    })
}

/// How word types are weighted in the compactness ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CcrWeighting {
    /// Each ambiguous word type counts once.
    #[default]
    Type,
    /// Each type counts once per corpus occurrence.
    Token,
}

/// Candidate LPG keys of one ambiguous word type.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguousWord {
    pub surface: String,
    pub keys: Vec<String>,
    pub weight: usize,
}

/// Word types of the corpus whose lexicon candidate set holds at least two
/// distinct LPGs, in first-occurrence order.
pub fn ambiguous_words(corpus: &[Sentence], lexicon: &Lexicon, weighting: CcrWeighting) -> Result<Vec<AmbiguousWord>> {
    let mut order: Vec<String> = Vec::new();
    let mut freq: HashMap<String, usize> = HashMap::new();
    for t in corpus.iter().flat_map(|s| &s.tokens) {
        if is_digit_or_punct(&t.surface) {
            continue;
        }
        let n = freq.entry(t.surface.clone()).or_default();
        if *n == 0 {
            order.push(t.surface.clone());
        }
        *n += 1;
    }
    let mut out = Vec::new();
    for surface in order {
        let set = lexicon.analyze(&surface)?;
        if set.len() < 2 {
            continue;
        }
        let weight = match weighting {
            CcrWeighting::Type => 1,
            CcrWeighting::Token => freq[&surface],
        };
        let keys = set.candidates.iter().map(|a| a.key()).collect();
        out.push(AmbiguousWord { surface, keys, weight });
    }
    Ok(out)
}

/// Share of ambiguous-word candidate LPGs whose cluster also holds another
/// candidate of the same word.
pub fn ccr_words(model: &ClusterModel, words: &[AmbiguousWord]) -> Result<f64> {
    let mut shared_total = 0usize;
    let mut total = 0usize;
    for w in words.iter().filter(|w| w.keys.len() >= 2) {
        let ids = w
            .keys
            .iter()
            .map(|k| model.cluster_of(k).ok_or_else(|| Error::MissingAssignment(k.clone())))
            .collect::<Result<Vec<_>>>()?;
        let mut counts: HashMap<usize, usize> = HashMap::new();
        ids.iter().for_each(|&id| *counts.entry(id).or_default() += 1);
        let shared = ids.iter().filter(|id| counts[id] > 1).count();
        shared_total += shared * w.weight;
        total += ids.len() * w.weight;
    }
    if total == 0 {
        return Err(Error::NoAmbiguousWords);
    }
    Ok(shared_total as f64 / total as f64)
}

pub fn ccr(model: &ClusterModel, corpus: &[Sentence], lexicon: &Lexicon, weighting: CcrWeighting) -> Result<f64> {
    ccr_words(model, &ambiguous_words(corpus, lexicon, weighting)?)
}

/// Gloss embedding of an entry: the mean over all words of all its glosses.
pub fn gloss_embedding(entry: &LpgEntry, provider: &EmbeddingProvider) -> Result<Vec<f64>> {
    let words: Vec<&str> = entry.glosses().iter().flat_map(|g| g.split_whitespace()).collect();
    provider.phrase_embedding(&words)
}

/// Per-cluster mean gloss embedding of the current members.
#[derive(Debug, Clone)]
pub struct GlossCentroids {
    centroids: Vec<Option<Vec<f64>>>,
}

impl GlossCentroids {
    pub fn build(model: &ClusterModel, provider: &EmbeddingProvider) -> Result<Self> {
        let mut centroids = Vec::with_capacity(model.k());
        for members in model.members() {
            let mut vs = Vec::new();
            for key in members {
                let entry = LpgEntry::from_key(key)?;
                match gloss_embedding(&entry, provider) {
                    Ok(v) => vs.push(v),
                    Err(Error::NoVector(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            centroids.push(mean_vector(vs.iter().map(Vec::as_slice), provider.dim())?);
        }
        Ok(GlossCentroids { centroids })
    }

    /// Cluster whose gloss centroid is most cosine-similar; ties go to the
    /// lowest id.
    pub fn nearest(&self, entry: &LpgEntry, provider: &EmbeddingProvider) -> Result<usize> {
        let target = gloss_embedding(entry, provider)?;
        let mut best: Option<(usize, f64)> = None;
        for (id, c) in self.centroids.iter().enumerate() {
            let Some(c) = c else { continue };
            let score = match cosine(&target, c) {
                Ok(s) => s,
                Err(Error::ZeroVector) => continue,
                Err(e) => return Err(e),
            };
            if best.is_none_or(|(_, b)| score > b + SCORE_EPSILON) {
                best = Some((id, score));
            }
        }
        best.map(|(id, _)| id)
            .ok_or_else(|| Error::MissingAssignment(entry.key()))
    }
}

/// Cluster for an LPG the model has never seen, by gloss similarity.
pub fn assign_unknown(entry: &LpgEntry, model: &ClusterModel, provider: &EmbeddingProvider) -> Result<usize> {
    if model.cluster_of(&entry.key()).is_some() {
        return Err(Error::AlreadyAssigned(entry.key()));
    }
    GlossCentroids::build(model, provider)?.nearest(entry, provider)
}

/// Assign every missing entry against the gloss centroids of the original
/// members, so the result does not depend on the order of `entries`.
/// Existing assignments are never touched.
pub fn complete_assignments<'a, I>(model: &ClusterModel, entries: I, provider: &EmbeddingProvider) -> Result<ClusterModel>
where
    I: IntoIterator<Item = &'a LpgEntry>,
{
    let centroids = GlossCentroids::build(model, provider)?;
    let mut assignments = model.assignments.clone();
    for entry in entries {
        if let std::collections::btree_map::Entry::Vacant(slot) = assignments.entry(entry.key()) {
            slot.insert(centroids.nearest(entry, provider)?);
        }
    }
    ClusterModel::new(model.seed, model.centroids.clone(), assignments)
}

/// Outcome of [`select_k`]: the chosen model and the CCR of every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    pub model: ClusterModel,
    pub table: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectKParams {
    pub kmeans: KMeansParams,
    /// CCRs within this distance of the minimum count as minimal.
    pub tolerance: f64,
    pub weighting: CcrWeighting,
}

impl Default for SelectKParams {
    fn default() -> Self {
        SelectKParams {
            kmeans: KMeansParams::default(),
            tolerance: 0.01,
            weighting: CcrWeighting::Type,
        }
    }
}

/// Fit one model per candidate k and keep the smallest k whose CCR is within
/// tolerance of the best. Candidate LPGs without an embedding are assigned by
/// gloss similarity when a provider is given.
pub fn select_k(
    points: &BTreeMap<String, Vec<f64>>,
    candidate_ks: &[usize],
    corpus: &[Sentence],
    lexicon: &Lexicon,
    params: &SelectKParams,
    provider: Option<&EmbeddingProvider>,
) -> Result<KSelection> {
    if candidate_ks.is_empty() {
        return Err(Error::ClusterParams("no candidate k".into()));
    }
    let words = ambiguous_words(corpus, lexicon, params.weighting)?;
    let mut fitted = Vec::new();
    let ks: BTreeSet<usize> = candidate_ks.iter().copied().collect();
    for k in ks {
        let mut model = kmeans(points, k, &params.kmeans)?;
        if let Some(p) = provider {
            let entries = words
                .iter()
                .flat_map(|w| &w.keys)
                .map(|key| LpgEntry::from_key(key))
                .collect::<Result<Vec<_>>>()?;
            model = complete_assignments(&model, &entries, p)?;
        }
        let score = ccr_words(&model, &words)?;
        fitted.push((k, score, model));
    }
    let min = fitted.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let table = fitted.iter().map(|f| (f.0, f.1)).collect();
    let (k, _, model) = fitted
        .into_iter()
        .find(|f| f.1 <= min + params.tolerance)
        .expect("non-empty candidate list");
    Ok(KSelection { k, model, table })
}
