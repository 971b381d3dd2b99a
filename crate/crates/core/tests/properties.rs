//! Property tests for the module invariants.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};

use proptest::prelude::*;
use proptest::sample::select;

use lpg::clustering::{
    ccr, ccr_words, complete_assignments, kmeans, kmeans_traced, AmbiguousWord, ClusterModel, CcrWeighting, KMeansParams,
};
use lpg::corpus::{format_corpus, parse_corpus};
use lpg::embeddings::{cosine, EmbeddingProvider};
use lpg::evalstats::{
    classify_lemma_error, correctness, error_breakdown, mcnemar, oracle_recall, GlossMatch, Granularity,
};
use lpg::lexicon::lookup_key;
use lpg::model::Token;
use lpg::normalize::shadda_leads_clusters;
use lpg::selectors::{run_corpus, select_logp, select_rand};
use lpg::sync::{sync_score, synchronize_token, SyncConfig};
use lpg::translit::{arabic_code_points, buckwalter_symbols, dediacritize, from_buckwalter, is_diacritic, to_buckwalter};
use lpg::{normalize_lemma, Analysis, CandidateSet, Gold, LpgEntry, NormProfile, Sentence, SetKind, UnigramModel};

fn arabic_text() -> impl Strategy<Value = String> {
    let chars: Vec<char> = arabic_code_points().collect();
    prop::collection::vec(select(chars), 0..30).prop_map(|v| v.into_iter().collect())
}

fn buckwalter_text() -> impl Strategy<Value = String> {
    let chars: Vec<char> = buckwalter_symbols().collect();
    prop::collection::vec(select(chars), 0..30).prop_map(|v| v.into_iter().collect())
}

/// Letters interleaved with diacritics, so every rule has something to bite.
fn lemma_like() -> impl Strategy<Value = String> {
    let letters: Vec<char> = buckwalter_symbols().filter(|c| !is_diacritic(*c)).collect();
    let marks: Vec<char> = buckwalter_symbols().filter(|c| is_diacritic(*c)).collect();
    prop::collection::vec(prop_oneof![3 => select(letters), 2 => select(marks)], 1..14)
        .prop_map(|v| v.into_iter().collect())
}

/// Lemmas free of the characters that letter-rewriting rules act on.
fn plain_lemma() -> impl Strategy<Value = String> {
    let letters: Vec<char> = buckwalter_symbols()
        .filter(|c| !is_diacritic(*c) && !matches!(c, 'Y' | '{'))
        .collect();
    let marks = vec!['a', 'u', 'i', 'o', '~'];
    prop::collection::vec(prop_oneof![3 => select(letters), 2 => select(marks)], 1..14)
        .prop_map(|v| v.into_iter().collect())
}

/// Entries over a tiny alphabet that includes the key separators.
fn tricky_entry() -> impl Strategy<Value = Option<LpgEntry>> {
    (
        "[ab#;\\\\]{1,3}",
        "[n#\\\\]{1,2}",
        prop::collection::vec("[ab#;\\\\]{1,3}", 1..3),
    )
        .prop_map(|(l, p, g)| LpgEntry::new(l, p, g).ok())
}

fn entry_from(lemma: &str, pos: &str, gloss: &str) -> LpgEntry {
    LpgEntry::new(lemma, pos, [gloss]).unwrap()
}

fn token(sid: &str, index: usize, surface: &str, gold: Gold) -> Token {
    Token {
        sentence_id: sid.into(),
        index,
        surface: surface.into(),
        gold,
    }
}

fn sentence(id: &str, tokens: Vec<Token>) -> Sentence {
    Sentence {
        id: id.into(),
        tokens,
        translation: None,
        alignment: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arabic_round_trip(s in arabic_text()) {
        let bw = to_buckwalter(&s).unwrap();
        prop_assert_eq!(from_buckwalter(&bw).unwrap(), s);
    }

    #[test]
    fn buckwalter_round_trip(s in buckwalter_text()) {
        let ar = from_buckwalter(&s).unwrap();
        prop_assert_eq!(to_buckwalter(&ar).unwrap(), s);
    }

    #[test]
    fn normalization_is_idempotent(s in lemma_like(), sun in any::<bool>()) {
        let p = NormProfile::default().with_sun_letter_shadda_removal(sun);
        let once = normalize_lemma(&s, &p);
        prop_assert_eq!(normalize_lemma(&once, &p), once);
    }

    #[test]
    fn normalized_shadda_leads(s in lemma_like()) {
        prop_assert!(shadda_leads_clusters(&normalize_lemma(&s, &NormProfile::default())));
    }

    #[test]
    fn normalization_keeps_letters(s in plain_lemma()) {
        prop_assert_eq!(dediacritize(&normalize_lemma(&s, &NormProfile::default())), dediacritize(&s));
    }

    #[test]
    fn lpg_key_is_injective(entries in prop::collection::vec(tricky_entry(), 1..40)) {
        let mut seen: HashMap<String, LpgEntry> = HashMap::new();
        for e in entries.into_iter().flatten() {
            let key = e.key();
            prop_assert_eq!(&LpgEntry::from_key(&key).unwrap(), &e);
            if let Some(prev) = seen.insert(key, e.clone()) {
                prop_assert_eq!(prev, e);
            }
        }
    }

    #[test]
    fn candidate_sets_hold_unique_keys(picks in prop::collection::vec((0usize..4, 0usize..3), 1..20)) {
        let set = CandidateSet::new(
            SetKind::All,
            picks.iter().enumerate().map(|(i, &(l, g))| {
                Analysis::new(entry_from(&format!("l{l}"), "noun", &format!("g{g}")), "d", i)
            }),
        );
        let keys: HashSet<String> = set.candidates.iter().map(Analysis::key).collect();
        prop_assert_eq!(keys.len(), set.len());
    }

    #[test]
    fn cosine_symmetric_and_scale_free(
        u in prop::collection::vec(-5.0f64..5.0, 4),
        v in prop::collection::vec(-5.0f64..5.0, 4),
        a in 0.01f64..100.0,
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let uv = cosine(&u, &v).unwrap();
        prop_assert!((uv - cosine(&v, &u).unwrap()).abs() < 1e-12);
        let au: Vec<f64> = u.iter().map(|x| x * a).collect();
        prop_assert!((uv - cosine(&au, &v).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn fallback_vectors_are_deterministic(word in "[a-z]{1,12}", seed in any::<u64>()) {
        let a = EmbeddingProvider::hashing(16, seed).unwrap().fallback_vector(&word);
        let b = EmbeddingProvider::hashing(16, seed).unwrap().fallback_vector(&word);
        prop_assert_eq!(&a, &b);
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sync_lemma_edit_is_symmetric(a in "[a-zA-Z~]{1,8}", b in "[a-zA-Z~]{1,8}") {
        let cfg = SyncConfig::default();
        let gold = |l: &str| Gold::new(Some(l.into()), None, vec![]).unwrap();
        let ab = sync_score(&gold(&a), &entry_from(&b, "noun", "x"), &cfg).unwrap();
        let ba = sync_score(&gold(&b), &entry_from(&a, "noun", "x"), &cfg).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn sync_self_score_is_one(l in "[a-z]{1,8}", p in "[a-z]{1,5}", g in "[a-z]{1,5}") {
        let e = entry_from(&l, &p, &g);
        prop_assert_eq!(sync_score(&Gold::from_entry(&e), &e, &SyncConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn logp_mass_and_update(counts in prop::collection::vec(1usize..6, 1..8), bump in 0usize..8, alpha in 0.1f64..3.0) {
        let build = |extra: Option<usize>| {
            let mut tokens = Vec::new();
            for (i, &c) in counts.iter().enumerate() {
                let n = c + usize::from(extra == Some(i));
                for _ in 0..n {
                    let gold = Gold::from_entry(&entry_from(&format!("l{i}"), "noun", "x"));
                    tokens.push(token("s", tokens.len(), "w", gold));
                }
            }
            UnigramModel::train(&[sentence("s", tokens)], alpha).unwrap()
        };
        let m = build(None);
        let mass: f64 = m.counts().map(|(l, p, _)| m.logp(l, p).exp()).sum::<f64>() + m.unseen_mass();
        prop_assert!(mass <= 1.0 + 1e-9);
        let p = bump % counts.len();
        let q = (p + 1) % counts.len();
        let bumped = build(Some(p));
        let name = |i: usize| format!("l{i}");
        prop_assert!(bumped.logp(&name(p), "noun") > m.logp(&name(p), "noun"));
        if q != p {
            prop_assert!(bumped.logp(&name(q), "noun") < m.logp(&name(q), "noun"));
        }
    }

    #[test]
    fn mcnemar_is_symmetric(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..120)) {
        let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let ab = mcnemar(&a, &b).unwrap();
        let ba = mcnemar(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn ccr_bounds(ids in prop::collection::vec(0usize..4, 2..12), split in 1usize..6) {
        let key = |i: usize| entry_from(&format!("e{i}"), "noun", "x").key();
        let assignments: BTreeMap<String, usize> = ids.iter().enumerate().map(|(i, &c)| (key(i), c)).collect();
        let model = ClusterModel::new(0, vec![vec![0.0]; 4], assignments).unwrap();
        let cut = split.min(ids.len() - 1);
        let words: Vec<AmbiguousWord> = [(0, cut), (cut, ids.len())]
            .into_iter()
            .filter(|(a, b)| b - a >= 2)
            .map(|(a, b)| AmbiguousWord { surface: format!("w{a}"), keys: (a..b).map(key).collect(), weight: 1 })
            .collect();
        prop_assume!(!words.is_empty());
        let c = ccr_words(&model, &words).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        let any_shared = words.iter().any(|w| {
            let ids: Vec<usize> = w.keys.iter().map(|k| model.cluster_of(k).unwrap()).collect();
            ids.iter().enumerate().any(|(i, x)| ids[i + 1..].contains(x))
        });
        prop_assert_eq!(c == 0.0, !any_shared);
    }

    #[test]
    fn kmeans_objective_never_rises(
        pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 3..30),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= pts.len());
        let points: BTreeMap<String, Vec<f64>> = pts
            .into_iter()
            .enumerate()
            .map(|(i, p)| (entry_from(&format!("p{i}"), "noun", "x").key(), p))
            .collect();
        let params = KMeansParams { seed, n_init: 2, ..KMeansParams::default() };
        let run = kmeans_traced(&points, k, &params).unwrap();
        for w in run.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert_eq!(kmeans(&points, k, &params).unwrap(), run.model);
    }
}

fn dev_surfaces() -> Vec<String> {
    let mut v: Vec<String> = common::corpus("dev.tsv")
        .into_iter()
        .flat_map(|s| s.tokens.into_iter().map(|t| t.surface))
        .collect();
    v.sort();
    v.dedup();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analyze_never_empty_and_keys_agree(surface in "[A-Za-z$~*]{1,6}", pick in 0usize..40) {
        let lex = common::lexicon();
        let known = dev_surfaces();
        for s in [surface, known[pick % known.len()].clone()] {
            let set = lex.analyze(&s).unwrap();
            prop_assert!(!set.is_empty());
            for a in &lex.lookup(&s).to_vec() {
                prop_assert_eq!(lookup_key(&a.diac), lookup_key(&s));
                prop_assert!(lex.lemma_inventory().contains(&dediacritize(a.entry.lemma())));
            }
        }
    }

    #[test]
    fn corpus_text_round_trips(
        rows in prop::collection::vec(
            prop::collection::vec(("[bt$dr]{1,5}", proptest::option::of("[a-z]{2,5}"), proptest::option::of("[a-z]{1,5}"), prop::collection::vec("[a-z]{1,5}", 0..3)), 1..6),
            1..5,
        ),
    ) {
        let profile = NormProfile::default();
        let corpus: Vec<Sentence> = rows
            .iter()
            .enumerate()
            .map(|(si, toks)| {
                let id = format!("s{si}");
                let tokens = toks
                    .iter()
                    .enumerate()
                    .map(|(i, (surface, lemma, pos, glosses))| {
                        // A gold without a lemma carries nothing else either.
                        let (pos, glosses) = if lemma.is_some() { (pos.clone(), glosses.clone()) } else { (None, vec![]) };
                        let gold = Gold::new(lemma.as_ref().map(|l| normalize_lemma(l, &profile)), pos, glosses).unwrap();
                        token(&id, i, surface, gold)
                    })
                    .collect();
                sentence(&id, tokens)
            })
            .collect();
        let text = format_corpus(&corpus, &["test".into()]);
        let back = parse_corpus(&text, "mem", &profile).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn sync_picks_a_candidate(pick in 0usize..40, lemma in "[a-zA-Z~]{1,7}", pos in proptest::option::of(select(vec!["noun", "verb", "adj"]))) {
        let lex = common::lexicon();
        let known = dev_surfaces();
        let surface = &known[pick % known.len()];
        let (set, _) = lex.candidates(surface).unwrap();
        let t = token("s", 0, surface, Gold::new(Some(lemma), pos.map(Into::into), vec![]).unwrap());
        let out = synchronize_token(&t, &set, &SyncConfig::default()).unwrap();
        prop_assert!(set.contains_key(&out.analysis.key()));
        let resynced = token("s", 0, surface, Gold::from_entry(&out.analysis.entry));
        let again = synchronize_token(&resynced, &set, &SyncConfig::default()).unwrap();
        prop_assert_eq!(again.analysis.key(), out.analysis.key());
    }

    #[test]
    fn selectors_stay_in_the_set(pick in 0usize..40, idx in 0usize..50) {
        let lex = common::lexicon();
        let model = common::model();
        let known = dev_surfaces();
        let (set, _) = lex.candidates(&known[pick % known.len()]).unwrap();
        prop_assert!(set.contains_key(&select_rand(&set, idx).unwrap().key()));
        prop_assert!(set.contains_key(&select_logp(&set, &model).unwrap().key()));
    }

    #[test]
    fn random_systems_respect_chain_and_recall(choices in prop::collection::vec(0usize..8, 50)) {
        let lex = common::lexicon();
        let corpus = common::corpus("dev.tsv");
        let mut sets = HashMap::new();
        let mut preds = HashMap::new();
        for (t, &c) in corpus.iter().flat_map(|s| &s.tokens).zip(&choices) {
            let (set, _) = lex.candidates(&t.surface).unwrap();
            preds.insert((t.sentence_id.clone(), t.index), set.candidates[c % set.len()].entry.clone());
            sets.insert((t.sentence_id.clone(), t.index), set);
        }
        let mut acc = Vec::new();
        for g in Granularity::ALL {
            let hits = correctness(&preds, &corpus, g, GlossMatch::Intersect).unwrap();
            let a = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
            prop_assert!(a <= oracle_recall(&corpus, &sets, g, GlossMatch::Intersect).unwrap());
            acc.push(a);
        }
        prop_assert!(acc[0] >= acc[1] && acc[1] >= acc[2]);

        let breakdown = error_breakdown(&preds, &corpus, &lex).unwrap();
        let lemma_errors = corpus
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| preds[&(t.sentence_id.clone(), t.index)].lemma() != t.gold.lemma.as_deref().unwrap())
            .count();
        prop_assert_eq!(breakdown.iter().map(|b| b.1).sum::<usize>(), lemma_errors);
    }

    #[test]
    fn error_typing_is_deterministic(pred in "[a-zA-Z~]{1,8}", gold in "[a-zA-Z~]{1,8}") {
        let lex = common::lexicon();
        prop_assert_eq!(classify_lemma_error(&pred, &gold, &lex), classify_lemma_error(&pred, &gold, &lex));
    }
}

#[test]
fn corpus_runs_are_independent_of_workers() {
    let fx = common::Fixture::load();
    for (name, spec) in common::shipped_configs() {
        let one = run_corpus(&spec, &fx.corpus, &fx.resources(), 1).unwrap();
        let many = run_corpus(&spec, &fx.corpus, &fx.resources(), 3).unwrap();
        assert_eq!(one, many, "{name}");
    }
}

#[test]
fn completing_assignments_keeps_existing_ones() {
    let lex = common::lexicon();
    let provider = common::provider();
    let model = common::clusters();
    let entries: Vec<LpgEntry> = lex.all_entries().into_values().collect();
    let done = complete_assignments(&model, &entries, &provider).unwrap();
    for (k, id) in model.assignments() {
        assert_eq!(done.cluster_of(k), Some(*id));
    }
    assert_eq!(done.assignments().len(), entries.len());
    let mut reversed = entries.clone();
    reversed.reverse();
    assert_eq!(complete_assignments(&model, &reversed, &provider).unwrap(), done);
    assert_eq!(complete_assignments(&done, &entries, &provider).unwrap(), done);
}

#[test]
fn single_cluster_ccr_is_one() {
    let lex = common::lexicon();
    let corpus = common::corpus("dev.tsv");
    let keys = lex.all_entries().into_keys().map(|k| (k, 0)).collect();
    let model = ClusterModel::new(1, vec![vec![0.0]], keys).unwrap();
    assert_eq!(ccr(&model, &corpus, &lex, CcrWeighting::Type).unwrap(), 1.0);
    assert_eq!(ccr(&model, &corpus, &lex, CcrWeighting::Token).unwrap(), 1.0);
}
