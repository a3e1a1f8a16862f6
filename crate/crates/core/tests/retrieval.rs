mod common;

use linkintent::corpus::{Corpus, TweetRecord, TweetType};
use linkintent::index::{
    Bm25Params, IndexFields, InvertedIndex, RankedList, ScoredDoc, Tokenizer, TokenizerConfig,
};
use proptest::prelude::*;

const VOCAB: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

fn record(id: &str, text: &str) -> TweetRecord {
    TweetRecord {
        id: id.into(),
        text: text.into(),
        tweet_type: TweetType::Regular,
        urls: vec![],
        linked_docs: vec![],
        likes: 0,
        replies: 0,
        retweets: 0,
        parent_context: None,
        hashtags: vec![],
        mentions: vec![],
    }
}

fn index_of(docs: &[(String, Vec<String>)]) -> InvertedIndex {
    InvertedIndex::from_documents(
        docs.iter().map(|(id, toks)| (id.clone(), toks.join(" "))),
        Tokenizer::new(TokenizerConfig::default()),
        IndexFields::default(),
    )
}

fn docs_strategy() -> impl Strategy<Value = Vec<(String, Vec<String>)>> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 0..12),
        1..40,
    )
    .prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, toks)| {
                (
                    format!("d{i:03}"),
                    toks.into_iter().map(String::from).collect(),
                )
            })
            .collect()
    })
}

fn query_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 1..5)
        .prop_map(|q| q.into_iter().map(String::from).collect())
}

#[test]
fn single_document_fixture() {
    let idx = index_of(&[("x".into(), vec!["a".into(), "a".into(), "a".into()])]);
    assert!((idx.idf("a") - (4.0f64 / 3.0).ln()).abs() < 1e-12);
    assert!((idx.idf("a") - 0.28768).abs() < 1e-5);
    let s = idx
        .bm25_score(&Bm25Params::default(), &["a".to_string()], "x")
        .unwrap();
    // tf=3, dl=avgdl, so the tf part is 3*2.2/(3+1.2)
    let expected = (4.0f64 / 3.0).ln() * 3.0 * 2.2 / 4.2;
    assert!((s - expected).abs() < 1e-12);
    assert!((s - 0.45207).abs() < 1e-5);
}

#[test]
fn ties_break_by_doc_id() {
    let idx = index_of(&[
        ("b".into(), vec!["x".into()]),
        ("a".into(), vec!["x".into()]),
        ("c".into(), vec!["y".into()]),
    ]);
    let r = idx.search(&Bm25Params::default(), &["x".to_string()], 10);
    assert_eq!(r.doc_ids(), ["a", "b"]);
    assert_eq!(r.entries[0].score, r.entries[1].score);
}

#[test]
fn build_from_corpus_matches_text() {
    let (corpus, _) = Corpus::from_records(vec![
        record("1", "Thorpe return #olympics https://t.co/x"),
        record("2", "@fan thorpe"),
    ]);
    let idx = InvertedIndex::build(
        &corpus,
        Tokenizer::new(TokenizerConfig::default()),
        IndexFields::default(),
    );
    assert_eq!(idx.doc_len("1"), Some(3));
    assert_eq!(idx.df("thorpe"), 2);
    assert_eq!(idx.df("olympics"), 1);
    assert_eq!(idx.df("https"), 0);
}

#[test]
fn snapshot_round_trip() {
    let idx = index_of(&[
        ("a".into(), vec!["x".into(), "y".into()]),
        ("b".into(), vec!["y".into()]),
    ]);
    let back = InvertedIndex::from_snapshot_str(&idx.to_snapshot_string()).unwrap();
    assert_eq!(back, idx);
    assert!(InvertedIndex::from_snapshot_str("{}").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_equals_exhaustive_scoring(docs in docs_strategy(), q in query_strategy(), k in 1usize..60) {
        let idx = index_of(&docs);
        let params = Bm25Params::default();
        let got = idx.search(&params, &q, k);

        // same library scorer over every document, sorted the slow way
        let mut all: Vec<ScoredDoc> = idx
            .doc_ids()
            .iter()
            .map(|d| ScoredDoc { doc_id: d.clone(), score: idx.bm25_score(&params, &q, d).unwrap() })
            .filter(|s| s.score > 0.0)
            .collect();
        all.sort_by(ScoredDoc::rank_order);
        all.truncate(k);
        prop_assert_eq!(&got.entries, &all);

        // independent textbook oracle
        let oracle = common::bm25_exhaustive(&docs, &q, params.k1, params.b, k);
        prop_assert_eq!(got.len(), oracle.len());
        for (g, (id, s)) in got.entries.iter().zip(&oracle) {
            prop_assert_eq!(&g.doc_id, id);
            prop_assert!((g.score - s).abs() < 1e-9);
        }
    }

    #[test]
    fn scores_increase_with_term_frequency(base in prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 1..10), extra in 1usize..4) {
        // two docs of equal length, one with more query-term occurrences
        let n = base.len() + extra;
        let with: Vec<String> = base.iter().map(|s| s.to_string()).chain(std::iter::repeat_n("z".to_string(), extra)).collect();
        let mut without: Vec<String> = base.iter().map(|s| s.to_string()).collect();
        without.extend(std::iter::repeat_n("w".to_string(), n - base.len()));
        let docs = vec![("p".to_string(), with), ("q".to_string(), without), ("r".to_string(), vec!["z".into()])];
        let idx = index_of(&docs);
        let params = Bm25Params::default();
        let q = vec!["z".to_string()];
        prop_assert!(idx.bm25_score(&params, &q, "p").unwrap() > idx.bm25_score(&params, &q, "q").unwrap());
    }

    #[test]
    fn score_is_additive_over_query_terms(docs in docs_strategy(), q1 in query_strategy(), q2 in query_strategy()) {
        let idx = index_of(&docs);
        let params = Bm25Params::default();
        let both: Vec<String> = q1.iter().chain(&q2).cloned().collect();
        for d in idx.doc_ids() {
            let s = idx.bm25_score(&params, &both, d).unwrap();
            let parts = idx.bm25_score(&params, &q1, d).unwrap() + idx.bm25_score(&params, &q2, d).unwrap();
            prop_assert!((s - parts).abs() < 1e-9);
        }
    }

    #[test]
    fn smaller_k_is_a_prefix(docs in docs_strategy(), q in query_strategy(), k in 1usize..20) {
        let idx = index_of(&docs);
        let params = Bm25Params::default();
        let long = idx.search(&params, &q, 50);
        let short = idx.search(&params, &q, k);
        prop_assert_eq!(&short.entries[..], &long.entries[..short.len()]);
        prop_assert!(short.len() <= k);
    }

    #[test]
    fn scores_are_positive_and_sorted(docs in docs_strategy(), q in query_strategy()) {
        let idx = index_of(&docs);
        let r: RankedList = idx.search(&Bm25Params::default(), &q, 50);
        for w in r.entries.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
            if w[0].score == w[1].score {
                prop_assert!(w[0].doc_id < w[1].doc_id);
            }
        }
        prop_assert!(r.entries.iter().all(|e| e.score > 0.0));
    }

    #[test]
    fn tokenizer_drops_urls(word in "[a-z]{1,8}", path in "[a-z0-9]{1,10}") {
        let t = Tokenizer::new(TokenizerConfig::default());
        let toks = t.tokenize(&format!("{word} https://t.co/{path}"));
        prop_assert_eq!(toks, vec![word]);
    }
}
