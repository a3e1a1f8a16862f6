//! Per-topic retrieval stages: baseline search, intent reranking and
//! misalignment filtering.

use anyhow::{Context, Result};
use linkintent::corpus::Corpus;
use linkintent::eval::{RunFile, Topic};
use linkintent::index::{Bm25Params, InvertedIndex, RankedList};
use linkintent::intent::{HeuristicClassifier, LabelStore};
use linkintent::rerank::{filter_misaligned, AlignmentPolicy, Reranker};

pub const BASELINE_TAG: &str = "bm25";
pub const BASELINE_FILTERED_TAG: &str = "bm25+filter";
pub const INTENT_TAG: &str = "bm25+intent";
pub const INTENT_FILTERED_TAG: &str = "bm25+intent+filter";

pub fn search_topics(
    index: &InvertedIndex,
    params: &Bm25Params,
    topics: &[Topic],
    k: usize,
) -> RunFile {
    RunFile {
        topics: topics
            .iter()
            .map(|t| {
                let q = index.tokenize_query(&t.title);
                (t.id.clone(), index.search(params, &q, k))
            })
            .collect(),
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct RerankReport {
    /// Topics without a query label; their candidates keep baseline order.
    pub topics_without_label: Vec<String>,
    /// Candidates with URLs but no tweet label, summed over topics.
    pub unlabeled_candidates: usize,
}

/// Reranks each topic's candidates. Topics missing from `baseline` yield
/// empty lists.
pub fn rerank_topics(
    reranker: &Reranker<'_>,
    topics: &[Topic],
    baseline: &RunFile,
    store: &LabelStore,
) -> Result<(RunFile, RerankReport)> {
    let mut report = RerankReport::default();
    let mut out = Vec::with_capacity(topics.len());
    for t in topics {
        let candidates = baseline.topic(&t.id).cloned().unwrap_or_default();
        let label = store.query_label(&t.id).map(|q| &q.target);
        if label.is_none() {
            report.topics_without_label.push(t.id.clone());
        }
        let outcome = reranker
            .rerank(&t.title, label, &candidates, store)
            .with_context(|| format!("reranking topic {}", t.id))?;
        report.unlabeled_candidates += outcome.unlabeled_with_urls;
        out.push((t.id.clone(), outcome.ranked));
    }
    Ok((RunFile { topics: out }, report))
}

/// Applies the alignment policy per topic; returns the run and the number
/// of dropped candidates.
pub fn filter_topics(
    policy: &AlignmentPolicy,
    topics: &[Topic],
    run: &RunFile,
    store: &LabelStore,
) -> (RunFile, usize) {
    let mut dropped = 0;
    let topics = topics
        .iter()
        .map(|t| {
            let ranked = run.topic(&t.id).cloned().unwrap_or_default();
            let intent = store.query_label(&t.id).map(|q| &q.intent);
            let kept: RankedList = filter_misaligned(policy, &t.id, intent, &ranked, store);
            dropped += ranked.len() - kept.len();
            (t.id.clone(), kept)
        })
        .collect();
    (RunFile { topics }, dropped)
}

/// Labels tweets that have URLs but no gold label using the heuristic
/// rules. Uncertain predictions are not stored. Returns how many labels
/// were added.
pub fn fill_heuristic_labels(
    classifier: &HeuristicClassifier,
    corpus: &Corpus,
    store: &mut LabelStore,
) -> usize {
    let mut added = 0;
    for r in corpus.records() {
        if !r.has_urls() || store.tweet_labels.contains_key(&r.id) {
            continue;
        }
        let (label, _) = classifier.classify(r);
        if !label.is_uncertain() {
            store.tweet_labels.insert(r.id.clone(), label);
            added += 1;
        }
    }
    added
}
