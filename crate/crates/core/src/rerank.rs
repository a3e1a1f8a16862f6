//! Intent-aware reranking of first-stage candidates and misalignment
//! filtering.
//!
//! Queries and candidate tweets are augmented by appending the display text
//! of their intent label, then the candidates are rescored with BM25 over
//! the augmented representations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, TweetRecord};
use crate::index::{
    document_text, idf, tf_component, Bm25Params, InvertedIndex, RankedList, ScoredDoc,
};
use crate::intent::{InformationNeed, LabelStore, QueryIntent};
use crate::taxonomy::{CategoryId, IntentLabel, Taxonomy};

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("candidate {0:?} is not in the index")]
    UnknownDoc(String),
    #[error("label {0} is not defined by the loaded taxonomy")]
    UnknownLabel(String),
    #[error("repetition factor must be at least 1")]
    InvalidRepetition,
    #[error("alignment policy: {0}")]
    Policy(String),
}

/// Where BM25 collection statistics come from when rescoring candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsScope {
    /// Original query terms use full-index document frequencies; appended
    /// intent terms use frequencies over the augmented candidate set.
    #[default]
    Mixed,
    /// Every query term uses full-index document frequencies.
    FullIndex,
    /// Every statistic, including average length, comes from the
    /// augmented candidate set.
    CandidateSet,
}

impl StatsScope {
    pub fn as_str(self) -> &'static str {
        match self {
            StatsScope::Mixed => "mixed",
            StatsScope::FullIndex => "full-index",
            StatsScope::CandidateSet => "candidate-set",
        }
    }
}

impl FromStr for StatsScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(StatsScope::Mixed),
            "full-index" => Ok(StatsScope::FullIndex),
            "candidate-set" => Ok(StatsScope::CandidateSet),
            other => Err(format!(
                "unknown statistics scope {other:?} (expected mixed, full-index or candidate-set)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankOptions {
    pub stats_scope: StatsScope,
    /// How many times the intent text is appended.
    pub repetition: usize,
}

impl Default for RerankOptions {
    fn default() -> Self {
        RerankOptions {
            stats_scope: StatsScope::Mixed,
            repetition: 1,
        }
    }
}

fn intent_suffix(
    taxonomy: &Taxonomy,
    label: Option<&IntentLabel>,
    repetition: usize,
) -> Result<Option<String>, RerankError> {
    if repetition == 0 {
        return Err(RerankError::InvalidRepetition);
    }
    let Some(label) = label else {
        return Ok(None);
    };
    if !taxonomy.contains_label(label) {
        return Err(RerankError::UnknownLabel(label.to_string()));
    }
    Ok(taxonomy
        .augmentation_text(label)
        .map(|t| vec![t.as_str(); repetition].join(" ")))
}

/// Query text followed by the intent display text. Missing or uncertain
/// labels leave the query unchanged.
pub fn augment_query(
    taxonomy: &Taxonomy,
    query_text: &str,
    label: Option<&IntentLabel>,
    repetition: usize,
) -> Result<String, RerankError> {
    Ok(match intent_suffix(taxonomy, label, repetition)? {
        Some(s) => format!("{query_text} {s}"),
        None => query_text.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedDoc {
    pub doc_id: String,
    pub augmented_text: String,
}

/// Indexed text of a candidate with its intent appended. Tweets without
/// URLs carry no link intent and stay unmodified.
pub fn augment_doc(
    taxonomy: &Taxonomy,
    record: &TweetRecord,
    index: &InvertedIndex,
    label: Option<&IntentLabel>,
    repetition: usize,
) -> Result<AugmentedDoc, RerankError> {
    let mut text = document_text(record, index.fields());
    let suffix = intent_suffix(taxonomy, label, repetition)?;
    if let (true, Some(s)) = (record.has_urls(), suffix) {
        text.push(' ');
        text.push_str(&s);
    }
    Ok(AugmentedDoc {
        doc_id: record.id.clone(),
        augmented_text: text,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub ranked: RankedList,
    /// Candidates with URLs but no label in the store; they were scored
    /// unaugmented.
    pub unlabeled_with_urls: usize,
}

struct Candidate {
    doc_id: String,
    tf: HashMap<String, u32>,
    len: f64,
    extra: f64,
}

pub struct Reranker<'a> {
    pub taxonomy: &'a Taxonomy,
    pub index: &'a InvertedIndex,
    pub corpus: &'a Corpus,
    pub params: Bm25Params,
    pub options: RerankOptions,
}

impl Reranker<'_> {
    /// Rescores `candidates` over augmented representations. The output is
    /// a permutation of the input ids. When the query carries no intent
    /// text the candidates are returned as given.
    pub fn rerank(
        &self,
        query_text: &str,
        query_label: Option<&IntentLabel>,
        candidates: &RankedList,
        store: &LabelStore,
    ) -> Result<RerankOutcome, RerankError> {
        let tokenizer = self.index.tokenizer();
        let original: Vec<String> = tokenizer.tokenize(query_text);
        let intent_tokens: Vec<String> =
            match intent_suffix(self.taxonomy, query_label, self.options.repetition)? {
                Some(s) => tokenizer.tokenize(&s),
                None => Vec::new(),
            };

        let mut cands = Vec::with_capacity(candidates.len());
        let mut unlabeled_with_urls = 0;
        for entry in &candidates.entries {
            if !self.index.contains_doc(&entry.doc_id) {
                return Err(RerankError::UnknownDoc(entry.doc_id.clone()));
            }
            let record = self
                .corpus
                .get(&entry.doc_id)
                .ok_or_else(|| RerankError::UnknownDoc(entry.doc_id.clone()))?;
            let label = store.tweet_label(&entry.doc_id);
            if label.is_none() && record.has_urls() {
                unlabeled_with_urls += 1;
            }
            let aug = augment_doc(
                self.taxonomy,
                record,
                self.index,
                label,
                self.options.repetition,
            )?;
            let tokens = tokenizer.tokenize(&aug.augmented_text);
            let orig_len = self.index.doc_len(&entry.doc_id).unwrap_or(0) as f64;
            let mut tf = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            cands.push(Candidate {
                doc_id: aug.doc_id,
                len: tokens.len() as f64,
                extra: tokens.len() as f64 - orig_len,
                tf,
            });
        }

        if intent_tokens.is_empty() {
            return Ok(RerankOutcome {
                ranked: candidates.clone(),
                unlabeled_with_urls,
            });
        }

        let n_cand = cands.len() as f64;
        let cand_df = |t: &str| cands.iter().filter(|c| c.tf.contains_key(t)).count() as f64;
        let avgdl = match self.options.stats_scope {
            StatsScope::CandidateSet => cands.iter().map(|c| c.len).sum::<f64>() / n_cand,
            StatsScope::Mixed | StatsScope::FullIndex => {
                self.index.avg_doc_len() + cands.iter().map(|c| c.extra).sum::<f64>() / n_cand
            }
        };
        let full_n = self.index.n_docs() as f64;
        let weights: Vec<(&str, f64)> = original
            .iter()
            .map(|t| (t, false))
            .chain(intent_tokens.iter().map(|t| (t, true)))
            .map(|(t, is_intent)| {
                let w = match (self.options.stats_scope, is_intent) {
                    (StatsScope::CandidateSet, _) | (StatsScope::Mixed, true) => {
                        idf(n_cand, cand_df(t))
                    }
                    _ => idf(full_n, self.index.df(t) as f64),
                };
                (t.as_str(), w)
            })
            .collect();

        let scored = cands
            .iter()
            .map(|c| {
                let mut score = 0.0;
                for &(t, w) in &weights {
                    let tf = c.tf.get(t).copied().unwrap_or(0) as f64;
                    if tf > 0.0 {
                        score += w * tf_component(&self.params, tf, c.len, avgdl);
                    }
                }
                ScoredDoc {
                    doc_id: c.doc_id.clone(),
                    score,
                }
            })
            .collect();
        Ok(RerankOutcome {
            ranked: RankedList::from_scores(scored),
            unlabeled_with_urls,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PolicyAction {
    Filter,
    /// Multiply misaligned scores by `1 - penalty`.
    Demote(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    version: String,
    action: String,
    #[serde(default)]
    penalty: Option<f64>,
    acceptable: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    never_acceptable: Vec<String>,
    #[serde(default)]
    entertainment_topics: Vec<String>,
}

/// Which intent categories may answer each information need.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPolicy {
    pub version: String,
    pub acceptable: BTreeMap<InformationNeed, BTreeSet<CategoryId>>,
    pub never_acceptable: BTreeSet<CategoryId>,
    /// Canonical topic ids for which Entertain is also acceptable.
    pub entertainment_topics: BTreeSet<String>,
    pub action: PolicyAction,
}

impl AlignmentPolicy {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RerankError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RerankError::Policy(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RerankError> {
        let file: PolicyFile =
            toml::from_str(text).map_err(|e| RerankError::Policy(e.to_string()))?;
        let parse_cats = |names: &[String]| -> Result<BTreeSet<CategoryId>, RerankError> {
            names
                .iter()
                .map(|n| {
                    n.parse::<CategoryId>()
                        .map_err(|e| RerankError::Policy(e.to_string()))
                })
                .collect()
        };
        let mut acceptable = BTreeMap::new();
        for (need, cats) in &file.acceptable {
            let need = InformationNeed::ALL
                .into_iter()
                .find(|n| n.as_str() == need.to_ascii_lowercase())
                .ok_or_else(|| RerankError::Policy(format!("unknown need {need:?}")))?;
            acceptable.insert(need, parse_cats(cats)?);
        }
        let action = match (file.action.as_str(), file.penalty) {
            ("filter", _) => PolicyAction::Filter,
            ("demote", Some(p)) if (0.0..=1.0).contains(&p) => PolicyAction::Demote(p),
            ("demote", _) => {
                return Err(RerankError::Policy(
                    "demote needs a penalty in [0, 1]".into(),
                ))
            }
            (other, _) => return Err(RerankError::Policy(format!("unknown action {other:?}"))),
        };
        let policy = AlignmentPolicy {
            version: file.version,
            acceptable,
            never_acceptable: parse_cats(&file.never_acceptable)?,
            entertainment_topics: file
                .entertainment_topics
                .iter()
                .map(|t| crate::eval::canonical_topic_id(t))
                .collect(),
            action,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Every need has a row and every category is either acceptable
    /// somewhere or explicitly never acceptable.
    pub fn validate(&self) -> Result<(), RerankError> {
        for need in InformationNeed::ALL {
            if !self.acceptable.contains_key(&need) {
                return Err(RerankError::Policy(format!(
                    "no acceptable set for {}",
                    need.as_str()
                )));
            }
        }
        for c in CategoryId::ALL {
            let listed = self.acceptable.values().any(|s| s.contains(&c));
            let never = self.never_acceptable.contains(&c);
            if listed && never {
                return Err(RerankError::Policy(format!(
                    "{c} is both acceptable and never acceptable"
                )));
            }
            if !listed && !never {
                return Err(RerankError::Policy(format!("{c} is not covered")));
            }
        }
        Ok(())
    }

    pub fn is_aligned(&self, need: InformationNeed, topic_id: &str, category: CategoryId) -> bool {
        if category == CategoryId::Entertain
            && self
                .entertainment_topics
                .contains(&crate::eval::canonical_topic_id(topic_id))
        {
            return true;
        }
        self.acceptable
            .get(&need)
            .is_some_and(|s| s.contains(&category))
    }

    pub fn with_action(mut self, action: PolicyAction) -> Self {
        self.action = action;
        self
    }
}

/// Drops or demotes candidates whose intent category does not serve the
/// query's need. Unlabeled and uncertain candidates pass through, as does
/// everything when the query has no facet triple.
pub fn filter_misaligned(
    policy: &AlignmentPolicy,
    topic_id: &str,
    query_intent: Option<&QueryIntent>,
    ranked: &RankedList,
    store: &LabelStore,
) -> RankedList {
    let Some(q) = query_intent else {
        return ranked.clone();
    };
    let misaligned = |doc: &str| {
        store
            .tweet_label(doc)
            .and_then(IntentLabel::category)
            .is_some_and(|c| !policy.is_aligned(q.need, topic_id, c))
    };
    match policy.action {
        PolicyAction::Filter => RankedList {
            entries: ranked
                .entries
                .iter()
                .filter(|e| !misaligned(&e.doc_id))
                .cloned()
                .collect(),
        },
        PolicyAction::Demote(penalty) => RankedList::from_scores(
            ranked
                .entries
                .iter()
                .map(|e| ScoredDoc {
                    doc_id: e.doc_id.clone(),
                    score: if misaligned(&e.doc_id) {
                        e.score * (1.0 - penalty)
                    } else {
                        e.score
                    },
                })
                .collect(),
        ),
    }
}
