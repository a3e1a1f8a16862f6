//! Tweet tokenization, inverted index construction, and BM25 top-k search.
//!
//! Scoring uses Okapi BM25 with the non-negative idf variant
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(q, d) = sum over query tokens t of
//!               idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
//! ```
//!
//! Repeated query tokens contribute once per occurrence. Results are ordered
//! by descending score, then ascending doc id; zero-score documents are never
//! returned.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, TweetRecord};

pub const DEFAULT_TOP_K: usize = 50;
pub const SNAPSHOT_FORMAT: &str = "linkintent-index/1";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("unknown document {0:?}")]
    UnknownDoc(String),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub strip_urls: bool,
    /// Keep `#tag` / `@user` bodies (sigil dropped); when false the whole
    /// hashtag or mention is removed.
    pub keep_hashtag_body: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            strip_urls: true,
            keep_hashtag_body: true,
        }
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap())
}

fn sigil_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[#@][\p{Alphabetic}\p{Nd}_]+").unwrap())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub config: TokenizerConfig,
}

impl Tokenizer {
    pub fn new(config: TokenizerConfig) -> Self {
        Tokenizer { config }
    }

    /// Alphanumeric runs after optional URL and hashtag/mention removal.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut text = std::borrow::Cow::Borrowed(text);
        if self.config.strip_urls {
            text = url_pattern().replace_all(&text, " ").into_owned().into();
        }
        if !self.config.keep_hashtag_body {
            text = sigil_pattern().replace_all(&text, " ").into_owned().into();
        }
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.config.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, IndexError> {
        let p = Bm25Params { k1, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(IndexError::InvalidParams(format!(
                "k1 must be > 0, got {}",
                self.k1
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::InvalidParams(format!(
                "b must be in [0,1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Non-negative BM25 idf.
pub fn idf(n_docs: f64, df: f64) -> f64 {
    (1.0 + (n_docs - df + 0.5) / (df + 0.5)).ln()
}

/// Saturated, length-normalized term frequency component.
pub fn tf_component(params: &Bm25Params, tf: f64, doc_len: f64, avg_doc_len: f64) -> f64 {
    if tf == 0.0 {
        return 0.0;
    }
    let norm = if avg_doc_len > 0.0 {
        1.0 - params.b + params.b * doc_len / avg_doc_len
    } else {
        1.0
    };
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// Which record fields are indexed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexFields {
    /// Append fetched linked-document titles and bodies to the tweet text.
    pub include_linked_docs: bool,
}

/// Text of a record as seen by the index.
pub fn document_text(record: &TweetRecord, fields: IndexFields) -> String {
    let mut text = record.text.clone();
    if fields.include_linked_docs {
        for d in record.linked_docs.iter().filter(|d| d.fetch_ok) {
            text.push(' ');
            text.push_str(&d.title);
            text.push(' ');
            text.push_str(&d.body_text);
        }
    }
    text
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Ordinal into the index's doc-id table; ordinals follow doc-id order.
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    format: String,
    tokenizer: Tokenizer,
    fields: IndexFields,
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    avg_doc_len: f64,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, tokenizer: Tokenizer, fields: IndexFields) -> Self {
        Self::from_documents(
            corpus
                .records()
                .iter()
                .map(|r| (r.id.clone(), document_text(r, fields))),
            tokenizer,
            fields,
        )
    }

    /// Indexes `(doc_id, text)` pairs. Doc ids are assumed unique; a repeated
    /// id keeps its first text.
    pub fn from_documents(
        docs: impl IntoIterator<Item = (String, String)>,
        tokenizer: Tokenizer,
        fields: IndexFields,
    ) -> Self {
        let mut docs: Vec<(String, String)> = docs.into_iter().collect();
        docs.sort_by(|a, b| a.0.cmp(&b.0));
        docs.dedup_by(|later, first| later.0 == first.0);

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut doc_lens = Vec::with_capacity(docs.len());
        for (ord, (id, text)) in docs.into_iter().enumerate() {
            let tokens = tokenizer.tokenize(&text);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: ord as u32,
                    tf: count,
                });
            }
            doc_ids.push(id);
            doc_lens.push(tokens.len() as u32);
        }
        let avg_doc_len = if doc_lens.is_empty() {
            0.0
        } else {
            doc_lens.iter().map(|&l| l as f64).sum::<f64>() / doc_lens.len() as f64
        };
        InvertedIndex {
            format: SNAPSHOT_FORMAT.to_string(),
            tokenizer,
            fields,
            doc_ids,
            doc_lens,
            postings,
            avg_doc_len,
        }
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn fields(&self) -> IndexFields {
        self.fields
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    fn ordinal(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids
            .binary_search_by(|d| d.as_str().cmp(doc_id))
            .ok()
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.ordinal(doc_id).is_some()
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.ordinal(doc_id).map(|i| self.doc_lens[i])
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings
            .iter()
            .map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn tf(&self, term: &str, doc_id: &str) -> u32 {
        let Some(ord) = self.ordinal(doc_id) else {
            return 0;
        };
        let p = self.postings(term);
        p.binary_search_by_key(&(ord as u32), |p| p.doc)
            .map(|i| p[i].tf)
            .unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.n_docs() as f64, self.df(term) as f64)
    }

    pub fn tokenize_query(&self, query: &str) -> Vec<String> {
        self.tokenizer.tokenize(query)
    }

    pub fn bm25_score(
        &self,
        params: &Bm25Params,
        query_tokens: &[String],
        doc_id: &str,
    ) -> Result<f64, IndexError> {
        let ord = self
            .ordinal(doc_id)
            .ok_or_else(|| IndexError::UnknownDoc(doc_id.to_string()))?;
        let len = self.doc_lens[ord] as f64;
        let mut score = 0.0;
        for t in query_tokens {
            let tf = self.tf(t, doc_id) as f64;
            if tf > 0.0 {
                score += self.idf(t) * tf_component(params, tf, len, self.avg_doc_len);
            }
        }
        Ok(score)
    }

    /// Term-at-a-time top-k retrieval.
    pub fn search(&self, params: &Bm25Params, query_tokens: &[String], k: usize) -> RankedList {
        if k == 0 || self.n_docs() == 0 {
            return RankedList::default();
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for t in query_tokens {
            let postings = self.postings(t);
            if postings.is_empty() {
                continue;
            }
            let w = self.idf(t);
            for p in postings {
                let len = self.doc_lens[p.doc as usize] as f64;
                *acc.entry(p.doc).or_insert(0.0) +=
                    w * tf_component(params, p.tf as f64, len, self.avg_doc_len);
            }
        }
        let mut hits: Vec<ScoredDoc> = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(d, s)| ScoredDoc {
                doc_id: self.doc_ids[d as usize].clone(),
                score: s,
            })
            .collect();
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, ScoredDoc::rank_order);
            hits.truncate(k);
        }
        hits.sort_by(ScoredDoc::rank_order);
        RankedList { entries: hits }
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let json = serde_json::to_string(self).map_err(|e| IndexError::Snapshot(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| IndexError::Snapshot(e.to_string()))
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| IndexError::Snapshot(e.to_string()))?;
        Self::from_snapshot_str(&text)
    }

    pub fn to_snapshot_string(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_snapshot_str(text: &str) -> Result<Self, IndexError> {
        let idx: InvertedIndex =
            serde_json::from_str(text).map_err(|e| IndexError::Snapshot(e.to_string()))?;
        if idx.format != SNAPSHOT_FORMAT {
            return Err(IndexError::Snapshot(format!(
                "unsupported snapshot format {:?}",
                idx.format
            )));
        }
        if idx.doc_ids.len() != idx.doc_lens.len()
            || idx.doc_ids.windows(2).any(|w| w[0] >= w[1])
            || idx
                .postings
                .values()
                .flatten()
                .any(|p| p.doc as usize >= idx.doc_ids.len())
        {
            return Err(IndexError::Snapshot("inconsistent snapshot".into()));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    /// Descending score, then ascending doc id.
    pub fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<ScoredDoc>,
}

impl RankedList {
    pub fn from_scores(mut entries: Vec<ScoredDoc>) -> Self {
        entries.sort_by(ScoredDoc::rank_order);
        RankedList { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.doc_id.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    fn index(docs: &[(&str, &str)]) -> InvertedIndex {
        InvertedIndex::from_documents(
            docs.iter().map(|(i, t)| (i.to_string(), t.to_string())),
            Tokenizer::default(),
            IndexFields::default(),
        )
    }

    #[test]
    fn tokenizer_examples() {
        let t = Tokenizer::default();
        assert_eq!(
            t.tokenize("Check this OUT! [https://x.co/ab]"),
            toks(&["check", "this", "out"])
        );
        assert_eq!(t.tokenize("#WorldCup2022"), toks(&["worldcup2022"]));
        assert!(t.tokenize("").is_empty());
        assert_eq!(
            t.tokenize("@bbc staff cuts www.bbc.co.uk/news"),
            toks(&["bbc", "staff", "cuts"])
        );
    }

    #[test]
    fn tokenizer_config_switches() {
        let raw = Tokenizer::new(TokenizerConfig {
            lowercase: false,
            strip_urls: false,
            keep_hashtag_body: false,
        });
        assert_eq!(
            raw.tokenize("Go #Team @you http://a.b/c"),
            toks(&["Go", "http", "a", "b", "c"])
        );
    }

    #[test]
    fn single_doc_index() {
        let idx = index(&[("d", "a b a")]);
        assert_eq!(idx.postings("a"), &[Posting { doc: 0, tf: 2 }]);
        assert_eq!(idx.postings("b"), &[Posting { doc: 0, tf: 1 }]);
        assert_eq!(idx.doc_len("d"), Some(3));
        assert_eq!(idx.avg_doc_len(), 3.0);
    }

    #[test]
    fn avgdl_over_docs() {
        let idx = index(&[("x", "a b"), ("y", "a b c d")]);
        assert_eq!(idx.avg_doc_len(), 3.0);
    }

    #[test]
    fn empty_index_searches_empty() {
        let idx = index(&[]);
        assert_eq!(idx.n_docs(), 0);
        assert!(idx
            .search(&Bm25Params::default(), &toks(&["a"]), 10)
            .is_empty());
    }

    #[test]
    fn idf_single_doc() {
        assert!((idf(1.0, 1.0) - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((idf(1.0, 1.0) - 0.28768207245178).abs() < 1e-9);
    }

    #[test]
    fn single_doc_score() {
        let idx = index(&[("d", "a a a")]);
        let s = idx
            .bm25_score(&Bm25Params::default(), &toks(&["a"]), "d")
            .unwrap();
        let oracle = (4.0f64 / 3.0).ln() * 3.0 * 2.2 / (3.0 + 1.2);
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 0.45207).abs() < 1e-5);
    }

    #[test]
    fn absent_terms_contribute_nothing() {
        let idx = index(&[("d", "a b")]);
        let p = Bm25Params::default();
        let a = idx.bm25_score(&p, &toks(&["a"]), "d").unwrap();
        let az = idx.bm25_score(&p, &toks(&["a", "zzz"]), "d").unwrap();
        assert_eq!(a, az);
        assert!(matches!(
            idx.bm25_score(&p, &toks(&["a"]), "nope"),
            Err(IndexError::UnknownDoc(_))
        ));
    }

    #[test]
    fn search_limits_and_ties() {
        let docs: Vec<(String, String)> = (0..10)
            .map(|i| (format!("d{i}"), "same text here".to_string()))
            .collect();
        let idx = InvertedIndex::from_documents(docs, Tokenizer::default(), IndexFields::default());
        let r = idx.search(&Bm25Params::default(), &toks(&["same"]), 50);
        assert_eq!(r.len(), 10);
        let ids = r.doc_ids();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        let r3 = idx.search(&Bm25Params::default(), &toks(&["same"]), 3);
        assert_eq!(r3.doc_ids(), vec!["d0", "d1", "d2"]);
    }

    #[test]
    fn zero_score_docs_excluded() {
        let idx = index(&[("a", "alpha"), ("b", "beta")]);
        let r = idx.search(&Bm25Params::default(), &toks(&["alpha"]), 10);
        assert_eq!(r.doc_ids(), vec!["a"]);
    }

    #[test]
    fn params_validation() {
        assert!(Bm25Params::new(0.0, 0.5).is_err());
        assert!(Bm25Params::new(1.2, 1.5).is_err());
        assert!(Bm25Params::new(1.2, 0.0).is_ok());
    }

    #[test]
    fn snapshot_round_trip() {
        let idx = index(&[("x", "a b"), ("y", "a b c d")]);
        let back = InvertedIndex::from_snapshot_str(&idx.to_snapshot_string()).unwrap();
        assert_eq!(idx, back);
        let broken = idx.to_snapshot_string().replace(SNAPSHOT_FORMAT, "other/9");
        assert!(InvertedIndex::from_snapshot_str(&broken).is_err());
    }

    #[test]
    fn linked_docs_optional_field() {
        use crate::corpus::{LinkedDoc, TweetType};
        let rec = TweetRecord {
            id: "1".into(),
            text: "look".into(),
            tweet_type: TweetType::Regular,
            urls: vec!["u".into()],
            linked_docs: vec![LinkedDoc {
                url: "u".into(),
                title: "Title".into(),
                body_text: "Body".into(),
                fetch_ok: true,
            }],
            likes: 0,
            replies: 0,
            retweets: 0,
            parent_context: None,
            hashtags: vec![],
            mentions: vec![],
        };
        assert_eq!(document_text(&rec, IndexFields::default()), "look");
        assert_eq!(
            document_text(
                &rec,
                IndexFields {
                    include_linked_docs: true
                }
            ),
            "look Title Body"
        );
    }
}
