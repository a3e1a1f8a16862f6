//! TREC-style evaluation: qrels, run files, topics, nDCG@k and average
//! precision, and side-by-side run comparison.
//!
//! Topic ids are joined on a canonical form so that `MB001`, `MB1` and `1`
//! refer to the same topic. Topics judged in the qrels but missing from a
//! run score 0 and count toward the mean.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{RankedList, ScoredDoc};

pub const DEFAULT_CUTOFF: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn format_err(line: usize, message: impl Into<String>) -> EvalError {
    EvalError::Format {
        line,
        message: message.into(),
    }
}

/// Strips an alphabetic prefix and leading zeros from numeric topic ids.
/// Non-numeric ids are returned unchanged.
pub fn canonical_topic_id(id: &str) -> String {
    let id = id.trim();
    let digits = id.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return id.to_string();
    }
    let stripped = digits.trim_start_matches('0');
    if stripped.is_empty() {
        "0".to_string()
    } else {
        stripped.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// Gain equals the grade.
    #[default]
    Linear,
    /// Gain is `2^grade - 1`.
    Exponential,
}

impl Gain {
    pub fn value(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

impl FromStr for Gain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exponential" => Ok(Gain::Exponential),
            other => Err(format!(
                "unknown gain {other:?} (expected linear or exponential)"
            )),
        }
    }
}

/// Relevance judgments keyed by canonical topic id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    pub topics: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::parse(&read(path.as_ref())?)
    }

    /// Whitespace-separated `topic iteration doc grade` lines.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut topics: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [topic, _, doc, grade] = cols.as_slice() else {
                return Err(format_err(line_no, "expected `topic iteration doc grade`"));
            };
            let grade: i64 = grade
                .parse()
                .map_err(|_| format_err(line_no, format!("bad grade {grade:?}")))?;
            // trec_eval treats negative grades as non-relevant
            let grade = u32::try_from(grade.max(0))
                .map_err(|_| format_err(line_no, "grade out of range"))?;
            let judged = topics.entry(canonical_topic_id(topic)).or_default();
            if judged.insert(doc.to_string(), grade).is_some() {
                return Err(format_err(
                    line_no,
                    format!("duplicate judgment for topic {topic} doc {doc}"),
                ));
            }
        }
        Ok(Qrels { topics })
    }

    pub fn topic(&self, topic_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.topics.get(&canonical_topic_id(topic_id))
    }

    pub fn n_relevant(&self, topic_id: &str) -> usize {
        self.topic(topic_id)
            .map_or(0, |j| j.values().filter(|&&g| g > 0).count())
    }
}

/// Ranked results per topic, in file order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    pub topics: Vec<(String, RankedList)>,
}

impl RunFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::parse(&read(path.as_ref())?)
    }

    /// Whitespace-separated `topic Q0 doc rank score tag` lines. Rows are
    /// ordered by rank within each topic.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut order: Vec<String> = Vec::new();
        let mut rows: BTreeMap<String, Vec<(u64, ScoredDoc, usize)>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [topic, _, doc, rank, score, _tag] = cols.as_slice() else {
                return Err(format_err(
                    line_no,
                    "expected `topic Q0 doc rank score tag`",
                ));
            };
            let rank: u64 = rank
                .parse()
                .map_err(|_| format_err(line_no, format!("bad rank {rank:?}")))?;
            let score: f64 = score
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| format_err(line_no, format!("bad score {score:?}")))?;
            if !rows.contains_key(*topic) {
                order.push(topic.to_string());
            }
            rows.entry(topic.to_string()).or_default().push((
                rank,
                ScoredDoc {
                    doc_id: doc.to_string(),
                    score,
                },
                line_no,
            ));
        }
        let mut topics = Vec::with_capacity(order.len());
        let mut seen_canonical = BTreeSet::new();
        for topic in order {
            let mut entries = rows.remove(&topic).unwrap_or_default();
            let first_line = entries.first().map_or(0, |e| e.2);
            if !seen_canonical.insert(canonical_topic_id(&topic)) {
                return Err(format_err(
                    first_line,
                    format!("topic {topic} duplicates another topic id"),
                ));
            }
            entries.sort_by_key(|e| e.0);
            let mut docs = BTreeSet::new();
            for w in entries.windows(2) {
                if w[1].1.score > w[0].1.score {
                    return Err(format_err(
                        w[1].2,
                        format!("topic {topic}: score increases with rank"),
                    ));
                }
            }
            for e in &entries {
                if !docs.insert(e.1.doc_id.clone()) {
                    return Err(format_err(
                        e.2,
                        format!("topic {topic}: duplicate doc {}", e.1.doc_id),
                    ));
                }
            }
            topics.push((
                topic,
                RankedList {
                    entries: entries.into_iter().map(|e| e.1).collect(),
                },
            ));
        }
        Ok(RunFile { topics })
    }

    pub fn to_trec_string(&self, tag: &str) -> String {
        let mut out = String::new();
        for (topic, list) in &self.topics {
            for (i, e) in list.entries.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{topic} Q0 {} {} {:.6} {tag}",
                    e.doc_id,
                    i + 1,
                    e.score
                );
            }
        }
        out
    }

    pub fn topic(&self, topic_id: &str) -> Option<&RankedList> {
        let key = canonical_topic_id(topic_id);
        self.topics
            .iter()
            .find(|(t, _)| canonical_topic_id(t) == key)
            .map(|(_, l)| l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub id: String,
    pub title: String,
}

/// Reads TREC SGML topics (`<num> Number: MB001 </num>` with `<title>`) or,
/// when no `<top>` element is present, tab-separated `id title` lines.
pub fn parse_topics(text: &str) -> Result<Vec<Topic>, EvalError> {
    let mut topics = Vec::new();
    if text.contains("<top>") {
        let top = Regex::new(r"(?s)<top>(.*?)</top>").expect("valid regex");
        let num =
            Regex::new(r"(?s)<num>\s*(?:Number:)?\s*(\S+?)\s*(?:</num>|\n)").expect("valid regex");
        let title = Regex::new(r"(?s)<title>\s*(.*?)\s*(?:</title>|<)").expect("valid regex");
        for (i, block) in top.captures_iter(text).enumerate() {
            let body = &block[1];
            let line = text[..block.get(0).map_or(0, |m| m.start())]
                .lines()
                .count()
                + 1;
            let id = num
                .captures(body)
                .map(|c| c[1].to_string())
                .ok_or_else(|| format_err(line, format!("topic block {} has no <num>", i + 1)))?;
            let title = title
                .captures(body)
                .map(|c| c[1].split_whitespace().collect::<Vec<_>>().join(" "))
                .ok_or_else(|| format_err(line, format!("topic {id} has no <title>")))?;
            topics.push(Topic { id, title });
        }
    } else {
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, title) = line
                .split_once('\t')
                .ok_or_else(|| format_err(n + 1, "expected `id<TAB>title`"))?;
            topics.push(Topic {
                id: id.trim().to_string(),
                title: title.trim().to_string(),
            });
        }
    }
    let mut seen = BTreeSet::new();
    for t in &topics {
        if !seen.insert(canonical_topic_id(&t.id)) {
            return Err(format_err(0, format!("duplicate topic {}", t.id)));
        }
    }
    Ok(topics)
}

pub fn load_topics(path: impl AsRef<Path>) -> Result<Vec<Topic>, EvalError> {
    parse_topics(&read(path.as_ref())?)
}

/// DCG over the first `k` ranks with discount `1/log2(rank + 1)`, divided by
/// the DCG of the ideal ordering of all judged documents. Zero when nothing
/// is relevant.
pub fn ndcg_at_k<S: AsRef<str>>(
    ranking: &[S],
    judgments: &BTreeMap<String, u32>,
    k: usize,
    gain: Gain,
) -> f64 {
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| {
            let g = judgments.get(d.as_ref()).copied().unwrap_or(0);
            gain.value(g) / ((i + 2) as f64).log2()
        })
        .sum();
    let mut grades: Vec<u32> = judgments.values().copied().filter(|&g| g > 0).collect();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.value(g) / ((i + 2) as f64).log2())
        .sum();
    if idcg > 0.0 {
        dcg / idcg
    } else {
        0.0
    }
}

/// Mean of precision at each relevant hit, divided by the total number of
/// relevant documents (grade > 0).
pub fn average_precision<S: AsRef<str>>(ranking: &[S], judgments: &BTreeMap<String, u32>) -> f64 {
    let n_rel = judgments.values().filter(|&&g| g > 0).count();
    if n_rel == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.iter().enumerate() {
        if judgments.get(d.as_ref()).is_some_and(|&g| g > 0) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / n_rel as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub cutoff: usize,
    pub gain: Gain,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cutoff: DEFAULT_CUTOFF,
            gain: Gain::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicScore {
    pub topic: String,
    pub ndcg: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub ndcg: f64,
    pub map: f64,
    pub per_topic: Vec<TopicScore>,
    /// Run topics that have no judgments.
    pub extra_topics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub cutoff: usize,
    pub runs: Vec<RunSummary>,
    /// Judged topics with no relevant document; they score 0.
    pub zero_relevant_topics: Vec<String>,
}

/// Mean nDCG@cutoff and MAP per run over every topic in the qrels.
pub fn evaluate_runs(runs: &[(String, RunFile)], qrels: &Qrels, opts: EvalOptions) -> Comparison {
    let zero_relevant_topics = qrels
        .topics
        .iter()
        .filter(|(_, j)| j.values().all(|&g| g == 0))
        .map(|(t, _)| t.clone())
        .collect();
    let summaries = runs
        .iter()
        .map(|(name, run)| {
            let per_topic: Vec<TopicScore> = qrels
                .topics
                .iter()
                .map(|(topic, judged)| {
                    let docs = run
                        .topic(topic)
                        .map(RankedList::doc_ids)
                        .unwrap_or_default();
                    TopicScore {
                        topic: topic.clone(),
                        ndcg: ndcg_at_k(&docs, judged, opts.cutoff, opts.gain),
                        ap: average_precision(&docs, judged),
                    }
                })
                .collect();
            let n = per_topic.len().max(1) as f64;
            RunSummary {
                name: name.clone(),
                ndcg: per_topic.iter().map(|t| t.ndcg).sum::<f64>() / n,
                map: per_topic.iter().map(|t| t.ap).sum::<f64>() / n,
                per_topic,
                extra_topics: run
                    .topics
                    .iter()
                    .filter(|(t, _)| qrels.topic(t).is_none())
                    .map(|(t, _)| t.clone())
                    .collect(),
            }
        })
        .collect();
    Comparison {
        cutoff: opts.cutoff,
        runs: summaries,
        zero_relevant_topics,
    }
}

impl Comparison {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("run\tndcg@{}\tmap\n", self.cutoff);
        for r in &self.runs {
            let _ = writeln!(out, "{}\t{:.4}\t{:.4}", r.name, r.ndcg, r.map);
        }
        out
    }

    pub fn per_topic_tsv(&self) -> String {
        let mut out = format!("run\ttopic\tndcg@{}\tap\n", self.cutoff);
        for r in &self.runs {
            for t in &r.per_topic {
                let _ = writeln!(out, "{}\t{}\t{:.4}\t{:.4}", r.name, t.topic, t.ndcg, t.ap);
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let ndcg_head = format!("nDCG@{}", self.cutoff);
        let width = self
            .runs
            .iter()
            .map(|r| r.name.chars().count())
            .chain(["Method".len()])
            .max()
            .unwrap_or(6);
        let mut out = format!("{:<width$}  {:>8}  {:>8}\n", "Method", ndcg_head, "MAP");
        for r in &self.runs {
            let _ = writeln!(out, "{:<width$}  {:>8.4}  {:>8.4}", r.name, r.ndcg, r.map);
        }
        if !self.zero_relevant_topics.is_empty() {
            let _ = writeln!(
                out,
                "warning: topics without relevant documents (scored 0): {}",
                self.zero_relevant_topics.join(", ")
            );
        }
        for r in &self.runs {
            if !r.extra_topics.is_empty() {
                let _ = writeln!(
                    out,
                    "warning: {} has unjudged topics (ignored): {}",
                    r.name,
                    r.extra_topics.join(", ")
                );
            }
        }
        out
    }
}
