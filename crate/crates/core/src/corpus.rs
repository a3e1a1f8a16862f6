//! Tweet records with their pre-fetched linked documents, line-delimited JSON
//! ingestion, and the type/length/reaction distribution tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotations::ConsensusOutcome;
use crate::taxonomy::{CategoryId, IntentLabel};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("labeled id {0:?} is not in the corpus")]
    UnknownId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TweetType {
    Regular,
    Reply,
    Quoted,
}

impl TweetType {
    pub const ALL: [TweetType; 3] = [TweetType::Regular, TweetType::Reply, TweetType::Quoted];

    pub fn column_name(self) -> &'static str {
        match self {
            TweetType::Regular => "Regular",
            TweetType::Reply => "Replies",
            TweetType::Quoted => "Quoted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkedDoc {
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body_text: String,
    pub fetch_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub tweet_type: TweetType,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default)]
    pub linked_docs: Vec<LinkedDoc>,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub replies: u64,
    #[serde(default)]
    pub retweets: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_context: Option<Vec<TweetRecord>>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
}

impl TweetRecord {
    pub fn reactions(&self) -> u64 {
        self.likes + self.replies + self.retweets
    }

    pub fn has_urls(&self) -> bool {
        !self.urls.is_empty()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if !self.linked_docs.is_empty() && self.linked_docs.len() != self.urls.len() {
            return Err(format!(
                "linked_docs has {} entries but urls has {}",
                self.linked_docs.len(),
                self.urls.len()
            ));
        }
        for doc in &self.linked_docs {
            if !doc.fetch_ok && (!doc.title.is_empty() || !doc.body_text.is_empty()) {
                return Err(format!("unfetched linked doc {} carries text", doc.url));
            }
        }
        if let Some(ctx) = &self.parent_context {
            if self.tweet_type == TweetType::Regular {
                return Err("parent_context on a regular tweet".into());
            }
            for parent in ctx {
                parent
                    .validate()
                    .map_err(|e| format!("parent_context {}: {e}", parent.id))?;
            }
        }
        Ok(())
    }

    /// Additional constraint for records that enter intent annotation.
    pub fn validate_for_annotation(&self) -> Result<(), String> {
        self.validate()?;
        if self.urls.is_empty() {
            return Err(format!("record {} has no url", self.id));
        }
        Ok(())
    }
}

// Counts arrive as signed integers so that negatives are reported as a
// validation failure rather than a generic type error.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    text: String,
    tweet_type: TweetType,
    #[serde(default)]
    urls: Vec<String>,
    #[serde(default)]
    linked_docs: Vec<LinkedDoc>,
    #[serde(default)]
    likes: i64,
    #[serde(default)]
    replies: i64,
    #[serde(default)]
    retweets: i64,
    #[serde(default)]
    parent_context: Option<Vec<RawRecord>>,
    #[serde(default)]
    hashtags: Vec<String>,
    #[serde(default)]
    mentions: Vec<String>,
}

impl RawRecord {
    fn into_record(self) -> Result<TweetRecord, String> {
        let count = |name: &str, v: i64| {
            u64::try_from(v).map_err(|_| format!("{name} must be non-negative, got {v}"))
        };
        let parent_context = match self.parent_context {
            Some(ctx) => Some(
                ctx.into_iter()
                    .map(RawRecord::into_record)
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        let rec = TweetRecord {
            likes: count("likes", self.likes)?,
            replies: count("replies", self.replies)?,
            retweets: count("retweets", self.retweets)?,
            id: self.id,
            text: self.text,
            tweet_type: self.tweet_type,
            urls: self.urls,
            linked_docs: self.linked_docs,
            parent_context,
            hashtags: self.hashtags,
            mentions: self.mentions,
        };
        rec.validate()?;
        Ok(rec)
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Validated records in file order, indexed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<TweetRecord>,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub corpus: Corpus,
    pub rejected: Vec<LineError>,
}

impl Corpus {
    /// Builds a corpus from already-validated records. Later duplicates of an
    /// id are returned as errors.
    pub fn from_records(records: impl IntoIterator<Item = TweetRecord>) -> (Self, Vec<String>) {
        let mut corpus = Corpus::default();
        let mut dupes = Vec::new();
        for r in records {
            if corpus.by_id.contains_key(&r.id) {
                dupes.push(r.id);
                continue;
            }
            corpus.by_id.insert(r.id.clone(), corpus.records.len());
            corpus.records.push(r);
        }
        (corpus, dupes)
    }

    pub fn ingest(path: impl AsRef<Path>) -> Result<IngestReport, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::ingest_str(&text))
    }

    pub fn ingest_str(text: &str) -> IngestReport {
        let mut report = IngestReport::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = n + 1;
            let parsed = serde_json::from_str::<RawRecord>(line)
                .map_err(|e| e.to_string())
                .and_then(RawRecord::into_record);
            match parsed {
                Ok(rec) if report.corpus.by_id.contains_key(&rec.id) => {
                    report.rejected.push(LineError {
                        line: line_no,
                        message: format!("duplicate id {:?}", rec.id),
                    })
                }
                Ok(rec) => {
                    report
                        .corpus
                        .by_id
                        .insert(rec.id.clone(), report.corpus.records.len());
                    report.corpus.records.push(rec);
                }
                Err(message) => report.rejected.push(LineError {
                    line: line_no,
                    message,
                }),
            }
        }
        report
    }

    /// One JSON object per line, in corpus order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&TweetRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LengthBucket {
    Under35,
    UpTo70,
    UpTo105,
    UpTo175,
    Over175,
}

impl LengthBucket {
    pub const ALL: [LengthBucket; 5] = [
        LengthBucket::Under35,
        LengthBucket::UpTo70,
        LengthBucket::UpTo105,
        LengthBucket::UpTo175,
        LengthBucket::Over175,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LengthBucket::Under35 => "<35",
            LengthBucket::UpTo70 => "35-70",
            LengthBucket::UpTo105 => "71-105",
            LengthBucket::UpTo175 => "106-175",
            LengthBucket::Over175 => ">175",
        }
    }

    /// [0,35), [35,70], (70,105], (105,175], (175,inf)
    pub fn for_chars(n: usize) -> Self {
        match n {
            0..=34 => LengthBucket::Under35,
            35..=70 => LengthBucket::UpTo70,
            71..=105 => LengthBucket::UpTo105,
            106..=175 => LengthBucket::UpTo175,
            _ => LengthBucket::Over175,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReactionBucket {
    Zero,
    OneToFive,
    SixToTen,
    OverTen,
}

impl ReactionBucket {
    pub const ALL: [ReactionBucket; 4] = [
        ReactionBucket::Zero,
        ReactionBucket::OneToFive,
        ReactionBucket::SixToTen,
        ReactionBucket::OverTen,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReactionBucket::Zero => "0",
            ReactionBucket::OneToFive => "1-5",
            ReactionBucket::SixToTen => "6-10",
            ReactionBucket::OverTen => ">10",
        }
    }

    pub fn for_total(n: u64) -> Self {
        match n {
            0 => ReactionBucket::Zero,
            1..=5 => ReactionBucket::OneToFive,
            6..=10 => ReactionBucket::SixToTen,
            _ => ReactionBucket::OverTen,
        }
    }
}

/// Length counts Unicode scalar values of the raw text, URLs included.
pub fn bucket_length(text: &str) -> LengthBucket {
    LengthBucket::for_chars(text.chars().count())
}

pub fn bucket_reactions(record: &TweetRecord) -> ReactionBucket {
    ReactionBucket::for_total(record.reactions())
}

/// Which intent row of a distribution table an item contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntentGroup {
    Category(CategoryId),
    NcUn,
}

impl IntentGroup {
    pub fn from_label(label: &IntentLabel) -> Self {
        match label.category() {
            Some(c) => IntentGroup::Category(c),
            None => IntentGroup::NcUn,
        }
    }

    /// Items without a consensus label, or whose consensus is `Uncertain`,
    /// fall in the NC-UN group.
    pub fn from_outcome(outcome: &ConsensusOutcome) -> Self {
        match outcome.label() {
            Some(label) if !outcome.is_nc_un => Self::from_label(label),
            _ => IntentGroup::NcUn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKey {
    All,
    Group(IntentGroup),
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKey::All => f.write_str("All"),
            RowKey::Group(IntentGroup::Category(c)) => write!(f, "{c}"),
            RowKey::Group(IntentGroup::NcUn) => f.write_str("NC-UN"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub key: RowKey,
    pub n: usize,
    /// Regular, Replies, Quoted.
    pub tweet_type: [f64; 3],
    pub length: [f64; 5],
    pub reactions: [f64; 4],
}

/// Percentage breakdown over tweet properties, one row per intent group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistributionTable {
    pub rows: Vec<DistributionRow>,
}

#[derive(Default)]
struct Counts {
    n: usize,
    tweet_type: [usize; 3],
    length: [usize; 5],
    reactions: [usize; 4],
}

impl Counts {
    fn add(&mut self, r: &TweetRecord) {
        self.n += 1;
        let t = TweetType::ALL
            .iter()
            .position(|&t| t == r.tweet_type)
            .unwrap();
        self.tweet_type[t] += 1;
        let l = LengthBucket::ALL
            .iter()
            .position(|&b| b == bucket_length(&r.text))
            .unwrap();
        self.length[l] += 1;
        let x = ReactionBucket::ALL
            .iter()
            .position(|&b| b == bucket_reactions(r))
            .unwrap();
        self.reactions[x] += 1;
    }

    fn into_row(self, key: RowKey) -> DistributionRow {
        let n = self.n as f64;
        let pct = |c: usize| 100.0 * c as f64 / n;
        DistributionRow {
            key,
            n: self.n,
            tweet_type: self.tweet_type.map(pct),
            length: self.length.map(pct),
            reactions: self.reactions.map(pct),
        }
    }
}

/// Builds the distribution table. With labels, rows follow the `All` row in
/// category order, then NC-UN; groups with no items are omitted. An empty
/// corpus yields an empty table.
pub fn corpus_stats(
    corpus: &Corpus,
    labels: Option<&BTreeMap<String, IntentGroup>>,
) -> Result<DistributionTable, CorpusError> {
    if let Some(labels) = labels {
        if let Some(missing) = labels.keys().find(|id| corpus.get(id).is_none()) {
            return Err(CorpusError::UnknownId(missing.clone()));
        }
    }
    if corpus.is_empty() {
        return Ok(DistributionTable::default());
    }

    let mut all = Counts::default();
    let mut groups: BTreeMap<IntentGroup, Counts> = BTreeMap::new();
    for r in corpus.records() {
        all.add(r);
        if let Some(g) = labels.and_then(|l| l.get(&r.id)) {
            groups.entry(*g).or_default().add(r);
        }
    }

    let mut rows = vec![all.into_row(RowKey::All)];
    // IntentGroup orders categories first (canonical order), NC-UN last.
    rows.extend(
        groups
            .into_iter()
            .map(|(g, c)| c.into_row(RowKey::Group(g))),
    );
    Ok(DistributionTable { rows })
}

type RowSlice = fn(&DistributionRow) -> &[f64];

impl DistributionTable {
    fn headers() -> Vec<&'static str> {
        let mut h = vec!["intention", "n"];
        h.extend(TweetType::ALL.iter().map(|t| t.column_name()));
        h.extend(LengthBucket::ALL.iter().map(|b| b.label()));
        h.extend(ReactionBucket::ALL.iter().map(|b| b.label()));
        h
    }

    fn cells(row: &DistributionRow) -> Vec<String> {
        let mut c = vec![row.key.to_string(), row.n.to_string()];
        c.extend(
            row.tweet_type
                .iter()
                .chain(&row.length)
                .chain(&row.reactions)
                .map(|p| format!("{p:.1}")),
        );
        c
    }

    /// Tab-separated form with a header row; percentages to one decimal.
    pub fn to_tsv(&self) -> String {
        let mut out = Self::headers().join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&Self::cells(row).join("\t"));
            out.push('\n');
        }
        out
    }

    /// Three console sub-tables: type, length, reactions.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.rows.is_empty() {
            out.push_str("(empty corpus)\n");
            return out;
        }
        let sections: [(&str, Vec<&str>, RowSlice); 3] = [
            (
                "intentions vs. tweet type",
                TweetType::ALL.iter().map(|t| t.column_name()).collect(),
                |r| &r.tweet_type,
            ),
            (
                "intentions vs. tweet length",
                LengthBucket::ALL.iter().map(|b| b.label()).collect(),
                |r| &r.length,
            ),
            (
                "intentions vs. reactions count",
                ReactionBucket::ALL.iter().map(|b| b.label()).collect(),
                |r| &r.reactions,
            ),
        ];
        for (title, cols, get) in sections {
            let _ = writeln!(out, "{title}");
            let _ = write!(out, "{:<12}{:>6}", "Intention", "n");
            for c in &cols {
                let _ = write!(out, "{c:>9}");
            }
            out.push('\n');
            for row in &self.rows {
                let _ = write!(out, "{:<12}{:>6}", row.key.to_string(), row.n);
                for p in get(row) {
                    let _ = write!(out, "{:>8.1}%", p);
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, text: &str, t: TweetType) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            text: text.into(),
            tweet_type: t,
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

    #[test]
    fn ingest_three_records() {
        let text = r#"{"id":"1","text":"a","tweet_type":"regular"}
{"id":"2","text":"b","tweet_type":"reply","likes":3}

{"id":"3","text":"c","tweet_type":"quoted","urls":["https://x.co/a"]}
"#;
        let rep = Corpus::ingest_str(text);
        assert!(rep.rejected.is_empty(), "{:?}", rep.rejected);
        assert_eq!(rep.corpus.len(), 3);
        assert_eq!(rep.corpus.get("2").unwrap().likes, 3);
    }

    #[test]
    fn negative_likes_rejected_others_kept() {
        let text = r#"{"id":"1","text":"a","tweet_type":"regular"}
{"id":"2","text":"b","tweet_type":"reply","likes":-1}
{"id":"3","text":"c","tweet_type":"regular"}"#;
        let rep = Corpus::ingest_str(text);
        assert_eq!(rep.corpus.len(), 2);
        assert_eq!(rep.rejected.len(), 1);
        assert_eq!(rep.rejected[0].line, 2);
        assert!(rep.rejected[0].message.contains("likes"));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let rep = Corpus::ingest_str("");
        assert!(rep.corpus.is_empty());
        assert!(rep.rejected.is_empty());
    }

    #[test]
    fn record_level_invariants() {
        let mut r = rec("1", "x", TweetType::Regular);
        r.parent_context = Some(vec![rec("0", "parent", TweetType::Regular)]);
        assert!(r.validate().is_err());
        r.tweet_type = TweetType::Reply;
        assert!(r.validate().is_ok());

        let mut r = rec("2", "x", TweetType::Regular);
        r.urls = vec!["u".into()];
        r.linked_docs = vec![LinkedDoc {
            url: "u".into(),
            title: "t".into(),
            body_text: String::new(),
            fetch_ok: false,
        }];
        assert!(r.validate().is_err());
        r.linked_docs[0].fetch_ok = true;
        assert!(r.validate().is_ok());
        assert!(rec("3", "x", TweetType::Regular)
            .validate_for_annotation()
            .is_err());
    }

    #[test]
    fn duplicate_ids_rejected_on_ingest() {
        let text = r#"{"id":"1","text":"a","tweet_type":"regular"}
{"id":"1","text":"b","tweet_type":"regular"}"#;
        let rep = Corpus::ingest_str(text);
        assert_eq!(rep.corpus.len(), 1);
        assert_eq!(rep.rejected[0].line, 2);
    }

    #[test]
    fn length_bucket_boundaries() {
        let s = |n: usize| "x".repeat(n);
        assert_eq!(bucket_length(&s(34)), LengthBucket::Under35);
        assert_eq!(bucket_length(&s(35)), LengthBucket::UpTo70);
        assert_eq!(bucket_length(&s(70)), LengthBucket::UpTo70);
        assert_eq!(bucket_length(&s(71)), LengthBucket::UpTo105);
        assert_eq!(bucket_length(&s(105)), LengthBucket::UpTo105);
        assert_eq!(bucket_length(&s(106)), LengthBucket::UpTo175);
        assert_eq!(bucket_length(&s(175)), LengthBucket::UpTo175);
        assert_eq!(bucket_length(&s(176)), LengthBucket::Over175);
        // scalar values, not bytes
        assert_eq!(bucket_length(&"é".repeat(34)), LengthBucket::Under35);
    }

    #[test]
    fn reaction_bucket_examples() {
        let mut r = rec("1", "", TweetType::Regular);
        assert_eq!(bucket_reactions(&r), ReactionBucket::Zero);
        (r.likes, r.replies, r.retweets) = (2, 2, 2);
        assert_eq!(bucket_reactions(&r), ReactionBucket::SixToTen);
        (r.likes, r.replies, r.retweets) = (10, 1, 0);
        assert_eq!(bucket_reactions(&r), ReactionBucket::OverTen);
    }

    #[test]
    fn stats_type_breakdown_without_labels() {
        let (c, _) = Corpus::from_records([
            rec("1", "a", TweetType::Regular),
            rec("2", "b", TweetType::Reply),
            rec("3", "c", TweetType::Reply),
        ]);
        let t = corpus_stats(&c, None).unwrap();
        assert_eq!(t.rows.len(), 1);
        let row = &t.rows[0];
        assert_eq!(row.key, RowKey::All);
        assert_eq!(format!("{:.1}", row.tweet_type[0]), "33.3");
        assert_eq!(format!("{:.1}", row.tweet_type[1]), "66.7");
        assert_eq!(format!("{:.1}", row.tweet_type[2]), "0.0");
    }

    #[test]
    fn stats_on_empty_corpus() {
        let t = corpus_stats(&Corpus::default(), None).unwrap();
        assert!(t.rows.is_empty());
        assert!(t.render().contains("empty"));
    }

    #[test]
    fn stats_reject_unknown_ids() {
        let (c, _) = Corpus::from_records([rec("1", "a", TweetType::Regular)]);
        let labels = BTreeMap::from([("9".to_string(), IntentGroup::NcUn)]);
        assert!(matches!(
            corpus_stats(&c, Some(&labels)),
            Err(CorpusError::UnknownId(id)) if id == "9"
        ));
    }
}
