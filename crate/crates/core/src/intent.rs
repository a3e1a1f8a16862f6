//! Intent labels for tweets and queries.
//!
//! Gold label files are the primary source. [`HeuristicClassifier`] is an
//! experimental rule-based fallback for unlabeled tweets; it is never used
//! to produce evaluation numbers unless explicitly requested.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use regex::{Regex, RegexBuilder};
use serde::Deserialize;
use thiserror::Error;

use crate::corpus::{TweetRecord, TweetType};
use crate::eval::canonical_topic_id;
use crate::taxonomy::{IntentLabel, Taxonomy, TaxonomyError};

#[derive(Debug, Error)]
pub enum IntentError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    UnknownLabel {
        line: usize,
        #[source]
        source: TaxonomyError,
    },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("rule file: {0}")]
    Rules(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InformationNeed {
    Informational,
    Navigational,
    Transactional,
}

impl InformationNeed {
    pub const ALL: [InformationNeed; 3] = [
        InformationNeed::Informational,
        InformationNeed::Navigational,
        InformationNeed::Transactional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InformationNeed::Informational => "informational",
            InformationNeed::Navigational => "navigational",
            InformationNeed::Transactional => "transactional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    Directed,
    Undirected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Openness {
    Open,
    Closed,
}

/// Facet triple such as Informational/Undirected/Closed, written `I/U/C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QueryIntent {
    pub need: InformationNeed,
    pub scope: Scope,
    pub openness: Openness,
}

impl QueryIntent {
    pub fn display(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for QueryIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let need = match self.need {
            InformationNeed::Informational => 'I',
            InformationNeed::Navigational => 'N',
            InformationNeed::Transactional => 'T',
        };
        let scope = match self.scope {
            Scope::Directed => 'D',
            Scope::Undirected => 'U',
        };
        let open = match self.openness {
            Openness::Open => 'O',
            Openness::Closed => 'C',
        };
        write!(f, "{need}/{scope}/{open}")
    }
}

impl FromStr for QueryIntent {
    type Err = String;

    /// Accepts initials (`I/U/C`) or full facet names
    /// (`Informational/Undirected/Closed`), case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<String> = s
            .split('/')
            .map(|p| p.trim().to_ascii_lowercase())
            .collect();
        let [need, scope, open] = parts.as_slice() else {
            return Err(format!("query intent {s:?} must have three facets"));
        };
        let matches = |given: &str, full: &str| given == full || given == &full[..1];
        let need = if matches(need, "informational") {
            InformationNeed::Informational
        } else if matches(need, "navigational") {
            InformationNeed::Navigational
        } else if matches(need, "transactional") {
            InformationNeed::Transactional
        } else {
            return Err(format!("unknown need facet {need:?}"));
        };
        let scope = if matches(scope, "directed") {
            Scope::Directed
        } else if matches(scope, "undirected") {
            Scope::Undirected
        } else {
            return Err(format!("unknown scope facet {scope:?}"));
        };
        let openness = if matches(open, "open") {
            Openness::Open
        } else if matches(open, "closed") {
            Openness::Closed
        } else {
            return Err(format!("unknown openness facet {open:?}"));
        };
        Ok(QueryIntent {
            need,
            scope,
            openness,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryLabel {
    pub intent: QueryIntent,
    pub target: IntentLabel,
}

/// Gold labels. Query keys are canonical topic ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelStore {
    pub tweet_labels: BTreeMap<String, IntentLabel>,
    pub query_labels: BTreeMap<String, QueryLabel>,
}

impl LabelStore {
    pub fn load(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Self, IntentError> {
        let mut store = LabelStore::default();
        store.merge_file(path, taxonomy)?;
        Ok(store)
    }

    /// Adds the rows of another label file. Ids already present are
    /// rejected as duplicates.
    pub fn merge_file(
        &mut self,
        path: impl AsRef<Path>,
        taxonomy: &Taxonomy,
    ) -> Result<(), IntentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IntentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.merge_str(&text, taxonomy)
    }

    /// Tab-separated rows: two columns `tweet_id, label` or three columns
    /// `query_id, facets, label`. Blank lines and `#` comments are skipped.
    pub fn merge_str(&mut self, text: &str, taxonomy: &Taxonomy) -> Result<(), IntentError> {
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let resolve = |s: &str| {
                taxonomy
                    .resolve_label(s)
                    .map_err(|source| IntentError::UnknownLabel {
                        line: line_no,
                        source,
                    })
            };
            match cols.as_slice() {
                [id, label] => {
                    let label = resolve(label)?;
                    if self.tweet_labels.contains_key(*id) {
                        return Err(IntentError::DuplicateId {
                            line: line_no,
                            id: id.to_string(),
                        });
                    }
                    self.tweet_labels.insert(id.to_string(), label);
                }
                [id, facets, label] => {
                    let intent: QueryIntent =
                        facets.parse().map_err(|message| IntentError::Parse {
                            line: line_no,
                            message,
                        })?;
                    let target = resolve(label)?;
                    let key = canonical_topic_id(id);
                    if self.query_labels.contains_key(&key) {
                        return Err(IntentError::DuplicateId {
                            line: line_no,
                            id: id.to_string(),
                        });
                    }
                    self.query_labels.insert(key, QueryLabel { intent, target });
                }
                _ => {
                    return Err(IntentError::Parse {
                        line: line_no,
                        message: format!(
                            "expected 2 or 3 tab-separated columns, found {}",
                            cols.len()
                        ),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn tweet_label(&self, tweet_id: &str) -> Option<&IntentLabel> {
        self.tweet_labels.get(tweet_id)
    }

    pub fn query_label(&self, topic_id: &str) -> Option<&QueryLabel> {
        self.query_labels.get(&canonical_topic_id(topic_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleField {
    /// Tweet text.
    Text,
    /// Titles of fetched linked documents.
    Title,
    /// Raw URL strings.
    Url,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleRecord {
    name: String,
    label: String,
    weight: f64,
    #[serde(default)]
    pattern: Option<String>,
    #[serde(default = "default_field")]
    field: RuleField,
    #[serde(default)]
    tweet_type: Option<TweetType>,
}

fn default_field() -> RuleField {
    RuleField::Text
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    version: String,
    rule: Vec<RuleRecord>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub label: IntentLabel,
    pub weight: f64,
    pattern: Option<Regex>,
    pub field: RuleField,
    pub tweet_type: Option<TweetType>,
}

impl Rule {
    fn fires(&self, tweet: &TweetRecord) -> bool {
        if let Some(t) = self.tweet_type {
            if tweet.tweet_type != t {
                return false;
            }
        }
        let Some(re) = &self.pattern else {
            // type-only rule
            return self.tweet_type.is_some();
        };
        match self.field {
            RuleField::Text => re.is_match(&tweet.text),
            RuleField::Title => tweet
                .linked_docs
                .iter()
                .any(|d| d.fetch_ok && re.is_match(&d.title)),
            RuleField::Url => tweet.urls.iter().any(|u| re.is_match(u)),
        }
    }
}

/// Weighted rule voting. Each firing rule adds its weight to its label; the
/// label with the largest total wins (earliest rule on ties) with confidence
/// equal to its share of the fired weight.
#[derive(Debug, Clone)]
pub struct HeuristicClassifier {
    pub version: String,
    rules: Vec<Rule>,
}

impl HeuristicClassifier {
    pub fn load(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Self, IntentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IntentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, taxonomy)
    }

    pub fn from_toml_str(text: &str, taxonomy: &Taxonomy) -> Result<Self, IntentError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| IntentError::Rules(e.to_string()))?;
        let mut rules = Vec::with_capacity(file.rule.len());
        for r in file.rule {
            let label = taxonomy
                .resolve_label(&r.label)
                .map_err(|e| IntentError::Rules(format!("rule {}: {e}", r.name)))?;
            if label.is_uncertain() {
                return Err(IntentError::Rules(format!(
                    "rule {} cannot emit uncertain",
                    r.name
                )));
            }
            if !(r.weight > 0.0 && r.weight.is_finite()) {
                return Err(IntentError::Rules(format!(
                    "rule {}: weight must be positive",
                    r.name
                )));
            }
            if r.pattern.is_none() && r.tweet_type.is_none() {
                return Err(IntentError::Rules(format!(
                    "rule {} needs a pattern or a tweet_type",
                    r.name
                )));
            }
            let pattern = r
                .pattern
                .as_deref()
                .map(|p| RegexBuilder::new(p).case_insensitive(true).build())
                .transpose()
                .map_err(|e| IntentError::Rules(format!("rule {}: {e}", r.name)))?;
            rules.push(Rule {
                name: r.name,
                label,
                weight: r.weight,
                pattern,
                field: r.field,
                tweet_type: r.tweet_type,
            });
        }
        Ok(HeuristicClassifier {
            version: file.version,
            rules,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn classify(&self, tweet: &TweetRecord) -> (IntentLabel, f64) {
        let mut totals: Vec<(&IntentLabel, f64)> = Vec::new();
        let mut fired = 0.0;
        for rule in self.rules.iter().filter(|r| r.fires(tweet)) {
            fired += rule.weight;
            match totals.iter_mut().find(|(l, _)| *l == &rule.label) {
                Some((_, w)) => *w += rule.weight,
                None => totals.push((&rule.label, rule.weight)),
            }
        }
        let mut best: Option<(&IntentLabel, f64)> = None;
        for (l, w) in totals {
            if best.is_none_or(|(_, b)| w > b) {
                best = Some((l, w));
            }
        }
        match best {
            Some((l, w)) => (l.clone(), (w / fired).clamp(0.0, 1.0)),
            None => (IntentLabel::Uncertain, 0.0),
        }
    }
}
