//! Multi-rater label aggregation and agreement statistics.
//!
//! Consensus is defined for exactly five raters:
//!
//! | outcome               | rule                                               |
//! |-----------------------|----------------------------------------------------|
//! | high consensus        | some label has at least 4 votes                    |
//! | competing consensus   | top label has 3 votes, the other 2 votes agree     |
//! | split decision        | top label has 3 votes, the other 2 votes differ    |
//! | no majority           | no label has 3 votes                               |
//!
//! An item is NC-UN when it has no majority or its consensus label is
//! `Uncertain`. `Uncertain` is voted on like any other label.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::Hash;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::taxonomy::{IntentLabel, Taxonomy};

pub const STUDY1_RATERS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("consensus needs exactly {STUDY1_RATERS} labels, got {0}")]
    WrongRaterCount(usize),
    #[error("rows sum to different rater counts (row {row}: {found}, expected {expected})")]
    RaggedMatrix {
        row: usize,
        found: u64,
        expected: u64,
    },
    #[error("agreement needs at least one item")]
    NoItems,
    #[error("agreement needs at least two raters per item, got {0}")]
    TooFewRaters(u64),
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("item sets differ: {0:?}")]
    IdMismatch(String),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Chance-corrected agreement. `Undefined` when expected agreement is 1,
/// where the statistic has a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    Value(f64),
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::Undefined => None,
        }
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Value(v) => write!(f, "{v:.3}"),
            Kappa::Undefined => f.write_str("undefined"),
        }
    }
}

/// Landis & Koch interpretation bands.
pub fn interpretation_band(kappa: Kappa) -> &'static str {
    match kappa {
        Kappa::Undefined => "undefined",
        Kappa::Value(v) if v < 0.0 => "poor",
        Kappa::Value(v) if v <= 0.20 => "slight",
        Kappa::Value(v) if v <= 0.40 => "fair",
        Kappa::Value(v) if v <= 0.60 => "moderate",
        Kappa::Value(v) if v <= 0.80 => "substantial",
        Kappa::Value(_) => "almost perfect",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StudyPhase {
    Study1,
    Study2a,
    Study2b,
    Expert,
}

impl StudyPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyPhase::Study1 => "study1",
            StudyPhase::Study2a => "study2a",
            StudyPhase::Study2b => "study2b",
            StudyPhase::Expert => "expert",
        }
    }
}

impl fmt::Display for StudyPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyPhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "study1" => Ok(StudyPhase::Study1),
            "study2a" => Ok(StudyPhase::Study2a),
            "study2b" => Ok(StudyPhase::Study2b),
            "expert" => Ok(StudyPhase::Expert),
            other => Err(format!("unknown study phase {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    pub item_id: String,
    pub labels: Vec<(String, IntentLabel)>,
    pub study_phase: StudyPhase,
}

impl AnnotationSet {
    pub fn label_values(&self) -> Vec<IntentLabel> {
        self.labels.iter().map(|(_, l)| l.clone()).collect()
    }
}

/// Annotation sets keyed by (phase, item id).
#[derive(Debug, Clone, Default)]
pub struct AnnotationFile {
    pub sets: BTreeMap<(StudyPhase, String), AnnotationSet>,
}

impl AnnotationFile {
    pub fn load(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Self, AnnotationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AnnotationError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, taxonomy).map_err(|message| AnnotationError::Format {
            path: path.display().to_string(),
            message,
        })
    }

    /// Tab-separated `item_id, rater_id, label, study_phase`. An optional
    /// header starting with `item_id` and `#` comments are skipped.
    pub fn parse(text: &str, taxonomy: &Taxonomy) -> Result<Self, String> {
        let mut sets: BTreeMap<(StudyPhase, String), AnnotationSet> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.first() == Some(&"item_id") {
                continue;
            }
            if cols.len() != 4 {
                return Err(format!(
                    "line {line_no}: expected 4 tab-separated columns, found {}",
                    cols.len()
                ));
            }
            let label = taxonomy
                .resolve_label(cols[2])
                .map_err(|e| format!("line {line_no}: {e}"))?;
            let phase: StudyPhase = cols[3]
                .parse()
                .map_err(|e| format!("line {line_no}: {e}"))?;
            let set = sets
                .entry((phase, cols[0].to_string()))
                .or_insert_with(|| AnnotationSet {
                    item_id: cols[0].to_string(),
                    labels: Vec::new(),
                    study_phase: phase,
                });
            if set.labels.iter().any(|(r, _)| r == cols[1]) {
                return Err(format!(
                    "line {line_no}: rater {:?} labels item {:?} twice",
                    cols[1], cols[0]
                ));
            }
            set.labels.push((cols[1].to_string(), label));
        }
        for set in sets.values() {
            if set.study_phase == StudyPhase::Study1 && set.labels.len() != STUDY1_RATERS {
                return Err(format!(
                    "study1 item {:?} has {} labels, expected {STUDY1_RATERS}",
                    set.item_id,
                    set.labels.len()
                ));
            }
        }
        Ok(AnnotationFile { sets })
    }

    pub fn phase(&self, phase: StudyPhase) -> impl Iterator<Item = &AnnotationSet> {
        self.sets
            .iter()
            .filter(move |((p, _), _)| *p == phase)
            .map(|(_, s)| s)
    }

    pub fn phases(&self) -> BTreeSet<StudyPhase> {
        self.sets.keys().map(|(p, _)| *p).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusKind {
    HighConsensus(IntentLabel),
    CompetingConsensus(IntentLabel),
    SplitDecision(IntentLabel),
    NoMajority,
}

impl ConsensusKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConsensusKind::HighConsensus(_) => "high_consensus",
            ConsensusKind::CompetingConsensus(_) => "competing_consensus",
            ConsensusKind::SplitDecision(_) => "split_decision",
            ConsensusKind::NoMajority => "no_majority",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusOutcome {
    pub kind: ConsensusKind,
    pub is_nc_un: bool,
}

impl ConsensusOutcome {
    pub fn label(&self) -> Option<&IntentLabel> {
        match &self.kind {
            ConsensusKind::HighConsensus(l)
            | ConsensusKind::CompetingConsensus(l)
            | ConsensusKind::SplitDecision(l) => Some(l),
            ConsensusKind::NoMajority => None,
        }
    }

    pub fn is_high_consensus(&self) -> bool {
        matches!(self.kind, ConsensusKind::HighConsensus(_))
    }
}

pub fn classify_consensus(labels: &[IntentLabel]) -> Result<ConsensusOutcome, AnnotationError> {
    if labels.len() != STUDY1_RATERS {
        return Err(AnnotationError::WrongRaterCount(labels.len()));
    }
    let mut votes: Vec<(&IntentLabel, usize)> = Vec::new();
    for l in labels {
        match votes.iter_mut().find(|(v, _)| *v == l) {
            Some((_, n)) => *n += 1,
            None => votes.push((l, 1)),
        }
    }
    votes.sort_by_key(|v| std::cmp::Reverse(v.1));
    let (top, top_votes) = (votes[0].0.clone(), votes[0].1);
    let kind = match top_votes {
        4 | 5 => ConsensusKind::HighConsensus(top),
        // the remaining two votes either agree (one other label) or not
        3 if votes.len() == 2 => ConsensusKind::CompetingConsensus(top),
        3 => ConsensusKind::SplitDecision(top),
        _ => ConsensusKind::NoMajority,
    };
    let is_nc_un = match &kind {
        ConsensusKind::NoMajority => true,
        ConsensusKind::HighConsensus(l)
        | ConsensusKind::CompetingConsensus(l)
        | ConsensusKind::SplitDecision(l) => l.is_uncertain(),
    };
    Ok(ConsensusOutcome { kind, is_nc_un })
}

/// Fleiss' kappa over an items x categories matrix of vote counts. Every row
/// must sum to the same rater count n >= 2.
pub fn fleiss_kappa(matrix: &[Vec<u64>]) -> Result<Kappa, AnnotationError> {
    let Some(first) = matrix.first() else {
        return Err(AnnotationError::NoItems);
    };
    let n: u64 = first.iter().sum();
    for (i, row) in matrix.iter().enumerate() {
        let s: u64 = row.iter().sum();
        if s != n || row.len() != first.len() {
            return Err(AnnotationError::RaggedMatrix {
                row: i,
                found: s,
                expected: n,
            });
        }
    }
    if n < 2 {
        return Err(AnnotationError::TooFewRaters(n));
    }
    let items = matrix.len() as u64;
    let total = items * n;

    let mut col_sums = vec![0u64; first.len()];
    let mut agreeing_pairs: u64 = 0;
    for row in matrix {
        for (j, &c) in row.iter().enumerate() {
            col_sums[j] += c;
            agreeing_pairs += c * c.saturating_sub(1);
        }
    }
    // Expected agreement is 1 only when a single category holds every vote.
    if col_sums.contains(&total) {
        return Ok(Kappa::Undefined);
    }
    let all_pairs = items * n * (n - 1);
    if agreeing_pairs == all_pairs {
        return Ok(Kappa::Value(1.0));
    }
    let p_bar = agreeing_pairs as f64 / all_pairs as f64;
    let p_e: f64 = col_sums
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * p
        })
        .sum();
    Ok(Kappa::Value((p_bar - p_e) / (1.0 - p_e)))
}

/// Cohen's kappa between two raters over the joint label set.
pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<Kappa, AnnotationError> {
    if a.len() != b.len() {
        return Err(AnnotationError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AnnotationError::NoItems);
    }
    let n = a.len() as f64;
    let mut marg_a: HashMap<&T, usize> = HashMap::new();
    let mut marg_b: HashMap<&T, usize> = HashMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        *marg_a.entry(x).or_default() += 1;
        *marg_b.entry(y).or_default() += 1;
        if x == y {
            agree += 1;
        }
    }
    // p_e == 1 iff both raters used one and the same label throughout.
    if marg_a.len() == 1 && marg_b.len() == 1 && marg_a.keys().next() == marg_b.keys().next() {
        return Ok(Kappa::Undefined);
    }
    if agree == a.len() {
        return Ok(Kappa::Value(1.0));
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marg_a
        .iter()
        .map(|(k, &ca)| {
            let cb = marg_b.get(k).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    Ok(Kappa::Value((p_o - p_e) / (1.0 - p_e)))
}

/// Builds the vote-count matrix for a set of items. Columns are the distinct
/// labels in sorted order.
pub fn vote_matrix<'a>(
    sets: impl IntoIterator<Item = &'a AnnotationSet>,
) -> (Vec<IntentLabel>, Vec<Vec<u64>>) {
    let sets: Vec<&AnnotationSet> = sets.into_iter().collect();
    let columns: Vec<IntentLabel> = sets
        .iter()
        .flat_map(|s| s.labels.iter().map(|(_, l)| l.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let matrix = sets
        .iter()
        .map(|s| {
            let mut row = vec![0u64; columns.len()];
            for (_, l) in &s.labels {
                let j = columns.binary_search(l).expect("column exists");
                row[j] += 1;
            }
            row
        })
        .collect();
    (columns, matrix)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub fleiss_kappa: Kappa,
    pub n_items: usize,
    pub n_raters: u64,
    pub n_categories: usize,
    pub interpretation_band: &'static str,
}

pub fn agreement_report<'a>(
    sets: impl IntoIterator<Item = &'a AnnotationSet>,
) -> Result<AgreementReport, AnnotationError> {
    let (columns, matrix) = vote_matrix(sets);
    let kappa = fleiss_kappa(&matrix)?;
    Ok(AgreementReport {
        fleiss_kappa: kappa,
        n_items: matrix.len(),
        n_raters: matrix[0].iter().sum(),
        n_categories: columns.len(),
        interpretation_band: interpretation_band(kappa),
    })
}

/// Share of items per high-consensus label. Items without high consensus
/// form the residual bucket; `nc_un` is reported alongside and overlaps the
/// label buckets when the consensus label is `Uncertain`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentionDistribution {
    pub n_items: usize,
    pub by_label: Vec<(IntentLabel, f64)>,
    pub no_high_consensus: f64,
    pub nc_un: f64,
}

impl IntentionDistribution {
    pub fn get(&self, label: &IntentLabel) -> f64 {
        self.by_label
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn partition_total(&self) -> f64 {
        self.by_label.iter().map(|(_, p)| p).sum::<f64>() + self.no_high_consensus
    }
}

pub fn intention_distribution(
    outcomes: &BTreeMap<String, ConsensusOutcome>,
) -> IntentionDistribution {
    let n = outcomes.len();
    if n == 0 {
        return IntentionDistribution {
            n_items: 0,
            by_label: Vec::new(),
            no_high_consensus: 0.0,
            nc_un: 0.0,
        };
    }
    let mut counts: BTreeMap<IntentLabel, usize> = BTreeMap::new();
    let mut residual = 0usize;
    let mut nc_un = 0usize;
    for o in outcomes.values() {
        match &o.kind {
            ConsensusKind::HighConsensus(l) => *counts.entry(l.clone()).or_default() += 1,
            _ => residual += 1,
        }
        if o.is_nc_un {
            nc_un += 1;
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / n as f64;
    let mut by_label: Vec<(IntentLabel, f64)> =
        counts.into_iter().map(|(l, c)| (l, pct(c))).collect();
    // largest share first; BTreeMap order breaks ties
    by_label.sort_by(|a, b| b.1.total_cmp(&a.1));
    IntentionDistribution {
        n_items: n,
        by_label,
        no_high_consensus: pct(residual),
        nc_un: pct(nc_un),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub item_id: String,
    pub before: ConsensusOutcome,
    pub after: ConsensusOutcome,
}

impl Transition {
    pub fn gained_majority(&self) -> bool {
        self.before.is_nc_un && !self.after.is_nc_un
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementDelta {
    pub n_items: usize,
    pub nc_un_before: usize,
    pub gained_majority: usize,
    /// Percentage of items NC-UN before that reach a majority label after.
    pub gain_pct: f64,
    pub transitions: Vec<Transition>,
}

pub fn agreement_delta(
    before: &BTreeMap<String, ConsensusOutcome>,
    after: &BTreeMap<String, ConsensusOutcome>,
) -> Result<AgreementDelta, AnnotationError> {
    if let Some(id) = before
        .keys()
        .find(|k| !after.contains_key(*k))
        .or_else(|| after.keys().find(|k| !before.contains_key(*k)))
    {
        return Err(AnnotationError::IdMismatch(id.clone()));
    }
    let transitions: Vec<Transition> = before
        .iter()
        .map(|(id, b)| Transition {
            item_id: id.clone(),
            before: b.clone(),
            after: after[id].clone(),
        })
        .collect();
    let nc_un_before = transitions.iter().filter(|t| t.before.is_nc_un).count();
    let gained = transitions.iter().filter(|t| t.gained_majority()).count();
    let gain_pct = if nc_un_before == 0 {
        0.0
    } else {
        100.0 * gained as f64 / nc_un_before as f64
    };
    Ok(AgreementDelta {
        n_items: transitions.len(),
        nc_un_before,
        gained_majority: gained,
        gain_pct,
        transitions,
    })
}

/// Consensus for every five-rater item of a phase.
pub fn classify_phase<'a>(
    sets: impl IntoIterator<Item = &'a AnnotationSet>,
) -> Result<BTreeMap<String, ConsensusOutcome>, AnnotationError> {
    sets.into_iter()
        .map(|s| Ok((s.item_id.clone(), classify_consensus(&s.label_values())?)))
        .collect()
}
