//! Mechanical steps of codebook construction: exact deduplication of
//! intention codes and majority-vote consolidation of worker groupings.
//!
//! Semantic near-duplicates are never merged automatically. They are merged
//! only when enough workers flag the pair as identical in meaning.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CodeId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodebookError {
    #[error("no worker groupings supplied")]
    NoGroupings,
    #[error("worker {worker} covers a different code universe than worker {reference}")]
    UniverseMismatch { worker: String, reference: String },
    #[error("worker {worker}: {message}")]
    InvalidGrouping { worker: String, message: String },
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("{0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentionCode {
    pub id: CodeId,
    pub text: String,
}

/// Lowercased with runs of whitespace collapsed.
pub fn normalize_code_text(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Tab-separated `id, text`; `#` comments and an `id` or `code_id` header
/// are skipped.
pub fn parse_codes(text: &str) -> Result<Vec<IntentionCode>, CodebookError> {
    let mut out: Vec<IntentionCode> = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((id, code)) = line.split_once('\t') else {
            return Err(CodebookError::Format(format!(
                "line {line_no}: expected `id<TAB>text`"
            )));
        };
        if matches!(id.trim(), "id" | "code_id") {
            continue;
        }
        let id: CodeId = id
            .trim()
            .parse()
            .map_err(|_| CodebookError::Format(format!("line {line_no}: bad code id {id:?}")))?;
        if normalize_code_text(code).is_empty() {
            return Err(CodebookError::Format(format!(
                "line {line_no}: code {id} is empty"
            )));
        }
        if !seen.insert(id) {
            return Err(CodebookError::Format(format!(
                "line {line_no}: duplicate code id {id}"
            )));
        }
        out.push(IntentionCode {
            id,
            text: code.trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dedupe {
    /// Surviving codes in ascending id order.
    pub kept: Vec<IntentionCode>,
    /// Every input id mapped to the id that represents it.
    pub remap: BTreeMap<CodeId, CodeId>,
}

/// Collapses codes whose normalized text is identical onto the lowest id.
pub fn dedupe_exact(codes: &[IntentionCode]) -> Dedupe {
    let mut sorted: Vec<&IntentionCode> = codes.iter().collect();
    sorted.sort_by_key(|c| c.id);
    let mut first_by_text: BTreeMap<String, CodeId> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut remap = BTreeMap::new();
    for c in sorted {
        let key = normalize_code_text(&c.text);
        let rep = *first_by_text.entry(key).or_insert_with(|| {
            kept.push(c.clone());
            c.id
        });
        remap.insert(c.id, rep);
    }
    Dedupe { kept, remap }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedGroup {
    pub name: String,
    pub codes: BTreeSet<CodeId>,
}

/// One worker's sort of the code list plus the pairs they flagged as
/// identical in meaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerGrouping {
    pub worker_id: String,
    pub groups: Vec<NamedGroup>,
    #[serde(default)]
    pub identity_pairs: Vec<(CodeId, CodeId)>,
}

impl WorkerGrouping {
    /// All code ids this worker placed. Fails if the groups overlap.
    pub fn universe(&self) -> Result<BTreeSet<CodeId>, CodebookError> {
        let mut all = BTreeSet::new();
        for g in &self.groups {
            for &c in &g.codes {
                if !all.insert(c) {
                    return Err(CodebookError::InvalidGrouping {
                        worker: self.worker_id.clone(),
                        message: format!("code {c} appears in more than one group"),
                    });
                }
            }
        }
        Ok(all)
    }

    fn normalized_pairs(&self) -> BTreeSet<(CodeId, CodeId)> {
        self.identity_pairs
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect()
    }
}

/// Grouping file: one JSON object per line, one line per worker.
pub fn parse_groupings(text: &str) -> Result<Vec<WorkerGrouping>, CodebookError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| CodebookError::Format(format!("line {}: {e}", n + 1)))
        })
        .collect()
}

/// Vote threshold for majority decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threshold {
    /// More than half of the workers.
    #[default]
    StrictMajority,
    AtLeast(usize),
}

impl Threshold {
    pub fn votes_needed(self, workers: usize) -> usize {
        match self {
            Threshold::StrictMajority => workers / 2 + 1,
            Threshold::AtLeast(n) => n,
        }
    }
}

/// Checks that every grouping is a partition of one shared universe.
pub fn shared_universe(groupings: &[WorkerGrouping]) -> Result<BTreeSet<CodeId>, CodebookError> {
    let first = groupings.first().ok_or(CodebookError::NoGroupings)?;
    let reference = first.universe()?;
    for g in &groupings[1..] {
        if g.universe()? != reference {
            return Err(CodebookError::UniverseMismatch {
                worker: g.worker_id.clone(),
                reference: first.worker_id.clone(),
            });
        }
    }
    for g in groupings {
        for (a, b) in g.normalized_pairs() {
            if !reference.contains(&a) || !reference.contains(&b) {
                return Err(CodebookError::InvalidGrouping {
                    worker: g.worker_id.clone(),
                    message: format!("flagged pair ({a}, {b}) is outside the code universe"),
                });
            }
        }
    }
    Ok(reference)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // smaller index wins so roots are deterministic
        if ra < rb {
            self.parent[rb] = ra;
        } else if rb < ra {
            self.parent[ra] = rb;
        }
    }
}

/// Connected components over `universe` given the edge list; components are
/// sorted by their smallest member.
fn components(
    universe: &BTreeSet<CodeId>,
    edges: impl IntoIterator<Item = (CodeId, CodeId)>,
) -> Vec<BTreeSet<CodeId>> {
    let ids: Vec<CodeId> = universe.iter().copied().collect();
    let pos = |c: CodeId| ids.binary_search(&c).expect("code in universe");
    let mut uf = UnionFind::new(ids.len());
    for (a, b) in edges {
        uf.union(pos(a), pos(b));
    }
    let mut by_root: BTreeMap<usize, BTreeSet<CodeId>> = BTreeMap::new();
    for (i, &c) in ids.iter().enumerate() {
        let r = uf.find(i);
        by_root.entry(r).or_default().insert(c);
    }
    by_root.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeResult {
    /// Equivalence classes covering the universe, singletons included.
    pub classes: Vec<BTreeSet<CodeId>>,
    /// Codes merged away into another code's class.
    pub discarded: usize,
}

/// Merges codes connected by identity pairs flagged by enough workers.
pub fn consensus_merge(
    groupings: &[WorkerGrouping],
    threshold: Threshold,
) -> Result<MergeResult, CodebookError> {
    let universe = shared_universe(groupings)?;
    let needed = threshold.votes_needed(groupings.len());
    if needed == 0 {
        return Err(CodebookError::ZeroThreshold);
    }
    let mut votes: BTreeMap<(CodeId, CodeId), usize> = BTreeMap::new();
    for g in groupings {
        for p in g.normalized_pairs() {
            *votes.entry(p).or_default() += 1;
        }
    }
    let edges = votes
        .into_iter()
        .filter(|&(_, v)| v >= needed)
        .map(|(p, _)| p);
    let classes = components(&universe, edges);
    let discarded = classes.iter().map(|c| c.len() - 1).sum();
    Ok(MergeResult { classes, discarded })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusGroup {
    pub name: String,
    pub codes: BTreeSet<CodeId>,
}

/// Consolidates worker partitions: two codes are linked when at least
/// `threshold` workers put them in the same group, and linked components
/// become the consensus groups.
///
/// A group is named by the worker-supplied group name that occurs most often
/// across its retained edges (one vote per worker per edge). Groups without
/// edges take the most common name among the worker groups holding the code.
/// Ties go to the lexicographically smallest name.
pub fn consensus_grouping(
    groupings: &[WorkerGrouping],
    threshold: Threshold,
) -> Result<Vec<ConsensusGroup>, CodebookError> {
    let universe = shared_universe(groupings)?;
    let needed = threshold.votes_needed(groupings.len());
    if needed == 0 {
        return Err(CodebookError::ZeroThreshold);
    }

    // pair -> names given by each worker who grouped the pair together
    let mut together: BTreeMap<(CodeId, CodeId), Vec<&str>> = BTreeMap::new();
    for g in groupings {
        for group in &g.groups {
            let members: Vec<CodeId> = group.codes.iter().copied().collect();
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    together.entry((a, b)).or_default().push(&group.name);
                }
            }
        }
    }
    let kept: Vec<((CodeId, CodeId), &Vec<&str>)> = together
        .iter()
        .filter(|(_, names)| names.len() >= needed)
        .map(|(p, n)| (*p, n))
        .collect();
    let comps = components(&universe, kept.iter().map(|(p, _)| *p));

    let mut out = Vec::with_capacity(comps.len());
    for codes in comps {
        let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
        for ((a, _), names) in &kept {
            if codes.contains(a) {
                for n in names.iter() {
                    *tally.entry(n).or_default() += 1;
                }
            }
        }
        if tally.is_empty() {
            for g in groupings {
                for group in &g.groups {
                    if group.codes.iter().any(|c| codes.contains(c)) {
                        *tally.entry(&group.name).or_default() += 1;
                    }
                }
            }
        }
        out.push(ConsensusGroup {
            name: pick_name(&tally),
            codes,
        });
    }
    Ok(out)
}

fn pick_name(tally: &BTreeMap<&str, usize>) -> String {
    // BTreeMap iterates names in ascending order; keep the first maximum.
    let mut best: Option<(&str, usize)> = None;
    for (&name, &n) in tally {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((name, n));
        }
    }
    best.map(|(n, _)| n.to_string()).unwrap_or_default()
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<Vec<IntentionCode>, CodebookError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| CodebookError::Format(format!("{}: {e}", path.as_ref().display())))?;
    parse_codes(&text)
}

pub fn load_groupings(path: impl AsRef<Path>) -> Result<Vec<WorkerGrouping>, CodebookError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| CodebookError::Format(format!("{}: {e}", path.as_ref().display())))?;
    parse_groupings(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(id: CodeId, text: &str) -> IntentionCode {
        IntentionCode {
            id,
            text: text.into(),
        }
    }

    fn worker(
        id: &str,
        groups: &[(&str, &[CodeId])],
        pairs: &[(CodeId, CodeId)],
    ) -> WorkerGrouping {
        WorkerGrouping {
            worker_id: id.into(),
            groups: groups
                .iter()
                .map(|(n, c)| NamedGroup {
                    name: n.to_string(),
                    codes: c.iter().copied().collect(),
                })
                .collect(),
            identity_pairs: pairs.to_vec(),
        }
    }

    #[test]
    fn dedupe_examples() {
        let d = dedupe_exact(&[code(2, "To share  news"), code(1, "to share news")]);
        assert_eq!(d.kept, vec![code(1, "to share news")]);
        assert_eq!(d.remap[&2], 1);

        let distinct = [
            code(1, "to answer a question"),
            code(2, "to provide an answer to a question"),
        ];
        let d = dedupe_exact(&distinct);
        assert_eq!(d.kept, distinct.to_vec());
    }

    #[test]
    fn dedupe_is_idempotent() {
        let codes = [code(3, "A b"), code(1, "a  B"), code(2, "c")];
        let once = dedupe_exact(&codes);
        let twice = dedupe_exact(&once.kept);
        assert_eq!(once.kept, twice.kept);
    }

    #[test]
    fn merge_by_majority_flags() {
        let all: &[CodeId] = &[1, 2, 3];
        let flagged = worker("w", &[("g", all)], &[(1, 2)]);
        let plain = worker("v", &[("g", all)], &[]);
        let three_of_five = vec![
            flagged.clone(),
            flagged.clone(),
            flagged.clone(),
            plain.clone(),
            plain.clone(),
        ];
        let m = consensus_merge(&three_of_five, Threshold::StrictMajority).unwrap();
        assert!(m.classes.contains(&BTreeSet::from([1, 2])));
        assert_eq!(m.discarded, 1);

        let two_of_five = vec![
            flagged.clone(),
            flagged,
            plain.clone(),
            plain.clone(),
            plain,
        ];
        let m = consensus_merge(&two_of_five, Threshold::StrictMajority).unwrap();
        assert_eq!(m.discarded, 0);
        assert_eq!(m.classes.len(), 3);
    }

    #[test]
    fn grouping_unanimous() {
        let w: Vec<_> = (0..5)
            .map(|i| worker(&format!("w{i}"), &[("news", &[1, 2, 3])], &[]))
            .collect();
        let g = consensus_grouping(&w, Threshold::StrictMajority).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].codes, BTreeSet::from([1, 2, 3]));
        assert_eq!(g[0].name, "news");
    }

    #[test]
    fn grouping_singletons() {
        let w: Vec<_> = (0..5)
            .map(|i| {
                worker(
                    &format!("w{i}"),
                    &[("a", &[1]), ("b", &[2]), ("c", &[3])],
                    &[],
                )
            })
            .collect();
        let g = consensus_grouping(&w, Threshold::StrictMajority).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[1].name, "b");
    }

    #[test]
    fn universe_mismatch_detected() {
        let w = vec![
            worker("w1", &[("a", &[1, 2])], &[]),
            worker("w2", &[("a", &[1, 3])], &[]),
        ];
        assert!(matches!(
            consensus_grouping(&w, Threshold::StrictMajority),
            Err(CodebookError::UniverseMismatch { .. })
        ));
        let overlapping = vec![worker("w1", &[("a", &[1, 2]), ("b", &[2])], &[])];
        assert!(matches!(
            consensus_merge(&overlapping, Threshold::StrictMajority),
            Err(CodebookError::InvalidGrouping { .. })
        ));
        assert_eq!(
            consensus_merge(&[], Threshold::StrictMajority),
            Err(CodebookError::NoGroupings)
        );
    }

    #[test]
    fn naming_tie_breaks_lexicographically() {
        let w = vec![
            worker("w1", &[("zeta", &[1, 2])], &[]),
            worker("w2", &[("alpha", &[1, 2])], &[]),
        ];
        let g = consensus_grouping(&w, Threshold::AtLeast(2)).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].name, "alpha");
    }

    #[test]
    fn strict_majority_votes() {
        assert_eq!(Threshold::StrictMajority.votes_needed(5), 3);
        assert_eq!(Threshold::StrictMajority.votes_needed(4), 3);
        assert_eq!(Threshold::StrictMajority.votes_needed(1), 1);
    }

    #[test]
    fn file_parsers() {
        let codes = parse_codes("id\ttext\n1\tto share news\n2\tto vent\n").unwrap();
        assert_eq!(codes.len(), 2);
        assert!(parse_codes("1\t   \n").is_err());
        assert!(parse_codes("1\ta\n1\tb\n").is_err());
        let g = parse_groupings(
            r#"{"worker_id":"w1","groups":[{"name":"news","codes":[1,2]}],"identity_pairs":[[1,2]]}"#,
        )
        .unwrap();
        assert_eq!(g[0].identity_pairs, vec![(1, 2)]);
    }
}
