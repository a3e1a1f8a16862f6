mod common;

use std::collections::BTreeSet;

use linkintent::codebook::{
    consensus_grouping, consensus_merge, dedupe_exact, parse_codes, parse_groupings, NamedGroup,
    Threshold, WorkerGrouping,
};
use proptest::prelude::*;

fn worker(id: &str, groups: Vec<(&str, Vec<u32>)>, pairs: Vec<(u32, u32)>) -> WorkerGrouping {
    WorkerGrouping {
        worker_id: id.into(),
        groups: groups
            .into_iter()
            .map(|(n, c)| NamedGroup {
                name: n.into(),
                codes: c.into_iter().collect(),
            })
            .collect(),
        identity_pairs: pairs,
    }
}

#[test]
fn dedupe_keeps_lowest_id() {
    let codes = parse_codes("1\tShare news\n2\tshare  NEWS\n3\tjoke\n").unwrap();
    let d = dedupe_exact(&codes);
    assert_eq!(d.kept.len(), 2);
    assert_eq!(d.remap[&2], 1);
}

#[test]
fn majority_grouping_and_names() {
    let ws = vec![
        worker(
            "a",
            vec![("News", vec![1, 2]), ("Fun", vec![3])],
            vec![(1, 2)],
        ),
        worker("b", vec![("News", vec![1, 2]), ("Fun", vec![3])], vec![]),
        worker("c", vec![("Stuff", vec![1, 2, 3])], vec![(2, 1)]),
    ];
    let groups = consensus_grouping(&ws, Threshold::StrictMajority).unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0].name, "News");
    assert_eq!(groups[0].codes, BTreeSet::from([1, 2]));
    assert_eq!(groups[1].name, "Fun");
    let merged = consensus_merge(&ws, Threshold::StrictMajority).unwrap();
    assert_eq!(merged.discarded, 1);
    assert_eq!(merged.classes.len(), 2);
}

#[test]
fn groupings_must_share_a_universe() {
    let ws = vec![
        worker("a", vec![("X", vec![1, 2])], vec![]),
        worker("b", vec![("X", vec![1])], vec![]),
    ];
    assert!(consensus_grouping(&ws, Threshold::StrictMajority).is_err());
    assert!(consensus_grouping(&[], Threshold::StrictMajority).is_err());
    let overlap = vec![worker("a", vec![("X", vec![1]), ("Y", vec![1])], vec![])];
    assert!(consensus_grouping(&overlap, Threshold::StrictMajority).is_err());
}

#[test]
fn grouping_lines_parse() {
    let text = r#"{"worker_id":"w1","groups":[{"name":"A","codes":[1,2]}],"identity_pairs":[[1,2]]}
{"worker_id":"w2","groups":[{"name":"A","codes":[1,2]}]}
"#;
    let ws = parse_groupings(text).unwrap();
    assert_eq!(ws.len(), 2);
    assert!(ws[1].identity_pairs.is_empty());
}

/// Random partitions of codes 1..=n for several workers.
fn workers_strategy() -> impl Strategy<Value = (u32, Vec<Vec<usize>>)> {
    (2u32..10, 1usize..6).prop_flat_map(|(n, w)| {
        (
            Just(n),
            prop::collection::vec(prop::collection::vec(0usize..4, n as usize), w),
        )
    })
}

fn build(n: u32, assignments: &[Vec<usize>]) -> Vec<WorkerGrouping> {
    assignments
        .iter()
        .enumerate()
        .map(|(w, assign)| {
            let mut groups: Vec<NamedGroup> = Vec::new();
            for g in 0..4 {
                let codes: BTreeSet<u32> =
                    (1..=n).filter(|&c| assign[(c - 1) as usize] == g).collect();
                if !codes.is_empty() {
                    groups.push(NamedGroup {
                        name: format!("g{g}"),
                        codes,
                    });
                }
            }
            let pairs = (1..n)
                .filter(|&c| {
                    assign[(c - 1) as usize] == assign[c as usize]
                        && (c as usize + w).is_multiple_of(2)
                })
                .map(|c| (c, c + 1))
                .collect();
            WorkerGrouping {
                worker_id: format!("w{w}"),
                groups,
                identity_pairs: pairs,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn grouping_equals_thresholded_components((n, assign) in workers_strategy(), t in 1usize..6) {
        let ws = build(n, &assign);
        let groups = consensus_grouping(&ws, Threshold::AtLeast(t)).unwrap();
        let nodes: Vec<u32> = (1..=n).collect();
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in (a + 1)..=n {
                let votes = assign.iter().filter(|w| w[(a - 1) as usize] == w[(b - 1) as usize]).count();
                if votes >= t {
                    edges.push((a, b));
                }
            }
        }
        let want = common::components_brute(&nodes, &edges);
        let got: Vec<Vec<u32>> = groups.iter().map(|g| g.codes.iter().copied().collect()).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn grouping_is_a_partition((n, assign) in workers_strategy()) {
        let ws = build(n, &assign);
        let groups = consensus_grouping(&ws, Threshold::StrictMajority).unwrap();
        let mut all: Vec<u32> = groups.iter().flat_map(|g| g.codes.iter().copied()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (1..=n).collect::<Vec<_>>());
        prop_assert!(groups.iter().all(|g| !g.name.is_empty()));
    }

    #[test]
    fn higher_threshold_refines((n, assign) in workers_strategy(), t in 1usize..5) {
        let ws = build(n, &assign);
        let coarse = consensus_grouping(&ws, Threshold::AtLeast(t)).unwrap();
        let fine = consensus_grouping(&ws, Threshold::AtLeast(t + 1)).unwrap();
        prop_assert!(fine.len() >= coarse.len());
        for f in &fine {
            prop_assert!(coarse.iter().any(|c| f.codes.is_subset(&c.codes)));
        }
    }

    #[test]
    fn merge_classes_partition_and_count((n, assign) in workers_strategy(), t in 1usize..4) {
        let ws = build(n, &assign);
        let m = consensus_merge(&ws, Threshold::AtLeast(t)).unwrap();
        let total: usize = m.classes.iter().map(BTreeSet::len).sum();
        prop_assert_eq!(total, n as usize);
        prop_assert_eq!(m.discarded, n as usize - m.classes.len());
    }
}
