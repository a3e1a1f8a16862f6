//! Hand-built inputs shared by the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use linkintent::corpus::{Corpus, IntentGroup, TweetRecord, TweetType};
use linkintent::taxonomy::CategoryId;

pub fn record(id: &str, tweet_type: TweetType, chars: usize, reactions: u64) -> TweetRecord {
    TweetRecord {
        id: id.into(),
        text: "x".repeat(chars),
        tweet_type,
        urls: vec![format!("https://example.org/{id}")],
        linked_docs: vec![],
        likes: reactions,
        replies: 0,
        retweets: 0,
        parent_context: None,
        hashtags: vec![],
        mentions: vec![],
    }
}

/// Twenty records whose percentages were counted by hand.
pub fn twenty_records() -> (Corpus, BTreeMap<String, IntentGroup>) {
    use TweetType::{Quoted as Q, Regular as R, Reply as P};
    let share = IntentGroup::Category(CategoryId::Share);
    let ent = IntentGroup::Category(CategoryId::Entertain);
    let conv = IntentGroup::Category(CategoryId::Converse);
    let nc = IntentGroup::NcUn;
    let rows = [
        ("s1", R, 20, 0, share),
        ("s2", R, 50, 3, share),
        ("s3", R, 80, 7, share),
        ("s4", P, 120, 12, share),
        ("s5", Q, 200, 0, share),
        ("s6", R, 34, 1, share),
        ("s7", R, 35, 5, share),
        ("s8", P, 70, 6, share),
        ("e1", R, 71, 10, ent),
        ("e2", P, 105, 11, ent),
        ("e3", P, 106, 0, ent),
        ("e4", Q, 175, 2, ent),
        ("c1", P, 10, 0, conv),
        ("c2", P, 176, 100, conv),
        ("c3", R, 60, 4, conv),
        ("n1", R, 30, 0, nc),
        ("n2", R, 90, 8, nc),
        ("n3", Q, 150, 1, nc),
        ("n4", Q, 300, 20, nc),
        ("n5", P, 40, 0, nc),
    ];
    let (corpus, dupes) = Corpus::from_records(rows.iter().map(|r| record(r.0, r.1, r.2, r.3)));
    assert!(dupes.is_empty());
    let labels = rows.iter().map(|r| (r.0.to_string(), r.4)).collect();
    (corpus, labels)
}

pub type ExpectedRow = (&'static str, usize, [f64; 3], [f64; 5], [f64; 4]);

const THIRD: f64 = 100.0 / 3.0;

/// Row key, n, then type / length / reaction percentages.
pub const TWENTY_RECORD_TABLE: [ExpectedRow; 5] = [
    (
        "All",
        20,
        [45.0, 35.0, 20.0],
        [20.0, 25.0, 20.0, 20.0, 15.0],
        [30.0, 30.0, 20.0, 20.0],
    ),
    (
        "Share",
        8,
        [62.5, 25.0, 12.5],
        [25.0, 37.5, 12.5, 12.5, 12.5],
        [25.0, 37.5, 25.0, 12.5],
    ),
    (
        "Entertain",
        4,
        [25.0, 50.0, 25.0],
        [0.0, 0.0, 50.0, 50.0, 0.0],
        [25.0; 4],
    ),
    (
        "Converse",
        3,
        [THIRD, 2.0 * THIRD, 0.0],
        [THIRD, THIRD, 0.0, 0.0, THIRD],
        [THIRD, THIRD, 0.0, THIRD],
    ),
    (
        "NC-UN",
        5,
        [40.0, 20.0, 40.0],
        [20.0; 5],
        [40.0, 20.0, 20.0, 20.0],
    ),
];
