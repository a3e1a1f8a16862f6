//! Brute-force reference implementations shared by the integration tests.
//! Each one recomputes a quantity from first principles without calling the
//! library code it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

/// Exhaustive BM25 over raw token lists: every document scored with the
/// textbook formula, zero scores dropped, sorted by score then id.
pub fn bm25_exhaustive(
    docs: &[(String, Vec<String>)],
    query: &[String],
    k1: f64,
    b: f64,
    k: usize,
) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|(_, t)| t.len() as f64).sum::<f64>() / n;
    let df: Vec<f64> = query
        .iter()
        .map(|q| docs.iter().filter(|(_, t)| t.contains(q)).count() as f64)
        .collect();
    let mut scored: Vec<(String, f64)> = docs
        .iter()
        .map(|(id, toks)| {
            let dl = toks.len() as f64;
            let mut s = 0.0;
            for (q, &df) in query.iter().zip(&df) {
                let tf = toks.iter().filter(|t| *t == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let norm = if avgdl > 0.0 {
                    1.0 - b + b * dl / avgdl
                } else {
                    1.0
                };
                s += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
            (id.clone(), s)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Fleiss' kappa by enumerating ordered rater pairs per item. `None` when
/// chance agreement is 1.
pub fn fleiss_brute(matrix: &[Vec<u64>]) -> Option<f64> {
    let n_items = matrix.len();
    let mut agree = 0u64;
    let mut pairs = 0u64;
    let mut totals: HashMap<usize, u64> = HashMap::new();
    let mut all_votes = 0u64;
    for row in matrix {
        let raters: Vec<usize> = row
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n(j, c as usize))
            .collect();
        for (x, a) in raters.iter().enumerate() {
            *totals.entry(*a).or_default() += 1;
            all_votes += 1;
            for (y, b) in raters.iter().enumerate() {
                if x != y {
                    pairs += 1;
                    if a == b {
                        agree += 1;
                    }
                }
            }
        }
    }
    let _ = n_items;
    let p_bar = agree as f64 / pairs as f64;
    let p_e: f64 = totals
        .values()
        .map(|&c| (c as f64 / all_votes as f64).powi(2))
        .sum();
    if totals.values().any(|&c| c == all_votes) {
        return None;
    }
    Some((p_bar - p_e) / (1.0 - p_e))
}

/// Cohen's kappa from an explicit confusion table. `None` when chance
/// agreement is 1.
pub fn cohen_brute<T: Ord + Clone>(a: &[T], b: &[T]) -> Option<f64> {
    let mut table: BTreeMap<(T, T), f64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x.clone(), y.clone())).or_default() += 1.0;
    }
    let n = a.len() as f64;
    let mut labels: Vec<T> = a.iter().chain(b).cloned().collect();
    labels.sort();
    labels.dedup();
    let cell = |x: &T, y: &T| table.get(&(x.clone(), y.clone())).copied().unwrap_or(0.0);
    let p_o: f64 = labels.iter().map(|l| cell(l, l)).sum::<f64>() / n;
    let p_e: f64 = labels
        .iter()
        .map(|l| {
            let row: f64 = labels.iter().map(|m| cell(l, m)).sum();
            let col: f64 = labels.iter().map(|m| cell(m, l)).sum();
            (row / n) * (col / n)
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 && labels.len() == 1 {
        return None;
    }
    Some((p_o - p_e) / (1.0 - p_e))
}

/// Hand-written consensus rule over symbol votes; symbol 0 is Uncertain.
/// Returns (kind name, majority symbol, nc-un flag).
pub fn consensus_rule(votes: &[u8; 5]) -> (&'static str, Option<u8>, bool) {
    let mut counts = [0usize; 7];
    for &v in votes {
        counts[v as usize] += 1;
    }
    let (top, &max) = counts
        .iter()
        .enumerate()
        .max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i)))
        .unwrap();
    let distinct = counts.iter().filter(|&&c| c > 0).count();
    let (kind, label) = if max >= 4 {
        ("high_consensus", Some(top as u8))
    } else if max == 3 && distinct == 2 {
        ("competing_consensus", Some(top as u8))
    } else if max == 3 {
        ("split_decision", Some(top as u8))
    } else {
        ("no_majority", None)
    };
    let nc_un = label.is_none() || label == Some(0);
    (kind, label, nc_un)
}

/// DCG of a ranking, written out term by term.
pub fn dcg_brute(grades_in_rank_order: &[u32], k: usize, exponential: bool) -> f64 {
    let mut total = 0.0;
    for (rank, &g) in (1usize..).zip(grades_in_rank_order) {
        if rank > k {
            break;
        }
        let gain = if exponential {
            2f64.powi(g as i32) - 1.0
        } else {
            g as f64
        };
        total += gain / ((rank + 1) as f64).log2();
    }
    total
}

fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// nDCG@k with the ideal DCG found by maximizing over every ordering of the
/// judged grades (exhaustive for up to 7 positive grades, sorted beyond).
pub fn ndcg_brute(
    ranking: &[String],
    qrels: &BTreeMap<String, u32>,
    k: usize,
    exponential: bool,
) -> f64 {
    let grades: Vec<u32> = ranking
        .iter()
        .map(|d| qrels.get(d).copied().unwrap_or(0))
        .collect();
    let dcg = dcg_brute(&grades, k, exponential);
    let positive: Vec<u32> = qrels.values().copied().filter(|&g| g > 0).collect();
    let idcg = if positive.len() <= 7 {
        permutations(&positive)
            .iter()
            .map(|p| dcg_brute(p, k, exponential))
            .fold(0.0, f64::max)
    } else {
        let mut sorted = positive.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        dcg_brute(&sorted, k, exponential)
    };
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Average precision by recounting relevant documents in every prefix.
pub fn ap_brute(ranking: &[String], qrels: &BTreeMap<String, u32>) -> f64 {
    let is_rel = |d: &String| qrels.get(d).is_some_and(|&g| g > 0);
    let total_rel = qrels.values().filter(|&&g| g > 0).count();
    if total_rel == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..ranking.len() {
        if is_rel(&ranking[i]) {
            let rel_in_prefix = ranking[..=i].iter().filter(|d| is_rel(d)).count();
            sum += rel_in_prefix as f64 / (i + 1) as f64;
        }
    }
    sum / total_rel as f64
}

/// Connected components of a graph over `nodes` by repeated reachability
/// expansion, sorted by smallest member.
pub fn components_brute(nodes: &[u32], edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut seen: Vec<u32> = Vec::new();
    let mut out = Vec::new();
    for &start in nodes {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = vec![start];
        loop {
            let before = comp.len();
            for &(a, b) in edges {
                if comp.contains(&a) && !comp.contains(&b) {
                    comp.push(b);
                }
                if comp.contains(&b) && !comp.contains(&a) {
                    comp.push(a);
                }
            }
            if comp.len() == before {
                break;
            }
        }
        comp.sort_unstable();
        seen.extend(&comp);
        out.push(comp);
    }
    out.sort();
    out
}
