//! Bipartite matchings covering the left side, with Hall violators.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Matching {
    /// `m[u]` is the right partner of left vertex `u`.
    Covering(Vec<usize>),
    /// Left set `S` with `|N(S)| < |S|`.
    Violator(Vec<usize>),
}

impl Matching {
    pub fn is_covering(&self) -> bool {
        matches!(self, Matching::Covering(_))
    }
}

fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
    for &v in &adj[u] {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
            owner[v] = Some(u);
            return true;
        }
    }
    false
}

/// Augmenting-path matching of every left vertex `u` into `adj[u]`.
pub fn perfect_matching(adj: &[Vec<usize>], n_right: usize) -> Matching {
    let mut owner: Vec<Option<usize>> = vec![None; n_right];
    let mut free = None;
    for u in 0..adj.len() {
        let mut seen = vec![false; n_right];
        if !augment(u, adj, &mut seen, &mut owner) && free.is_none() {
            free = Some(u);
        }
    }
    let mut mate = vec![usize::MAX; adj.len()];
    for (v, o) in owner.iter().enumerate() {
        if let Some(u) = o {
            mate[*u] = v;
        }
    }
    let Some(root) = free else { return Matching::Covering(mate) };
    // left vertices reachable from an unmatched one by alternating paths
    let mut in_s = vec![false; adj.len()];
    let mut seen_r = vec![false; n_right];
    let mut queue = VecDeque::from([root]);
    in_s[root] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if seen_r[v] {
                continue;
            }
            seen_r[v] = true;
            if let Some(w) = owner[v] {
                if !in_s[w] {
                    in_s[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    Matching::Violator((0..adj.len()).filter(|u| in_s[*u]).collect())
}

/// Lexicographically least `mu: R -> L` among perfect matchings, where
/// `edge(i, a)` says copy `i` may play role `a`.
pub fn lex_first_perfect_matching(n: usize, edge: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let mut mu = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for a in 0..n {
        let mut chosen = None;
        let candidates: Vec<usize> = (0..n).filter(|i| !used[*i] && edge(*i, a)).collect();
        for i in candidates {
            used[i] = true;
            let adj: Vec<Vec<usize>> =
                (a + 1..n).map(|b| (0..n).filter(|j| !used[*j] && edge(*j, b)).collect()).collect();
            if perfect_matching(&adj, n).is_covering() {
                chosen = Some(i);
                break;
            }
            used[i] = false;
        }
        mu.push(chosen?);
    }
    Some(mu)
}
