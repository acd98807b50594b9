//! Matching routines behind the permitted-outcome tests.

use std::collections::VecDeque;

/// Maximum bipartite matching size by Hopcroft–Karp.
///
/// `adj[u]` lists the right vertices adjacent to left vertex `u`.
pub fn hopcroft_karp(adj: &[Vec<usize>], right_count: usize) -> usize {
    const INF: usize = usize::MAX;
    let left_count = adj.len();
    let mut match_l = vec![INF; left_count];
    let mut match_r = vec![INF; right_count];
    let mut dist = vec![0usize; left_count];
    let mut matched = 0;

    loop {
        // layer the free left vertices
        let mut queue = VecDeque::new();
        for u in 0..left_count {
            if match_l[u] == INF {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == INF {
                    found = true;
                } else if dist[w] == INF {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return matched;
        }

        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            match_l: &mut [usize],
            match_r: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == INF || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist)) {
                    match_l[u] = v;
                    match_r[v] = u;
                    return true;
                }
            }
            dist[u] = INF;
            false
        }

        for u in 0..left_count {
            if match_l[u] == INF && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                matched += 1;
            }
        }
    }
}

/// Perfect matching on a general graph by trying every pairing of the
/// lowest free vertex. Exponential; meant for a dozen vertices or so.
pub fn has_perfect_matching_exhaustive(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n % 2 == 1 {
        return false;
    }
    fn go(adj: &[Vec<bool>], free: &mut [bool], remaining: usize) -> bool {
        if remaining == 0 {
            return true;
        }
        let i = free.iter().position(|&f| f).expect("remaining > 0");
        free[i] = false;
        for j in i + 1..adj.len() {
            if free[j] && adj[i][j] {
                free[j] = false;
                if go(adj, free, remaining - 2) {
                    return true;
                }
                free[j] = true;
            }
        }
        free[i] = true;
        false
    }
    go(adj, &mut vec![true; n], n)
}

/// Maximum matching size on a general graph by Edmonds' blossom algorithm.
pub fn blossom_max_matching(adj: &[Vec<bool>]) -> usize {
    const NONE: usize = usize::MAX;
    let n = adj.len();
    let mut mate = vec![NONE; n];
    let mut parent = vec![NONE; n];
    let mut base: Vec<usize> = (0..n).collect();
    let mut in_queue = vec![false; n];
    let mut in_blossom = vec![false; n];

    let lca = |mate: &[usize], parent: &[usize], base: &[usize], mut a: usize, mut b: usize| -> usize {
        let mut seen = vec![false; n];
        loop {
            a = base[a];
            seen[a] = true;
            if mate[a] == NONE {
                break;
            }
            a = parent[mate[a]];
        }
        loop {
            b = base[b];
            if seen[b] {
                return b;
            }
            b = parent[mate[b]];
        }
    };

    let mut size = 0;
    for root in 0..n {
        if mate[root] != NONE {
            continue;
        }
        parent.iter_mut().for_each(|p| *p = NONE);
        in_queue.iter_mut().for_each(|q| *q = false);
        for (i, b) in base.iter_mut().enumerate() {
            *b = i;
        }
        let mut queue = VecDeque::from([root]);
        in_queue[root] = true;
        let mut finish = NONE;

        'search: while let Some(v) = queue.pop_front() {
            for u in 0..n {
                if !adj[v][u] || base[v] == base[u] || mate[v] == u {
                    continue;
                }
                if u == root || (mate[u] != NONE && parent[mate[u]] != NONE) {
                    // odd cycle: contract the blossom
                    let cur = lca(&mate, &parent, &base, v, u);
                    in_blossom.iter_mut().for_each(|x| *x = false);
                    let mut mark_path = |mut x: usize, b: usize, mut child: usize, parent: &mut [usize]| {
                        while base[x] != b {
                            in_blossom[base[x]] = true;
                            in_blossom[base[mate[x]]] = true;
                            parent[x] = child;
                            child = mate[x];
                            x = parent[mate[x]];
                        }
                    };
                    mark_path(v, cur, u, &mut parent);
                    mark_path(u, cur, v, &mut parent);
                    for i in 0..n {
                        if in_blossom[base[i]] {
                            base[i] = cur;
                            if !in_queue[i] {
                                in_queue[i] = true;
                                queue.push_back(i);
                            }
                        }
                    }
                } else if parent[u] == NONE {
                    parent[u] = v;
                    if mate[u] == NONE {
                        finish = u;
                        break 'search;
                    }
                    let w = mate[u];
                    in_queue[w] = true;
                    queue.push_back(w);
                }
            }
        }

        if finish != NONE {
            let mut v = finish;
            while v != NONE {
                let pv = parent[v];
                let ppv = mate[pv];
                mate[v] = pv;
                mate[pv] = v;
                v = ppv;
            }
            size += 1;
        }
    }
    size
}

pub fn has_perfect_matching(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n % 2 == 1 {
        return false;
    }
    if n <= 12 {
        has_perfect_matching_exhaustive(adj)
    } else {
        2 * blossom_max_matching(adj) == n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_bipartite(adj: &[Vec<usize>], right: usize) -> usize {
        // max matching by trying every subset assignment recursively
        fn go(u: usize, adj: &[Vec<usize>], used: &mut [bool]) -> usize {
            if u == adj.len() {
                return 0;
            }
            let mut best = go(u + 1, adj, used);
            for &v in &adj[u] {
                if !used[v] {
                    used[v] = true;
                    best = best.max(1 + go(u + 1, adj, used));
                    used[v] = false;
                }
            }
            best
        }
        go(0, adj, &mut vec![false; right])
    }

    fn brute_general(adj: &[Vec<bool>]) -> usize {
        fn go(adj: &[Vec<bool>], free: &mut [bool], start: usize) -> usize {
            let n = adj.len();
            let Some(i) = (start..n).find(|&i| free[i]) else { return 0 };
            free[i] = false;
            let mut best = go(adj, free, i + 1);
            for j in i + 1..n {
                if free[j] && adj[i][j] {
                    free[j] = false;
                    best = best.max(1 + go(adj, free, i + 1));
                    free[j] = true;
                }
            }
            free[i] = true;
            best
        }
        go(adj, &mut vec![true; adj.len()], 0)
    }

    #[test]
    fn odd_cycle_needs_blossom() {
        // triangle 0-1-2 with pendant 3 on 2, and 4-5 edge off 0
        let n = 6;
        let mut adj = vec![vec![false; n]; n];
        for (a, b) in [(0, 1), (1, 2), (2, 0), (2, 3), (0, 4), (4, 5)] {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        assert_eq!(blossom_max_matching(&adj), 3);
        assert!(has_perfect_matching_exhaustive(&adj));
    }

    #[test]
    fn empty_graph_is_trivially_matched() {
        assert!(has_perfect_matching(&[]));
        assert_eq!(hopcroft_karp(&[], 0), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn hopcroft_karp_is_maximum(left in 1usize..7, right in 1usize..7, seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 0).rng();
            let adj: Vec<Vec<usize>> = (0..left)
                .map(|_| (0..right).filter(|_| rng.random_bool(0.35)).collect())
                .collect();
            prop_assert_eq!(hopcroft_karp(&adj, right), brute_bipartite(&adj, right));
        }

        #[test]
        fn blossom_is_maximum(n in 1usize..15, p in 0.1f64..0.6, seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 1).rng();
            let mut adj = vec![vec![false; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(p) {
                        adj[i][j] = true;
                        adj[j][i] = true;
                    }
                }
            }
            let best = brute_general(&adj);
            prop_assert_eq!(blossom_max_matching(&adj), best);
            if n % 2 == 0 {
                prop_assert_eq!(has_perfect_matching_exhaustive(&adj), 2 * best == n);
            }
        }
    }
}
