//! Maximum bipartite matching (Hopcroft–Karp) and the bottleneck assignment
//! built on top of it.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

/// Maximum matching in a bipartite graph with `n` left and `n` right
/// vertices. `adj[u]` lists the right neighbours of left vertex `u`.
///
/// Returns `match_left[u]` (right partner of `u`, or `usize::MAX`) and the
/// matching size.
pub fn hopcroft_karp(n_right: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n_left = adj.len();
    let mut match_left = vec![NIL; n_left];
    let mut match_right = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];
    let mut size = 0;

    loop {
        // BFS layering from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if match_left[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_right[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; n_left];
        for u in 0..n_left {
            if match_left[u] == NIL
                && augment(u, adj, &mut match_left, &mut match_right, &mut dist, &mut it)
            {
                size += 1;
            }
        }
    }
    (match_left, size)
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    dist: &mut [usize],
    it: &mut [usize],
) -> bool {
    // Iterative DFS along the BFS layers.
    let mut stack = vec![u];
    let mut path: Vec<(usize, usize)> = Vec::new();
    while let Some(&x) = stack.last() {
        let mut advanced = false;
        while it[x] < adj[x].len() {
            let v = adj[x][it[x]];
            it[x] += 1;
            let w = match_right[v];
            if w == NIL {
                path.push((x, v));
                for &(l, r) in &path {
                    match_left[l] = r;
                    match_right[r] = l;
                }
                return true;
            }
            if dist[w] == dist[x] + 1 {
                path.push((x, v));
                stack.push(w);
                advanced = true;
                break;
            }
        }
        if !advanced {
            dist[x] = usize::MAX;
            stack.pop();
            path.pop();
        }
    }
    false
}

/// Exact bottleneck assignment on a square cost matrix given row-major as
/// `cost[i * n + j]`: the permutation minimising `max_i cost(i, p(i))`.
///
/// Binary search over the sorted distinct costs, feasibility by perfect
/// matching on the edges at or below the candidate threshold.
pub fn bottleneck_assignment(n: usize, cost: &[f64]) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (0.0, Vec::new());
    }
    let mut levels: Vec<f64> = cost.to_vec();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();

    let feasible = |threshold: f64| -> Option<Vec<usize>> {
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| cost[i * n + j] <= threshold).collect())
            .collect();
        if adj.iter().any(Vec::is_empty) {
            return None;
        }
        let (m, size) = hopcroft_karp(n, &adj);
        (size == n).then_some(m)
    };

    // The largest level is always feasible (complete graph).
    let mut lo = 0usize;
    let mut hi = levels.len() - 1;
    let mut best = feasible(levels[hi]).expect("complete bipartite graph has a perfect matching");
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match feasible(levels[mid]) {
            Some(m) => {
                best = m;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    // `best` was produced at some level >= levels[lo]; recompute at the exact
    // optimum so the returned permutation realises it.
    if let Some(m) = feasible(levels[lo]) {
        best = m;
    }
    (levels[lo], best)
}
