/// Size of a maximum matching in a bipartite graph given as left-side
/// adjacency lists into `0..right_count`.
///
/// Augmenting-path search (Kuhn) visiting neighbours in list order, so the
/// result is deterministic for a given adjacency.
pub fn maximum_bipartite_matching(adjacency: &[Vec<usize>], right_count: usize) -> usize {
    let mut match_right: Vec<Option<usize>> = vec![None; right_count];
    let mut visited = vec![usize::MAX; right_count];
    let mut size = 0;
    for left in 0..adjacency.len() {
        if augment(left, left, adjacency, &mut match_right, &mut visited) {
            size += 1;
        }
    }
    size
}

fn augment(
    left: usize,
    round: usize,
    adjacency: &[Vec<usize>],
    match_right: &mut [Option<usize>],
    visited: &mut [usize],
) -> bool {
    // Iterative DFS over alternating paths: stack holds (left vertex, next
    // neighbour index) and the right vertex used to reach it.
    let mut stack: Vec<(usize, usize, Option<usize>)> = vec![(left, 0, None)];
    while let Some(&mut (u, ref mut next, _)) = stack.last_mut() {
        if *next >= adjacency[u].len() {
            stack.pop();
            continue;
        }
        let v = adjacency[u][*next];
        *next += 1;
        if visited[v] == round {
            continue;
        }
        visited[v] = round;
        match match_right[v] {
            None => {
                // Flip the path: each left vertex on the stack takes the
                // right vertex recorded by its successor.
                let mut right = v;
                while let Some((u, _, via)) = stack.pop() {
                    match_right[right] = Some(u);
                    match via {
                        Some(r) => right = r,
                        None => break,
                    }
                }
                return true;
            }
            Some(owner) => stack.push((owner, 0, Some(v))),
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive maximum matching for tiny graphs.
    fn brute_force(adjacency: &[Vec<usize>], right_count: usize) -> usize {
        fn go(i: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if i == adj.len() {
                return 0;
            }
            let mut best = go(i + 1, adj, used);
            for &v in &adj[i] {
                if !used[v] {
                    used[v] = true;
                    best = best.max(1 + go(i + 1, adj, used));
                    used[v] = false;
                }
            }
            best
        }
        go(0, adjacency, &mut vec![false; right_count])
    }

    #[test]
    fn small_cases() {
        assert_eq!(maximum_bipartite_matching(&[], 3), 0);
        assert_eq!(maximum_bipartite_matching(&[vec![0, 1]], 2), 1);
        // Needs one augmentation to reach 2.
        assert_eq!(maximum_bipartite_matching(&[vec![0], vec![0, 1]], 2), 2);
        assert_eq!(maximum_bipartite_matching(&[vec![0, 1], vec![0]], 2), 2);
    }

    #[test]
    fn agrees_with_brute_force_on_random_graphs() {
        for seed in 0..500u64 {
            let l = (crate::rng::split(seed, 0) % 6) as usize;
            let r = (crate::rng::split(seed, 1) % 6) as usize + 1;
            let adj: Vec<Vec<usize>> = (0..l)
                .map(|i| {
                    (0..r)
                        .filter(|&j| crate::rng::split(seed, (i * 7 + j + 2) as u64).is_multiple_of(3))
                        .collect()
                })
                .collect();
            assert_eq!(maximum_bipartite_matching(&adj, r), brute_force(&adj, r), "seed {seed}");
        }
    }
}
