//! Seeded random-walk label propagation (personalized PageRank fixed
//! point) over the lexical graph.

use crate::{Error, Result};

use super::LexicalGraph;

/// Iterates s = beta * T s + (1 - beta) * e to a fixed point, where T is
/// the degree-normalized transition matrix and e is uniform over the
/// seeds. Mass on dangling (isolated or zero-degree) nodes is redirected
/// to the restart distribution, so the result sums to 1.
pub fn random_walk_scores(
    graph: &LexicalGraph,
    seeds: &[usize],
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = graph.n();
    if seeds.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    if seeds.iter().any(|&s| s >= n) {
        return Err(Error::InvalidInput("seed index out of range".into()));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidInput(format!(
            "beta must be in [0, 1], got {beta}"
        )));
    }

    let mut restart = vec![0.0; n];
    let share = 1.0 / seeds.len() as f64;
    for &s in seeds {
        restart[s] += share;
    }

    let mut scores = restart.clone();
    let mut next = vec![0.0; n];
    for iter in 0..max_iter {
        next.fill(0.0);
        let mut dangling = 0.0;
        for u in 0..n {
            let deg = graph.degree(u);
            if deg <= 0.0 {
                dangling += scores[u];
                continue;
            }
            let outflow = scores[u] / deg;
            for &(v, w) in graph.neighbors(u) {
                next[v as usize] += outflow * w;
            }
        }
        let mut diff = 0.0;
        for v in 0..n {
            let updated = beta * (next[v] + dangling * restart[v]) + (1.0 - beta) * restart[v];
            diff += (updated - scores[v]).abs();
            next[v] = updated;
        }
        std::mem::swap(&mut scores, &mut next);
        if diff < tol {
            return Ok(scores);
        }
        let _ = iter;
    }
    Err(Error::NoConvergence(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(u32, u32, f64)]) -> LexicalGraph {
        let mut adj = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            adj[a as usize].push((b, w));
            adj[b as usize].push((a, w));
        }
        LexicalGraph::from_adjacency(n, adj)
    }

    #[test]
    fn two_node_symmetric_split() {
        let g = graph(2, &[(0, 1, 1.0)]);
        let s = random_walk_scores(&g, &[0, 1], 0.9, 1e-12, 10_000).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-9);
        assert!((s[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn beta_zero_returns_restart() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 0.5)]);
        let s = random_walk_scores(&g, &[1], 0.0, 1e-12, 100).unwrap();
        assert!((s[1] - 1.0).abs() < 1e-12);
        assert!(s[0].abs() < 1e-12 && s[2].abs() < 1e-12);
    }

    #[test]
    fn sums_to_one_and_nonnegative() {
        let g = graph(
            5,
            &[(0, 1, 1.0), (1, 2, 0.3), (2, 3, 0.7), (0, 3, 0.2)],
        );
        // node 4 is isolated (dangling)
        let s = random_walk_scores(&g, &[0], 0.9, 1e-10, 10_000).unwrap();
        let total: f64 = s.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "sum {total}");
        assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn matches_dense_power_iteration_oracle() {
        use rand::{Rng, SeedableRng};
        for seed in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 10;
            let mut edges = Vec::new();
            for a in 0..n as u32 {
                for b in (a + 1)..n as u32 {
                    if rng.gen_bool(0.4) {
                        edges.push((a, b, rng.gen_range(0.1..1.0)));
                    }
                }
            }
            let g = graph(n, &edges);
            let seeds = vec![0usize, 3];
            let beta = 0.85;
            let got = random_walk_scores(&g, &seeds, beta, 1e-14, 100_000).unwrap();

            // Dense oracle: build T as a dense matrix and iterate.
            let mut t = vec![0.0; n * n]; // t[v][u] = w(u,v)/deg(u)
            let mut deg = vec![0.0; n];
            for &(a, b, w) in &edges {
                deg[a as usize] += w;
                deg[b as usize] += w;
            }
            for &(a, b, w) in &edges {
                t[b as usize * n + a as usize] += w / deg[a as usize];
                t[a as usize * n + b as usize] += w / deg[b as usize];
            }
            let mut e = vec![0.0; n];
            for &s in &seeds {
                e[s] += 1.0 / seeds.len() as f64;
            }
            let mut s = e.clone();
            for _ in 0..200_000 {
                let mut nxt = vec![0.0; n];
                let mut dangling = 0.0;
                for u in 0..n {
                    if deg[u] <= 0.0 {
                        dangling += s[u];
                        continue;
                    }
                    for v in 0..n {
                        nxt[v] += t[v * n + u] * s[u];
                    }
                }
                let mut diff = 0.0;
                for v in 0..n {
                    let val = beta * (nxt[v] + dangling * e[v]) + (1.0 - beta) * e[v];
                    diff += (val - s[v]).abs();
                    nxt[v] = val;
                }
                s = nxt;
                if diff < 1e-15 {
                    break;
                }
            }
            for (a, b) in got.iter().zip(&s) {
                assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn empty_seed_set_errors() {
        let g = graph(2, &[(0, 1, 1.0)]);
        assert!(matches!(
            random_walk_scores(&g, &[], 0.9, 1e-6, 100),
            Err(Error::EmptySeedSet)
        ));
    }

    #[test]
    fn non_convergence_reports_iterations() {
        let g = graph(
            4,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)],
        );
        let err = random_walk_scores(&g, &[0], 0.99, 1e-30, 3).unwrap_err();
        assert!(matches!(err, Error::NoConvergence(3)));
    }

    #[test]
    fn isolated_node_does_not_perturb_others() {
        let edges = [(0u32, 1, 0.8), (1u32, 2, 0.6), (0u32, 2, 0.3)];
        let g_small = graph(3, &edges);
        let g_big = graph(4, &edges); // node 3 isolated, non-seed
        let tol = 1e-12;
        let a = random_walk_scores(&g_small, &[0], 0.9, tol, 100_000).unwrap();
        let b = random_walk_scores(&g_big, &[0], 0.9, tol, 100_000).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() <= 1e-9);
        }
        assert!(b[3].abs() < 1e-12);
    }

    #[test]
    fn permutation_equivariant() {
        let edges = [(0u32, 1, 0.8), (1u32, 2, 0.6), (2u32, 3, 0.4)];
        let g = graph(4, &edges);
        let s = random_walk_scores(&g, &[1], 0.9, 1e-13, 100_000).unwrap();
        // Relabel nodes by the permutation p: i -> (i + 1) % 4.
        let p = |i: u32| (i + 1) % 4;
        let edges2: Vec<(u32, u32, f64)> =
            edges.iter().map(|&(a, b, w)| (p(a), p(b), w)).collect();
        let g2 = graph(4, &edges2);
        let s2 = random_walk_scores(&g2, &[p(1) as usize], 0.9, 1e-13, 100_000).unwrap();
        for i in 0..4u32 {
            assert!((s[i as usize] - s2[p(i) as usize]).abs() < 1e-12);
        }
    }
}
