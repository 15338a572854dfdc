//! Cosine k-NN lexical graph over token embeddings.

use crate::embeddings::EmbeddingMatrix;
use crate::vecops::{dot, norm2};
use crate::{Error, Result};

/// Weighted undirected graph in adjacency-list form. Edge weights are
/// cosine similarities clamped at zero; non-positive candidates produce
/// no edge, and zero-vector tokens are isolated nodes.
#[derive(Debug, Clone)]
pub struct LexicalGraph {
    n: usize,
    neighbors: Vec<Vec<(u32, f64)>>,
    degrees: Vec<f64>,
}

impl LexicalGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, node: usize) -> &[(u32, f64)] {
        &self.neighbors[node]
    }

    /// Sum of incident edge weights.
    pub fn degree(&self, node: usize) -> f64 {
        self.degrees[node]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub(crate) fn from_adjacency(n: usize, neighbors: Vec<Vec<(u32, f64)>>) -> LexicalGraph {
        let degrees = neighbors
            .iter()
            .map(|adj| adj.iter().map(|&(_, w)| w).sum())
            .collect();
        LexicalGraph { n, neighbors, degrees }
    }
}

/// Connects each token to its `k` nearest neighbors by cosine similarity
/// and symmetrizes by union. Requires at least k+1 tokens.
pub fn build_knn_graph(emb: &EmbeddingMatrix, k: usize, threads: usize) -> Result<LexicalGraph> {
    let n = emb.n_rows();
    if n < k + 1 {
        return Err(Error::InvalidInput(format!(
            "k-NN graph needs at least k+1 = {} tokens, got {n}",
            k + 1
        )));
    }
    let dim = emb.dim();

    // Pre-normalized rows; zero rows stay zero and end up isolated.
    let mut unit = vec![0.0; n * dim];
    let mut zero_rows = 0usize;
    for i in 0..n {
        let row = emb.row(i as u32);
        let norm = norm2(row);
        if norm > 0.0 {
            for (dst, &src) in unit[i * dim..(i + 1) * dim].iter_mut().zip(row) {
                *dst = src / norm;
            }
        } else {
            zero_rows += 1;
        }
    }
    if zero_rows > 0 {
        log::warn!("{zero_rows} zero-vector tokens are isolated in the lexical graph");
    }

    let knn_of = |i: usize| -> Vec<(u32, f64)> {
        let qi = &unit[i * dim..(i + 1) * dim];
        if qi.iter().all(|&v| v == 0.0) {
            return Vec::new();
        }
        // Fixed-size top-k selection, ties broken toward lower index.
        let mut top: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let cos = dot(qi, &unit[j * dim..(j + 1) * dim]);
            if top.len() == k && cos <= top.last().unwrap().0 {
                continue;
            }
            let pos = top.partition_point(|&(c, idx)| {
                c > cos || (c == cos && (idx as usize) < j)
            });
            top.insert(pos, (cos, j as u32));
            top.truncate(k);
        }
        top.into_iter()
            .filter(|&(cos, _)| cos > 0.0)
            .map(|(cos, j)| (j, cos))
            .collect()
    };

    let per_node: Vec<Vec<(u32, f64)>> = if threads <= 1 || n < 64 {
        (0..n).map(knn_of).collect()
    } else {
        let chunk = n.div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|tid| {
                    let knn_of = &knn_of;
                    scope.spawn(move || {
                        (tid * chunk..((tid + 1) * chunk).min(n))
                            .map(knn_of)
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap())
                .collect()
        })
    };

    // Symmetrize by union.
    let mut neighbors: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (i, adj) in per_node.iter().enumerate() {
        for &(j, w) in adj {
            insert_edge(&mut neighbors, i as u32, j, w);
            insert_edge(&mut neighbors, j, i as u32, w);
        }
    }
    for adj in neighbors.iter_mut() {
        adj.sort_by_key(|&(j, _)| j);
    }
    Ok(LexicalGraph::from_adjacency(n, neighbors))
}

fn insert_edge(neighbors: &mut [Vec<(u32, f64)>], from: u32, to: u32, w: f64) {
    let adj = &mut neighbors[from as usize];
    if !adj.iter().any(|&(j, _)| j == to) {
        adj.push((to, w));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingKind;

    fn matrix(rows: &[&[f64]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        let mut m = EmbeddingMatrix::zeros(EmbeddingKind::Svd, rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            m.row_mut(i as u32).copy_from_slice(r);
        }
        m
    }

    #[test]
    fn identical_vectors_form_complete_triangle() {
        let m = matrix(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let g = build_knn_graph(&m, 2, 1).unwrap();
        assert_eq!(g.edge_count(), 3);
        for i in 0..3 {
            assert_eq!(g.neighbors(i).len(), 2);
            for &(_, w) in g.neighbors(i) {
                assert!((w - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_vectors_produce_no_edges() {
        let m = matrix(&[
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.0, 1.0],
        ]);
        let g = build_knn_graph(&m, 2, 1).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn zero_vector_is_isolated() {
        let m = matrix(&[&[1.0, 0.1], &[1.0, 0.2], &[0.0, 0.0]]);
        let g = build_knn_graph(&m, 1, 1).unwrap();
        assert!(g.neighbors(2).is_empty());
        assert_eq!(g.degree(2), 0.0);
        assert!(!g.neighbors(0).is_empty());
    }

    #[test]
    fn too_few_tokens_errors() {
        let m = matrix(&[&[1.0], &[2.0]]);
        assert!(build_knn_graph(&m, 2, 1).is_err());
    }

    #[test]
    fn neighbor_lists_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 50;
        let dim = 10;
        let k = 5;
        let mut m = EmbeddingMatrix::zeros(EmbeddingKind::Svd, n, dim);
        for i in 0..n {
            for v in m.row_mut(i as u32).iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let g = build_knn_graph(&m, k, 1).unwrap();

        // Exhaustive pairwise oracle.
        let unit: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let r = m.row(i as u32);
                let norm = norm2(r);
                r.iter().map(|v| v / norm).collect()
            })
            .collect();
        let mut expect: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            let mut sims: Vec<(f64, u32)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dot(&unit[i], &unit[j]), j as u32))
                .collect();
            sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            for &(cos, j) in sims.iter().take(k) {
                if cos > 0.0 {
                    expect[i].push((j, cos));
                }
            }
        }
        let mut sym: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (i, adj) in expect.iter().enumerate() {
            for &(j, w) in adj {
                if !sym[i].iter().any(|&(x, _)| x == j) {
                    sym[i].push((j, w));
                }
                if !sym[j as usize].iter().any(|&(x, _)| x == i as u32) {
                    sym[j as usize].push((i as u32, w));
                }
            }
        }
        for adj in sym.iter_mut() {
            adj.sort_by_key(|&(j, _)| j);
        }
        for i in 0..n {
            let got: Vec<u32> = g.neighbors(i).iter().map(|&(j, _)| j).collect();
            let want: Vec<u32> = sym[i].iter().map(|&(j, _)| j).collect();
            assert_eq!(got, want, "node {i}");
            for (a, b) in g.neighbors(i).iter().zip(&sym[i]) {
                assert!((a.1 - b.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parallel_matches_single_thread() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 80;
        let mut m = EmbeddingMatrix::zeros(EmbeddingKind::Svd, n, 6);
        for i in 0..n {
            for v in m.row_mut(i as u32).iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let a = build_knn_graph(&m, 4, 1).unwrap();
        let b = build_knn_graph(&m, 4, 3).unwrap();
        for i in 0..n {
            assert_eq!(a.neighbors(i), b.neighbors(i));
        }
    }
}
