//! Truncated SVD of the sparse symmetric PPMI matrix by randomized
//! subspace iteration with Rayleigh-Ritz extraction.
//!
//! For a symmetric matrix the singular values are the eigenvalue
//! magnitudes and the left singular vectors are the eigenvectors ordered
//! by magnitude, so the Ritz pairs of the iterated subspace give the
//! truncated factorization directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

use super::{EmbeddingKind, EmbeddingMatrix, PpmiMatrix};

#[derive(Debug, Clone)]
pub struct SvdConfig {
    /// Extra subspace columns beyond the requested rank.
    pub oversample: usize,
    pub max_iter: usize,
    /// Relative stabilization tolerance on the leading singular values.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            oversample: 10,
            max_iter: 300,
            tol: 1e-11,
            seed: 0x51D_EC0DE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub n: usize,
    pub k: usize,
    /// n x k, column-orthonormal up to numerical rank; rank-deficient
    /// columns are zeroed.
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
    /// n x k; for a symmetric input v_j = sign(lambda_j) u_j.
    pub v: Vec<f64>,
}

/// Computes the top-`k` singular triplets of the sparse symmetric matrix.
pub fn truncated_svd(m: &PpmiMatrix, k: usize, cfg: &SvdConfig) -> Result<TruncatedSvd> {
    let n = m.n();
    if k == 0 {
        return Err(Error::InvalidInput("svd rank must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let l = n.min(k + cfg.oversample).max(1.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Column-major n x l subspace basis.
    let mut q = vec![0.0; n * l];
    for v in q.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    orthonormalize_columns(&mut q, n, l, &mut rng);

    let mut y = vec![0.0; n * l];
    let mut prev_sigma: Option<Vec<f64>> = None;
    let mut eig = (Vec::new(), Vec::new());
    for _ in 0..cfg.max_iter {
        for j in 0..l {
            let (x, out) = split_col_pair(&q, &mut y, n, j);
            m.matvec(x, out);
        }
        // Rayleigh-Ritz: T = Q^T (M Q), symmetrized against round-off.
        let mut t = vec![0.0; l * l];
        for a in 0..l {
            for b in a..l {
                let dot = dot(&q[a * n..(a + 1) * n], &y[b * n..(b + 1) * n]);
                t[a * l + b] = dot;
                t[b * l + a] = dot;
            }
        }
        eig = jacobi_eigh(&t, l);
        let mut order: Vec<usize> = (0..l).collect();
        order.sort_by(|&a, &b| {
            eig.0[b]
                .abs()
                .partial_cmp(&eig.0[a].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        let sigma: Vec<f64> = order.iter().take(k).map(|&i| eig.0[i].abs()).collect();

        let converged = match &prev_sigma {
            Some(prev) => {
                let scale = sigma.first().copied().unwrap_or(0.0).max(1e-300);
                sigma
                    .iter()
                    .zip(prev)
                    .all(|(a, b)| (a - b).abs() <= cfg.tol * scale)
            }
            None => false,
        };
        prev_sigma = Some(sigma);
        if converged {
            break;
        }
        std::mem::swap(&mut q, &mut y);
        orthonormalize_columns(&mut q, n, l, &mut rng);
    }

    // Assemble U = Q W for the top-k Ritz pairs of the final subspace.
    let (theta, w) = eig;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| {
        theta[b]
            .abs()
            .partial_cmp(&theta[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut u = vec![0.0; n * k];
    let mut v = vec![0.0; n * k];
    let mut sigma = vec![0.0; k];
    let sigma_max = order
        .first()
        .map(|&i| theta[i].abs())
        .unwrap_or(0.0);
    for (col, &ridx) in order.iter().take(k).enumerate() {
        let lam = theta[ridx];
        if lam.abs() <= sigma_max * 1e-12 {
            continue; // below numerical rank: leave the column zero
        }
        sigma[col] = lam.abs();
        let dst = &mut u[col * n..(col + 1) * n];
        for a in 0..l {
            let wc = w[a * l + ridx];
            if wc == 0.0 {
                continue;
            }
            let src = &q[a * n..(a + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wc * s;
            }
        }
        // Deterministic sign: largest-magnitude entry positive.
        let mut best = 0usize;
        for (i, val) in dst.iter().enumerate() {
            if val.abs() > dst[best].abs() {
                best = i;
            }
        }
        if dst[best] < 0.0 {
            for val in dst.iter_mut() {
                *val = -*val;
            }
        }
        let sgn = if lam < 0.0 { -1.0 } else { 1.0 };
        for (vd, ud) in v[col * n..(col + 1) * n].iter_mut().zip(dst.iter()) {
            *vd = sgn * *ud;
        }
    }

    Ok(TruncatedSvd { n, k, u, sigma, v })
}

/// Derives token embeddings as the rows of U truncated to `dim`
/// directions; singular values are not multiplied in. Rank-deficient
/// directions stay zero.
pub fn svd_embed(ppmi: &PpmiMatrix, dim: usize, cfg: &SvdConfig) -> Result<EmbeddingMatrix> {
    let svd = truncated_svd(ppmi, dim, cfg)?;
    let n = svd.n;
    // Transpose column-major U into row-major token vectors.
    let mut data = vec![0.0; n * dim];
    for col in 0..dim {
        for row in 0..n {
            data[row * dim + col] = svd.u[col * n + row];
        }
    }
    Ok(EmbeddingMatrix::from_data(EmbeddingKind::Svd, dim, data))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Borrows column `j` of `src` and column `j` of `dst` together.
fn split_col_pair<'a>(
    src: &'a [f64],
    dst: &'a mut [f64],
    n: usize,
    j: usize,
) -> (&'a [f64], &'a mut [f64]) {
    (&src[j * n..(j + 1) * n], &mut dst[j * n..(j + 1) * n])
}

/// Modified Gram-Schmidt with reorthogonalization; numerically dead
/// columns are replaced with fresh random directions so the basis keeps
/// full column count even for rank-deficient inputs.
fn orthonormalize_columns(q: &mut [f64], n: usize, l: usize, rng: &mut ChaCha8Rng) {
    let mut max_norm = 0.0f64;
    for j in 0..l {
        let norm = dot(&q[j * n..(j + 1) * n], &q[j * n..(j + 1) * n]).sqrt();
        max_norm = max_norm.max(norm);
    }
    let dead = max_norm * 1e-13 + 1e-300;

    for j in 0..l {
        let mut attempts = 0;
        loop {
            for _pass in 0..2 {
                for i in 0..j {
                    let proj = {
                        let qi = &q[i * n..(i + 1) * n];
                        let qj = &q[j * n..(j + 1) * n];
                        dot(qi, qj)
                    };
                    let (head, tail) = q.split_at_mut(j * n);
                    let qi = &head[i * n..(i + 1) * n];
                    let qj = &mut tail[..n];
                    for (x, y) in qj.iter_mut().zip(qi) {
                        *x -= proj * y;
                    }
                }
            }
            let qj = &mut q[j * n..(j + 1) * n];
            let norm = dot(qj, qj).sqrt();
            if norm > dead || attempts >= 4 {
                let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
                for x in qj.iter_mut() {
                    *x *= inv;
                }
                break;
            }
            for x in qj.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            attempts += 1;
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix.
/// Returns (eigenvalues, eigenvectors as columns, row-major n x n).
fn jacobi_eigh(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n <= 1 {
        return (m, v);
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        let scale: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum::<f64>() + off;
        if off <= scale * 1e-30 + 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    m[i * n + p] = c * aip - s * aiq;
                    m[i * n + q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = m[p * n + i];
                    let aqi = m[q * n + i];
                    m[p * n + i] = c * api - s * aqi;
                    m[q * n + i] = s * api + c * aqi;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    (eigvals, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_symmetric_nonneg(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = if rng.gen_bool(0.7) {
                    rng.gen_range(0.0..3.0)
                } else {
                    0.0
                };
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }

    fn reconstruct(svd: &TruncatedSvd) -> Vec<f64> {
        let n = svd.n;
        let mut out = vec![0.0; n * n];
        for c in 0..svd.k {
            let s = svd.sigma[c];
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += s * svd.u[c * n + i] * svd.v[c * n + j];
                }
            }
        }
        out
    }

    #[test]
    fn rank_one_exact() {
        let n = 6;
        let x: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dense[i * n + j] = x[i] * x[j];
            }
        }
        let m = PpmiMatrix::from_dense(n, &dense);
        let svd = truncated_svd(&m, 1, &SvdConfig::default()).unwrap();

        let norm = dot(&x, &x).sqrt();
        for i in 0..n {
            assert!((svd.u[i] - x[i] / norm).abs() < 1e-8, "component {i}");
        }
        let recon = reconstruct(&svd);
        for (a, b) in recon.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        for seed in [1u64, 2, 3] {
            let n = 8;
            let dense = random_symmetric_nonneg(n, seed);
            let m = PpmiMatrix::from_dense(n, &dense);
            let svd = truncated_svd(&m, n, &SvdConfig::default()).unwrap();
            let recon = reconstruct(&svd);
            let err: f64 = recon
                .iter()
                .zip(&dense)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-6, "seed {seed}: frobenius error {err}");
        }
    }

    #[test]
    fn u_columns_orthonormal() {
        let n = 12;
        let dense = random_symmetric_nonneg(n, 9);
        let m = PpmiMatrix::from_dense(n, &dense);
        let svd = truncated_svd(&m, 5, &SvdConfig::default()).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let d = dot(&svd.u[a * n..(a + 1) * n], &svd.u[b * n..(b + 1) * n]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-6, "({a},{b}): {d}");
            }
        }
    }

    #[test]
    fn rank_deficient_columns_zeroed() {
        // Rank-2 matrix, ask for 4 directions: the last two are zero.
        let n = 5;
        let mut dense = vec![0.0; n * n];
        for (w, x) in [
            (2.0, [1.0, 1.0, 0.0, 0.0, 0.0]),
            (1.0, [0.0, 0.0, 1.0, 1.0, 1.0]),
        ] {
            for i in 0..n {
                for j in 0..n {
                    dense[i * n + j] += w * x[i] * x[j];
                }
            }
        }
        let m = PpmiMatrix::from_dense(n, &dense);
        let svd = truncated_svd(&m, 4, &SvdConfig::default()).unwrap();
        assert!(svd.sigma[0] > 0.0 && svd.sigma[1] > 0.0);
        assert_eq!(svd.sigma[2], 0.0);
        assert!(svd.u[2 * n..4 * n].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_rank_errors() {
        let m = PpmiMatrix::from_dense(3, &vec![0.0; 9]);
        assert!(truncated_svd(&m, 0, &SvdConfig::default()).is_err());
    }

    #[test]
    fn svd_embed_shape_and_padding() {
        let n = 4;
        let dense = random_symmetric_nonneg(n, 5);
        let m = PpmiMatrix::from_dense(n, &dense);
        // dim exceeds n: trailing columns must be zero.
        let emb = svd_embed(&m, 6, &SvdConfig::default()).unwrap();
        assert_eq!(emb.n_rows(), n);
        assert_eq!(emb.dim(), 6);
        for i in 0..n as u32 {
            assert_eq!(emb.row(i)[4], 0.0);
            assert_eq!(emb.row(i)[5], 0.0);
        }
        assert!(emb.is_finite());
    }

    #[test]
    fn jacobi_matches_known_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let (vals, _) = jacobi_eigh(&[2.0, 1.0, 1.0, 2.0], 2);
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((sorted[0] - 1.0).abs() < 1e-12);
        assert!((sorted[1] - 3.0).abs() < 1e-12);
    }
}
