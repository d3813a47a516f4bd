//! Fixed-accuracy low-rank compression.
//!
//! A dense tile `A` is compressed to `U V^T` with
//! `||A - U V^T||_F <= eps ||A||_F`, keeping the smallest rank the singular
//! values allow. The singular values come from a truncated SVD of `A`
//! projected on the leading columns of a column-pivoted QR factorization;
//! the pivoted QR is stopped as soon as its residual is a small fraction of
//! the error budget, so the cost scales with the rank, not with the tile.
//! The two error contributions are orthogonal and their squares add, which
//! keeps the bound exact.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::linalg::blas::{matmul, Op};
use crate::tile::LowRankTile;

/// Share of the error budget left to the pivoted QR stage.
const QR_SHARE: f64 = 0.25;

/// Compresses `a` to relative Frobenius accuracy `eps`.
pub fn compress_tile(a: &DMatrix<f64>, eps: f64) -> Result<LowRankTile> {
    check_eps(eps)?;
    compress_to_tolerance(a, eps * a.norm())
}

/// Compresses `a` so that `||a - U V^T||_F <= tol`.
pub fn compress_to_tolerance(a: &DMatrix<f64>, tol: f64) -> Result<LowRankTile> {
    let (m, n) = a.shape();
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Compression("tile has non-finite entries".into()));
    }
    let total2 = a.norm_squared();
    if total2 <= tol * tol {
        return Ok(LowRankTile::zero(m, n));
    }
    let qr = PivotedQr::factor(a.clone(), QR_SHARE * tol);
    let rank = qr.rank();
    if rank == 0 {
        return Ok(LowRankTile::zero(m, n));
    }
    let budget2 = (tol * tol - qr.residual2).max(0.0);
    let r = qr.r_unpermuted();
    let q = qr.q();
    let (uc, sigma, vc) = truncated_svd(r, budget2)?;
    // U = Q Uc diag(sigma), V = Vc
    let mut u = matmul(&q, Op::N, &uc, Op::N);
    scale_columns(&mut u, &sigma);
    LowRankTile::new(u, vc)
}

/// Compresses `u1 v1^T + u2 v2^T` to relative accuracy `eps` of the sum.
pub fn recompress(
    u1: &DMatrix<f64>,
    v1: &DMatrix<f64>,
    u2: &DMatrix<f64>,
    v2: &DMatrix<f64>,
    eps: f64,
) -> Result<LowRankTile> {
    check_eps(eps)?;
    recompress_impl(u1, v1, u2, v2, Threshold::Relative(eps))
}

/// Compresses `u1 v1^T + u2 v2^T` with absolute Frobenius error `tol`.
pub fn recompress_to_tolerance(
    u1: &DMatrix<f64>,
    v1: &DMatrix<f64>,
    u2: &DMatrix<f64>,
    v2: &DMatrix<f64>,
    tol: f64,
) -> Result<LowRankTile> {
    recompress_impl(u1, v1, u2, v2, Threshold::Absolute(tol))
}

enum Threshold {
    Relative(f64),
    Absolute(f64),
}

fn recompress_impl(
    u1: &DMatrix<f64>,
    v1: &DMatrix<f64>,
    u2: &DMatrix<f64>,
    v2: &DMatrix<f64>,
    threshold: Threshold,
) -> Result<LowRankTile> {
    let (m, n) = (u1.nrows(), v1.nrows());
    if u2.nrows() != m || v2.nrows() != n || u1.ncols() != v1.ncols() || u2.ncols() != v2.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "cannot add {}x{} (rank {}) and {}x{} (rank {}) factorizations",
            m,
            n,
            u1.ncols(),
            u2.nrows(),
            v2.nrows(),
            u2.ncols()
        )));
    }
    let k = u1.ncols() + u2.ncols();
    if k == 0 {
        return Ok(LowRankTile::zero(m, n));
    }
    let u = hstack(u1, u2);
    let v = hstack(v1, v2);
    let (qu, ru) = thin_qr(u);
    let (qv, rv) = thin_qr(v);
    let core = matmul(&ru, Op::N, &rv, Op::T);
    let tol = match threshold {
        Threshold::Relative(eps) => eps * core.norm(),
        Threshold::Absolute(tol) => tol,
    };
    // The sum is only known to rounding precision of its addends.
    let floor = ROUNDING_FLOOR * f64::EPSILON * (product_norm(u1, v1) + product_norm(u2, v2));
    let tol = tol.max(floor);
    if core.norm_squared() <= tol * tol {
        return Ok(LowRankTile::zero(m, n));
    }
    let (uc, sigma, vc) = truncated_svd(core, tol * tol)?;
    let mut u = matmul(&qu, Op::N, &uc, Op::N);
    scale_columns(&mut u, &sigma);
    let v = matmul(&qv, Op::N, &vc, Op::N);
    LowRankTile::new(u, v)
}

/// Multiple of machine epsilon (relative to the addends) below which a
/// recompressed sum is treated as zero.
const ROUNDING_FLOOR: f64 = 16.0;

fn product_norm(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    if u.ncols() == 0 {
        return 0.0;
    }
    let uu = matmul(u, Op::T, u, Op::N);
    let vv = matmul(v, Op::T, v, Op::N);
    uu.component_mul(&vv).sum().max(0.0).sqrt()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("accuracy {eps} outside (0, 1)")))
    }
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn thin_qr(a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.qr();
    (qr.q(), qr.r())
}

fn scale_columns(m: &mut DMatrix<f64>, s: &[f64]) {
    for (j, &sj) in s.iter().enumerate() {
        m.column_mut(j).scale_mut(sj);
    }
}

/// Smallest `k` such that the tail `sum_{i >= k} sigma_i^2 <= budget2`;
/// `sigma` sorted in decreasing order.
pub fn truncation_rank(sigma: &[f64], budget2: f64) -> usize {
    let mut tail = 0.0;
    let mut k = sigma.len();
    while k > 0 {
        let next = tail + sigma[k - 1] * sigma[k - 1];
        if next > budget2 {
            break;
        }
        tail = next;
        k -= 1;
    }
    k
}

/// SVD of `a` truncated to the tail budget: `(U_k, sigma_k, V_k)` with
/// singular values in decreasing order.
///
/// Strongly rectangular inputs are first reduced to their square triangular
/// factor, which is much cheaper than bidiagonalizing the full matrix.
fn truncated_svd(a: DMatrix<f64>, budget2: f64) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    if 2 * m < 3 * n && 2 * n < 3 * m || m.min(n) == 0 {
        return square_truncated_svd(a, budget2);
    }
    if m > n {
        // a = Q R, R = U S V^T
        let (q, r) = thin_qr(a);
        let (u, s, v) = square_truncated_svd(r, budget2)?;
        Ok((matmul(&q, Op::N, &u, Op::N), s, v))
    } else {
        // a^T = Q R, a = R^T Q^T, R^T = U S W^T
        let (q, r) = thin_qr(a.transpose());
        let (u, s, w) = square_truncated_svd(r.transpose(), budget2)?;
        Ok((u, s, matmul(&q, Op::N, &w, Op::N)))
    }
}

fn square_truncated_svd(
    a: DMatrix<f64>,
    budget2: f64,
) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let scale = a.norm();
    if scale == 0.0 || m.min(n) == 0 {
        return Ok((DMatrix::zeros(m, 0), Vec::new(), DMatrix::zeros(n, 0)));
    }
    let tol = budget2.max(0.0).sqrt() / scale;
    let (u, sigma, v, back) = accurate_svd(a / scale, 0.5 * tol)?;
    // ||A - U_k S_k V_k^T|| <= backward error + tail, so the tail gets
    // what the decomposition itself did not use.
    let tail = (tol - back).max(0.0);
    let k = truncation_rank(&sigma, tail * tail);
    let sigma = sigma[..k].iter().map(|s| s * scale).collect();
    Ok((u.columns(0, k).into_owned(), sigma, v.columns(0, k).into_owned()))
}

/// SVD of a unit-norm matrix with singular values decreasing, and its
/// measured backward error `||a - U S V^T||_F`.
///
/// The bidiagonal QR iteration is fast but its backward error is not
/// always at rounding level, and it occasionally deflates too early and
/// misses the input entirely. Whenever its error exceeds `target` the
/// slower one-sided Jacobi method is used instead.
fn accurate_svd(a: DMatrix<f64>, target: f64) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>, f64)> {
    let (m, n) = a.shape();
    let fast = SVD::try_new(a.clone(), true, true, 5.0 * f64::EPSILON, 0).and_then(|svd| {
        let (u, v_t) = (svd.u?, svd.v_t?);
        let s = svd.singular_values;
        if s.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let sigma: Vec<f64> = order.iter().map(|&i| s[i]).collect();
        let u = DMatrix::from_fn(m, order.len(), |i, j| u[(i, order[j])]);
        let v = DMatrix::from_fn(n, order.len(), |i, j| v_t[(order[j], i)]);
        Some((u, sigma, v))
    });
    if let Some((u, sigma, v)) = fast {
        let back = backward_error(&a, &u, &sigma, &v);
        if back <= target {
            return Ok((u, sigma, v, back));
        }
    }
    let (u, sigma, v) = if m >= n {
        jacobi_svd(a.clone())
    } else {
        let (u, s, v) = jacobi_svd(a.transpose());
        (v, s, u)
    };
    let back = backward_error(&a, &u, &sigma, &v);
    if back.is_finite() {
        Ok((u, sigma, v, back))
    } else {
        Err(Error::Compression(format!("SVD of a {m}x{n} matrix did not converge")))
    }
}

fn backward_error(a: &DMatrix<f64>, u: &DMatrix<f64>, sigma: &[f64], v: &DMatrix<f64>) -> f64 {
    let mut us = u.clone();
    scale_columns(&mut us, sigma);
    (matmul(&us, Op::N, v, Op::T) - a).norm()
}

/// One-sided (Hestenes) Jacobi SVD of a matrix with `m >= n`: column pairs
/// are rotated until all are orthogonal to working precision.
fn jacobi_svd(mut w: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    const MAX_SWEEPS: usize = 60;
    let n = w.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (cp, cq) = (w.column(p), w.column(q));
                let alpha = cp.norm_squared();
                let beta = cq.norm_squared();
                let gamma = cp.dot(&cq);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = DMatrix::from_fn(w.nrows(), n, |i, k| {
        let s = norms[order[k]];
        if s > 0.0 {
            w[(i, order[k])] / s
        } else {
            0.0
        }
    });
    let v = DMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    (u, sigma, v)
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Householder QR with column pivoting, stopped once the Frobenius norm of
/// the unfactored block drops to `stop`.
struct PivotedQr {
    /// Reflectors below the diagonal, `R` on and above it.
    work: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    /// Squared Frobenius norm of the discarded trailing block.
    residual2: f64,
}

impl PivotedQr {
    fn factor(mut w: DMatrix<f64>, stop: f64) -> Self {
        let (m, n) = w.shape();
        let stop2 = stop * stop;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut vn1: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
        let mut vn2 = vn1.clone();
        let mut tau = Vec::new();
        let tol3z = f64::EPSILON.sqrt();
        let steps = m.min(n);
        let mut residual2 = 0.0;
        for p in 0..steps {
            let est: f64 = vn1[p..].iter().map(|v| v * v).sum();
            if est <= stop2 {
                let exact = trailing_norm2(&w, p);
                if exact <= stop2 {
                    residual2 = exact;
                    break;
                }
                for j in p..n {
                    vn1[j] = w.view((p, j), (m - p, 1)).norm();
                    vn2[j] = vn1[j];
                }
            }
            let pivot = p + argmax(&vn1[p..]);
            if pivot != p {
                w.swap_columns(p, pivot);
                perm.swap(p, pivot);
                vn1.swap(p, pivot);
                vn2.swap(p, pivot);
            }
            let t = householder(&mut w, p);
            apply_reflector_left(&mut w, p, t, p + 1);
            tau.push(t);
            for j in p + 1..n {
                if vn1[j] == 0.0 {
                    continue;
                }
                let ratio = w[(p, j)].abs() / vn1[j];
                let temp = (1.0 - ratio * ratio).max(0.0);
                let temp2 = temp * (vn1[j] / vn2[j]).powi(2);
                if temp2 <= tol3z {
                    vn1[j] = if p + 1 < m {
                        w.view((p + 1, j), (m - p - 1, 1)).norm()
                    } else {
                        0.0
                    };
                    vn2[j] = vn1[j];
                } else {
                    vn1[j] *= temp.sqrt();
                }
            }
        }
        Self {
            work: w,
            tau,
            perm,
            residual2,
        }
    }

    fn rank(&self) -> usize {
        self.tau.len()
    }

    /// `R` (rank x n) with columns returned to their original order.
    fn r_unpermuted(&self) -> DMatrix<f64> {
        let r = self.rank();
        let n = self.work.ncols();
        let mut out = DMatrix::zeros(r, n);
        for (j, &orig) in self.perm.iter().enumerate() {
            for i in 0..r.min(j + 1) {
                out[(i, orig)] = self.work[(i, j)];
            }
        }
        out
    }

    /// The first `rank` columns of `Q`.
    fn q(&self) -> DMatrix<f64> {
        let m = self.work.nrows();
        let r = self.rank();
        let mut q = DMatrix::identity(m, r);
        for p in (0..r).rev() {
            let t = self.tau[p];
            if t == 0.0 {
                continue;
            }
            for j in p..r {
                let mut s = q[(p, j)];
                for i in p + 1..m {
                    s += self.work[(i, p)] * q[(i, j)];
                }
                s *= t;
                q[(p, j)] -= s;
                for i in p + 1..m {
                    q[(i, j)] -= s * self.work[(i, p)];
                }
            }
        }
        q
    }
}

fn trailing_norm2(w: &DMatrix<f64>, p: usize) -> f64 {
    let (m, n) = w.shape();
    if p >= m || p >= n {
        return 0.0;
    }
    w.view((p, p), (m - p, n - p)).norm_squared()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Builds the reflector annihilating `w[p+1.., p]`; stores `beta` at
/// `w[p, p]`, the reflector tail below it, and returns `tau`.
fn householder(w: &mut DMatrix<f64>, p: usize) -> f64 {
    let m = w.nrows();
    let alpha = w[(p, p)];
    let xnorm = if p + 1 < m {
        w.view((p + 1, p), (m - p - 1, 1)).norm()
    } else {
        0.0
    };
    if xnorm == 0.0 {
        return 0.0;
    }
    let beta = -alpha.signum() * alpha.hypot(xnorm);
    let t = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for i in p + 1..m {
        w[(i, p)] *= scale;
    }
    w[(p, p)] = beta;
    t
}

/// Applies `I - tau v v^T` (reflector stored in column `p`) to columns
/// `from..` of rows `p..`.
fn apply_reflector_left(w: &mut DMatrix<f64>, p: usize, t: f64, from: usize) {
    if t == 0.0 {
        return;
    }
    let (m, n) = w.shape();
    let (head, mut tail) = w.columns_range_pair_mut(p, from..n);
    let v = head.rows_range(p + 1..m);
    for mut col in tail.column_iter_mut() {
        let mut s = col[p];
        let below = col.rows_range(p + 1..m);
        s += v.dot(&below);
        s *= t;
        col[p] -= s;
        col.rows_range_mut(p + 1..m).axpy(-s, &v, 1.0);
    }
}
