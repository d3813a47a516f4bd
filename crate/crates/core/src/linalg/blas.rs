//! Small dense kernels on nalgebra storage.
//!
//! Matrix products go through `matrixmultiply`, which accepts arbitrary
//! strides, so transposed operands and sub-views never need to be copied.

use nalgebra::{DMatrix, Dyn, Matrix, Storage, StorageMut};

/// Operand orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

/// `c = alpha * op(a) * op(b) + beta * c`.
///
/// When `beta == 0` the previous contents of `c` are not read.
pub fn gemm<SA, SB, SC>(
    alpha: f64,
    a: &Matrix<f64, Dyn, Dyn, SA>,
    ta: Op,
    b: &Matrix<f64, Dyn, Dyn, SB>,
    tb: Op,
    beta: f64,
    c: &mut Matrix<f64, Dyn, Dyn, SC>,
) where
    SA: Storage<f64, Dyn, Dyn>,
    SB: Storage<f64, Dyn, Dyn>,
    SC: StorageMut<f64, Dyn, Dyn>,
{
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let (a_rs, a_cs) = a.strides();
    let (b_rs, b_cs) = b.strides();
    let (m, k, rsa, csa) = match ta {
        Op::N => (ar, ac, a_rs, a_cs),
        Op::T => (ac, ar, a_cs, a_rs),
    };
    let (kb, n, rsb, csb) = match tb {
        Op::N => (br, bc, b_rs, b_cs),
        Op::T => (bc, br, b_cs, b_rs),
    };
    assert_eq!(k, kb, "gemm inner dimensions");
    assert_eq!(c.shape(), (m, n), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.fill(0.0);
        } else {
            *c *= beta;
        }
        return;
    }
    let (c_rs, c_cs) = c.strides();
    // SAFETY: the pointers and strides come from live nalgebra storages whose
    // shapes were checked above; `c` is borrowed mutably and cannot alias `a`
    // or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.ptr(),
            rsa as isize,
            csa as isize,
            b.data.ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.data.ptr_mut(),
            c_rs as isize,
            c_cs as isize,
        );
    }
}

/// `op(a) * op(b)` into a new matrix.
pub fn matmul<SA, SB>(
    a: &Matrix<f64, Dyn, Dyn, SA>,
    ta: Op,
    b: &Matrix<f64, Dyn, Dyn, SB>,
    tb: Op,
) -> DMatrix<f64>
where
    SA: Storage<f64, Dyn, Dyn>,
    SB: Storage<f64, Dyn, Dyn>,
{
    let m = if ta == Op::N { a.nrows() } else { a.ncols() };
    let n = if tb == Op::N { b.ncols() } else { b.nrows() };
    let mut c = DMatrix::zeros(m, n);
    gemm(1.0, a, ta, b, tb, 0.0, &mut c);
    c
}

const TRSM_BLOCK: usize = 64;

/// Solves `L X = B` in place, `L` lower triangular (upper part ignored).
pub fn trsm_lower(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    assert_eq!(b.nrows(), n, "trsm dimensions");
    let mut start = 0;
    while start < n {
        let end = (start + TRSM_BLOCK).min(n);
        for c in 0..b.ncols() {
            let col = &mut b.column_mut(c);
            for p in start..end {
                let x = col[p] / l[(p, p)];
                col[p] = x;
                if x != 0.0 {
                    for i in p + 1..end {
                        col[i] -= l[(i, p)] * x;
                    }
                }
            }
        }
        if end < n {
            let (solved, rest) = b.rows_range_pair_mut(start..end, end..n);
            let l_panel = l.view((end, start), (n - end, end - start));
            gemm(-1.0, &l_panel, Op::N, &solved, Op::N, 1.0, &mut { rest });
        }
        start = end;
    }
}

/// Solves `L^T X = B` in place, `L` lower triangular (upper part ignored).
pub fn trsm_lower_t(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    assert_eq!(b.nrows(), n, "trsm dimensions");
    let mut end = n;
    while end > 0 {
        let start = end.saturating_sub(TRSM_BLOCK);
        for c in 0..b.ncols() {
            let col = &mut b.column_mut(c);
            for i in (start..end).rev() {
                let mut s = col[i];
                for p in i + 1..end {
                    s -= l[(p, i)] * col[p];
                }
                col[i] = s / l[(i, i)];
            }
        }
        if start > 0 {
            let (rest, solved) = b.rows_range_pair_mut(0..start, start..end);
            let l_panel = l.view((start, 0), (end - start, start));
            gemm(-1.0, &l_panel, Op::T, &solved, Op::N, 1.0, &mut { rest });
        }
        end = start;
    }
}

/// Solves `X L^T = B` in place for `X`, `L` lower triangular.
pub fn trsm_right_lower_t(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let mut bt = b.transpose();
    trsm_lower(l, &mut bt);
    b.copy_from(&bt.transpose());
}
