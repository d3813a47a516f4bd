use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::compression::recompress_to_tolerance;
use crate::error::{Error, Result};
use crate::tile::{lower_index, lower_pairs, LowRankTile, Mode, Tile, TileGrid, TileMatrix};

use super::blas::{gemm, matmul, trsm_lower, trsm_right_lower_t, Op};

/// Lower Cholesky factor `L` (with `L L^T = Sigma`) in tile form.
///
/// Diagonal tiles are dense lower-triangular; off-diagonal tiles keep the
/// representation (dense or low-rank) of the factorized matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    tiles: TileMatrix,
    log_det: f64,
}

impl CholeskyFactor {
    pub fn grid(&self) -> &TileGrid {
        self.tiles.grid()
    }

    pub fn mode(&self) -> Mode {
        self.tiles.mode()
    }

    pub fn n(&self) -> usize {
        self.tiles.n()
    }

    /// `log |Sigma| = 2 sum log diag(L)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn diag_tile(&self, k: usize) -> &DMatrix<f64> {
        self.tiles.diag_tile(k)
    }

    pub fn lower_tile(&self, i: usize, j: usize) -> &Tile {
        self.tiles.lower_tile(i, j)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.tiles.ranks()
    }

    pub fn footprint(&self) -> crate::tile::Footprint {
        self.tiles.footprint()
    }

    /// `L x`, tile by tile.
    pub fn mul_lower(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let g = self.grid();
        if x.nrows() != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for a factor of order {}",
                x.nrows(),
                g.n()
            )));
        }
        let mut out = DMatrix::zeros(g.n(), x.ncols());
        for i in 0..g.tiles() {
            let ri = g.range(i);
            let mut yi = out.rows_range(ri.clone()).clone_owned();
            for j in 0..i {
                let xj = x.rows_range(g.range(j)).clone_owned();
                self.lower_tile(i, j).gemv_acc(1.0, &xj, &mut yi);
            }
            let xi = x.rows_range(ri.clone()).clone_owned();
            gemm(1.0, self.diag_tile(i), Op::N, &xi, Op::N, 1.0, &mut yi);
            out.rows_range_mut(ri).copy_from(&yi);
        }
        Ok(out)
    }

    /// `L` as a dense lower-triangular matrix.
    pub fn to_dense_lower(&self) -> DMatrix<f64> {
        let g = self.grid();
        let mut out = DMatrix::zeros(g.n(), g.n());
        for k in 0..g.tiles() {
            let r = g.range(k);
            let d = self.diag_tile(k);
            for j in 0..r.len() {
                for i in j..r.len() {
                    out[(r.start + i, r.start + j)] = d[(i, j)];
                }
            }
        }
        for (i, j) in lower_pairs(g.tiles()) {
            let (ri, rj) = (g.range(i), g.range(j));
            out.view_mut((ri.start, rj.start), (ri.len(), rj.len()))
                .copy_from(&self.lower_tile(i, j).to_dense());
        }
        out
    }
}

/// Cholesky factorization of a dense tile.
///
/// Fails with [`Error::NotPositiveDefinite`] (tile 0) at the first
/// non-positive pivot.
pub fn potrf_tile(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!("tile of shape {:?} is not square", a.shape())));
    }
    let mut l = a.clone();
    potrf_in_place(&mut l).map_err(|pivot| Error::NotPositiveDefinite { tile: 0, pivot })?;
    Ok(l)
}

const POTRF_BLOCK: usize = 64;

/// Overwrites the lower triangle of `a` with its Cholesky factor and zeroes
/// the strict upper triangle. Returns the failing pivot on error.
///
/// Blocked right-looking: each block column is factored with vector
/// operations and the trailing matrix is updated with GEMM.
pub(crate) fn potrf_in_place(a: &mut DMatrix<f64>) -> std::result::Result<(), usize> {
    let n = a.nrows();
    let mut s = 0;
    while s < n {
        let e = (s + POTRF_BLOCK).min(n);
        factor_block_column(a.as_mut_slice(), n, s, e)?;
        if e < n {
            let panel = a.view((e, s), (n - e, e - s)).clone_owned();
            let mut c0 = e;
            while c0 < n {
                let c1 = (c0 + POTRF_BLOCK).min(n);
                let below = panel.rows_range(c0 - e..n - e);
                let right = panel.rows_range(c0 - e..c1 - e);
                let mut target = a.view_mut((c0, c0), (n - c0, c1 - c0));
                gemm(-1.0, &below, Op::N, &right, Op::T, 1.0, &mut target);
                c0 = c1;
            }
        }
        s = e;
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(())
}

/// Unblocked left-looking factorization of columns `s..e` (rows `s..n`) of a
/// column-major `n x n` slice whose columns `< s` are already applied.
fn factor_block_column(data: &mut [f64], n: usize, s: usize, e: usize) -> std::result::Result<(), usize> {
    for j in s..e {
        let (left, right) = data.split_at_mut(j * n);
        let col_j = &mut right[..n];
        for p in s..j {
            let col_p = &left[p * n..(p + 1) * n];
            let ljp = col_p[j];
            if ljp == 0.0 {
                continue;
            }
            for (dst, src) in col_j[j..].iter_mut().zip(&col_p[j..]) {
                *dst -= src * ljp;
            }
        }
        let d = col_j[j];
        if !(d > 0.0 && d.is_finite()) {
            return Err(j);
        }
        let ljj = d.sqrt();
        col_j[j] = ljj;
        let inv = 1.0 / ljj;
        for v in &mut col_j[j + 1..] {
            *v *= inv;
        }
    }
    Ok(())
}

/// Factorizes according to the matrix's own mode.
pub fn cholesky(m: TileMatrix) -> Result<CholeskyFactor> {
    match m.mode() {
        Mode::Dense => dense_cholesky(m),
        Mode::Tlr { accuracy } => tlr_cholesky(m, accuracy),
    }
}

/// Tile Cholesky with every off-diagonal tile dense (low-rank tiles of the
/// input are expanded first). Machine-precision reference.
pub fn dense_cholesky(mut m: TileMatrix) -> Result<CholeskyFactor> {
    for tile in &mut m.lower {
        if let Tile::LowRank(t) = tile {
            *tile = Tile::Dense(t.to_dense());
        }
    }
    let (grid, diag, lower) = (*m.grid(), m.diag, m.lower);
    factorize(grid, Mode::Dense, diag, lower, None)
}

/// Right-looking TLR Cholesky.
///
/// For each tile column `k`: factor the diagonal tile, apply `L_kk^{-1}` to the
/// `V` factors of the panel (ranks unchanged), then update the trailing
/// matrix. Off-diagonal updates `A_ij - U_ik (V_ik^T V_jk) U_jk^T` are
/// recompressed immediately to `eps * ||A_ij||_F`, with the norm taken from
/// the input matrix.
pub fn tlr_cholesky(m: TileMatrix, eps: f64) -> Result<CholeskyFactor> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("accuracy {eps} outside (0, 1)")));
    }
    let tolerances: Vec<f64> = m.lower.iter().map(|t| eps * t.frobenius_norm()).collect();
    let (grid, diag, lower) = (*m.grid(), m.diag, m.lower);
    factorize(grid, Mode::Tlr { accuracy: eps }, diag, lower, Some(&tolerances))
}

fn factorize(
    grid: TileGrid,
    mode: Mode,
    mut diag: Vec<DMatrix<f64>>,
    mut lower: Vec<Tile>,
    tolerances: Option<&[f64]>,
) -> Result<CholeskyFactor> {
    let t = grid.tiles();
    let pairs = lower_pairs(t);
    for k in 0..t {
        potrf_in_place(&mut diag[k]).map_err(|pivot| Error::NotPositiveDefinite { tile: k, pivot })?;
        let lkk = &diag[k];

        let mut panel: Vec<Tile> = (k + 1..t)
            .map(|i| std::mem::replace(&mut lower[lower_index(i, k)], Tile::LowRank(LowRankTile::zero(0, 0))))
            .collect();
        panel.par_iter_mut().for_each(|tile| match tile {
            Tile::Dense(d) => trsm_right_lower_t(lkk, d),
            Tile::LowRank(lr) => trsm_lower(lkk, &mut lr.v),
        });

        diag[k + 1..]
            .par_iter_mut()
            .enumerate()
            .for_each(|(e, d)| syrk_update(d, &panel[e]));

        lower
            .par_iter_mut()
            .zip(pairs.par_iter())
            .enumerate()
            .filter(|(_, (_, &(_, j)))| j > k)
            .try_for_each(|(idx, (tile, &(i, j)))| {
                let tol = tolerances.map_or(0.0, |t| t[idx]);
                gemm_update(tile, &panel[i - k - 1], &panel[j - k - 1], tol)
            })?;

        for (e, tile) in panel.into_iter().enumerate() {
            lower[lower_index(k + 1 + e, k)] = tile;
        }
    }
    let log_det = 2.0
        * diag
            .iter()
            .map(|d| d.diagonal().iter().map(|v| v.ln()).sum::<f64>())
            .sum::<f64>();
    let tiles = TileMatrix::from_tiles(grid, mode, diag, lower)?;
    Ok(CholeskyFactor { tiles, log_det })
}

/// `d -= L_jk L_jk^T`
fn syrk_update(d: &mut DMatrix<f64>, l: &Tile) {
    match l {
        Tile::Dense(x) => gemm(-1.0, x, Op::N, x, Op::T, 1.0, d),
        Tile::LowRank(lr) if lr.rank() > 0 => {
            let w = matmul(&lr.v, Op::T, &lr.v, Op::N);
            let uw = matmul(&lr.u, Op::N, &w, Op::N);
            gemm(-1.0, &uw, Op::N, &lr.u, Op::T, 1.0, d);
        }
        Tile::LowRank(_) => {}
    }
}

/// `target -= L_ik L_jk^T`, recompressing low-rank targets to `tol`.
fn gemm_update(target: &mut Tile, lik: &Tile, ljk: &Tile, tol: f64) -> Result<()> {
    match target {
        Tile::Dense(d) => {
            match (lik, ljk) {
                (Tile::Dense(a), Tile::Dense(b)) => gemm(-1.0, a, Op::N, b, Op::T, 1.0, d),
                _ => {
                    let (ua, va) = factors(lik);
                    let (ub, vb) = factors(ljk);
                    if ua.ncols() == 0 || ub.ncols() == 0 {
                        return Ok(());
                    }
                    let w = matmul(&va, Op::T, &vb, Op::N);
                    let uw = matmul(&ua, Op::N, &w, Op::N);
                    gemm(-1.0, &uw, Op::N, &ub, Op::T, 1.0, d);
                }
            }
            Ok(())
        }
        Tile::LowRank(cur) => {
            let (ua, va) = factors(lik);
            let (ub, vb) = factors(ljk);
            if ua.ncols() == 0 || ub.ncols() == 0 {
                return Ok(());
            }
            // L_ik L_jk^T = U_ik (V_ik^T V_jk) U_jk^T
            let w = matmul(&va, Op::T, &vb, Op::N);
            let mut u2 = matmul(&ua, Op::N, &w, Op::N);
            u2.neg_mut();
            *cur = recompress_to_tolerance(&cur.u, &cur.v, &u2, &ub, tol)?;
            Ok(())
        }
    }
}

/// `(U, V)` with `tile = U V^T`; dense tiles use `V = I`.
fn factors(tile: &Tile) -> (std::borrow::Cow<'_, DMatrix<f64>>, std::borrow::Cow<'_, DMatrix<f64>>) {
    use std::borrow::Cow;
    match tile {
        Tile::Dense(d) => (Cow::Borrowed(d), Cow::Owned(DMatrix::identity(d.ncols(), d.ncols()))),
        Tile::LowRank(lr) => (Cow::Borrowed(&lr.u), Cow::Borrowed(&lr.v)),
    }
}
