//! Tiled storage for symmetric covariance matrices.
//!
//! A [`TileMatrix`] keeps the diagonal tiles dense and stores only the strictly
//! lower tiles, each either dense or as a low-rank product `U V^T`. The upper
//! triangle is implied by symmetry.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::compression::compress_tile;
use crate::error::{Error, Result};
use crate::geometry::LocationSet;
use crate::kernels::{Matern, MaternParams};
use crate::linalg::blas::{matmul, Op};

/// Default tile size for dense computations.
pub const DEFAULT_DENSE_TILE: usize = 200;
/// Largest default tile size for TLR computations.
pub const MAX_TLR_TILE: usize = 800;

pub type DenseTile = DMatrix<f64>;

/// Partition of `0..n` into `t = ceil(n / nb)` consecutive blocks; only the
/// last one may be shorter than `nb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    n: usize,
    nb: usize,
    t: usize,
}

impl TileGrid {
    pub fn new(n: usize, nb: usize) -> Result<Self> {
        if n == 0 || nb == 0 {
            return Err(Error::Domain(format!("invalid tile grid n={n}, nb={nb}")));
        }
        // A tile size above n simply means a single tile.
        let nb = nb.min(n);
        Ok(Self {
            n,
            nb,
            t: n.div_ceil(nb),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tile_size(&self) -> usize {
        self.nb
    }

    pub fn tiles(&self) -> usize {
        self.t
    }

    pub fn range(&self, tile: usize) -> Range<usize> {
        let start = tile * self.nb;
        start..(start + self.nb).min(self.n)
    }

    pub fn len_of(&self, tile: usize) -> usize {
        self.range(tile).len()
    }

    /// Global index to `(tile, offset)`.
    pub fn locate(&self, i: usize) -> (usize, usize) {
        (i / self.nb, i % self.nb)
    }

    pub fn global(&self, tile: usize, offset: usize) -> usize {
        tile * self.nb + offset
    }
}

/// Whether off-diagonal tiles are kept dense or compressed to a relative
/// Frobenius accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Dense,
    Tlr { accuracy: f64 },
}

impl Mode {
    pub fn tlr(accuracy: f64) -> Result<Self> {
        if !(accuracy > 0.0 && accuracy < 1.0) {
            return Err(Error::Domain(format!("accuracy {accuracy} outside (0, 1)")));
        }
        Ok(Mode::Tlr { accuracy })
    }

    pub fn accuracy(&self) -> Option<f64> {
        match self {
            Mode::Dense => None,
            Mode::Tlr { accuracy } => Some(*accuracy),
        }
    }

    /// Default tile size for `n` unknowns.
    ///
    /// TLR tiles are `ceil(n / 4^k)` for the smallest `k >= 1` keeping them
    /// within [`MAX_TLR_TILE`]; on spatially sorted locations each tile then
    /// covers one cell of a quadtree, which keeps off-diagonal ranks low.
    pub fn default_tile_size(&self, n: usize) -> usize {
        let n = n.max(1);
        match self {
            Mode::Dense => DEFAULT_DENSE_TILE.min(n),
            Mode::Tlr { .. } => {
                let mut nb = n.div_ceil(4);
                while nb > MAX_TLR_TILE {
                    nb = nb.div_ceil(4);
                }
                nb
            }
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Dense => write!(f, "dense"),
            Mode::Tlr { accuracy } => write!(f, "tlr:{accuracy:e}"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    /// `dense`, or `tlr:EPS`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("dense") {
            return Ok(Mode::Dense);
        }
        match s.split_once(':') {
            Some((kind, eps)) if kind.eq_ignore_ascii_case("tlr") => {
                let eps: f64 = eps
                    .trim()
                    .parse()
                    .map_err(|_| Error::Input(format!("invalid accuracy in mode `{s}`")))?;
                Mode::tlr(eps)
            }
            _ => Err(Error::Input(format!("unknown mode `{s}` (expected dense or tlr:EPS)"))),
        }
    }
}

/// A tile approximated as `u * v^T`; rank 0 encodes the zero tile.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankTile {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl LowRankTile {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "low-rank factors with {} and {} columns",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            u: DMatrix::zeros(rows, 0),
            v: DMatrix::zeros(cols, 0),
        }
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        matmul(&self.u, Op::N, &self.v, Op::T)
    }

    /// `||U V^T||_F` without forming the product.
    pub fn frobenius_norm(&self) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let uu = matmul(&self.u, Op::T, &self.u, Op::N);
        let vv = matmul(&self.v, Op::T, &self.v, Op::N);
        uu.component_mul(&vv).sum().max(0.0).sqrt()
    }

    pub fn stored_reals(&self) -> usize {
        self.u.len() + self.v.len()
    }
}

/// A strictly lower tile.
#[derive(Debug, Clone, PartialEq)]
pub enum Tile {
    Dense(DenseTile),
    LowRank(LowRankTile),
}

impl Tile {
    pub fn rows(&self) -> usize {
        match self {
            Tile::Dense(d) => d.nrows(),
            Tile::LowRank(t) => t.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Tile::Dense(d) => d.ncols(),
            Tile::LowRank(t) => t.cols(),
        }
    }

    /// Rank for low-rank tiles, full dimension for dense ones.
    pub fn rank(&self) -> usize {
        match self {
            Tile::Dense(d) => d.nrows().min(d.ncols()),
            Tile::LowRank(t) => t.rank(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Tile::Dense(d) => d.clone(),
            Tile::LowRank(t) => t.to_dense(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            Tile::Dense(d) => d.norm(),
            Tile::LowRank(t) => t.frobenius_norm(),
        }
    }

    pub fn stored_reals(&self) -> usize {
        match self {
            Tile::Dense(d) => d.len(),
            Tile::LowRank(t) => t.stored_reals(),
        }
    }

    /// `y += alpha * tile * x`
    pub(crate) fn gemv_acc(&self, alpha: f64, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        use crate::linalg::blas::gemm;
        match self {
            Tile::Dense(d) => gemm(alpha, d, Op::N, x, Op::N, 1.0, y),
            Tile::LowRank(t) if t.rank() > 0 => {
                let w = matmul(&t.v, Op::T, x, Op::N);
                gemm(alpha, &t.u, Op::N, &w, Op::N, 1.0, y);
            }
            Tile::LowRank(_) => {}
        }
    }

    /// `y += alpha * tile^T * x`
    pub(crate) fn gemv_t_acc(&self, alpha: f64, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        use crate::linalg::blas::gemm;
        match self {
            Tile::Dense(d) => gemm(alpha, d, Op::T, x, Op::N, 1.0, y),
            Tile::LowRank(t) if t.rank() > 0 => {
                let w = matmul(&t.u, Op::T, x, Op::N);
                gemm(alpha, &t.v, Op::N, &w, Op::N, 1.0, y);
            }
            Tile::LowRank(_) => {}
        }
    }
}

/// Index of tile `(i, j)`, `i > j`, in the packed strictly-lower list.
pub(crate) fn lower_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

/// Symmetric tile matrix, lower triangle stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TileMatrix {
    grid: TileGrid,
    mode: Mode,
    pub(crate) diag: Vec<DenseTile>,
    pub(crate) lower: Vec<Tile>,
}

impl TileMatrix {
    /// Builds a matrix from its tiles; `lower` is packed row by row
    /// (`(1,0), (2,0), (2,1), (3,0), ...`).
    pub fn from_tiles(grid: TileGrid, mode: Mode, diag: Vec<DenseTile>, lower: Vec<Tile>) -> Result<Self> {
        let t = grid.tiles();
        if diag.len() != t || lower.len() != t * (t - 1) / 2 {
            return Err(Error::DimensionMismatch("wrong number of tiles for grid".into()));
        }
        for (k, d) in diag.iter().enumerate() {
            let len = grid.len_of(k);
            if d.shape() != (len, len) {
                return Err(Error::DimensionMismatch(format!("diagonal tile {k} has shape {:?}", d.shape())));
            }
        }
        for i in 0..t {
            for j in 0..i {
                let tile = &lower[lower_index(i, j)];
                if (tile.rows(), tile.cols()) != (grid.len_of(i), grid.len_of(j)) {
                    return Err(Error::DimensionMismatch(format!("tile ({i}, {j}) has wrong shape")));
                }
            }
        }
        Ok(Self { grid, mode, diag, lower })
    }

    /// A dense symmetric matrix cut into tiles; off-diagonal tiles are
    /// compressed when `mode` is TLR.
    pub fn from_dense(a: &DMatrix<f64>, nb: usize, mode: Mode) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("matrix is not square".into()));
        }
        let grid = TileGrid::new(a.nrows(), nb)?;
        let block = |i: usize, j: usize| {
            let (r, c) = (grid.range(i), grid.range(j));
            a.view((r.start, c.start), (r.len(), c.len())).clone_owned()
        };
        let diag = (0..grid.tiles()).map(|k| block(k, k)).collect();
        let lower = lower_pairs(grid.tiles())
            .into_iter()
            .map(|(i, j)| finish_tile(block(i, j), mode))
            .collect::<Result<Vec<_>>>()?;
        Self::from_tiles(grid, mode, diag, lower)
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn diag_tile(&self, k: usize) -> &DenseTile {
        &self.diag[k]
    }

    /// Tile `(i, j)` with `i > j`.
    pub fn lower_tile(&self, i: usize, j: usize) -> &Tile {
        &self.lower[lower_index(i, j)]
    }

    /// Entry `(i, j)` of the (symmetric) matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let (ti, oi) = self.grid.locate(i);
        let (tj, oj) = self.grid.locate(j);
        if ti == tj {
            return self.diag[ti][(oi, oj)];
        }
        match &self.lower[lower_index(ti, tj)] {
            Tile::Dense(d) => d[(oi, oj)],
            Tile::LowRank(t) => t.u.row(oi).dot(&t.v.row(oj)),
        }
    }

    /// The full symmetric matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..self.grid.tiles() {
            let r = self.grid.range(k);
            let d = &self.diag[k];
            // Diagonal tiles are symmetric; take the lower half as authoritative.
            for j in 0..r.len() {
                for i in j..r.len() {
                    out[(r.start + i, r.start + j)] = d[(i, j)];
                    out[(r.start + j, r.start + i)] = d[(i, j)];
                }
            }
        }
        for (i, j) in lower_pairs(self.grid.tiles()) {
            let (ri, rj) = (self.grid.range(i), self.grid.range(j));
            let d = self.lower[lower_index(i, j)].to_dense();
            out.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(&d);
            out.view_mut((rj.start, ri.start), (rj.len(), ri.len())).copy_from(&d.transpose());
        }
        out
    }

    /// `self * x` for an `n x q` block of vectors.
    pub fn mul(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for a matrix of order {}",
                x.nrows(),
                self.n()
            )));
        }
        let q = x.ncols();
        let g = &self.grid;
        let pieces: Vec<DMatrix<f64>> = (0..g.tiles())
            .map(|k| x.rows_range(g.range(k)).clone_owned())
            .collect();
        let mut out = DMatrix::zeros(self.n(), q);
        for i in 0..g.tiles() {
            let mut acc = matmul(&self.diag[i], Op::N, &pieces[i], Op::N);
            for j in 0..i {
                self.lower[lower_index(i, j)].gemv_acc(1.0, &pieces[j], &mut acc);
            }
            for j in i + 1..g.tiles() {
                self.lower[lower_index(j, i)].gemv_t_acc(1.0, &pieces[j], &mut acc);
            }
            out.rows_range_mut(g.range(i)).copy_from(&acc);
        }
        Ok(out)
    }

    /// Storage accounting; see [`Footprint`].
    pub fn footprint(&self) -> Footprint {
        let actual: usize = self.diag.iter().map(|d| d.len()).sum::<usize>()
            + self.lower.iter().map(Tile::stored_reals).sum::<usize>();
        let dense: usize = self.diag.iter().map(|d| d.len()).sum::<usize>()
            + self.lower.iter().map(|t| t.rows() * t.cols()).sum::<usize>();
        Footprint {
            bytes_dense_equiv: 8 * dense,
            bytes_actual: 8 * actual,
            compression_ratio: dense as f64 / actual as f64,
        }
    }

    /// Ranks of the strictly lower tiles, packed like [`Self::from_tiles`].
    pub fn ranks(&self) -> Vec<usize> {
        self.lower.iter().map(Tile::rank).collect()
    }

    /// One line per stored tile: `i j kind rank frob_norm`.
    pub fn debug_dump(&self) -> String {
        let mut s = String::new();
        for i in 0..self.grid.tiles() {
            for j in 0..=i {
                let (kind, rank, norm) = if i == j {
                    let d = &self.diag[i];
                    ("dense", d.nrows(), d.norm())
                } else {
                    let t = &self.lower[lower_index(i, j)];
                    let kind = match t {
                        Tile::Dense(_) => "dense",
                        Tile::LowRank(_) => "lowrank",
                    };
                    (kind, t.rank(), t.frobenius_norm())
                };
                let _ = writeln!(s, "{i} {j} {kind} {rank} {norm:.17e}");
            }
        }
        s
    }
}

/// Storage of a [`TileMatrix`] in bytes of `f64`.
///
/// `bytes_dense_equiv` is what the same tile grid needs with every stored tile
/// dense (diagonal tiles plus the strictly lower tiles); `bytes_actual` counts
/// the reals actually held. A ratio below one means compression did not pay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub bytes_dense_equiv: usize,
    pub bytes_actual: usize,
    pub compression_ratio: f64,
}

pub(crate) fn lower_pairs(t: usize) -> Vec<(usize, usize)> {
    (0..t).flat_map(|i| (0..i).map(move |j| (i, j))).collect()
}

fn finish_tile(block: DenseTile, mode: Mode) -> Result<Tile> {
    match mode {
        Mode::Dense => Ok(Tile::Dense(block)),
        Mode::Tlr { accuracy } => Ok(Tile::LowRank(compress_tile(&block, accuracy)?)),
    }
}

/// Covariance matrix `Sigma_ij = C(d(s_i, s_j)) + nugget [i = j]`, tile by tile.
///
/// Every tile is generated dense; in TLR mode off-diagonal tiles are then
/// compressed to the mode's accuracy.
pub fn assemble_covariance(
    set: &LocationSet,
    params: &MaternParams,
    grid: TileGrid,
    mode: Mode,
) -> Result<TileMatrix> {
    if set.len() != grid.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} locations for a grid of order {}",
            set.len(),
            grid.n()
        )));
    }
    let kernel = Matern::tabulated(*params)?;
    let nugget = params.nugget;
    let diag = (0..grid.tiles())
        .into_par_iter()
        .map(|k| {
            let r = grid.range(k);
            let mut d = DMatrix::zeros(r.len(), r.len());
            for j in 0..r.len() {
                d[(j, j)] = kernel.eval(0.0) + nugget;
                for i in j + 1..r.len() {
                    let v = kernel.eval(set.distance(r.start + i, r.start + j));
                    d[(i, j)] = v;
                    d[(j, i)] = v;
                }
            }
            d
        })
        .collect();
    let lower = lower_pairs(grid.tiles())
        .into_par_iter()
        .map(|(i, j)| {
            let (ri, rj) = (grid.range(i), grid.range(j));
            let block = DMatrix::from_fn(ri.len(), rj.len(), |a, b| {
                kernel.eval(set.distance(ri.start + a, rj.start + b))
            });
            finish_tile(block, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    TileMatrix::from_tiles(grid, mode, diag, lower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_locations, Location, Metric};

    #[test]
    fn grid_ragged_boundary() {
        let g = TileGrid::new(10, 4).unwrap();
        assert_eq!(g.tiles(), 3);
        assert_eq!(g.range(2), 8..10);
        assert!(TileGrid::new(0, 4).is_err());
        assert!(TileGrid::new(4, 0).is_err());
        assert_eq!(TileGrid::new(3, 10).unwrap().tiles(), 1);
    }

    #[test]
    fn grid_index_bijection() {
        for (n, nb) in [(1, 1), (10, 4), (17, 5), (400, 200), (401, 200)] {
            let g = TileGrid::new(n, nb).unwrap();
            let mut seen = vec![false; n];
            for t in 0..g.tiles() {
                for o in 0..g.len_of(t) {
                    let i = g.global(t, o);
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(g.locate(i), (t, o));
                }
            }
            assert!(seen.iter().all(|&s| s));
            assert!(g.tiles() * g.tile_size() >= n && (g.tiles() - 1) * g.tile_size() < n);
        }
    }

    #[test]
    fn two_point_exponential() {
        let set = LocationSet::new(vec![Location::new(0.0, 0.0), Location::new(0.1, 0.0)], Metric::Euclidean).unwrap();
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        for nb in [1, 2] {
            let m = assemble_covariance(&set, &p, TileGrid::new(2, nb).unwrap(), Mode::Dense).unwrap();
            let d = m.to_dense();
            assert_eq!(d[(0, 0)], 1.0);
            assert_eq!(d[(1, 1)], 1.0);
            assert!((d[(1, 0)] - (-1.0f64).exp()).abs() < 1e-15);
            assert_eq!(d[(0, 1)], d[(1, 0)]);
        }
    }

    #[test]
    fn nugget_on_diagonal_only() {
        let set = generate_locations(37, 4).unwrap();
        let p = MaternParams::with_nugget(1.3, 0.1, 0.9, 0.25).unwrap();
        let m = assemble_covariance(&set, &p, TileGrid::new(37, 8).unwrap(), Mode::Dense).unwrap();
        let d = m.to_dense();
        let kernel = Matern::tabulated(p).unwrap();
        for i in 0..37 {
            assert_eq!(d[(i, i)], 1.55);
            for j in 0..i {
                assert_eq!(d[(i, j)], kernel.eval(set.distance(i, j)));
                assert_eq!(d[(i, j)], m.get(j, i));
            }
        }
    }

    #[test]
    fn tlr_matches_dense_at_tight_accuracy() {
        let set = generate_locations(300, 11).unwrap();
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let dense = assemble_covariance(&set, &p, TileGrid::new(300, 64).unwrap(), Mode::Dense).unwrap().to_dense();
        let tlr = assemble_covariance(&set, &p, TileGrid::new(300, 64).unwrap(), Mode::tlr(1e-12).unwrap()).unwrap();
        let rec = tlr.to_dense();
        assert!((&rec - &dense).norm() / dense.norm() < 1e-11);
        assert_eq!(rec, rec.transpose());
        for (i, j) in [(0, 0), (70, 3), (299, 0), (150, 151)] {
            assert!((tlr.get(i, j) - dense[(i, j)]).abs() < 1e-11);
        }
    }

    #[test]
    fn footprint_counts() {
        let set = generate_locations(50, 1).unwrap();
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let grid = TileGrid::new(50, 16).unwrap();
        let dense = assemble_covariance(&set, &p, grid, Mode::Dense).unwrap();
        let f = dense.footprint();
        assert_eq!(f.compression_ratio, 1.0);
        // 3 full 16x16 + 2x2 diagonal, 3 lower 16x16, 3 lower 2x16
        let reals = 3 * 256 + 4 + 3 * 256 + 3 * 32;
        assert_eq!(f.bytes_actual, 8 * reals);

        // Rank-0 everywhere: only diagonal tiles remain.
        let diag: Vec<DenseTile> = (0..4).map(|k| DMatrix::identity(grid.len_of(k), grid.len_of(k))).collect();
        let lower = lower_pairs(4)
            .into_iter()
            .map(|(i, j)| Tile::LowRank(LowRankTile::zero(grid.len_of(i), grid.len_of(j))))
            .collect();
        let m = TileMatrix::from_tiles(grid, Mode::tlr(1e-5).unwrap(), diag, lower).unwrap();
        assert_eq!(m.footprint().bytes_actual, 8 * (3 * 256 + 4));
        assert!(m.footprint().compression_ratio > 1.0);

        // Full-rank factors cost more than the dense tile.
        let lower_full: Vec<Tile> = lower_pairs(4)
            .into_iter()
            .map(|(i, j)| {
                let (r, c) = (grid.len_of(i), grid.len_of(j));
                let k = r.min(c);
                Tile::LowRank(LowRankTile::new(DMatrix::zeros(r, k), DMatrix::zeros(c, k)).unwrap())
            })
            .collect();
        let diag: Vec<DenseTile> = (0..4).map(|k| DMatrix::identity(grid.len_of(k), grid.len_of(k))).collect();
        let m = TileMatrix::from_tiles(grid, Mode::tlr(1e-5).unwrap(), diag, lower_full).unwrap();
        assert!(m.footprint().compression_ratio < 1.0);
    }

    #[test]
    fn mul_matches_dense() {
        let set = generate_locations(90, 2).unwrap();
        let p = MaternParams::new(2.0, 0.2, 1.3).unwrap();
        for mode in [Mode::Dense, Mode::tlr(1e-10).unwrap()] {
            let m = assemble_covariance(&set, &p, TileGrid::new(90, 25).unwrap(), mode).unwrap();
            let x = DMatrix::from_fn(90, 2, |i, j| (i as f64 * 0.37 + j as f64).sin());
            let y = m.mul(&x).unwrap();
            let want = m.to_dense() * &x;
            assert!((y - &want).norm() / want.norm() < 1e-13);
        }
    }

    #[test]
    fn debug_dump_lines() {
        let set = generate_locations(30, 2).unwrap();
        let p = MaternParams::new(1.0, 0.05, 0.5).unwrap();
        let m = assemble_covariance(&set, &p, TileGrid::new(30, 10).unwrap(), Mode::tlr(1e-5).unwrap()).unwrap();
        let dump = m.debug_dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("0 0 dense 10 "));
        let fields: Vec<&str> = lines[1].split(' ').collect();
        assert_eq!(fields[..3], ["1", "0", "lowrank"]);
        let rank: usize = fields[3].parse().unwrap();
        assert_eq!(rank, m.lower_tile(1, 0).rank());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("dense".parse::<Mode>().unwrap(), Mode::Dense);
        assert_eq!("tlr:1e-7".parse::<Mode>().unwrap(), Mode::Tlr { accuracy: 1e-7 });
        assert!("tlr:2".parse::<Mode>().is_err());
        assert!("lu".parse::<Mode>().is_err());
    }
}
