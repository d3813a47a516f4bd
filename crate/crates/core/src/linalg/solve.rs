use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::blas::{trsm_lower, trsm_lower_t};
use super::cholesky::CholeskyFactor;

fn split_rows(f: &CholeskyFactor, b: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let g = f.grid();
    (0..g.tiles()).map(|k| b.rows_range(g.range(k)).clone_owned()).collect()
}

fn join_rows(f: &CholeskyFactor, pieces: Vec<DMatrix<f64>>, q: usize) -> DMatrix<f64> {
    let g = f.grid();
    let mut out = DMatrix::zeros(g.n(), q);
    for (k, p) in pieces.into_iter().enumerate() {
        out.rows_range_mut(g.range(k)).copy_from(&p);
    }
    out
}

fn check_rows(f: &CholeskyFactor, rows: usize) -> Result<()> {
    if rows != f.n() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {rows} rows, factor has order {}",
            f.n()
        )));
    }
    Ok(())
}

/// `L y = b`, tile by tile.
fn forward(f: &CholeskyFactor, pieces: &mut [DMatrix<f64>]) {
    for k in 0..pieces.len() {
        let (done, rest) = pieces.split_at_mut(k);
        let cur = &mut rest[0];
        for (j, yj) in done.iter().enumerate() {
            f.lower_tile(k, j).gemv_acc(-1.0, yj, cur);
        }
        trsm_lower(f.diag_tile(k), cur);
    }
}

/// `L^T x = y`, tile by tile.
fn backward(f: &CholeskyFactor, pieces: &mut [DMatrix<f64>]) {
    let t = pieces.len();
    for k in (0..t).rev() {
        let (head, done) = pieces.split_at_mut(k + 1);
        let cur = &mut head[k];
        for (e, xi) in done.iter().enumerate() {
            f.lower_tile(k + 1 + e, k).gemv_t_acc(-1.0, xi, cur);
        }
        trsm_lower_t(f.diag_tile(k), cur);
    }
}

/// `Sigma^{-1} rhs` by forward then backward substitution. Low-rank tiles are
/// applied as `U (V^T x)`.
pub fn solve_cholesky(f: &CholeskyFactor, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(f, rhs.nrows())?;
    if rhs.ncols() == 0 {
        return Err(Error::DimensionMismatch("no right-hand sides".into()));
    }
    let mut pieces = split_rows(f, rhs);
    forward(f, &mut pieces);
    backward(f, &mut pieces);
    Ok(join_rows(f, pieces, rhs.ncols()))
}

/// `z^T Sigma^{-1} z = ||L^{-1} z||^2`.
pub fn quadratic_form(f: &CholeskyFactor, z: &[f64]) -> Result<f64> {
    check_rows(f, z.len())?;
    let b = DMatrix::from_column_slice(z.len(), 1, z);
    let mut pieces = split_rows(f, &b);
    forward(f, &mut pieces);
    Ok(pieces.iter().map(|p| p.norm_squared()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_locations;
    use crate::kernels::MaternParams;
    use crate::linalg::{cholesky, dense_cholesky};
    use crate::tile::{assemble_covariance, Mode, TileGrid, TileMatrix};

    #[test]
    fn identity_solve_and_form() {
        let i = DMatrix::<f64>::identity(9, 9);
        let f = dense_cholesky(TileMatrix::from_dense(&i, 4, Mode::Dense).unwrap()).unwrap();
        let b = DMatrix::from_fn(9, 2, |r, c| (r * 3 + c) as f64 - 4.0);
        assert_eq!(solve_cholesky(&f, &b).unwrap(), b);
        let z: Vec<f64> = (0..9).map(|v| v as f64 * 0.5).collect();
        let want: f64 = z.iter().map(|v| v * v).sum();
        assert!((quadratic_form(&f, &z).unwrap() - want).abs() < 1e-14);
        assert_eq!(quadratic_form(&f, &[0.0; 9]).unwrap(), 0.0);
    }

    #[test]
    fn scaled_identity_solve() {
        let a = DMatrix::<f64>::identity(7, 7) * 4.0;
        let f = cholesky(TileMatrix::from_dense(&a, 3, Mode::tlr(1e-9).unwrap()).unwrap()).unwrap();
        let x = solve_cholesky(&f, &DMatrix::from_element(7, 1, 1.0)).unwrap();
        assert!((x - DMatrix::from_element(7, 1, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let f = dense_cholesky(TileMatrix::from_dense(&DMatrix::identity(4, 4), 2, Mode::Dense).unwrap()).unwrap();
        assert!(solve_cholesky(&f, &DMatrix::zeros(3, 1)).is_err());
        assert!(solve_cholesky(&f, &DMatrix::zeros(4, 0)).is_err());
        assert!(quadratic_form(&f, &[1.0; 5]).is_err());
    }

    #[test]
    fn solve_round_trip_tlr() {
        let set = generate_locations(600, 8).unwrap();
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let grid = TileGrid::new(600, 150).unwrap();
        let sigma = assemble_covariance(&set, &p, grid, Mode::Dense).unwrap();
        let b = DMatrix::from_fn(600, 3, |i, j| ((i * 7 + j * 13) % 17) as f64 - 8.0);
        for eps in [1e-6, 1e-10] {
            let f = cholesky(assemble_covariance(&set, &p, grid, Mode::tlr(eps).unwrap()).unwrap()).unwrap();
            let x = solve_cholesky(&f, &b).unwrap();
            let res = (sigma.mul(&x).unwrap() - &b).norm() / b.norm();
            assert!(res <= 100.0 * eps, "{eps}: {res}");
        }
        let f = cholesky(sigma.clone()).unwrap();
        let x = solve_cholesky(&f, &b).unwrap();
        assert!((sigma.mul(&x).unwrap() - &b).norm() / b.norm() < 1e-12);
        let z: Vec<f64> = b.column(0).iter().copied().collect();
        let q = quadratic_form(&f, &z).unwrap();
        let direct = b.column(0).dot(&x.column(0));
        assert!((q - direct).abs() / direct.abs() < 1e-10);
    }
}
