//! Tile Cholesky on Matérn covariances over the synthetic size/range/accuracy grid.

use nalgebra::DMatrix;
use tlrgeo::geometry::spatial_order;
use tlrgeo::linalg::blas::{matmul, Op};
use tlrgeo::linalg::{cholesky, solve_cholesky};
use tlrgeo::tile::assemble_covariance;
use tlrgeo::{generate_locations, LocationSet, MaternParams, Mode, TileGrid};

const EPS: [f64; 4] = [1e-5, 1e-7, 1e-9, 1e-12];

fn sorted_set(n: usize, seed: u64) -> LocationSet {
    let set = generate_locations(n, seed).unwrap();
    set.select(&spatial_order(&set)).unwrap()
}

fn factor(set: &LocationSet, theta2: f64, mode: Mode) -> tlrgeo::CholeskyFactor {
    let p = MaternParams::new(1.0, theta2, 0.5).unwrap();
    let grid = TileGrid::new(set.len(), mode.default_tile_size(set.len())).unwrap();
    cholesky(assemble_covariance(set, &p, grid, mode).unwrap()).unwrap()
}

fn dense_sigma(set: &LocationSet, theta2: f64) -> DMatrix<f64> {
    let p = MaternParams::new(1.0, theta2, 0.5).unwrap();
    let grid = TileGrid::new(set.len(), set.len()).unwrap();
    assemble_covariance(set, &p, grid, Mode::Dense).unwrap().to_dense()
}

/// Relative Frobenius residual of the factorization, plus log-det and solve
/// checks, across n x range x accuracy.
#[test]
fn residual_logdet_and_solve_over_the_grid() {
    for n in [400, 1600, 2500] {
        let set = sorted_set(n, 11);
        for theta2 in [0.03, 0.1] {
            let sigma = dense_sigma(&set, theta2);
            let snorm = sigma.norm();
            let dense_logdet = factor(&set, theta2, Mode::Dense).log_det();
            let b = DMatrix::from_fn(n, 1, |i, _| ((i * 7919) % 113) as f64 / 56.0 - 1.0);
            let mut prev_err = f64::INFINITY;
            for eps in EPS {
                let f = factor(&set, theta2, Mode::tlr(eps).unwrap());
                let l = f.to_dense_lower();
                let resid = (matmul(&l, Op::N, &l, Op::T) - &sigma).norm() / snorm;
                let ld_err = (f.log_det() - dense_logdet).abs();
                let x = solve_cholesky(&f, &b).unwrap();
                let rt = (&sigma * &x - &b).norm() / b.norm();
                println!("n={n} theta2={theta2} eps={eps:e}: residual {resid:.2e} logdet err {ld_err:.2e} solve {rt:.2e}");
                assert!(resid <= 50.0 * eps, "residual {resid:e} at n={n} theta2={theta2} eps={eps:e}");
                assert!(rt <= 100.0 * eps, "solve round trip {rt:e} at n={n} theta2={theta2} eps={eps:e}");
                // Once the error reaches the rounding level of the dense
                // reference, the order between further steps is noise.
                let floor = 1e-12 * dense_logdet.abs().max(n as f64);
                assert!(
                    ld_err <= prev_err || ld_err <= floor,
                    "log-det error grew to {ld_err:e} at n={n} theta2={theta2} eps={eps:e}"
                );
                prev_err = ld_err;
            }
        }
    }
}

#[test]
fn factorization_is_reproducible() {
    let set = sorted_set(900, 2);
    let mode = Mode::tlr(1e-7).unwrap();
    let a = factor(&set, 0.1, mode);
    let b = factor(&set, 0.1, mode);
    assert_eq!(a.log_det().to_bits(), b.log_det().to_bits());
    assert_eq!(a.ranks(), b.ranks());
    assert_eq!(a.to_dense_lower(), b.to_dense_lower());
}

#[test]
fn ragged_tiles_match_dense() {
    let set = sorted_set(530, 5);
    let p = MaternParams::new(1.3, 0.07, 1.2).unwrap();
    let dense = {
        let grid = TileGrid::new(530, 530).unwrap();
        cholesky(assemble_covariance(&set, &p, grid, Mode::Dense).unwrap()).unwrap()
    };
    for nb in [64, 100, 177] {
        let grid = TileGrid::new(530, nb).unwrap();
        let f = cholesky(assemble_covariance(&set, &p, grid, Mode::tlr(1e-10).unwrap()).unwrap()).unwrap();
        let rel = (f.log_det() - dense.log_det()).abs() / dense.log_det().abs();
        assert!(rel < 1e-8, "nb={nb}: {rel:e}");
    }
}
