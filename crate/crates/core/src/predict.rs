//! Kriging: conditional-mean prediction of unobserved measurements and MSE
//! scoring.
//!
//! With known measurements `z2` at `n` locations, the zero-mean predictor at
//! `m` new locations is `Sigma_12 Sigma_22^{-1} z2`. `Sigma_22` is assembled in
//! the configured mode and factorized once; the small `m x n` cross
//! covariance is always dense.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distance, spatial_order, LocationSet};
use crate::kernels::{Matern, MaternParams};
use crate::linalg::{cholesky, solve_cholesky};
use crate::stats::MeasurementVector;
use crate::tile::{assemble_covariance, Mode, TileGrid};

#[derive(Debug, Clone)]
pub struct PredictionProblem {
    pub known: LocationSet,
    pub values: MeasurementVector,
    pub unknown: LocationSet,
    pub theta: MaternParams,
    pub mode: Mode,
    /// `None` picks [`Mode::default_tile_size`].
    pub tile_size: Option<usize>,
    /// Factorize on the known locations sorted along a Z-order curve.
    pub spatial_order: bool,
    /// Also compute the conditional variance (dense mode only).
    pub variance: bool,
}

impl PredictionProblem {
    pub fn new(
        known: LocationSet,
        values: MeasurementVector,
        unknown: LocationSet,
        theta: MaternParams,
        mode: Mode,
    ) -> Self {
        Self {
            known,
            values,
            unknown,
            theta,
            mode,
            tile_size: None,
            spatial_order: true,
            variance: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.known.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} known locations but {} measurements",
                self.known.len(),
                self.values.len()
            )));
        }
        if self.known.metric() != self.unknown.metric() {
            return Err(Error::Input(format!(
                "known locations use {:?} but unknown locations use {:?}",
                self.known.metric(),
                self.unknown.metric()
            )));
        }
        if self.variance && self.mode != Mode::Dense {
            return Err(Error::Input("conditional variance is only available in dense mode".into()));
        }
        self.theta.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    /// `diag(Sigma_11 - Sigma_12 Sigma_22^{-1} Sigma_21)`, nugget included in `Sigma_11`.
    pub variance: Option<Vec<f64>>,
}

/// Conditional mean (and optionally variance) at the unknown locations.
pub fn predict(p: &PredictionProblem) -> Result<Prediction> {
    p.validate()?;
    let (known, z) = if p.spatial_order {
        let order = spatial_order(&p.known);
        (p.known.select(&order)?, p.values.select(&order))
    } else {
        (p.known.clone(), p.values.clone())
    };
    let n = known.len();
    let nb = p.tile_size.unwrap_or_else(|| p.mode.default_tile_size(n));
    let grid = TileGrid::new(n, nb)?;
    let factor = cholesky(assemble_covariance(&known, &p.theta, grid, p.mode)?)?;

    let kernel = Matern::tabulated(p.theta)?;
    let metric = known.metric();
    let m = p.unknown.len();
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let u = p.unknown.get(i);
            let kernel = &kernel;
            known.points().iter().map(move |k| kernel.eval(distance(&u, k, metric)))
        })
        .collect();
    // row-major m x n
    let sigma12 = DMatrix::from_row_slice(m, n, &rows);

    let z2 = DMatrix::from_column_slice(n, 1, z.as_slice());
    let alpha = solve_cholesky(&factor, &z2)?;
    let mean: Vec<f64> = (&sigma12 * alpha).iter().copied().collect();

    let variance = if p.variance {
        let sigma21 = sigma12.transpose();
        let x = solve_cholesky(&factor, &sigma21)?;
        let prior = p.theta.theta1 + p.theta.nugget;
        Some(
            (0..m)
                .map(|i| (prior - sigma21.column(i).dot(&x.column(i))).max(0.0))
                .collect(),
        )
    } else {
        None
    };
    Ok(Prediction { mean, variance })
}

/// Mean squared error `(1/m) sum (truth_i - pred_i)^2`.
pub fn mse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true values but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::DimensionMismatch("no values to compare".into()));
    }
    let s: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(s / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldoutScore {
    pub mode: Mode,
    pub mse: f64,
}

/// Indices of the `m` held-out points and of the `n - m` remaining ones,
/// both in increasing order.
pub fn holdout_split(n: usize, m: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if m == 0 || m >= n {
        return Err(Error::Domain(format!("cannot hold out {m} of {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = sample(&mut rng, n, m).into_vec();
    held.sort_unstable();
    let mut is_held = vec![false; n];
    for &i in &held {
        is_held[i] = true;
    }
    let kept = (0..n).filter(|&i| !is_held[i]).collect();
    Ok((held, kept))
}

/// Holds out `m` random points, predicts them from the rest with `theta` in
/// each mode and scores the predictions.
pub fn holdout_experiment(
    set: &LocationSet,
    z: &MeasurementVector,
    theta: &MaternParams,
    m: usize,
    modes: &[Mode],
    seed: u64,
) -> Result<Vec<HoldoutScore>> {
    if set.len() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} locations but {} measurements",
            set.len(),
            z.len()
        )));
    }
    let (held, kept) = holdout_split(set.len(), m, seed)?;
    let known = set.select(&kept)?;
    let unknown = set.select(&held)?;
    let values = z.select(&kept);
    let truth = z.select(&held);
    modes
        .iter()
        .map(|&mode| {
            let problem = PredictionProblem::new(known.clone(), values.clone(), unknown.clone(), *theta, mode);
            let pred = predict(&problem)?;
            Ok(HoldoutScore {
                mode,
                mse: mse(truth.as_slice(), &pred.mean)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_locations, Location, Metric};
    use crate::stats::sample_measurements;

    fn points(p: &[(f64, f64)]) -> LocationSet {
        LocationSet::new(p.iter().map(|&(x, y)| Location::new(x, y)).collect(), Metric::Euclidean).unwrap()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        let t = [0.3, -1.0, 4.0, 2.0];
        let p: Vec<f64> = t.iter().map(|v| v + 1.0).collect();
        assert!((mse(&t, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_known_point_is_scaled_correlation() {
        let known = points(&[(0.0, 0.0)]);
        let unknown = points(&[(0.1, 0.0), (5.0, 5.0)]);
        let theta = MaternParams::new(2.0, 0.1, 0.5).unwrap();
        let z = MeasurementVector::new(vec![3.0]).unwrap();
        let mut prob = PredictionProblem::new(known, z, unknown, theta, Mode::Dense);
        prob.variance = true;
        let out = predict(&prob).unwrap();
        assert!((out.mean[0] - 3.0 * (-1.0f64).exp()).abs() < 1e-14);
        assert!(out.mean[1].abs() < 1e-8 * 2.0);
        let var = out.variance.unwrap();
        assert!((var[0] - 2.0 * (1.0 - (-2.0f64).exp())).abs() < 1e-13);
        assert!((var[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn exact_interpolation_at_known_location() {
        let set = generate_locations(200, 4).unwrap();
        let theta = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let z = sample_measurements(&set, &theta, 9).unwrap();
        let unknown = set.select(&[17, 150]).unwrap();
        let out = predict(&PredictionProblem::new(set.clone(), z.clone(), unknown, theta, Mode::Dense)).unwrap();
        for (k, i) in [17, 150].into_iter().enumerate() {
            let want = z.as_slice()[i];
            assert!((out.mean[k] - want).abs() <= 1e-10 * want.abs(), "{} vs {want}", out.mean[k]);
        }
    }

    #[test]
    fn linear_in_measurements() {
        let set = generate_locations(150, 2).unwrap();
        let theta = MaternParams::new(1.0, 0.1, 1.3).unwrap();
        let z = sample_measurements(&set, &theta, 3).unwrap();
        let unknown = points(&[(0.5, 0.5), (0.01, 0.99)]);
        let base = predict(&PredictionProblem::new(set.clone(), z.clone(), unknown.clone(), theta, Mode::Dense)).unwrap();
        let scaled = MeasurementVector::new(z.as_slice().iter().map(|v| -2.5 * v).collect()).unwrap();
        let out = predict(&PredictionProblem::new(set, scaled, unknown, theta, Mode::Dense)).unwrap();
        for (a, b) in out.mean.iter().zip(&base.mean) {
            assert!((a + 2.5 * b).abs() <= 1e-12 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn invalid_problems() {
        let theta = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let known = points(&[(0.0, 0.0), (1.0, 0.0)]);
        let unknown = points(&[(0.5, 0.0)]);
        let z = MeasurementVector::new(vec![1.0]).unwrap();
        assert!(predict(&PredictionProblem::new(known.clone(), z, unknown.clone(), theta, Mode::Dense)).is_err());
        let z = MeasurementVector::new(vec![1.0, 2.0]).unwrap();
        let gcd = LocationSet::new(vec![Location::new(0.5, 0.0)], Metric::great_circle_km()).unwrap();
        assert!(predict(&PredictionProblem::new(known.clone(), z.clone(), gcd, theta, Mode::Dense)).is_err());
        let mut p = PredictionProblem::new(known, z, unknown, theta, Mode::tlr(1e-9).unwrap());
        p.variance = true;
        assert!(predict(&p).is_err());
    }

    #[test]
    fn holdout_is_deterministic_and_handles_one_known_point() {
        let set = generate_locations(60, 1).unwrap();
        let theta = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let z = sample_measurements(&set, &theta, 2).unwrap();
        let modes = [Mode::Dense, Mode::tlr(1e-9).unwrap()];
        let a = holdout_experiment(&set, &z, &theta, 10, &modes, 5).unwrap();
        let b = holdout_experiment(&set, &z, &theta, 10, &modes, 5).unwrap();
        assert_eq!(a, b);
        assert!((a[0].mse - a[1].mse).abs() <= 1e-6 * a[0].mse);
        let c = holdout_experiment(&set, &z, &theta, 59, &[Mode::Dense], 5).unwrap();
        assert!(c[0].mse.is_finite());
        assert!(holdout_experiment(&set, &z, &theta, 60, &[Mode::Dense], 5).is_err());
        let (held, kept) = holdout_split(60, 10, 5).unwrap();
        assert_eq!(held.len() + kept.len(), 60);
        assert!(held.iter().all(|i| !kept.contains(i)));
    }
}
