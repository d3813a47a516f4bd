//! Gaussian log-likelihood, synthetic measurements and maximum likelihood
//! estimation of the Matérn parameters.
//!
//! For measurements `z` at `n` locations with covariance `Sigma(theta)`,
//!
//! ```text
//! l(theta) = -n/2 log(2 pi) - 1/2 log|Sigma(theta)| - 1/2 z^T Sigma(theta)^{-1} z
//! ```
//!
//! is evaluated with one tile Cholesky factorization per call, in dense or
//! TLR mode. [`mle_fit`] maximizes it with a bounded Nelder–Mead simplex.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{generate_locations, spatial_order, LocationSet};
use crate::kernels::{MaternParams, MAX_SMOOTHNESS};
use crate::linalg::{cholesky, dense_cholesky, quadratic_form, CholeskyFactor};
use crate::tile::{assemble_covariance, Footprint, Mode, TileGrid};

/// Measurements aligned index-for-index with a [`LocationSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector(Vec<f64>);

impl MeasurementVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("measurement {i} is not finite ({})", values[i])));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// The entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self(indices.iter().map(|&i| self.0[i]).collect())
    }
}

/// Box constraints on `(theta1, theta2, theta3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lower: [0.01, 0.001, 0.1],
            upper: [5.0, 3.0, 3.0],
        }
    }
}

impl Bounds {
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for c in 0..3 {
            let (lo, hi) = (self.lower[c], self.upper[c]);
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::Domain(format!("bounds for theta{} must satisfy 0 < lower < upper, got [{lo}, {hi}]", c + 1)));
            }
        }
        if self.upper[2] > MAX_SMOOTHNESS {
            return Err(Error::Domain(format!(
                "smoothness upper bound {} exceeds {MAX_SMOOTHNESS}",
                self.upper[2]
            )));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64; 3]) -> bool {
        (0..3).all(|c| theta[c] >= self.lower[c] && theta[c] <= self.upper[c])
    }

    /// Componentwise geometric mean of the bounds.
    pub fn log_midpoint(&self) -> [f64; 3] {
        std::array::from_fn(|c| (self.lower[c] * self.upper[c]).sqrt())
    }
}

/// Settings for likelihood evaluation and its maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodConfig {
    pub mode: Mode,
    /// Tile size; `None` picks [`Mode::default_tile_size`].
    pub tile_size: Option<usize>,
    /// Added to the diagonal during estimation.
    pub nugget: f64,
    pub bounds: Bounds,
    /// Starting point; `None` uses [`Bounds::log_midpoint`].
    pub theta0: Option<[f64; 3]>,
    pub max_iterations: usize,
    /// Relative spread of the simplex objective values at which the search stops.
    pub tolerance: f64,
    /// Evaluate on the locations sorted along a Z-order curve. The likelihood
    /// does not depend on the ordering, but TLR ranks do.
    pub spatial_order: bool,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Dense,
            tile_size: None,
            nugget: 0.0,
            bounds: Bounds::default(),
            theta0: None,
            max_iterations: 100,
            tolerance: 1e-9,
            spatial_order: true,
        }
    }
}

impl LikelihoodConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if let Some(t0) = self.theta0 {
            if !self.bounds.contains(&t0) {
                return Err(Error::Domain(format!("initial theta {t0:?} outside the bounds")));
            }
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::Domain(format!("nugget {} must be non-negative", self.nugget)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.tile_size == Some(0) {
            return Err(Error::Domain("tile size must be positive".into()));
        }
        if let Mode::Tlr { accuracy } = self.mode {
            Mode::tlr(accuracy)?;
        }
        Ok(())
    }

    pub fn tile_size_for(&self, n: usize) -> usize {
        self.tile_size.unwrap_or_else(|| self.mode.default_tile_size(n))
    }

    pub fn initial_theta(&self) -> [f64; 3] {
        self.theta0.unwrap_or_else(|| self.bounds.log_midpoint())
    }
}

/// A data set prepared for repeated likelihood evaluations.
#[derive(Debug, Clone)]
pub struct Likelihood {
    set: LocationSet,
    z: Vec<f64>,
    grid: TileGrid,
    mode: Mode,
}

impl Likelihood {
    pub fn new(set: &LocationSet, z: &MeasurementVector, cfg: &LikelihoodConfig) -> Result<Self> {
        if set.len() != z.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} locations but {} measurements",
                set.len(),
                z.len()
            )));
        }
        let (set, z) = if cfg.spatial_order {
            let order = spatial_order(set);
            (set.select(&order)?, z.select(&order).into_vec())
        } else {
            (set.clone(), z.as_slice().to_vec())
        };
        let grid = TileGrid::new(set.len(), cfg.tile_size_for(set.len()))?;
        Ok(Self {
            set,
            z,
            grid,
            mode: cfg.mode,
        })
    }

    pub fn n(&self) -> usize {
        self.set.len()
    }

    pub fn grid(&self) -> TileGrid {
        self.grid
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// `l(p)`; failures carry the offending `theta`.
    pub fn eval(&self, p: &MaternParams) -> Result<f64> {
        self.eval_detailed(p).map(|e| e.loglik)
    }

    /// `l(p)` together with the storage of the assembled covariance.
    pub fn eval_detailed(&self, p: &MaternParams) -> Result<Evaluation> {
        self.eval_inner(p).map_err(|e| Error::Likelihood {
            theta: p.theta(),
            source: Box::new(e),
        })
    }

    fn eval_inner(&self, p: &MaternParams) -> Result<Evaluation> {
        let sigma = assemble_covariance(&self.set, p, self.grid, self.mode)?;
        let footprint = sigma.footprint();
        let ranks = sigma.ranks();
        let f = cholesky(sigma)?;
        Ok(Evaluation {
            loglik: gaussian_log_likelihood(&f, &self.z)?,
            footprint,
            ranks,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loglik: f64,
    /// Storage of the covariance matrix before factorization.
    pub footprint: Footprint,
    /// Ranks of the strictly lower tiles, row by row (`(1,0), (2,0), (2,1), ...`).
    pub ranks: Vec<usize>,
}

fn gaussian_log_likelihood(f: &CholeskyFactor, z: &[f64]) -> Result<f64> {
    let n = z.len() as f64;
    let q = quadratic_form(f, z)?;
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * f.log_det() - 0.5 * q)
}

/// Gaussian log-likelihood of `z` under Matérn parameters `p` (nugget
/// included), with the mode and tiling of `cfg`.
pub fn log_likelihood(
    set: &LocationSet,
    z: &MeasurementVector,
    p: &MaternParams,
    cfg: &LikelihoodConfig,
) -> Result<f64> {
    Likelihood::new(set, z, cfg)?.eval(p)
}

/// Draws `z = L w` with `L` the dense Cholesky factor of `Sigma(p)` and
/// `w` standard normal. The factor is computed once.
#[derive(Debug, Clone)]
pub struct MeasurementSampler {
    factor: CholeskyFactor,
}

impl MeasurementSampler {
    pub fn new(set: &LocationSet, p: &MaternParams) -> Result<Self> {
        let grid = TileGrid::new(set.len(), Mode::Dense.default_tile_size(set.len()))?;
        let factor = dense_cholesky(assemble_covariance(set, p, grid, Mode::Dense)?)?;
        Ok(Self { factor })
    }

    pub fn sample(&self, seed: u64) -> MeasurementVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.factor.n();
        let w = DMatrix::from_iterator(n, 1, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let z = self.factor.mul_lower(&w).expect("sample length matches the factor");
        MeasurementVector(z.iter().copied().collect())
    }
}

/// One synthetic measurement vector at `set` for parameters `p_true`.
pub fn sample_measurements(set: &LocationSet, p_true: &MaternParams, seed: u64) -> Result<MeasurementVector> {
    Ok(MeasurementSampler::new(set, p_true)?.sample(seed))
}

/// One objective evaluation during a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Simplex iteration; 0 for the initial simplex.
    pub iteration: usize,
    pub theta: [f64; 3],
    /// `-inf` when the evaluation failed.
    pub loglik: f64,
    /// Seconds since the start of the fit.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub theta_hat: MaternParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// False when the iteration limit stopped the search.
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    pub mode: Mode,
    pub tile_size: Option<usize>,
}

impl EstimationResult {
    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }

    /// Trace as CSV: `iter,theta1,theta2,theta3,loglik,seconds`.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,theta1,theta2,theta3,loglik,seconds")?;
        for e in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.iteration, e.theta[0], e.theta[1], e.theta[2], e.loglik, e.seconds
            )?;
        }
        Ok(())
    }
}

/// Maximum likelihood estimate of `theta` from measurements `z` at `set`.
///
/// Evaluations that fail numerically (for example a covariance that is not
/// positive definite) count as `-inf`; the fit fails only if none succeeds.
pub fn mle_fit(set: &LocationSet, z: &MeasurementVector, cfg: &LikelihoodConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    let lik = Likelihood::new(set, z, cfg)?;
    let nugget = cfg.nugget;
    let mut result = mle_fit_with(|theta| lik.eval(&MaternParams::from_theta(*theta, nugget)?), cfg)?;
    result.tile_size = Some(lik.grid().tile_size());
    Ok(result)
}

/// Objective value and rank position of a simplex vertex.
#[derive(Debug, Clone, Copy)]
struct Vertex {
    x: [f64; 3],
    /// Minimized: `-l`, `+inf` for failures.
    f: f64,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Initial simplex edge as a fraction of each log-bound interval.
const INITIAL_STEP: f64 = 0.2;
/// Guards the relative spread test when the objective is near zero.
const TINY: f64 = 1e-10;
/// Log-space simplex diameter treated as collapsed.
const X_TOLERANCE: f64 = 1e-12;

/// Bounded Nelder–Mead maximization of an arbitrary objective over the
/// bounds of `cfg`; [`mle_fit`] calls it with the log-likelihood.
///
/// The simplex lives in `ln theta` with proposals clamped to the log bounds.
/// Errors and non-finite values from `objective` count as `-inf`.
pub fn mle_fit_with<F>(mut objective: F, cfg: &LikelihoodConfig) -> Result<EstimationResult>
where
    F: FnMut(&[f64; 3]) -> Result<f64>,
{
    cfg.validate()?;
    let lo: [f64; 3] = std::array::from_fn(|c| cfg.bounds.lower[c].ln());
    let hi: [f64; 3] = std::array::from_fn(|c| cfg.bounds.upper[c].ln());
    let clamp = |x: [f64; 3]| -> [f64; 3] { std::array::from_fn(|c| x[c].clamp(lo[c], hi[c])) };
    let to_theta = |x: &[f64; 3]| -> [f64; 3] {
        std::array::from_fn(|c| x[c].exp().clamp(cfg.bounds.lower[c], cfg.bounds.upper[c]))
    };

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut iteration = 0;
    let mut eval = |x: [f64; 3], iteration: usize, trace: &mut Vec<TraceEntry>| -> Vertex {
        let theta = to_theta(&x);
        let l = match objective(&theta) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        };
        trace.push(TraceEntry {
            iteration,
            theta,
            loglik: l,
            seconds: start.elapsed().as_secs_f64(),
        });
        Vertex { x, f: -l }
    };

    let x0 = clamp(cfg.initial_theta().map(f64::ln));
    let mut simplex = vec![eval(x0, 0, &mut trace)];
    for c in 0..3 {
        let step = INITIAL_STEP * (hi[c] - lo[c]);
        let mut x = x0;
        x[c] = if x0[c] + step <= hi[c] { x0[c] + step } else { x0[c] - step };
        simplex.push(eval(x, 0, &mut trace));
    }

    let mut converged = false;
    while iteration < cfg.max_iterations {
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        if stopped(&simplex, cfg.tolerance) {
            converged = true;
            break;
        }
        if simplex.iter().all(|v| v.f.is_infinite()) {
            break;
        }
        iteration += 1;
        let worst = simplex[3];
        let centroid: [f64; 3] = std::array::from_fn(|c| simplex[..3].iter().map(|v| v.x[c]).sum::<f64>() / 3.0);
        let towards = |t: f64| -> [f64; 3] { clamp(std::array::from_fn(|c| centroid[c] + t * (worst.x[c] - centroid[c]))) };

        let r = eval(towards(-REFLECT), iteration, &mut trace);
        if r.f < simplex[0].f {
            let e = eval(towards(-REFLECT * EXPAND), iteration, &mut trace);
            simplex[3] = if e.f < r.f { e } else { r };
            continue;
        }
        if r.f < simplex[2].f {
            simplex[3] = r;
            continue;
        }
        let c = if r.f < worst.f {
            eval(towards(-REFLECT * CONTRACT), iteration, &mut trace)
        } else {
            eval(towards(CONTRACT), iteration, &mut trace)
        };
        if c.f < r.f.min(worst.f) {
            simplex[3] = c;
            continue;
        }
        let best = simplex[0].x;
        for v in simplex.iter_mut().skip(1) {
            let x = clamp(std::array::from_fn(|k| best[k] + SHRINK * (v.x[k] - best[k])));
            *v = eval(x, iteration, &mut trace);
        }
    }
    simplex.sort_by(|a, b| a.f.total_cmp(&b.f));

    let best = simplex[0];
    if best.f.is_infinite() {
        let last = trace.last().map(|e| e.theta).unwrap_or_default();
        return Err(Error::NoFiniteEvaluation { last_theta: last });
    }
    Ok(EstimationResult {
        theta_hat: MaternParams::from_theta(to_theta(&best.x), cfg.nugget)?,
        log_likelihood: -best.f,
        iterations: iteration,
        converged,
        trace,
        mode: cfg.mode,
        tile_size: cfg.tile_size,
    })
}

/// Sorted simplex has converged in objective value or collapsed in space.
fn stopped(simplex: &[Vertex], tol: f64) -> bool {
    let (fl, fh) = (simplex[0].f, simplex[3].f);
    if fl.is_finite() && fh.is_finite() && 2.0 * (fh - fl).abs() <= tol * (fl.abs() + fh.abs() + TINY) {
        return true;
    }
    let diameter = simplex[1..]
        .iter()
        .flat_map(|v| (0..3).map(move |c| (v.x[c] - simplex[0].x[c]).abs()))
        .fold(0.0, f64::max);
    diameter <= X_TOLERANCE
}

/// Seed of the measurement vector of replicate `r` in [`mc_experiment`].
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64 + 1);
    rng.next_u64()
}

/// One fit of a Monte Carlo experiment.
#[derive(Debug)]
pub struct McRun {
    pub mode: Mode,
    pub replicate: usize,
    pub outcome: Result<EstimationResult>,
}

/// Monte Carlo study: one location set from `seed`, `replicates` measurement
/// vectors drawn at `theta_true`, and one fit per vector per mode.
///
/// Runs are ordered by replicate, then by mode. Failed fits are kept as
/// errors in the output rather than aborting the experiment.
pub fn mc_experiment(
    n: usize,
    theta_true: &MaternParams,
    replicates: usize,
    modes: &[Mode],
    seed: u64,
    base: &LikelihoodConfig,
) -> Result<Vec<McRun>> {
    base.validate()?;
    let set = generate_locations(n, seed)?;
    let sampler = MeasurementSampler::new(&set, theta_true)?;
    let runs: Vec<Vec<McRun>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let z = sampler.sample(replicate_seed(seed, r));
            modes
                .iter()
                .map(|&mode| {
                    let cfg = LikelihoodConfig { mode, ..base.clone() };
                    McRun {
                        mode,
                        replicate: r,
                        outcome: mle_fit(&set, &z, &cfg),
                    }
                })
                .collect()
        })
        .collect();
    Ok(runs.into_iter().flatten().collect())
}

/// First quartile, median and third quartile (linear interpolation between
/// order statistics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// `NaN` everywhere for an empty sample.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
        }
    }

    pub fn overlaps(&self, other: &Quartiles) -> bool {
        self.q1 <= other.q3 && other.q1 <= self.q3
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n => {
            let h = q * (n - 1) as f64;
            let i = h.floor() as usize;
            let j = (i + 1).min(n - 1);
            sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
        }
    }
}

/// Per-mode summary of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: Mode,
    pub fits: usize,
    pub failures: usize,
    pub theta: [Quartiles; 3],
}

/// Quartiles of each `theta` component per mode, modes in order of first
/// appearance.
pub fn summarize(runs: &[McRun]) -> Vec<ModeSummary> {
    let mut modes: Vec<Mode> = Vec::new();
    for r in runs {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    modes
        .into_iter()
        .map(|mode| {
            let ok: Vec<&EstimationResult> = runs
                .iter()
                .filter(|r| r.mode == mode)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let failures = runs.iter().filter(|r| r.mode == mode && r.outcome.is_err()).count();
            let theta = std::array::from_fn(|c| {
                Quartiles::of(&ok.iter().map(|e| e.theta_hat.theta()[c]).collect::<Vec<_>>())
            });
            ModeSummary {
                mode,
                fits: ok.len(),
                failures,
                theta,
            }
        })
        .collect()
}

/// Monte Carlo runs as CSV:
/// `mode,replicate,theta1,theta2,theta3,loglik,iterations,status`.
pub fn write_mc_csv<W: Write>(runs: &[McRun], mut w: W) -> std::io::Result<()> {
    writeln!(w, "mode,replicate,theta1,theta2,theta3,loglik,iterations,status")?;
    for r in runs {
        match &r.outcome {
            Ok(e) => {
                let t = e.theta_hat.theta();
                let status = if e.converged { "ok" } else { "max_iterations" };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{status}",
                    r.mode, r.replicate, t[0], t[1], t[2], e.log_likelihood, e.iterations
                )?;
            }
            Err(err) => {
                let msg = err.to_string().replace([',', '\n'], ";");
                writeln!(w, "{},{},,,,,,error: {msg}", r.mode, r.replicate)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Location, Metric};

    fn single_point() -> LocationSet {
        LocationSet::new(vec![Location::new(0.3, 0.4)], Metric::Euclidean).unwrap()
    }

    #[test]
    fn one_point_likelihood() {
        let set = single_point();
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let cfg = LikelihoodConfig::default();
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let z0 = MeasurementVector::new(vec![0.0]).unwrap();
        let l0 = log_likelihood(&set, &z0, &p, &cfg).unwrap();
        assert!((l0 + half_log_2pi).abs() < 1e-15);
        assert!((l0 + 0.918_938_5).abs() < 1e-7);
        let z1 = MeasurementVector::new(vec![1.0]).unwrap();
        let l1 = log_likelihood(&set, &z1, &p, &cfg).unwrap();
        assert!((l1 + half_log_2pi + 0.5).abs() < 1e-15);
    }

    #[test]
    fn measurement_vector_rejects_non_finite() {
        assert!(MeasurementVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(MeasurementVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn length_mismatch() {
        let set = generate_locations(4, 1).unwrap();
        let z = MeasurementVector::new(vec![0.0; 3]).unwrap();
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        assert!(matches!(
            log_likelihood(&set, &z, &p, &LikelihoodConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = LikelihoodConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.theta0 = Some([10.0, 0.1, 0.5]);
        assert!(cfg.validate().is_err());
        assert!(Bounds::new([0.1, 0.1, 0.1], [0.1, 1.0, 1.0]).is_err());
        assert!(Bounds::new([0.1, 0.1, 0.1], [1.0, 1.0, 6.0]).is_err());
        let b = Bounds::default();
        let mid = b.log_midpoint();
        assert!((mid[0] - (0.05f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_covariance_sample_is_white_noise() {
        let set = generate_locations(30, 2).unwrap();
        let p = MaternParams::with_nugget(1.0, 1e-6, 0.5, 0.0).unwrap();
        let z = sample_measurements(&set, &p, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for v in z.as_slice() {
            let w: f64 = StandardNormal.sample(&mut rng);
            assert_eq!(*v, w);
        }
        assert_eq!(z, sample_measurements(&set, &p, 7).unwrap());
        assert_ne!(z, sample_measurements(&set, &p, 8).unwrap());
    }

    #[test]
    fn quadratic_hook_recovers_argmax() {
        let target = [1.0, 0.1, 0.5];
        let cfg = LikelihoodConfig {
            max_iterations: 2000,
            tolerance: 1e-15,
            ..LikelihoodConfig::default()
        };
        let fit = mle_fit_with(
            |t| Ok(-(0..3).map(|c| (t[c] - target[c]).powi(2)).sum::<f64>()),
            &cfg,
        )
        .unwrap();
        let t = fit.theta_hat.theta();
        for c in 0..3 {
            assert!((t[c] - target[c]).abs() < 1e-6, "{t:?}");
        }
        assert!(fit.converged);
        assert!(fit.trace.len() <= 4 + 5 * fit.iterations);
    }

    #[test]
    fn argmax_on_the_boundary_stays_inside() {
        let cfg = LikelihoodConfig::default();
        let fit = mle_fit_with(|t| Ok(t[0] + t[1] - t[2]), &cfg).unwrap();
        let t = fit.theta_hat.theta();
        assert!(cfg.bounds.contains(&t));
        assert!((t[0] - 5.0).abs() < 1e-6 && (t[1] - 3.0).abs() < 1e-6 && (t[2] - 0.1).abs() < 1e-6, "{t:?}");
        for e in &fit.trace {
            assert!(cfg.bounds.contains(&e.theta));
        }
    }

    #[test]
    fn all_failures_is_an_error() {
        let cfg = LikelihoodConfig::default();
        let r = mle_fit_with(|_| Err(Error::NotPositiveDefinite { tile: 0, pivot: 0 }), &cfg);
        assert!(matches!(r, Err(Error::NoFiniteEvaluation { .. })));
        let r = mle_fit_with(|_| Ok(f64::NAN), &cfg);
        assert!(r.unwrap_err().is_numerical());
    }

    #[test]
    fn partial_failures_are_skipped() {
        // the objective fails for theta2 > 0.5
        let cfg = LikelihoodConfig::default();
        let fit = mle_fit_with(
            |t| {
                if t[1] > 0.5 {
                    Err(Error::NotPositiveDefinite { tile: 0, pivot: 0 })
                } else {
                    Ok(-(t[0] - 2.0).powi(2) - (t[1] - 0.4).powi(2) - (t[2] - 1.0).powi(2))
                }
            },
            &cfg,
        )
        .unwrap();
        let t = fit.theta_hat.theta();
        assert!((t[1] - 0.4).abs() < 1e-4, "{t:?}");
        assert!(fit.trace.iter().any(|e| e.loglik == f64::NEG_INFINITY));
    }

    #[test]
    fn fit_is_deterministic_and_traced() {
        let set = generate_locations(100, 5).unwrap();
        let p = MaternParams::new(1.0, 0.1, 0.5).unwrap();
        let z = sample_measurements(&set, &p, 1).unwrap();
        let cfg = LikelihoodConfig {
            max_iterations: 15,
            ..LikelihoodConfig::default()
        };
        let a = mle_fit(&set, &z, &cfg).unwrap();
        let b = mle_fit(&set, &z, &cfg).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        let strip = |r: &EstimationResult| r.trace.iter().map(|e| (e.iteration, e.theta, e.loglik)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.iterations, 15);
        let mut csv = Vec::new();
        a.write_trace(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iter,theta1,theta2,theta3,loglik,seconds\n"));
        assert_eq!(text.lines().count(), a.trace.len() + 1);
        let best = a.trace.iter().map(|e| e.loglik).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, a.log_likelihood);
    }

    #[test]
    fn quartiles() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
        let q = Quartiles::of(&[1.0, 2.0]);
        assert_eq!(q.median, 1.5);
        assert!(Quartiles::of(&[]).median.is_nan());
        assert!(Quartiles::of(&[1.0, 2.0, 3.0]).overlaps(&Quartiles::of(&[1.5, 2.0, 5.0])));
        assert!(!Quartiles::of(&[1.0, 2.0, 3.0]).overlaps(&Quartiles::of(&[3.5, 4.0, 5.0])));
    }

    #[test]
    fn replicate_seeds_differ() {
        let s: Vec<u64> = (0..5).map(|r| replicate_seed(42, r)).collect();
        for i in 0..5 {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_eq!(replicate_seed(42, 3), s[3]);
    }
}
