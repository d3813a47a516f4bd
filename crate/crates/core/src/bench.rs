//! Timing harness: one likelihood evaluation (assembly, factorization,
//! solve) per configuration, timed as the median of repeated runs.
//!
//! Configuration is plain `key = value` text; list values are comma
//! separated and may be wrapped in brackets. `#` starts a comment.
//!
//! ```text
//! n = 400, 1600          # required
//! modes = dense, tlr     # default: dense, tlr
//! eps = 1e-5, 1e-9       # required when tlr is listed
//! nb = 200               # default: per-mode automatic size
//! theta = 1:0.1:0.5      # default: 1:0.1:0.5
//! nugget = 0
//! seed = 1
//! repetitions = 3
//! memory_limit_mb = 2048 # rows whose dense storage would exceed it are skipped
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::generate_locations;
use crate::io::format_f64;
use crate::kernels::MaternParams;
use crate::stats::{sample_measurements, LikelihoodConfig, Likelihood};
use crate::tile::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub n: Vec<usize>,
    pub dense: bool,
    pub tlr: bool,
    pub eps: Vec<f64>,
    /// Empty means the mode's default tile size.
    pub nb: Vec<usize>,
    pub theta: MaternParams,
    pub seed: u64,
    pub repetitions: usize,
    pub memory_limit_mb: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n: Vec::new(),
            dense: true,
            tlr: true,
            eps: Vec::new(),
            nb: Vec::new(),
            theta: MaternParams::new(1.0, 0.1, 0.5).expect("valid default parameters"),
            seed: 1,
            repetitions: 3,
            memory_limit_mb: 2048.0,
        }
    }
}

/// Parses `T1:T2:T3`.
pub fn parse_theta(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Input(format!("expected T1:T2:T3, found '{s}'")));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| Error::Input(format!("invalid number '{p}' in '{s}'")))?;
    }
    Ok(out)
}

fn list<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(|v| v.trim().trim_matches('"'))
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Input(format!("line {line}: invalid value '{v}' for '{key}'")))
        })
        .collect()
}

fn single<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    let mut v = list(key, value, line)?;
    if v.len() != 1 {
        return Err(Error::Input(format!("line {line}: '{key}' takes exactly one value")));
    }
    Ok(v.remove(0))
}

impl BenchmarkConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut theta = [1.0, 0.1, 0.5];
        let mut nugget = 0.0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() || (content.starts_with('[') && !content.contains('=')) {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Input(format!("line {line}: expected key = value")));
            };
            let key = key.trim();
            match key {
                "n" => cfg.n = list(key, value, line)?,
                "eps" | "accuracy" => cfg.eps = list(key, value, line)?,
                "nb" | "tile_size" => cfg.nb = list(key, value, line)?,
                "modes" | "mode" => {
                    let modes: Vec<String> = list(key, value, line)?;
                    cfg.dense = false;
                    cfg.tlr = false;
                    for m in modes {
                        match m.to_ascii_lowercase().as_str() {
                            "dense" => cfg.dense = true,
                            "tlr" => cfg.tlr = true,
                            other => return Err(Error::Input(format!("line {line}: unknown mode '{other}'"))),
                        }
                    }
                }
                "theta" => {
                    let v: String = single(key, value, line)?;
                    theta = parse_theta(&v).map_err(|e| Error::Input(format!("line {line}: {e}")))?;
                }
                "nugget" => nugget = single(key, value, line)?,
                "seed" => cfg.seed = single(key, value, line)?,
                "repetitions" => cfg.repetitions = single(key, value, line)?,
                "memory_limit_mb" => cfg.memory_limit_mb = single(key, value, line)?,
                other => return Err(Error::Input(format!("line {line}: unknown key '{other}'"))),
            }
        }
        cfg.theta = MaternParams::from_theta(theta, nugget).map_err(|e| Error::Input(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::Input("'n' must list positive sizes".into()));
        }
        if !self.dense && !self.tlr {
            return Err(Error::Input("no modes selected".into()));
        }
        if self.tlr && self.eps.is_empty() {
            return Err(Error::Input("'eps' is required for tlr mode".into()));
        }
        for &e in &self.eps {
            Mode::tlr(e).map_err(|err| Error::Input(err.to_string()))?;
        }
        if self.nb.contains(&0) {
            return Err(Error::Input("tile sizes must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Input("repetitions must be positive".into()));
        }
        Ok(())
    }

    /// Every `(n, mode, nb)` combination, `nb = None` meaning automatic.
    pub fn combinations(&self) -> Vec<(usize, Mode, Option<usize>)> {
        let mut modes = Vec::new();
        if self.dense {
            modes.push(Mode::Dense);
        }
        if self.tlr {
            modes.extend(self.eps.iter().map(|&accuracy| Mode::Tlr { accuracy }));
        }
        let nbs: Vec<Option<usize>> = if self.nb.is_empty() {
            vec![None]
        } else {
            self.nb.iter().map(|&b| Some(b)).collect()
        };
        let mut out = Vec::new();
        for &n in &self.n {
            for &mode in &modes {
                for &nb in &nbs {
                    out.push((n, mode, nb));
                }
            }
        }
        out
    }
}

/// One benchmark or experiment measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub mode: Mode,
    pub n: usize,
    pub nb: usize,
    /// Median seconds per likelihood evaluation.
    pub seconds: f64,
    /// Reals held by the assembled covariance.
    pub stored_reals: usize,
    /// Reals the same tiles would hold dense.
    pub dense_reals: usize,
    pub compression_ratio: f64,
    pub loglik: f64,
    pub theta_hat: Option<[f64; 3]>,
    pub mse: Option<f64>,
    /// `ok`, or the error that stopped this row.
    pub status: String,
}

impl ReportRow {
    fn failed(mode: Mode, n: usize, nb: usize, status: String) -> Self {
        Self {
            mode,
            n,
            nb,
            seconds: f64::NAN,
            stored_reals: 0,
            dense_reals: 0,
            compression_ratio: f64::NAN,
            loglik: f64::NAN,
            theta_hat: None,
            mse: None,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

const HEADER: &str =
    "mode,eps,n,nb,seconds,stored_reals,dense_reals,compression_ratio,loglik,theta1,theta2,theta3,mse,status";

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse()
            .map(Some)
            .map_err(|_| Error::Input(format!("line {line}: invalid number '{s}'")))
    }
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for r in &self.rows {
            let (mode, eps) = match r.mode {
                Mode::Dense => ("dense", String::new()),
                Mode::Tlr { accuracy } => ("tlr", format_f64(accuracy)),
            };
            let th = r.theta_hat;
            let status = r.status.replace([',', '\n', '\r'], ";");
            let _ = writeln!(
                out,
                "{mode},{eps},{},{},{},{},{},{},{},{},{},{},{},{status}",
                r.n,
                r.nb,
                format_f64(r.seconds),
                r.stored_reals,
                r.dense_reals,
                format_f64(r.compression_ratio),
                format_f64(r.loglik),
                opt(th.map(|t| t[0])),
                opt(th.map(|t| t[1])),
                opt(th.map(|t| t[2])),
                opt(r.mse),
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(Error::Input(format!("report must start with '{HEADER}'"))),
        }
        let mut rows = Vec::new();
        for (i, l) in lines {
            let line = i + 1;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 14 {
                return Err(Error::Input(format!("line {line}: expected 14 fields, found {}", f.len())));
            }
            let num = |s: &str| parse_opt(s, line)?.ok_or_else(|| Error::Input(format!("line {line}: missing number")));
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Input(format!("line {line}: invalid integer '{s}'")))
            };
            let mode = match f[0] {
                "dense" => Mode::Dense,
                "tlr" => Mode::Tlr { accuracy: num(f[1])? },
                other => return Err(Error::Input(format!("line {line}: unknown mode '{other}'"))),
            };
            let th = [parse_opt(f[9], line)?, parse_opt(f[10], line)?, parse_opt(f[11], line)?];
            let theta_hat = match th {
                [Some(a), Some(b), Some(c)] => Some([a, b, c]),
                [None, None, None] => None,
                _ => return Err(Error::Input(format!("line {line}: incomplete theta"))),
            };
            rows.push(ReportRow {
                mode,
                n: int(f[2])?,
                nb: int(f[3])?,
                seconds: num(f[4])?,
                stored_reals: int(f[5])?,
                dense_reals: int(f[6])?,
                compression_ratio: num(f[7])?,
                loglik: num(f[8])?,
                theta_hat,
                mse: parse_opt(f[12], line)?,
                status: f[13].to_string(),
            });
        }
        Ok(Self { rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Times one likelihood evaluation for a single configuration.
pub fn time_evaluation(lik: &Likelihood, theta: &MaternParams, repetitions: usize) -> Result<ReportRow> {
    let mut times = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let e = lik.eval_detailed(theta)?;
        times.push(start.elapsed().as_secs_f64());
        last = Some(e);
    }
    let e = last.expect("at least one repetition");
    Ok(ReportRow {
        mode: lik.mode(),
        n: lik.n(),
        nb: lik.grid().tile_size(),
        seconds: median(times),
        stored_reals: e.footprint.bytes_actual / 8,
        dense_reals: e.footprint.bytes_dense_equiv / 8,
        compression_ratio: e.footprint.compression_ratio,
        loglik: e.loglik,
        theta_hat: None,
        mse: None,
        status: "ok".into(),
    })
}

/// Runs every combination of the configuration. Failures are recorded in
/// their row and the run continues.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut data: Option<(usize, Result<_>)> = None;
    for (n, mode, nb) in cfg.combinations() {
        let lcfg = LikelihoodConfig {
            mode,
            tile_size: nb,
            ..LikelihoodConfig::default()
        };
        let nb_used = lcfg.tile_size_for(n);
        let dense_mb = n as f64 * (n as f64 + nb_used as f64) * 4.0 / 1e6;
        if dense_mb > cfg.memory_limit_mb {
            rows.push(ReportRow::failed(
                mode,
                n,
                nb_used,
                format!("error: needs about {dense_mb:.0} MB, above memory_limit_mb"),
            ));
            continue;
        }
        if data.as_ref().is_none_or(|(m, _)| *m != n) {
            let d = generate_locations(n, cfg.seed)
                .and_then(|set| sample_measurements(&set, &cfg.theta, cfg.seed).map(|z| (set, z)));
            data = Some((n, d));
        }
        let row = match &data {
            Some((_, Ok((set, z)))) => {
                Likelihood::new(set, z, &lcfg).and_then(|lik| time_evaluation(&lik, &cfg.theta, cfg.repetitions))
            }
            Some((_, Err(e))) => Err(Error::Input(format!("data generation failed: {e}"))),
            None => unreachable!("data prepared above"),
        };
        rows.push(row.unwrap_or_else(|e| ReportRow::failed(mode, n, nb_used, format!("error: {e}"))));
    }
    Ok(ExperimentReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_config() {
        let cfg = BenchmarkConfig::parse(
            "# sizes\nn = [100, 200]\nmodes = \"dense\", \"tlr\"\neps = 1e-5, 1e-9\nnb = 50\ntheta = 1:0.05:1.5\nseed = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.n, vec![100, 200]);
        assert_eq!(cfg.eps, vec![1e-5, 1e-9]);
        assert_eq!(cfg.nb, vec![50]);
        assert_eq!(cfg.theta.theta(), [1.0, 0.05, 1.5]);
        assert_eq!(cfg.combinations().len(), 6);
        assert!(BenchmarkConfig::parse("n = 10\nmodes = tlr\n").is_err());
        assert!(BenchmarkConfig::parse("n = 10\nbogus = 1\n").is_err());
        assert!(BenchmarkConfig::parse("n = 10\nmodes = dense\ntheta = 1:2\n").is_err());
        assert!(BenchmarkConfig::parse("modes = dense\n").is_err());
        assert!(BenchmarkConfig::parse("n = 10\nmodes = dense\n").is_ok());
    }

    #[test]
    fn single_dense_row_has_unit_ratio() {
        let cfg = BenchmarkConfig::parse("n = 400\nmodes = dense\n").unwrap();
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert!(row.is_ok(), "{}", row.status);
        assert_eq!(row.compression_ratio, 1.0);
        assert_eq!(row.stored_reals, row.dense_reals);
        assert!(row.seconds > 0.0 && row.loglik.is_finite());
    }

    #[test]
    fn report_round_trips_and_rows_are_consistent() {
        let cfg = BenchmarkConfig::parse("n = 300\neps = 1e-5, 1e-9\nnb = 75\nrepetitions = 1\n").unwrap();
        let mut r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        for row in &r.rows {
            assert!(row.is_ok());
            assert_eq!(row.compression_ratio, row.dense_reals as f64 / row.stored_reals as f64);
        }
        r.rows[1].theta_hat = Some([1.0, 0.1, 0.5]);
        r.rows[2].mse = Some(0.25);
        r.rows.push(ReportRow::failed(Mode::Dense, 10, 5, "error: x, y".into()));
        let back = ExperimentReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.rows.len(), r.rows.len());
        assert_eq!(back.to_csv(), r.to_csv());
        for (a, b) in back.rows.iter().zip(&r.rows).take(3) {
            assert_eq!(a, b);
        }
        assert_eq!(back.rows[3].status, "error: x; y");
        assert!(back.rows[3].seconds.is_nan());
    }

    #[test]
    fn failures_do_not_stop_the_run() {
        let mut cfg = BenchmarkConfig::parse("n = 50, 60\nmodes = dense\n").unwrap();
        cfg.memory_limit_mb = 0.01;
        cfg.n = vec![10, 60];
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].is_ok());
        assert!(r.rows[1].status.contains("memory"));
    }
}
