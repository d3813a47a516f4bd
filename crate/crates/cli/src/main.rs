use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tlrgeo::bench::{parse_theta, run_benchmark, BenchmarkConfig};
use tlrgeo::io::{self, format_f64, MissingPolicy};
use tlrgeo::predict::{mse, predict, PredictionProblem};
use tlrgeo::stats::{mc_experiment, mle_fit, sample_measurements, summarize, write_mc_csv, Bounds, LikelihoodConfig};
use tlrgeo::{generate_locations, Error, MaternParams, Metric, Mode, Result};

/// Matérn Gaussian random fields on dense or tile low-rank covariance matrices.
#[derive(Parser)]
#[command(name = "tlrgeo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dense,
    Tlr,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Gcd,
}

#[derive(clap::Args)]
struct ModeArgs {
    #[arg(long, value_enum, default_value = "dense")]
    mode: ModeArg,
    /// Compression accuracy for tlr mode.
    #[arg(long, default_value_t = 1e-9)]
    accuracy: f64,
    /// Tile size (default: 200 dense, up to 800 tlr).
    #[arg(long)]
    tile_size: Option<usize>,
}

impl ModeArgs {
    fn mode(&self) -> Result<Mode> {
        match self.mode {
            ModeArg::Dense => Ok(Mode::Dense),
            ModeArg::Tlr => Mode::tlr(self.accuracy).map_err(|e| Error::Input(e.to_string())),
        }
    }
}

#[derive(clap::Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    /// Sphere radius for gcd distances (km).
    #[arg(long, default_value_t = 6371.0)]
    radius: f64,
}

impl MetricArgs {
    fn metric(&self) -> Result<Metric> {
        match self.metric {
            MetricArg::Euclidean => Ok(Metric::Euclidean),
            MetricArg::Gcd if self.radius.is_finite() && self.radius > 0.0 => {
                Ok(Metric::GreatCircle { radius: self.radius })
            }
            MetricArg::Gcd => Err(Error::Input(format!("radius must be positive, got {}", self.radius))),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic locations in the unit square and a field sampled on them.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: String,
        #[arg(long, default_value_t = 0.0)]
        nugget: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_locations: PathBuf,
        #[arg(long)]
        out_values: PathBuf,
    },
    /// Maximum likelihood fit of (variance, range, smoothness).
    Estimate {
        #[arg(long)]
        locations: PathBuf,
        #[arg(long)]
        values: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// L1:U1,L2:U2,L3:U3
        #[arg(long)]
        bounds: Option<String>,
        /// Starting point T1:T2:T3.
        #[arg(long)]
        theta0: Option<String>,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 0.0)]
        nugget: f64,
        #[arg(long)]
        out_trace: PathBuf,
    },
    /// Conditional-mean prediction at new locations.
    Predict {
        #[arg(long)]
        locations: PathBuf,
        #[arg(long)]
        values: PathBuf,
        /// Covariance parameters T1:T2:T3; estimated from the data when omitted.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        nugget: f64,
        /// Locations CSV of the points to predict.
        #[arg(long)]
        unknown: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean squared error between a values file and a prediction file.
    Mse {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Monte Carlo estimation study on synthetic data.
    Mc {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        replicates: usize,
        /// Comma separated: dense, tlr:EPS, ...
        #[arg(long, default_value = "dense,tlr:1e-5,tlr:1e-9")]
        modes: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time one likelihood evaluation per configuration.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn params(theta: &str, nugget: f64) -> Result<MaternParams> {
    MaternParams::from_theta(parse_theta(theta)?, nugget).map_err(|e| Error::Input(e.to_string()))
}

fn parse_bounds(s: &str) -> Result<Bounds> {
    let pairs: Vec<&str> = s.split(',').collect();
    if pairs.len() != 3 {
        return Err(Error::Input(format!("expected L1:U1,L2:U2,L3:U3, found '{s}'")));
    }
    let mut lower = [0.0; 3];
    let mut upper = [0.0; 3];
    for (k, p) in pairs.iter().enumerate() {
        let (l, u) = p
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("expected L:U, found '{p}'")))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("invalid bound '{v}'")))
        };
        lower[k] = num(l)?;
        upper[k] = num(u)?;
    }
    Bounds::new(lower, upper).map_err(|e| Error::Input(e.to_string()))
}

fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    s.split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(|m| match m.split_once(':') {
            None if m.eq_ignore_ascii_case("dense") => Ok(Mode::Dense),
            Some((t, eps)) if t.eq_ignore_ascii_case("tlr") => eps
                .parse()
                .map_err(|_| Error::Input(format!("invalid accuracy in '{m}'")))
                .and_then(|e| Mode::tlr(e).map_err(|e| Error::Input(e.to_string()))),
            _ => Err(Error::Input(format!("unknown mode '{m}' (use dense or tlr:EPS)"))),
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn finish<W: Write>(path: &Path, mut w: W, written: std::io::Result<()>) -> Result<()> {
    written.and_then(|_| w.flush()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn mode_label(mode: Mode) -> String {
    match mode {
        Mode::Dense => "dense".into(),
        Mode::Tlr { accuracy } => format!("tlr:{accuracy:e}"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            n,
            theta,
            nugget,
            seed,
            out_locations,
            out_values,
        } => {
            let p = params(&theta, nugget)?;
            let set = generate_locations(n, seed).map_err(|e| Error::Input(e.to_string()))?;
            let z = sample_measurements(&set, &p, seed)?;
            io::save_locations(&set, &out_locations)?;
            io::save_values(z.as_slice(), &out_values)?;
            println!("wrote {n} locations and values");
        }
        Command::Estimate {
            locations,
            values,
            mode,
            metric,
            bounds,
            theta0,
            max_iters,
            nugget,
            out_trace,
        } => {
            let d = io::load_split(&locations, &values, metric.metric()?, MissingPolicy::Drop)?;
            let mut cfg = LikelihoodConfig {
                mode: mode.mode()?,
                tile_size: mode.tile_size,
                nugget,
                max_iterations: max_iters,
                ..LikelihoodConfig::default()
            };
            if let Some(b) = bounds {
                cfg.bounds = parse_bounds(&b)?;
            }
            if let Some(t) = theta0 {
                cfg.theta0 = Some(parse_theta(&t)?);
            }
            cfg.validate().map_err(|e| Error::Input(e.to_string()))?;
            let fit = mle_fit(&d.locations, &d.values, &cfg)?;
            let mut w = create(&out_trace)?;
            let written = fit.write_trace(&mut w);
            finish(&out_trace, w, written)?;
            let [t1, t2, t3] = fit.theta_hat.theta();
            println!(
                "theta_hat={}:{}:{} loglik={} iterations={} evaluations={} converged={}",
                format_f64(t1),
                format_f64(t2),
                format_f64(t3),
                format_f64(fit.log_likelihood),
                fit.iterations,
                fit.evaluations(),
                fit.converged
            );
        }
        Command::Predict {
            locations,
            values,
            theta,
            nugget,
            unknown,
            mode,
            metric,
            out,
        } => {
            let m = metric.metric()?;
            let d = io::load_split(&locations, &values, m, MissingPolicy::Drop)?;
            let unknown = io::load_locations(&unknown, m)?;
            let theta = match theta {
                Some(t) => params(&t, nugget)?,
                None => {
                    let cfg = LikelihoodConfig {
                        mode: mode.mode()?,
                        tile_size: mode.tile_size,
                        nugget,
                        ..LikelihoodConfig::default()
                    };
                    let fit = mle_fit(&d.locations, &d.values, &cfg)?;
                    let t = fit.theta_hat.theta();
                    println!("estimated theta={}:{}:{}", format_f64(t[0]), format_f64(t[1]), format_f64(t[2]));
                    MaternParams::from_theta(t, nugget)?
                }
            };
            let mut problem = PredictionProblem::new(d.locations, d.values, unknown, theta, mode.mode()?);
            problem.tile_size = mode.tile_size;
            let pred = predict(&problem)?;
            let mut w = create(&out)?;
            io::write_predictions(&mut w, &problem.unknown, &pred.mean, None)?;
            finish(&out, w, Ok(()))?;
            println!("wrote {} predictions", pred.mean.len());
        }
        Command::Mse { truth, pred } => {
            let t = io::load_values(&truth)?;
            let text = std::fs::read_to_string(&pred).map_err(|source| Error::Io {
                path: pred.clone(),
                source,
            })?;
            let source = pred.display().to_string();
            let p = match io::parse_predictions(&text, &source) {
                Ok((p, _)) => p,
                Err(_) => io::parse_values(&text, &source)?
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| v.ok_or_else(|| Error::Input(format!("{source}: value {} is missing", i + 1))))
                    .collect::<Result<_>>()?,
            };
            let e = mse(t.as_slice(), &p).map_err(|e| Error::Input(e.to_string()))?;
            println!("{}", format_f64(e));
        }
        Command::Mc {
            n,
            theta,
            replicates,
            modes,
            seed,
            max_iters,
            out,
        } => {
            let p = params(&theta, 0.0)?;
            let modes = parse_modes(&modes)?;
            if modes.is_empty() || replicates == 0 || n == 0 {
                return Err(Error::Input("n, replicates and modes must be non-empty".into()));
            }
            let base = LikelihoodConfig {
                max_iterations: max_iters,
                ..LikelihoodConfig::default()
            };
            let runs = mc_experiment(n, &p, replicates, &modes, seed, &base)?;
            let mut w = create(&out)?;
            let written = write_mc_csv(&runs, &mut w);
            finish(&out, w, written)?;
            for s in summarize(&runs) {
                let med = s.theta.map(|q| format_f64(q.median));
                println!(
                    "{}: fits={} failures={} median theta={}:{}:{}",
                    mode_label(s.mode),
                    s.fits,
                    s.failures,
                    med[0],
                    med[1],
                    med[2]
                );
            }
        }
        Command::Benchmark { config, out } => {
            let cfg = BenchmarkConfig::load(&config)?;
            let report = run_benchmark(&cfg)?;
            report.save(&out)?;
            let failed = report.rows.iter().filter(|r| !r.is_ok()).count();
            println!("{} rows, {failed} failed", report.rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
