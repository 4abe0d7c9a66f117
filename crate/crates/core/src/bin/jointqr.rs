use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use jointqr::base_dist::BaseFamily;
use jointqr::config::RunConfig;
use jointqr::geometry::{center_predictors_report, PredictorDomain};
use jointqr::inference::{self, decile_taus, ExternalPredictions};
use jointqr::io::{self, DataSource, GridInfo, Manifest};
use jointqr::likelihood::Dataset;
use jointqr::par::{self, Execution};
use jointqr::sampler::{self, Posterior, PosteriorDraws};
use jointqr::simgen::{self, Design, SimSpec};
use jointqr::workload::LoglikWorkload;
use jointqr::{Error, Result};

/// Joint linear quantile regression with non-crossing planes.
#[derive(Parser)]
#[command(name = "jointqr", version)]
struct Cli {
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Center predictors around an interior point of their hull.
    Center {
        #[arg(long)]
        data: PathBuf,
        /// Columns to leave out (e.g. the response).
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        offset_out: PathBuf,
    },
    /// Run the sampler and write draws plus a manifest.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out_draws: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Coefficient means and credible bands from a fit.
    Summarize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        draws: PathBuf,
        /// Comma-separated probabilities (default 0.1,…,0.9).
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Contrast `j:tau_a:tau_b`, printed as mean,lo,hi.
        #[arg(long)]
        contrast: Vec<String>,
    },
    /// Posterior survival curves at a covariate row.
    Survival {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        draws: PathBuf,
        /// Raw covariate values, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        y_max: f64,
        #[arg(long, default_value_t = 100)]
        y_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// K-fold check-loss comparison against least squares.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        cv_seed: u64,
        /// External predictions as NAME=PATH; one row per observation,
        /// one column per tau.
        #[arg(long)]
        external: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset and its true coefficients.
    Simulate {
        #[arg(long)]
        design: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Replicated simulate-fit-score study.
    Study {
        #[arg(long)]
        design: String,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Replicate r draws its data with seed data_seed + r
        #[arg(long, default_value_t = 1)]
        data_seed: u64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-likelihood evaluations per second on a synthetic workload.
    LoglikBench {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        p: usize,
        #[arg(long, default_value_t = 0.01)]
        mesh: f64,
        #[arg(long, default_value_t = 1000)]
        evals: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long)]
    censor_col: Option<String>,
    /// Predictor columns (default: all other columns).
    #[arg(long, value_delimiter = ',')]
    predictors: Option<Vec<String>>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    /// Burn-in fraction.
    #[arg(long)]
    burnin: Option<f64>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    mesh: Option<f64>,
    #[arg(long)]
    knots: Option<usize>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.iters {
            c.iters = v;
        }
        if let Some(v) = self.burnin {
            c.burnin = v;
        }
        if let Some(v) = self.thin {
            c.thin = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.chains {
            c.chains = v;
        }
        if let Some(v) = &self.base {
            c.base_family = BaseFamily::parse(v)?;
        }
        if let Some(v) = self.mesh {
            c.mesh = v;
        }
        if let Some(v) = self.knots {
            c.knots_m = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    par::init_threads_from_env();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command, exec: Execution) -> Result<()> {
    match cmd {
        Command::Center { data, exclude, out, offset_out } => center(&data, &exclude, &out, &offset_out),
        Command::Fit { data, model, out_draws, manifest } => fit(&data, &model, &out_draws, &manifest, exec),
        Command::Summarize { manifest, draws, taus, level, out, contrast } => {
            let (m, post, draws) = reload(&manifest, &draws, exec)?;
            let taus = taus.unwrap_or_else(decile_taus);
            let level = level.unwrap_or(m.config.level);
            let bands = inference::summarize(&post, &draws, &taus, level)?;
            io::write_bands(&out, &bands)?;
            for spec in contrast {
                let (j, a, b) = parse_contrast(&spec)?;
                let iv = inference::contrast(&post, &draws, j, a, b, level)?;
                println!("contrast,{j},{a},{b},{},{},{}", iv.mean, iv.lo, iv.hi);
            }
            Ok(())
        }
        Command::Survival { manifest, draws, x, y_min, y_max, y_points, out } => {
            let (_, post, draws) = reload(&manifest, &draws, exec)?;
            if y_points < 2 || !(y_max > y_min) {
                return Err(Error::InvalidParameter("need y_max > y_min and at least two points".into()));
            }
            let ys: Vec<f64> =
                (0..y_points).map(|k| y_min + (y_max - y_min) * k as f64 / (y_points - 1) as f64).collect();
            let curves = inference::survival_curves(&post, &draws, &x, &ys)?;
            let rows: Vec<Vec<f64>> = curves
                .iter()
                .enumerate()
                .flat_map(|(d, c)| ys.iter().zip(c).map(move |(y, s)| vec![d as f64, *y, *s]))
                .collect();
            io::write_numeric_csv(&out, &["draw".into(), "y".into(), "survival".into()], &rows)
        }
        Command::Cv { data, model, folds, cv_seed, external, taus, out } => {
            let cfg = model.resolve()?;
            let raw = load(&data)?;
            let taus = taus.unwrap_or_else(decile_taus);
            let ext = external.iter().map(|s| load_external(s)).collect::<Result<Vec<_>>>()?;
            let report = inference::cross_validate(
                &raw.x,
                &raw.y,
                raw.censored.as_deref(),
                folds,
                cv_seed,
                &taus,
                &cfg.fit_settings(exec),
                &ext,
            )?;
            let mut w = csv::Writer::from_path(&out).map_err(Error::from)?;
            w.write_record(["method", "tau", "train", "test", "relative"])?;
            for m in &report.methods {
                for (t, tau) in report.taus.iter().enumerate() {
                    w.write_record([
                        m.name.clone(),
                        tau.to_string(),
                        m.train[t].to_string(),
                        m.test[t].to_string(),
                        m.relative[t].to_string(),
                    ])?;
                }
            }
            w.flush().map_err(|e| Error::Io { path: out, source: e })
        }
        Command::Simulate { design, n, seed, out, truth } => {
            let design = Design::parse(&design)?;
            let data = simgen::generate(SimSpec { design, n, seed })?;
            let mut header: Vec<String> = (1..=design.p()).map(|j| format!("x{j}")).collect();
            header.push("y".into());
            let rows: Vec<Vec<f64>> = data
                .x
                .iter()
                .zip(&data.y)
                .map(|(x, y)| x.iter().copied().chain([*y]).collect())
                .collect();
            io::write_numeric_csv(&out, &header, &rows)?;
            if let Some(path) = truth {
                let taus: Vec<f64> = (1..=99).map(|k| k as f64 / 100.0).collect();
                let mut header = vec!["tau".to_string()];
                header.extend((0..=design.p()).map(|j| format!("beta{j}")));
                let rows: Vec<Vec<f64>> = taus
                    .iter()
                    .zip(data.truth(&taus))
                    .map(|(t, c)| std::iter::once(*t).chain(c).collect())
                    .collect();
                io::write_numeric_csv(&path, &header, &rows)?;
            }
            Ok(())
        }
        Command::Study { design, replicates, n, data_seed, model, taus, out } => {
            let design = Design::parse(&design)?;
            let cfg = model.resolve()?;
            let taus = taus.unwrap_or_else(decile_taus);
            // replicates run in parallel; each fit stays sequential inside
            let settings = cfg.fit_settings(Execution::Sequential);
            let (score, _) = simgen::study(design, replicates, n, data_seed, &taus, &settings, exec)?;
            let mut rows = Vec::new();
            for (t, tau) in score.taus.iter().enumerate() {
                for j in 0..score.mae.len() {
                    rows.push(vec![*tau, j as f64, score.mae[j][t], score.coverage[j][t]]);
                }
            }
            io::write_numeric_csv(&out, &["tau".into(), "coef".into(), "mae".into(), "coverage".into()], &rows)
        }
        Command::LoglikBench { n, p, mesh, evals, seed } => {
            let w = LoglikWorkload::new(n, p, mesh, seed, exec)?;
            let rate = w.throughput(evals);
            println!("n={n} p={p} mesh={mesh} grid={} evals={evals} evals_per_sec={rate:.1}", w.post.grid.len());
            Ok(())
        }
    }
}

fn center(data: &Path, exclude: &[String], out: &Path, offset_out: &Path) -> Result<()> {
    let (names, rows) = io::read_numeric_csv(data)?;
    for e in exclude {
        if !names.contains(e) {
            return Err(Error::Data { path: data.to_path_buf(), message: format!("column '{e}' not found") });
        }
    }
    let keep: Vec<usize> = (0..names.len()).filter(|&i| !exclude.contains(&names[i])).collect();
    let raw: Vec<Vec<f64>> = rows.iter().map(|r| keep.iter().map(|&i| r[i]).collect()).collect();
    let report = center_predictors_report(&raw)?;
    let header: Vec<String> = keep.iter().map(|&i| names[i].clone()).collect();
    let centered: Vec<Vec<f64>> = report.domain.rows().map(|r| r.to_vec()).collect();
    io::write_numeric_csv(out, &header, &centered)?;
    io::write_numeric_csv(offset_out, &header, &[report.domain.offset().to_vec()])
}

fn load(args: &DataArgs) -> Result<io::RawData> {
    io::load_dataset(&args.data, &args.response, args.censor_col.as_deref(), args.predictors.as_deref())
}

fn fit(args: &DataArgs, model: &ModelArgs, out_draws: &Path, manifest: &Path, exec: Execution) -> Result<()> {
    let cfg = model.resolve()?;
    let raw = load(args)?;
    info!("fitting {} observations with {} predictors", raw.n(), raw.x[0].len());
    let (post, draws) = sampler::fit(&raw.x, raw.y.clone(), raw.censored.clone(), &cfg.fit_settings(exec))?;
    io::write_draws(out_draws, &draws)?;
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        data: DataSource {
            path: std::fs::canonicalize(&args.data).unwrap_or_else(|_| args.data.clone()),
            response: args.response.clone(),
            censor: args.censor_col.clone(),
            predictors: raw.predictor_names.clone(),
            n: raw.n(),
            offset: post.data.domain.offset().to_vec(),
        },
        grid: GridInfo {
            n_target: post.grid.n_target(),
            mesh: post.grid.mesh(),
            points: post.grid.len(),
            first: post.grid.first(),
            last: post.grid.last(),
            anchor: post.grid.anchor(),
        },
        lambdas: post.gp.lambdas.clone(),
        acceptance: draws.acceptance.clone(),
        draws: draws.len(),
        wall_time_secs: draws.elapsed_secs,
        config: cfg,
    };
    io::write_manifest(manifest, &m)
}

/// Rebuilds the posterior of a finished fit from its manifest and draws.
fn reload(manifest: &Path, draws_path: &Path, exec: Execution) -> Result<(Manifest, Posterior, PosteriorDraws)> {
    let m = io::read_manifest(manifest)?;
    let raw = io::load_dataset(&m.data.path, &m.data.response, m.data.censor.as_deref(), Some(&m.data.predictors))?;
    let domain = PredictorDomain::with_offset(&raw.x, m.data.offset.clone())?;
    let data = Dataset::new(domain, raw.y, raw.censored)?;
    let cfg = &m.config;
    let post = Posterior::new(data, cfg.base_family, cfg.mesh, &cfg.hyper(), exec)?;
    let draws = io::read_draws(draws_path, post.p(), post.m())?;
    let pd = PosteriorDraws {
        draws,
        acceptance: m.acceptance.clone(),
        acceptance_trace: Vec::new(),
        seed: m.seed,
        config: cfg.sampler(),
        elapsed_secs: m.wall_time_secs,
    };
    Ok((m, post, pd))
}

fn parse_contrast(spec: &str) -> Result<(usize, f64, f64)> {
    let bad = || Error::InvalidParameter(format!("contrast '{spec}' must look like j:tau_a:tau_b"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn load_external(spec: &str) -> Result<ExternalPredictions> {
    let (name, path) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("external predictions '{spec}' must be NAME=PATH")))?;
    let (_, values) = io::read_numeric_csv(Path::new(path))?;
    Ok(ExternalPredictions { name: name.to_string(), values })
}
