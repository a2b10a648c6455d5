//! Command-line front end: fit models on CSV data, evaluate and invert the
//! transform, score densities, estimate information quantities, run the
//! Gaussianity test, and drive the one-class and denoising wrappers.
//!
//! All randomness flows from `--seed`; identical invocations produce
//! byte-identical outputs. `RBIG_THREADS` caps internal parallelism.

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use rbig::dataset::{load_csv, write_matrix_csv, Dataset};
use rbig::error::Error;
use rbig::flow::{self, BinPolicy, FitConfig, RotationKind};
use rbig::model_io;
use rbig::tasks::{self, NoiseModel};
use rbig::{infotheory, Result};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "rbig", version, about = "Invertible density estimation by iterative Gaussianization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct FitOpts {
    /// Rotation family: pca or random
    #[arg(long, default_value = "pca")]
    rotation: String,
    /// Master seed for all random sub-streams
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of layers
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Stop tolerance in bits (default 0.005 per dimension)
    #[arg(long)]
    tol_bits: Option<f64>,
    /// Significance level of the Gaussianity stopping test
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Row cap for the per-iteration Gaussianity test (default: 8000/d)
    #[arg(long)]
    gauss_rows: Option<usize>,
    /// Histogram bins (default: sqrt of n, clamped to [32, 1024])
    #[arg(long)]
    bins: Option<usize>,
    /// CDF clamp; evaluations stay inside [eps-u, 1 - eps-u]
    #[arg(long, default_value_t = 1e-7)]
    eps_u: f64,
}

impl FitOpts {
    fn to_config(&self) -> Result<FitConfig> {
        Ok(FitConfig {
            rotation: self.rotation.parse::<RotationKind>()?,
            max_iterations: self.max_iters,
            stop_tolerance_bits: self.tol_bits,
            gaussianity_alpha: self.alpha,
            gauss_test_rows: self.gauss_rows,
            seed: self.seed,
            bins: match self.bins {
                Some(b) => BinPolicy::Fixed(b),
                None => BinPolicy::Auto,
            },
            eps_u: self.eps_u,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a density model on CSV data and save it
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
        #[command(flatten)]
        fit: FitOpts,
    },
    /// Map data to the Gaussianized domain
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
    },
    /// Map Gaussianized points back to the data domain
    Invert {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
    },
    /// Draw samples from a fitted model
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-density (nats) of each input row
    Density {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
    },
    /// Multi-information estimate in bits
    Mi {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        has_header: bool,
        #[command(flatten)]
        fit: FitOpts,
    },
    /// Per-column marginal negentropy in bits
    Negentropy {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        has_header: bool,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Energy-statistic test of multivariate standard normality
    Gausstest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        has_header: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a one-class model on target-class data
    OneclassFit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
        /// Fraction of training points rejected by the threshold
        #[arg(long)]
        nu: f64,
        #[command(flatten)]
        fit: FitOpts,
    },
    /// Score rows against a one-class model
    OneclassScore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
    },
    /// Posterior-mean denoising under a fitted prior
    Denoise {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
        /// Noise standard deviation: one value, or one per dimension
        /// (comma-separated)
        #[arg(long)]
        sigma: String,
        #[arg(long, default_value_t = 8000)]
        n_posterior: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export the fit trace as CSV
    TraceExport {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        let kind = error_kind(&e);
        eprintln!(
            "{}",
            serde_json::json!({ "error": { "kind": kind, "message": e.to_string() } })
        );
        std::process::exit(1);
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("RBIG_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::DegenerateMarginal { .. } => "degenerate-marginal",
        Error::InsufficientData { .. } => "insufficient-data",
        Error::NonFinite(_) => "non-finite",
        Error::ShapeMismatch { .. } => "shape",
        Error::Config(_) => "config",
        Error::Parse { .. } => "parse",
        Error::Corrupt(_) => "corrupt",
        Error::VersionMismatch { .. } => "version",
        Error::Io(_) => "io",
    }
}

fn load_data(path: &PathBuf, has_header: bool) -> Result<Dataset> {
    let ds = load_csv(path, has_header)?;
    if ds.rejected_rows > 0 {
        eprintln!("dropped {} row(s) with non-finite values", ds.rejected_rows);
    }
    Ok(ds)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit {
            input,
            out,
            has_header,
            fit,
        } => {
            let ds = load_data(&input, has_header)?;
            let model = flow::fit(&ds.values, &fit.to_config()?)?;
            model_io::save_model(&model, &out)?;
            let trace = model.trace();
            println!(
                "layers={} converged={} cumulative_dj_bits={}",
                model.layers().len(),
                trace.converged,
                trace.cumulative_delta_j_bits()
            );
        }
        Command::Transform {
            model,
            input,
            out,
            has_header,
        } => {
            let m = model_io::load_model(&model)?;
            let ds = load_data(&input, has_header)?;
            let y = m.transform(&ds.values)?;
            write_matrix_csv(&out, &y, None)?;
        }
        Command::Invert {
            model,
            input,
            out,
            has_header,
        } => {
            let m = model_io::load_model(&model)?;
            let ds = load_data(&input, has_header)?;
            let x = m.inverse_transform(&ds.values)?;
            write_matrix_csv(&out, &x, None)?;
        }
        Command::Sample { model, n, seed, out } => {
            let m = model_io::load_model(&model)?;
            let s = m.sample(n, seed)?;
            write_matrix_csv(&out, &s, None)?;
        }
        Command::Density {
            model,
            input,
            out,
            has_header,
        } => {
            let m = model_io::load_model(&model)?;
            let ds = load_data(&input, has_header)?;
            let ld = m.log_density(&ds.values)?;
            let col = Array2::from_shape_fn((ld.len(), 1), |(i, _)| ld[i]);
            write_matrix_csv(&out, &col, Some(&["log_density".to_string()]))?;
        }
        Command::Mi {
            input,
            has_header,
            fit,
        } => {
            let ds = load_data(&input, has_header)?;
            let mi = infotheory::multi_information(&ds.values, &fit.to_config()?)?;
            println!("{mi}");
        }
        Command::Negentropy {
            input,
            has_header,
            bins,
        } => {
            let ds = load_data(&input, has_header)?;
            let policy = match bins {
                Some(b) => BinPolicy::Fixed(b),
                None => BinPolicy::Auto,
            };
            println!("column,negentropy_bits");
            let mut total = 0.0;
            for j in 0..ds.dim() {
                let col: Vec<f64> = ds.values.column(j).iter().cloned().collect();
                let est = infotheory::marginal_negentropy_with(&col, policy)?;
                let name = ds
                    .column_names
                    .as_ref()
                    .map(|ns| ns[j].clone())
                    .unwrap_or_else(|| format!("x{j}"));
                println!("{name},{}", est.value_bits);
                total += est.value_bits;
            }
            println!("total,{total}");
        }
        Command::Gausstest {
            input,
            has_header,
            alpha,
            seed,
        } => {
            let ds = load_data(&input, has_header)?;
            let v = infotheory::gaussianity_test(&ds.values, alpha, seed)?;
            println!(
                "statistic={} threshold={} accept={} alpha={}",
                v.statistic, v.threshold, v.accept, v.alpha
            );
        }
        Command::OneclassFit {
            input,
            out,
            has_header,
            nu,
            fit,
        } => {
            let ds = load_data(&input, has_header)?;
            let occ = tasks::fit_one_class(&ds.values, nu, &fit.to_config()?)?;
            model_io::save_one_class(&occ, &out)?;
            println!("nu={} log_threshold={}", occ.nu(), occ.log_threshold());
        }
        Command::OneclassScore {
            model,
            input,
            out,
            has_header,
        } => {
            let occ = model_io::load_one_class(&model)?;
            let ds = load_data(&input, has_header)?;
            let scores = occ.score(&ds.values)?;
            let file = std::fs::File::create(&out)?;
            let mut w = std::io::BufWriter::new(file);
            writeln!(w, "log_density,accept")?;
            for s in &scores {
                writeln!(w, "{},{}", s.log_density, s.accept)?;
            }
            w.flush()?;
        }
        Command::Denoise {
            model,
            input,
            out,
            has_header,
            sigma,
            n_posterior,
            seed,
        } => {
            let m = model_io::load_model(&model)?;
            let ds = load_data(&input, has_header)?;
            let sigmas: Vec<f64> = sigma
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("cannot parse noise sigma '{s}'"))
                    })
                })
                .collect::<Result<_>>()?;
            let noise = if sigmas.len() == 1 {
                NoiseModel::isotropic(sigmas[0], m.dim())?
            } else {
                NoiseModel::additive_gaussian(sigmas)?
            };
            let res = tasks::denoise(&m, &ds.values, &noise, n_posterior, seed)?;
            if !res.fallback_rows.is_empty() {
                eprintln!(
                    "warning: returned the noisy observation for {} row(s) with degenerate weights",
                    res.fallback_rows.len()
                );
            }
            write_matrix_csv(&out, &res.denoised, None)?;
        }
        Command::TraceExport { model, out } => {
            let m = model_io::load_model(&model)?;
            let file = std::fs::File::create(&out)?;
            let mut w = std::io::BufWriter::new(file);
            writeln!(w, "iteration,jm_bits,cumulative_dj_bits,gauss_stat,gauss_accept")?;
            for row in &m.trace().rows {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    row.iteration,
                    row.jm_bits,
                    row.cumulative_dj_bits,
                    row.gauss_stat,
                    row.gauss_accept
                )?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
