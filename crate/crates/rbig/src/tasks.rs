//! Application wrappers over the fitted density model: one-class scoring on
//! a log-density threshold and Bayesian posterior-mean denoising under an
//! additive Gaussian noise model.

use crate::error::{Error, Result};
use crate::flow::{self, FitConfig, RbigModel};
use crate::seeds;
use ndarray::Array2;
use rand_distr::Distribution;
use rayon::prelude::*;

/// One-class classifier: accept a point when its log-density under the
/// target model is at least the threshold, which is set so a `nu` fraction
/// of the training data scores below it.
#[derive(Debug, Clone)]
pub struct OneClassModel {
    density_model: RbigModel,
    log_threshold: f64,
    nu: f64,
}

/// Per-row one-class score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub log_density: f64,
    pub accept: bool,
}

impl OneClassModel {
    pub fn from_parts(density_model: RbigModel, log_threshold: f64, nu: f64) -> Self {
        Self {
            density_model,
            log_threshold,
            nu,
        }
    }

    pub fn density_model(&self) -> &RbigModel {
        &self.density_model
    }

    /// Acceptance threshold on the log-density, in nats.
    pub fn log_threshold(&self) -> f64 {
        self.log_threshold
    }

    /// Target training rejection fraction.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Score rows; accept exactly when `log_density >= threshold`.
    pub fn score(&self, x: &Array2<f64>) -> Result<Vec<Score>> {
        let ld = self.density_model.log_density(x)?;
        Ok(ld
            .iter()
            .map(|&log_density| Score {
                log_density,
                accept: log_density >= self.log_threshold,
            })
            .collect())
    }
}

/// Fit a one-class model on target-class data.
pub fn fit_one_class(target: &Array2<f64>, nu: f64, config: &FitConfig) -> Result<OneClassModel> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Config(format!("nu {nu} outside (0, 1)")));
    }
    let model = flow::fit(target, config)?;
    let mut ld: Vec<f64> = model.log_density(target)?.to_vec();
    ld.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    // nu-quantile of the training log-densities: the k-th smallest with
    // k = round(nu n), so k-ish points fall strictly below it.
    let n = ld.len();
    let k = ((nu * n as f64).round() as usize).clamp(1, n - 1);
    let log_threshold = ld[k];
    Ok(OneClassModel {
        density_model: model,
        log_threshold,
        nu,
    })
}

/// Additive Gaussian noise with a per-dimension standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma: Vec<f64>,
}

impl NoiseModel {
    pub fn additive_gaussian(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() || sigma.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Config(
                "noise standard deviations must be finite and positive".into(),
            ));
        }
        Ok(Self { sigma })
    }

    /// The same standard deviation in every dimension.
    pub fn isotropic(sigma: f64, dim: usize) -> Result<Self> {
        Self::additive_gaussian(vec![sigma; dim])
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

/// Denoiser output: the posterior-mean estimates plus the rows (if any)
/// where the importance weights degenerated and the noisy observation was
/// returned unchanged.
#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    pub denoised: Array2<f64>,
    pub fallback_rows: Vec<usize>,
}

/// Posterior-mean denoising under the fitted prior.
///
/// For each noisy row, draws `n_posterior` candidates from the noise model
/// centered at the observation, weights them by the prior density, and
/// returns the self-normalized weighted mean: the importance-sampled
/// posterior expectation under squared loss. Weights are handled in
/// log-space with max subtraction. Rows are independent and seeded by
/// `(seed, row)`, so the result is identical under any parallel schedule.
pub fn denoise(
    prior: &RbigModel,
    noisy: &Array2<f64>,
    noise: &NoiseModel,
    n_posterior: usize,
    seed: u64,
) -> Result<DenoiseOutput> {
    let d = prior.dim();
    if noisy.ncols() != d {
        return Err(Error::ShapeMismatch {
            expected: format!("n x {d}"),
            got: format!("{} x {}", noisy.nrows(), noisy.ncols()),
        });
    }
    if noise.sigma.len() != d {
        return Err(Error::ShapeMismatch {
            expected: format!("{d} noise sigmas"),
            got: format!("{}", noise.sigma.len()),
        });
    }
    if n_posterior < 100 {
        return Err(Error::Config(format!(
            "n_posterior {n_posterior} below the minimum of 100"
        )));
    }
    if noisy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("noisy observations".into()));
    }

    let rows: Vec<(Vec<f64>, bool)> = (0..noisy.nrows())
        .into_par_iter()
        .map(|i| denoise_row(prior, noisy, noise, n_posterior, seed, i))
        .collect::<Result<_>>()?;

    let mut denoised = Array2::zeros(noisy.raw_dim());
    let mut fallback_rows = Vec::new();
    for (i, (row, fell_back)) in rows.into_iter().enumerate() {
        denoised.row_mut(i).assign(&ndarray::Array1::from(row));
        if fell_back {
            fallback_rows.push(i);
        }
    }
    Ok(DenoiseOutput {
        denoised,
        fallback_rows,
    })
}

fn denoise_row(
    prior: &RbigModel,
    noisy: &Array2<f64>,
    noise: &NoiseModel,
    n_posterior: usize,
    seed: u64,
    i: usize,
) -> Result<(Vec<f64>, bool)> {
    let d = prior.dim();
    let x_n: Vec<f64> = noisy.row(i).to_vec();
    let mut rng = seeds::substream(seed, "denoise", i as u64);
    let normal = rand_distr::StandardNormal;

    let mut candidates = Array2::zeros((n_posterior, d));
    for mut row in candidates.outer_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = normal.sample(&mut rng);
            *v = x_n[j] + noise.sigma[j] * z;
        }
    }

    let log_w = prior.log_density(&candidates)?;
    let max_lw = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_lw.is_finite() {
        return Ok((x_n, true));
    }

    let mut total = 0.0;
    let mut mean = vec![0.0; d];
    for (row, &lw) in candidates.outer_iter().zip(log_w.iter()) {
        let w = (lw - max_lw).exp();
        total += w;
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += w * v;
        }
    }
    if !(total.is_finite() && total > 0.0) {
        return Ok((x_n, true));
    }
    for m in &mut mean {
        *m /= total;
    }
    Ok((mean, false))
}
