//! Per-dimension Gaussianization: the probit of an empirical CDF, with an
//! exact piecewise-linear inverse and a log-derivative that feeds the model
//! Jacobian.

use crate::error::Result;
use crate::numcore::{
    self, build_empirical_cdf, gaussian_log_pdf, probit_unchecked, EmpiricalCdf,
    DENSITY_FLOOR_RATIO,
};

/// A strictly monotone map taking one data dimension to a standard normal.
///
/// Inside the training range the map is `probit(cdf(x))` with `cdf` the
/// piecewise-linear empirical CDF; beyond the range it continues linearly
/// with slope `1/tail_sigma`, which is the Gaussian-tail extrapolation
/// matched at the clamp points. That keeps the map strictly increasing and
/// the log-derivative finite on all of the real line, which both density
/// evaluation and sampling rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalGaussianizer {
    cdf: EmpiricalCdf,
    // probit of knots_u, cached so inverse interpolation can bracket in y.
    knots_y: Vec<f64>,
    floor_slope: f64,
}

impl MarginalGaussianizer {
    pub(crate) fn from_cdf(cdf: EmpiricalCdf) -> Self {
        let knots_y: Vec<f64> = cdf.knots_u().iter().map(|&u| probit_unchecked(u)).collect();
        let floor_slope = (cdf.peak_slope() * DENSITY_FLOOR_RATIO).max(f64::MIN_POSITIVE);
        Self {
            cdf,
            knots_y,
            floor_slope,
        }
    }

    pub fn cdf(&self) -> &EmpiricalCdf {
        &self.cdf
    }

    /// Lowest output of the clamped CDF band, `probit(eps_u)`.
    pub fn y_lo(&self) -> f64 {
        self.knots_y[0]
    }

    /// Highest output of the clamped CDF band, `probit(1 - eps_u)`.
    pub fn y_hi(&self) -> f64 {
        *self.knots_y.last().unwrap()
    }

    /// Forward map `x -> y`.
    pub fn forward(&self, x: f64) -> f64 {
        let lo = self.cdf.support_lo();
        let hi = self.cdf.support_hi();
        if x < lo {
            return self.y_lo() + (x - lo) / self.cdf.tail_sigma();
        }
        if x > hi {
            return self.y_hi() + (x - hi) / self.cdf.tail_sigma();
        }
        probit_unchecked(self.cdf.evaluate(x))
    }

    /// Inverse map `y -> x`, exact piecewise-linear inversion of the CDF
    /// knots inside the clamp band, Gaussian-tail extrapolation outside.
    pub fn inverse(&self, y: f64) -> f64 {
        if y < self.y_lo() {
            return self.cdf.support_lo() + (y - self.y_lo()) * self.cdf.tail_sigma();
        }
        if y > self.y_hi() {
            return self.cdf.support_hi() + (y - self.y_hi()) * self.cdf.tail_sigma();
        }
        self.cdf.invert(numcore::gaussian_cdf_unchecked(y))
    }

    /// Natural log of `d forward / dx`: `log p(x) - log g(forward(x))` with
    /// `p` the piecewise-constant density implied by the CDF knots (floored)
    /// and `g` the standard normal density. Finite for every finite `x`.
    pub fn log_derivative(&self, x: f64) -> f64 {
        let lo = self.cdf.support_lo();
        let hi = self.cdf.support_hi();
        if x < lo || x > hi {
            return -self.cdf.tail_sigma().ln();
        }
        let slope = self.cdf.slope_at(x).max(self.floor_slope);
        slope.ln() - gaussian_log_pdf(probit_unchecked(self.cdf.evaluate(x)))
    }
}

/// Fit the Gaussianization map of one dimension from its samples.
pub fn fit_marginal(samples: &[f64], bins: usize, eps_u: f64) -> Result<MarginalGaussianizer> {
    let cdf = build_empirical_cdf(samples, bins, eps_u)?;
    Ok(MarginalGaussianizer::from_cdf(cdf))
}

impl MarginalGaussianizer {
    /// Rebuild from persisted parts.
    pub fn from_parts(
        knots_x: Vec<f64>,
        knots_u: Vec<f64>,
        eps_u: f64,
        tail_sigma: f64,
    ) -> Result<Self> {
        let cdf = EmpiricalCdf::from_parts(knots_x, knots_u, eps_u, tail_sigma)?;
        Ok(Self::from_cdf(cdf))
    }
}
