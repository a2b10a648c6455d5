//! Scalar Gaussian numerics and one-dimensional empirical distribution
//! machinery shared by every other module.
//!
//! The two workhorses are [`gaussian_cdf`] / [`probit`] (standard normal CDF
//! and its inverse, accurate to near machine precision) and [`EmpiricalCdf`],
//! a piecewise-linear cumulative distribution built from equal-count knots of
//! a sample, clamped away from 0 and 1 and extended with Gaussian tails so
//! the maps built on top of it stay invertible and finite everywhere.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default clamp applied to cumulative probabilities: evaluations are kept
/// inside `[EPS_U, 1 - EPS_U]` so the probit of a CDF value never overflows.
pub const DEFAULT_EPS_U: f64 = 1e-7;

/// Density evaluations never return less than this fraction of the peak bin
/// density, so log-densities stay finite arbitrarily far from the support.
pub const DENSITY_FLOOR_RATIO: f64 = 1e-12;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014326779399460599343818684758586311649;
const LN_SQRT_2PI: f64 = 0.9189385332046727417803297364056176398613974736378;

/// Standard normal density `g(x)`.
#[inline]
pub fn gaussian_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Log of the standard normal density, `-x^2/2 - ln sqrt(2 pi)`.
#[inline]
pub fn gaussian_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF. Errors on non-finite input.
pub fn gaussian_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gaussian_cdf: non-finite input {x}")));
    }
    Ok(gaussian_cdf_unchecked(x))
}

/// `gaussian_cdf` without the finiteness check, for hot paths whose inputs
/// are finite by construction.
#[inline]
pub(crate) fn gaussian_cdf_unchecked(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Inverse standard normal CDF on the open interval (0, 1).
pub fn probit(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "probit: input {u} outside the open interval (0, 1); clamp before calling"
        )));
    }
    Ok(probit_unchecked(u))
}

/// Acklam's rational approximation refined with one Halley step against the
/// high-precision CDF; the result is accurate to a few ulps.
#[inline]
pub(crate) fn probit_unchecked(u: f64) -> f64 {
    let x = probit_acklam(u);
    // Halley refinement: solve gaussian_cdf(x) - u = 0.
    let e = gaussian_cdf_unchecked(x) - u;
    let t = e / gaussian_pdf(x);
    x - t / (1.0 + 0.5 * t * x)
}

fn probit_acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Complementary error function, W. J. Cody's rational minimax
/// approximations (SPECFUN `calerf`); relative error below 1e-15 across the
/// representable range.
fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.46875 {
        return 1.0 - erf_small(x);
    }
    let v = if ax <= 4.0 {
        erfc_mid(ax)
    } else {
        erfc_large(ax)
    };
    if x < 0.0 {
        2.0 - v
    } else {
        v
    }
}

// |x| < 0.46875: erf(x) = x * P(x^2)/Q(x^2)
fn erf_small(x: f64) -> f64 {
    const P: [f64; 5] = [
        3.16112374387056560e+00,
        1.13864154151050156e+02,
        3.77485237685302021e+02,
        3.20937758913846947e+03,
        1.85777706184603153e-01,
    ];
    const Q: [f64; 4] = [
        2.36012909523441209e+01,
        2.44024637934444173e+02,
        1.28261652607737228e+03,
        2.84423683343917062e+03,
    ];
    let z = x * x;
    let mut num = P[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    x * (num + P[3]) / (den + Q[3])
}

// 0.46875 <= x <= 4: erfc(x) = exp(-x^2) * P(x)/Q(x)
fn erfc_mid(x: f64) -> f64 {
    const P: [f64; 9] = [
        5.64188496988670089e-01,
        8.88314979438837594e+00,
        6.61191906371416295e+01,
        2.98635138197400131e+02,
        8.81952221241769090e+02,
        1.71204761263407058e+03,
        2.05107837782607147e+03,
        1.23033935479799725e+03,
        2.15311535474403846e-08,
    ];
    const Q: [f64; 8] = [
        1.57449261107098347e+01,
        1.17693950891312499e+02,
        5.37181101862009858e+02,
        1.62138957456669019e+03,
        3.29079923573345963e+03,
        4.36261909014324716e+03,
        3.43936767414372164e+03,
        1.23033935480374942e+03,
    ];
    let mut num = P[8] * x;
    let mut den = x;
    for i in 0..7 {
        num = (num + P[i]) * x;
        den = (den + Q[i]) * x;
    }
    exp_neg_x2(x) * (num + P[7]) / (den + Q[7])
}

// x > 4: erfc(x) = exp(-x^2)/x * (1/sqrt(pi) + P(1/x^2)/(x^2 Q(1/x^2)))
fn erfc_large(x: f64) -> f64 {
    const P: [f64; 6] = [
        3.05326634961232344e-01,
        3.60344899949804439e-01,
        1.25781726111229246e-01,
        1.60837851487422766e-02,
        6.58749161529837803e-04,
        1.63153871373020978e-02,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e+00,
        1.87295284992346047e+00,
        5.27905102951428412e-01,
        6.05183413124413191e-02,
        2.33520497626869185e-03,
    ];
    const FRAC_1_SQRT_PI: f64 = 0.5641895835477562869480794515607725858441;
    if x >= 26.6 {
        // exp(-x*x) underflows; erfc is subnormal-or-zero out here.
        return 0.0;
    }
    let z = 1.0 / (x * x);
    let mut num = P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    let r = z * (num + P[4]) / (den + Q[4]);
    exp_neg_x2(x) * (FRAC_1_SQRT_PI - r) / x
}

// exp(-x^2) evaluated so the argument is split into a high part exactly
// representable squared and a low correction, avoiding the 2*x*eps error of
// the naive form for large x.
#[inline]
fn exp_neg_x2(x: f64) -> f64 {
    let xh = (x * 16.0).trunc() / 16.0;
    let d = (x - xh) * (x + xh);
    (-xh * xh).exp() * (-d).exp()
}

/// Bin-count policy for histogram-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinPolicy {
    /// `ceil(sqrt(n))` clamped to `[32, 1024]`.
    Auto,
    /// A fixed bin count (must be at least 8).
    Fixed(usize),
}

impl Default for BinPolicy {
    fn default() -> Self {
        BinPolicy::Auto
    }
}

impl BinPolicy {
    /// Number of bins for a sample of size `n`.
    pub fn bins_for(&self, n: usize) -> usize {
        match *self {
            BinPolicy::Auto => ((n as f64).sqrt().ceil() as usize).clamp(32, 1024),
            BinPolicy::Fixed(b) => b,
        }
    }
}

/// Piecewise-linear empirical CDF over equal-count knots.
///
/// `knots_x` are strictly increasing sample-domain abscissae, `knots_u` the
/// matching cumulative probabilities, all inside `[eps_u, 1 - eps_u]`.
/// Evaluation is clamped to that band; `support_lo`/`support_hi` bound the
/// interpolation region, beyond which callers extrapolate with the Gaussian
/// tails implied by [`EmpiricalCdf::tail_sigma`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    knots_x: Vec<f64>,
    knots_u: Vec<f64>,
    support_lo: f64,
    support_hi: f64,
    eps_u: f64,
    tail_sigma: f64,
}

impl EmpiricalCdf {
    /// Rebuild from raw parts (model deserialization). Validates invariants.
    pub fn from_parts(
        knots_x: Vec<f64>,
        knots_u: Vec<f64>,
        eps_u: f64,
        tail_sigma: f64,
    ) -> Result<Self> {
        if knots_x.len() != knots_u.len() || knots_x.len() < 2 {
            return Err(Error::Corrupt(format!(
                "empirical cdf needs >= 2 matched knots, got {} x / {} u",
                knots_x.len(),
                knots_u.len()
            )));
        }
        if !(eps_u > 0.0 && eps_u < 0.5) {
            return Err(Error::Corrupt(format!("bad cdf clamp {eps_u}")));
        }
        if !(tail_sigma.is_finite() && tail_sigma > 0.0) {
            return Err(Error::Corrupt(format!("bad tail sigma {tail_sigma}")));
        }
        for w in knots_x.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Corrupt("cdf knots_x not strictly increasing".into()));
            }
        }
        for w in knots_u.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Corrupt("cdf knots_u not strictly increasing".into()));
            }
        }
        if knots_u[0] < eps_u || *knots_u.last().unwrap() > 1.0 - eps_u {
            return Err(Error::Corrupt("cdf knots_u outside the clamp band".into()));
        }
        let support_lo = knots_x[0];
        let support_hi = *knots_x.last().unwrap();
        Ok(Self {
            knots_x,
            knots_u,
            support_lo,
            support_hi,
            eps_u,
            tail_sigma,
        })
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.knots_x
    }

    pub fn knots_u(&self) -> &[f64] {
        &self.knots_u
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> f64 {
        self.support_hi
    }

    pub fn eps_u(&self) -> f64 {
        self.eps_u
    }

    /// Scale of the Gaussian tails matched at the clamp points.
    pub fn tail_sigma(&self) -> f64 {
        self.tail_sigma
    }

    /// Clamped CDF evaluation: piecewise-linear between knots, `eps_u` at or
    /// below the first knot, `1 - eps_u` at or beyond the last.
    pub fn evaluate(&self, x: f64) -> f64 {
        if x <= self.support_lo {
            return self.knots_u[0];
        }
        if x >= self.support_hi {
            return *self.knots_u.last().unwrap();
        }
        let j = self.segment_at(x);
        let (x0, x1) = (self.knots_x[j], self.knots_x[j + 1]);
        let (u0, u1) = (self.knots_u[j], self.knots_u[j + 1]);
        u0 + (x - x0) / (x1 - x0) * (u1 - u0)
    }

    /// Piecewise-linear inverse of [`EmpiricalCdf::evaluate`] on the knot
    /// band; `u` is clamped into `[knots_u[0], knots_u[last]]`.
    pub fn invert(&self, u: f64) -> f64 {
        let n = self.knots_u.len();
        if u <= self.knots_u[0] {
            return self.knots_x[0];
        }
        if u >= self.knots_u[n - 1] {
            return self.knots_x[n - 1];
        }
        let j = match self
            .knots_u
            .binary_search_by(|k| k.partial_cmp(&u).unwrap())
        {
            Ok(j) => return self.knots_x[j],
            Err(j) => j - 1,
        };
        let (x0, x1) = (self.knots_x[j], self.knots_x[j + 1]);
        let (u0, u1) = (self.knots_u[j], self.knots_u[j + 1]);
        x0 + (u - u0) / (u1 - u0) * (x1 - x0)
    }

    /// Slope of the CDF at `x` (the implied piecewise-constant density),
    /// without flooring. Zero outside the knot range.
    pub(crate) fn slope_at(&self, x: f64) -> f64 {
        if x < self.support_lo || x > self.support_hi {
            return 0.0;
        }
        let j = self.segment_at(x.min(self.support_hi.next_down())); // ties toward the lower bin
        (self.knots_u[j + 1] - self.knots_u[j]) / (self.knots_x[j + 1] - self.knots_x[j])
    }

    /// Largest CDF slope over all segments.
    pub(crate) fn peak_slope(&self) -> f64 {
        let mut peak = 0.0f64;
        for j in 0..self.knots_x.len() - 1 {
            let s =
                (self.knots_u[j + 1] - self.knots_u[j]) / (self.knots_x[j + 1] - self.knots_x[j]);
            peak = peak.max(s);
        }
        peak
    }

    // Index of the segment containing x, with x strictly inside the knot
    // range; edge ties resolve toward the lower bin.
    fn segment_at(&self, x: f64) -> usize {
        match self
            .knots_x
            .binary_search_by(|k| k.partial_cmp(&x).unwrap())
        {
            Ok(j) => j.saturating_sub(1).min(self.knots_x.len() - 2),
            Err(j) => (j - 1).min(self.knots_x.len() - 2),
        }
    }
}

/// Build a piecewise-linear empirical CDF from samples.
///
/// Knots sit at sample points with plotting positions `rank/(n+1)`, chosen
/// as the union of `bins` equal-count ranks and `bins` equal-width grid
/// cuts snapped to the next sample. The two families together bound both
/// the mass and the width of every segment, so linear interpolation between
/// knots distorts the distribution by only O(width^2) — without the grid
/// cuts, wide tail segments leave enough residual non-Gaussianity to stall
/// the fit's stopping rule. The first and last knots are pinned to the
/// clamp values `eps_u` and `1 - eps_u`; the Gaussian-tail scale is the
/// sample standard deviation.
pub fn build_empirical_cdf(samples: &[f64], bins: usize, eps_u: f64) -> Result<EmpiricalCdf> {
    if bins < 8 {
        return Err(Error::Config(format!("bin count {bins} below minimum of 8")));
    }
    if !(eps_u > 0.0 && eps_u < 0.5) {
        return Err(Error::Config(format!("cdf clamp {eps_u} outside (0, 0.5)")));
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientData {
            got: samples.len(),
            needed: 2,
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("empirical cdf samples".into()));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateMarginal { column: None });
    }

    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let tail_sigma = var.sqrt().max(f64::MIN_POSITIVE);

    // Equal-count ranks plus equal-width cuts snapped to the next sample;
    // duplicates collapse to the highest cumulative value per abscissa.
    let bins = bins.min(n - 1);
    let mut ranks: Vec<usize> = (0..=bins)
        .map(|j| ((j as f64) * ((n - 1) as f64) / bins as f64).round() as usize)
        .collect();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    for j in 1..bins {
        let cut = lo + (hi - lo) * j as f64 / bins as f64;
        let rank = sorted.partition_point(|&v| v < cut);
        if rank < n {
            ranks.push(rank);
        }
    }
    ranks.sort_unstable();
    ranks.dedup();

    let mut knots_x: Vec<f64> = Vec::with_capacity(ranks.len());
    let mut knots_u: Vec<f64> = Vec::with_capacity(ranks.len());
    for &rank in &ranks {
        let x = sorted[rank];
        let u = ((rank + 1) as f64 / (n + 1) as f64).clamp(eps_u, 1.0 - eps_u);
        if let Some(last_x) = knots_x.last() {
            if x <= *last_x {
                *knots_u.last_mut().unwrap() = u;
                continue;
            }
        }
        knots_x.push(x);
        knots_u.push(u);
    }
    *knots_u.first_mut().unwrap() = eps_u;
    *knots_u.last_mut().unwrap() = 1.0 - eps_u;

    // Ties plus the endpoint overrides can in principle produce a
    // non-increasing u pair; drop interior knots that violate strictness.
    let mut xs = Vec::with_capacity(knots_x.len());
    let mut us = Vec::with_capacity(knots_u.len());
    for (i, (&x, &u)) in knots_x.iter().zip(knots_u.iter()).enumerate() {
        if i > 0 && i < knots_x.len() - 1 {
            if u <= *us.last().unwrap() || u >= 1.0 - eps_u {
                continue;
            }
        }
        xs.push(x);
        us.push(u);
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateMarginal { column: None });
    }

    EmpiricalCdf::from_parts(xs, us, eps_u, tail_sigma)
}

/// Equal-width histogram with integer counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
    peak_density: f64,
}

impl Histogram1D {
    /// Build from explicit edges and counts.
    pub fn new(bin_edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if bin_edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::Config(format!(
                "histogram needs len(edges) == len(counts) + 1, got {} edges / {} counts",
                bin_edges.len(),
                counts.len()
            )));
        }
        for w in bin_edges.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Config("histogram edges not strictly increasing".into()));
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Config("histogram has zero total count".into()));
        }
        let mut peak_density = 0.0f64;
        for (j, &c) in counts.iter().enumerate() {
            let w = bin_edges[j + 1] - bin_edges[j];
            peak_density = peak_density.max(c as f64 / (total as f64 * w));
        }
        Ok(Self {
            bin_edges,
            counts,
            total,
            peak_density,
        })
    }

    /// Equal-width histogram over the sample range.
    pub fn equal_width(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientData {
                got: samples.len(),
                needed: 2,
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("histogram samples".into()));
        }
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Err(Error::DegenerateMarginal { column: None });
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in samples {
            let j = (((v - lo) / width) as usize).min(bins - 1);
            counts[j] += 1;
        }
        let edges = (0..=bins).map(|j| lo + j as f64 * width).collect();
        Self::new(edges, counts)
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_lo(&self) -> f64 {
        self.bin_edges[0]
    }

    pub fn support_hi(&self) -> f64 {
        *self.bin_edges.last().unwrap()
    }

    /// Floor applied by [`evaluate_pdf`].
    pub fn floor_density(&self) -> f64 {
        (self.peak_density * DENSITY_FLOOR_RATIO).max(f64::MIN_POSITIVE)
    }
}

/// Histogram density at `x`, floored at a fixed fraction of the peak bin
/// density; queries outside the support return the floor.
pub fn evaluate_pdf(hist: &Histogram1D, x: f64) -> f64 {
    let floor = hist.floor_density();
    if !x.is_finite() || x < hist.support_lo() || x > hist.support_hi() {
        return floor;
    }
    let j = match hist
        .bin_edges
        .binary_search_by(|e| e.partial_cmp(&x).unwrap())
    {
        Ok(j) => j.saturating_sub(1).min(hist.counts.len() - 1),
        Err(j) => (j - 1).min(hist.counts.len() - 1),
    };
    let w = hist.bin_edges[j + 1] - hist.bin_edges[j];
    let d = hist.counts[j] as f64 / (hist.total as f64 * w);
    d.max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::Distribution;

    // Simpson-rule integral of the standard normal density on [0, x].
    fn phi_integral(x: f64) -> f64 {
        let steps = 40_000;
        let h = x / steps as f64;
        let mut acc = gaussian_pdf(0.0) + gaussian_pdf(x);
        for i in 1..steps {
            let xi = i as f64 * h;
            acc += gaussian_pdf(xi) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn cdf_matches_quadrature() {
        assert_eq!(gaussian_cdf(0.0).unwrap(), 0.5);
        for &x in &[0.1, 0.5, 1.0, 1.959964, 2.5, 3.5, 5.0] {
            let expect = 0.5 + phi_integral(x);
            let got = gaussian_cdf(x).unwrap();
            assert!(
                (got - expect).abs() <= 1e-12,
                "cdf({x}) = {got}, quadrature {expect}"
            );
        }
        let got = gaussian_cdf(1.959964).unwrap();
        assert!((got - 0.975).abs() < 1e-6);
    }

    #[test]
    fn cdf_symmetry() {
        for &x in &[0.7, 0.3, 1.4, 2.9, 4.2] {
            let a = gaussian_cdf(-x).unwrap();
            let b = 1.0 - gaussian_cdf(x).unwrap();
            assert!((a - b).abs() < 1e-15, "symmetry broke at {x}: {a} vs {b}");
        }
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(gaussian_cdf(f64::NAN).is_err());
        assert!(gaussian_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn probit_known_values() {
        assert!(probit(0.5).unwrap().abs() < 1e-15);
        // Root-find oracle: bisection on gaussian_cdf.
        let target = 0.975;
        let (mut lo, mut hi) = (0.0f64, 4.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if gaussian_cdf(mid).unwrap() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((probit(target).unwrap() - root).abs() < 1e-9);
        assert!((probit(target).unwrap() - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn probit_domain_errors() {
        assert!(probit(0.0).is_err());
        assert!(probit(1.0).is_err());
        assert!(probit(-0.1).is_err());
        assert!(probit(1.1).is_err());
        assert!(probit(f64::NAN).is_err());
    }

    #[test]
    fn probit_cdf_mutual_inverse() {
        for &x in &[-3.0, -1.0, 0.25, 2.0] {
            let rt = probit(gaussian_cdf(x).unwrap()).unwrap();
            assert!((rt - x).abs() < 1e-8, "probit(cdf({x})) = {rt}");
        }
        let mut u = DEFAULT_EPS_U;
        while u < 1.0 - DEFAULT_EPS_U {
            let rt = gaussian_cdf(probit(u).unwrap()).unwrap();
            assert!((rt - u).abs() < 1e-9, "cdf(probit({u})) = {rt}");
            u += 0.0173;
        }
    }

    #[test]
    fn empirical_cdf_tracks_uniform() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..10_000).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        let cdf = build_empirical_cdf(&samples, 100, DEFAULT_EPS_U).unwrap();
        let mut x = 0.05;
        while x <= 0.95 {
            assert!(
                (cdf.evaluate(x) - x).abs() <= 0.02,
                "cdf({x}) = {} too far from uniform",
                cdf.evaluate(x)
            );
            x += 0.01;
        }
    }

    #[test]
    fn empirical_cdf_glivenko_cantelli() {
        // Sup-norm distance to the true normal CDF shrinks as n grows.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let mut sup_for = |n: usize| {
            let samples: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let cdf = build_empirical_cdf(&samples, 64, DEFAULT_EPS_U).unwrap();
            let mut sup = 0.0f64;
            let mut x = -3.0;
            while x <= 3.0 {
                sup = sup.max((cdf.evaluate(x) - gaussian_cdf_unchecked(x)).abs());
                x += 0.01;
            }
            sup
        };
        let coarse = sup_for(1_000);
        let fine = sup_for(10_000);
        assert!(coarse < 0.06, "n=1e3 sup distance {coarse}");
        assert!(fine < 0.02, "n=1e4 sup distance {fine}");
        assert!(fine < coarse);
    }

    #[test]
    fn empirical_cdf_clamp_contract() {
        let samples: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let cdf = build_empirical_cdf(&samples, 16, 1e-7).unwrap();
        assert_eq!(cdf.evaluate(-5.0), 1e-7);
        assert_eq!(cdf.evaluate(0.0), 1e-7);
        assert_eq!(cdf.evaluate(99.0), 1.0 - 1e-7);
        assert_eq!(cdf.evaluate(1e6), 1.0 - 1e-7);
    }

    #[test]
    fn empirical_cdf_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let normal = rand_distr::Normal::new(2.0, 3.0).unwrap();
        let samples: Vec<f64> = (0..5_000).map(|_| normal.sample(&mut rng)).collect();
        let cdf = build_empirical_cdf(&samples, 64, 1e-7).unwrap();
        let mut prev = f64::NEG_INFINITY;
        let mut x = -15.0;
        while x <= 20.0 {
            let u = cdf.evaluate(x);
            assert!(u >= prev, "cdf not non-decreasing at {x}");
            prev = u;
            x += 0.05;
        }
        // Strictly increasing between the first and last knots.
        let (lo, hi) = (cdf.support_lo(), cdf.support_hi());
        let mut prev = cdf.evaluate(lo);
        for i in 1..200 {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            let u = cdf.evaluate(x);
            assert!(u > prev, "not strictly increasing at {x}");
            prev = u;
        }
    }

    #[test]
    fn empirical_cdf_degenerate_input() {
        let samples = vec![4.2; 50];
        assert!(matches!(
            build_empirical_cdf(&samples, 16, 1e-7),
            Err(Error::DegenerateMarginal { .. })
        ));
    }

    #[test]
    fn histogram_single_bin_mass() {
        let hist = Histogram1D::new(vec![0.0, 0.5, 1.0], vec![10, 0]).unwrap();
        assert!((evaluate_pdf(&hist, 0.25) - 2.0).abs() < 1e-12);
        // Empty bin and out-of-support queries floor at a positive value.
        assert!(evaluate_pdf(&hist, 0.75) > 0.0);
        assert!(evaluate_pdf(&hist, 100.0) > 0.0);
        assert_eq!(evaluate_pdf(&hist, 100.0), hist.floor_density());
    }

    #[test]
    fn histogram_normal_density_at_origin() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let hist = Histogram1D::equal_width(&samples, 100).unwrap();
        let d = evaluate_pdf(&hist, 0.0);
        assert!((d - 0.3989).abs() <= 0.05, "density at 0 was {d}");
    }

    #[test]
    fn histogram_integrates_to_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let normal = rand_distr::Normal::new(1.0, 2.0).unwrap();
        let samples: Vec<f64> = (0..4_000).map(|_| normal.sample(&mut rng)).collect();
        let hist = Histogram1D::equal_width(&samples, 64).unwrap();
        let mass: f64 = (0..hist.counts().len())
            .map(|j| {
                let w = hist.bin_edges()[j + 1] - hist.bin_edges()[j];
                let mid = hist.bin_edges()[j] + 0.5 * w;
                evaluate_pdf(&hist, mid) * w
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-9, "total mass {mass}");
    }
}
