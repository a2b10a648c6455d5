//! The iterated Gaussianization transform: fitting, forward and inverse
//! evaluation, exact log-densities via the change of variables, and
//! sampling by inverting Gaussian draws.
//!
//! Each fitted layer holds one marginal Gaussianizer per dimension plus one
//! orthonormal rotation. A layer's `delta_j` records the marginal
//! negentropy of its input in bits, which is exactly the negentropy removed
//! by that layer; the running sum is the convergence trace.

use crate::error::{Error, Result};
use crate::infotheory;
use crate::marginal::{fit_marginal, MarginalGaussianizer};
use crate::numcore::gaussian_log_pdf;
pub use crate::numcore::BinPolicy;
use crate::rotations::{pca_rotation, random_rotation, OrthonormalRotation};
use crate::seeds;
use ndarray::{Array1, Array2};
use rand::RngCore;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Rotation family used between marginal Gaussianization steps.
///
/// `Ica` is reserved as a provider slot: orthonormal ICA rotations would
/// maximize the per-iteration negentropy reduction but cost orders of
/// magnitude more per iteration, so selecting it is a configuration error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationKind {
    Pca,
    Random,
    Ica,
}

impl std::str::FromStr for RotationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(RotationKind::Pca),
            "random" | "rnd" => Ok(RotationKind::Random),
            "ica" => Ok(RotationKind::Ica),
            other => Err(Error::Config(format!(
                "unknown rotation kind '{other}' (expected pca, random or ica)"
            ))),
        }
    }
}

/// Fit configuration. `stop_tolerance_bits = None` resolves to
/// `0.005 * d` at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub rotation: RotationKind,
    pub max_iterations: usize,
    pub stop_tolerance_bits: Option<f64>,
    pub gaussianity_alpha: f64,
    /// Row cap for the per-iteration Gaussianity test. `None` scales the
    /// cap as `8000 / d`: besides keeping the O(n^2) statistic affordable,
    /// this pins the test's detection floor near the fit's own modeling
    /// floor. Each layer's maps inject sampling noise of order
    /// `d * knots / n` as genuine joint non-Gaussianity; a test powerful
    /// enough to resolve that floor rejects forever and the fit treadmills,
    /// re-removing and re-injecting noise while the cumulative trace
    /// inflates.
    pub gauss_test_rows: Option<usize>,
    pub seed: u64,
    pub bins: BinPolicy,
    pub eps_u: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rotation: RotationKind::Pca,
            max_iterations: 100,
            stop_tolerance_bits: None,
            gaussianity_alpha: 0.05,
            gauss_test_rows: None,
            seed: 0,
            bins: BinPolicy::Auto,
            eps_u: crate::numcore::DEFAULT_EPS_U,
        }
    }
}

impl FitConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.gaussianity_alpha > 0.0 && self.gaussianity_alpha < 1.0) {
            return Err(Error::Config(format!(
                "gaussianity_alpha {} outside (0, 1)",
                self.gaussianity_alpha
            )));
        }
        if self.gauss_test_rows.is_some_and(|r| r < 100) {
            return Err(Error::Config("gauss_test_rows must be >= 100".into()));
        }
        if let Some(tol) = self.stop_tolerance_bits {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(Error::Config(format!("stop tolerance {tol} must be >= 0")));
            }
        }
        if matches!(self.rotation, RotationKind::Ica) {
            return Err(Error::Config(
                "ICA rotations are not implemented (they would dominate the runtime without \
                 improving the fitted density); use 'pca' or 'random'"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Stop tolerance in bits for dimension `d`.
    pub fn resolved_stop_tolerance_bits(&self, d: usize) -> f64 {
        self.stop_tolerance_bits.unwrap_or(0.005 * d as f64)
    }

    /// Test subsample cap for dimension `d`.
    pub fn resolved_gauss_test_rows(&self, d: usize) -> usize {
        self.gauss_test_rows
            .unwrap_or_else(|| (8000 / d.max(1)).max(500))
    }
}

/// Per-dimension affine standardization applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(data: &Array2<f64>) -> Result<Self> {
        let (n, d) = (data.nrows(), data.ncols());
        let mut mean = vec![0.0; d];
        for row in data.outer_iter() {
            for (m, &v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut scale = vec![0.0; d];
        for row in data.outer_iter() {
            for j in 0..d {
                let dv = row[j] - mean[j];
                scale[j] += dv * dv;
            }
        }
        for (j, s) in scale.iter_mut().enumerate() {
            *s = (*s / (n - 1) as f64).sqrt();
            if *s == 0.0 || !s.is_finite() {
                return Err(Error::DegenerateMarginal { column: Some(j) });
            }
        }
        Ok(Self { mean, scale })
    }

    pub fn from_parts(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() || mean.is_empty() {
            return Err(Error::Corrupt("standardizer length mismatch".into()));
        }
        if scale.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Corrupt("standardizer scale must be positive".into()));
        }
        Ok(Self { mean, scale })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    #[inline]
    fn apply_into(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    #[inline]
    fn invert_into(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = row[j] * self.scale[j] + self.mean[j];
        }
    }

    /// Log-determinant of the standardization Jacobian, `-sum(ln scale)`.
    pub fn log_det(&self) -> f64 {
        -self.scale.iter().map(|s| s.ln()).sum::<f64>()
    }
}

/// One fitted iteration: d marginal maps plus a rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct RbigLayer {
    marginals: Vec<MarginalGaussianizer>,
    rotation: OrthonormalRotation,
    delta_j_bits: f64,
}

impl RbigLayer {
    pub fn from_parts(
        marginals: Vec<MarginalGaussianizer>,
        rotation: OrthonormalRotation,
        delta_j_bits: f64,
    ) -> Result<Self> {
        if marginals.len() != rotation.dim() {
            return Err(Error::Corrupt(format!(
                "layer has {} marginals but a {}-dimensional rotation",
                marginals.len(),
                rotation.dim()
            )));
        }
        Ok(Self {
            marginals,
            rotation,
            delta_j_bits,
        })
    }

    pub fn marginals(&self) -> &[MarginalGaussianizer] {
        &self.marginals
    }

    pub fn rotation(&self) -> &OrthonormalRotation {
        &self.rotation
    }

    /// Marginal negentropy of this layer's input, in bits.
    pub fn delta_j_bits(&self) -> f64 {
        self.delta_j_bits
    }

    #[inline]
    fn forward_into(&self, row: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        for j in 0..row.len() {
            scratch[j] = self.marginals[j].forward(row[j]);
        }
        self.rotation.rotate_row_into(scratch, out);
    }

    #[inline]
    fn inverse_into(&self, row: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.rotation.rotate_row_inv_into(row, scratch);
        for j in 0..row.len() {
            out[j] = self.marginals[j].inverse(scratch[j]);
        }
    }
}

/// One trace record per fit iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub jm_bits: f64,
    pub cumulative_dj_bits: f64,
    pub gauss_stat: f64,
    pub gauss_accept: bool,
    /// Wall time of the iteration. Not persisted: model files must be
    /// byte-identical across reruns with the same seed.
    #[serde(skip, default)]
    pub wall_time_s: f64,
}

/// Convergence trace of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub rows: Vec<TraceRow>,
    /// False when the fit stopped because it hit `max_iterations`.
    pub converged: bool,
}

impl FitTrace {
    /// Total negentropy reduction: cumulative delta-J at the stopping
    /// iteration, in bits.
    pub fn cumulative_delta_j_bits(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_dj_bits)
    }

    /// Multi-information estimate in bits: the cumulative redundancy
    /// reduction. Lags the negentropy reduction by one iteration, so the
    /// first iteration's purely-marginal term is excluded.
    pub fn multi_information_bits(&self) -> f64 {
        self.rows.iter().skip(1).map(|r| r.jm_bits).sum()
    }
}

/// A fitted Gaussianization stack: standardizer, ordered layers, the fit
/// configuration and its convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RbigModel {
    dim: usize,
    standardizer: Standardizer,
    layers: Vec<RbigLayer>,
    config: FitConfig,
    trace: FitTrace,
}

impl RbigModel {
    pub fn from_parts(
        standardizer: Standardizer,
        layers: Vec<RbigLayer>,
        config: FitConfig,
        trace: FitTrace,
    ) -> Result<Self> {
        let dim = standardizer.mean.len();
        if layers.iter().any(|l| l.marginals.len() != dim) {
            return Err(Error::Corrupt("layer dimension mismatch".into()));
        }
        if layers.len() > config.max_iterations {
            return Err(Error::Corrupt(format!(
                "{} layers exceed max_iterations {}",
                layers.len(),
                config.max_iterations
            )));
        }
        Ok(Self {
            dim,
            standardizer,
            layers,
            config,
            trace,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn layers(&self) -> &[RbigLayer] {
        &self.layers
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn trace(&self) -> &FitTrace {
        &self.trace
    }

    fn check_shape(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("n x {}", self.dim),
                got: format!("{} x {}", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    /// Map data to the Gaussianized domain: standardize, then apply every
    /// layer in order.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.transform_up_to(x, self.layers.len())
    }

    /// Standardize and apply only the first `n_layers` layers, yielding the
    /// intermediate iterate the fit saw at that iteration.
    pub fn transform_up_to(&self, x: &Array2<f64>, n_layers: usize) -> Result<Array2<f64>> {
        self.check_shape(x)?;
        let n_layers = n_layers.min(self.layers.len());
        let d = self.dim;
        let mut out = Array2::zeros(x.raw_dim());
        let mut cur = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut next = vec![0.0; d];
        for (mut orow, xrow) in out.outer_iter_mut().zip(x.outer_iter()) {
            let row = xrow.as_slice().expect("row-major input");
            self.standardizer.apply_into(row, &mut cur);
            for layer in &self.layers[..n_layers] {
                layer.forward_into(&cur, &mut scratch, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
            orow.as_slice_mut().unwrap().copy_from_slice(&cur);
        }
        Ok(out)
    }

    /// Invert [`RbigModel::transform`].
    pub fn inverse_transform(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_shape(y)?;
        let d = self.dim;
        let mut out = Array2::zeros(y.raw_dim());
        let mut cur = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut next = vec![0.0; d];
        for (mut orow, yrow) in out.outer_iter_mut().zip(y.outer_iter()) {
            cur.copy_from_slice(yrow.as_slice().expect("row-major input"));
            for layer in self.layers.iter().rev() {
                layer.inverse_into(&cur, &mut scratch, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
            let orow = orow.as_slice_mut().unwrap();
            self.standardizer.invert_into(&cur, orow);
        }
        Ok(out)
    }

    /// Log-density of each row in nats, exact under the fitted transform:
    /// the standard normal log-density of the Gaussianized point plus the
    /// accumulated log-Jacobian (the rotations contribute nothing).
    pub fn log_density(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        self.check_shape(x)?;
        let d = self.dim;
        let mut out = Array1::zeros(x.nrows());
        let mut cur = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut next = vec![0.0; d];
        let base = self.standardizer.log_det();
        for (o, xrow) in out.iter_mut().zip(x.outer_iter()) {
            let row = xrow.as_slice().expect("row-major input");
            self.standardizer.apply_into(row, &mut cur);
            let mut acc = base;
            for layer in &self.layers {
                for j in 0..d {
                    acc += layer.marginals[j].log_derivative(cur[j]);
                }
                layer.forward_into(&cur, &mut scratch, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
            for &v in cur.iter() {
                acc += gaussian_log_pdf(v);
            }
            *o = acc;
        }
        Ok(out)
    }

    /// Draw `n` samples by inverting standard normal draws. Deterministic
    /// for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        let mut rng = seeds::substream(seed, "sampling", 0);
        let normal = rand_distr::StandardNormal;
        let mut y = Array2::zeros((n, self.dim));
        for v in y.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        self.inverse_transform(&y)
    }

    /// Sum over layers and dimensions of the marginal log-derivatives plus
    /// the standardizer log-determinant: the log |det Jacobian| of
    /// [`RbigModel::transform`] at `x`, in nats.
    pub fn log_abs_det_jacobian(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{}", self.dim),
                got: format!("{}", x.len()),
            });
        }
        let d = self.dim;
        let mut cur = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut next = vec![0.0; d];
        self.standardizer.apply_into(x, &mut cur);
        let mut acc = self.standardizer.log_det();
        for layer in &self.layers {
            for j in 0..d {
                acc += layer.marginals[j].log_derivative(cur[j]);
            }
            layer.forward_into(&cur, &mut scratch, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(acc)
    }
}

/// Fit a Gaussianization stack.
///
/// Iterates marginal Gaussianization plus rotation until the marginal
/// negentropy of the iterate falls below the stop tolerance and the
/// Gaussianity test accepts, or `max_iterations` layers have been built.
/// Under PCA rotations, the stop additionally requires two trailing
/// random-rotation iterations to stay below tolerance, which rules out the
/// stationary case where every marginal is Gaussian but the joint is not.
pub fn fit(data: &Array2<f64>, config: &FitConfig) -> Result<RbigModel> {
    config.validate()?;
    let (n, d) = (data.nrows(), data.ncols());
    if d == 0 {
        return Err(Error::Config("data must have at least one column".into()));
    }
    if n < 10 * d {
        return Err(Error::InsufficientData {
            got: n,
            needed: 10 * d,
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit data".into()));
    }

    let standardizer = Standardizer::fit(data)?;
    let tol = config.resolved_stop_tolerance_bits(d);

    let mut x = Array2::zeros((n, d));
    for (mut orow, row) in x.outer_iter_mut().zip(data.outer_iter()) {
        standardizer.apply_into(row.as_slice().unwrap(), orow.as_slice_mut().unwrap());
    }

    let mut layers: Vec<RbigLayer> = Vec::new();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut cumulative = 0.0;
    let mut converged = false;
    let mut safety_done = 0usize;

    let est_bins = estimator_bins(config, n);
    loop {
        let started = Instant::now();
        let k = layers.len();

        let bins = map_knot_bins(&config.bins, n);
        let mut marginals = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = x.column(j).iter().cloned().collect();
            let m = fit_marginal(&col, bins, config.eps_u).map_err(|e| match e {
                Error::DegenerateMarginal { .. } => Error::DegenerateMarginal { column: Some(j) },
                other => other,
            })?;
            marginals.push(m);
        }
        let mut z = Array2::zeros((n, d));
        for (mut zrow, xrow) in z.outer_iter_mut().zip(x.outer_iter()) {
            let zr = zrow.as_slice_mut().unwrap();
            for (j, &v) in xrow.iter().enumerate() {
                zr[j] = marginals[j].forward(v);
            }
        }

        let jm = infotheory::total_marginal_negentropy_full_with(&x, est_bins)?.max(-0.01);
        let _ = &z;
        cumulative += jm;

        // A fresh test subsample every iteration: with a fixed subsample a
        // single upper-tail draw of the statistic repeats forever on
        // near-converged data and the fit never stops.
        let test_rows = config.resolved_gauss_test_rows(d);
        let sub = if n > test_rows {
            let mut rng = seeds::substream(config.seed, "gausstest-subsample", k as u64);
            let idx = rand::seq::index::sample(&mut rng, n, test_rows).into_vec();
            subsample_rows(&x, &idx)
        } else {
            x.clone()
        };
        let verdict = infotheory::gaussianity_test(&sub, config.gaussianity_alpha, config.seed)?;

        rows.push(TraceRow {
            iteration: k,
            jm_bits: jm,
            cumulative_dj_bits: cumulative,
            gauss_stat: verdict.statistic,
            gauss_accept: verdict.accept,
            wall_time_s: started.elapsed().as_secs_f64(),
        });

        let stop_condition = jm < tol && verdict.accept;
        if stop_condition && safety_done >= 2 {
            converged = true;
            break;
        }
        if k == config.max_iterations {
            break;
        }

        // A firing stop condition triggers two random-rotation safety
        // iterations before the stop is final; a rotation that re-exposes
        // hidden dependence as marginal non-Gaussianity resets the count.
        // This guards the stationary case under PCA and, for both rotation
        // kinds, stops the fit from quitting while the test merely lacks
        // power against the remaining dependence.
        let use_random = config.rotation == RotationKind::Random || stop_condition;
        if stop_condition {
            safety_done += 1;
        } else {
            safety_done = 0;
        }

        let rotation = if use_random {
            let rot_seed = seeds::substream(config.seed, "rotation", k as u64).next_u64();
            random_rotation(d, rot_seed)?
        } else {
            pca_rotation(&z)?
        };

        x = rotation.apply(&z)?;
        layers.push(RbigLayer {
            marginals,
            rotation,
            delta_j_bits: jm,
        });

        // Update the recorded wall time now that the layer work is done.
        rows.last_mut().unwrap().wall_time_s = started.elapsed().as_secs_f64();
    }

    // Trailing layers fitted while the stop condition was firing carry no
    // negentropy reduction (their delta_j is sub-tolerance); they exist to
    // verify convergence, so keep them out of the model. The trace keeps
    // every iteration.
    if converged {
        while layers.last().is_some_and(|l| l.delta_j_bits < tol) {
            layers.pop();
        }
    }

    Ok(RbigModel {
        dim: d,
        standardizer,
        layers,
        config: config.clone(),
        trace: FitTrace { rows, converged },
    })
}

// Knot budget for the marginal maps: the sqrt-n histogram policy, capped.
// Every map knot carries sampling noise that the layer injects into the
// data as real non-Gaussianity (of order d * knots / n bits per layer), so
// the budget is bounded independently of n once the per-segment counts are
// comfortable; finer maps make later iterations chase their own noise.
fn map_knot_bins(policy: &BinPolicy, n: usize) -> usize {
    match *policy {
        BinPolicy::Auto => BinPolicy::Auto.bins_for(n).min(48),
        BinPolicy::Fixed(b) => b,
    }
}

// The trace's negentropy estimates run at twice the map resolution: any
// structure the plug-in fails to resolve at iteration k is removed by the
// rank-based marginal maps anyway and never reappears, so estimator deficit
// leaks permanently out of the cumulative record. The finer partition
// quarters that deficit, and the union-knot maps leave no sub-resolution
// artifacts for it to mistake for signal.
fn estimator_bins(config: &FitConfig, n: usize) -> BinPolicy {
    match config.bins {
        BinPolicy::Auto => {
            BinPolicy::Fixed(((2.0 * (n as f64).sqrt()).ceil() as usize).clamp(32, 2048))
        }
        fixed => fixed,
    }
}

fn subsample_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let d = x.ncols();
    let mut out = Array2::zeros((idx.len(), d));
    for (mut orow, &i) in out.outer_iter_mut().zip(idx.iter()) {
        orow.assign(&x.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn standard_normal_data(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal))
    }

    pub(crate) fn rotated_cube(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let cube = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>());
        let rot = random_rotation(d, seed ^ 0xc0ffee).unwrap();
        rot.apply(&cube).unwrap()
    }

    #[test]
    fn gaussian_input_converges_fast() {
        let data = standard_normal_data(10_000, 2, 3);
        let config = FitConfig {
            rotation: RotationKind::Random,
            seed: 3,
            ..FitConfig::default()
        };
        let model = fit(&data, &config).unwrap();
        assert!(model.trace().converged);
        assert!(
            model.layers().len() <= 3,
            "took {} layers",
            model.layers().len()
        );
        assert!(model.trace().cumulative_delta_j_bits() <= 0.02);
    }

    #[test]
    fn ica_rotation_is_a_config_error() {
        let data = standard_normal_data(100, 2, 1);
        let config = FitConfig {
            rotation: RotationKind::Ica,
            ..FitConfig::default()
        };
        let err = fit(&data, &config).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("ICA"));
    }

    #[test]
    fn constant_column_is_named() {
        let mut data = standard_normal_data(200, 3, 5);
        data.column_mut(1).fill(7.5);
        let err = fit(&data, &FitConfig::default()).unwrap_err();
        match err {
            Error::DegenerateMarginal { column } => assert_eq!(column, Some(1)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let data = standard_normal_data(15, 2, 5);
        assert!(matches!(
            fit(&data, &FitConfig::default()),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn zero_layer_model_standardizes_only() {
        let data = array![[2.0, 10.0], [4.0, 20.0], [6.0, 30.0], [8.0, 40.0]];
        let standardizer = Standardizer::fit(&data).unwrap();
        let model = RbigModel::from_parts(
            standardizer.clone(),
            vec![],
            FitConfig::default(),
            FitTrace {
                rows: vec![],
                converged: true,
            },
        )
        .unwrap();
        let y = model.transform(&data).unwrap();
        for (yrow, xrow) in y.outer_iter().zip(data.outer_iter()) {
            let mut expect = vec![0.0; 2];
            standardizer.apply_into(xrow.as_slice().unwrap(), &mut expect);
            assert_eq!(yrow.as_slice().unwrap(), expect.as_slice());
        }
    }

    #[test]
    fn single_row_matches_batch_bitwise() {
        let data = rotated_cube(5_000, 2, 11);
        let config = FitConfig::with_seed(11);
        let model = fit(&data, &config).unwrap();
        let batch = model.transform(&data).unwrap();
        for i in (0..data.nrows()).step_by(501) {
            let row = data.row(i).insert_axis(ndarray::Axis(0)).to_owned();
            let single = model.transform(&row).unwrap();
            assert_eq!(single.row(0).to_vec(), batch.row(i).to_vec(), "row {i}");
        }
    }

    #[test]
    fn round_trip_on_training_data() {
        let data = rotated_cube(5_000, 2, 23);
        let model = fit(&data, &FitConfig::with_seed(23)).unwrap();
        let y = model.transform(&data).unwrap();
        let back = model.inverse_transform(&y).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in data.iter().zip(back.iter()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-5, "round trip error {worst}");
    }

    #[test]
    fn inverse_of_zero_is_near_the_median_chain() {
        let data = rotated_cube(4_000, 2, 31);
        let model = fit(&data, &FitConfig::with_seed(31)).unwrap();
        let zero = Array2::zeros((1, 2));
        let x = model.inverse_transform(&zero).unwrap();
        // Walking the median chain by hand: invert each layer from 0.
        let mut cur = vec![0.0; 2];
        let mut scratch = vec![0.0; 2];
        let mut next = vec![0.0; 2];
        for layer in model.layers().iter().rev() {
            layer.inverse_into(&cur, &mut scratch, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        let mut expect = vec![0.0; 2];
        model.standardizer().invert_into(&cur, &mut expect);
        assert_eq!(x.row(0).to_vec(), expect);
        for (v, row_min, row_max) in [
            (x[(0, 0)], -2.0, 2.0),
            (x[(0, 1)], -2.0, 2.0),
        ] {
            assert!(v > row_min && v < row_max, "median-ish point {v} out of range");
        }
    }

    #[test]
    fn bijectivity_inside_three_sigma() {
        let data = rotated_cube(5_000, 2, 37);
        let model = fit(&data, &FitConfig::with_seed(37)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut y = Array2::zeros((500, 2));
        for v in y.iter_mut() {
            loop {
                let draw: f64 = rng.sample(StandardNormal);
                if draw.abs() <= 3.0 {
                    *v = draw;
                    break;
                }
            }
        }
        let x = model.inverse_transform(&y).unwrap();
        let rt = model.transform(&x).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in y.iter().zip(rt.iter()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-5, "transform(inverse(y)) error {worst}");
    }

    #[test]
    fn log_density_at_gaussian_origin() {
        let data = standard_normal_data(10_000, 2, 41);
        let model = fit(&data, &FitConfig::with_seed(41)).unwrap();
        let x = Array2::zeros((1, 2));
        let ld = model.log_density(&x).unwrap()[0];
        let expect = -(2.0 * std::f64::consts::PI).ln();
        assert!((ld - expect).abs() <= 0.15, "log density {ld} vs {expect}");
    }

    #[test]
    fn far_points_score_below_all_training_points() {
        let data = rotated_cube(2_000, 2, 43);
        let model = fit(&data, &FitConfig::with_seed(43)).unwrap();
        let train_ld = model.log_density(&data).unwrap();
        let min_train = train_ld.iter().cloned().fold(f64::INFINITY, f64::min);
        let far = array![[1e4, -1e4], [500.0, 500.0]];
        for &ld in model.log_density(&far).unwrap().iter() {
            assert!(ld.is_finite());
            assert!(ld < min_train);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_moment_matched() {
        let data = rotated_cube(8_000, 2, 47);
        let model = fit(&data, &FitConfig::with_seed(47)).unwrap();
        let a = model.sample(1_000, 9).unwrap();
        let b = model.sample(1_000, 9).unwrap();
        assert_eq!(a, b);
        let c = model.sample(1_000, 10).unwrap();
        assert_ne!(a, c);

        let big = model.sample(50_000, 1).unwrap();
        let (mt, ct) = mean_cov(&data);
        let (ms, cs) = mean_cov(&big);
        let scale = ct.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cov_err = ct
            .iter()
            .zip(cs.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(cov_err <= 0.05 * scale, "cov error {cov_err} vs scale {scale}");
        let mean_err = mt
            .iter()
            .zip(ms.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(mean_err <= 0.05 * scale.sqrt().max(1e-12));
    }

    pub(crate) fn mean_cov(x: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
        let (n, d) = (x.nrows(), x.ncols());
        let mut mean = vec![0.0; d];
        for row in x.outer_iter() {
            for (m, &v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = vec![0.0; d * d];
        for row in x.outer_iter() {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        for c in &mut cov {
            *c /= (n - 1) as f64;
        }
        (mean, cov)
    }

    #[test]
    fn shape_mismatch_errors() {
        let data = standard_normal_data(500, 2, 51);
        let model = fit(&data, &FitConfig::with_seed(51)).unwrap();
        let bad = Array2::<f64>::zeros((3, 5));
        assert!(matches!(model.transform(&bad), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(
            model.inverse_transform(&bad),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(model.log_density(&bad), Err(Error::ShapeMismatch { .. })));
    }
}
