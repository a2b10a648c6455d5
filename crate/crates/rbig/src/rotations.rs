//! Orthonormal rotation providers: PCA (covariance eigenvectors) and Haar
//! random rotations, behind one value type.
//!
//! Rotations are applied to row-major sample matrices as `y = x R^T` per
//! row, with the inverse `x = y R`; the per-row loops are written out by
//! hand so a single row transforms bitwise identically inside any batch.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Where a rotation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationProvenance {
    Pca,
    Random,
}

/// A d x d rotation: orthonormal with determinant +1 by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalRotation {
    matrix: Array2<f64>,
    provenance: RotationProvenance,
    seed: Option<u64>,
}

impl OrthonormalRotation {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Row-major rotation matrix; row `i` is the i-th output basis vector.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn provenance(&self) -> RotationProvenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Identity rotation.
    pub fn identity(d: usize, provenance: RotationProvenance) -> Self {
        Self {
            matrix: Array2::eye(d),
            provenance,
            seed: None,
        }
    }

    /// Rebuild from a persisted row-major matrix, revalidating invariants.
    pub fn from_parts(
        matrix: Array2<f64>,
        provenance: RotationProvenance,
        seed: Option<u64>,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Corrupt(format!(
                "rotation matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let r = Self {
            matrix,
            provenance,
            seed,
        };
        if r.orthonormality_deviation() > 1e-8 {
            return Err(Error::Corrupt("rotation matrix is not orthonormal".into()));
        }
        Ok(r)
    }

    /// Max absolute elementwise deviation of `R^T R` from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut dot = 0.0;
                for k in 0..d {
                    dot += self.matrix[(k, i)] * self.matrix[(k, j)];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Determinant, computed by LU on a copy.
    pub fn determinant(&self) -> f64 {
        to_dmatrix(&self.matrix).determinant()
    }

    /// Rotate each row of `x`: `y = x R^T`.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_cols(x)?;
        let mut out = Array2::zeros(x.raw_dim());
        for (mut orow, xrow) in out.outer_iter_mut().zip(x.outer_iter()) {
            self.rotate_row_into(
                xrow.as_slice().expect("row-major input"),
                orow.as_slice_mut().expect("row-major output"),
            );
        }
        Ok(out)
    }

    /// Undo [`OrthonormalRotation::apply`]: `x = y R`.
    pub fn apply_inverse(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_cols(y)?;
        let mut out = Array2::zeros(y.raw_dim());
        for (mut orow, yrow) in out.outer_iter_mut().zip(y.outer_iter()) {
            self.rotate_row_inv_into(
                yrow.as_slice().expect("row-major input"),
                orow.as_slice_mut().expect("row-major output"),
            );
        }
        Ok(out)
    }

    pub(crate) fn rotate_row_into(&self, row: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += self.matrix[(i, k)] * row[k];
            }
            out[i] = acc;
        }
    }

    pub(crate) fn rotate_row_inv_into(&self, row: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += self.matrix[(k, i)] * row[k];
            }
            out[i] = acc;
        }
    }

    fn check_cols(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("n x {}", self.dim()),
                got: format!("{} x {}", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }
}

/// PCA rotation: rows are covariance eigenvectors in descending eigenvalue
/// order, so rotated centered data has diagonal sample covariance.
///
/// A ridge of `1e-10 * trace/d` regularizes the covariance; a rank-deficient
/// spectrum is reported with a warning rather than an error.
pub fn pca_rotation(data: &Array2<f64>) -> Result<OrthonormalRotation> {
    let (n, d) = (data.nrows(), data.ncols());
    if n <= d {
        return Err(Error::InsufficientData { got: n, needed: d + 1 });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pca input data".into()));
    }

    let mut mean = vec![0.0f64; d];
    for row in data.outer_iter() {
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in data.outer_iter() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let ridge = 1e-10 * cov.trace() / d as f64;
    for i in 0..d {
        cov[(i, i)] += ridge;
    }

    let eig = cov.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b)) // stable tie-break
    });

    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let lambda_min = eig.eigenvalues[*order.last().unwrap()];
    if lambda_min <= lambda_max * 1e-12 {
        log::warn!(
            "pca covariance is rank deficient (min eigenvalue {lambda_min:.3e}); \
             using eigenvectors of the ridge-regularized covariance"
        );
    }

    let mut matrix = Array2::zeros((d, d));
    for (row, &src) in order.iter().enumerate() {
        // Deterministic sign: largest-magnitude component positive.
        let col = eig.eigenvectors.column(src);
        let mut lead = 0;
        for k in 1..d {
            if col[k].abs() > col[lead].abs() {
                lead = k;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..d {
            matrix[(row, k)] = sign * col[k];
        }
    }

    let mut rot = OrthonormalRotation {
        matrix,
        provenance: RotationProvenance::Pca,
        seed: None,
    };
    force_positive_determinant(&mut rot);
    Ok(rot)
}

/// Haar-distributed random rotation: QR of an i.i.d. standard normal matrix
/// with the R-diagonal sign convention, then a column flip to force the
/// determinant to +1. Deterministic for a fixed seed.
pub fn random_rotation(d: usize, seed: u64) -> Result<OrthonormalRotation> {
    if d == 0 {
        return Err(Error::Config("rotation dimension must be >= 1".into()));
    }
    let mut rng = crate::seeds::substream(seed, "random-rotation", 0);
    let gauss = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gauss.qr();
    let r_diag: Vec<f64> = (0..d).map(|i| qr.r()[(i, i)]).collect();
    let q = qr.q();

    let mut matrix = Array2::zeros((d, d));
    for j in 0..d {
        let sign = if r_diag[j] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            matrix[(i, j)] = sign * q[(i, j)];
        }
    }

    let mut rot = OrthonormalRotation {
        matrix,
        provenance: RotationProvenance::Random,
        seed: Some(seed),
    };
    force_positive_determinant(&mut rot);
    Ok(rot)
}

fn force_positive_determinant(rot: &mut OrthonormalRotation) {
    if rot.determinant() < 0.0 {
        let d = rot.dim();
        for i in 0..d {
            rot.matrix[(i, 0)] = -rot.matrix[(i, 0)];
        }
    }
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}
