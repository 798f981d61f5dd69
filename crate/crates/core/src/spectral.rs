//! Spectral decomposition of the penalised empirical covariance and the
//! functional calculus every filter is built on.
//!
//! All downstream modules work in the eigenbasis of the empirical covariance
//! `X'X / n`: vectors are stored as coordinate arrays and every filter acts as
//! coordinate-wise multiplication. The decomposition itself comes from an SVD
//! of `X / sqrt(n)` (better conditioned than forming `X'X` when `n < p`);
//! eigenvalues are squared singular values padded with zeros up to `p`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, ModelTruth};
use crate::error::{Error, Result};

/// Relative gap below which two penalised eigenvalues count as equal when
/// counting distinct eigenvalues.
pub const EIGENVALUE_CLUSTER_TOL: f64 = 1e-10;

/// Eigenpairs of the empirical covariance at penalty `lambda`, together with
/// the transformed response and, when the truth is attached, the transformed
/// truth quantities. Immutable after construction and safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct PenalisedSpectrum {
    data: Arc<Dataset>,
    lambda: f64,
    /// Eigenvalues of `X'X / n`, non-increasing, length `p`.
    s: DVector<f64>,
    /// Orthonormal eigenvectors, one per column.
    v: DMatrix<f64>,
    /// Number of distinct eigenvalues of the penalised covariance.
    p_tilde: usize,
    /// Coordinates of the whitened response `(X'X/n + lambda I)^{-1/2} X'y/n`.
    y_lambda: DVector<f64>,
    truth: Option<AttachedTruth>,
    /// Eigenvalues at or below this threshold are treated as exact zeros for
    /// the pseudo-inverse convention.
    rank_tol: f64,
}

/// Truth quantities expressed in the eigenbasis.
#[derive(Debug, Clone)]
pub struct AttachedTruth {
    /// Coordinates of the minimum-norm representative of the true coefficients.
    pub beta0: DVector<f64>,
    /// Coordinates of the penalised population coefficients
    /// `(X'X/n + lambda I)^{-1} (X'X/n) beta0`.
    pub beta_lambda: DVector<f64>,
    /// Coordinates of the whitened noise `(X'X/n + lambda I)^{-1/2} X'e/n`.
    pub eps_lambda: DVector<f64>,
    pub sigma2: f64,
    /// Population covariance in original coordinates, when known.
    pub sigma: Option<DMatrix<f64>>,
}

impl PenalisedSpectrum {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// Eigenvalues of the unpenalised empirical covariance, non-increasing.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// `i`-th eigenvalue of the penalised covariance.
    pub fn penalised_eigenvalue(&self, i: usize) -> f64 {
        self.s[i] + self.lambda
    }

    /// Spectral norm of the penalised covariance.
    pub fn penalised_norm(&self) -> f64 {
        self.penalised_eigenvalue(0)
    }

    /// Number of distinct eigenvalues of the penalised covariance.
    pub fn p_tilde(&self) -> usize {
        self.p_tilde
    }

    pub fn y_lambda(&self) -> &DVector<f64> {
        &self.y_lambda
    }

    pub fn truth(&self) -> Option<&AttachedTruth> {
        self.truth.as_ref()
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.truth.as_ref().map(|t| t.sigma2)
    }

    /// Whether coordinate `i` lies in the null space of the penalised
    /// covariance, where inverse filters act as zero.
    pub fn is_null(&self, i: usize) -> bool {
        self.penalised_eigenvalue(i) <= self.rank_tol
    }

    /// Whether eigenvalue `i` is numerically zero (null space of the design).
    pub fn is_rank_deficient(&self, i: usize) -> bool {
        self.s[i] <= self.rank_tol
    }

    pub(crate) fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Coordinates of `w` in the eigenbasis.
    pub fn to_coords(&self, w: &DVector<f64>) -> DVector<f64> {
        self.v.transpose() * w
    }

    /// Original-coordinate vector with the given eigenbasis coordinates.
    pub fn from_coords(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.v * coords
    }

    /// The linear map `f` of the penalised covariance, represented by its
    /// multipliers in the eigenbasis. Null coordinates use the stated `f(0)`.
    pub fn apply_filter(&self, f: impl Fn(f64) -> f64) -> Result<SpectralFilter> {
        let mut mult = DVector::zeros(self.p());
        for i in 0..self.p() {
            let x = if self.is_null(i) {
                0.0
            } else {
                self.penalised_eigenvalue(i)
            };
            let value = f(x);
            if !value.is_finite() {
                return Err(Error::Numerical(format!(
                    "filter is not finite at penalised eigenvalue {x}"
                )));
            }
            mult[i] = value;
        }
        Ok(SpectralFilter { multipliers: mult })
    }

    /// Coordinates of the penalised population coefficients at penalty
    /// `lambda_prime` (the conditional mean of the ridge estimator there).
    pub fn beta_lambda_prime(&self, lambda_prime: f64) -> Result<DVector<f64>> {
        let truth = self.truth.as_ref().ok_or_else(|| {
            Error::InvalidInput("operation requires an attached ModelTruth".into())
        })?;
        if !(lambda_prime >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "penalty must be >= 0, got {lambda_prime}"
            )));
        }
        Ok(DVector::from_fn(self.p(), |i, _| {
            let denom = self.s[i] + lambda_prime;
            if denom <= self.rank_tol {
                0.0
            } else {
                self.s[i] / denom * truth.beta0[i]
            }
        }))
    }

    /// Rebuilds the response-dependent quantities for a fresh noise vector,
    /// reusing the eigendecomposition. The design matrix is unchanged.
    pub fn with_fresh_noise(&self, eps: &DVector<f64>) -> Result<PenalisedSpectrum> {
        let truth = self.truth.as_ref().ok_or_else(|| {
            Error::InvalidInput("fresh-noise resampling requires ModelTruth".into())
        })?;
        if eps.len() != self.n() {
            return Err(Error::InvalidInput(
                "noise length must match sample size".into(),
            ));
        }
        let beta0_orig = self.from_coords(&truth.beta0);
        let y = self.data.design() * beta0_orig + eps;
        let data = Arc::new(self.data.with_response(y)?);

        let xty = data.design().transpose() * data.response() / self.n() as f64;
        let y_lambda = self.whiten_coords(&self.to_coords(&xty));
        let xteps = data.design().transpose() * eps / self.n() as f64;
        let eps_lambda = self.whiten_coords(&self.to_coords(&xteps));

        let mut out = self.clone();
        out.data = data;
        out.y_lambda = y_lambda;
        if let Some(t) = out.truth.as_mut() {
            t.eps_lambda = eps_lambda;
        }
        Ok(out)
    }

    /// Divides coordinates by the square root of the penalised eigenvalues,
    /// acting as zero on the null space.
    fn whiten_coords(&self, coords: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.p(), |i, _| {
            if self.is_null(i) {
                0.0
            } else {
                coords[i] / self.penalised_eigenvalue(i).sqrt()
            }
        })
    }
}

/// A function of the penalised covariance in the eigenbasis: coordinate-wise
/// multiplication.
#[derive(Debug, Clone)]
pub struct SpectralFilter {
    multipliers: DVector<f64>,
}

impl SpectralFilter {
    pub fn multipliers(&self) -> &DVector<f64> {
        &self.multipliers
    }

    pub fn apply(&self, coords: &DVector<f64>) -> DVector<f64> {
        coords.component_mul(&self.multipliers)
    }
}

/// Decomposes the penalised empirical covariance of `data` and expresses the
/// whitened response (and, given `truth`, the transformed truth quantities) in
/// its eigenbasis.
pub fn decompose(
    data: &Dataset,
    lambda: f64,
    truth: Option<&ModelTruth>,
) -> Result<PenalisedSpectrum> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "penalty must be finite and >= 0, got {lambda}"
        )));
    }
    let (n, p) = (data.n(), data.p());
    let (s, v) = eigen_via_svd(data.design())?;
    let rank_tol = s[0].max(0.0) * f64::EPSILON * n.max(p) as f64;

    let cluster_tol = EIGENVALUE_CLUSTER_TOL * (s[0] + lambda).max(f64::MIN_POSITIVE);
    let mut p_tilde = 1usize;
    for i in 1..p {
        if s[i - 1] - s[i] > cluster_tol {
            p_tilde += 1;
        }
    }

    let mut spec = PenalisedSpectrum {
        data: Arc::new(data.clone()),
        lambda,
        s,
        v,
        p_tilde,
        y_lambda: DVector::zeros(p),
        truth: None,
        rank_tol,
    };

    let xty = data.design().transpose() * data.response() / n as f64;
    spec.y_lambda = spec.whiten_coords(&spec.to_coords(&xty));

    if let Some(truth) = truth {
        if truth.beta0().len() != p {
            return Err(Error::InvalidInput(
                "coefficient length does not match feature count".into(),
            ));
        }
        // Minimum-norm representative: project onto the row space of X.
        let mut beta0 = spec.to_coords(truth.beta0());
        for i in 0..p {
            if spec.is_rank_deficient(i) {
                beta0[i] = 0.0;
            }
        }
        let beta_lambda = DVector::from_fn(p, |i, _| {
            if spec.is_null(i) {
                0.0
            } else {
                spec.s[i] / spec.penalised_eigenvalue(i) * beta0[i]
            }
        });
        let eps = data.response() - data.design() * spec.from_coords(&beta0);
        let xteps = data.design().transpose() * eps / n as f64;
        let eps_lambda = spec.whiten_coords(&spec.to_coords(&xteps));
        spec.truth = Some(AttachedTruth {
            beta0,
            beta_lambda,
            eps_lambda,
            sigma2: truth.sigma2(),
            sigma: truth.population_covariance().cloned(),
        });
    }
    Ok(spec)
}

/// Projection of `beta` onto the row space of the design matrix (the
/// minimum-norm solution representative).
pub fn min_norm_project(data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    if beta.len() != data.p() {
        return Err(Error::InvalidInput(
            "vector length does not match feature count".into(),
        ));
    }
    let (s, v) = eigen_via_svd(data.design())?;
    let tol = s[0].max(0.0) * f64::EPSILON * data.n().max(data.p()) as f64;
    let mut coords = v.transpose() * beta;
    for i in 0..coords.len() {
        if s[i] <= tol {
            coords[i] = 0.0;
        }
    }
    Ok(v * coords)
}

/// Eigenpairs of `X'X/n` via an SVD of `X/sqrt(n)`: eigenvalues are squared
/// singular values, sorted non-increasing and padded with zeros up to `p`;
/// when `n < p`, the eigenvector matrix is completed to an orthonormal basis
/// with a basis of the null space.
fn eigen_via_svd(x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, p) = (x.nrows(), x.ncols());
    let scaled = x / (n as f64).sqrt();
    let svd = scaled.svd_unordered(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not produce right singular vectors".into()))?;
    let singular = svd.singular_values;

    let m = singular.len().min(p);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| singular[b].partial_cmp(&singular[a]).unwrap());

    let mut s = DVector::zeros(p);
    let mut v = DMatrix::zeros(p, p);
    for (col, &k) in order.iter().enumerate() {
        s[col] = singular[k] * singular[k];
        for row in 0..p {
            v[(row, col)] = v_t[(k, row)];
        }
    }
    if m < p {
        complete_basis(&mut v, m)?;
    }
    Ok((s, v))
}

/// Fills columns `m..p` of `v` with an orthonormal basis of the orthogonal
/// complement of its first `m` columns, via the eigenvectors of the
/// complement projector.
fn complete_basis(v: &mut DMatrix<f64>, m: usize) -> Result<()> {
    let p = v.nrows();
    let thin = v.columns(0, m).into_owned();
    let projector = DMatrix::identity(p, p) - &thin * thin.transpose();
    let eig = projector.symmetric_eigen();
    let mut picked = 0usize;
    for j in 0..p {
        if eig.eigenvalues[j] > 0.5 {
            if picked == p - m {
                return Err(Error::Numerical(
                    "null-space completion found too many directions".into(),
                ));
            }
            for row in 0..p {
                v[(row, m + picked)] = eig.eigenvectors[(row, j)];
            }
            picked += 1;
        }
    }
    if picked != p - m {
        return Err(Error::Numerical(
            "null-space completion found too few directions".into(),
        ));
    }
    Ok(())
}
