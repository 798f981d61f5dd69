//! The linear estimator families: ridge regression along general penalties,
//! gradient descent and gradient flow on the penalised least-squares
//! criterion. All outputs are coordinate vectors in the eigenbasis.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::spectral::PenalisedSpectrum;

/// A point on one of the regularisation paths, identified by its residual
/// filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    /// Ridge at penalty `lambda_prime`; values on either side of the base
    /// penalty are allowed.
    Ridge { lambda_prime: f64 },
    /// Gradient flow at time `t >= 0`.
    GradientFlow { t: f64 },
    /// Interpolated conjugate gradients at iteration time `t`.
    ConjugateGradient { t: f64 },
}

/// Multiplier of the residual filter at penalised eigenvalue `x`, for the two
/// linear families. `None` marks a null coordinate handled by the
/// pseudo-inverse convention (estimator coordinate zero, so the residual
/// filter acts as one).
pub(crate) fn linear_filter_multiplier(
    filter: &FilterSpec,
    lambda: f64,
    x: f64,
    is_null: bool,
) -> Result<f64> {
    match *filter {
        FilterSpec::Ridge { lambda_prime } => {
            let shifted = x - lambda + lambda_prime;
            if is_null || shifted <= 0.0 {
                Ok(1.0)
            } else {
                Ok((lambda_prime - lambda) / shifted)
            }
        }
        FilterSpec::GradientFlow { t } => {
            if is_null {
                Ok(1.0)
            } else {
                Ok((-t * x).exp())
            }
        }
        FilterSpec::ConjugateGradient { .. } => Err(Error::InvalidInput(
            "conjugate-gradient filters are data dependent; use the CG-specific operations".into(),
        )),
    }
}

/// Ridge estimator at penalty `lambda_prime`, in eigenbasis coordinates.
/// `lambda_prime = 0` uses the pseudo-inverse (minimum-norm) convention.
pub fn ridge(spec: &PenalisedSpectrum, lambda_prime: f64) -> Result<DVector<f64>> {
    if !(lambda_prime >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "penalty must be >= 0, got {lambda_prime}"
        )));
    }
    Ok(DVector::from_fn(spec.p(), |i, _| {
        let denom = spec.eigenvalues()[i] + lambda_prime;
        if spec.is_null(i) || denom <= spec.rank_tol() {
            0.0
        } else {
            spec.penalised_eigenvalue(i).sqrt() * spec.y_lambda()[i] / denom
        }
    }))
}

/// Gradient descent path on the penalised criterion.
#[derive(Debug, Clone)]
pub struct GradientDescentPath {
    /// Iterates 0..=k, starting at zero, in eigenbasis coordinates.
    pub iterates: Vec<DVector<f64>>,
    pub step_size: f64,
    /// Set when the step size violates the stability bound `2 / (s1 + lambda)`;
    /// the iterates are still produced.
    pub divergence_warning: bool,
}

/// Runs `steps` iterations of gradient descent with step size `eta`,
/// coordinate-wise in the eigenbasis.
pub fn gradient_descent(
    spec: &PenalisedSpectrum,
    eta: f64,
    steps: usize,
) -> Result<GradientDescentPath> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "step size must be positive, got {eta}"
        )));
    }
    let divergence_warning = eta >= 2.0 / spec.penalised_norm();
    let p = spec.p();
    let drive = DVector::from_fn(p, |i, _| {
        if spec.is_null(i) {
            0.0
        } else {
            spec.penalised_eigenvalue(i).sqrt() * spec.y_lambda()[i]
        }
    });
    let mut iterates = Vec::with_capacity(steps + 1);
    iterates.push(DVector::zeros(p));
    for _ in 0..steps {
        let prev = iterates.last().unwrap();
        let next = DVector::from_fn(p, |i, _| {
            prev[i] - eta * (spec.penalised_eigenvalue(i) * prev[i] - drive[i])
        });
        iterates.push(next);
    }
    Ok(GradientDescentPath {
        iterates,
        step_size: eta,
        divergence_warning,
    })
}

/// Gradient flow estimator at time `t`, in eigenbasis coordinates.
pub fn gradient_flow(spec: &PenalisedSpectrum, t: f64) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "flow time must be >= 0, got {t}"
        )));
    }
    Ok(DVector::from_fn(spec.p(), |i, _| {
        if spec.is_null(i) {
            0.0
        } else {
            let x = spec.penalised_eigenvalue(i);
            (1.0 - (-t * x).exp()) / x.sqrt() * spec.y_lambda()[i]
        }
    }))
}

/// Default learning rate `1 / (2 lambda + s1)`.
pub fn default_step_size(spec: &PenalisedSpectrum) -> f64 {
    1.0 / (2.0 * spec.lambda() + spec.eigenvalues()[0])
}
