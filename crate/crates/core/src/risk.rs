//! Regularised in-sample losses and risks, the standard error decomposition
//! for linear filters, the CG decomposition with truncated filters, and the
//! explicit CG error bounds.

use nalgebra::DVector;

use crate::cg::{residual_polynomial, CgTrace};
use crate::error::{Error, Result};
use crate::estimators::{linear_filter_multiplier, FilterSpec};
use crate::spectral::PenalisedSpectrum;

/// Deterministic target vector of the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    /// The (projected) true coefficient vector.
    Beta0,
    /// The penalised population coefficients at the base penalty.
    BetaLambda,
    /// The penalised population coefficients at another penalty in
    /// `[0, lambda]`.
    BetaLambdaPrime(f64),
}

/// A resolved target: its kind plus eigenbasis coordinates.
#[derive(Debug, Clone)]
pub struct Target {
    kind: TargetKind,
    gamma: DVector<f64>,
}

impl Target {
    /// Resolves the target coordinates on the given spectrum. Requires an
    /// attached truth; `BetaLambdaPrime` penalties must lie in
    /// `[0, lambda]`, the regime where the geometric target conditions are
    /// guaranteed.
    pub fn resolve(spec: &PenalisedSpectrum, kind: TargetKind) -> Result<Target> {
        let truth = spec
            .truth()
            .ok_or_else(|| Error::InvalidInput("target resolution requires ModelTruth".into()))?;
        let gamma = match kind {
            TargetKind::Beta0 => truth.beta0.clone(),
            TargetKind::BetaLambda => truth.beta_lambda.clone(),
            TargetKind::BetaLambdaPrime(lambda_prime) => {
                if !(lambda_prime >= 0.0 && lambda_prime <= spec.lambda()) {
                    return Err(Error::InvalidInput(format!(
                        "target penalty {lambda_prime} outside [0, {}]",
                        spec.lambda()
                    )));
                }
                spec.beta_lambda_prime(lambda_prime)?
            }
        };
        Ok(Target { kind, gamma })
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }
}

/// Regularised in-sample prediction loss: the squared penalised-covariance
/// half-power norm of the estimation error, evaluated coordinate-wise.
pub fn loss_in(spec: &PenalisedSpectrum, beta_hat: &DVector<f64>, target: &Target) -> f64 {
    let gamma = target.gamma();
    (0..spec.p())
        .map(|i| {
            let d = beta_hat[i] - gamma[i];
            spec.penalised_eigenvalue(i) * d * d
        })
        .sum()
}

/// Loss split into approximation, stochastic and cross terms with
/// `total = A + S - 2C`; the CG variant additionally carries the
/// square-root-trick bound on the approximation term.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBreakdown {
    pub approximation: f64,
    pub stochastic: f64,
    pub cross: f64,
    pub total: f64,
    /// Upper bound on the approximation term from the square-root trick
    /// (CG decomposition only).
    pub approximation_bound: Option<f64>,
}

/// Standard decomposition of the loss for the linear filter families.
pub fn decompose_linear(
    spec: &PenalisedSpectrum,
    filter: &FilterSpec,
    target: &Target,
) -> Result<ErrorBreakdown> {
    let truth = spec
        .truth()
        .ok_or_else(|| Error::InvalidInput("decomposition requires ModelTruth".into()))?;
    let gamma = target.gamma();
    let (mut a, mut s, mut c) = (0.0, 0.0, 0.0);
    for i in 0..spec.p() {
        let x = spec.penalised_eigenvalue(i);
        let r = linear_filter_multiplier(filter, spec.lambda(), x, spec.is_null(i))?;
        let bias = r * truth.beta_lambda[i] + (gamma[i] - truth.beta_lambda[i]);
        let noise = (1.0 - r) * truth.eps_lambda[i];
        a += x * bias * bias;
        s += noise * noise;
        c += x.sqrt() * bias * noise;
    }
    Ok(ErrorBreakdown {
        approximation: a,
        stochastic: s,
        cross: c,
        total: a + s - 2.0 * c,
        approximation_bound: None,
    })
}

/// Prediction risk of a deterministic linear filter: approximation term plus
/// the noise-variance trace term.
pub fn risk_linear(spec: &PenalisedSpectrum, filter: &FilterSpec, target: &Target) -> Result<f64> {
    let truth = spec
        .truth()
        .ok_or_else(|| Error::InvalidInput("risk evaluation requires ModelTruth".into()))?;
    let gamma = target.gamma();
    let mut risk = 0.0;
    for i in 0..spec.p() {
        let x = spec.penalised_eigenvalue(i);
        let r = linear_filter_multiplier(filter, spec.lambda(), x, spec.is_null(i))?;
        let bias = r * truth.beta_lambda[i] + (gamma[i] - truth.beta_lambda[i]);
        risk += x * bias * bias;
        if !spec.is_null(i) && spec.eigenvalues()[i] > 0.0 {
            let ratio = spec.eigenvalues()[i] / x;
            risk += truth.sigma2 / spec.n() as f64 * (1.0 - r) * (1.0 - r) * ratio;
        }
    }
    Ok(risk)
}

/// CG loss decomposition via truncated residual filters, for the penalised
/// population target. Eigenvalues exactly at the smallest zero are assigned
/// to the lower branch (the polynomial vanishes there, so only the indicator
/// bookkeeping is affected).
pub fn decompose_cg(spec: &PenalisedSpectrum, trace: &CgTrace, t: f64) -> Result<ErrorBreakdown> {
    let truth = spec
        .truth()
        .ok_or_else(|| Error::InvalidInput("CG decomposition requires ModelTruth".into()))?;
    let poly = residual_polynomial(trace, t)?;
    let x1 = poly.smallest_zero();

    let (mut a, mut s, mut c, mut a_bound) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..spec.p() {
        let x = spec.penalised_eigenvalue(i);
        let y = spec.y_lambda()[i];
        let r = poly.evaluate(x);
        let below = x <= x1;
        let r_low = if below { r } else { 0.0 };
        let r_high = if below { 0.0 } else { r };

        let bias_sq = x * r_low * truth.beta_lambda[i] * truth.beta_lambda[i];
        a_bound += bias_sq;
        a += bias_sq + r * r * y * y - r_low * y * y;
        s += (1.0 - r_low) * truth.eps_lambda[i] * truth.eps_lambda[i];
        c += r_high * y * truth.eps_lambda[i];
    }
    Ok(ErrorBreakdown {
        approximation: a,
        stochastic: s,
        cross: c,
        total: a + s - 2.0 * c,
        approximation_bound: Some(a_bound),
    })
}

/// Explicit CG loss bound: approximation and stochastic envelopes built from
/// the residual-polynomial slope at zero.
#[derive(Debug, Clone, Copy)]
pub struct CgBound {
    pub approximation_bar: f64,
    pub stochastic_bar: f64,
    /// `2(A + S)` for the penalised population target, `4(A + S)` otherwise.
    pub total: f64,
    /// Value of the geometric condition on the target (non-negative up to
    /// tolerance whenever the bound applies).
    pub condition_value: f64,
}

/// Evaluates the loss bound at iteration time `t` for the given target.
/// For targets other than the penalised population coefficients the
/// geometric condition value is checked against a small negative tolerance.
pub fn cg_bound(
    spec: &PenalisedSpectrum,
    trace: &CgTrace,
    t: f64,
    target: &Target,
) -> Result<CgBound> {
    let truth = spec
        .truth()
        .ok_or_else(|| Error::InvalidInput("CG bound requires ModelTruth".into()))?;
    let poly = residual_polynomial(trace, t)?;
    let rho = poly.slope_at_zero();
    let gamma = target.gamma();

    let mut s_bar = 0.0;
    let mut condition_value = 0.0;
    let mut beta_scale = 0.0;
    let mut gap_scale = 0.0;
    for i in 0..spec.p() {
        let x = spec.penalised_eigenvalue(i);
        let e = truth.eps_lambda[i];
        s_bar += (rho * x).min(1.0) * e * e;
        let b = truth.beta_lambda[i];
        let gap = gamma[i] - b;
        condition_value += x * (-rho * x / 2.0).exp() * b * gap;
        beta_scale += x * b * b;
        gap_scale += x * gap * gap;
    }

    let is_base_target = matches!(target.kind(), TargetKind::BetaLambda);
    if !is_base_target {
        let scale = beta_scale.sqrt() * gap_scale.sqrt();
        if condition_value < -1e-12 * scale {
            return Err(Error::ConditionViolated(format!(
                "target condition value {condition_value} below -1e-12 * {scale}"
            )));
        }
    }

    let (a_bar, total) = if is_base_target {
        let a_bar: f64 = (0..spec.p())
            .map(|i| {
                let x = spec.penalised_eigenvalue(i);
                let b = truth.beta_lambda[i];
                x * (-rho * x).exp() * b * b
            })
            .sum();
        (a_bar, 2.0 * a_bar + 2.0 * s_bar)
    } else {
        let a_bar: f64 = (0..spec.p())
            .map(|i| {
                let x = spec.penalised_eigenvalue(i);
                let b = truth.beta_lambda[i];
                let arg = (-rho * x / 2.0).exp() * b + gamma[i] - b;
                x * arg * arg
            })
            .sum();
        (a_bar, 4.0 * a_bar + 4.0 * s_bar)
    };

    Ok(CgBound {
        approximation_bar: a_bar,
        stochastic_bar: s_bar,
        total,
        condition_value,
    })
}
