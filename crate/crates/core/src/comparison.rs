//! The spectrum-dependent comparison constant, its supremum over time, the
//! main CG-versus-flow risk bound, path-oracle comparisons, the
//! monotone-risk certificate and the in-/out-of-sample loss transfer.

use nalgebra::DVector;

use crate::cg::{
    cg_solve, flow_time_to_iteration, interpolated_iterate, CgTrace, DEFAULT_CG_REL_TOL,
};
use crate::error::{Error, Result};
use crate::estimators::FilterSpec;
use crate::risk::{loss_in, risk_linear, Target, TargetKind};
use crate::rng::{StreamPurpose, StreamRng};
use crate::spectral::PenalisedSpectrum;
use crate::util::mean_and_se;

/// `4 / (1 - e^{-1/2})^2`, the universal factor in the main comparison bound.
pub fn main_bound_factor() -> f64 {
    4.0 / (1.0 - (-0.5f64).exp()).powi(2)
}

/// Constant relating the CG path-oracle risk to the flow oracle.
pub const ORACLE_FLOW_FACTOR: f64 = 25.9;
/// Constant relating the CG path-oracle risk to the ridge oracle.
pub const ORACLE_RIDGE_FACTOR: f64 = 43.7;

/// One evaluation of the main comparison bound.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonRecord {
    pub t: f64,
    /// Split index of the comparison constant (1-based), absent on the zero
    /// branch.
    pub i_t: Option<usize>,
    pub c_t_lambda: f64,
    /// CG risk at the transformed time (Monte Carlo mean) or its analytic
    /// bound, by mode.
    pub lhs: f64,
    /// Standard error of the Monte Carlo mean, absent in analytic mode.
    pub lhs_se: Option<f64>,
    /// Bound factor times the flow risk at `t`.
    pub rhs: f64,
    pub satisfied: bool,
}

/// How the left-hand side of the main bound is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum RiskMode {
    /// Deterministic bound: four times the flow approximation error plus the
    /// capped trace term. Pathwise guarantee.
    AnalyticBound,
    /// Monte Carlo average of losses at the per-draw transformed time, over
    /// fresh noise draws sharing the design matrix.
    MonteCarlo { replicates: usize, seed: u64 },
}

/// Comparison constant at flow time `t` for the eigenvalues `s` (descending)
/// at penalty `lambda`. Returns the split index and the constant; the index
/// is absent when the zero branch applies.
pub fn c_constant(s: &[f64], lambda: f64, t: f64) -> Result<(Option<usize>, f64)> {
    let p = s.len();
    if p == 0 || !(s[0] + lambda > 0.0) {
        return Err(Error::InvalidInput(
            "spectrum must satisfy s1 + lambda > 0".into(),
        ));
    }
    if t < 0.5 / (s[0] + lambda) {
        return Err(Error::InvalidInput(format!(
            "time {t} below the admissible threshold {}",
            0.5 / (s[0] + lambda)
        )));
    }
    // Admissibility gives `0.5 / t - lambda <= s1`; clamp away the rounding
    // spill at the boundary so the split index stays at least two.
    let threshold = (0.5 / t - lambda).min(s[0]);
    if s[p - 1] >= threshold {
        return Ok((None, 0.0));
    }
    let i_t = s
        .iter()
        .position(|&sj| sj < threshold)
        .expect("threshold above smallest eigenvalue")
        + 1;
    Ok((Some(i_t), c_at_split(s, lambda, i_t)))
}

/// The comparison constant as a function of the split index alone.
fn c_at_split(s: &[f64], lambda: f64, i_t: usize) -> f64 {
    let numerator: f64 = s[i_t - 1..].iter().sum();
    if numerator == 0.0 {
        return 0.0;
    }
    let head: f64 = s[..i_t - 1]
        .iter()
        .map(|&sj| (s[i_t - 1] + lambda) * sj / (sj + lambda))
        .sum();
    let tail: f64 = s[i_t - 1..]
        .iter()
        .map(|&sj| (sj + lambda) * sj / (s[i_t - 2] + lambda))
        .sum();
    numerator / (head + tail)
}

/// Supremum of the comparison constant over all admissible times. The
/// constant depends on time only through the split index, so the supremum is
/// the maximum over attainable indices (those with a strict eigenvalue gap),
/// together with the zero branch.
pub fn c_bar(s: &[f64], lambda: f64) -> f64 {
    let mut best = 0.0f64;
    for i in 2..=s.len() {
        if s[i - 1] < s[i - 2] {
            best = best.max(c_at_split(s, lambda, i));
        }
    }
    best
}

/// Checks the main comparison bound at flow time `t` for the given target.
pub fn check_main_bound(
    spec: &PenalisedSpectrum,
    target: &Target,
    t: f64,
    mode: RiskMode,
) -> Result<ComparisonRecord> {
    let truth = spec
        .truth()
        .ok_or_else(|| Error::InvalidInput("main bound requires ModelTruth".into()))?;
    let s: Vec<f64> = spec.eigenvalues().iter().copied().collect();
    let (i_t, c) = c_constant(&s, spec.lambda(), t)?;
    let rhs = main_bound_factor()
        * (1.0 + c)
        * risk_linear(spec, &FilterSpec::GradientFlow { t }, target)?;

    let record = |lhs: f64, lhs_se: Option<f64>| {
        let slack = lhs_se.map_or(0.0, |se| 3.0 * se);
        ComparisonRecord {
            t,
            i_t,
            c_t_lambda: c,
            lhs,
            lhs_se,
            rhs,
            satisfied: lhs <= rhs * (1.0 + 1e-9) + slack,
        }
    };

    match mode {
        RiskMode::AnalyticBound => {
            let mut approx = 0.0;
            let mut trace_term = 0.0;
            let gamma = target.gamma();
            for i in 0..spec.p() {
                let x = spec.penalised_eigenvalue(i);
                let b = truth.beta_lambda[i];
                let bias = (-t * x).exp() * b + gamma[i] - b;
                approx += x * bias * bias;
                if spec.eigenvalues()[i] > 0.0 && !spec.is_null(i) {
                    trace_term += (2.0 * t).min(1.0 / x) * spec.eigenvalues()[i];
                }
            }
            let lhs = 4.0 * approx + 4.0 * truth.sigma2 / spec.n() as f64 * trace_term;
            Ok(record(lhs, None))
        }
        RiskMode::MonteCarlo { replicates, seed } => {
            if replicates == 0 {
                return Err(Error::InvalidInput(
                    "Monte Carlo mode needs at least one replicate".into(),
                ));
            }
            let sigma = truth.sigma2.sqrt();
            let mut losses = Vec::with_capacity(replicates);
            for m in 0..replicates {
                let mut rng = StreamRng::new(seed, m as u64, StreamPurpose::McNoise);
                let eps = DVector::from_fn(spec.n(), |_, _| sigma * rng.standard_normal());
                let fresh = spec.with_fresh_noise(&eps)?;
                let trace = cg_solve(&fresh, DEFAULT_CG_REL_TOL)?;
                let tau = flow_time_to_iteration(&trace, t);
                let fresh_target = Target::resolve(&fresh, target.kind())?;
                losses.push(loss_in(
                    &fresh,
                    &interpolated_iterate(&trace, tau)?,
                    &fresh_target,
                ));
            }
            let (mean, se) = mean_and_se(&losses);
            Ok(record(mean, Some(se)))
        }
    }
}

/// Best values along each regularisation path and the oracle inequality
/// factors relating them.
#[derive(Debug, Clone, Copy)]
pub struct OracleComparison {
    /// Smallest CG loss over the interpolation knots plus subdivisions.
    pub cg_oracle: f64,
    /// Smallest flow risk over the admissible time range.
    pub gf_oracle: f64,
    /// Smallest ridge risk over penalties within twice the spectral norm.
    pub rr_oracle: f64,
    pub c_bar: f64,
    pub gf_factor: f64,
    pub rr_factor: f64,
    pub gf_satisfied: bool,
    pub rr_satisfied: bool,
}

/// Grid size for the flow and ridge oracle searches.
const ORACLE_GRID: usize = 512;
/// Subdivisions per CG interpolation unit.
const CG_SUBDIVISIONS: usize = 8;

/// Minimises each path over its grid and checks the oracle inequalities.
pub fn oracle_comparison(
    spec: &PenalisedSpectrum,
    trace: &CgTrace,
    target: &Target,
) -> Result<OracleComparison> {
    if !matches!(
        target.kind(),
        TargetKind::BetaLambda | TargetKind::BetaLambdaPrime(_)
    ) {
        return Err(Error::InvalidInput(
            "oracle comparison requires a penalised population target".into(),
        ));
    }
    let mut cg_oracle = f64::INFINITY;
    for j in 0..=trace.stop_index() * CG_SUBDIVISIONS {
        let t = j as f64 / CG_SUBDIVISIONS as f64;
        cg_oracle = cg_oracle.min(loss_in(spec, &interpolated_iterate(trace, t)?, target));
    }

    let gf_oracle = flow_oracle(spec, target)?;
    let rr_oracle = ridge_oracle(spec, target)?;

    let s: Vec<f64> = spec.eigenvalues().iter().copied().collect();
    let c_bar = c_bar(&s, spec.lambda());
    let gf_factor = ORACLE_FLOW_FACTOR * (1.0 + c_bar);
    let rr_factor = ORACLE_RIDGE_FACTOR * (1.0 + c_bar);
    Ok(OracleComparison {
        cg_oracle,
        gf_oracle,
        rr_oracle,
        c_bar,
        gf_factor,
        rr_factor,
        gf_satisfied: cg_oracle <= gf_factor * gf_oracle * (1.0 + 1e-9),
        rr_satisfied: cg_oracle <= rr_factor * rr_oracle * (1.0 + 1e-9),
    })
}

/// Smallest flow risk on a logarithmic grid over the admissible range
/// `t >= 1 / (2 |penalised covariance|)`.
pub fn flow_oracle(spec: &PenalisedSpectrum, target: &Target) -> Result<f64> {
    let t_min = 0.5 / spec.penalised_norm();
    let x_min = (0..spec.p())
        .filter(|&i| !spec.is_null(i))
        .map(|i| spec.penalised_eigenvalue(i))
        .fold(f64::INFINITY, f64::min);
    let t_max = (40.0 / x_min).max(10.0 * t_min);
    let mut best = f64::INFINITY;
    for j in 0..ORACLE_GRID {
        let t = t_min * (t_max / t_min).powf(j as f64 / (ORACLE_GRID - 1) as f64);
        best = best.min(risk_linear(spec, &FilterSpec::GradientFlow { t }, target)?);
    }
    Ok(best)
}

/// Smallest ridge risk over penalties in
/// `[lambda, lambda + 2 |penalised covariance|]`, on a logarithmic offset grid.
pub fn ridge_oracle(spec: &PenalisedSpectrum, target: &Target) -> Result<f64> {
    let span = 2.0 * spec.penalised_norm();
    let offset_min = 1e-8 * span;
    let mut best = risk_linear(
        spec,
        &FilterSpec::Ridge {
            lambda_prime: spec.lambda(),
        },
        target,
    )?;
    for j in 0..ORACLE_GRID {
        let offset = offset_min * (span / offset_min).powf(j as f64 / (ORACLE_GRID - 1) as f64);
        let filter = FilterSpec::Ridge {
            lambda_prime: spec.lambda() + offset,
        };
        best = best.min(risk_linear(spec, &filter, target)?);
    }
    Ok(best)
}

/// Result of the monotone-flow-risk certificate.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicityCertificate {
    /// Smallest penalty satisfying every tail inequality; absent when no
    /// finite penalty works.
    pub lambda_min: Option<f64>,
    /// Whether the spectrum's own penalty qualifies.
    pub holds_at_lambda: bool,
}

/// Evaluates the tail inequalities that certify a monotonously decreasing
/// flow risk for the true-coefficient target.
pub fn monotonicity_certificate(spec: &PenalisedSpectrum) -> Result<MonotonicityCertificate> {
    let truth = spec
        .truth()
        .ok_or_else(|| Error::InvalidInput("certificate requires ModelTruth".into()))?;
    let p = spec.p();
    let noise_rate = truth.sigma2 / spec.n() as f64;

    let mut lambda_min = 0.0f64;
    // Tail sums from the smallest eigenvalue upwards.
    let mut signal_tail = 0.0;
    let mut spectrum_tail = 0.0;
    let mut feasible = true;
    for i in (0..p).rev() {
        let b = truth.beta0[i];
        signal_tail += spec.eigenvalues()[i] * b * b;
        spectrum_tail += spec.eigenvalues()[i];
        let required = noise_rate * spectrum_tail;
        if required == 0.0 {
            continue;
        }
        if signal_tail <= 0.0 {
            feasible = false;
            break;
        }
        lambda_min = lambda_min.max(required / signal_tail);
    }
    if !feasible {
        return Ok(MonotonicityCertificate {
            lambda_min: None,
            holds_at_lambda: false,
        });
    }
    Ok(MonotonicityCertificate {
        lambda_min: Some(lambda_min),
        holds_at_lambda: spec.lambda() >= lambda_min,
    })
}

/// In-/out-of-sample loss transfer at one estimator.
#[derive(Debug, Clone, Copy)]
pub struct OutOfSampleRecord {
    /// Effective rank of the population covariance at the penalty.
    pub n_lambda: f64,
    /// Spectral norm of the whitened covariance deviation.
    pub op_gap: f64,
    pub loss_in: f64,
    pub loss_out: f64,
    /// Deterministic transfer inequality, up to a small relative tolerance.
    pub gap_ok: bool,
}

/// Computes the out-of-sample loss, the effective rank and the whitened
/// covariance gap, and verifies the deterministic transfer inequality.
/// Estimator and target are eigenbasis coordinate vectors.
pub fn out_of_sample_gap(
    spec: &PenalisedSpectrum,
    beta_hat: &DVector<f64>,
    target: &Target,
) -> Result<OutOfSampleRecord> {
    let truth = spec
        .truth()
        .ok_or_else(|| Error::InvalidInput("out-of-sample transfer requires ModelTruth".into()))?;
    let sigma = truth
        .sigma
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("population covariance is not attached".into()))?;
    let lambda = spec.lambda();
    let p = spec.p();

    let diff = spec.from_coords(beta_hat) - spec.from_coords(target.gamma());
    let loss_out = (sigma * &diff).dot(&diff) + lambda * diff.norm_squared();
    let loss_in_value = loss_in(spec, beta_hat, target);

    let eig = sigma.clone().symmetric_eigen();
    let pop_norm = eig.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e));
    let tol = pop_norm.max(lambda) * f64::EPSILON * p as f64;
    let mut n_lambda = 0.0;
    let mut inv_sqrt = DVector::zeros(p);
    for i in 0..p {
        let e = eig.eigenvalues[i].max(0.0);
        let shifted = e + lambda;
        if shifted > tol {
            n_lambda += e / shifted;
            inv_sqrt[i] = 1.0 / shifted.sqrt();
        }
    }
    // Whitened deviation in the population eigenbasis.
    let gram = spec.dataset().design().transpose() * spec.dataset().design() / spec.n() as f64;
    let deviation = sigma - gram;
    let rotated = eig.eigenvectors.transpose() * deviation * &eig.eigenvectors;
    let mut whitened = rotated;
    for i in 0..p {
        for j in 0..p {
            whitened[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let op_gap = whitened
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &e| m.max(e.abs()));

    let gap_ok = (loss_out - loss_in_value).abs() <= op_gap * loss_out * (1.0 + 1e-9) + 1e-300;
    Ok(OutOfSampleRecord {
        n_lambda,
        op_gap,
        loss_in: loss_in_value,
        loss_out,
        gap_ok,
    })
}
