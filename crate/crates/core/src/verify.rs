//! The identity and inequality suite behind the `verify` subcommand: every
//! exact decomposition, interlacing property and pathwise bound, checked on a
//! configured simulation and reported with the offending module, operation,
//! grid location and magnitudes.

use crate::cg::{cg_solve, interpolated_iterate, residual_polynomial, DEFAULT_CG_REL_TOL};
use crate::comparison::{check_main_bound, out_of_sample_gap, RiskMode};
use crate::error::Result;
use crate::estimators::{gradient_descent, gradient_flow, ridge, FilterSpec};
use crate::experiments::{generate, SimConfig};
use crate::risk::{
    cg_bound, decompose_cg, decompose_linear, loss_in, risk_linear, Target, TargetKind,
};
use crate::rng::{StreamPurpose, StreamRng};
use crate::spectral::decompose;
use crate::util::relative_gap;

/// One failed check.
#[derive(Debug, Clone)]
pub struct Violation {
    pub module: &'static str,
    pub operation: &'static str,
    /// Replicate and grid location of the failure.
    pub location: String,
    pub magnitude: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "module={} op={} at {}: magnitude {:.3e} exceeds tolerance {:.3e}",
            self.module, self.operation, self.location, self.magnitude, self.tolerance
        )
    }
}

struct Suite {
    violations: Vec<Violation>,
}

impl Suite {
    fn check(
        &mut self,
        module: &'static str,
        operation: &'static str,
        location: String,
        magnitude: f64,
        tolerance: f64,
    ) {
        if !(magnitude <= tolerance) {
            self.violations.push(Violation {
                module,
                operation,
                location,
                magnitude,
                tolerance,
            });
        }
    }
}

/// Runs the whole suite over every replicate of the config; an empty result
/// means all checks passed.
pub fn run_suite(config: &SimConfig) -> Result<Vec<Violation>> {
    config.validate()?;
    let mut suite = Suite {
        violations: Vec::new(),
    };

    for rep in 0..config.replicates {
        let (data, truth) = generate(config, rep)?;
        let spec = decompose(&data, config.lambda, Some(&truth))?;
        let at = spec.truth().expect("truth attached");
        let here = |what: &str| format!("replicate {rep}, {what}");

        // Eigenbasis reconstruction and orthonormality.
        let v = spec.eigenvectors();
        let p = spec.p();
        let gram_err = (v.transpose() * v - nalgebra::DMatrix::identity(p, p))
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()));
        suite.check("core_spectral", "decompose", here("V'V"), gram_err, 1e-8);
        let rebuilt = v * nalgebra::DMatrix::from_diagonal(spec.eigenvalues()) * v.transpose();
        let gram = data.design().transpose() * data.design() / data.n() as f64;
        let recon = (rebuilt - gram).iter().fold(0.0f64, |m, e| m.max(e.abs()));
        suite.check(
            "core_spectral",
            "decompose",
            here("reconstruction"),
            recon,
            1e-8 * spec.eigenvalues()[0].max(f64::MIN_POSITIVE),
        );

        // Whitened-response identity.
        let mut ident = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..p {
            let rhs = spec.penalised_eigenvalue(i).sqrt() * at.beta_lambda[i] + at.eps_lambda[i];
            ident = ident.max((spec.y_lambda()[i] - rhs).abs());
            scale = scale.max(rhs.abs());
        }
        suite.check(
            "core_spectral",
            "decompose",
            here("whitened-response identity"),
            ident,
            1e-10 * scale.max(1e-12),
        );

        // CG reaches the ridge estimator.
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL)?;
        let limit = ridge(&spec, config.lambda)?;
        let terminal = &trace.iterates()[trace.stop_index()];
        suite.check(
            "estimators",
            "cg_solve",
            here("terminal iterate"),
            (terminal - &limit).norm(),
            1e-8 * limit.norm().max(1e-12),
        );

        // Ritz interlacing and range.
        let slack = 64.0 * f64::EPSILON * spec.penalised_norm();
        for k in 1..=trace.stop_index() {
            let z = trace.ritz(k);
            suite.check(
                "estimators",
                "cg_solve",
                here(&format!("Ritz range k={k}")),
                z[k - 1] - spec.penalised_norm() * (1.0 + 1e-10),
                0.0,
            );
            if k < trace.stop_index() {
                let znext = trace.ritz(k + 1);
                for i in 0..k {
                    suite.check(
                        "estimators",
                        "cg_solve",
                        here(&format!("interlacing i={i} k={k}")),
                        (znext[i] - z[i]).max(z[i] - znext[i + 1]),
                        slack,
                    );
                }
            }
        }

        // Residual-polynomial envelope on a time grid.
        let stop = trace.stop_index() as f64;
        for j in 0..20 {
            let t = stop * (j as f64 + 0.5) / 20.0;
            let poly = residual_polynomial(&trace, t)?;
            let rho = poly.slope_at_zero();
            let x1 = poly.smallest_zero();
            for i in 0..50 {
                let x = x1 * i as f64 / 49.0;
                let value = poly.evaluate(x);
                let viol = ((1.0 - rho * x).max(0.0) - value).max(value - (-rho * x).exp());
                suite.check(
                    "estimators",
                    "residual_polynomial",
                    here(&format!("envelope t={t:.3} x={x:.4}")),
                    viol,
                    1e-9,
                );
            }
        }

        // Targets used throughout.
        let targets = [
            Target::resolve(&spec, TargetKind::Beta0)?,
            Target::resolve(&spec, TargetKind::BetaLambda)?,
            Target::resolve(&spec, TargetKind::BetaLambdaPrime(config.lambda / 2.0))?,
        ];

        // Standard decomposition identity for both linear families.
        let mut rng = StreamRng::new(config.seed ^ 0x5eed, rep as u64, StreamPurpose::Split);
        for trial in 0..12 {
            let target = &targets[trial % 3];
            let (filter, est) = if trial % 2 == 0 {
                let t = 4.0 * rng.uniform();
                (FilterSpec::GradientFlow { t }, gradient_flow(&spec, t)?)
            } else {
                let lp = 2.0 * (config.lambda + 0.5) * rng.uniform();
                (FilterSpec::Ridge { lambda_prime: lp }, ridge(&spec, lp)?)
            };
            let parts = decompose_linear(&spec, &filter, target)?;
            let direct = loss_in(&spec, &est, target);
            suite.check(
                "risk_analysis",
                "decompose_linear",
                here(&format!("identity trial {trial}")),
                relative_gap(parts.total, direct, 1e-12),
                1e-9,
            );
        }

        // CG decomposition identity, square-root-trick bound, loss bound.
        let base = &targets[1];
        for j in 0..=16 {
            let t = stop * j as f64 / 16.0;
            let parts = decompose_cg(&spec, &trace, t)?;
            let direct = loss_in(&spec, &interpolated_iterate(&trace, t)?, base);
            suite.check(
                "risk_analysis",
                "decompose_cg",
                here(&format!("identity t={t:.3}")),
                relative_gap(parts.total, direct, 1e-12),
                1e-8,
            );
            let nem = parts.approximation_bound.expect("CG bound present");
            suite.check(
                "risk_analysis",
                "decompose_cg",
                here(&format!("approximation bound t={t:.3}")),
                parts.approximation - nem,
                1e-9 * nem.abs().max(1e-12),
            );
            for target in &targets {
                let bound = cg_bound(&spec, &trace, t, target)?;
                let loss = loss_in(&spec, &interpolated_iterate(&trace, t)?, target);
                suite.check(
                    "risk_analysis",
                    "cg_bound",
                    here(&format!("loss bound t={t:.3}")),
                    loss - bound.total,
                    1e-9 * bound.total.max(1e-12),
                );
            }
        }

        // Flow risk dominated by the reparametrised ridge risk.
        let factor = 1.2985f64 * 1.2985;
        for j in 1..=16 {
            let t = 0.02 * 1.6f64.powi(j);
            for target in &targets {
                let flow = risk_linear(&spec, &FilterSpec::GradientFlow { t }, target)?;
                let rr = risk_linear(
                    &spec,
                    &FilterSpec::Ridge {
                        lambda_prime: config.lambda + 1.0 / t,
                    },
                    target,
                )?;
                suite.check(
                    "risk_analysis",
                    "risk_linear",
                    here(&format!("flow-vs-ridge t={t:.3}")),
                    flow - factor * rr,
                    1e-9 * (factor * rr).max(1e-12),
                );
            }
        }

        // Main comparison bound, pathwise in analytic mode.
        let t_min = 0.5 / spec.penalised_norm();
        for j in 0..24 {
            let t = t_min * 1.35f64.powi(j);
            for target in &targets {
                let rec = check_main_bound(&spec, target, t, RiskMode::AnalyticBound)?;
                suite.check(
                    "comparison",
                    "check_main_bound",
                    here(&format!("t={t:.4}")),
                    rec.lhs - rec.rhs,
                    1e-9 * rec.rhs.max(1e-12),
                );
            }
        }

        // Out-of-sample transfer for a few estimators along the paths.
        let gd = gradient_descent(&spec, crate::estimators::default_step_size(&spec), 8)?;
        let candidates = [
            terminal.clone(),
            ridge(&spec, config.lambda + 1.0)?,
            gd.iterates[8].clone(),
        ];
        for (ci, beta_hat) in candidates.iter().enumerate() {
            let rec = out_of_sample_gap(&spec, beta_hat, &targets[0])?;
            suite.check(
                "comparison",
                "out_of_sample_gap",
                here(&format!("estimator {ci}")),
                (rec.loss_out - rec.loss_in).abs(),
                rec.op_gap * rec.loss_out * (1.0 + 1e-9) + 1e-12,
            );
        }

        // Determinism of the generator.
        let (data2, _) = generate(config, rep)?;
        let identical = data.design() == data2.design() && data.response() == data2.response();
        suite.check(
            "experiments",
            "generate",
            here("regeneration"),
            if identical { 0.0 } else { 1.0 },
            0.0,
        );
    }

    Ok(suite.violations)
}
