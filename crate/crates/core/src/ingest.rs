//! Real-data workflow: a CSV dataset, a seeded feature subset, repeated
//! train/test splits, and the penalised least-squares criterion evaluated on
//! held-out data along each regularisation path.
//!
//! No ground truth exists here, so no risk decompositions are produced. With
//! a user-supplied noise variance the deterministic stochastic-risk trace
//! term is emitted for the linear methods; otherwise only the out-of-sample
//! criterion is reported.

use nalgebra::DVector;

use crate::cg::{cg_solve, DEFAULT_CG_REL_TOL};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{
    default_step_size, gradient_descent, linear_filter_multiplier, ridge, FilterSpec,
};
use crate::experiments::Method;
use crate::rng::{StreamPurpose, StreamRng};
use crate::spectral::decompose;
use crate::util::{indexed_map, mean_and_se, Parallelism};

/// Settings of an ingested-data run.
#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub lambda: f64,
    /// When present, the stochastic-risk trace term is emitted for the
    /// linear methods; never estimated from data.
    pub sigma2: Option<f64>,
    pub seed: u64,
    /// Number of train/test splits.
    pub splits: usize,
    /// Fraction of observations in the training part.
    pub train_fraction: f64,
    /// Iteration grid: records at `k = 0..=steps`.
    pub steps: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            lambda: 0.1,
            sigma2: None,
            seed: 1,
            splits: 100,
            train_fraction: 0.7,
            steps: 200,
        }
    }
}

/// One grid point of the held-out criterion path.
#[derive(Debug, Clone)]
pub struct CriterionRecord {
    pub method: Method,
    /// Iteration index; the ridge rows use the penalty matched to the same
    /// index.
    pub param: f64,
    pub criterion_mean: f64,
    pub criterion_se: f64,
    /// Deterministic stochastic-risk trace term (linear methods, first
    /// split's spectrum), present only when a noise variance was supplied.
    pub stochastic_risk: Option<f64>,
}

/// Penalised least-squares criterion of `beta` on held-out data.
fn test_criterion(test: &Dataset, beta: &DVector<f64>, lambda: f64) -> f64 {
    let residual = test.response() - test.design() * beta;
    residual.norm_squared() / (2.0 * test.n() as f64) + 0.5 * lambda * beta.norm_squared()
}

/// Runs the split harness on an already-loaded dataset. A feature subset of
/// size twice the observation count is drawn once; each split re-shuffles
/// the rows.
pub fn criterion_paths(data: &Dataset, config: &IngestConfig) -> Result<Vec<CriterionRecord>> {
    if config.splits == 0 {
        return Err(Error::InvalidInput("need at least one split".into()));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::InvalidInput(
            "train fraction must lie in (0, 1)".into(),
        ));
    }
    let n = data.n();
    let n_train = ((n as f64 * config.train_fraction).round() as usize).clamp(1, n - 1);

    let mut subset_rng = StreamRng::new(config.seed, 0, StreamPurpose::FeatureSubset);
    let subset_size = (2 * n).min(data.p());
    let mut columns = subset_rng.partial_shuffle(data.p(), subset_size);
    columns.sort_unstable();
    let data = data.select_columns(&columns)?;

    struct SplitPaths {
        /// `[k] -> (cg, gd, rr)` criteria; ridge rows start at `k = 1`.
        cells: Vec<(f64, f64, Option<f64>)>,
        /// Stochastic trace terms for (gd, rr) when requested.
        traces: Option<Vec<(f64, Option<f64>)>>,
    }

    let run_split = |split: usize| -> Result<SplitPaths> {
        let mut rng = StreamRng::new(config.seed, split as u64, StreamPurpose::Split);
        let order = rng.partial_shuffle(data.n(), data.n());
        let train = data.select_rows(&order[..n_train])?;
        let test = data.select_rows(&order[n_train..])?;

        let spec = decompose(&train, config.lambda, None)?;
        let eta = default_step_size(&spec);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL)?;
        let gd = gradient_descent(&spec, eta, config.steps)?;

        let mut cells = Vec::with_capacity(config.steps + 1);
        let mut traces = config.sigma2.map(|_| Vec::with_capacity(config.steps + 1));
        for k in 0..=config.steps {
            let cg_iter = &trace.iterates()[k.min(trace.stop_index())];
            let cg_val = test_criterion(&test, &spec.from_coords(cg_iter), config.lambda);
            let gd_val = test_criterion(&test, &spec.from_coords(&gd.iterates[k]), config.lambda);
            let rr_val = if k >= 1 {
                let penalty = config.lambda + 1.0 / (eta * k as f64);
                let est = spec.from_coords(&ridge(&spec, penalty)?);
                Some(test_criterion(&test, &est, config.lambda))
            } else {
                None
            };
            cells.push((cg_val, gd_val, rr_val));

            if let (Some(sigma2), Some(tr)) = (config.sigma2, traces.as_mut()) {
                let rate = sigma2 / train.n() as f64;
                let mut gd_trace = 0.0;
                let mut rr_trace = 0.0;
                for i in 0..spec.p() {
                    if spec.is_null(i) || spec.eigenvalues()[i] <= 0.0 {
                        continue;
                    }
                    let x = spec.penalised_eigenvalue(i);
                    let ratio = spec.eigenvalues()[i] / x;
                    let r_gd = (1.0 - eta * x).powi(k as i32);
                    gd_trace += rate * (1.0 - r_gd) * (1.0 - r_gd) * ratio;
                    if k >= 1 {
                        let filter = FilterSpec::Ridge {
                            lambda_prime: config.lambda + 1.0 / (eta * k as f64),
                        };
                        let r = linear_filter_multiplier(&filter, config.lambda, x, false)?;
                        rr_trace += rate * (1.0 - r) * (1.0 - r) * ratio;
                    }
                }
                tr.push((gd_trace, if k >= 1 { Some(rr_trace) } else { None }));
            }
        }
        Ok(SplitPaths { cells, traces })
    };

    let per_split: Vec<Result<SplitPaths>> =
        indexed_map(Parallelism::default(), config.splits, run_split);
    let mut splits = Vec::with_capacity(config.splits);
    for s in per_split {
        splits.push(s?);
    }

    let mut records = Vec::new();
    let first_traces = splits[0].traces.clone();
    for k in 0..=config.steps {
        let cg: Vec<f64> = splits.iter().map(|s| s.cells[k].0).collect();
        let (m, se) = mean_and_se(&cg);
        records.push(CriterionRecord {
            method: Method::Cg,
            param: k as f64,
            criterion_mean: m,
            criterion_se: se,
            stochastic_risk: None,
        });
    }
    for k in 0..=config.steps {
        let gd: Vec<f64> = splits.iter().map(|s| s.cells[k].1).collect();
        let (m, se) = mean_and_se(&gd);
        records.push(CriterionRecord {
            method: Method::Gd,
            param: k as f64,
            criterion_mean: m,
            criterion_se: se,
            stochastic_risk: first_traces.as_ref().map(|t| t[k].0),
        });
    }
    for k in 1..=config.steps {
        let rr: Vec<f64> = splits.iter().map(|s| s.cells[k].2.unwrap()).collect();
        let (m, se) = mean_and_se(&rr);
        records.push(CriterionRecord {
            method: Method::Rr,
            param: k as f64,
            criterion_mean: m,
            criterion_se: se,
            stochastic_risk: first_traces.as_ref().and_then(|t| t[k].1),
        });
    }
    Ok(records)
}

/// Serialises criterion records as CSV.
pub fn export_criteria<W: std::io::Write + ?Sized>(
    records: &[CriterionRecord],
    metadata: &[String],
    out: &mut W,
) -> Result<()> {
    let mut buf = String::new();
    for line in metadata {
        buf.push_str("# ");
        buf.push_str(line);
        buf.push('\n');
    }
    buf.push_str("method,param,criterion_mean,criterion_se,stochastic_risk\n");
    for r in records {
        let trace = r
            .stochastic_risk
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        buf.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, r.param, r.criterion_mean, r.criterion_se, trace
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<writer>", e))
}
