//! Simulation configs, seeded data generation, the Monte Carlo path harness,
//! CSV serialisation, and the real-data (ingested CSV) workflow.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::cg::{cg_solve, interpolated_iterate, DEFAULT_CG_REL_TOL};
use crate::comparison::{check_main_bound, ComparisonRecord, RiskMode};
use crate::data::{Dataset, ModelTruth};
use crate::error::{Error, Result};
use crate::estimators::{default_step_size, gradient_descent, FilterSpec};
use crate::risk::{
    cg_bound, decompose_cg, decompose_linear, loss_in, risk_linear, Target, TargetKind,
};
use crate::rng::{StreamPurpose, StreamRng, GENERATOR_NAME};
use crate::spectral::{decompose, PenalisedSpectrum};
use crate::util::{indexed_map, mean_and_se, Parallelism};

/// Population spectrum families for the simulation study.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumGen {
    /// `r` leading eigenvalues at `s_high`, the rest at `s_low`.
    Spiked { r: usize, s_high: f64, s_low: f64 },
    /// `s_i = i^{-alpha}`.
    PolyDecay { alpha: f64 },
    /// `s_i = (1 - i / (p + 1))^beta`.
    BetaProfile { beta: f64 },
    /// Eigenvalues given verbatim (padded with zeros, truncated if longer).
    Explicit(Vec<f64>),
}

impl SpectrumGen {
    /// Population eigenvalues, descending, length `p`.
    pub fn eigenvalues(&self, p: usize) -> Result<Vec<f64>> {
        let values = match self {
            SpectrumGen::Spiked { r, s_high, s_low } => {
                if *r > p {
                    return Err(Error::Config(format!(
                        "spike count {r} exceeds dimension {p}"
                    )));
                }
                let mut v = vec![*s_high; *r];
                v.extend(std::iter::repeat_n(*s_low, p - r));
                v
            }
            SpectrumGen::PolyDecay { alpha } => (1..=p).map(|i| (i as f64).powf(-alpha)).collect(),
            SpectrumGen::BetaProfile { beta } => (1..=p)
                .map(|i| (1.0 - i as f64 / (p as f64 + 1.0)).powf(*beta))
                .collect(),
            SpectrumGen::Explicit(v) => {
                let mut v = v.clone();
                v.truncate(p);
                v.resize(p, 0.0);
                v
            }
        };
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::Config("spectrum values must be non-negative".into()));
        }
        Ok(sorted)
    }
}

/// Law of the true coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Beta0Law {
    /// Centred Gaussian with variance `1/p` per coordinate, drawn once per
    /// experiment from the replicate-0 coefficient stream.
    GaussianIsotropic,
    Fixed(Vec<f64>),
}

/// Full description of a simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub spectrum: SpectrumGen,
    pub sigma2: f64,
    pub lambda: f64,
    pub beta0: Beta0Law,
    pub replicates: usize,
    pub seed: u64,
    /// Rotate the population eigenbasis by a seeded random orthogonal matrix
    /// (default axis-aligned).
    pub rotate: bool,
    /// Iteration grid size for gradient descent (and the aligned flow and
    /// ridge grids).
    pub gd_steps: usize,
    /// Largest CG interpolation knot to record; defaults to `min(n, p)`.
    pub cg_knots: Option<usize>,
    /// Learning rate; defaults to `1 / (2 lambda + s1)` measured on the first
    /// replicate so the grids align across replicates.
    pub eta: Option<f64>,
    /// Free-form label recorded in output metadata.
    pub scale_label: String,
}

impl SimConfig {
    /// Tiny instance for smoke tests.
    pub fn smoke() -> Self {
        SimConfig {
            n: 30,
            p: 5,
            spectrum: SpectrumGen::PolyDecay { alpha: 1.0 },
            sigma2: 0.5,
            lambda: 0.2,
            beta0: Beta0Law::GaussianIsotropic,
            replicates: 2,
            seed: 17,
            rotate: false,
            gd_steps: 120,
            cg_knots: None,
            eta: None,
            scale_label: "smoke".into(),
        }
    }

    /// Desk-scale version of the paper-style spiked design: a fifth of the
    /// full-size dimensions, 100 replicates.
    pub fn desk_scale() -> Self {
        SimConfig {
            n: 100,
            p: 125,
            spectrum: SpectrumGen::Spiked {
                r: 5,
                s_high: 100.0,
                s_low: 1.0,
            },
            sigma2: 6.0,
            lambda: 3.0,
            beta0: Beta0Law::GaussianIsotropic,
            replicates: 100,
            seed: 20260809,
            rotate: false,
            gd_steps: 400,
            cg_knots: None,
            eta: None,
            scale_label: "desk".into(),
        }
    }

    /// Full-scale spiked design (expensive; not exercised by the test suite).
    pub fn full_scale() -> Self {
        SimConfig {
            n: 400,
            p: 500,
            spectrum: SpectrumGen::Spiked {
                r: 20,
                s_high: 100.0,
                s_low: 1.0,
            },
            sigma2: 6.0,
            lambda: 3.0,
            beta0: Beta0Law::GaussianIsotropic,
            replicates: 1000,
            rotate: false,
            seed: 20260809,
            gd_steps: 600,
            cg_knots: None,
            eta: None,
            scale_label: "full".into(),
        }
    }

    /// Parses the flat `key = value` config format. Lines starting with `#`
    /// are comments; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = SimConfig::smoke();
        config.scale_label = "custom".into();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            config.apply_override(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SimConfig::parse(&text)
    }

    /// Applies one `key = value` override.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what}: '{value}'"));
        match key {
            "n" => self.n = value.parse().map_err(|_| bad("n"))?,
            "p" => self.p = value.parse().map_err(|_| bad("p"))?,
            "sigma2" => self.sigma2 = value.parse().map_err(|_| bad("sigma2"))?,
            "lambda" => self.lambda = value.parse().map_err(|_| bad("lambda"))?,
            "replicates" => self.replicates = value.parse().map_err(|_| bad("replicates"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "rotate" => self.rotate = value.parse().map_err(|_| bad("rotate"))?,
            "gd_steps" => self.gd_steps = value.parse().map_err(|_| bad("gd_steps"))?,
            "cg_knots" => {
                self.cg_knots = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("cg_knots"))?)
                }
            }
            "eta" => {
                self.eta = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("eta"))?)
                }
            }
            "scale_label" => self.scale_label = value.to_string(),
            "spectrum" => self.spectrum = parse_spectrum(value)?,
            "beta0" => self.beta0 = parse_beta0(value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("n and p must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::Config("sigma2 must be >= 0".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        if let Beta0Law::Fixed(v) = &self.beta0 {
            if v.len() != self.p {
                return Err(Error::Config(format!(
                    "fixed coefficient vector has length {}, expected {}",
                    v.len(),
                    self.p
                )));
            }
        }
        self.spectrum.eigenvalues(self.p)?;
        Ok(())
    }

    /// Metadata lines (without the leading `#`) recorded in exports.
    pub fn metadata_lines(&self) -> Vec<String> {
        vec![
            format!("seed = {}", self.seed),
            format!("generator = {GENERATOR_NAME}"),
            format!("scale = {}", self.scale_label),
            format!(
                "config = n={} p={} spectrum={} sigma2={} lambda={} beta0={} replicates={} rotate={} gd_steps={}",
                self.n,
                self.p,
                spectrum_str(&self.spectrum),
                self.sigma2,
                self.lambda,
                beta0_str(&self.beta0),
                self.replicates,
                self.rotate,
                self.gd_steps
            ),
        ]
    }
}

fn spectrum_str(s: &SpectrumGen) -> String {
    match s {
        SpectrumGen::Spiked { r, s_high, s_low } => format!("spiked({r},{s_high},{s_low})"),
        SpectrumGen::PolyDecay { alpha } => format!("poly_decay({alpha})"),
        SpectrumGen::BetaProfile { beta } => format!("beta_profile({beta})"),
        SpectrumGen::Explicit(v) => {
            let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("explicit({})", items.join(","))
        }
    }
}

fn beta0_str(b: &Beta0Law) -> String {
    match b {
        Beta0Law::GaussianIsotropic => "gaussian_isotropic".into(),
        Beta0Law::Fixed(v) => {
            let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("fixed({})", items.join(","))
        }
    }
}

fn parse_args(value: &str, name: &str) -> Result<Vec<String>> {
    let inner = value
        .strip_prefix(name)
        .and_then(|rest| rest.trim().strip_prefix('('))
        .and_then(|rest| rest.trim_end().strip_suffix(')'))
        .ok_or_else(|| Error::Config(format!("expected '{name}(...)', got '{value}'")))?;
    Ok(inner.split(',').map(|s| s.trim().to_string()).collect())
}

fn parse_spectrum(value: &str) -> Result<SpectrumGen> {
    let bad = || Error::Config(format!("invalid spectrum '{value}'"));
    if value.starts_with("spiked") {
        let args = parse_args(value, "spiked")?;
        if args.len() != 3 {
            return Err(bad());
        }
        Ok(SpectrumGen::Spiked {
            r: args[0].parse().map_err(|_| bad())?,
            s_high: args[1].parse().map_err(|_| bad())?,
            s_low: args[2].parse().map_err(|_| bad())?,
        })
    } else if value.starts_with("poly_decay") {
        let args = parse_args(value, "poly_decay")?;
        if args.len() != 1 {
            return Err(bad());
        }
        Ok(SpectrumGen::PolyDecay {
            alpha: args[0].parse().map_err(|_| bad())?,
        })
    } else if value.starts_with("beta_profile") {
        let args = parse_args(value, "beta_profile")?;
        if args.len() != 1 {
            return Err(bad());
        }
        Ok(SpectrumGen::BetaProfile {
            beta: args[0].parse().map_err(|_| bad())?,
        })
    } else if value.starts_with("explicit") {
        let args = parse_args(value, "explicit")?;
        let parsed: std::result::Result<Vec<f64>, _> = args.iter().map(|a| a.parse()).collect();
        Ok(SpectrumGen::Explicit(parsed.map_err(|_| bad())?))
    } else {
        Err(bad())
    }
}

fn parse_beta0(value: &str) -> Result<Beta0Law> {
    if value == "gaussian_isotropic" {
        Ok(Beta0Law::GaussianIsotropic)
    } else if value.starts_with("fixed") {
        let args = parse_args(value, "fixed")?;
        let parsed: std::result::Result<Vec<f64>, _> = args.iter().map(|a| a.parse()).collect();
        Ok(Beta0Law::Fixed(parsed.map_err(|_| {
            Error::Config(format!("invalid beta0 '{value}'"))
        })?))
    } else {
        Err(Error::Config(format!("invalid beta0 '{value}'")))
    }
}

/// Draws the coefficient vector. Always taken from the replicate-0 stream so
/// it is frozen across replicates.
fn draw_beta0(config: &SimConfig) -> DVector<f64> {
    match &config.beta0 {
        Beta0Law::GaussianIsotropic => {
            let mut rng = StreamRng::new(config.seed, 0, StreamPurpose::Coefficients);
            let scale = 1.0 / (config.p as f64).sqrt();
            DVector::from_fn(config.p, |_, _| scale * rng.standard_normal())
        }
        Beta0Law::Fixed(v) => DVector::from_vec(v.clone()),
    }
}

/// Population eigenbasis: identity by default, or a seeded random orthogonal
/// matrix (QR of a Gaussian matrix with a sign-fixed diagonal), drawn once
/// per experiment.
fn population_basis(config: &SimConfig) -> Option<DMatrix<f64>> {
    if !config.rotate {
        return None;
    }
    let mut rng = StreamRng::new(config.seed, 0, StreamPurpose::Rotation);
    let g = DMatrix::from_fn(config.p, config.p, |_, _| rng.standard_normal());
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..config.p {
        if r[(j, j)] < 0.0 {
            for i in 0..config.p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Some(q)
}

/// Draws one replicate: design rows are i.i.d. centred Gaussians with the
/// configured covariance, noise is i.i.d. centred Gaussian, and the
/// coefficient vector is the experiment-level draw.
pub fn generate(config: &SimConfig, replicate: usize) -> Result<(Dataset, ModelTruth)> {
    config.validate()?;
    let eigs = self::SpectrumGen::eigenvalues(&config.spectrum, config.p)?;
    let sqrt_eigs: Vec<f64> = eigs.iter().map(|e| e.sqrt()).collect();
    let basis = population_basis(config);

    let mut design_rng = StreamRng::new(config.seed, replicate as u64, StreamPurpose::Design);
    // Row-major draw: observation by observation.
    let mut x = DMatrix::zeros(config.n, config.p);
    for i in 0..config.n {
        for j in 0..config.p {
            x[(i, j)] = sqrt_eigs[j] * design_rng.standard_normal();
        }
    }
    if let Some(q) = &basis {
        x *= q.transpose();
    }

    let beta0 = draw_beta0(config);
    let mut noise_rng = StreamRng::new(config.seed, replicate as u64, StreamPurpose::Noise);
    let sigma = config.sigma2.sqrt();
    let eps = DVector::from_fn(config.n, |_, _| sigma * noise_rng.standard_normal());
    let y = &x * &beta0 + eps;

    let mut sigma_pop = DMatrix::from_diagonal(&DVector::from_vec(eigs));
    if let Some(q) = &basis {
        sigma_pop = q * sigma_pop * q.transpose();
    }
    let truth = ModelTruth::new(beta0, config.sigma2)?.with_population_covariance(sigma_pop)?;
    Ok((Dataset::new(x, y)?, truth))
}

/// Estimation method of a path record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Cg,
    Gd,
    Gf,
    Rr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cg => "CG",
            Method::Gd => "GD",
            Method::Gf => "GF",
            Method::Rr => "RR",
        })
    }
}

impl Method {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "CG" => Ok(Method::Cg),
            "GD" => Ok(Method::Gd),
            "GF" => Ok(Method::Gf),
            "RR" => Ok(Method::Rr),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

/// Loss target of a path record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GammaTag {
    Beta0,
    BetaLambda,
}

impl GammaTag {
    fn kind(self) -> TargetKind {
        match self {
            GammaTag::Beta0 => TargetKind::Beta0,
            GammaTag::BetaLambda => TargetKind::BetaLambda,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "beta0" => Ok(GammaTag::Beta0),
            "beta_lambda" => Ok(GammaTag::BetaLambda),
            other => Err(Error::InvalidInput(format!("unknown target tag '{other}'"))),
        }
    }
}

impl fmt::Display for GammaTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaTag::Beta0 => "beta0",
            GammaTag::BetaLambda => "beta_lambda",
        })
    }
}

/// One aggregated grid point of a regularisation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub method: Method,
    /// Iteration count (CG/GD), flow time (GF) or penalty (RR).
    pub param: f64,
    pub gamma: GammaTag,
    pub a_mean: f64,
    pub s_mean: f64,
    pub c_mean: f64,
    pub total_mean: f64,
    pub total_se: f64,
    /// Pathwise loss bound (CG) or the reparametrised-ridge risk comparison
    /// (GF); absent for methods without a bound.
    pub bound_rhs: Option<f64>,
    /// Whether the bound held on every replicate.
    pub satisfied: Option<bool>,
}

/// Aggregated main-bound check at one flow time.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonSummary {
    pub t: f64,
    pub gamma: GammaTag,
    pub c_mean: f64,
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    /// Whether the bound held pathwise on every replicate.
    pub satisfied: bool,
}

/// Everything a simulation run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<PathRecord>,
    pub comparisons: Vec<ComparisonSummary>,
    /// Learning rate actually used.
    pub eta: f64,
    /// Observed time change on the first replicate: flow time to CG
    /// iteration time, sampled along the admissible grid.
    pub tau_samples: Vec<(f64, f64)>,
}

const GAMMAS: [GammaTag; 2] = [GammaTag::Beta0, GammaTag::BetaLambda];

/// One grid point of a replicate: `(a, s, c, total, bound, bound_ok)`.
type PathCell = (f64, f64, f64, f64, Option<f64>, Option<bool>);

/// One main-bound evaluation: `(c, lhs, rhs, ok)`.
type BoundCell = (f64, f64, f64, bool);

/// Per-replicate loss components on the common grids.
struct ReplicatePaths {
    cells: Vec<Vec<PathCell>>,
    /// `[gamma][grid t index] -> (c, lhs, rhs, ok)`; absent when the time is
    /// below this replicate's own admissibility threshold.
    comparisons: Vec<Vec<Option<BoundCell>>>,
}

/// Grid layout shared by all replicates.
struct Grids {
    /// `(method, param)` in export order.
    points: Vec<(Method, f64)>,
    /// Flow times entering the main-bound check.
    admissible_t: Vec<f64>,
    eta: f64,
}

fn build_grids(config: &SimConfig, first_spec: &PenalisedSpectrum) -> Grids {
    let eta = config.eta.unwrap_or_else(|| default_step_size(first_spec));
    let cg_knots = config.cg_knots.unwrap_or_else(|| config.n.min(config.p));
    let mut points = Vec::new();
    for k in 0..=cg_knots {
        points.push((Method::Cg, k as f64));
    }
    for k in 0..=config.gd_steps {
        points.push((Method::Gd, k as f64));
    }
    for k in 0..=config.gd_steps {
        points.push((Method::Gf, eta * k as f64));
    }
    for k in 1..=config.gd_steps {
        points.push((Method::Rr, config.lambda + 1.0 / (eta * k as f64)));
    }
    let t_min = 0.5 / first_spec.penalised_norm();
    let admissible_t: Vec<f64> = (1..=config.gd_steps)
        .map(|k| eta * k as f64)
        .filter(|&t| t >= t_min)
        .collect();
    Grids {
        points,
        admissible_t,
        eta,
    }
}

fn replicate_paths(config: &SimConfig, grids: &Grids, replicate: usize) -> Result<ReplicatePaths> {
    let (data, truth) = generate(config, replicate)?;
    let spec = decompose(&data, config.lambda, Some(&truth))?;
    let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL)?;
    let gd = gradient_descent(&spec, grids.eta, config.gd_steps)?;
    let stop = trace.stop_index() as f64;

    let mut cells = Vec::with_capacity(GAMMAS.len());
    let mut comparisons = Vec::with_capacity(GAMMAS.len());
    for gamma in GAMMAS {
        let target = Target::resolve(&spec, gamma.kind())?;
        let mut row = Vec::with_capacity(grids.points.len());
        for &(method, param) in &grids.points {
            let cell = match method {
                Method::Cg => {
                    // Knots beyond the attained stop hold the terminal iterate.
                    let t = param.min(stop);
                    let parts = decompose_cg_for_target(&spec, &trace, t, gamma, &target)?;
                    let bound = cg_bound(&spec, &trace, t, &target)?.total;
                    let ok = parts.3 <= bound * (1.0 + 1e-9) + 1e-300;
                    (parts.0, parts.1, parts.2, parts.3, Some(bound), Some(ok))
                }
                Method::Gd => {
                    let est = &gd.iterates[param as usize];
                    let total = loss_in(&spec, est, &target);
                    (f64::NAN, f64::NAN, f64::NAN, total, None, None)
                }
                Method::Gf => {
                    let filter = FilterSpec::GradientFlow { t: param };
                    let parts = decompose_linear(&spec, &filter, &target)?;
                    let risk = risk_linear(&spec, &filter, &target)?;
                    let rr = FilterSpec::Ridge {
                        lambda_prime: config.lambda + 1.0 / param.max(1e-300),
                    };
                    let (bound, ok) = if param > 0.0 {
                        let rhs = 1.2985f64.powi(2) * risk_linear(&spec, &rr, &target)?;
                        (Some(rhs), Some(risk <= rhs * (1.0 + 1e-9)))
                    } else {
                        (None, None)
                    };
                    (
                        parts.approximation,
                        parts.stochastic,
                        parts.cross,
                        parts.total,
                        bound,
                        ok,
                    )
                }
                Method::Rr => {
                    let filter = FilterSpec::Ridge {
                        lambda_prime: param,
                    };
                    let parts = decompose_linear(&spec, &filter, &target)?;
                    (
                        parts.approximation,
                        parts.stochastic,
                        parts.cross,
                        parts.total,
                        None,
                        None,
                    )
                }
            };
            row.push(cell);
        }
        cells.push(row);

        let mut comp = Vec::with_capacity(grids.admissible_t.len());
        for &t in &grids.admissible_t {
            if t < 0.5 / spec.penalised_norm() {
                comp.push(None);
                continue;
            }
            let rec: ComparisonRecord =
                check_main_bound(&spec, &target, t, RiskMode::AnalyticBound)?;
            comp.push(Some((rec.c_t_lambda, rec.lhs, rec.rhs, rec.satisfied)));
        }
        comparisons.push(comp);
    }
    Ok(ReplicatePaths { cells, comparisons })
}

/// CG loss decomposition when the target is the penalised population vector,
/// plain loss otherwise (the truncated-filter decomposition is stated for
/// that target only).
fn decompose_cg_for_target(
    spec: &PenalisedSpectrum,
    trace: &crate::cg::CgTrace,
    t: f64,
    gamma: GammaTag,
    target: &Target,
) -> Result<(f64, f64, f64, f64)> {
    match gamma {
        GammaTag::BetaLambda => {
            let parts = decompose_cg(spec, trace, t)?;
            Ok((
                parts.approximation,
                parts.stochastic,
                parts.cross,
                parts.total,
            ))
        }
        GammaTag::Beta0 => {
            let total = loss_in(spec, &interpolated_iterate(trace, t)?, target);
            Ok((f64::NAN, f64::NAN, f64::NAN, total))
        }
    }
}

/// Runs the full replicate harness with the default execution mode.
pub fn run_paths(config: &SimConfig) -> Result<RunResult> {
    run_paths_with(config, Parallelism::default())
}

/// Runs the replicate harness; replicates execute concurrently under
/// `Parallelism::Parallel`, and aggregation is an ordered deterministic
/// reduction either way.
pub fn run_paths_with(config: &SimConfig, mode: Parallelism) -> Result<RunResult> {
    config.validate()?;
    let (data0, truth0) = generate(config, 0)?;
    let spec0 = decompose(&data0, config.lambda, Some(&truth0))?;
    let grids = build_grids(config, &spec0);

    let per_replicate: Vec<Result<ReplicatePaths>> = indexed_map(mode, config.replicates, |rep| {
        replicate_paths(config, &grids, rep)
    });
    let mut replicates = Vec::with_capacity(config.replicates);
    for r in per_replicate {
        replicates.push(r?);
    }

    let mut records = Vec::new();
    for (g, gamma) in GAMMAS.iter().enumerate() {
        for (idx, &(method, param)) in grids.points.iter().enumerate() {
            let totals: Vec<f64> = replicates.iter().map(|r| r.cells[g][idx].3).collect();
            let (total_mean, total_se) = mean_and_se(&totals);
            let component = |pick: fn(&PathCell) -> f64| {
                let vals: Vec<f64> = replicates.iter().map(|r| pick(&r.cells[g][idx])).collect();
                if vals.iter().any(|v| v.is_nan()) {
                    f64::NAN
                } else {
                    mean_and_se(&vals).0
                }
            };
            let bounds: Vec<Option<f64>> = replicates.iter().map(|r| r.cells[g][idx].4).collect();
            let bound_rhs = if bounds.iter().all(|b| b.is_some()) {
                Some(mean_and_se(&bounds.iter().map(|b| b.unwrap()).collect::<Vec<_>>()).0)
            } else {
                None
            };
            let oks: Vec<Option<bool>> = replicates.iter().map(|r| r.cells[g][idx].5).collect();
            let satisfied = if oks.iter().all(|o| o.is_some()) {
                Some(oks.iter().all(|o| o.unwrap()))
            } else {
                None
            };
            records.push(PathRecord {
                method,
                param,
                gamma: *gamma,
                a_mean: component(|c| c.0),
                s_mean: component(|c| c.1),
                c_mean: component(|c| c.2),
                total_mean,
                total_se,
                bound_rhs,
                satisfied,
            });
        }
    }

    let mut comparisons = Vec::new();
    for (g, gamma) in GAMMAS.iter().enumerate() {
        for (j, &t) in grids.admissible_t.iter().enumerate() {
            let evaluated: Vec<BoundCell> = replicates
                .iter()
                .filter_map(|r| r.comparisons[g][j])
                .collect();
            if evaluated.is_empty() {
                continue;
            }
            let cs: Vec<f64> = evaluated.iter().map(|e| e.0).collect();
            let lhs: Vec<f64> = evaluated.iter().map(|e| e.1).collect();
            let rhs: Vec<f64> = evaluated.iter().map(|e| e.2).collect();
            comparisons.push(ComparisonSummary {
                t,
                gamma: *gamma,
                c_mean: mean_and_se(&cs).0,
                lhs_mean: mean_and_se(&lhs).0,
                rhs_mean: mean_and_se(&rhs).0,
                satisfied: evaluated.iter().all(|e| e.3),
            });
        }
    }
    // Time-change samples from the first replicate's trace.
    let trace0 = cg_solve(&spec0, DEFAULT_CG_REL_TOL)?;
    let tau_samples: Vec<(f64, f64)> = grids
        .admissible_t
        .iter()
        .map(|&t| (t, crate::cg::flow_time_to_iteration(&trace0, t)))
        .collect();

    Ok(RunResult {
        records,
        comparisons,
        eta: grids.eta,
        tau_samples,
    })
}

/// One per-replicate main-bound record.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub replicate: usize,
    pub gamma: GammaTag,
    pub record: ComparisonRecord,
}

/// Per-replicate main-bound checks (analytic mode) over the admissible flow
/// grid.
pub fn run_comparisons(config: &SimConfig, mode: Parallelism) -> Result<Vec<CompareRow>> {
    config.validate()?;
    let (data0, truth0) = generate(config, 0)?;
    let spec0 = decompose(&data0, config.lambda, Some(&truth0))?;
    let grids = build_grids(config, &spec0);

    let per_replicate: Vec<Result<Vec<CompareRow>>> = indexed_map(mode, config.replicates, |rep| {
        let (data, truth) = generate(config, rep)?;
        let spec = decompose(&data, config.lambda, Some(&truth))?;
        let mut rows = Vec::new();
        for gamma in GAMMAS {
            let target = Target::resolve(&spec, gamma.kind())?;
            for &t in &grids.admissible_t {
                if t < 0.5 / spec.penalised_norm() {
                    continue;
                }
                let record = check_main_bound(&spec, &target, t, RiskMode::AnalyticBound)?;
                rows.push(CompareRow {
                    replicate: rep,
                    gamma,
                    record,
                });
            }
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_replicate {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Serialises comparison rows as CSV.
pub fn export_comparisons<W: Write + ?Sized>(
    rows: &[CompareRow],
    metadata: &[String],
    out: &mut W,
) -> Result<()> {
    let mut buf = String::new();
    for line in metadata {
        buf.push_str("# ");
        buf.push_str(line);
        buf.push('\n');
    }
    buf.push_str("replicate,gamma,t,i_t,c_t_lambda,lhs,rhs,satisfied\n");
    for row in rows {
        let i_t = row.record.i_t.map(|i| i.to_string()).unwrap_or_default();
        buf.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.replicate,
            row.gamma,
            row.record.t,
            i_t,
            row.record.c_t_lambda,
            row.record.lhs,
            row.record.rhs,
            row.record.satisfied
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<writer>", e))
}

/// One per-replicate path-oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub replicate: usize,
    pub oracle: crate::comparison::OracleComparison,
}

/// Per-replicate oracle comparisons for the penalised population target.
pub fn run_oracles(config: &SimConfig, mode: Parallelism) -> Result<Vec<OracleRow>> {
    config.validate()?;
    let per_replicate: Vec<Result<OracleRow>> = indexed_map(mode, config.replicates, |rep| {
        let (data, truth) = generate(config, rep)?;
        let spec = decompose(&data, config.lambda, Some(&truth))?;
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL)?;
        let target = Target::resolve(&spec, TargetKind::BetaLambda)?;
        let oracle = crate::comparison::oracle_comparison(&spec, &trace, &target)?;
        Ok(OracleRow {
            replicate: rep,
            oracle,
        })
    });
    per_replicate.into_iter().collect()
}

/// Serialises oracle rows as CSV.
pub fn export_oracles<W: Write + ?Sized>(
    rows: &[OracleRow],
    metadata: &[String],
    out: &mut W,
) -> Result<()> {
    let mut buf = String::new();
    for line in metadata {
        buf.push_str("# ");
        buf.push_str(line);
        buf.push('\n');
    }
    buf.push_str(
        "replicate,cg_oracle,gf_oracle,rr_oracle,c_bar,gf_factor,rr_factor,gf_satisfied,rr_satisfied\n",
    );
    for row in rows {
        let o = &row.oracle;
        buf.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.replicate,
            o.cg_oracle,
            o.gf_oracle,
            o.rr_oracle,
            o.c_bar,
            o.gf_factor,
            o.rr_factor,
            o.gf_satisfied,
            o.rr_satisfied
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<writer>", e))
}

const CSV_HEADER: &str = "method,param,gamma,A,S,C,total_mean,total_se,bound_rhs,satisfied";

fn fmt_opt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes path records as CSV with `#`-prefixed metadata lines. Floats use
/// shortest round-trip decimal formatting, so identical runs produce
/// identical bytes.
pub fn export<W: Write + ?Sized>(
    records: &[PathRecord],
    metadata: &[String],
    out: &mut W,
) -> Result<()> {
    let mut buf = String::new();
    for line in metadata {
        buf.push_str("# ");
        buf.push_str(line);
        buf.push('\n');
    }
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for r in records {
        let bound = r.bound_rhs.map(|b| format!("{b}")).unwrap_or_default();
        let satisfied = r.satisfied.map(|s| s.to_string()).unwrap_or_default();
        buf.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.param,
            r.gamma,
            fmt_opt_f64(r.a_mean),
            fmt_opt_f64(r.s_mean),
            fmt_opt_f64(r.c_mean),
            r.total_mean,
            r.total_se,
            bound,
            satisfied
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<writer>", e))
}

pub fn export_to_path(
    records: &[PathRecord],
    metadata: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    export(records, metadata, &mut file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Reads back an exported CSV (metadata lines are skipped).
pub fn import<R: BufRead>(reader: R) -> Result<Vec<PathRecord>> {
    let mut records = Vec::new();
    let mut saw_header = false;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(Error::InvalidInput(format!(
                    "unexpected CSV header '{line}'"
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::InvalidInput(format!(
                "expected 10 CSV fields, got {}",
                fields.len()
            )));
        }
        let opt_f64 = |s: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse()
                    .map_err(|_| Error::InvalidInput(format!("bad float '{s}'")))
            }
        };
        records.push(PathRecord {
            method: Method::parse(fields[0])?,
            param: fields[1]
                .parse()
                .map_err(|_| Error::InvalidInput("bad param".into()))?,
            gamma: GammaTag::parse(fields[2])?,
            a_mean: opt_f64(fields[3])?,
            s_mean: opt_f64(fields[4])?,
            c_mean: opt_f64(fields[5])?,
            total_mean: opt_f64(fields[6])?,
            total_se: opt_f64(fields[7])?,
            bound_rhs: if fields[8].is_empty() {
                None
            } else {
                Some(opt_f64(fields[8])?)
            },
            satisfied: if fields[9].is_empty() {
                None
            } else {
                Some(
                    fields[9]
                        .parse()
                        .map_err(|_| Error::InvalidInput("bad bool".into()))?,
                )
            },
        });
    }
    if !saw_header {
        return Err(Error::InvalidInput("missing CSV header".into()));
    }
    Ok(records)
}

/// Writes plot data with quadratic-scale x positions (the square root of the
/// iteration parameter), one row per record.
pub fn export_plot_data<W: Write + ?Sized>(records: &[PathRecord], out: &mut W) -> Result<()> {
    let mut buf = String::from("method,gamma,param,x_quad,total_mean\n");
    for r in records {
        buf.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            r.gamma,
            r.param,
            r.param.max(0.0).sqrt(),
            r.total_mean
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<writer>", e))
}
