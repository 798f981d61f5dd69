//! Penalised conjugate gradients: the iterate path, the Lanczos tridiagonal
//! assembled from the recurrence coefficients, the Ritz values (zeros of the
//! residual polynomials), and the interpolated residual-polynomial path with
//! its derivative-at-zero parametrisation and time change.
//!
//! The solver runs in original coordinates, exactly as the recurrence is
//! stated (matrix-vector products with the design matrix); everything
//! downstream works on the stored eigenbasis coordinates. Residual-polynomial
//! zeros come from the tridiagonal eigenvalues rather than monomial
//! root-finding: monomial coefficients overflow and cancel once the iteration
//! count grows, Ritz values stay stable.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::PenalisedSpectrum;

/// Default relative tolerance on the residual norm for stopping.
pub const DEFAULT_CG_REL_TOL: f64 = 1e-13;

/// Relative bracket width for locating the smallest zero of an interpolated
/// residual polynomial.
const BISECTION_REL_TOL: f64 = 1e-12;

/// Completed conjugate-gradient run. Immutable; path evaluations at different
/// times are independent.
#[derive(Debug, Clone)]
pub struct CgTrace {
    lambda: f64,
    /// Iterates in eigenbasis coordinates, indices `0..=stop_index`.
    iterates: Vec<DVector<f64>>,
    /// Step scalars, one per completed iteration.
    step_coefficients: Vec<f64>,
    /// Orthogonalisation scalars, one per completed iteration.
    direction_ratios: Vec<f64>,
    /// Squared residual norms, indices `0..=stop_index`.
    residual_norms_sq: Vec<f64>,
    /// Diagonal of the Lanczos tridiagonal, one entry per iteration.
    lanczos_diagonal: Vec<f64>,
    /// Off-diagonal of the Lanczos tridiagonal.
    lanczos_offdiagonal: Vec<f64>,
    /// `ritz_values[k-1]`: sorted eigenvalues of the order-`k` tridiagonal,
    /// equal to the zeros of the `k`-th residual polynomial.
    ritz_values: Vec<Vec<f64>>,
    /// `slopes[k]`: derivative magnitude of the `k`-th residual polynomial at
    /// zero, the sum of reciprocal zeros; `slopes[0] = 0`.
    slopes: Vec<f64>,
    stop_index: usize,
    p_tilde: usize,
}

impl CgTrace {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn iterates(&self) -> &[DVector<f64>] {
        &self.iterates
    }

    pub fn step_coefficients(&self) -> &[f64] {
        &self.step_coefficients
    }

    pub fn direction_ratios(&self) -> &[f64] {
        &self.direction_ratios
    }

    pub fn residual_norms_sq(&self) -> &[f64] {
        &self.residual_norms_sq
    }

    pub fn lanczos_diagonal(&self) -> &[f64] {
        &self.lanczos_diagonal
    }

    pub fn lanczos_offdiagonal(&self) -> &[f64] {
        &self.lanczos_offdiagonal
    }

    /// Zeros of the `k`-th residual polynomial, ascending, for `k >= 1`.
    pub fn ritz(&self, k: usize) -> &[f64] {
        &self.ritz_values[k - 1]
    }

    pub fn ritz_values(&self) -> &[Vec<f64>] {
        &self.ritz_values
    }

    /// Residual-polynomial derivative magnitudes at zero, indices
    /// `0..=stop_index`, strictly increasing.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn stop_index(&self) -> usize {
        self.stop_index
    }

    pub fn p_tilde(&self) -> usize {
        self.p_tilde
    }
}

/// Runs the penalised CG recurrence until the residual norm falls below
/// `rel_tol` times its initial value or the iteration count reaches the
/// number of distinct penalised eigenvalues. Fills the tridiagonal, Ritz
/// values and slopes for every completed iteration.
pub fn cg_solve(spec: &PenalisedSpectrum, rel_tol: f64) -> Result<CgTrace> {
    if !(rel_tol > 0.0) || !rel_tol.is_finite() {
        return Err(Error::InvalidInput(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    let data = spec.dataset();
    let (x, y) = (data.design(), data.response());
    let n = data.n() as f64;
    let lambda = spec.lambda();
    let p_tilde = spec.p_tilde();

    let mut beta = DVector::<f64>::zeros(data.p());
    let mut q = x.transpose() * y / n;
    let mut d = q.clone();
    let mut e = x * &d;

    let q0_norm2 = q.norm_squared();
    let threshold = rel_tol * rel_tol * q0_norm2;

    let mut iterates = vec![spec.to_coords(&beta)];
    let mut residual_norms_sq = vec![q0_norm2];
    let mut step_coefficients = Vec::new();
    let mut direction_ratios = Vec::new();

    let mut k = 0usize;
    while residual_norms_sq[k] > threshold && k < p_tilde {
        let denom = e.norm_squared() / n + lambda * d.norm_squared();
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::Numerical(format!(
                "step denominator {denom} at iteration {} violates positive definiteness",
                k + 1
            )));
        }
        let a = residual_norms_sq[k] / denom;
        beta += a * &d;
        q -= (a / n) * (x.transpose() * &e) + lambda * a * &d;
        let q_norm2 = q.norm_squared();
        let b = q_norm2 / residual_norms_sq[k];
        d = &q + b * &d;
        e = x * &d;

        step_coefficients.push(a);
        direction_ratios.push(b);
        residual_norms_sq.push(q_norm2);
        iterates.push(spec.to_coords(&beta));
        k += 1;
    }
    let stop_index = k;

    // Lanczos tridiagonal from the recurrence coefficients.
    let mut lanczos_diagonal = Vec::with_capacity(stop_index);
    let mut lanczos_offdiagonal = Vec::with_capacity(stop_index.saturating_sub(1));
    for j in 0..stop_index {
        let carry = if j == 0 {
            0.0
        } else {
            direction_ratios[j - 1] / step_coefficients[j - 1]
        };
        lanczos_diagonal.push(1.0 / step_coefficients[j] + carry);
        if j + 1 < stop_index {
            lanczos_offdiagonal.push(direction_ratios[j].sqrt() / step_coefficients[j]);
        }
    }

    let mut ritz_values = Vec::with_capacity(stop_index);
    let mut slopes = vec![0.0];
    for k in 1..=stop_index {
        let mut t = DMatrix::zeros(k, k);
        for j in 0..k {
            t[(j, j)] = lanczos_diagonal[j];
            if j + 1 < k {
                t[(j, j + 1)] = lanczos_offdiagonal[j];
                t[(j + 1, j)] = lanczos_offdiagonal[j];
            }
        }
        let mut eig: Vec<f64> = t.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if eig[0] <= 0.0 {
            return Err(Error::Numerical(format!(
                "nonpositive Ritz value {} at iteration {k}",
                eig[0]
            )));
        }
        slopes.push(eig.iter().map(|z| 1.0 / z).sum());
        ritz_values.push(eig);
    }

    Ok(CgTrace {
        lambda,
        iterates,
        step_coefficients,
        direction_ratios,
        residual_norms_sq,
        lanczos_diagonal,
        lanczos_offdiagonal,
        ritz_values,
        slopes,
        stop_index,
        p_tilde,
    })
}

/// The interpolated residual polynomial at a (possibly fractional) iteration
/// time, represented through the zeros of its two integer neighbours.
#[derive(Debug, Clone)]
pub struct ResidualPolynomial {
    t: f64,
    degree_floor: usize,
    blend: f64,
    slope_at_zero: f64,
    smallest_zero: f64,
    zeros_low: Vec<f64>,
    zeros_high: Vec<f64>,
}

impl ResidualPolynomial {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Integer part of the iteration time.
    pub fn degree_floor(&self) -> usize {
        self.degree_floor
    }

    /// Fractional interpolation weight on the higher-degree polynomial.
    pub fn blend(&self) -> f64 {
        self.blend
    }

    /// Derivative magnitude at zero: the convex combination of the two
    /// neighbours' sums of reciprocal zeros.
    pub fn slope_at_zero(&self) -> f64 {
        self.slope_at_zero
    }

    /// Smallest zero; `INFINITY` for the constant polynomial at time zero.
    pub fn smallest_zero(&self) -> f64 {
        self.smallest_zero
    }

    /// Evaluates the polynomial through the product form of its neighbours.
    pub fn evaluate(&self, x: f64) -> f64 {
        let low = product_form(&self.zeros_low, x);
        if self.blend == 0.0 {
            low
        } else {
            (1.0 - self.blend) * low + self.blend * product_form(&self.zeros_high, x)
        }
    }
}

fn product_form(zeros: &[f64], x: f64) -> f64 {
    zeros.iter().fold(1.0, |acc, z| acc * (1.0 - x / z))
}

/// Builds the interpolated residual polynomial at iteration time
/// `t` in `[0, stop_index]`.
pub fn residual_polynomial(trace: &CgTrace, t: f64) -> Result<ResidualPolynomial> {
    check_time_range(trace, t)?;
    let k = t.floor() as usize;
    let blend = t - k as f64;
    let slope_at_zero = if blend == 0.0 {
        trace.slopes[k]
    } else {
        (1.0 - blend) * trace.slopes[k] + blend * trace.slopes[k + 1]
    };
    let zeros_low = if k == 0 {
        Vec::new()
    } else {
        trace.ritz(k).to_vec()
    };
    let zeros_high = if blend == 0.0 {
        Vec::new()
    } else {
        trace.ritz(k + 1).to_vec()
    };

    let smallest_zero = if t == 0.0 {
        f64::INFINITY
    } else if blend == 0.0 {
        zeros_low[0]
    } else if k == 0 {
        // (1 - a) + a (1 - x / z) vanishes exactly at z / a.
        zeros_high[0] / blend
    } else {
        bisect_smallest_zero(&zeros_low, &zeros_high, blend)
    };

    Ok(ResidualPolynomial {
        t,
        degree_floor: k,
        blend,
        slope_at_zero,
        smallest_zero,
        zeros_low,
        zeros_high,
    })
}

/// The smallest zero of `(1-a) R_k + a R_{k+1}` lies in the interlacing
/// bracket between the neighbours' smallest zeros, where the combination
/// changes sign.
fn bisect_smallest_zero(zeros_low: &[f64], zeros_high: &[f64], blend: f64) -> f64 {
    let eval =
        |x: f64| (1.0 - blend) * product_form(zeros_low, x) + blend * product_form(zeros_high, x);
    let mut lo = zeros_high[0];
    let mut hi = zeros_low[0];
    if eval(lo) <= 0.0 {
        return lo;
    }
    if eval(hi) >= 0.0 {
        return hi;
    }
    while hi - lo > BISECTION_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if eval(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Linear interpolation of the stored iterates at time `t`.
pub fn interpolated_iterate(trace: &CgTrace, t: f64) -> Result<DVector<f64>> {
    check_time_range(trace, t)?;
    let k = t.floor() as usize;
    let blend = t - k as f64;
    if blend == 0.0 {
        Ok(trace.iterates[k].clone())
    } else {
        Ok((1.0 - blend) * &trace.iterates[k] + blend * &trace.iterates[k + 1])
    }
}

/// The time change: smallest iteration time whose residual-polynomial slope
/// reaches `2 t`, capped at the attained stop index. Exact piecewise-linear
/// inversion of the slope path.
pub fn flow_time_to_iteration(trace: &CgTrace, t: f64) -> f64 {
    let target = 2.0 * t;
    if target <= 0.0 {
        return 0.0;
    }
    let slopes = &trace.slopes;
    let stop = trace.stop_index;
    if target >= slopes[stop] {
        return stop as f64;
    }
    // First knot at or above the target.
    let k = slopes.partition_point(|&r| r < target);
    if slopes[k] == target {
        return k as f64;
    }
    let (lo, hi) = (slopes[k - 1], slopes[k]);
    (k - 1) as f64 + (target - lo) / (hi - lo)
}

fn check_time_range(trace: &CgTrace, t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 || t > trace.stop_index as f64 {
        return Err(Error::InvalidInput(format!(
            "iteration time {t} outside [0, {}]",
            trace.stop_index
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::estimators::ridge;
    use crate::rng::{StreamPurpose, StreamRng};
    use crate::spectral::decompose;

    fn random_spec(n: usize, p: usize, lambda: f64, seed: u64) -> PenalisedSpectrum {
        let mut rng = StreamRng::new(seed, 0, StreamPurpose::Design);
        let x = DMatrix::from_fn(n, p, |_, _| rng.standard_normal());
        let mut noise = StreamRng::new(seed, 0, StreamPurpose::Noise);
        let y = DVector::from_fn(n, |_, _| noise.standard_normal());
        decompose(&Dataset::new(x, y).unwrap(), lambda, None).unwrap()
    }

    #[test]
    fn starts_at_zero() {
        let spec = random_spec(8, 5, 0.2, 1);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        assert_eq!(trace.iterates()[0], DVector::zeros(5));
    }

    #[test]
    fn terminal_iterate_is_the_ridge_estimator() {
        for (n, p, lambda, seed) in [(12, 6, 0.5, 2), (6, 10, 0.3, 3), (9, 9, 0.0, 4)] {
            let spec = random_spec(n, p, lambda, seed);
            let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
            let terminal = trace.iterates().last().unwrap();
            let limit = ridge(&spec, lambda).unwrap();
            assert!(
                (terminal - &limit).norm() <= 1e-8 * limit.norm(),
                "n={n} p={p} lambda={lambda}: gap {}",
                (terminal - &limit).norm() / limit.norm()
            );
        }
    }

    #[test]
    fn iterates_match_polynomial_minimiser_oracle() {
        // Brute force over degree-k polynomials with value one at zero, in
        // monomial coefficients (stable only for small dimensions).
        let spec = random_spec(10, 4, 0.1, 0);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        let p = spec.p();
        let xs: Vec<f64> = (0..p).map(|i| spec.penalised_eigenvalue(i)).collect();
        let yl = spec.y_lambda();
        for k in 1..=trace.stop_index() {
            let design = DMatrix::from_fn(p, k, |i, j| xs[i].powi(j as i32 + 1) * yl[i]);
            let rhs = DVector::from_fn(p, |i, _| -yl[i]);
            let coeffs = design.svd_unordered(true, true).solve(&rhs, 1e-14).unwrap();
            let poly = |x: f64| {
                1.0 + (0..k)
                    .map(|j| coeffs[j] * x.powi(j as i32 + 1))
                    .sum::<f64>()
            };
            let oracle = DVector::from_fn(p, |i, _| {
                if spec.is_null(i) {
                    0.0
                } else {
                    (1.0 - poly(xs[i])) / xs[i].sqrt() * yl[i]
                }
            });
            let gap = (&trace.iterates()[k] - &oracle).norm() / oracle.norm();
            assert!(gap < 1e-8, "k={k}: relative gap {gap}");
        }
    }

    #[test]
    fn residuals_are_mutually_orthogonal() {
        let spec = random_spec(14, 8, 0.4, 5);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        // Residual of iterate k in eigenbasis coordinates.
        let residual = |k: usize| {
            DVector::from_fn(spec.p(), |i, _| {
                let x = spec.penalised_eigenvalue(i);
                x.sqrt() * spec.y_lambda()[i] - x * trace.iterates()[k][i]
            })
        };
        let tol = 1e-8 * trace.residual_norms_sq()[0];
        for j in 0..=trace.stop_index() {
            for k in 0..j {
                let dot = residual(j).dot(&residual(k));
                assert!(dot.abs() <= tol, "<q_{j}, q_{k}> = {dot}");
            }
        }
    }

    #[test]
    fn ritz_values_interlace_strictly() {
        let spec = random_spec(16, 9, 0.2, 6);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        let top = spec.penalised_norm();
        let slack = 64.0 * f64::EPSILON * top;
        for k in 1..=trace.stop_index() {
            let z = trace.ritz(k);
            assert!(
                z[0] > 0.0 && z[k - 1] <= top * (1.0 + 1e-10),
                "range at k={k}"
            );
            if k < trace.stop_index() {
                let znext = trace.ritz(k + 1);
                for i in 0..k {
                    assert!(znext[i] < z[i] + slack, "lower interlacing i={i} k={k}");
                    assert!(z[i] < znext[i + 1] + slack, "upper interlacing i={i} k={k}");
                }
            }
        }
    }

    #[test]
    fn slopes_increase_and_reach_the_distinct_eigenvalue_sum() {
        let spec = random_spec(12, 7, 0.3, 7);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        for k in 1..=trace.stop_index() {
            assert!(trace.slopes()[k] > trace.slopes()[k - 1]);
        }
        // Distinct spectrum with full mass: the final slope is the sum of
        // reciprocal penalised eigenvalues.
        assert_eq!(trace.stop_index(), spec.p_tilde());
        let want: f64 = (0..spec.p())
            .map(|i| 1.0 / spec.penalised_eigenvalue(i))
            .sum();
        let got = trace.slopes()[trace.stop_index()];
        assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn residual_polynomial_time_zero_is_constant_one() {
        let spec = random_spec(8, 4, 0.5, 8);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        let poly = residual_polynomial(&trace, 0.0).unwrap();
        assert_eq!(poly.slope_at_zero(), 0.0);
        assert!(poly.smallest_zero().is_infinite());
        for x in [0.0, 0.5, 3.0] {
            assert_eq!(poly.evaluate(x), 1.0);
        }
    }

    #[test]
    fn integer_time_zeros_are_ritz_values() {
        let spec = random_spec(11, 6, 0.2, 9);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        for k in 1..=trace.stop_index() {
            let poly = residual_polynomial(&trace, k as f64).unwrap();
            assert_eq!(poly.smallest_zero(), trace.ritz(k)[0]);
            for &z in trace.ritz(k) {
                assert!(
                    poly.evaluate(z).abs() <= 1e-9,
                    "R_{k}({z}) = {}",
                    poly.evaluate(z)
                );
            }
            assert_eq!(poly.evaluate(0.0), 1.0);
        }
    }

    #[test]
    fn fractional_time_smallest_zero_lies_in_the_bracket_and_vanishes() {
        let spec = random_spec(13, 7, 0.1, 10);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        for &t in &[0.25, 1.5, 2.75, 3.4, trace.stop_index() as f64 - 0.5] {
            let poly = residual_polynomial(&trace, t).unwrap();
            let k = poly.degree_floor();
            let x1 = poly.smallest_zero();
            if k >= 1 {
                assert!(x1 >= trace.ritz(k + 1)[0] && x1 <= trace.ritz(k)[0]);
            }
            assert!(poly.evaluate(x1).abs() < 1e-9 * poly.slope_at_zero().max(1.0));
        }
    }

    #[test]
    fn slope_matches_numeric_derivative_at_zero() {
        let spec = random_spec(12, 6, 0.3, 11);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        for &t in &[0.5, 1.0, 2.3, trace.stop_index() as f64] {
            let poly = residual_polynomial(&trace, t).unwrap();
            let h = 1e-7 / poly.slope_at_zero().max(1.0);
            let numeric = -(poly.evaluate(h) - poly.evaluate(-h)) / (2.0 * h);
            let rel = (numeric - poly.slope_at_zero()).abs() / poly.slope_at_zero().max(1e-12);
            assert!(rel < 1e-8, "t={t}: {numeric} vs {}", poly.slope_at_zero());
        }
    }

    #[test]
    fn two_sided_slope_bounds_hold_below_the_smallest_zero() {
        let spec = random_spec(15, 8, 0.25, 12);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        let stop = trace.stop_index() as f64;
        for j in 0..50 {
            let t = stop * (j as f64 + 0.5) / 50.0;
            let poly = residual_polynomial(&trace, t).unwrap();
            let rho = poly.slope_at_zero();
            let x1 = poly.smallest_zero();
            for i in 0..100 {
                let x = x1 * i as f64 / 99.0;
                let value = poly.evaluate(x);
                let lower = (1.0 - rho * x).max(0.0);
                let upper = (-rho * x).exp();
                assert!(value >= lower - 1e-9, "t={t} x={x}: {value} < {lower}");
                assert!(value <= upper + 1e-9, "t={t} x={x}: {value} > {upper}");
            }
        }
    }

    #[test]
    fn interpolated_iterates() {
        let spec = random_spec(10, 5, 0.2, 13);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        assert_eq!(
            interpolated_iterate(&trace, 2.0).unwrap(),
            trace.iterates()[2]
        );
        let mid = interpolated_iterate(&trace, 1.5).unwrap();
        let mean = (&trace.iterates()[1] + &trace.iterates()[2]) * 0.5;
        assert!((mid - mean).norm() < 1e-15);
        assert!(interpolated_iterate(&trace, trace.stop_index() as f64 + 0.1).is_err());
        assert!(interpolated_iterate(&trace, -0.1).is_err());
    }

    #[test]
    fn interpolated_iterate_matches_filter_form() {
        let spec = random_spec(12, 6, 0.15, 14);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        for &t in &[0.7, 1.5, 2.2, 3.9] {
            let poly = residual_polynomial(&trace, t).unwrap();
            let direct = interpolated_iterate(&trace, t).unwrap();
            let filtered = DVector::from_fn(spec.p(), |i, _| {
                if spec.is_null(i) {
                    0.0
                } else {
                    let x = spec.penalised_eigenvalue(i);
                    (1.0 - poly.evaluate(x)) / x.sqrt() * spec.y_lambda()[i]
                }
            });
            let gap = (&direct - &filtered).norm() / filtered.norm();
            assert!(gap < 1e-8, "t={t}: relative gap {gap}");
        }
    }

    #[test]
    fn time_change_inverts_the_slope_path() {
        let spec = random_spec(14, 7, 0.3, 15);
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        assert_eq!(flow_time_to_iteration(&trace, 0.0), 0.0);
        // Knots invert exactly.
        for k in 1..=trace.stop_index() {
            let t = trace.slopes()[k] / 2.0;
            assert_eq!(flow_time_to_iteration(&trace, t), k as f64);
        }
        // Round trip on generic times.
        for &t in &[0.01, 0.3, 0.9, 2.4] {
            let tau = flow_time_to_iteration(&trace, t);
            if tau < trace.stop_index() as f64 {
                let rho = residual_polynomial(&trace, tau).unwrap().slope_at_zero();
                assert!((rho - 2.0 * t).abs() <= 1e-10 * (2.0 * t).max(1.0), "t={t}");
            }
        }
        // Beyond the final slope the time change saturates.
        let big = trace.slopes()[trace.stop_index()];
        assert_eq!(
            flow_time_to_iteration(&trace, big),
            trace.stop_index() as f64
        );
    }

    #[test]
    fn zero_response_stops_immediately() {
        let mut rng = StreamRng::new(16, 0, StreamPurpose::Design);
        let x = DMatrix::from_fn(6, 4, |_, _| rng.standard_normal());
        let data = Dataset::new(x, DVector::zeros(6)).unwrap();
        let spec = decompose(&data, 0.5, None).unwrap();
        let trace = cg_solve(&spec, DEFAULT_CG_REL_TOL).unwrap();
        assert_eq!(trace.stop_index(), 0);
    }
}
