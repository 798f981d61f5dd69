//! Shared numeric helpers: deterministic reductions and the
//! sequential/parallel map used by grid sweeps and Monte Carlo loops.

/// Execution mode for data-parallel sections.
///
/// `Parallel` uses the rayon thread pool when the `parallel` feature is
/// enabled and silently degrades to sequential execution otherwise, so the
/// numerical results never depend on the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

/// Maps `f` over `0..len`, preserving index order in the output.
pub(crate) fn indexed_map<R, F>(mode: Parallelism, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..len).map(f).collect(),
        Parallelism::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..len).map(f).collect()
            }
        }
    }
}

/// Installs a global rayon pool capped at `RIDGEPATH_THREADS` workers.
///
/// No-op when the variable is unset, unparsable, or a pool already exists.
pub fn init_thread_cap_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("RIDGEPATH_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
            }
        }
    }
}

/// Pairwise summation: deterministic and more accurate than a left fold.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Monte Carlo mean and standard error (sample std over sqrt of count).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0, "mean of empty sample");
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Relative gap `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
