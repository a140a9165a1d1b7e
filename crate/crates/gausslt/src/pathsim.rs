//! Monte Carlo estimation of the regularized local-time derivative from
//! exact Gaussian path samples (Cholesky on the grid covariance).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::heatkernel::heat_kernel_deriv_raw;
use crate::moments::FieldSpec;
use crate::quad::pairwise_sum;
use crate::{Error, Result};

/// Uniform simulation grid on (0, T]: times i * T / n, i = 1..=n. The path
/// value at time 0 is pinned to 0 and prepended during estimation.
#[derive(Debug, Clone, Copy)]
pub struct PathGrid {
    pub n: usize,
    pub horizon: f64,
}

impl PathGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("grid size must be >= 2".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter("T must be > 0".into()));
        }
        Ok(Self { n, horizon })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 * self.step()).collect()
    }
}

/// Lower Cholesky factor of a grid covariance matrix, with small diagonal
/// jitter escalation when the matrix is numerically semidefinite.
pub struct CovFactor {
    lower: DMatrix<f64>,
}

impl CovFactor {
    pub fn new(model: &crate::covariance::CovarianceModel, grid: &PathGrid) -> Result<Self> {
        let times = grid.times();
        let n = times.len();
        let cov = DMatrix::from_fn(n, n, |i, j| model.cov_raw(times[i], times[j]));
        let max_diag = (0..n).map(|i| cov[(i, i)]).fold(0.0_f64, f64::max);
        let mut jitter = 0.0;
        for attempt in 0..4 {
            let mut m = cov.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            if let Some(chol) = m.cholesky() {
                return Ok(Self {
                    lower: chol.l(),
                });
            }
            jitter = max_diag * 1e-12 * 10f64.powi(attempt);
        }
        let min_eig = cov
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        Err(Error::Factorization { min_eig })
    }

    /// One path sample on the grid times (length n, excludes the pinned 0).
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.lower.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.lower * z).iter().copied().collect()
    }
}

/// Trapezoid estimate of L^{(k)}_eps(T, x) from one pair of path samples.
/// `paths1[c]` / `paths2[c]` hold coordinate c of each process on the grid
/// times (the time-0 value 0 is implicit).
pub fn estimate_l(
    spec: &FieldSpec,
    grid: &PathGrid,
    paths1: &[Vec<f64>],
    paths2: &[Vec<f64>],
) -> Result<f64> {
    if paths1.len() != spec.d || paths2.len() != spec.d {
        return Err(Error::InvalidParameter(format!(
            "expected {} coordinate paths per process, got {} and {}",
            spec.d,
            paths1.len(),
            paths2.len()
        )));
    }
    let n = grid.n;
    if paths1.iter().chain(paths2.iter()).any(|p| p.len() != n) {
        return Err(Error::InvalidParameter(format!(
            "path length must equal grid size {n}"
        )));
    }
    if (grid.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::Precondition(format!(
            "simulation grid horizon {} does not match spec horizon {}",
            grid.horizon, spec.horizon
        )));
    }
    let h = grid.step();
    let orders = spec.k.orders();
    // trapezoid weights over grid indices 0..=n, index 0 being time 0
    let wt = |i: usize| if i == 0 || i == n { 0.5 * h } else { h };
    let at = |paths: &[Vec<f64>], c: usize, i: usize| if i == 0 { 0.0 } else { paths[c][i - 1] };
    let mut z = vec![0.0; spec.d];
    let mut cells = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            for c in 0..spec.d {
                z[c] = at(paths1, c, i) - at(paths2, c, j) - spec.x[c];
            }
            cells.push(wt(i) * wt(j) * heat_kernel_deriv_raw(&z, spec.eps, orders));
        }
    }
    Ok(pairwise_sum(&cells))
}

/// Monte Carlo summary over independent replicates.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
    pub stderr_second_moment: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// True when the discretization step is too coarse to resolve the kernel
/// width: eps below the increment variance of one grid step.
pub fn grid_bias_suspected(spec: &FieldSpec, grid: &PathGrid) -> bool {
    let h_min = spec.model1.hurst().min(spec.model2.hurst());
    spec.eps < grid.step().powf(2.0 * h_min)
}

/// Estimate E[L] and E[L^2] over `replicates` independent paths. Replicate
/// r draws from stream r of a ChaCha12 generator keyed by `seed`, so
/// results are independent of evaluation order.
pub fn mc_moments(
    spec: &FieldSpec,
    grid: &PathGrid,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate> {
    if replicates < 2 {
        return Err(Error::InvalidParameter(
            "replicates must be >= 2".into(),
        ));
    }
    let factor1 = CovFactor::new(&spec.model1, grid)?;
    let factor2 = CovFactor::new(&spec.model2, grid)?;
    let mut values = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let paths1: Vec<Vec<f64>> = (0..spec.d).map(|_| factor1.sample(&mut rng)).collect();
        let paths2: Vec<Vec<f64>> = (0..spec.d).map(|_| factor2.sample(&mut rng)).collect();
        values.push(estimate_l(spec, grid, &paths1, &paths2)?);
    }
    let n = replicates as f64;
    let mean = pairwise_sum(&values) / n;
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    let second_moment = pairwise_sum(&squares) / n;
    let variance = (second_moment - mean * mean).max(0.0);
    let centered: Vec<f64> = squares
        .iter()
        .map(|&q| (q - second_moment) * (q - second_moment))
        .collect();
    let var_of_square = pairwise_sum(&centered) / (n - 1.0);
    Ok(McEstimate {
        mean,
        variance,
        second_moment,
        stderr_second_moment: (var_of_square / n).sqrt(),
        replicates,
        seed,
    })
}
