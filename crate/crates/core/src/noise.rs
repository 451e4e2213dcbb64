//! Stationary complex Ornstein-Uhlenbeck noise with `M[z*_t z_s] = (Γγ/2) e^{-γ|t-s|}`
//! and the memory shift used by the norm-preserving equation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::ZERO;
use crate::model::SystemParams;

/// Independent stream for trajectory `index` under a master seed.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Circularly-symmetric complex Gaussian with `M[|ξ|²] = variance`, `M[ξ²] = 0`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// One realization of `z_t` on the grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl NoisePath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact-discretization OU recursion started from the stationary law.
pub fn sample_ou_path<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> NoisePath {
    let n = params.grid_len();
    let variance = params.kernel_strength();
    let decay = (-params.memory_rate * params.dt).exp();
    let kick = 1.0 - decay * decay;
    let mut values = Vec::with_capacity(n);
    let mut z = complex_gaussian(rng, variance);
    values.push(z);
    for _ in 1..n {
        z = z * decay + complex_gaussian(rng, variance * kick);
        values.push(z);
    }
    NoisePath {
        dt: params.dt,
        values,
    }
}

/// Advances `m ≈ ∫₀ᵗ α*(t,s)⟨L†⟩_s ds` by one step: decay, then inject `⟨L†⟩_t`.
pub fn update_shift(memory: Complex64, l_dag_expect: Complex64, params: &SystemParams, dt: f64) -> Complex64 {
    memory * (-params.memory_rate * dt).exp() + l_dag_expect * (params.kernel_strength() * dt)
}

/// Running shift memory of one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ShiftMemory {
    value: Complex64,
    decay: f64,
    weight: f64,
}

impl ShiftMemory {
    pub fn new(params: &SystemParams) -> Self {
        Self {
            value: ZERO,
            decay: (-params.memory_rate * params.dt).exp(),
            weight: params.kernel_strength() * params.dt,
        }
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    /// `z̃ = z + m` at the current grid point.
    pub fn shifted(&self, z: Complex64) -> Complex64 {
        z + self.value
    }

    pub fn advance(&mut self, l_dag_expect: Complex64) {
        self.value = self.value * self.decay + l_dag_expect * self.weight;
    }
}

/// Ensemble estimate at one lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagStatistic {
    pub lag: f64,
    /// Sample mean of `z*_{t+τ} z_t`.
    pub correlation: Complex64,
    /// Joint standard error of the correlation estimate (real and imaginary parts combined).
    pub correlation_stderr: f64,
    /// Sample mean of `z_{t+τ} z_t`, expected 0.
    pub pseudo: Complex64,
    pub pseudo_stderr: f64,
    /// `(Γγ/2) e^{-γτ}`.
    pub target: f64,
}

/// Sample autocorrelation over `n_paths` independent paths.
///
/// Each path contributes one sample per lag: its product averaged over time origins
/// `0, origin_step, ..` up to `t_max - lag`. Samples are independent across paths, so the
/// standard error is the plain sample standard deviation over `√n_paths`.
pub fn noise_statistics(
    params: &SystemParams,
    n_paths: usize,
    lags: &[f64],
    origin_step: f64,
) -> Result<Vec<LagStatistic>> {
    params.validate()?;
    let lag_steps: Vec<usize> = lags.iter().map(|l| (l / params.dt).round() as usize).collect();
    let origin_stride = ((origin_step / params.dt).round() as usize).max(1);
    let n_grid = params.grid_len();

    let mut corr = vec![Vec::with_capacity(n_paths); lags.len()];
    let mut pseudo = vec![Vec::with_capacity(n_paths); lags.len()];
    for path_idx in 0..n_paths {
        let mut rng = trajectory_rng(params.seed, path_idx as u64);
        let path = sample_ou_path(params, &mut rng);
        for (li, &ls) in lag_steps.iter().enumerate() {
            let mut acc_c = ZERO;
            let mut acc_p = ZERO;
            let mut count = 0usize;
            let mut origin = 0;
            while origin + ls < n_grid {
                let a = path.values[origin];
                let b = path.values[origin + ls];
                acc_c += b.conj() * a;
                acc_p += b * a;
                count += 1;
                origin += origin_stride;
            }
            let w = 1.0 / count.max(1) as f64;
            corr[li].push(acc_c * w);
            pseudo[li].push(acc_p * w);
        }
    }

    Ok(lags
        .iter()
        .enumerate()
        .map(|(li, &lag)| {
            let (cm, cs) = mean_and_stderr(&corr[li]);
            let (pm, ps) = mean_and_stderr(&pseudo[li]);
            LagStatistic {
                lag,
                correlation: cm,
                correlation_stderr: cs,
                pseudo: pm,
                pseudo_stderr: ps,
                target: params.correlation(lag),
            }
        })
        .collect())
}

fn mean_and_stderr(samples: &[Complex64]) -> (Complex64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
