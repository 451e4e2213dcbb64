//! Parallel trajectory ensembles reduced to density matrices with batch-means errors.
//!
//! Trajectories are executed in chunks with rayon; results are collected in index order
//! and folded sequentially, so the output is bit-identical for any worker count.

use std::ops::Range;

use rayon::prelude::*;

use crate::coefficients::integrate_f_system;
use crate::entanglement::{negativity, populations, purity};
use crate::error::{Error, Result};
use crate::linalg::{Operator6, DIM};
use crate::model::{StateVector, SystemParams};
use crate::propagator::{Mode, TrajectoryRecord, TrajectoryRunner};

pub const N_BATCHES: usize = 20;
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;
pub const DEFAULT_STRIDE: f64 = 0.05;
const CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub params: SystemParams,
    pub mode: Mode,
    pub initial: StateVector,
    /// Time between recorded samples.
    pub stride: f64,
}

impl EnsembleConfig {
    pub fn new(params: SystemParams, initial: StateVector) -> Self {
        Self {
            params,
            mode: Mode::Nonlinear,
            initial,
            stride: DEFAULT_STRIDE,
        }
    }
}

/// Ensemble-averaged state at the recording strides.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub rho: Vec<Operator6>,
    pub negativity: Vec<f64>,
    /// Batch-means standard error of the negativity (`NaN` with fewer than two batches).
    pub negativity_stderr: Vec<f64>,
    pub population_stderr: Vec<[f64; DIM]>,
    /// Sample mean of `‖ψ‖²`; identically 1 in nonlinear mode.
    pub mean_norm_sq: Vec<f64>,
    pub used: usize,
    pub failed: usize,
    pub mode: Mode,
    /// Largest pre-normalization drift over all used trajectories.
    pub max_drift: f64,
}

#[derive(Debug, Clone)]
struct Accumulator {
    proj: Vec<Operator6>,
    norm_sq: Vec<f64>,
    count: usize,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            proj: vec![Operator6::zeros(); n],
            norm_sq: vec![0.0; n],
            count: 0,
        }
    }

    fn add(&mut self, rec: &TrajectoryRecord) {
        for ((p, w), psi) in self.proj.iter_mut().zip(self.norm_sq.iter_mut()).zip(&rec.states) {
            *p += psi * psi.adjoint();
            *w += psi.norm_squared();
        }
        self.count += 1;
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.proj.iter_mut().zip(&other.proj) {
            *a += b;
        }
        for (a, b) in self.norm_sq.iter_mut().zip(&other.norm_sq) {
            *a += b;
        }
        self.count += other.count;
    }

    fn density(&self, k: usize, mode: Mode) -> Operator6 {
        let w = match mode {
            Mode::Nonlinear => self.count as f64,
            Mode::Linear => self.norm_sq[k],
        };
        self.proj[k].unscale(w)
    }
}

/// Ensemble over trajectory indices `0..n_traj`.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<DensityTrajectory> {
    run_ensemble_range(cfg, 0..cfg.params.n_traj as u64)
}

/// Ensemble over an explicit index range of the master seed's streams.
pub fn run_ensemble_range(cfg: &EnsembleConfig, indices: Range<u64>) -> Result<DensityTrajectory> {
    cfg.params.validate()?;
    let total = (indices.end.saturating_sub(indices.start)) as usize;
    if total == 0 {
        return Err(Error::InvalidParams {
            field: "n_traj",
            constraint: "index range must be non-empty".into(),
        });
    }
    let tables = integrate_f_system(&cfg.params)?;
    let runner = TrajectoryRunner::new(&cfg.params, cfg.mode, tables, cfg.stride)?;
    let times = runner.record_times();
    let n_rec = times.len();

    let mut batches: Vec<Accumulator> = (0..N_BATCHES).map(|_| Accumulator::new(n_rec)).collect();
    let mut failed = 0usize;
    let mut first_failure: Option<String> = None;
    let mut max_drift = 0.0_f64;

    let mut start = indices.start;
    while start < indices.end {
        let end = (start + CHUNK as u64).min(indices.end);
        let results: Vec<Result<TrajectoryRecord>> = (start..end)
            .into_par_iter()
            .map(|i| runner.run(&cfg.initial, i))
            .collect();
        for (offset, res) in results.into_iter().enumerate() {
            let i = start + offset as u64;
            match res {
                Ok(rec) => {
                    let b = ((i - indices.start) as usize * N_BATCHES) / total;
                    batches[b].add(&rec);
                    max_drift = max_drift.max(rec.max_drift);
                }
                Err(e) => {
                    failed += 1;
                    log::warn!("{e}");
                    first_failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        start = end;
    }

    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 || failed == total {
        return Err(Error::FailureRate {
            failed,
            total,
            first: first_failure.unwrap_or_default(),
        });
    }
    if failed > 0 {
        log::info!("{failed} of {total} trajectories excluded");
    }

    let mut all = Accumulator::new(n_rec);
    for b in &batches {
        all.merge(b);
    }
    let filled: Vec<&Accumulator> = batches.iter().filter(|b| b.count > 0).collect();

    let mut out = DensityTrajectory {
        times,
        rho: Vec::with_capacity(n_rec),
        negativity: Vec::with_capacity(n_rec),
        negativity_stderr: Vec::with_capacity(n_rec),
        population_stderr: Vec::with_capacity(n_rec),
        mean_norm_sq: Vec::with_capacity(n_rec),
        used: all.count,
        failed,
        mode: cfg.mode,
        max_drift,
    };
    for k in 0..n_rec {
        let rho = all.density(k, cfg.mode);
        out.negativity.push(negativity(&rho)?);
        out.rho.push(rho);
        out.mean_norm_sq.push(all.norm_sq[k] / all.count as f64);

        let mut negs = Vec::with_capacity(filled.len());
        let mut pops: Vec<[f64; DIM]> = Vec::with_capacity(filled.len());
        for b in &filled {
            let r = b.density(k, cfg.mode);
            negs.push(negativity(&r)?);
            pops.push(populations(&r));
        }
        out.negativity_stderr.push(batch_stderr(&negs));
        out.population_stderr
            .push(std::array::from_fn(|i| batch_stderr(&pops.iter().map(|p| p[i]).collect::<Vec<_>>())));
    }
    Ok(out)
}

/// Standard error of the mean over batch values.
fn batch_stderr(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Negativity,
    Populations,
    Purity,
    Coherences,
}

/// Column-oriented table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Time series of one observable family; the first column is always `t`.
pub fn observable_series(traj: &DensityTrajectory, which: Observable) -> Series {
    let mut header = vec!["t".to_string()];
    match which {
        Observable::Negativity => header.extend(["N".into(), "stderr_N".into()]),
        Observable::Populations => header.extend((1..=DIM).map(|i| format!("rho_{i}{i}"))),
        Observable::Purity => header.push("purity".into()),
        Observable::Coherences => {
            for i in 0..DIM {
                for j in i + 1..DIM {
                    header.push(format!("re_rho_{}{}", i + 1, j + 1));
                    header.push(format!("im_rho_{}{}", i + 1, j + 1));
                }
            }
        }
    }
    let rows = traj
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let rho = &traj.rho[k];
            let mut row = vec![t];
            match which {
                Observable::Negativity => row.extend([traj.negativity[k], traj.negativity_stderr[k]]),
                Observable::Populations => row.extend(populations(rho)),
                Observable::Purity => row.push(purity(rho)),
                Observable::Coherences => {
                    for i in 0..DIM {
                        for j in i + 1..DIM {
                            row.push(rho[(i, j)].re);
                            row.push(rho[(i, j)].im);
                        }
                    }
                }
            }
            row
        })
        .collect();
    Series { header, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{min_eigenvalue, trace_distance};
    use crate::linalg::{hermiticity_defect, projector, trace, Amplitudes};
    use crate::model::{make_initial_state, InitialStateSpec, Model};
    use num_complex::Complex64;

    fn cfg(n_traj: usize, t_max: f64) -> EnsembleConfig {
        let params = SystemParams {
            dt: 1e-2,
            t_max,
            n_traj,
            memory_rate: 0.3,
            seed: 42,
            ..SystemParams::default()
        };
        let bell = make_initial_state(&InitialStateSpec::Bell, 1.0).unwrap().state;
        EnsembleConfig {
            stride: 0.1,
            ..EnsembleConfig::new(params, bell)
        }
    }

    #[test]
    fn bell_initial_density() {
        let out = run_ensemble(&cfg(30, 0.5)).unwrap();
        let r0 = out.rho[0];
        assert!((r0[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((r0[(3, 3)].re - 0.5).abs() < 1e-15);
        assert!((r0[(0, 3)].re - 0.5).abs() < 1e-15);
        assert!((out.negativity[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_closed_trajectory_is_pure() {
        let mut c = cfg(1, 1.0);
        c.params.dissipation = 0.0;
        let out = run_ensemble(&c).unwrap();
        let phases = Model::new(&c.params).free_phases(1.0);
        let exact = Amplitudes::from_fn(|i, _| phases[i] * c.initial.amplitudes()[i]);
        assert!((out.rho.last().unwrap() - projector(&exact)).norm() < 1e-8);
        assert!(out.negativity_stderr[0].is_nan());
    }

    #[test]
    fn density_invariants() {
        let out = run_ensemble(&cfg(400, 3.0)).unwrap();
        for (k, rho) in out.rho.iter().enumerate() {
            assert!((trace(rho) - Complex64::from(1.0)).norm() < 1e-9);
            assert!(hermiticity_defect(rho) < 1e-12);
            let band = out.population_stderr[k].iter().cloned().fold(0.0, f64::max);
            assert!(min_eigenvalue(rho).unwrap() >= -5.0 * band - 1e-12);
        }
        let series = observable_series(&out, Observable::Populations);
        for row in &series.rows {
            assert!((row[1..].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let c = cfg(300, 1.0);
        let run_with = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&c).unwrap())
        };
        assert_eq!(run_with(1), run_with(4));
    }

    #[test]
    fn union_of_ranges_is_weighted_average() {
        let c = cfg(1, 1.0);
        let a = run_ensemble_range(&c, 0..120).unwrap();
        let b = run_ensemble_range(&c, 120..200).unwrap();
        let u = run_ensemble_range(&c, 0..200).unwrap();
        for k in 0..u.rho.len() {
            let w = (a.rho[k] * Complex64::from(a.used as f64) + b.rho[k] * Complex64::from(b.used as f64))
                / Complex64::from((a.used + b.used) as f64);
            assert!((w - u.rho[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn linear_union_is_weighted_by_norm() {
        let mut c = cfg(1, 1.0);
        c.mode = Mode::Linear;
        let a = run_ensemble_range(&c, 0..50).unwrap();
        let b = run_ensemble_range(&c, 50..150).unwrap();
        let u = run_ensemble_range(&c, 0..150).unwrap();
        let last = u.rho.len() - 1;
        let wa = a.mean_norm_sq[last] * a.used as f64;
        let wb = b.mean_norm_sq[last] * b.used as f64;
        let w = (a.rho[last] * Complex64::from(wa) + b.rho[last] * Complex64::from(wb)) / Complex64::from(wa + wb);
        assert!((w - u.rho[last]).norm() < 1e-12);
    }

    #[test]
    fn stderr_scales_inverse_sqrt() {
        let window = |n: usize| {
            let out = run_ensemble(&cfg(n, 2.0)).unwrap();
            let sel: Vec<f64> = out
                .times
                .iter()
                .zip(&out.negativity_stderr)
                .filter(|(t, _)| **t >= 1.0)
                .map(|(_, s)| *s)
                .collect();
            sel.iter().sum::<f64>() / sel.len() as f64
        };
        let (s1, s2, s3) = (window(250), window(1000), window(4000));
        for r in [s1 / s2, s2 / s3] {
            assert!((2.0 / 1.5..=2.0 * 1.5).contains(&r), "ratio {r} ({s1}, {s2}, {s3})");
        }
    }

    #[test]
    fn linear_and_nonlinear_agree_at_short_times() {
        let c = cfg(2000, 0.5);
        let nl = run_ensemble(&c).unwrap();
        let mut cl = c.clone();
        cl.mode = Mode::Linear;
        let lin = run_ensemble(&cl).unwrap();
        for k in 0..nl.rho.len() {
            let d = trace_distance(&nl.rho[k], &lin.rho[k]).unwrap();
            let se_nl = nl.population_stderr[k].iter().map(|s| s * s).sum::<f64>();
            let se_lin = lin.population_stderr[k].iter().map(|s| s * s).sum::<f64>();
            let combined = (se_nl + se_lin).sqrt();
            assert!(d <= 3.0 * combined + 1e-12, "t={}: {d} vs {combined}", nl.times[k]);
        }
    }

    #[test]
    fn empty_range_rejected() {
        assert!(matches!(
            run_ensemble_range(&cfg(1, 0.1), 5..5),
            Err(Error::InvalidParams { .. })
        ));
    }
}
