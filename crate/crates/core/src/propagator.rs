//! Single-trajectory propagation of the time-local QSD equations.
//!
//! The diagonal free evolution `e^{-iH dt}` is applied exactly; the remaining
//! (noise and memory) part of the generator is integrated with a Heun
//! predictor-corrector in the interaction frame. `z̃` and `Ō` are frozen over a step.

use std::fmt;

use num_complex::Complex64;

use crate::coefficients::{apply_obar, obar_coefficients, CoefficientTables, ZState};
use crate::error::{Error, Result};
use crate::linalg::{Amplitudes, Operator6, DIM};
use crate::model::{Model, StateVector, SystemParams, Truncation};
use crate::noise::{sample_ou_path, trajectory_rng, ShiftMemory};

pub const UNDERFLOW_NORM: f64 = 1e-12;
pub const OVERFLOW_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Norm-preserving equation with shifted noise.
    #[default]
    Nonlinear,
    /// Linear equation, unnormalized states, plain noise.
    Linear,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nonlinear => "nonlinear",
            Mode::Linear => "linear",
        })
    }
}

/// `(Q - ⟨Q⟩) ψ`.
pub fn delta(op: &Operator6, psi: &Amplitudes) -> Amplitudes {
    let q = op * psi;
    let mean = psi.dotc(&q) / psi.norm_squared();
    q - psi * mean
}

/// Frozen per-step inputs of the generator.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub model: &'a Model,
    /// `Ō` as coefficients on `D₁..D₁₂`.
    pub obar: &'a [Complex64; 12],
    /// `z̃_t` (nonlinear) or `z_t` (linear).
    pub noise: Complex64,
    pub phases: &'a [Complex64; DIM],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: Amplitudes,
    /// `|‖ψ‖ - 1|` before renormalization (nonlinear), `0` for linear mode.
    pub drift: f64,
}

#[inline]
fn nonlinear_field(inp: &StepInputs, psi: &Amplitudes) -> Amplitudes {
    let l = inp.model.lindblad_sparse();
    let l_dag = inp.model.lindblad_dag_sparse();
    let n2 = psi.norm_squared();
    let lpsi = l.apply(psi);
    let opsi = apply_obar(inp.model, inp.obar, psi);
    let ldo = l_dag.apply(&opsi);
    let mean_l = psi.dotc(&lpsi) / n2;
    let mean_ldag = mean_l.conj();
    let mean_o = psi.dotc(&opsi) / n2;
    let mean_ldo = lpsi.dotc(&opsi) / n2;
    let z = inp.noise;
    // (L - ⟨L⟩) z̃ ψ - (L†Ō - ⟨L†Ō⟩) ψ + ⟨L†⟩ (Ō - ⟨Ō⟩) ψ
    let scalar = -mean_l * z + mean_ldo - mean_ldag * mean_o;
    lpsi * z - ldo + opsi * mean_ldag + psi * scalar
}

#[inline]
fn linear_field(inp: &StepInputs, psi: &Amplitudes) -> Amplitudes {
    let lpsi = inp.model.lindblad_sparse().apply(psi);
    let opsi = apply_obar(inp.model, inp.obar, psi);
    lpsi * inp.noise - inp.model.lindblad_dag_sparse().apply(&opsi)
}

#[inline]
fn rotate(phases: &[Complex64; DIM], v: &Amplitudes) -> Amplitudes {
    Amplitudes::from_fn(|i, _| phases[i] * v[i])
}

#[inline]
fn lawson_heun(inp: &StepInputs, psi: &Amplitudes, dt: f64, field: impl Fn(&StepInputs, &Amplitudes) -> Amplitudes) -> Amplitudes {
    let k1 = field(inp, psi);
    let pred = rotate(inp.phases, &(psi + k1 * Complex64::from(dt)));
    let k2 = field(inp, &pred);
    rotate(inp.phases, &(psi + k1 * Complex64::from(0.5 * dt))) + k2 * Complex64::from(0.5 * dt)
}

fn finite(v: &Amplitudes) -> bool {
    v.iter().all(|z| z.is_finite())
}

/// One step of the norm-preserving equation, renormalized afterwards.
pub fn step_nonlinear(inp: &StepInputs, psi: &Amplitudes, dt: f64) -> std::result::Result<StepOutcome, &'static str> {
    let next = lawson_heun(inp, psi, dt, nonlinear_field);
    if !finite(&next) {
        return Err("non-finite amplitude");
    }
    let norm = next.norm();
    if norm < UNDERFLOW_NORM {
        return Err("norm underflow");
    }
    Ok(StepOutcome {
        state: next / Complex64::from(norm),
        drift: (norm - 1.0).abs(),
    })
}

/// One step of the linear equation; no renormalization.
pub fn step_linear(inp: &StepInputs, psi: &Amplitudes, dt: f64) -> std::result::Result<StepOutcome, &'static str> {
    let next = lawson_heun(inp, psi, dt, linear_field);
    if !finite(&next) {
        return Err("non-finite amplitude");
    }
    if next.norm() > OVERFLOW_NORM {
        return Err("norm overflow");
    }
    Ok(StepOutcome {
        state: next,
        drift: 0.0,
    })
}

/// Output of one trajectory at the recording strides.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    /// State at each recorded grid point (unit norm in nonlinear mode).
    pub states: Vec<Amplitudes>,
    /// `⟨L†⟩_t` at each recorded grid point.
    pub l_dag: Vec<Complex64>,
    /// Largest per-step pre-normalization norm drift.
    pub max_drift: f64,
}

/// Shared, read-only context for running many trajectories of one parameter set.
#[derive(Debug, Clone)]
pub struct TrajectoryRunner {
    pub params: SystemParams,
    pub mode: Mode,
    pub model: Model,
    pub tables: CoefficientTables,
    /// Grid steps between recorded samples.
    pub stride_steps: usize,
    phases: [Complex64; DIM],
}

impl TrajectoryRunner {
    pub fn new(params: &SystemParams, mode: Mode, tables: CoefficientTables, stride: f64) -> Result<Self> {
        params.validate()?;
        if stride.is_nan() || stride <= 0.0 {
            return Err(Error::InvalidParams {
                field: "stride",
                constraint: format!("must be > 0, got {stride}"),
            });
        }
        let model = Model::new(params);
        Ok(Self {
            phases: model.free_phases(params.dt),
            params: params.clone(),
            mode,
            model,
            tables,
            stride_steps: ((stride / params.dt).round() as usize).max(1),
        })
    }

    /// Grid indices at which states are recorded.
    pub fn record_steps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.params.n_steps()).step_by(self.stride_steps)
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record_steps().map(|k| self.params.time(k)).collect()
    }

    pub fn run(&self, initial: &StateVector, index: u64) -> Result<TrajectoryRecord> {
        let p = &self.params;
        let fail = |k: usize, reason| Error::TrajectoryFailure {
            index,
            t: p.time(k),
            reason,
        };
        let path = sample_ou_path(p, &mut trajectory_rng(p.seed, index));
        let l = self.model.lindblad_sparse();
        let n_records = p.n_steps() / self.stride_steps + 1;
        let mut states = Vec::with_capacity(n_records);
        let mut l_dag = Vec::with_capacity(n_records);
        let mut psi = *initial.amplitudes();
        let mut z = ZState::zero();
        let mut memory = ShiftMemory::new(p);
        let mut max_drift = 0.0_f64;

        for k in 0..=p.n_steps() {
            let ldag_now = (psi.dotc(&l.apply(&psi)) / psi.norm_squared()).conj();
            if k % self.stride_steps == 0 {
                states.push(psi);
                l_dag.push(ldag_now);
            }
            if k == p.n_steps() {
                break;
            }
            let noise = match self.mode {
                Mode::Nonlinear => memory.shifted(path.values[k]),
                Mode::Linear => path.values[k],
            };
            let obar = obar_coefficients(self.tables.f(k), &z, p.order);
            let inp = StepInputs {
                model: &self.model,
                obar: &obar,
                noise,
                phases: &self.phases,
            };
            let out = match self.mode {
                Mode::Nonlinear => step_nonlinear(&inp, &psi, p.dt),
                Mode::Linear => step_linear(&inp, &psi, p.dt),
            }
            .map_err(|r| fail(k + 1, r))?;
            psi = out.state;
            max_drift = max_drift.max(out.drift);
            if p.order == Truncation::FPlusZ {
                z = self.tables.step_z(&z, k, noise);
                if !z.0.iter().all(|v| v.is_finite()) {
                    return Err(fail(k + 1, "non-finite noise functional"));
                }
            }
            if self.mode == Mode::Nonlinear {
                memory.advance(ldag_now);
            }
        }
        Ok(TrajectoryRecord {
            index,
            states,
            l_dag,
            max_drift,
        })
    }
}

/// Runs trajectory `index` for `params` from `initial`, computing the coefficient tables.
pub fn run_trajectory(params: &SystemParams, mode: Mode, initial: &StateVector, stride: f64, index: u64) -> Result<TrajectoryRecord> {
    let tables = crate::coefficients::integrate_f_system(params)?;
    TrajectoryRunner::new(params, mode, tables, stride)?.run(initial, index)
}
