//! Lindblad master equation with the collective jump operator, the population/coherence
//! rate system for `Γ = 1`, `ω_A = ω_B`, and long-time steady states.
//!
//! One-based labels `ρ_ij` refer to `rho[(i-1, j-1)]` in the basis convention of
//! [`crate::model`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::entanglement::{negativity, purity};
use crate::error::{Error, Result};
use crate::linalg::{projector, Operator6, DIM};
use crate::model::{make_initial_state, InitialStateSpec, Model, StateVector, SystemParams};

pub const STEADY_DT: f64 = 0.01;
pub const STEADY_TOLERANCE: f64 = 1e-10;

/// Lindblad generator `−i[H,ρ] + Γ(LρL† − ½{L†L, ρ})`.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    h: Operator6,
    l: Operator6,
    l_dag: Operator6,
    l_dag_l: Operator6,
    rate: f64,
}

impl MasterEquation {
    pub fn new(params: &SystemParams) -> Self {
        let model = Model::new(params);
        let l_dag = model.lindblad.adjoint();
        Self {
            h: model.hamiltonian,
            l_dag_l: l_dag * model.lindblad,
            l: model.lindblad,
            l_dag,
            rate: params.dissipation,
        }
    }

    pub fn rhs(&self, rho: &Operator6) -> Operator6 {
        let mi = Complex64::new(0.0, -1.0);
        let unitary = (self.h * rho - rho * self.h) * mi;
        let jump = self.l * rho * self.l_dag;
        let anti = self.l_dag_l * rho + rho * self.l_dag_l;
        unitary + (jump - anti * Complex64::from(0.5)) * Complex64::from(self.rate)
    }

    fn rk4(&self, rho: &Operator6, dt: f64) -> Operator6 {
        let h = Complex64::from(dt);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + k1 * (h * 0.5)));
        let k3 = self.rhs(&(rho + k2 * (h * 0.5)));
        let k4 = self.rhs(&(rho + k3 * h));
        rho + (k1 + (k2 + k3).scale(2.0) + k4) * (h / 6.0)
    }

    /// One RK4 step followed by Hermitian symmetrization.
    pub fn step(&self, rho: &Operator6, dt: f64) -> Operator6 {
        symmetrize(&self.rk4(rho, dt))
    }

    /// The RK4 one-step map as a 36×36 matrix on row-major `vec(ρ)`.
    pub fn step_superoperator(&self, dt: f64) -> DMatrix<Complex64> {
        let n = DIM * DIM;
        let mut m = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = Operator6::zeros();
            e[(col / DIM, col % DIM)] = Complex64::from(1.0);
            let out = self.rk4(&e, dt);
            for row in 0..n {
                m[(row, col)] = out[(row / DIM, row % DIM)];
            }
        }
        m
    }
}

pub fn symmetrize(rho: &Operator6) -> Operator6 {
    (rho + rho.adjoint()) * Complex64::from(0.5)
}

fn vectorize(rho: &Operator6) -> DVector<Complex64> {
    DVector::from_fn(DIM * DIM, |i, _| rho[(i / DIM, i % DIM)])
}

fn unvectorize(v: &DVector<Complex64>) -> Operator6 {
    Operator6::from_fn(|i, j| v[DIM * i + j])
}

/// One RK4 step of the master equation.
pub fn step_master(rho: &Operator6, params: &SystemParams, dt: f64) -> Operator6 {
    MasterEquation::new(params).step(rho, dt)
}

#[derive(Debug, Clone)]
pub struct MasterTrajectory {
    pub times: Vec<f64>,
    pub rho: Vec<Operator6>,
}

/// Integrates from `rho0` to `params.t_max` on the `params.dt` grid, recording every `stride`.
pub fn integrate_master(params: &SystemParams, rho0: &Operator6, stride: f64) -> Result<MasterTrajectory> {
    params.validate()?;
    let eq = MasterEquation::new(params);
    let every = ((stride / params.dt).round() as usize).max(1);
    let mut rho = *rho0;
    let mut out = MasterTrajectory {
        times: vec![0.0],
        rho: vec![rho],
    };
    for k in 1..=params.n_steps() {
        rho = eq.step(&rho, params.dt);
        if k % every == 0 {
            out.times.push(params.time(k));
            out.rho.push(rho);
        }
    }
    Ok(out)
}

/// The eight variables of the rate system (one-based labels).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateState {
    pub r66: f64,
    pub r55: f64,
    pub r54: Complex64,
    pub r44: f64,
    pub r33: f64,
    pub r32: Complex64,
    pub r22: f64,
    pub r11: f64,
}

impl RateState {
    pub fn from_density(rho: &Operator6) -> Self {
        Self {
            r66: rho[(5, 5)].re,
            r55: rho[(4, 4)].re,
            r54: rho[(4, 3)],
            r44: rho[(3, 3)].re,
            r33: rho[(2, 2)].re,
            r32: rho[(2, 1)],
            r22: rho[(1, 1)].re,
            r11: rho[(0, 0)].re,
        }
    }

    pub fn to_density(&self) -> Operator6 {
        let mut rho = Operator6::zeros();
        rho[(5, 5)] = self.r66.into();
        rho[(4, 4)] = self.r55.into();
        rho[(4, 3)] = self.r54;
        rho[(3, 4)] = self.r54.conj();
        rho[(3, 3)] = self.r44.into();
        rho[(2, 2)] = self.r33.into();
        rho[(2, 1)] = self.r32;
        rho[(1, 2)] = self.r32.conj();
        rho[(1, 1)] = self.r22.into();
        rho[(0, 0)] = self.r11.into();
        rho
    }
}

/// Right-hand side of the rate system (`Γ = 1`, `ω_A = ω_B`).
pub fn rate_equations_rhs(s: &RateState, kappa: f64) -> RateState {
    let k = kappa;
    let k2 = k * k;
    let (r45, r23) = (s.r54.conj(), s.r32.conj());
    let sum54 = (r45 + s.r54).re;
    let sum32 = (r23 + s.r32).re;
    RateState {
        r66: -(1.0 + k2) * s.r66,
        r55: k2 * s.r66 - 0.5 * k * sum54 - s.r55,
        r54: k * s.r66 - 0.5 * k * (s.r44 + s.r55) - (1.0 + 0.5 * k2) * s.r54,
        r44: s.r66 - (1.0 + k2) * s.r44 - 0.5 * k * sum54,
        r33: s.r55 - s.r33 - 0.5 * k * sum32 + k * sum54 + k2 * s.r44,
        r32: s.r54 - (0.5 + 0.5 * k2) * s.r32 - 0.5 * k * (s.r22 + s.r33) + k * s.r44,
        r22: s.r44 - 0.5 * k * sum32 - k2 * s.r22,
        r11: s.r33 + k * sum32 + k2 * s.r22,
    }
}

/// `|ψ(κ)⟩ = (κ|1,0⟩ − |0,1⟩)/√(1+κ²)`.
pub fn protected_state(kappa: f64) -> StateVector {
    make_initial_state(&InitialStateSpec::PsiKappa, kappa)
        .expect("psi-kappa is never zero")
        .state
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub kappa: f64,
    pub rho: Operator6,
    pub rho11_inf: f64,
    /// `2(1−ρ₁₁)κ/(1+κ²)`.
    pub negativity_formula: f64,
    /// Partial-transpose negativity of `rho`.
    pub negativity: f64,
    pub purity: f64,
    /// `‖∂_tρ‖` (Frobenius) at the returned state.
    pub residual: f64,
    pub time: f64,
    /// `max(ρ₆₆, ρ₅₅, |ρ₅₄|, ρ₄₄)`.
    pub excited_max: f64,
    /// `max(|ρ₃₃ + κρ₃₂|, |ρ₂₂ + ρ₃₂/κ|)`; `None` at κ = 0.
    pub relation_defect: Option<f64>,
    /// Frobenius distance to the closest `a|00⟩⟨00| + b|ψ(κ)⟩⟨ψ(κ)|`.
    pub span_distance: f64,
}

/// Scale of the steady-state time budget `T = scale / min(1, κ²)`.
pub const BUDGET_SCALE: f64 = 200.0;

/// Time budget `BUDGET_SCALE / min(1, κ²)`; `BUDGET_SCALE` at κ = 0.
pub fn steady_budget(kappa: f64) -> f64 {
    if kappa == 0.0 {
        BUDGET_SCALE
    } else {
        BUDGET_SCALE / kappa.powi(2).min(1.0)
    }
}

/// Integrates to stationarity with fixed-step RK4 at `dt = 0.01`, advancing by repeated
/// squaring of the one-step map so long budgets stay cheap.
pub fn steady_state(params: &SystemParams, initial: &StateVector) -> Result<SteadyStateResult> {
    let kappa = params.kappa;
    let eq = MasterEquation::new(params);
    let budget_steps = (steady_budget(kappa) / STEADY_DT).ceil() as u64;
    let mut powers = vec![eq.step_superoperator(STEADY_DT)];
    let mut rho = projector(initial.amplitudes());
    let mut done: u64 = 0;
    let residual = |r: &Operator6| eq.rhs(r).norm();

    let apply = |p: &DMatrix<Complex64>, r: &Operator6| symmetrize(&unvectorize(&(p * vectorize(r))));
    let mut res = residual(&rho);
    // grow: 1, 2, 4, ... steps while within budget
    let mut j = 0;
    while res > STEADY_TOLERANCE && done + (1u64 << j) <= budget_steps {
        rho = apply(&powers[j], &rho);
        done += 1u64 << j;
        res = residual(&rho);
        let next = &powers[j] * &powers[j];
        powers.push(next);
        j += 1;
    }
    // spend the rest of the budget greedily with the largest fitting power
    while res > STEADY_TOLERANCE && done < budget_steps {
        let remaining = budget_steps - done;
        let jj = (63 - remaining.leading_zeros() as usize).min(powers.len() - 1);
        rho = apply(&powers[jj], &rho);
        done += 1u64 << jj;
        res = residual(&rho);
    }
    let time = done as f64 * STEADY_DT;
    if res > STEADY_TOLERANCE {
        return Err(Error::NonConvergence {
            kappa,
            t: time,
            residual: res,
        });
    }
    summarize(kappa, rho, res, time)
}

fn summarize(kappa: f64, rho: Operator6, residual: f64, time: f64) -> Result<SteadyStateResult> {
    let s = RateState::from_density(&rho);
    let rho11 = s.r11;
    let relation_defect = (kappa > 0.0).then(|| {
        let a = (Complex64::from(s.r33) + s.r32 * kappa).norm();
        let b = (Complex64::from(s.r22) + s.r32 / kappa).norm();
        a.max(b)
    });
    let psi = protected_state(kappa);
    let pg = {
        let mut g = Operator6::zeros();
        g[(0, 0)] = Complex64::from(1.0);
        g
    };
    let pp = projector(psi.amplitudes());
    let b = psi.amplitudes().dotc(&(rho * psi.amplitudes())).re;
    let span_distance = (rho - pg * Complex64::from(rho11) - pp * Complex64::from(b)).norm();
    Ok(SteadyStateResult {
        kappa,
        rho,
        rho11_inf: rho11,
        negativity_formula: 2.0 * (1.0 - rho11) * kappa / (1.0 + kappa * kappa),
        negativity: negativity(&rho)?,
        purity: purity(&rho),
        residual,
        time,
        excited_max: s.r66.abs().max(s.r55.abs()).max(s.r54.norm()).max(s.r44.abs()),
        relation_defect,
        span_distance,
    })
}

/// Steady states over a κ grid, one independent integration per point (parallel).
pub fn scan_kappa(base: &SystemParams, family: &InitialStateSpec, kappas: &[f64]) -> Result<Vec<SteadyStateResult>> {
    kappas
        .par_iter()
        .map(|&kappa| {
            let params = SystemParams {
                kappa,
                ..base.clone()
            };
            let init = make_initial_state(family, kappa)?;
            steady_state(&params, &init.state)
        })
        .collect()
}

/// `κ = step, 2·step, …, 1`.
pub fn default_kappa_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Interior indices `i` with `v[i-1] < v[i] > v[i+1]`.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::min_eigenvalue;
    use crate::linalg::{c, trace, Amplitudes, ZERO};
    use crate::model::BasisConvention;

    fn base(kappa: f64) -> SystemParams {
        SystemParams {
            kappa,
            dt: 0.01,
            t_max: 5.0,
            ..SystemParams::default()
        }
    }

    fn random_hermitian(seed: u64) -> Operator6 {
        let a = Operator6::from_fn(|i, j| {
            let x = ((i * 7 + j * 13) as f64 + seed as f64).sin();
            let y = ((i * 5 + j * 3) as f64 * 0.7 + seed as f64).cos();
            c(x, y)
        });
        let h = a * a.adjoint();
        h / trace(&h)
    }

    #[test]
    fn ground_state_is_stationary() {
        let eq = MasterEquation::new(&base(0.8));
        let g = projector(StateVector::basis(0).amplitudes());
        assert_eq!(eq.rhs(&g).norm(), 0.0);
    }

    #[test]
    fn protected_state_is_stationary() {
        for kappa in [0.3, 1.0, 0.55] {
            let eq = MasterEquation::new(&base(kappa));
            let rho = projector(protected_state(kappa).amplitudes());
            assert!(eq.rhs(&rho).norm() <= 1e-14);
        }
    }

    #[test]
    fn generator_is_traceless_and_hermitian_preserving() {
        let eq = MasterEquation::new(&base(0.7));
        for seed in 0..5 {
            let d = eq.rhs(&random_hermitian(seed));
            assert!(trace(&d).norm() < 1e-14);
            assert!((d - d.adjoint()).norm() < 1e-14);
        }
    }

    #[test]
    fn step_preserves_trace_and_positivity() {
        let p = base(0.6);
        let eq = MasterEquation::new(&p);
        let mut rho = random_hermitian(3);
        for _ in 0..500 {
            let next = eq.step(&rho, p.dt);
            assert!((trace(&next) - trace(&rho)).norm() < 1e-12);
            rho = next;
            assert!(min_eigenvalue(&rho).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn superoperator_matches_step() {
        let eq = MasterEquation::new(&base(0.4));
        let rho = random_hermitian(9);
        let s = eq.step_superoperator(0.01);
        let via = unvectorize(&(s * vectorize(&rho)));
        assert!((via - eq.rk4(&rho, 0.01)).norm() < 1e-15);
    }

    #[test]
    fn rate_system_examples() {
        let s = RateState {
            r55: 1.0,
            ..Default::default()
        };
        let d = rate_equations_rhs(&s, 1.0);
        assert_eq!(d.r55, -1.0);
        assert_eq!(d.r54, c(-0.5, 0.0));
        assert_eq!(d.r33, 1.0);
        let g = RateState {
            r11: 1.0,
            ..RateState::default()
        };
        assert_eq!(rate_equations_rhs(&g, 0.7), RateState::default());
    }

    #[test]
    fn rate_system_equals_master_equation_on_subspace() {
        for kappa in [0.3, 0.8, 1.0] {
            let eq = MasterEquation::new(&base(kappa));
            let s = RateState {
                r66: 0.11,
                r55: 0.2,
                r54: c(0.07, -0.03),
                r44: 0.15,
                r33: 0.13,
                r32: c(-0.05, 0.02),
                r22: 0.09,
                r11: 0.32,
            };
            let full = RateState::from_density(&eq.rhs(&s.to_density()));
            let rate = rate_equations_rhs(&s, kappa);
            let diffs = [
                full.r66 - rate.r66,
                full.r55 - rate.r55,
                (full.r54 - rate.r54).norm(),
                full.r44 - rate.r44,
                full.r33 - rate.r33,
                (full.r32 - rate.r32).norm(),
                full.r22 - rate.r22,
                full.r11 - rate.r11,
            ];
            for d in diffs {
                assert!(d.abs() < 1e-10, "kappa {kappa}: {diffs:?}");
            }
        }
    }

    #[test]
    fn steady_from_ground_and_protected() {
        let p = base(0.5);
        let g = steady_state(&p, &StateVector::basis(0)).unwrap();
        assert_eq!(g.rho11_inf, 1.0);
        assert_eq!(g.negativity_formula, 0.0);
        let s = steady_state(&p, &protected_state(0.5)).unwrap();
        assert!(s.rho11_inf.abs() < 1e-12);
        assert!((s.negativity_formula - 0.8).abs() < 1e-12);
        assert!((s.negativity - 0.8).abs() < 1e-10);
    }

    #[test]
    fn product_20_fixtures() {
        // frozen from an independent matrix-exponential computation of the same master equation
        let fixtures = [
            (0.25, 0.857398, 0.002622, 0.755466),
            (0.5, 0.555556, 0.104037, 0.506173),
            (0.75, 0.297561, 0.439514, 0.581963),
            (1.0, 0.166667, 0.683170, 0.722222),
        ];
        let init = StateVector::basis(BasisConvention::index(2, 0));
        for (kappa, rho11, neg, pur) in fixtures {
            let r = steady_state(&base(kappa), &init).unwrap();
            assert!((r.rho11_inf - rho11).abs() < 5e-6, "{kappa}: {}", r.rho11_inf);
            assert!((r.negativity - neg).abs() < 5e-6, "{kappa}: {}", r.negativity);
            assert!((r.purity - pur).abs() < 5e-6, "{kappa}: {}", r.purity);
            assert!(r.excited_max <= 1e-8);
            assert!(r.relation_defect.unwrap() <= 1e-6);
            assert!(r.span_distance <= 1e-6);
            assert!((r.purity - (rho11.powi(2) + (1.0 - rho11).powi(2))).abs() < 1e-5);
        }
    }

    #[test]
    fn steady_state_independent_of_frequency() {
        let init = StateVector::basis(BasisConvention::index(2, 0));
        let reference = steady_state(&base(0.6), &init).unwrap();
        for w in [0.0, 2.0] {
            let p = SystemParams {
                omega_a: w,
                omega_b: w,
                ..base(0.6)
            };
            let r = steady_state(&p, &init).unwrap();
            assert!((r.rho11_inf - reference.rho11_inf).abs() < 1e-8);
            assert!((r.rho[(2, 1)].norm() - reference.rho[(2, 1)].norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn kappa_zero_handled_by_direct_integration() {
        let init = StateVector::basis(BasisConvention::index(2, 0));
        let r = steady_state(&base(0.0), &init).unwrap();
        assert!(r.relation_defect.is_none());
        assert!((r.rho11_inf - 1.0).abs() < 1e-9);
        assert_eq!(steady_budget(0.0), BUDGET_SCALE);
        assert_eq!(steady_budget(0.5), 4.0 * BUDGET_SCALE);
    }

    #[test]
    fn integrate_master_records_strides() {
        let p = base(1.0);
        let rho0 = projector(&Amplitudes::from_fn(|i, _| if i == 3 { c(1.0, 0.0) } else { ZERO }));
        let tr = integrate_master(&p, &rho0, 0.5).unwrap();
        assert_eq!(tr.times.len(), 11);
        assert!((tr.times[10] - 5.0).abs() < 1e-12);
        for r in &tr.rho {
            assert!((trace(r) - Complex64::from(1.0)).norm() < 1e-12);
            assert!(crate::linalg::hermiticity_defect(r) < 1e-15);
        }
    }

    #[test]
    fn helpers() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5, 0.2]), Some(1));
        assert_eq!(local_maxima(&[0.0, 1.0, 0.5, 0.7, 0.6]), vec![1, 3]);
        let g = default_kappa_grid(0.01);
        assert_eq!(g.len(), 100);
        assert_eq!(*g.last().unwrap(), 1.0);
    }
}
