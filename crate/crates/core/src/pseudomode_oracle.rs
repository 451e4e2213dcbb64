//! The bath-vacuum amplitude `ψ_t(z = 0)` obeys `∂ψ = (-iH - L†ΣF_jD_j)ψ`. For the OU kernel
//! the same amplitude follows exactly from one damped pseudomode,
//! `H_eff = H ⊗ 1 + √(Γγ/2)(L ⊗ b† + L† ⊗ b) - iγ 1 ⊗ b†b`, projected on the mode vacuum.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::coefficients::{integrate_f_system, CoefficientTables};
use crate::linalg::{Amplitudes, Operator6};
use crate::model::{Model, SystemParams};

const MODE_LEVELS: usize = 4;

fn pseudomode_vacuum_amplitude(model: &Model, p: &SystemParams, psi0: &Amplitudes, t: f64) -> Amplitudes {
    let n = 6 * MODE_LEVELS;
    let g = p.kernel_strength().sqrt();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let idx = |s: usize, m: usize| s * MODE_LEVELS + m;
    for s in 0..6 {
        for sp in 0..6 {
            let hs = model.hamiltonian[(s, sp)];
            let l = model.lindblad[(s, sp)];
            for m in 0..MODE_LEVELS {
                h[(idx(s, m), idx(sp, m))] += hs;
                if m + 1 < MODE_LEVELS {
                    let amp = ((m + 1) as f64).sqrt() * g;
                    // L ⊗ b†
                    h[(idx(s, m + 1), idx(sp, m))] += l * amp;
                    // L† ⊗ b
                    h[(idx(sp, m), idx(s, m + 1))] += l.conj() * amp;
                }
            }
        }
        for m in 0..MODE_LEVELS {
            h[(idx(s, m), idx(s, m))] += Complex64::new(0.0, -p.memory_rate * m as f64);
        }
    }
    let u = (h * Complex64::new(0.0, -t)).exp();
    let mut v0 = nalgebra::DVector::<Complex64>::zeros(n);
    for s in 0..6 {
        v0[idx(s, 0)] = psi0[s];
    }
    let v = u * v0;
    Amplitudes::from_fn(|s, _| v[idx(s, 0)])
}

fn obar_f(model: &Model, f: &[Complex64; 8]) -> Operator6 {
    let mut o = Operator6::zeros();
    for (j, fj) in f.iter().enumerate() {
        o += model.basis[j] * *fj;
    }
    o
}

fn vacuum_from_tables(model: &Model, tables: &CoefficientTables, psi0: &Amplitudes, dt: f64) -> Amplitudes {
    let minus_i_h = model.hamiltonian * Complex64::new(0.0, -1.0);
    let ld = model.lindblad.adjoint();
    let gen = |f: &[Complex64; 8]| minus_i_h - ld * obar_f(model, f);
    let mut psi = *psi0;
    let h = Complex64::from(dt);
    for k in 0..tables.n_steps() {
        let a0 = gen(tables.f(k));
        let am = gen(&tables.midpoint(k).f);
        let a1 = gen(tables.f(k + 1));
        let k1 = a0 * psi;
        let k2 = am * (psi + k1 * (h * 0.5));
        let k3 = am * (psi + k2 * (h * 0.5));
        let k4 = a1 * (psi + k3 * h);
        psi += (k1 + (k2 + k3).scale(2.0) + k4) * (h / 6.0);
    }
    psi
}

fn check(kappa: f64, gamma: f64, omega_b: f64) -> f64 {
    let p = SystemParams {
        kappa,
        memory_rate: gamma,
        omega_b,
        dt: 1e-3,
        t_max: 3.0,
        ..SystemParams::default()
    };
    let model = Model::new(&p);
    let tables = integrate_f_system(&p).unwrap();
    let raw = Amplitudes::from_fn(|i, _| Complex64::new(0.2 + 0.13 * i as f64, 0.3 - 0.07 * (i * i) as f64));
    let psi0 = raw / Complex64::from(raw.norm());
    let exact = pseudomode_vacuum_amplitude(&model, &p, &psi0, p.time(tables.n_steps()));
    let got = vacuum_from_tables(&model, &tables, &psi0, p.dt);
    (exact - got).norm()
}

#[test]
fn vacuum_amplitude_matches_pseudomode() {
    for (kappa, gamma, omega_b) in [(0.5, 0.3, 1.0), (1.0, 0.3, 1.0), (0.5, 3.0, 1.0), (1.0, 3.0, 0.7), (0.0, 0.3, 1.0)] {
        let err = check(kappa, gamma, omega_b);
        eprintln!("kappa={kappa} gamma={gamma} omega_B={omega_b}: |Δψ| = {err:.3e}");
        assert!(err < 1e-9, "kappa={kappa} gamma={gamma}: {err}");
    }
}
