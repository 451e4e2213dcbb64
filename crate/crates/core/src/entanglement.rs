//! Negativity, purity and populations of two-site density matrices.

use crate::error::Result;
use crate::linalg::{hermitian_eigenvalues, trace_norm, Operator6, DIM};
use crate::model::{QUBIT_LEVELS, QUTRIT_LEVELS};

pub type DensityMatrix = Operator6;

/// Eigenvalues below `-NEGATIVITY_EPS` count towards the negativity.
pub const NEGATIVITY_EPS: f64 = 1e-12;

/// Transpose over the qubit factor: `(a,b; a',b') → (a,b'; a',b)`.
pub fn partial_transpose_b(rho: &DensityMatrix) -> Operator6 {
    let mut out = Operator6::zeros();
    for a in 0..QUTRIT_LEVELS {
        for ap in 0..QUTRIT_LEVELS {
            for b in 0..QUBIT_LEVELS {
                for bp in 0..QUBIT_LEVELS {
                    out[(2 * a + bp, 2 * ap + b)] = rho[(2 * a + b, 2 * ap + bp)];
                }
            }
        }
    }
    out
}

/// `N(ρ) = ‖ρ^{T_B}‖₁ - 1`, evaluated as twice the summed magnitude of negative eigenvalues.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    let vals = hermitian_eigenvalues(&partial_transpose_b(rho))?;
    let neg: f64 = vals.iter().filter(|&&v| v < -NEGATIVITY_EPS).map(|v| -v).sum();
    Ok((2.0 * neg).max(0.0))
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
    (rho * rho).trace().re
}

pub fn populations(rho: &DensityMatrix) -> [f64; DIM] {
    std::array::from_fn(|i| rho[(i, i)].re)
}

/// `½‖a - b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    Ok(0.5 * trace_norm(&(a - b))?)
}

pub fn min_eigenvalue(rho: &DensityMatrix) -> Result<f64> {
    Ok(hermitian_eigenvalues(rho)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, kron, projector, Amplitudes, ZERO};
    use crate::model::BasisConvention;
    use nalgebra::{Matrix2, Matrix3, SMatrix};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn bell() -> Amplitudes {
        let mut v = Amplitudes::zeros();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        v[BasisConvention::index(0, 0)] = c(s, 0.0);
        v[BasisConvention::index(1, 1)] = c(s, 0.0);
        v
    }

    #[test]
    fn diagonal_state_unchanged() {
        let rho = Operator6::from_diagonal(&Amplitudes::from_fn(|i, _| c(i as f64 / 15.0, 0.0)));
        assert_eq!(partial_transpose_b(&rho), rho);
    }

    #[test]
    fn bell_partial_transpose_spectrum() {
        let pt = partial_transpose_b(&projector(&bell()));
        let vals = hermitian_eigenvalues(&pt).unwrap();
        let expect = [-0.5, 0.0, 0.0, 0.5, 0.5, 0.5];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-14);
        }
        assert!((negativity(&projector(&bell())).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_and_mixed_states_separable() {
        let prod = projector(&Amplitudes::from_fn(|i, _| {
            if i == BasisConvention::index(2, 0) {
                c(1.0, 0.0)
            } else {
                ZERO
            }
        }));
        assert_eq!(negativity(&prod).unwrap(), 0.0);
        let mixed = Operator6::identity().scale(1.0 / 6.0);
        assert_eq!(negativity(&mixed).unwrap(), 0.0);
        assert!((purity(&mixed) - 1.0 / 6.0).abs() < 1e-15);
        assert!((purity(&prod) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_kappa_half_negativity() {
        let k = 0.5;
        let n = (1.0_f64 + k * k).sqrt();
        let mut v = Amplitudes::zeros();
        v[BasisConvention::index(1, 0)] = c(k / n, 0.0);
        v[BasisConvention::index(0, 1)] = c(-1.0 / n, 0.0);
        assert!((negativity(&projector(&v)).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn two_component_mixture_purity() {
        let mut g = Amplitudes::zeros();
        g[0] = c(1.0, 0.0);
        let mut v = Amplitudes::zeros();
        v[2] = c(0.6, 0.0);
        v[1] = c(-0.8, 0.0);
        let rho = projector(&g).scale(0.5) + projector(&v).scale(0.5);
        assert!((purity(&rho) - 0.5).abs() < 1e-15);
        let pops = populations(&rho);
        assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states() {
        let mut a = Amplitudes::zeros();
        a[0] = c(1.0, 0.0);
        let mut b = Amplitudes::zeros();
        b[5] = c(1.0, 0.0);
        assert!((trace_distance(&projector(&a), &projector(&b)).unwrap() - 1.0).abs() < 1e-14);
    }

    fn amplitudes() -> impl Strategy<Value = Amplitudes> {
        prop::array::uniform12(-1.0f64..1.0)
            .prop_filter("nonzero", |x| x.iter().any(|v| v.abs() > 1e-3))
            .prop_map(|x| {
                let v = Amplitudes::from_fn(|i, _| c(x[2 * i], x[2 * i + 1]));
                v / Complex64::from(v.norm())
            })
    }

    fn unitary<const N: usize>(seed: [f64; 32]) -> SMatrix<Complex64, N, N>
    where
        nalgebra::Const<N>: nalgebra::DimMin<nalgebra::Const<N>, Output = nalgebra::Const<N>>,
    {
        let m = SMatrix::<Complex64, N, N>::from_fn(|i, j| c(seed[(i * N + j) % 32], seed[(i * N + j + 11) % 32]));
        m.qr().q()
    }

    fn schmidt_negativity(psi: &Amplitudes) -> f64 {
        let m = SMatrix::<Complex64, 3, 2>::from_fn(|a, b| psi[BasisConvention::index(a, b)]);
        let s = m.singular_values();
        2.0 * s[0] * s[1]
    }

    proptest! {
        #[test]
        fn negativity_bounded_pure(psi in amplitudes()) {
            let n = negativity(&projector(&psi)).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        }

        #[test]
        fn negativity_bounded_mixed(a in amplitudes(), b in amplitudes(), p in 0.0f64..1.0) {
            let rho = projector(&a).scale(p) + projector(&b).scale(1.0 - p);
            let n = negativity(&rho).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        }

        #[test]
        fn schmidt_oracle(psi in amplitudes()) {
            let n = negativity(&projector(&psi)).unwrap();
            prop_assert!((n - schmidt_negativity(&psi)).abs() < 1e-10);
        }

        #[test]
        fn local_unitary_invariance(
            a in amplitudes(),
            b in amplitudes(),
            p in 0.0f64..1.0,
            seed in prop::array::uniform32(-1.0f64..1.0),
        ) {
            let rho = projector(&a).scale(p) + projector(&b).scale(1.0 - p);
            let ua: Matrix3<Complex64> = unitary::<3>(seed);
            let ub: Matrix2<Complex64> = unitary::<2>(seed.map(|x| 0.7 * x - 0.1));
            let u = kron(&ua, &ub);
            let rotated = u * rho * u.adjoint();
            let d = negativity(&rotated).unwrap() - negativity(&rho).unwrap();
            prop_assert!(d.abs() <= 1e-9);
        }

        #[test]
        fn partial_transpose_involution(psi in amplitudes()) {
            let rho = projector(&psi);
            prop_assert_eq!(partial_transpose_b(&partial_transpose_b(&rho)), rho);
        }
    }
}
