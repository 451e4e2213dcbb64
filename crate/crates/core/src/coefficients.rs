//! Coefficient functions of the O-operator for the Ornstein-Uhlenbeck kernel.
//!
//! The noise-independent system (`F₁..F₈`, `P̄₉..P̄₁₂`, `P̃₁₃`) is integrated once per
//! parameter set. The noise functionals `Z_j(t) = ∫₀ᵗ P_j(t,s₁) z̃_{s₁} ds₁` obey a driven
//! linear system whose per-step propagator is also trajectory-independent, so it is
//! tabulated alongside.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, Amplitudes, Operator6, ZERO};
use crate::model::{Model, SystemParams, Truncation};

pub const N_F: usize = 8;
pub const N_Z: usize = 4;

type Vec4 = [Complex64; N_Z];
type Mat4 = [[Complex64; N_Z]; N_Z];

/// Whether `P̃₁₃` feeds back into `P̄₉` and `P̄₁₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum P13Coupling {
    #[default]
    Full,
    /// `P̃₁₃ ≡ 0`, matching an expansion truncated after the single-noise terms.
    Dropped,
}

/// One sample of the noise-independent coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coefficients {
    /// `F₁..F₈` in slots 0..8.
    pub f: [Complex64; N_F],
    /// `P̄₉..P̄₁₂` in slots 0..4.
    pub pbar: Vec4,
    pub p13: Complex64,
}

impl Coefficients {
    fn axpy(&self, h: f64, d: &Coefficients) -> Coefficients {
        let mut out = *self;
        for (o, x) in out.f.iter_mut().zip(&d.f) {
            *o += x * h;
        }
        for (o, x) in out.pbar.iter_mut().zip(&d.pbar) {
            *o += x * h;
        }
        out.p13 += d.p13 * h;
        out
    }

    fn is_finite(&self) -> bool {
        self.f.iter().chain(&self.pbar).chain(std::iter::once(&self.p13)).all(|z| z.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.f
            .iter()
            .chain(&self.pbar)
            .chain(std::iter::once(&self.p13))
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Right-hand side of the closed OU coefficient system.
pub fn coefficient_rhs(y: &Coefficients, params: &SystemParams, coupling: P13Coupling) -> Coefficients {
    let k = params.kappa;
    let g = params.memory_rate;
    let wa = params.omega_a;
    let wb = params.omega_b;
    let src = params.kernel_strength();
    let [f1, f2, f3, f4, f5, f6, f7, f8] = y.f;
    let [p9, p10, p11, p12] = y.pbar;
    let p13 = match coupling {
        P13Coupling::Full => y.p13,
        P13Coupling::Dropped => ZERO,
    };
    let lin = |rate: f64, freq: f64| c(-rate, freq);

    let df1 = lin(g, 2.0 * wa - wb) * f1 + f1 * f3 + f1 * f4 - k * f1 * f8 + k * f3 * f4
        - k * f4 * f5
        - k * p10;
    let df2 = src + lin(g, wa) * f2 + f2 * f2 - f1 * f6 - f2 * f3 + k * f2 * f6 - k * f2 * f7
        - k * f4 * f6
        - p9
        - k * p11;
    let df3 = src + lin(g, wa) * f3 + f1 * f7 + f3 * f3 + k * f3 * f7 - k * f3 * f8 - k * f5 * f7
        - k * p12;
    // κF₄F₇: the consistency condition puts κ on this term
    let df4 = src + lin(g, wa) * f4 + f1 * f7 - f1 * f8 + f4 * f4 - f4 * f5 + k * f4 * f7 - p10;
    let df5 = src + lin(g, wa) * f5 + f5 * f5 + k * f5 * f8;
    let df6 = k * src + lin(g, wb) * f6 + f2 * f6 - f2 * f7 - f4 * f6 + k * f6 * f6 - p11;
    let df7 = k * src + lin(g, wb) * f7 + f3 * f7 - f3 * f8 + f4 * f7 - f5 * f7 + k * f7 * f7 - p12;
    let df8 = k * src + lin(g, wb) * f8 + f5 * f8 + k * f8 * f8;

    let dp9 = lin(2.0 * g, 2.0 * wa) * p9 + src * (-k * f1 + f2 - f3) + f1 * p11 + f2 * p9
        - k * f2 * p12
        + f3 * p9
        + k * f3 * p11
        - k * f5 * p11
        + k * f6 * p9
        - k * f6 * p10
        - k * f8 * p9
        - 2.0 * k * p13;
    let dp10 = lin(2.0 * g, 2.0 * wa) * p10 + src * (k * f1 + f4 - f5) + f1 * p12 + f4 * p10
        + k * f4 * p12
        + f5 * p10
        + k * f8 * p10;
    let dp11 = lin(2.0 * g, wa + wb) * p11 + src * (k * f2 - k * f4 + f6 - f7) + f2 * p11
        - f2 * p12
        + f4 * p11
        - f5 * p11
        - f6 * p10
        + k * f6 * p11
        + f7 * p9
        + k * f7 * p11
        - f8 * p9
        - 2.0 * p13;
    let dp12 = lin(2.0 * g, wa + wb) * p12 + src * (k * f3 - k * f5 + f7 - f8) + f3 * p12
        + f5 * p12
        + f7 * p10
        + k * f7 * p12
        + k * f8 * p12;
    // both boundary slots of the symmetric double integral contribute: Γγ/2, not Γγ/4
    let dp13 = match coupling {
        P13Coupling::Full => {
            lin(3.0 * g, 2.0 * wa + wb) * p13
                + src * (k * p9 - k * p10 + p11 - p12)
                + f2 * p13
                + f5 * p13
                + k * f6 * p13
                + p9 * p12
                + k * f8 * p13
                + p10 * p11
                + k * p11 * p12
        }
        P13Coupling::Dropped => ZERO,
    };

    Coefficients {
        f: [df1, df2, df3, df4, df5, df6, df7, df8],
        pbar: [dp9, dp10, dp11, dp12],
        p13: dp13,
    }
}

fn rk4_coefficients(y: &Coefficients, h: f64, params: &SystemParams, coupling: P13Coupling) -> Coefficients {
    let k1 = coefficient_rhs(y, params, coupling);
    let k2 = coefficient_rhs(&y.axpy(0.5 * h, &k1), params, coupling);
    let k3 = coefficient_rhs(&y.axpy(0.5 * h, &k2), params, coupling);
    let k4 = coefficient_rhs(&y.axpy(h, &k3), params, coupling);
    y.axpy(h / 6.0, &k1)
        .axpy(h / 3.0, &k2)
        .axpy(h / 3.0, &k3)
        .axpy(h / 6.0, &k4)
}

/// `P_j(t,t)` for `j = 9..12` from the `F` values at `t`.
pub fn boundary_source(f: &[Complex64; N_F], kappa: f64) -> Vec4 {
    let [f1, f2, f3, f4, f5, f6, f7, f8] = *f;
    [
        -kappa * f1 + f2 - f3,
        kappa * f1 + f4 - f5,
        kappa * f2 - kappa * f4 + f6 - f7,
        kappa * f3 - kappa * f5 + f7 - f8,
    ]
}

/// Generator of `∂_t P_j(t,s₁)` (and of the homogeneous part of `dZ/dt`).
pub fn noise_matrix(f: &[Complex64; N_F], params: &SystemParams) -> Mat4 {
    let k = params.kappa;
    let g = params.memory_rate;
    let [f1, f2, f3, f4, f5, f6, f7, f8] = *f;
    let wa = params.omega_a;
    let wab = params.omega_a + params.omega_b;
    [
        // Z9
        [
            c(-g, 2.0 * wa) + f2 + f3 + k * f6 - k * f8,
            -k * f6,
            f1 + k * f3 - k * f5,
            -k * f2,
        ],
        // Z10
        [ZERO, c(-g, 2.0 * wa) + f4 + f5 + k * f8, ZERO, f1 + k * f4],
        // Z11
        [
            f7 - f8,
            -f6,
            c(-g, wab) + f2 + f4 - f5 + k * f6 + k * f7,
            -f2,
        ],
        // Z12
        [ZERO, f7, ZERO, c(-g, wab) + f3 + f5 + k * f7 + k * f8],
    ]
}

fn mat_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [ZERO; N_Z];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

fn add_scaled(a: &Vec4, h: f64, b: &Vec4) -> Vec4 {
    let mut out = *a;
    for (o, x) in out.iter_mut().zip(b) {
        *o += x * h;
    }
    out
}

/// One RK4 step of `y' = A(t) y + b(t) u` with `u` held over the step.
#[allow(clippy::too_many_arguments)]
fn rk4_driven(y: &Vec4, u: Complex64, a: [&Mat4; 3], b: [&Vec4; 3], h: f64) -> Vec4 {
    let drive = |i: usize| -> Vec4 { b[i].map(|x| x * u) };
    let f = |i: usize, y: &Vec4| -> Vec4 {
        let mut r = mat_vec(a[i], y);
        for (o, d) in r.iter_mut().zip(drive(i)) {
            *o += d;
        }
        r
    };
    let k1 = f(0, y);
    let k2 = f(1, &add_scaled(y, 0.5 * h, &k1));
    let k3 = f(1, &add_scaled(y, 0.5 * h, &k2));
    let k4 = f(2, &add_scaled(y, h, &k3));
    let mut out = *y;
    for i in 0..N_Z {
        out[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
    }
    out
}

/// Noise-integral state `Z₉..Z₁₂` of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZState(pub Vec4);

impl ZState {
    pub fn zero() -> Self {
        Self([ZERO; N_Z])
    }
}

/// Tabulated coefficient system on the half-step grid `t = j·dt/2`.
#[derive(Debug, Clone)]
pub struct CoefficientTables {
    pub dt: f64,
    pub coupling: P13Coupling,
    samples: Vec<Coefficients>,
    /// RK4 propagator of the homogeneous noise system over step `k → k+1`.
    z_prop: Vec<Mat4>,
    /// Response of the noise system over step `k → k+1` to a unit held drive.
    z_drive: Vec<Vec4>,
}

impl CoefficientTables {
    /// Integrates the joint 13-component system from zero initial data with RK4 at `dt/2`.
    pub fn integrate(params: &SystemParams, coupling: P13Coupling) -> Result<Self> {
        params.validate()?;
        let n = params.n_steps();
        let h = 0.5 * params.dt;
        let mut samples = Vec::with_capacity(2 * n + 1);
        let mut y = Coefficients::default();
        samples.push(y);
        for j in 0..2 * n {
            y = rk4_coefficients(&y, h, params, coupling);
            if !y.is_finite() {
                return Err(Error::CoefficientBlowUp {
                    t: (j + 1) as f64 * h,
                });
            }
            samples.push(y);
        }

        let mut tables = Self {
            dt: params.dt,
            coupling,
            samples,
            z_prop: Vec::with_capacity(n),
            z_drive: Vec::with_capacity(n),
        };
        for k in 0..n {
            let a = [0, 1, 2].map(|o| noise_matrix(&tables.samples[2 * k + o].f, params));
            let b = [0, 1, 2].map(|o| boundary_source(&tables.samples[2 * k + o].f, params.kappa));
            let mut prop = [[ZERO; N_Z]; N_Z];
            for col in 0..N_Z {
                let mut e = [ZERO; N_Z];
                e[col] = c(1.0, 0.0);
                let out = rk4_driven(&e, ZERO, [&a[0], &a[1], &a[2]], [&b[0], &b[1], &b[2]], params.dt);
                for row in 0..N_Z {
                    prop[row][col] = out[row];
                }
            }
            let drive = rk4_driven(
                &[ZERO; N_Z],
                c(1.0, 0.0),
                [&a[0], &a[1], &a[2]],
                [&b[0], &b[1], &b[2]],
                params.dt,
            );
            tables.z_prop.push(prop);
            tables.z_drive.push(drive);
        }
        Ok(tables)
    }

    /// Number of grid steps.
    pub fn n_steps(&self) -> usize {
        (self.samples.len() - 1) / 2
    }

    /// Coefficients at grid point `t_k`.
    pub fn at(&self, k: usize) -> &Coefficients {
        &self.samples[2 * k]
    }

    /// Coefficients at `t_k + dt/2`.
    pub fn midpoint(&self, k: usize) -> &Coefficients {
        &self.samples[2 * k + 1]
    }

    pub fn f(&self, k: usize) -> &[Complex64; N_F] {
        &self.at(k).f
    }

    /// `F_j` on the grid (`j` one-based, 1..=8).
    pub fn f_series(&self, j: usize) -> Vec<Complex64> {
        (0..=self.n_steps()).map(|k| self.at(k).f[j - 1]).collect()
    }

    /// `P̄_j` on the grid (`j` one-based, 9..=12).
    pub fn pbar_series(&self, j: usize) -> Vec<Complex64> {
        (0..=self.n_steps()).map(|k| self.at(k).pbar[j - 9]).collect()
    }

    pub fn p13_series(&self) -> Vec<Complex64> {
        (0..=self.n_steps()).map(|k| self.at(k).p13).collect()
    }

    /// Advances `Z` over step `k → k+1` with the drive held at `drive`.
    #[inline]
    pub fn step_z(&self, z: &ZState, k: usize, drive: Complex64) -> ZState {
        let mut out = mat_vec(&self.z_prop[k], &z.0);
        for (o, d) in out.iter_mut().zip(&self.z_drive[k]) {
            *o += d * drive;
        }
        ZState(out)
    }

    /// Homogeneous propagation of a `P(·, s₁)` column over step `k → k+1`.
    #[inline]
    fn step_column(&self, col: &Vec4, k: usize) -> Vec4 {
        mat_vec(&self.z_prop[k], col)
    }
}

/// Noise-independent coefficient tables with full `P̃₁₃` feedback into the `P̄` equations.
pub fn integrate_f_system(params: &SystemParams) -> Result<CoefficientTables> {
    CoefficientTables::integrate(params, P13Coupling::Full)
}

/// Direct RK4 advance of `Z` using `F` at `t_k`, `t_k + dt/2`, `t_{k+1}`.
pub fn advance_z(z: &ZState, tables: &CoefficientTables, k: usize, drive: Complex64, params: &SystemParams) -> ZState {
    let pts = [tables.at(k), tables.midpoint(k), tables.at(k + 1)];
    let a = pts.map(|p| noise_matrix(&p.f, params));
    let b = pts.map(|p| boundary_source(&p.f, params.kappa));
    ZState(rk4_driven(&z.0, drive, [&a[0], &a[1], &a[2]], [&b[0], &b[1], &b[2]], params.dt))
}

/// `Ō` coefficients on `D₁..D₁₂` (the `D₁₃` double-integral term is never included).
#[inline]
pub fn obar_coefficients(f: &[Complex64; N_F], z: &ZState, order: Truncation) -> [Complex64; 12] {
    let mut out = [ZERO; 12];
    out[..N_F].copy_from_slice(f);
    if order == Truncation::FPlusZ {
        out[N_F..].copy_from_slice(&z.0);
    }
    out
}

/// `Ō(t, z̃)` as a dense operator.
pub fn assemble_obar(model: &Model, f: &[Complex64; N_F], z: &ZState, order: Truncation) -> Operator6 {
    let coeffs = obar_coefficients(f, z, order);
    let mut out = Operator6::zeros();
    for (cj, &(r, col)) in coeffs.iter().zip(&model.basis_positions) {
        out[(r, col)] += cj;
    }
    out
}

/// `Ō ψ` from the basis coefficients without forming the matrix.
#[inline]
pub fn apply_obar(model: &Model, coeffs: &[Complex64; 12], psi: &Amplitudes) -> Amplitudes {
    let mut out = Amplitudes::zeros();
    for (cj, &(r, col)) in coeffs.iter().zip(&model.basis_positions) {
        out[r] += cj * psi[col];
    }
    out
}

pub const MAX_STORED_GRID: usize = 2000;

/// Brute-force triangular grid `P_j(t_k, s_m)`, `m ≤ k`. Verification only.
#[derive(Debug, Clone)]
pub struct PGridOracle {
    dt: f64,
    /// `columns[m][k - m] = P(t_k, s_m)`.
    columns: Vec<Vec<Vec4>>,
}

impl PGridOracle {
    pub fn integrate(params: &SystemParams, tables: &CoefficientTables) -> Result<Self> {
        let points = tables.n_steps() + 1;
        if points > MAX_STORED_GRID {
            return Err(Error::GridTooLarge {
                points,
                max: MAX_STORED_GRID,
            });
        }
        let mut columns: Vec<Vec<Vec4>> = Vec::with_capacity(points);
        for m in 0..points {
            let mut col = Vec::with_capacity(points - m);
            let mut p = boundary_source(tables.f(m), params.kappa);
            col.push(p);
            for k in m..points - 1 {
                p = tables.step_column(&p, k);
                col.push(p);
            }
            columns.push(col);
        }
        Ok(Self {
            dt: params.dt,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `P_j(t_k, s_m)` for `j = 9..12` as a 4-array.
    pub fn value(&self, k: usize, m: usize) -> Vec4 {
        assert!(m <= k);
        self.columns[m][k - m]
    }

    /// Trapezoidal `∫₀^{t_k} w(t_k - s) P(t_k, s) u(s) ds` per grid point.
    pub fn quadrature(&self, weight: impl Fn(usize) -> f64, drive: impl Fn(usize) -> Complex64) -> Vec<Vec4> {
        (0..self.len())
            .map(|k| {
                let mut acc = [ZERO; N_Z];
                for m in 0..=k {
                    let tw = if m == 0 || m == k { 0.5 } else { 1.0 };
                    let w = drive(m) * (tw * weight(k - m) * self.dt);
                    let p = self.value(k, m);
                    for (a, x) in acc.iter_mut().zip(p) {
                        *a += x * w;
                    }
                }
                if k == 0 {
                    [ZERO; N_Z]
                } else {
                    acc
                }
            })
            .collect()
    }
}

/// Quadratures of the P-grid evaluated on the fly, for grids too large to store.
#[derive(Debug, Clone)]
pub struct GridQuadratures {
    /// `∫₀ᵗ α(t,s₁) P_j(t,s₁) ds₁`; compare with `P̄_j` under [`P13Coupling::Dropped`].
    pub alpha_weighted: Vec<Vec4>,
    /// `∫₀ᵗ P_j(t,s₁) z̃_{s₁} ds₁`; compare with the `Z` system.
    pub noise_weighted: Option<Vec<Vec4>>,
}

/// Streams the triangular grid column by column; `O(N²)` time, `O(N)` memory.
pub fn p_grid_quadratures(
    params: &SystemParams,
    tables: &CoefficientTables,
    noise: Option<&[Complex64]>,
) -> GridQuadratures {
    let points = tables.n_steps() + 1;
    let decay: Vec<f64> = (0..points).map(|j| params.correlation(j as f64 * params.dt)).collect();
    let mut cols: Vec<Vec4> = Vec::with_capacity(points);
    let mut alpha_weighted = Vec::with_capacity(points);
    let mut noise_weighted = noise.map(|_| Vec::with_capacity(points));

    for k in 0..points {
        if k > 0 {
            for col in cols.iter_mut() {
                *col = tables.step_column(col, k - 1);
            }
        }
        cols.push(boundary_source(tables.f(k), params.kappa));
        if k == 0 {
            alpha_weighted.push([ZERO; N_Z]);
            if let Some(nw) = noise_weighted.as_mut() {
                nw.push([ZERO; N_Z]);
            }
            continue;
        }
        let mut acc_a = [ZERO; N_Z];
        let mut acc_z = [ZERO; N_Z];
        for (m, col) in cols.iter().enumerate() {
            let tw = if m == 0 || m == k { 0.5 } else { 1.0 } * params.dt;
            let wa = tw * decay[k - m];
            for i in 0..N_Z {
                acc_a[i] += col[i] * wa;
            }
            if let Some(z) = noise {
                let wz = z[m] * tw;
                for i in 0..N_Z {
                    acc_z[i] += col[i] * wz;
                }
            }
        }
        alpha_weighted.push(acc_a);
        if let Some(nw) = noise_weighted.as_mut() {
            nw.push(acc_z);
        }
    }
    GridQuadratures {
        alpha_weighted,
        noise_weighted,
    }
}

/// `max_k |a_k - b_k| / max_k |b_k|` over component `i` of two series.
pub fn sup_relative_error(a: &[Vec4], b: &[Vec4], i: usize) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x[i] - y[i]).norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y[i].norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
