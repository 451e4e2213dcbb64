//! Fixed operators of the qubit-qutrit model and the single basis convention.
//!
//! Composite index of `|a⟩_A ⊗ |b⟩_B` is `2a + b`, qutrit level `a ∈ {0,1,2}` as the slow
//! index, qubit level `b ∈ {0,1}` as the fast one:
//!
//! | index | label | state          |
//! |-------|-------|----------------|
//! | 0     | 1     | `|0⟩_A|0⟩_B`   |
//! | 1     | 2     | `|0⟩_A|1⟩_B`   |
//! | 2     | 3     | `|1⟩_A|0⟩_B`   |
//! | 3     | 4     | `|1⟩_A|1⟩_B`   |
//! | 4     | 5     | `|2⟩_A|0⟩_B`   |
//! | 5     | 6     | `|2⟩_A|1⟩_B`   |

use std::fmt;

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, kron, Amplitudes, Operator6, SparseOp, DIM, ONE, ZERO};

pub const QUTRIT_LEVELS: usize = 3;
pub const QUBIT_LEVELS: usize = 2;

/// Composite-basis bookkeeping shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisConvention;

impl BasisConvention {
    /// Array index of `|qutrit⟩_A |qubit⟩_B`.
    pub const fn index(qutrit: usize, qubit: usize) -> usize {
        QUBIT_LEVELS * qutrit + qubit
    }

    /// `(qutrit, qubit)` levels of an array index.
    pub const fn levels(index: usize) -> (usize, usize) {
        (index / QUBIT_LEVELS, index % QUBIT_LEVELS)
    }

    /// One-based label `|1⟩..|6⟩` used when quoting matrix elements such as `ρ₃₂`.
    pub const fn label(index: usize) -> usize {
        index + 1
    }

    /// Array index of a one-based label.
    pub const fn from_label(label: usize) -> usize {
        label - 1
    }

    /// Total excitation number `a + b`.
    pub const fn excitations(index: usize) -> usize {
        let (a, b) = Self::levels(index);
        a + b
    }
}

/// Truncation level of the O-operator expansion used by the propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// Noise-independent part `Σ F_j D_j` only.
    FOnly,
    /// Adds the single-noise-integral terms `Σ Z_j D_j` for `j = 9..12`.
    #[default]
    FPlusZ,
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truncation::FOnly => "f-only",
            Truncation::FPlusZ => "f-plus-z",
        })
    }
}

/// Physical parameters and the numerical grid.
///
/// Fields are public for convenient construction; every entry point calls
/// [`SystemParams::validate`] before using them.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Qutrit splitting `ω_A`.
    pub omega_a: f64,
    /// Qubit splitting `ω_B`.
    pub omega_b: f64,
    /// Coupling asymmetry `κ`.
    pub kappa: f64,
    /// Dissipation rate `Γ`.
    pub dissipation: f64,
    /// Inverse bath memory time `γ`.
    pub memory_rate: f64,
    pub dt: f64,
    pub t_max: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub order: Truncation,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_a: 1.0,
            omega_b: 1.0,
            kappa: 1.0,
            dissipation: 1.0,
            memory_rate: 0.3,
            dt: 1e-3,
            t_max: 10.0,
            n_traj: 1000,
            seed: 1,
            order: Truncation::FPlusZ,
        }
    }
}

fn invalid(field: &'static str, constraint: impl Into<String>) -> Error {
    Error::InvalidParams {
        field,
        constraint: constraint.into(),
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega_A", self.omega_a),
            ("omega_B", self.omega_b),
            ("kappa", self.kappa),
            ("Gamma", self.dissipation),
            ("gamma", self.memory_rate),
            ("dt", self.dt),
            ("t_max", self.t_max),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if self.kappa < 0.0 {
            return Err(invalid("kappa", "kappa >= 0 required"));
        }
        if self.dissipation < 0.0 {
            return Err(invalid("Gamma", "Gamma >= 0 required"));
        }
        if self.memory_rate <= 0.0 {
            return Err(invalid("gamma", "gamma > 0 required"));
        }
        if self.dt <= 0.0 {
            return Err(invalid("dt", "dt > 0 required"));
        }
        if self.t_max < self.dt {
            return Err(invalid("t_max", "t_max >= dt required"));
        }
        if self.n_traj < 1 {
            return Err(invalid("n_traj", "n_traj >= 1 required"));
        }
        if self.dt * self.memory_rate >= 0.5 {
            return Err(invalid("dt", "stability guard dt*gamma < 0.5 violated"));
        }
        if self.dt * self.omega_a.abs().max(self.omega_b.abs()) >= 0.1 {
            return Err(invalid(
                "dt",
                "stability guard dt*max(omega_A, omega_B) < 0.1 violated",
            ));
        }
        Ok(())
    }

    /// Number of steps `⌊t_max/dt⌋`.
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize
    }

    /// Grid points including `t = 0`.
    pub fn grid_len(&self) -> usize {
        self.n_steps() + 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// `α(t,t) = Γγ/2`.
    pub fn kernel_strength(&self) -> f64 {
        0.5 * self.dissipation * self.memory_rate
    }

    /// `α(t,s) = (Γγ/2) e^{-γ|t-s|}`.
    pub fn correlation(&self, lag: f64) -> f64 {
        self.kernel_strength() * (-self.memory_rate * lag.abs()).exp()
    }
}

fn qutrit_sz() -> Matrix3<Complex64> {
    // levels 0,1,2 carry S_z eigenvalues -1, 0, +1
    Matrix3::from_diagonal(&[c(-1.0, 0.0), ZERO, ONE].into())
}

fn qutrit_lowering() -> Matrix3<Complex64> {
    qutrit_dyad(0, 1) + qutrit_dyad(1, 2)
}

fn qubit_sz() -> Matrix2<Complex64> {
    Matrix2::from_diagonal(&[c(-0.5, 0.0), c(0.5, 0.0)].into())
}

fn qubit_lowering() -> Matrix2<Complex64> {
    qubit_dyad(0, 1)
}

fn qubit_raising() -> Matrix2<Complex64> {
    qubit_dyad(1, 0)
}

/// `|row⟩⟨col|` on the qutrit.
fn qutrit_dyad(row: usize, col: usize) -> Matrix3<Complex64> {
    let mut m = Matrix3::zeros();
    m[(row, col)] = ONE;
    m
}

/// `|row⟩⟨col|` on the qubit.
fn qubit_dyad(row: usize, col: usize) -> Matrix2<Complex64> {
    let mut m = Matrix2::zeros();
    m[(row, col)] = ONE;
    m
}

/// `H_sys = ω_A S_z^A ⊗ I₂ + ω_B I₃ ⊗ S_z^B`.
pub fn build_hamiltonian(params: &SystemParams) -> Operator6 {
    kron(&qutrit_sz(), &Matrix2::identity()).scale(params.omega_a)
        + kron(&Matrix3::identity(), &qubit_sz()).scale(params.omega_b)
}

/// `L = S_-^A ⊗ I₂ + κ I₃ ⊗ S_-^B`.
pub fn build_lindblad(params: &SystemParams) -> Operator6 {
    kron(&qutrit_lowering(), &Matrix2::identity())
        + kron(&Matrix3::identity(), &qubit_lowering()).scale(params.kappa)
}

/// The thirteen O-operator basis matrices `D₁..D₁₃` (array slot `j-1` holds `D_j`).
pub fn build_basis_operators() -> [Operator6; 13] {
    let p0 = qubit_dyad(0, 0);
    let p1 = qubit_dyad(1, 1);
    let up = qubit_raising();
    let down = qubit_lowering();
    [
        kron(&qutrit_dyad(0, 2), &up),
        kron(&qutrit_dyad(1, 2), &p1),
        kron(&qutrit_dyad(0, 1), &p1),
        kron(&qutrit_dyad(1, 2), &p0),
        kron(&qutrit_dyad(0, 1), &p0),
        kron(&qutrit_dyad(2, 2), &down),
        kron(&qutrit_dyad(1, 1), &down),
        kron(&qutrit_dyad(0, 0), &down),
        kron(&qutrit_dyad(0, 2), &p1),
        kron(&qutrit_dyad(0, 2), &p0),
        kron(&qutrit_dyad(1, 2), &down),
        kron(&qutrit_dyad(0, 1), &down),
        kron(&qutrit_dyad(0, 2), &down),
    ]
}

/// `(row, col)` of the single unit entry of each `D_j`.
pub fn basis_positions(basis: &[Operator6; 13]) -> [(usize, usize); 13] {
    let mut out = [(0, 0); 13];
    for (slot, d) in out.iter_mut().zip(basis) {
        let mut found = None;
        for r in 0..DIM {
            for col in 0..DIM {
                if d[(r, col)] != ZERO {
                    assert!(found.is_none(), "basis operator is not single-entry");
                    found = Some((r, col));
                }
            }
        }
        *slot = found.expect("empty basis operator");
    }
    out
}

/// All fixed operators for one parameter set. Immutable and shared across trajectories.
#[derive(Debug, Clone)]
pub struct Model {
    pub hamiltonian: Operator6,
    pub lindblad: Operator6,
    /// Diagonal of `H_sys`.
    pub energies: [f64; DIM],
    pub basis: [Operator6; 13],
    pub basis_positions: [(usize, usize); 13],
    lindblad_sparse: SparseOp,
    lindblad_dag_sparse: SparseOp,
}

impl Model {
    pub fn new(params: &SystemParams) -> Self {
        let hamiltonian = build_hamiltonian(params);
        let lindblad = build_lindblad(params);
        let basis = build_basis_operators();
        let lindblad_sparse = SparseOp::from_dense(&lindblad);
        let mut energies = [0.0; DIM];
        for (i, e) in energies.iter_mut().enumerate() {
            *e = hamiltonian[(i, i)].re;
        }
        Self {
            hamiltonian,
            lindblad,
            energies,
            basis_positions: basis_positions(&basis),
            basis,
            lindblad_dag_sparse: lindblad_sparse.adjoint(),
            lindblad_sparse,
        }
    }

    pub fn lindblad_sparse(&self) -> &SparseOp {
        &self.lindblad_sparse
    }

    pub fn lindblad_dag_sparse(&self) -> &SparseOp {
        &self.lindblad_dag_sparse
    }

    /// `e^{-iH t}` as its diagonal.
    pub fn free_phases(&self, t: f64) -> [Complex64; DIM] {
        let mut out = [ZERO; DIM];
        for (o, e) in out.iter_mut().zip(&self.energies) {
            *o = Complex64::from_polar(1.0, -e * t);
        }
        out
    }
}

/// Pure state of the pair, normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Amplitudes);

impl StateVector {
    /// Normalizes `amplitudes`; rejects a zero vector.
    pub fn normalized(amplitudes: Amplitudes) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::ZeroState);
        }
        Ok(Self(amplitudes.unscale(norm)))
    }

    pub fn basis(index: usize) -> Self {
        let mut v = Amplitudes::zeros();
        v[index] = ONE;
        Self(v)
    }

    pub fn amplitudes(&self) -> &Amplitudes {
        &self.0
    }

    pub fn into_inner(self) -> Amplitudes {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Named or explicit initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialStateSpec {
    /// `(|1⟩_A|1⟩_B + |0⟩_A|0⟩_B)/√2`.
    Bell,
    /// `|2⟩_A|0⟩_B`.
    Product20,
    /// `(κ|1⟩_A|0⟩_B − |0⟩_A|1⟩_B)/√(1+κ²)`, annihilated by `L`.
    PsiKappa,
    /// `(κ|2⟩_A|0⟩_B − |1⟩_A|1⟩_B)/√(1+κ²)`.
    PhiKappa,
    Custom(Vec<Complex64>),
}

impl InitialStateSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            InitialStateSpec::Bell => "bell",
            InitialStateSpec::Product20 => "product-20",
            InitialStateSpec::PsiKappa => "psi-kappa",
            InitialStateSpec::PhiKappa => "phi-kappa",
            InitialStateSpec::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub state: StateVector,
    /// Set when custom amplitudes were off unit norm by more than 1e-6.
    pub warning: Option<String>,
}

pub fn make_initial_state(spec: &InitialStateSpec, kappa: f64) -> Result<InitialState> {
    let idx = BasisConvention::index;
    let mut v = Amplitudes::zeros();
    let mut warning = None;
    match spec {
        InitialStateSpec::Bell => {
            v[idx(1, 1)] = ONE;
            v[idx(0, 0)] = ONE;
        }
        InitialStateSpec::Product20 => v[idx(2, 0)] = ONE,
        InitialStateSpec::PsiKappa => {
            v[idx(1, 0)] = c(kappa, 0.0);
            v[idx(0, 1)] = c(-1.0, 0.0);
        }
        InitialStateSpec::PhiKappa => {
            v[idx(2, 0)] = c(kappa, 0.0);
            v[idx(1, 1)] = c(-1.0, 0.0);
        }
        InitialStateSpec::Custom(amps) => {
            if amps.len() != DIM {
                return Err(Error::WrongDimension(amps.len()));
            }
            v = Amplitudes::from_column_slice(amps);
            let norm = v.norm();
            if (norm - 1.0).abs() > 1e-6 && norm > 0.0 {
                let msg = format!("custom initial state had norm {norm}; normalized");
                log::warn!("{msg}");
                warning = Some(msg);
            }
        }
    }
    Ok(InitialState {
        state: StateVector::normalized(v)?,
        warning,
    })
}
