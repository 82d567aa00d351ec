//! Dense linear-algebra substrate: state vectors, density matrices, spin
//! operators, tensor products, partial traces and Born-rule statistics.
//!
//! Basis convention (project-wide): spin/qubit 0 is the most significant bit.
//! A basis index is `x = Σ_j b_j · 2^(n−1−j)`, so for three qubits `|100⟩`
//! is index 4. Spin positions are 0-based here; text formats add their own
//! label offset.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest supported register, in qubits.
pub const MAX_QUBITS: usize = 12;

/// Tolerance for normalization and trace checks.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for `‖U†U − 1‖_∞`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a physical density matrix.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QStateError {
    #[error("register of {qubits} qubits exceeds the capacity of {max} qubits")]
    Capacity { qubits: usize, max: usize },

    #[error("register must hold at least one qubit")]
    Empty,

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary: ‖U†U − 1‖∞ = {residual:e}")]
    NotUnitary { residual: f64 },

    #[error("matrix is not Hermitian: max |ρ − ρ†| = {residual:e}")]
    NotHermitian { residual: f64 },

    #[error("trace {trace} is invalid for a {kind:?} density matrix")]
    BadTrace { trace: f64, kind: DensityKind },

    #[error("density matrix has negative eigenvalue {0}")]
    NegativeEigenvalue(f64),

    #[error("state is not normalized: Σ|a|² = {0}")]
    NotNormalized(f64),

    #[error("a deviation density matrix has no probability semantics")]
    DeviationHasNoProbabilities,

    #[error("spin subset to keep is empty")]
    EmptySubset,

    #[error("spin {index} out of range for a {n}-spin register")]
    SpinOutOfRange { index: usize, n: usize },
}

pub type QResult<T> = Result<T, QStateError>;

pub(crate) fn check_qubits(n: usize) -> QResult<()> {
    if n == 0 {
        Err(QStateError::Empty)
    } else if n > MAX_QUBITS {
        Err(QStateError::Capacity { qubits: n, max: MAX_QUBITS })
    } else {
        Ok(())
    }
}

fn qubits_for_len(len: usize) -> QResult<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(QStateError::NotPowerOfTwo(len));
    }
    let n = len.trailing_zeros() as usize;
    check_qubits(n)?;
    Ok(n)
}

/// Bit of qubit `j` (0 = MSB) in basis index `x` of an `n`-qubit register.
#[inline]
pub fn bit(x: usize, j: usize, n: usize) -> usize {
    (x >> (n - 1 - j)) & 1
}

/// Bitstring of `x` with qubit 0 first, e.g. `bitstring(4, 3) == "100"`.
pub fn bitstring(x: usize, n: usize) -> String {
    (0..n).map(|j| if bit(x, j, n) == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`bitstring`].
pub fn parse_bitstring(s: &str) -> Option<usize> {
    if s.is_empty() {
        return None;
    }
    s.chars().try_fold(0usize, |acc, c| match c {
        '0' => Some(acc << 1),
        '1' => Some((acc << 1) | 1),
        _ => None,
    })
}

/// `max |(U†U − 1)_ij|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn check_unitary(u: &CMatrix) -> QResult<()> {
    if !u.is_square() {
        return Err(QStateError::DimensionMismatch { expected: u.nrows(), got: u.ncols() });
    }
    let residual = unitarity_residual(u);
    if residual > UNITARY_TOL {
        Err(QStateError::NotUnitary { residual })
    } else {
        Ok(())
    }
}

/// `max |ρ − ρ†|`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Entrywise `max |a_ij − b_ij|`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Real part of `Tr(A B)`.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn kron_all<'a, I>(mats: I) -> CMatrix
where
    I: IntoIterator<Item = &'a CMatrix>,
{
    mats.into_iter().fold(CMatrix::identity(1, 1), |acc, m| acc.kronecker(m))
}

/// Embed a single-spin 2×2 operator at position `spin` of an `n`-spin register.
pub fn embed_single(op: &CMatrix, spin: usize, n: usize) -> CMatrix {
    let id = CMatrix::identity(2, 2);
    let factors: Vec<&CMatrix> = (0..n).map(|j| if j == spin { op } else { &id }).collect();
    kron_all(factors)
}

/// Computational-basis permutation that relabels qubits: output qubit `i`
/// takes the value of input qubit `perm[i]`.
pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let dim = 1usize << n;
    let mut p = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        let y = (0..n).fold(0usize, |acc, i| (acc << 1) | bit(x, perm[i], n));
        p[(y, x)] = C64::new(1.0, 0.0);
    }
    p
}

/// Complex amplitudes over the `2^n` computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> QResult<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        Ok(Self { n_qubits, amplitudes: CVector::from_vec(amplitudes) })
    }

    pub fn from_real(amplitudes: &[f64]) -> QResult<Self> {
        Self::new(amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    /// Basis state `|index⟩` of an `n`-qubit register.
    pub fn basis(n_qubits: usize, index: usize) -> QResult<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(QStateError::DimensionMismatch { expected: dim, got: index + 1 });
        }
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Equal-weight superposition over `indices` (duplicates ignored).
    pub fn uniform_over(n_qubits: usize, indices: &[usize]) -> QResult<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut amplitudes = CVector::zeros(dim);
        for &i in indices {
            if i >= dim {
                return Err(QStateError::DimensionMismatch { expected: dim, got: i + 1 });
            }
            amplitudes[i] = C64::new(1.0, 0.0);
        }
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(QStateError::NotNormalized(0.0));
        }
        Ok(Self { n_qubits, amplitudes: amplitudes.unscale(norm) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> QResult<Self> {
        let norm = self.amplitudes.norm();
        if norm == 0.0 {
            return Err(QStateError::NotNormalized(0.0));
        }
        Ok(Self { n_qubits: self.n_qubits, amplitudes: self.amplitudes.unscale(norm) })
    }

    /// `U|ψ⟩`, rejecting non-unitary `U`.
    pub fn apply_unitary(&self, u: &CMatrix) -> QResult<Self> {
        if u.nrows() != self.dim() {
            return Err(QStateError::DimensionMismatch { expected: self.dim(), got: u.nrows() });
        }
        check_unitary(u)?;
        Ok(self.apply_unchecked(u))
    }

    pub(crate) fn apply_unchecked(&self, u: &CMatrix) -> Self {
        Self { n_qubits: self.n_qubits, amplitudes: u * &self.amplitudes }
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap_sqr(&self, other: &StateVector) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { n_spins: self.n_qubits, matrix: &self.amplitudes * self.amplitudes.adjoint(), kind: DensityKind::Physical }
    }
}

/// Whether a density matrix carries probabilities or only the traceless
/// part observed in NMR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Physical,
    Deviation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_spins: usize,
    matrix: CMatrix,
    kind: DensityKind,
}

impl DensityMatrix {
    /// Validated constructor: Hermitian, with the trace demanded by `kind`,
    /// and positive semidefinite when physical.
    pub fn new(matrix: CMatrix, kind: DensityKind) -> QResult<Self> {
        if !matrix.is_square() {
            return Err(QStateError::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let n_spins = qubits_for_len(matrix.nrows())?;
        let residual = hermiticity_residual(&matrix);
        if residual > HERMITIAN_TOL {
            return Err(QStateError::NotHermitian { residual });
        }
        let trace = matrix.trace().re;
        match kind {
            DensityKind::Physical => {
                if (trace - 1.0).abs() > NORM_TOL {
                    return Err(QStateError::BadTrace { trace, kind });
                }
                let min = matrix.clone().symmetric_eigenvalues().min();
                if min < -EIGEN_TOL {
                    return Err(QStateError::NegativeEigenvalue(min));
                }
            }
            DensityKind::Deviation => {
                if trace.abs() > NORM_TOL {
                    return Err(QStateError::BadTrace { trace, kind });
                }
            }
        }
        Ok(Self { n_spins, matrix, kind })
    }

    /// Construct without validation; used by evolution code whose output
    /// inherits the invariants of its input.
    pub(crate) fn from_parts(matrix: CMatrix, kind: DensityKind) -> Self {
        let n_spins = matrix.nrows().trailing_zeros() as usize;
        Self { n_spins, matrix, kind }
    }

    /// Traceless part of an arbitrary Hermitian operator.
    pub fn deviation_from(matrix: CMatrix) -> QResult<Self> {
        let dim = matrix.nrows();
        let shift = matrix.trace() / dim as f64;
        let mut m = matrix;
        for i in 0..dim {
            m[(i, i)] -= shift;
        }
        Self::new(m, DensityKind::Deviation)
    }

    pub fn maximally_mixed(n_spins: usize) -> QResult<Self> {
        check_qubits(n_spins)?;
        let dim = 1usize << n_spins;
        Ok(Self { n_spins, matrix: CMatrix::identity(dim, dim).unscale(dim as f64), kind: DensityKind::Physical })
    }

    pub fn zero_deviation(n_spins: usize) -> QResult<Self> {
        check_qubits(n_spins)?;
        let dim = 1usize << n_spins;
        Ok(Self { n_spins, matrix: CMatrix::zeros(dim, dim), kind: DensityKind::Deviation })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// The traceless part, tagged as a deviation.
    pub fn to_deviation(&self) -> DensityMatrix {
        let dim = self.dim();
        let shift = self.matrix.trace() / dim as f64;
        let mut m = self.matrix.clone();
        for i in 0..dim {
            m[(i, i)] -= shift;
        }
        DensityMatrix { n_spins: self.n_spins, matrix: m, kind: DensityKind::Deviation }
    }

    pub fn scaled(&self, factor: f64) -> DensityMatrix {
        DensityMatrix { n_spins: self.n_spins, matrix: self.matrix.scale(factor), kind: self.kind }
    }

    /// `UρU†`, rejecting non-unitary `U`.
    pub fn apply_unitary(&self, u: &CMatrix) -> QResult<Self> {
        if u.nrows() != self.dim() {
            return Err(QStateError::DimensionMismatch { expected: self.dim(), got: u.nrows() });
        }
        check_unitary(u)?;
        Ok(self.conjugate_unchecked(u))
    }

    pub(crate) fn conjugate_unchecked(&self, u: &CMatrix) -> Self {
        Self { n_spins: self.n_spins, matrix: u * &self.matrix * u.adjoint(), kind: self.kind }
    }

    pub(crate) fn map_matrix(&self, f: impl FnOnce(&CMatrix) -> CMatrix) -> Self {
        Self { n_spins: self.n_spins, matrix: f(&self.matrix), kind: self.kind }
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.matrix)
    }

    /// Reduced density matrix on the spins in `keep` (in the given order).
    pub fn partial_trace(&self, keep: &[usize]) -> QResult<DensityMatrix> {
        if keep.is_empty() {
            return Err(QStateError::EmptySubset);
        }
        let n = self.n_spins;
        for &k in keep {
            if k >= n {
                return Err(QStateError::SpinOutOfRange { index: k, n });
            }
        }
        let traced: Vec<usize> = (0..n).filter(|j| !keep.contains(j)).collect();
        let nk = keep.len();
        let nt = traced.len();
        let compose = |kept: usize, tr: usize| -> usize {
            let mut bits = vec![0usize; n];
            for (pos, &spin) in keep.iter().enumerate() {
                bits[spin] = bit(kept, pos, nk);
            }
            for (pos, &spin) in traced.iter().enumerate() {
                bits[spin] = bit(tr, pos, nt.max(1));
            }
            bits.iter().fold(0usize, |acc, &b| (acc << 1) | b)
        };
        let dk = 1usize << nk;
        let dt = 1usize << nt;
        let mut out = CMatrix::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dt {
                    acc += self.matrix[(compose(i, t), compose(j, t))];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(DensityMatrix { n_spins: nk, matrix: out, kind: self.kind })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> QResult<DensityMatrix> {
        let n = self.n_spins + other.n_spins;
        check_qubits(n)?;
        let kind = if self.kind == DensityKind::Physical && other.kind == DensityKind::Physical {
            DensityKind::Physical
        } else {
            DensityKind::Deviation
        };
        Ok(DensityMatrix { n_spins: n, matrix: self.matrix.kronecker(&other.matrix), kind })
    }
}

/// Single-spin building blocks of product operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleSpin {
    Identity,
    X,
    Y,
    Z,
    /// `|0⟩⟨0| = 1/2 + I_z`
    Alpha,
    /// `|1⟩⟨1| = 1/2 − I_z`
    Beta,
}

impl SingleSpin {
    pub fn matrix(self) -> CMatrix {
        let r = |v: f64| C64::new(v, 0.0);
        let z = C64::new(0.0, 0.0);
        let data = match self {
            SingleSpin::Identity => [r(1.0), z, z, r(1.0)],
            SingleSpin::X => [z, r(0.5), r(0.5), z],
            SingleSpin::Y => [z, C64::new(0.0, -0.5), C64::new(0.0, 0.5), z],
            SingleSpin::Z => [r(0.5), z, z, r(-0.5)],
            SingleSpin::Alpha => [r(1.0), z, z, z],
            SingleSpin::Beta => [z, z, z, r(1.0)],
        };
        CMatrix::from_row_slice(2, 2, &data)
    }

    fn symbol(self) -> &'static str {
        match self {
            SingleSpin::Identity => "1",
            SingleSpin::X => "x",
            SingleSpin::Y => "y",
            SingleSpin::Z => "z",
            SingleSpin::Alpha => "^α",
            SingleSpin::Beta => "^β",
        }
    }
}

/// A labeled operator on an `n`-spin register, e.g. `I_1z` or `I_1^α I_2^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperator {
    n_spins: usize,
    matrix: CMatrix,
    label: String,
}

impl SpinOperator {
    pub fn identity(n_spins: usize) -> QResult<Self> {
        check_qubits(n_spins)?;
        let dim = 1usize << n_spins;
        Ok(Self { n_spins, matrix: CMatrix::identity(dim, dim), label: "1".into() })
    }

    /// A single-spin operator on `spin`, tensored with identity elsewhere.
    /// Labels count spins from `label_base`.
    pub fn single(n_spins: usize, spin: usize, which: SingleSpin, label_base: usize) -> QResult<Self> {
        Self::product(n_spins, &[(spin, which)], label_base)
    }

    /// Product of single-spin factors on distinct spins.
    pub fn product(n_spins: usize, factors: &[(usize, SingleSpin)], label_base: usize) -> QResult<Self> {
        check_qubits(n_spins)?;
        let mut per_spin = vec![SingleSpin::Identity; n_spins];
        for &(spin, which) in factors {
            if spin >= n_spins {
                return Err(QStateError::SpinOutOfRange { index: spin, n: n_spins });
            }
            per_spin[spin] = which;
        }
        let mats: Vec<CMatrix> = per_spin.iter().map(|s| s.matrix()).collect();
        let label = factors.iter().map(|&(spin, which)| format!("I_{}{}", spin + label_base, which.symbol())).collect::<Vec<_>>().join(" ");
        Ok(Self { n_spins, matrix: kron_all(mats.iter()), label: if label.is_empty() { "1".into() } else { label } })
    }

    pub fn from_matrix(matrix: CMatrix, label: impl Into<String>) -> QResult<Self> {
        let n_spins = qubits_for_len(matrix.nrows())?;
        Ok(Self { n_spins, matrix, label: label.into() })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scale(&self, factor: f64) -> SpinOperator {
        SpinOperator { n_spins: self.n_spins, matrix: self.matrix.scale(factor), label: format!("{factor}·{}", self.label) }
    }

    pub fn plus(&self, other: &SpinOperator) -> QResult<SpinOperator> {
        if other.n_spins != self.n_spins {
            return Err(QStateError::DimensionMismatch { expected: self.matrix.nrows(), got: other.matrix.nrows() });
        }
        Ok(SpinOperator { n_spins: self.n_spins, matrix: &self.matrix + &other.matrix, label: format!("{} + {}", self.label, other.label) })
    }

    pub fn times(&self, other: &SpinOperator) -> QResult<SpinOperator> {
        if other.n_spins != self.n_spins {
            return Err(QStateError::DimensionMismatch { expected: self.matrix.nrows(), got: other.matrix.nrows() });
        }
        Ok(SpinOperator { n_spins: self.n_spins, matrix: &self.matrix * &other.matrix, label: format!("{} {}", self.label, other.label) })
    }

    /// Interpret as a traceless deviation density matrix.
    pub fn to_deviation(&self) -> QResult<DensityMatrix> {
        DensityMatrix::deviation_from(self.matrix.clone())
    }
}

/// Kronecker product in declared order.
pub trait Tensor: Sized {
    fn tensor_all(parts: &[Self]) -> QResult<Self>;
}

impl Tensor for StateVector {
    fn tensor_all(parts: &[Self]) -> QResult<Self> {
        let n: usize = parts.iter().map(|p| p.n_qubits).sum();
        check_qubits(n)?;
        let amps = parts.iter().fold(CVector::from_element(1, C64::new(1.0, 0.0)), |acc, p| acc.kronecker(&p.amplitudes));
        Ok(Self { n_qubits: n, amplitudes: amps })
    }
}

impl Tensor for SpinOperator {
    fn tensor_all(parts: &[Self]) -> QResult<Self> {
        let n: usize = parts.iter().map(|p| p.n_spins).sum();
        check_qubits(n)?;
        let matrix = kron_all(parts.iter().map(|p| &p.matrix));
        let label = parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(" ⊗ ");
        Ok(Self { n_spins: n, matrix, label })
    }
}

impl Tensor for DensityMatrix {
    fn tensor_all(parts: &[Self]) -> QResult<Self> {
        let (first, rest) = parts.split_first().ok_or(QStateError::Empty)?;
        rest.iter().try_fold(first.clone(), |acc, p| acc.tensor(p))
    }
}

pub fn tensor<T: Tensor>(parts: &[T]) -> QResult<T> {
    T::tensor_all(parts)
}

/// Born-rule outcome probabilities over the computational basis.
pub trait Measurable {
    fn measure_distribution(&self) -> QResult<Vec<f64>>;
}

fn clamp_probabilities(mut p: Vec<f64>) -> Vec<f64> {
    for v in p.iter_mut() {
        if *v < 0.0 && *v >= -NORM_TOL {
            *v = 0.0;
        }
    }
    p
}

impl Measurable for StateVector {
    fn measure_distribution(&self) -> QResult<Vec<f64>> {
        let total = self.norm_sqr();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(QStateError::NotNormalized(total));
        }
        Ok(self.amplitudes.iter().map(|a| a.norm_sqr()).collect())
    }
}

impl Measurable for DensityMatrix {
    fn measure_distribution(&self) -> QResult<Vec<f64>> {
        if self.kind == DensityKind::Deviation {
            return Err(QStateError::DeviationHasNoProbabilities);
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > NORM_TOL {
            return Err(QStateError::BadTrace { trace, kind: self.kind });
        }
        Ok(clamp_probabilities((0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()))
    }
}

pub fn measure_distribution<M: Measurable>(state: &M) -> QResult<Vec<f64>> {
    state.measure_distribution()
}

/// Seeded RNG used throughout the crate so runs are reproducible.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw one index from a discrete distribution.
pub fn draw<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let total: f64 = probabilities.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Round-off can leave u marginally above the last partial sum.
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `shots` i.i.d. computational-basis outcomes, deterministic in `seed`.
pub fn sample<M: Measurable>(state: &M, seed: u64, shots: usize) -> QResult<Vec<usize>> {
    let p = state.measure_distribution()?;
    let mut rng = seeded_rng(seed);
    Ok((0..shots).map(|_| draw(&p, &mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn hadamard() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)])
    }

    #[test]
    fn tensor_of_zero_kets_is_basis_zero() {
        let zero = StateVector::basis(1, 0).unwrap();
        let t = tensor(&[zero.clone(), zero.clone(), zero]).unwrap();
        assert_eq!(t, StateVector::basis(3, 0).unwrap());
    }

    #[test]
    fn tensor_of_alpha_projectors() {
        let a = SpinOperator::single(1, 0, SingleSpin::Alpha, 1).unwrap();
        let t = tensor(&[a.clone(), a.clone(), a]).unwrap();
        let mut expected = CMatrix::zeros(8, 8);
        expected[(0, 0)] = c(1.0);
        assert_eq!(t.matrix(), &expected);
    }

    #[test]
    fn tensor_iz_identity_spectrum() {
        let iz = SpinOperator::single(1, 0, SingleSpin::Z, 1).unwrap();
        let id = SpinOperator::identity(1).unwrap();
        let t = tensor(&[iz, id]).unwrap();
        let mut ev: Vec<f64> = t.matrix().clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in ev.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn tensor_capacity_error() {
        let big = StateVector::basis(8, 0).unwrap();
        let err = tensor(&[big.clone(), big]).unwrap_err();
        assert_eq!(err, QStateError::Capacity { qubits: 16, max: MAX_QUBITS });
    }

    #[test]
    fn alpha_is_half_plus_iz() {
        let a = SingleSpin::Alpha.matrix();
        let expected = CMatrix::identity(2, 2).scale(0.5) + SingleSpin::Z.matrix();
        assert!(max_abs_diff(&a, &expected) < 1e-15);
    }

    #[test]
    fn apply_identity_is_noop() {
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        assert_eq!(psi.apply_unitary(&CMatrix::identity(2, 2)).unwrap(), psi);
    }

    #[test]
    fn hadamards_on_zero_give_uniform() {
        let h = hadamard();
        let h3 = kron_all([&h, &h, &h]);
        let out = StateVector::basis(3, 0).unwrap().apply_unitary(&h3).unwrap();
        for a in out.amplitudes().iter() {
            assert!((a - c(1.0 / 8f64.sqrt())).norm() < 1e-15);
        }
    }

    #[test]
    fn non_unitary_rejected_with_residual() {
        let m = CMatrix::identity(2, 2).scale(2.0);
        match StateVector::basis(1, 0).unwrap().apply_unitary(&m) {
            Err(QStateError::NotUnitary { residual }) => assert!((residual - 3.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn density_apply_preserves_trace_and_hermiticity() {
        let rho = StateVector::from_real(&[0.6, 0.0, 0.0, 0.8]).unwrap().to_density();
        let h = hadamard();
        let u = kron_all([&h, &CMatrix::identity(2, 2)]);
        let out = rho.apply_unitary(&u).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-14);
        assert!(out.hermiticity_residual() < 1e-14);
    }

    #[test]
    fn distribution_of_basis_zero() {
        let p = measure_distribution(&StateVector::basis(3, 0).unwrap()).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deviation_has_no_distribution() {
        let dev = SpinOperator::single(1, 0, SingleSpin::Z, 1).unwrap().to_deviation().unwrap();
        assert_eq!(measure_distribution(&dev), Err(QStateError::DeviationHasNoProbabilities));
    }

    #[test]
    fn unnormalized_state_rejected() {
        let psi = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(measure_distribution(&psi), Err(QStateError::NotNormalized(_))));
    }

    #[test]
    fn partial_trace_product_state() {
        let rho = StateVector::basis(2, 0).unwrap().to_density();
        let red = rho.partial_trace(&[0]).unwrap();
        assert_eq!(red.matrix(), StateVector::basis(1, 0).unwrap().to_density().matrix());
    }

    #[test]
    fn partial_trace_bell_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[s, 0.0, 0.0, s]).unwrap().to_density();
        let red = bell.partial_trace(&[0]).unwrap();
        assert!(max_abs_diff(red.matrix(), DensityMatrix::maximally_mixed(1).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn partial_trace_empty_subset() {
        let rho = StateVector::basis(2, 0).unwrap().to_density();
        assert_eq!(rho.partial_trace(&[]), Err(QStateError::EmptySubset));
    }

    #[test]
    fn sample_zero_shots_is_empty() {
        assert!(sample(&StateVector::basis(2, 1).unwrap(), 3, 0).unwrap().is_empty());
    }

    #[test]
    fn sample_basis_state_is_constant() {
        let out = sample(&StateVector::basis(3, 0).unwrap(), 11, 500).unwrap();
        assert!(out.iter().all(|&x| x == 0));
    }

    #[test]
    fn sample_is_deterministic_in_seed() {
        let psi = StateVector::uniform_over(3, &[0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        assert_eq!(sample(&psi, 42, 200).unwrap(), sample(&psi, 42, 200).unwrap());
        assert_ne!(sample(&psi, 42, 200).unwrap(), sample(&psi, 43, 200).unwrap());
    }

    #[test]
    fn physical_validation() {
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(matches!(DensityMatrix::new(bad, DensityKind::Physical), Err(QStateError::NegativeEigenvalue(_))));
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.1), c(0.0), c(0.5)]);
        assert!(matches!(DensityMatrix::new(not_herm, DensityKind::Physical), Err(QStateError::NotHermitian { .. })));
    }

    #[test]
    fn bitstrings_follow_msb_convention() {
        assert_eq!(bitstring(4, 3), "100");
        assert_eq!(parse_bitstring("100"), Some(4));
        assert_eq!(parse_bitstring("1x0"), None);
    }

    #[test]
    fn permutation_matrix_swaps_outer_qubits() {
        let p = permutation_matrix(&[2, 1, 0]);
        let out = StateVector::basis(3, 1).unwrap().apply_unitary(&p).unwrap();
        assert_eq!(out, StateVector::basis(3, 4).unwrap());
    }
}
