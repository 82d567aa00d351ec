//! Gate-level model: Hadamard, controlled phase `R_d`, swap, the QFT circuit
//! and its measurement-conditioned (semiclassical) variant.
//!
//! Qubit indices are 0-based in memory (qubit 0 = most significant bit) and
//! 1-based in the text format.
//!
//! # Text format
//!
//! One statement per line; `#` starts a comment.
//!
//! ```text
//! qubits 3            # required, first statement
//! H 1                 # Hadamard on qubit 1
//! CR 2 1 d=1          # controlled-R_d, control 2, target 1
//! SWAP 1 3
//! MEASURE 1 c=0       # measure qubit 1 into classical bit 0
//! CRC 2 d=1 c=0       # R_d on qubit 2 if classical bit 0 is set
//! RELABEL 3 2 1       # output qubit i is read from qubit perm[i]
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::qstate::{self, bit, check_qubits, permutation_matrix, CMatrix, QStateError, StateVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error(transparent)]
    State(#[from] QStateError),

    #[error("gate {gate} references qubit {qubit} outside a {n}-qubit register")]
    QubitOutOfRange { gate: String, qubit: usize, n: usize },

    #[error("gate {0} acts twice on the same qubit")]
    RepeatedQubit(String),

    #[error("controlled-R needs d ≥ 1, got {0}")]
    BadPhaseIndex(u32),

    #[error("circuit contains {0}; use run_semiclassical_qft / run_circuit_shot for measurement circuits")]
    MeasurementInUnitary(String),

    #[error("classical bit {bit} read before being written")]
    UnsetClassicalBit { bit: usize },

    #[error("relabeling {0:?} is not a permutation of the register")]
    BadRelabeling(Vec<usize>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type CircuitResult<T> = Result<T, CircuitError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Hadamard {
        target: usize,
    },
    /// Phase `e^{iπ/2^d}` on the sector where control and target are both `|1⟩`.
    ControlledR {
        control: usize,
        target: usize,
        d: u32,
    },
    Swap {
        a: usize,
        b: usize,
    },
    MeasureZ {
        target: usize,
        bit: usize,
    },
    /// `R_d` on `target` when classical bit `bit` reads 1.
    ConditionalR {
        target: usize,
        d: u32,
        bit: usize,
    },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Hadamard { target } | Gate::MeasureZ { target, .. } | Gate::ConditionalR { target, .. } => {
                vec![target]
            }
            Gate::ControlledR { control, target, .. } => vec![control, target],
            Gate::Swap { a, b } => vec![a, b],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits().len() == 2
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self, Gate::MeasureZ { .. } | Gate::ConditionalR { .. })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Hadamard { target } => write!(f, "H {}", target + 1),
            Gate::ControlledR { control, target, d } => write!(f, "CR {} {} d={}", control + 1, target + 1, d),
            Gate::Swap { a, b } => write!(f, "SWAP {} {}", a + 1, b + 1),
            Gate::MeasureZ { target, bit } => write!(f, "MEASURE {} c={}", target + 1, bit),
            Gate::ConditionalR { target, d, bit } => write!(f, "CRC {} d={} c={}", target + 1, d, bit),
        }
    }
}

/// Phase angle `π/2^d` of `R_d`.
pub fn r_phase(d: u32) -> f64 {
    PI / 2f64.powi(d as i32)
}

pub fn hadamard_matrix() -> CMatrix {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    CMatrix::from_row_slice(2, 2, &[s, s, s, -s])
}

/// `R_d = diag(1, e^{iπ/2^d})`.
pub fn r_matrix(d: u32) -> CMatrix {
    let mut m = CMatrix::identity(2, 2);
    m[(1, 1)] = C64::from_polar(1.0, r_phase(d));
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    classical_bits: usize,
    /// Output relabeling recorded in place of elided swaps; `perm[i]` is the
    /// physical qubit holding logical output qubit `i`.
    output_relabeling: Option<Vec<usize>>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize) -> CircuitResult<Self> {
        check_qubits(n_qubits)?;
        Ok(Self { n_qubits, gates: Vec::new(), classical_bits: 0, output_relabeling: None })
    }

    pub fn with_gates(n_qubits: usize, gates: impl IntoIterator<Item = Gate>) -> CircuitResult<Self> {
        let mut c = Self::new(n_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> CircuitResult<()> {
        let qs = gate.qubits();
        for &q in &qs {
            if q >= self.n_qubits {
                return Err(CircuitError::QubitOutOfRange { gate: gate.to_string(), qubit: q + 1, n: self.n_qubits });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(CircuitError::RepeatedQubit(gate.to_string()));
        }
        match gate {
            Gate::ControlledR { d, .. } | Gate::ConditionalR { d, .. } if d == 0 => {
                return Err(CircuitError::BadPhaseIndex(d));
            }
            Gate::MeasureZ { bit, .. } => self.classical_bits = self.classical_bits.max(bit + 1),
            Gate::ConditionalR { bit, .. } if bit >= self.classical_bits => {
                return Err(CircuitError::UnsetClassicalBit { bit });
            }
            _ => {}
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn set_output_relabeling(&mut self, perm: Vec<usize>) -> CircuitResult<()> {
        if !is_permutation(&perm, self.n_qubits) {
            return Err(CircuitError::BadRelabeling(perm));
        }
        self.output_relabeling = Some(perm);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn classical_bits(&self) -> usize {
        self.classical_bits
    }

    pub fn output_relabeling(&self) -> Option<&[usize]> {
        self.output_relabeling.as_deref()
    }

    pub fn is_semiclassical(&self) -> bool {
        self.gates.iter().any(Gate::is_measurement)
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        if let Some(perm) = &self.output_relabeling {
            let labels: Vec<String> = perm.iter().map(|p| (p + 1).to_string()).collect();
            out.push_str(&format!("RELABEL {}\n", labels.join(" ")));
        }
        out
    }
}

pub(crate) fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Bit-reversal relabeling `[n−1, …, 1, 0]`.
pub fn bit_reversal(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

/// Discrete Fourier matrix: entry `[y][x] = e^{2πixy/N}/√N`, `N = 2^n`.
pub fn qft_matrix(n: usize) -> CircuitResult<CMatrix> {
    check_qubits(n)?;
    let dim = 1usize << n;
    let norm = 1.0 / (dim as f64).sqrt();
    Ok(CMatrix::from_fn(dim, dim, |y, x| {
        // Reduce xy mod N first so the phase argument stays small.
        let k = (x * y) % dim;
        C64::from_polar(norm, 2.0 * PI * k as f64 / dim as f64)
    }))
}

/// QFT network in gate order: for each qubit `j`, a Hadamard followed by
/// controlled-R_d from every later qubit `k` (`d = k − j`). With
/// `include_swaps` the bit reversal is appended as swaps; otherwise it is
/// recorded as output relabeling.
pub fn build_qft_circuit(n: usize, include_swaps: bool) -> CircuitResult<QuantumCircuit> {
    let mut c = QuantumCircuit::new(n)?;
    for j in 0..n {
        c.push(Gate::Hadamard { target: j })?;
        for k in (j + 1)..n {
            c.push(Gate::ControlledR { control: k, target: j, d: (k - j) as u32 })?;
        }
    }
    if include_swaps {
        for i in 0..n / 2 {
            c.push(Gate::Swap { a: i, b: n - 1 - i })?;
        }
    } else if n > 1 {
        c.set_output_relabeling(bit_reversal(n))?;
    }
    Ok(c)
}

/// Measurement-conditioned QFT: each qubit is Hadamard-ed and measured, and
/// its classical bit conditions `R_d` rotations on the later qubits. Only
/// single-qubit gates appear. Bit `j` is the `j`-th least significant bit of
/// the outcome (recorded as bit-reversal relabeling).
pub fn build_semiclassical_qft_circuit(n: usize) -> CircuitResult<QuantumCircuit> {
    let mut c = QuantumCircuit::new(n)?;
    for j in 0..n {
        c.push(Gate::Hadamard { target: j })?;
        c.push(Gate::MeasureZ { target: j, bit: j })?;
        for k in (j + 1)..n {
            c.push(Gate::ConditionalR { target: k, d: (k - j) as u32, bit: j })?;
        }
    }
    if n > 1 {
        c.set_output_relabeling(bit_reversal(n))?;
    }
    Ok(c)
}

/// Matrix of one coherent gate on an `n`-qubit register.
pub fn gate_matrix(gate: &Gate, n: usize) -> CircuitResult<CMatrix> {
    let dim = 1usize << n;
    match *gate {
        Gate::Hadamard { target } => Ok(qstate::embed_single(&hadamard_matrix(), target, n)),
        Gate::ControlledR { control, target, d } => {
            let phase = C64::from_polar(1.0, r_phase(d));
            let mut m = CMatrix::identity(dim, dim);
            for x in 0..dim {
                if bit(x, control, n) == 1 && bit(x, target, n) == 1 {
                    m[(x, x)] = phase;
                }
            }
            Ok(m)
        }
        Gate::Swap { a, b } => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.swap(a, b);
            Ok(permutation_matrix(&perm))
        }
        Gate::MeasureZ { .. } | Gate::ConditionalR { .. } => Err(CircuitError::MeasurementInUnitary(gate.to_string())),
    }
}

/// Ordered product of the gate matrices (first gate acts first). Output
/// relabeling metadata is not applied.
pub fn circuit_unitary(c: &QuantumCircuit) -> CircuitResult<CMatrix> {
    let dim = 1usize << c.n_qubits;
    c.gates.iter().try_fold(CMatrix::identity(dim, dim), |acc, g| Ok(gate_matrix(g, c.n_qubits)? * acc))
}

/// `circuit_unitary` followed by the recorded output relabeling.
pub fn circuit_unitary_relabeled(c: &QuantumCircuit) -> CircuitResult<CMatrix> {
    let u = circuit_unitary(c)?;
    Ok(match &c.output_relabeling {
        Some(perm) => permutation_matrix(perm) * u,
        None => u,
    })
}

fn apply_single_in_place(amps: &mut [C64], m: &CMatrix, target: usize, n: usize) {
    let stride = 1usize << (n - 1 - target);
    for x in 0..amps.len() {
        if x & stride == 0 {
            let (a0, a1) = (amps[x], amps[x | stride]);
            amps[x] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
            amps[x | stride] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
        }
    }
}

/// One shot through a circuit that may contain measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    /// Classical bits in the order they were written.
    pub bits: Vec<u8>,
    /// Integer outcome read through the output relabeling, or the raw
    /// classical register (bit 0 most significant) without one.
    pub outcome: usize,
    pub collapsed: StateVector,
}

/// Run `c` on `state` once, collapsing at each measurement.
pub fn run_circuit_shot<R: Rng + ?Sized>(c: &QuantumCircuit, state: &StateVector, rng: &mut R) -> CircuitResult<ShotRecord> {
    let n = c.n_qubits;
    if state.n_qubits() != n {
        return Err(QStateError::DimensionMismatch { expected: 1 << n, got: state.dim() }.into());
    }
    let mut amps: Vec<C64> = state.amplitudes().iter().copied().collect();
    let mut bits: Vec<Option<u8>> = vec![None; c.classical_bits];
    for g in &c.gates {
        match *g {
            Gate::Hadamard { target } => apply_single_in_place(&mut amps, &hadamard_matrix(), target, n),
            Gate::MeasureZ { target, bit: slot } => {
                let p1: f64 = amps.iter().enumerate().filter(|(x, _)| bit(*x, target, n) == 1).map(|(_, a)| a.norm_sqr()).sum();
                let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                let outcome = if rng.random::<f64>() * total < p1 { 1 } else { 0 };
                let kept = if outcome == 1 { p1 } else { total - p1 };
                let scale = 1.0 / kept.sqrt();
                for (x, a) in amps.iter_mut().enumerate() {
                    if bit(x, target, n) == outcome {
                        *a *= scale;
                    } else {
                        *a = C64::new(0.0, 0.0);
                    }
                }
                bits[slot] = Some(outcome as u8);
            }
            Gate::ConditionalR { target, d, bit: slot } => {
                let value = bits[slot].ok_or(CircuitError::UnsetClassicalBit { bit: slot })?;
                if value == 1 {
                    apply_single_in_place(&mut amps, &r_matrix(d), target, n);
                }
            }
            ref coherent => {
                let m = gate_matrix(coherent, n)?;
                let v = StateVector::new(amps)?.apply_unchecked(&m);
                amps = v.amplitudes().iter().copied().collect();
            }
        }
    }
    let bits: Vec<u8> = bits.into_iter().map(|b| b.unwrap_or(0)).collect();
    let outcome = match &c.output_relabeling {
        Some(perm) if bits.len() == n => perm.iter().fold(0usize, |acc, &p| (acc << 1) | bits[p] as usize),
        _ => bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize),
    };
    Ok(ShotRecord { bits, outcome, collapsed: StateVector::new(amps)? })
}

/// One shot of the semiclassical QFT; outcome `y` is distributed as `|⟨y|F|ψ⟩|²`.
pub fn run_semiclassical_qft<R: Rng + ?Sized>(state: &StateVector, rng: &mut R) -> CircuitResult<ShotRecord> {
    let c = build_semiclassical_qft_circuit(state.n_qubits())?;
    run_circuit_shot(&c, state, rng)
}

/// `shots` outcomes of the semiclassical QFT, deterministic in `seed`.
pub fn sample_semiclassical_qft(state: &StateVector, seed: u64, shots: usize) -> CircuitResult<Vec<usize>> {
    let c = build_semiclassical_qft_circuit(state.n_qubits())?;
    let mut rng = qstate::seeded_rng(seed);
    (0..shots).map(|_| run_circuit_shot(&c, state, &mut rng).map(|s| s.outcome)).collect()
}

fn parse_index(tok: &str, line: usize) -> CircuitResult<usize> {
    let v: usize = tok.parse().map_err(|_| CircuitError::Parse { line, message: format!("expected qubit number, got `{tok}`") })?;
    if v == 0 {
        return Err(CircuitError::Parse { line, message: "qubit numbers start at 1".into() });
    }
    Ok(v - 1)
}

fn parse_keyed(tok: &str, key: &str, line: usize) -> CircuitResult<usize> {
    tok.strip_prefix(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CircuitError::Parse { line, message: format!("expected `{key}<number>`, got `{tok}`") })
}

pub fn parse_circuit(text: &str) -> CircuitResult<QuantumCircuit> {
    let mut circuit: Option<QuantumCircuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stmt = raw.split('#').next().unwrap_or("").trim();
        if stmt.is_empty() {
            continue;
        }
        let toks: Vec<&str> = stmt.split_whitespace().collect();
        let arity = |k: usize| -> CircuitResult<()> {
            if toks.len() != k + 1 {
                Err(CircuitError::Parse { line, message: format!("`{}` takes {k} arguments", toks[0]) })
            } else {
                Ok(())
            }
        };
        if toks[0].eq_ignore_ascii_case("qubits") {
            arity(1)?;
            if circuit.is_some() {
                return Err(CircuitError::Parse { line, message: "duplicate `qubits` header".into() });
            }
            let n = toks[1].parse().map_err(|_| CircuitError::Parse { line, message: "bad qubit count".into() })?;
            circuit = Some(QuantumCircuit::new(n)?);
            continue;
        }
        let c = circuit.as_mut().ok_or(CircuitError::Parse { line, message: "missing `qubits` header".into() })?;
        let gate = match toks[0].to_ascii_uppercase().as_str() {
            "H" => {
                arity(1)?;
                Gate::Hadamard { target: parse_index(toks[1], line)? }
            }
            "CR" => {
                arity(3)?;
                Gate::ControlledR {
                    control: parse_index(toks[1], line)?,
                    target: parse_index(toks[2], line)?,
                    d: parse_keyed(toks[3], "d=", line)? as u32,
                }
            }
            "SWAP" => {
                arity(2)?;
                Gate::Swap { a: parse_index(toks[1], line)?, b: parse_index(toks[2], line)? }
            }
            "MEASURE" => {
                arity(2)?;
                Gate::MeasureZ { target: parse_index(toks[1], line)?, bit: parse_keyed(toks[2], "c=", line)? }
            }
            "CRC" => {
                arity(3)?;
                Gate::ConditionalR {
                    target: parse_index(toks[1], line)?,
                    d: parse_keyed(toks[2], "d=", line)? as u32,
                    bit: parse_keyed(toks[3], "c=", line)?,
                }
            }
            "RELABEL" => {
                let perm = toks[1..].iter().map(|t| parse_index(t, line)).collect::<CircuitResult<Vec<_>>>()?;
                c.set_output_relabeling(perm).map_err(|e| CircuitError::Parse { line, message: e.to_string() })?;
                continue;
            }
            other => return Err(CircuitError::Parse { line, message: format!("unknown statement `{other}`") }),
        };
        c.push(gate).map_err(|e| CircuitError::Parse { line, message: e.to_string() })?;
    }
    circuit.ok_or(CircuitError::Parse { line: 0, message: "empty circuit text".into() })
}

impl std::str::FromStr for QuantumCircuit {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_circuit(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{max_abs_diff, unitarity_residual, Measurable};

    #[test]
    fn qft_of_one_qubit_is_hadamard() {
        assert!(max_abs_diff(&qft_matrix(1).unwrap(), &hadamard_matrix()) < 1e-15);
    }

    #[test]
    fn qft_first_column_uniform() {
        let f = qft_matrix(3).unwrap();
        for y in 0..8 {
            assert!((f[(y, 0)] - C64::new(1.0 / 8f64.sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn qft_range_checked() {
        assert!(qft_matrix(0).is_err());
        assert!(matches!(qft_matrix(13), Err(CircuitError::State(QStateError::Capacity { .. }))));
    }

    #[test]
    fn qft_unitary_up_to_eight_qubits() {
        for n in 1..=8 {
            assert!(unitarity_residual(&qft_matrix(n).unwrap()) <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn single_qubit_qft_circuit_is_one_hadamard() {
        let c = build_qft_circuit(1, true).unwrap();
        assert_eq!(c.gates(), &[Gate::Hadamard { target: 0 }]);
        assert_eq!(c.output_relabeling(), None);
    }

    #[test]
    fn gate_counts() {
        for n in 1..=6 {
            let c = build_qft_circuit(n, false).unwrap();
            let h = c.gates().iter().filter(|g| matches!(g, Gate::Hadamard { .. })).count();
            let cr = c.gates().iter().filter(|g| matches!(g, Gate::ControlledR { .. })).count();
            assert_eq!((h, cr), (n, n * (n - 1) / 2));
        }
    }

    #[test]
    fn circuit_reproduces_qft_matrix() {
        for n in 1..=6 {
            let f = qft_matrix(n).unwrap();
            let with_swaps = circuit_unitary(&build_qft_circuit(n, true).unwrap()).unwrap();
            let relabeled = circuit_unitary_relabeled(&build_qft_circuit(n, false).unwrap()).unwrap();
            assert!(max_abs_diff(&with_swaps, &f) < 1e-12, "n={n}");
            assert!(max_abs_diff(&relabeled, &f) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn semiclassical_matches_qft_distribution() {
        // Superposition with non-trivial phases on three qubits.
        let amps: Vec<C64> = (0..8).map(|x| C64::from_polar(1.0 + x as f64, 0.7 * x as f64 * x as f64)).collect();
        let psi = StateVector::new(amps).unwrap().normalized().unwrap();
        let expected = psi.apply_unitary(&qft_matrix(3).unwrap()).unwrap().measure_distribution().unwrap();
        let shots = 20000;
        let mut counts = [0usize; 8];
        for y in sample_semiclassical_qft(&psi, 11, shots).unwrap() {
            counts[y] += 1;
        }
        for y in 0..8 {
            let p = expected[y];
            let sigma = (p * (1.0 - p) / shots as f64).sqrt();
            assert!((counts[y] as f64 / shots as f64 - p).abs() < 5.0 * sigma + 1e-9, "y={y}");
        }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = QuantumCircuit::new(2).unwrap();
        assert_eq!(circuit_unitary(&c).unwrap(), CMatrix::identity(4, 4));
    }

    #[test]
    fn first_qubit_hadamard_embedding() {
        let c = QuantumCircuit::with_gates(3, [Gate::Hadamard { target: 0 }]).unwrap();
        let expected = qstate::kron_all([&hadamard_matrix(), &CMatrix::identity(2, 2), &CMatrix::identity(2, 2)]);
        assert!(max_abs_diff(&circuit_unitary(&c).unwrap(), &expected) < 1e-15);
    }

    #[test]
    fn measurement_rejected_by_circuit_unitary() {
        let c = build_semiclassical_qft_circuit(2).unwrap();
        assert!(matches!(circuit_unitary(&c), Err(CircuitError::MeasurementInUnitary(_))));
    }

    #[test]
    fn semiclassical_has_no_two_qubit_gates() {
        for n in 1..=5 {
            let c = build_semiclassical_qft_circuit(n).unwrap();
            assert_eq!(c.two_qubit_gate_count(), 0);
            let h = c.gates().iter().filter(|g| matches!(g, Gate::Hadamard { .. })).count();
            assert_eq!(h, n);
        }
    }

    #[test]
    fn semiclassical_on_zero_state_spreads_over_all_outcomes() {
        let psi = StateVector::basis(3, 0).unwrap();
        let out = sample_semiclassical_qft(&psi, 5, 4000).unwrap();
        let mut counts = [0usize; 8];
        for y in out {
            counts[y] += 1;
        }
        for c in counts {
            // 3σ for p = 1/8 over 4000 shots is about 63.
            assert!((c as f64 - 500.0).abs() < 63.0, "{counts:?}");
        }
    }

    #[test]
    fn rejects_bad_gates() {
        let mut c = QuantumCircuit::new(2).unwrap();
        assert!(matches!(c.push(Gate::Hadamard { target: 2 }), Err(CircuitError::QubitOutOfRange { .. })));
        assert!(matches!(c.push(Gate::Swap { a: 1, b: 1 }), Err(CircuitError::RepeatedQubit(_))));
        assert!(matches!(c.push(Gate::ControlledR { control: 0, target: 1, d: 0 }), Err(CircuitError::BadPhaseIndex(0))));
        assert!(matches!(c.push(Gate::ConditionalR { target: 1, d: 1, bit: 0 }), Err(CircuitError::UnsetClassicalBit { .. })));
    }

    #[test]
    fn text_round_trip() {
        for c in [build_qft_circuit(4, true).unwrap(), build_qft_circuit(3, false).unwrap(), build_semiclassical_qft_circuit(3).unwrap()] {
            assert_eq!(parse_circuit(&c.to_text()).unwrap(), c);
        }
    }

    #[test]
    fn text_parses_documented_examples() {
        let c: QuantumCircuit = "qubits 3\nH 1  # first\nCR 2 1 d=1\nSWAP 1 3\n".parse().unwrap();
        assert_eq!(
            c.gates(),
            &[Gate::Hadamard { target: 0 }, Gate::ControlledR { control: 1, target: 0, d: 1 }, Gate::Swap { a: 0, b: 2 }]
        );
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        match parse_circuit("qubits 2\nH 1\nFOO 2\n") {
            Err(CircuitError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_circuit("H 1"), Err(CircuitError::Parse { line: 1, .. })));
        assert!(matches!(parse_circuit("qubits 2\nH 3"), Err(CircuitError::Parse { line: 2, .. })));
    }

    #[test]
    fn full_qft_distribution_of_basis_state_is_uniform() {
        let f = qft_matrix(3).unwrap();
        let p = StateVector::basis(3, 5).unwrap().apply_unitary(&f).unwrap().measure_distribution().unwrap();
        assert!(p.iter().all(|&v| (v - 0.125).abs() < 1e-14));
    }
}
