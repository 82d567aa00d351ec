//! NMR pulse programs: RF rotations, coupling evolutions, delays and
//! gradients; lowering from gates, peephole simplification, unitary
//! equivalence checks and a text form matching the usual `X_1(π/2)` notation.
//!
//! # Rotation conventions
//!
//! Ops are listed in time order (the first op acts first). With `I_a` the
//! spin-1/2 operators:
//!
//! | op            | propagator              |
//! |---------------|-------------------------|
//! | `X_j(θ)`      | `exp(−iθ I_jx)`         |
//! | `Y_j(θ)`      | `exp(+iθ I_jy)`         |
//! | `Z_j(θ)`      | `exp(−iθ I_jz / 2)`     |
//! | `J_jk(θ)`     | `exp(−iθ I_jz I_kz)`    |
//!
//! These are pinned by two identities that the tests check:
//! `X_j(π) Y_j(π/2)` is the Hadamard up to phase, and
//! `Z_j(π/2^d) Z_k(π/2^d) J_jk(−π/2^d)` is the controlled-`R_d` gate.
//! Free evolution under a coupling `J` for time `t` is `J_jk(−2πJt)`, so a
//! `1/(2J)` delay is `J_jk(−π)`.
//!
//! # Text format
//!
//! Whitespace-separated (or juxtaposed) tokens, spins numbered from 1:
//!
//! ```text
//! X_1(pi)  Y_1(pi/2)  Z_2(-5pi/8)  J_21(-pi/4)  J_3,12(0.5)
//! Gz  delay(0.001)  delay_12(0.0143)  relabel(3 2 1)  frame_1(pi/2)  spins(4)
//! ```
//!
//! Angles are decimals in radians or multiples of π (`pi`, `π`, `-5pi/8`,
//! `3*pi/4`, `−π/2`). `J_ab` needs a comma once a label has two digits.
//! `relabel`, `frame_j` and `spins` carry program metadata: the output
//! relabeling, z-rotations absorbed into the final frame, and the register
//! size when it is larger than the largest label used.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{is_permutation, r_phase, Gate, QuantumCircuit};
use crate::qstate::{bit, embed_single, permutation_matrix, CMatrix, QStateError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error(transparent)]
    State(#[from] QStateError),

    #[error("spin {spin} out of range for a {n}-spin program")]
    SpinOutOfRange { spin: usize, n: usize },

    #[error("coupling J_{0}{0} needs two distinct spins")]
    SameSpin(usize),

    #[error("gate `{0}` has no pulse realization")]
    Unsupported(String),

    #[error("`{0}` has no unitary without a spin system; run it through the spin simulator")]
    NonCoherent(String),

    #[error("relabeling {0:?} is not a permutation of the spins")]
    BadRelabeling(Vec<usize>),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("parse error at column {col}: {message}")]
    Parse { col: usize, message: String },
}

pub type PulseResult<T> = Result<T, PulseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseOp {
    Rf {
        spin: usize,
        axis: Axis,
        angle: f64,
    },
    /// Coupling propagator on the pair `(a, b)`; symmetric in `a`, `b`.
    JEvolve {
        a: usize,
        b: usize,
        angle: f64,
    },
    /// Free evolution. In the idealized model only the coupling of `pair`
    /// acts; without a pair the delay is the identity.
    Delay {
        duration: f64,
        pair: Option<(usize, usize)>,
    },
    Gradient,
}

impl PulseOp {
    pub fn x(spin: usize, angle: f64) -> Self {
        PulseOp::Rf { spin, axis: Axis::X, angle }
    }

    pub fn y(spin: usize, angle: f64) -> Self {
        PulseOp::Rf { spin, axis: Axis::Y, angle }
    }

    pub fn z(spin: usize, angle: f64) -> Self {
        PulseOp::Rf { spin, axis: Axis::Z, angle }
    }

    pub fn j(a: usize, b: usize, angle: f64) -> Self {
        PulseOp::JEvolve { a, b, angle }
    }

    pub fn delay(duration: f64, pair: Option<(usize, usize)>) -> Self {
        PulseOp::Delay { duration, pair }
    }

    pub fn spins(&self) -> Vec<usize> {
        match *self {
            PulseOp::Rf { spin, .. } => vec![spin],
            PulseOp::JEvolve { a, b, .. } => vec![a, b],
            PulseOp::Delay { pair: Some((a, b)), .. } => vec![a, b],
            PulseOp::Delay { pair: None, .. } | PulseOp::Gradient => vec![],
        }
    }

    pub fn is_coherent(&self) -> bool {
        matches!(self, PulseOp::Rf { .. } | PulseOp::JEvolve { .. })
    }

    /// Diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        matches!(self, PulseOp::Rf { axis: Axis::Z, .. } | PulseOp::JEvolve { .. })
    }

    fn with_angle(self, angle: f64) -> Self {
        match self {
            PulseOp::Rf { spin, axis, .. } => PulseOp::Rf { spin, axis, angle },
            PulseOp::JEvolve { a, b, .. } => PulseOp::JEvolve { a, b, angle },
            other => other,
        }
    }

    fn angle(&self) -> Option<f64> {
        match *self {
            PulseOp::Rf { angle, .. } | PulseOp::JEvolve { angle, .. } => Some(angle),
            _ => None,
        }
    }
}

fn unordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl fmt::Display for PulseOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PulseOp::Rf { spin, axis, angle } => write!(f, "{}_{}({})", axis.symbol(), spin + 1, format_angle(angle)),
            PulseOp::JEvolve { a, b, angle } => write!(f, "J_{}({})", pair_label(a, b), format_angle(angle)),
            PulseOp::Delay { duration, pair: None } => write!(f, "delay({duration})"),
            PulseOp::Delay { duration, pair: Some((a, b)) } => write!(f, "delay_{}({duration})", pair_label(a, b)),
            PulseOp::Gradient => write!(f, "Gz"),
        }
    }
}

fn pair_label(a: usize, b: usize) -> String {
    if a < 9 && b < 9 {
        format!("{}{}", a + 1, b + 1)
    } else {
        format!("{},{}", a + 1, b + 1)
    }
}

const PI_DENOMINATORS: [u32; 14] = [1, 2, 3, 4, 5, 6, 8, 12, 16, 24, 32, 64, 128, 256];

/// Multiple of π when that spelling parses back to the same bits, else the
/// shortest round-trip decimal.
pub fn format_angle(angle: f64) -> String {
    if angle == 0.0 {
        return "0".into();
    }
    for d in PI_DENOMINATORS {
        let k = (angle * d as f64 / PI).round();
        if k != 0.0 && k.abs() < 1e6 && k * PI / d as f64 == angle {
            let k = k as i64;
            let coef = match k {
                1 => String::new(),
                -1 => "-".into(),
                _ => k.to_string(),
            };
            return if d == 1 { format!("{coef}pi") } else { format!("{coef}pi/{d}") };
        }
    }
    format!("{angle}")
}

/// Reduce into `(−2π, 2π]`. Every op is periodic in 4π, so this is exact.
pub fn normalize_angle(angle: f64) -> f64 {
    if angle > -2.0 * PI && angle <= 2.0 * PI {
        return angle;
    }
    let t = angle.rem_euclid(4.0 * PI);
    if t > 2.0 * PI {
        t - 4.0 * PI
    } else {
        t
    }
}

const ZERO_ANGLE_TOL: f64 = 1e-12;

/// Identity up to a global phase.
fn is_identity_op(op: &PulseOp) -> bool {
    match *op {
        PulseOp::Rf { axis: Axis::X | Axis::Y, angle, .. } => {
            let a = normalize_angle(angle);
            a.abs() < ZERO_ANGLE_TOL || (a.abs() - 2.0 * PI).abs() < ZERO_ANGLE_TOL
        }
        PulseOp::Rf { angle, .. } | PulseOp::JEvolve { angle, .. } => normalize_angle(angle).abs() < ZERO_ANGLE_TOL,
        PulseOp::Delay { duration, .. } => duration == 0.0,
        PulseOp::Gradient => false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseProgram {
    n_spins: usize,
    ops: Vec<PulseOp>,
    /// `relabeling[i]` is the physical spin read as output spin `i`.
    relabeling: Vec<usize>,
    /// Z angle per spin applied after all ops (and before relabeling).
    final_frame: Vec<f64>,
}

impl PulseProgram {
    pub fn new(n_spins: usize) -> Self {
        Self { n_spins, ops: Vec::new(), relabeling: (0..n_spins).collect(), final_frame: vec![0.0; n_spins] }
    }

    pub fn with_ops(n_spins: usize, ops: impl IntoIterator<Item = PulseOp>) -> PulseResult<Self> {
        let mut p = Self::new(n_spins);
        for op in ops {
            p.push(op)?;
        }
        Ok(p)
    }

    pub fn push(&mut self, op: PulseOp) -> PulseResult<()> {
        let spins = op.spins();
        if let Some(&spin) = spins.iter().find(|&&s| s >= self.n_spins) {
            return Err(PulseError::SpinOutOfRange { spin, n: self.n_spins });
        }
        if spins.len() == 2 && spins[0] == spins[1] {
            return Err(PulseError::SameSpin(spins[0] + 1));
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn extend(&mut self, ops: impl IntoIterator<Item = PulseOp>) -> PulseResult<()> {
        ops.into_iter().try_for_each(|op| self.push(op))
    }

    pub fn set_relabeling(&mut self, perm: Vec<usize>) -> PulseResult<()> {
        if !is_permutation(&perm, self.n_spins) {
            return Err(PulseError::BadRelabeling(perm));
        }
        self.relabeling = perm;
        Ok(())
    }

    pub fn set_final_frame(&mut self, spin: usize, angle: f64) -> PulseResult<()> {
        if spin >= self.n_spins {
            return Err(PulseError::SpinOutOfRange { spin, n: self.n_spins });
        }
        self.final_frame[spin] = normalize_angle(angle);
        Ok(())
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn ops(&self) -> &[PulseOp] {
        &self.ops
    }

    pub fn relabeling(&self) -> &[usize] {
        &self.relabeling
    }

    pub fn has_relabeling(&self) -> bool {
        self.relabeling.iter().enumerate().any(|(i, &p)| i != p)
    }

    pub fn final_frame(&self) -> &[f64] {
        &self.final_frame
    }

    pub fn has_final_frame(&self) -> bool {
        self.final_frame.iter().any(|&a| a != 0.0)
    }

    /// RF and coupling ops (frame rotations absorbed at the end are not ops).
    pub fn coherent_op_count(&self) -> usize {
        self.ops.iter().filter(|op| op.is_coherent()).count()
    }

    pub fn to_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        let max_label = self
            .ops
            .iter()
            .flat_map(|op| op.spins())
            .chain(self.final_frame.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(s, _)| s))
            .map(|s| s + 1)
            .max()
            .unwrap_or(0)
            .max(if self.has_relabeling() { self.n_spins } else { 0 });
        if max_label != self.n_spins {
            parts.push(format!("spins({})", self.n_spins));
        }
        parts.extend(self.ops.iter().map(|op| op.to_string()));
        for (s, &a) in self.final_frame.iter().enumerate() {
            if a != 0.0 {
                parts.push(format!("frame_{}({})", s + 1, format_angle(a)));
            }
        }
        if self.has_relabeling() {
            let labels: Vec<String> = self.relabeling.iter().map(|p| (p + 1).to_string()).collect();
            parts.push(format!("relabel({})", labels.join(" ")));
        }
        parts.join(" ")
    }
}

impl fmt::Display for PulseProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Hadamard as `X(π)` then `Y(π/2)`.
pub fn hadamard_pulses(spin: usize) -> [PulseOp; 2] {
    [PulseOp::x(spin, PI), PulseOp::y(spin, PI / 2.0)]
}

/// The other Hadamard spelling, `Y(−π/2)` then `X(π)`.
pub fn hadamard_pulses_alt(spin: usize) -> [PulseOp; 2] {
    [PulseOp::y(spin, -PI / 2.0), PulseOp::x(spin, PI)]
}

/// Controlled-`R_d` on (control, target); `d = 0` gives controlled-Z.
pub fn controlled_r_pulses(control: usize, target: usize, d: u32) -> [PulseOp; 3] {
    let a = r_phase(d);
    [PulseOp::z(control, a), PulseOp::z(target, a), PulseOp::j(control, target, -a)]
}

fn cnot_pulses(control: usize, target: usize) -> Vec<PulseOp> {
    let mut ops = hadamard_pulses(target).to_vec();
    ops.extend(controlled_r_pulses(control, target, 0));
    ops.extend(hadamard_pulses(target));
    ops
}

pub fn lower_gate(g: &Gate) -> PulseResult<Vec<PulseOp>> {
    match *g {
        Gate::Hadamard { target } => Ok(hadamard_pulses(target).to_vec()),
        Gate::ControlledR { control, target, d } => Ok(controlled_r_pulses(control, target, d).to_vec()),
        Gate::Swap { a, b } => Ok([cnot_pulses(a, b), cnot_pulses(b, a), cnot_pulses(a, b)].concat()),
        Gate::MeasureZ { .. } | Gate::ConditionalR { .. } => Err(PulseError::Unsupported(g.to_string())),
    }
}

/// Lower every gate. With `elide_swaps`, swaps become a change of which
/// physical spin holds each logical qubit, reported as the relabeling.
pub fn compile(c: &QuantumCircuit, elide_swaps: bool) -> PulseResult<PulseProgram> {
    let n = c.n_qubits();
    let mut p = PulseProgram::new(n);
    let mut phys: Vec<usize> = (0..n).collect();
    for g in c.gates() {
        let mapped = match *g {
            Gate::Swap { a, b } if elide_swaps => {
                phys.swap(a, b);
                continue;
            }
            Gate::Hadamard { target } => Gate::Hadamard { target: phys[target] },
            Gate::ControlledR { control, target, d } => Gate::ControlledR { control: phys[control], target: phys[target], d },
            Gate::Swap { a, b } => Gate::Swap { a: phys[a], b: phys[b] },
            other => other,
        };
        p.extend(lower_gate(&mapped)?)?;
    }
    // Output relabeling already recorded on the circuit composes after ours.
    let perm = match c.output_relabeling() {
        Some(out) => out.iter().map(|&l| phys[l]).collect(),
        None => phys,
    };
    p.set_relabeling(perm)?;
    Ok(p)
}

fn commutes(a: &PulseOp, b: &PulseOp) -> bool {
    if matches!(a, PulseOp::Delay { .. } | PulseOp::Gradient) || matches!(b, PulseOp::Delay { .. } | PulseOp::Gradient) {
        return false;
    }
    if a.is_diagonal() && b.is_diagonal() {
        return true;
    }
    let sa = a.spins();
    !b.spins().iter().any(|s| sa.contains(s))
}

fn mergeable(a: &PulseOp, b: &PulseOp) -> bool {
    match (*a, *b) {
        (PulseOp::Rf { spin: s1, axis: a1, .. }, PulseOp::Rf { spin: s2, axis: a2, .. }) => s1 == s2 && a1 == a2,
        (PulseOp::JEvolve { a: a1, b: b1, .. }, PulseOp::JEvolve { a: a2, b: b2, .. }) => unordered(a1, b1) == unordered(a2, b2),
        _ => false,
    }
}

/// One rewrite; `true` if anything changed.
fn simplify_step(p: &mut PulseProgram) -> bool {
    for op in p.ops.iter_mut() {
        if let Some(a) = op.angle() {
            let n = normalize_angle(a);
            if n != a {
                *op = op.with_angle(n);
                return true;
            }
        }
    }
    if let Some(i) = p.ops.iter().position(is_identity_op) {
        p.ops.remove(i);
        return true;
    }
    for i in 1..p.ops.len() {
        let op = p.ops[i];
        if !op.is_coherent() {
            continue;
        }
        for j in (0..i).rev() {
            if mergeable(&p.ops[j], &op) {
                let sum = normalize_angle(p.ops[j].angle().unwrap_or(0.0) + op.angle().unwrap_or(0.0));
                p.ops[j] = p.ops[j].with_angle(sum);
                p.ops.remove(i);
                return true;
            }
            if !commutes(&p.ops[j], &op) {
                break;
            }
        }
    }
    for i in 0..p.ops.len() {
        if let PulseOp::Rf { spin, axis: Axis::Z, angle } = p.ops[i] {
            if p.ops[i + 1..].iter().all(|later| commutes(later, &p.ops[i])) {
                p.final_frame[spin] = normalize_angle(p.final_frame[spin] + angle);
                p.ops.remove(i);
                return true;
            }
        }
    }
    false
}

/// Apply the rewrite rules until nothing changes: angle normalization,
/// dropping identities, moving ops left past commuting ops to merge with a
/// like op, and absorbing z-rotations that commute with everything after
/// them into the final frame. Delays and gradients are barriers.
pub fn simplify(p: &PulseProgram) -> PulseProgram {
    let mut out = p.clone();
    while simplify_step(&mut out) {}
    out
}

fn rf_matrix(axis: Axis, angle: f64) -> CMatrix {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let z = C64::new(0.0, 0.0);
    match axis {
        // cos − i sin σx
        Axis::X => CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)]),
        // cos + i sin σy
        Axis::Y => CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(c, 0.0)]),
        Axis::Z => CMatrix::from_row_slice(2, 2, &[C64::from_polar(1.0, -angle / 4.0), z, z, C64::from_polar(1.0, angle / 4.0)]),
    }
}

fn sign(x: usize, spin: usize, n: usize) -> f64 {
    if bit(x, spin, n) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal of `J_ab(θ)` on `n` spins.
pub fn coupling_phases(a: usize, b: usize, angle: f64, n: usize) -> Vec<C64> {
    (0..1usize << n).map(|x| C64::from_polar(1.0, -angle * sign(x, a, n) * sign(x, b, n) / 4.0)).collect()
}

/// Propagator of a coherent op on `n` spins.
pub fn op_unitary(op: &PulseOp, n: usize) -> PulseResult<CMatrix> {
    if let Some(&spin) = op.spins().iter().find(|&&s| s >= n) {
        return Err(PulseError::SpinOutOfRange { spin, n });
    }
    match *op {
        PulseOp::Rf { spin, axis, angle } => Ok(embed_single(&rf_matrix(axis, angle), spin, n)),
        PulseOp::JEvolve { a, b, angle } => Ok(CMatrix::from_diagonal(&coupling_phases(a, b, angle, n).into())),
        _ => Err(PulseError::NonCoherent(op.to_string())),
    }
}

fn frame_unitary(p: &PulseProgram) -> PulseResult<CMatrix> {
    let dim = 1usize << p.n_spins;
    let mut u = CMatrix::identity(dim, dim);
    for (spin, &a) in p.final_frame.iter().enumerate() {
        if a != 0.0 {
            u = op_unitary(&PulseOp::z(spin, a), p.n_spins)? * u;
        }
    }
    Ok(u)
}

/// `P · F · U_k ⋯ U_1` for ops `U_1 … U_k`, final frame `F` and relabeling `P`.
pub fn program_unitary(p: &PulseProgram) -> PulseResult<CMatrix> {
    let dim = 1usize << p.n_spins;
    let mut u = CMatrix::identity(dim, dim);
    for op in &p.ops {
        u = op_unitary(op, p.n_spins)? * u;
    }
    u = frame_unitary(p)? * u;
    if p.has_relabeling() {
        u = permutation_matrix(&p.relabeling) * u;
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `|Tr(U†V)| / dim`.
    pub fidelity: f64,
    /// `arg Tr(U†V)`: `V ≈ e^{i·phase} U`.
    pub phase: f64,
    pub pass: bool,
}

/// Global-phase-invariant comparison; passes iff fidelity ≥ 1 − tolerance.
pub fn assert_equivalent(u: &CMatrix, v: &CMatrix, tolerance: f64) -> PulseResult<EquivalenceReport> {
    if u.shape() != v.shape() || u.nrows() != u.ncols() {
        return Err(PulseError::DimensionMismatch(u.nrows(), v.nrows()));
    }
    let t = (u.adjoint() * v).trace();
    let fidelity = t.norm() / u.nrows() as f64;
    Ok(EquivalenceReport { fidelity, phase: t.arg(), pass: fidelity >= 1.0 - tolerance })
}

/// The reduced three-spin QFT sequence, followed by the 1↔3 relabeling.
pub const QFT3_REFERENCE_TEXT: &str =
    "X_1(-5pi/8) Y_1(pi/2) J_21(-pi/2) J_31(-pi/4) X_2(-pi/2) Y_2(-pi/4) X_2(-pi/4) Y_2(pi/2) J_32(-pi/2) Y_3(-pi/2) X_3(-5pi/8)";

pub fn qft3_reference_program() -> PulseProgram {
    let mut p = parse_pulse_text(QFT3_REFERENCE_TEXT).expect("reference text parses");
    p.set_relabeling(vec![2, 1, 0]).expect("valid permutation");
    p
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.chars().collect(), pos: 0, _src: src }
    }

    fn err<T>(&self, message: impl Into<String>) -> PulseResult<T> {
        Err(PulseError::Parse { col: self.pos + 1, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> PulseResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let wc: Vec<char> = w.chars().collect();
        if self.chars[self.pos..].starts_with(&wc) {
            self.pos += wc.len();
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn label(&mut self) -> PulseResult<usize> {
        let d = self.digits();
        match d.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => self.err("expected a spin number ≥ 1"),
        }
    }

    fn pair(&mut self) -> PulseResult<(usize, usize)> {
        let start = self.pos;
        let first = self.digits();
        if self.eat(',') {
            self.pos = start;
            let a = self.label()?;
            self.expect(',')?;
            let b = self.label()?;
            return Ok((a, b));
        }
        let ds: Vec<u32> = first.chars().filter_map(|c| c.to_digit(10)).collect();
        match ds.as_slice() {
            [a, b] if *a > 0 && *b > 0 => Ok((*a as usize - 1, *b as usize - 1)),
            _ => {
                self.pos = start;
                self.err("expected a spin pair such as `21` or `3,12`")
            }
        }
    }

    fn number(&mut self) -> PulseResult<f64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if self.peek().is_some_and(|c| c == 'e' || c == 'E') {
            self.pos += 1;
            if self.peek().is_some_and(|c| c == '+' || c == '-') {
                self.pos += 1;
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().or_else(|_| {
            self.pos = start;
            self.err("expected a number")
        })
    }

    fn eat_pi(&mut self) -> bool {
        self.eat_word("pi") || self.eat('π')
    }

    fn signed(&mut self) -> f64 {
        if self.eat('-') || self.eat('−') {
            -1.0
        } else {
            self.eat('+');
            1.0
        }
    }

    /// `[sign] (number ['*'] [pi] | pi) ['/' number]`.
    fn angle(&mut self) -> PulseResult<f64> {
        self.skip_ws();
        let sign = self.signed();
        let (coef, has_pi) = if self.eat_pi() {
            (1.0, true)
        } else {
            let c = self.number()?;
            let star = self.eat('*');
            let p = self.eat_pi();
            if star && !p {
                return self.err("expected `pi` after `*`");
            }
            (c, p)
        };
        let value = if has_pi { sign * coef * PI } else { sign * coef };
        let value = if self.eat('/') { value / self.number()? } else { value };
        self.skip_ws();
        Ok(value)
    }

    fn paren<T>(&mut self, inner: impl FnOnce(&mut Self) -> PulseResult<T>) -> PulseResult<T> {
        self.expect('(')?;
        let v = inner(self)?;
        self.skip_ws();
        self.expect(')')?;
        Ok(v)
    }
}

enum Item {
    Op(PulseOp),
    Frame(usize, f64),
    Relabel(Vec<usize>),
    Spins(usize),
}

fn parse_item(cur: &mut Cursor) -> PulseResult<Item> {
    if cur.eat_word("delay") {
        let pair = if cur.eat('_') { Some(cur.pair()?) } else { None };
        let duration = cur.paren(|c| {
            c.skip_ws();
            c.number()
        })?;
        return Ok(Item::Op(PulseOp::Delay { duration, pair }));
    }
    if cur.eat_word("frame_") {
        let spin = cur.label()?;
        return Ok(Item::Frame(spin, cur.paren(Cursor::angle)?));
    }
    if cur.eat_word("relabel") {
        let perm = cur.paren(|c| {
            let mut v = Vec::new();
            loop {
                c.skip_ws();
                c.eat(',');
                c.skip_ws();
                if c.peek() == Some(')') {
                    return Ok(v);
                }
                v.push(c.label()?);
            }
        })?;
        return Ok(Item::Relabel(perm));
    }
    if cur.eat_word("spins") {
        let n = cur.paren(|c| {
            c.skip_ws();
            let d = c.digits();
            d.parse::<usize>().or_else(|_| c.err("expected a spin count"))
        })?;
        return Ok(Item::Spins(n));
    }
    if cur.eat_word("G_z") || cur.eat_word("Gz") {
        return Ok(Item::Op(PulseOp::Gradient));
    }
    match cur.peek() {
        Some(ax @ ('X' | 'Y' | 'Z')) => {
            cur.pos += 1;
            cur.expect('_')?;
            let spin = cur.label()?;
            let angle = cur.paren(Cursor::angle)?;
            let axis = match ax {
                'X' => Axis::X,
                'Y' => Axis::Y,
                _ => Axis::Z,
            };
            Ok(Item::Op(PulseOp::Rf { spin, axis, angle }))
        }
        Some('J') => {
            cur.pos += 1;
            cur.expect('_')?;
            let (a, b) = cur.pair()?;
            let angle = cur.paren(Cursor::angle)?;
            Ok(Item::Op(PulseOp::JEvolve { a, b, angle }))
        }
        Some('G') => {
            cur.pos += 1;
            Ok(Item::Op(PulseOp::Gradient))
        }
        Some(c) => cur.err(format!("unexpected `{c}`")),
        None => cur.err("unexpected end of input"),
    }
}

/// Parse the text form; see the module docs for the grammar.
pub fn parse_pulse_text(text: &str) -> PulseResult<PulseProgram> {
    let mut cur = Cursor::new(text);
    let mut ops = Vec::new();
    let mut frames = Vec::new();
    let mut relabel = None;
    let mut declared = None;
    loop {
        cur.skip_ws();
        if cur.peek().is_none() {
            break;
        }
        let col = cur.pos + 1;
        match parse_item(&mut cur)? {
            Item::Op(op) => ops.push((col, op)),
            Item::Frame(s, a) => frames.push((col, s, a)),
            Item::Relabel(p) => relabel = Some((col, p)),
            Item::Spins(n) => declared = Some(n),
        }
    }
    let used = ops
        .iter()
        .flat_map(|(_, op)| op.spins())
        .chain(frames.iter().map(|f| f.1))
        .map(|s| s + 1)
        .max()
        .unwrap_or(0)
        .max(relabel.as_ref().map_or(0, |(_, p)| p.len()));
    let n = declared.unwrap_or(used);
    let mut p = PulseProgram::new(n);
    let at = |col: usize, e: PulseError| PulseError::Parse { col, message: e.to_string() };
    for (col, op) in ops {
        p.push(op).map_err(|e| at(col, e))?;
    }
    for (col, s, a) in frames {
        p.set_final_frame(s, a).map_err(|e| at(col, e))?;
    }
    if let Some((col, perm)) = relabel {
        p.set_relabeling(perm).map_err(|e| at(col, e))?;
    }
    Ok(p)
}

impl std::str::FromStr for PulseProgram {
    type Err = PulseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pulse_text(s)
    }
}
