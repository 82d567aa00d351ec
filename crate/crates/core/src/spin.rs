//! Density-matrix simulation of pulse programs on a weakly coupled spin
//! system: molecule parameters, thermal and pseudo-pure preparation,
//! gradients, delays and the ensemble form of the measurement-conditioned QFT.
//!
//! Spin indices in pulse ops refer to positions in the molecule's active
//! list, so the same program can run on different active subsets.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{bit_reversal, build_semiclassical_qft_circuit, r_phase, CircuitError, Gate};
use crate::pulse::{coupling_phases, hadamard_pulses, op_unitary, PulseError, PulseOp, PulseProgram};
use crate::qstate::{bit, permutation_matrix, CMatrix, DensityKind, DensityMatrix, QStateError, SingleSpin, SpinOperator, C64};

const ALANINE_JSON: &str = include_str!("../data/alanine.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error(transparent)]
    State(#[from] QStateError),

    #[error(transparent)]
    Pulse(#[from] PulseError),

    #[error(transparent)]
    Circuit(#[from] CircuitError),

    #[error("molecule: {0}")]
    Molecule(String),

    #[error("unknown spin label `{0}`")]
    UnknownLabel(String),

    #[error("{what} needs {expected} active spins, the molecule has {got}")]
    WrongSpinCount { what: &'static str, expected: usize, got: usize },

    #[error("state has {got} spins but the molecule has {expected} active")]
    StateMismatch { expected: usize, got: usize },

    #[error("spin {spin} out of range for {n} active spins")]
    SpinOutOfRange { spin: usize, n: usize },

    #[error("no coupling between {0} and {1}; a 1/(2J) delay is undefined")]
    ZeroCoupling(String, String),
}

pub type SpinResult<T> = Result<T, SpinError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSpec {
    pub label: String,
    pub shift_hz: f64,
}

/// Chemical shifts, scalar couplings and the spins that make up the
/// simulated register (in register order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    spins: Vec<SpinSpec>,
    couplings_hz: Vec<Vec<f64>>,
    active: Vec<String>,
    #[serde(skip)]
    active_idx: Vec<usize>,
}

impl MoleculeSpec {
    pub fn new(spins: Vec<SpinSpec>, couplings_hz: Vec<Vec<f64>>, active: Vec<String>) -> SpinResult<Self> {
        let mut m = Self { name: None, spins, couplings_hz, active, active_idx: Vec::new() };
        m.validate()?;
        Ok(m)
    }

    fn validate(&mut self) -> SpinResult<()> {
        let n = self.spins.len();
        if n == 0 {
            return Err(SpinError::Molecule("no spins".into()));
        }
        if self.couplings_hz.len() != n || self.couplings_hz.iter().any(|row| row.len() != n) {
            return Err(SpinError::Molecule(format!("couplings_hz must be {n}×{n}")));
        }
        for i in 0..n {
            if self.couplings_hz[i][i] != 0.0 {
                return Err(SpinError::Molecule(format!("J({0},{0}) must be 0", self.spins[i].label)));
            }
            for j in 0..i {
                if self.couplings_hz[i][j] != self.couplings_hz[j][i] {
                    return Err(SpinError::Molecule(format!(
                        "couplings not symmetric: J({},{})",
                        self.spins[i].label, self.spins[j].label
                    )));
                }
            }
        }
        for (i, s) in self.spins.iter().enumerate() {
            if self.spins[..i].iter().any(|t| t.label == s.label) {
                return Err(SpinError::Molecule(format!("duplicate label `{}`", s.label)));
            }
        }
        let mut idx = Vec::with_capacity(self.active.len());
        for label in &self.active {
            let i = self.spin_index(label)?;
            if idx.contains(&i) {
                return Err(SpinError::Molecule(format!("`{label}` listed twice in active")));
            }
            idx.push(i);
        }
        if idx.is_empty() {
            return Err(SpinError::Molecule("active list is empty".into()));
        }
        self.active_idx = idx;
        Ok(())
    }

    /// The shipped alanine parameters (all four spins active).
    pub fn alanine() -> Self {
        Self::from_json_str(ALANINE_JSON).expect("shipped molecule file is valid")
    }

    pub fn from_json_str(s: &str) -> SpinResult<Self> {
        let mut m: Self = serde_json::from_str(s).map_err(|e| SpinError::Molecule(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn from_path(path: impl AsRef<Path>) -> SpinResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SpinError::Molecule(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("molecule serializes")
    }

    fn spin_index(&self, label: &str) -> SpinResult<usize> {
        self.spins.iter().position(|s| s.label == label).ok_or_else(|| SpinError::UnknownLabel(label.into()))
    }

    /// Same molecule with a different active list.
    pub fn with_active(&self, labels: &[&str]) -> SpinResult<Self> {
        let mut m = self.clone();
        m.active = labels.iter().map(|s| s.to_string()).collect();
        m.validate()?;
        Ok(m)
    }

    /// Same molecule with one coupling replaced (e.g. zeroed by decoupling).
    pub fn with_coupling(&self, a: &str, b: &str, hz: f64) -> SpinResult<Self> {
        let (i, j) = (self.spin_index(a)?, self.spin_index(b)?);
        if i == j {
            return Err(SpinError::Molecule(format!("J({a},{a}) is fixed at 0")));
        }
        let mut m = self.clone();
        m.couplings_hz[i][j] = hz;
        m.couplings_hz[j][i] = hz;
        Ok(m)
    }

    pub fn n_active(&self) -> usize {
        self.active_idx.len()
    }

    pub fn active_labels(&self) -> &[String] {
        &self.active
    }

    pub fn label(&self, spin: usize) -> &str {
        &self.spins[self.active_idx[spin]].label
    }

    /// Register position of `label`.
    pub fn active_position(&self, label: &str) -> SpinResult<usize> {
        self.active.iter().position(|l| l == label).ok_or_else(|| SpinError::UnknownLabel(label.into()))
    }

    pub fn shift_hz(&self, spin: usize) -> f64 {
        self.spins[self.active_idx[spin]].shift_hz
    }

    pub fn coupling_hz(&self, a: usize, b: usize) -> f64 {
        self.couplings_hz[self.active_idx[a]][self.active_idx[b]]
    }

    /// `1/(2|J_ab|)`.
    pub fn half_coupling_delay(&self, a: usize, b: usize) -> SpinResult<f64> {
        let j = self.coupling_hz(a, b);
        if j == 0.0 {
            return Err(SpinError::ZeroCoupling(self.label(a).into(), self.label(b).into()));
        }
        Ok(1.0 / (2.0 * j.abs()))
    }
}

/// Simulation switches; the defaults are the idealized model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Delays evolve every shift and coupling, with π pulses on all spins
    /// at the midpoint and end to refocus the shifts.
    pub strict_delays: bool,
    /// Gradients keep only the diagonal instead of the whole zero-quantum block.
    pub diagonal_gradient: bool,
}

fn check_state(rho: &DensityMatrix, m: &MoleculeSpec) -> SpinResult<()> {
    if rho.n_spins() != m.n_active() {
        return Err(SpinError::StateMismatch { expected: m.n_active(), got: rho.n_spins() });
    }
    Ok(())
}

/// `Σ_i I_iz` over the active spins, as a deviation.
pub fn thermal_state(m: &MoleculeSpec) -> SpinResult<DensityMatrix> {
    let n = m.n_active();
    let dim = 1usize << n;
    let diag: Vec<C64> = (0..dim).map(|x| C64::new((0..n).map(|j| 0.5 - bit(x, j, n) as f64).sum(), 0.0)).collect();
    Ok(DensityMatrix::new(CMatrix::from_diagonal(&diag.into()), DensityKind::Deviation)?)
}

/// Dephase every element whose basis states differ in total magnetization.
/// With `diagonal_only`, zero-quantum coherences go too.
pub fn apply_gradient_with(rho: &DensityMatrix, diagonal_only: bool) -> DensityMatrix {
    rho.map_matrix(|m| {
        let mut out = m.clone();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let keep = if diagonal_only { i == j } else { i.count_ones() == j.count_ones() };
                if !keep {
                    out[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        out
    })
}

pub fn apply_gradient(rho: &DensityMatrix) -> DensityMatrix {
    apply_gradient_with(rho, false)
}

fn conjugate_diagonal(rho: &DensityMatrix, phases: &[C64]) -> DensityMatrix {
    rho.map_matrix(|m| CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| phases[i] * m[(i, j)] * phases[j].conj()))
}

/// Free-evolution phases `e^{+iE(x)t}`, `E = 2π(Σ ν_i m_i + Σ J_ij·m_i·m_j)`.
fn free_evolution_phases(m: &MoleculeSpec, t: f64) -> Vec<C64> {
    let n = m.n_active();
    let mz = |x: usize, j: usize| if bit(x, j, n) == 0 { 0.5 } else { -0.5 };
    (0..1usize << n)
        .map(|x| {
            let mut e = 0.0;
            for i in 0..n {
                e += m.shift_hz(i) * mz(x, i);
                for j in (i + 1)..n {
                    e += m.coupling_hz(i, j) * mz(x, i) * mz(x, j);
                }
            }
            C64::from_polar(1.0, 2.0 * PI * e * t)
        })
        .collect()
}

fn apply_delay(
    rho: &DensityMatrix,
    duration: f64,
    pair: Option<(usize, usize)>,
    m: &MoleculeSpec,
    opts: SimOptions,
) -> SpinResult<DensityMatrix> {
    let n = m.n_active();
    if !opts.strict_delays {
        return Ok(match pair {
            Some((a, b)) => conjugate_diagonal(rho, &coupling_phases(a, b, -2.0 * PI * m.coupling_hz(a, b) * duration, n)),
            None => rho.clone(),
        });
    }
    // τ/2 − π_x(all) − τ/2 − π_x(all)
    let half = free_evolution_phases(m, duration / 2.0);
    let mut flip = CMatrix::identity(1 << n, 1 << n);
    for s in 0..n {
        flip = op_unitary(&PulseOp::x(s, PI), n)? * flip;
    }
    let mut out = rho.clone();
    for _ in 0..2 {
        out = conjugate_diagonal(&out, &half).conjugate_unchecked(&flip);
    }
    Ok(out)
}

/// One op of a pulse program.
pub fn apply_pulse(rho: &DensityMatrix, op: &PulseOp, m: &MoleculeSpec, opts: SimOptions) -> SpinResult<DensityMatrix> {
    check_state(rho, m)?;
    let n = m.n_active();
    if let Some(&spin) = op.spins().iter().find(|&&s| s >= n) {
        return Err(SpinError::SpinOutOfRange { spin, n });
    }
    match *op {
        PulseOp::Rf { .. } => Ok(rho.conjugate_unchecked(&op_unitary(op, n)?)),
        PulseOp::JEvolve { a, b, angle } => Ok(conjugate_diagonal(rho, &coupling_phases(a, b, angle, n))),
        PulseOp::Delay { duration, pair } => apply_delay(rho, duration, pair, m, opts),
        PulseOp::Gradient => Ok(apply_gradient_with(rho, opts.diagonal_gradient)),
    }
}

/// Every op in order, then the final frame, then the output relabeling.
pub fn run_program(rho: &DensityMatrix, p: &PulseProgram, m: &MoleculeSpec, opts: SimOptions) -> SpinResult<DensityMatrix> {
    check_state(rho, m)?;
    if p.n_spins() > m.n_active() {
        return Err(SpinError::SpinOutOfRange { spin: p.n_spins() - 1, n: m.n_active() });
    }
    let mut out = rho.clone();
    for op in p.ops() {
        out = apply_pulse(&out, op, m, opts)?;
    }
    for (spin, &a) in p.final_frame().iter().enumerate() {
        if a != 0.0 {
            out = apply_pulse(&out, &PulseOp::z(spin, a), m, opts)?;
        }
    }
    if p.has_relabeling() {
        let mut perm: Vec<usize> = (0..m.n_active()).collect();
        perm[..p.n_spins()].copy_from_slice(p.relabeling());
        out = out.conjugate_unchecked(&permutation_matrix(&perm));
    }
    Ok(out)
}

/// A state-preparation sequence together with the deviation it should reach.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationProgram {
    pub name: String,
    pub program: PulseProgram,
    /// Target deviation at unit scale.
    pub target: DensityMatrix,
}

impl PreparationProgram {
    /// Segments ending at each gradient.
    pub fn steps(&self) -> Vec<Vec<PulseOp>> {
        let mut steps = vec![Vec::new()];
        for op in self.program.ops() {
            steps.last_mut().expect("non-empty").push(*op);
            if matches!(op, PulseOp::Gradient) {
                steps.push(Vec::new());
            }
        }
        steps.retain(|s| !s.is_empty());
        steps
    }

    pub fn run(&self, m: &MoleculeSpec, opts: SimOptions) -> SpinResult<DensityMatrix> {
        run_program(&thermal_state(m)?, &self.program, m, opts)
    }
}

/// Which form of the three-spin pseudo-pure sequence to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoPureVariant {
    /// The original angles and signs, with `5π/12` on spin 3. Misses the target.
    Original,
    /// `arccos(1/4)` on spin 3 and opposite signs on the two closing
    /// spin-1 y pulses; reaches the target exactly.
    #[default]
    Corrected,
}

/// `|0…0⟩⟨0…0| − 1/2^n` as a deviation.
pub fn pseudo_pure_target(n: usize) -> SpinResult<DensityMatrix> {
    let alpha: Vec<(usize, SingleSpin)> = (0..n).map(|s| (s, SingleSpin::Alpha)).collect();
    Ok(SpinOperator::product(n, &alpha, 1)?.to_deviation()?)
}

/// `I_0z ⊗ |000⟩⟨000|` on four spins (observer first).
pub fn labeled_pseudo_pure_target() -> SpinResult<DensityMatrix> {
    let f = [(0, SingleSpin::Z), (1, SingleSpin::Alpha), (2, SingleSpin::Alpha), (3, SingleSpin::Alpha)];
    Ok(SpinOperator::product(4, &f, 0)?.to_deviation()?)
}

/// Three-carbon pseudo-pure preparation; register order C′, Cα, Cβ.
pub fn pseudo_pure_program(m: &MoleculeSpec, variant: PseudoPureVariant) -> SpinResult<PreparationProgram> {
    if m.n_active() != 3 {
        return Err(SpinError::WrongSpinCount { what: "three-spin pseudo-pure preparation", expected: 3, got: m.n_active() });
    }
    let (spin3_angle, sign) = match variant {
        PseudoPureVariant::Original => (5.0 * PI / 12.0, 1.0),
        PseudoPureVariant::Corrected => (0.25f64.acos(), -1.0),
    };
    let t12 = m.half_coupling_delay(0, 1)?;
    let t23 = m.half_coupling_delay(1, 2)?;
    let ops = [
        PulseOp::y(1, PI / 3.0),
        PulseOp::y(2, spin3_angle),
        PulseOp::Gradient,
        PulseOp::x(0, PI / 2.0),
        PulseOp::delay(t12, Some((0, 1))),
        PulseOp::y(0, sign * -PI / 2.0),
        PulseOp::Gradient,
        PulseOp::x(1, PI / 4.0),
        PulseOp::delay(t23 / 2.0, Some((1, 2))),
        PulseOp::x(0, PI),
        PulseOp::delay(t23 / 2.0, Some((1, 2))),
        PulseOp::y(1, -PI / 4.0),
        PulseOp::Gradient,
        PulseOp::x(0, PI / 4.0),
        PulseOp::delay(t12, Some((0, 1))),
        PulseOp::y(0, sign * PI / 4.0),
        PulseOp::Gradient,
    ];
    let name = match variant {
        PseudoPureVariant::Original => "pseudo-pure |000>, original sequence",
        PseudoPureVariant::Corrected => "pseudo-pure |000>, corrected sequence",
    };
    Ok(PreparationProgram { name: name.into(), program: PulseProgram::with_ops(3, ops)?, target: pseudo_pure_target(3)? })
}

/// Labeled pseudo-pure preparation with the observer as spin 0.
pub fn labeled_pseudo_pure_program(m: &MoleculeSpec) -> SpinResult<PreparationProgram> {
    if m.n_active() != 4 {
        return Err(SpinError::WrongSpinCount { what: "labeled pseudo-pure preparation", expected: 4, got: m.n_active() });
    }
    let mut p = PulseProgram::with_ops(4, [PulseOp::y(1, PI / 2.0), PulseOp::y(2, PI / 2.0), PulseOp::y(3, PI / 2.0), PulseOp::Gradient])?;
    for k in 1..4 {
        p.extend([
            PulseOp::y(0, -PI / 4.0),
            PulseOp::delay(m.half_coupling_delay(0, k)?, Some((0, k))),
            PulseOp::x(0, -PI / 4.0),
            PulseOp::Gradient,
        ])?;
    }
    Ok(PreparationProgram { name: "labeled pseudo-pure I0z|000>".into(), program: p, target: labeled_pseudo_pure_target()? })
}

pub fn prepare_pseudo_pure_3spin(m: &MoleculeSpec, variant: PseudoPureVariant, opts: SimOptions) -> SpinResult<DensityMatrix> {
    pseudo_pure_program(m, variant)?.run(m, opts)
}

pub fn prepare_labeled_pseudo_pure_4spin(m: &MoleculeSpec, opts: SimOptions) -> SpinResult<DensityMatrix> {
    labeled_pseudo_pure_program(m)?.run(m, opts)
}

/// Least-squares scale of `target` inside `rho` and what is left over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetFit {
    pub scale: f64,
    /// `‖ρ − a·T‖_F / ‖a·T‖_F` (infinite when `a = 0`).
    pub relative_residual: f64,
}

pub fn fit_to_target(rho: &DensityMatrix, target: &DensityMatrix) -> SpinResult<TargetFit> {
    if rho.dim() != target.dim() {
        return Err(QStateError::DimensionMismatch { expected: target.dim(), got: rho.dim() }.into());
    }
    let r = rho.to_deviation();
    let t = target.to_deviation();
    let tt = t.matrix().norm_squared();
    if tt == 0.0 {
        return Err(SpinError::Molecule("target has no traceless part".into()));
    }
    let scale = (t.matrix().adjoint() * r.matrix()).trace().re / tt;
    let fitted = t.matrix().scale(scale);
    let relative_residual = if scale == 0.0 { f64::INFINITY } else { (r.matrix() - &fitted).norm() / fitted.norm() };
    Ok(TargetFit { scale, relative_residual })
}

/// One step of the ensemble schedule for the measurement-conditioned QFT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduledStep {
    Pulse(PulseOp),
    /// Computational-basis measurement of a spin (dephasing on an ensemble).
    Measure(usize),
    /// Applied only in the branch where `on` was found in `|1⟩`.
    Conditional {
        on: usize,
        op: PulseOp,
    },
}

/// Semiclassical QFT on the spins `comp` (most significant first), built
/// from the gate-level circuit. Every pulse acts on a single spin.
pub fn semiclassical_schedule(comp: &[usize]) -> SpinResult<(Vec<ScheduledStep>, Vec<usize>)> {
    let c = build_semiclassical_qft_circuit(comp.len())?;
    let mut measured = vec![usize::MAX; c.classical_bits()];
    let mut steps = Vec::new();
    for g in c.gates() {
        match *g {
            Gate::Hadamard { target } => steps.extend(hadamard_pulses(comp[target]).map(ScheduledStep::Pulse)),
            Gate::MeasureZ { target, bit } => {
                measured[bit] = comp[target];
                steps.push(ScheduledStep::Measure(comp[target]));
            }
            // R_d = diag(1, e^{iπ/2^d}) is Z(2π/2^d) up to phase.
            Gate::ConditionalR { target, d, bit } => {
                steps.push(ScheduledStep::Conditional { on: measured[bit], op: PulseOp::z(comp[target], 2.0 * r_phase(d)) })
            }
            ref other => return Err(CircuitError::MeasurementInUnitary(format!("unexpected gate {other}")).into()),
        }
    }
    let relabel = c.output_relabeling().map(<[usize]>::to_vec).unwrap_or_else(|| bit_reversal(comp.len()));
    Ok((steps, relabel))
}

fn projector(spin: usize, value: usize, n: usize) -> Vec<f64> {
    (0..1usize << n).map(|x| if bit(x, spin, n) == value { 1.0 } else { 0.0 }).collect()
}

fn project(rho: &CMatrix, p: &[f64]) -> CMatrix {
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| rho[(i, j)] * p[i] * p[j])
}

/// Exact ensemble average of the measurement-conditioned QFT on `comp`:
/// each measurement splits the state into its two branches, conditional
/// pulses act on the `|1⟩` branch only, and the output is read through the
/// bit-reversal relabeling of `comp`.
pub fn run_semiclassical_qft_ensemble(
    rho: &DensityMatrix,
    comp: &[usize],
    m: &MoleculeSpec,
    opts: SimOptions,
) -> SpinResult<DensityMatrix> {
    check_state(rho, m)?;
    let n = m.n_active();
    if let Some(&spin) = comp.iter().find(|&&s| s >= n) {
        return Err(SpinError::SpinOutOfRange { spin, n });
    }
    let (steps, relabel) = semiclassical_schedule(comp)?;
    let mut out = rho.clone();
    for step in steps {
        out = match step {
            ScheduledStep::Pulse(op) => apply_pulse(&out, &op, m, opts)?,
            ScheduledStep::Measure(spin) => {
                let (p0, p1) = (projector(spin, 0, n), projector(spin, 1, n));
                out.map_matrix(|r| project(r, &p0) + project(r, &p1))
            }
            ScheduledStep::Conditional { on, op } => {
                let (p0, p1) = (projector(on, 0, n), projector(on, 1, n));
                let branch1 = out.map_matrix(|r| project(r, &p1));
                let rotated = apply_pulse(&branch1, &op, m, opts)?;
                out.map_matrix(|r| project(r, &p0) + rotated.matrix())
            }
        };
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for (i, &src) in relabel.iter().enumerate() {
        perm[comp[i]] = comp[src];
    }
    Ok(out.conjugate_unchecked(&permutation_matrix(&perm)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::max_abs_diff;

    fn carbons() -> MoleculeSpec {
        MoleculeSpec::alanine().with_active(&["C'", "Ca", "Cb"]).unwrap()
    }

    fn observer() -> MoleculeSpec {
        MoleculeSpec::alanine().with_active(&["Ca", "C'", "Cb", "H"]).unwrap().with_coupling("Cb", "H", 0.0).unwrap()
    }

    fn op(n: usize, spin: usize, which: SingleSpin) -> CMatrix {
        SpinOperator::single(n, spin, which, 0).unwrap().matrix().clone()
    }

    #[test]
    fn shipped_molecule() {
        let m = MoleculeSpec::alanine();
        assert_eq!(m.n_active(), 4);
        assert_eq!(m.shift_hz(2), 15793.0);
        assert_eq!(m.coupling_hz(1, 3), 143.21);
        assert_eq!(m.coupling_hz(3, 1), 143.21);
        let back = MoleculeSpec::from_json_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn molecule_validation() {
        let s = |l: &str| SpinSpec { label: l.into(), shift_hz: 0.0 };
        let bad = MoleculeSpec::new(vec![s("A"), s("B")], vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec!["A".into()]);
        assert!(matches!(bad, Err(SpinError::Molecule(_))));
        let unknown = MoleculeSpec::new(vec![s("A")], vec![vec![0.0]], vec!["Q".into()]);
        assert!(matches!(unknown, Err(SpinError::UnknownLabel(_))));
        assert!(MoleculeSpec::from_json_str("{").is_err());
    }

    #[test]
    fn thermal_states() {
        let one = MoleculeSpec::alanine().with_active(&["H"]).unwrap();
        assert_eq!(thermal_state(&one).unwrap().matrix(), &SingleSpin::Z.matrix());
        let rho = thermal_state(&carbons()).unwrap();
        let expected = op(3, 0, SingleSpin::Z) + op(3, 1, SingleSpin::Z) + op(3, 2, SingleSpin::Z);
        assert!(max_abs_diff(rho.matrix(), &expected) < 1e-15);
        // ‖Σ I_z‖_F² = n · 2^n / 4.
        let four = thermal_state(&MoleculeSpec::alanine()).unwrap();
        assert!((four.matrix().norm_squared() - 16.0).abs() < 1e-12);
        assert!(four.trace().abs() < 1e-15);
    }

    #[test]
    fn y_pulse_turns_z_into_minus_x() {
        let m = MoleculeSpec::alanine().with_active(&["Ca"]).unwrap();
        let rho = apply_pulse(&thermal_state(&m).unwrap(), &PulseOp::y(0, PI / 2.0), &m, SimOptions::default()).unwrap();
        assert!(max_abs_diff(rho.matrix(), &-SingleSpin::X.matrix()) < 1e-15);
    }

    #[test]
    fn gradient_projection() {
        let m = carbons();
        let rho = apply_pulse(&thermal_state(&m).unwrap(), &PulseOp::y(0, 0.7), &m, SimOptions::default()).unwrap();
        let g = apply_gradient(&rho);
        assert_eq!(apply_gradient(&g), g);
        assert!((g.trace() - rho.trace()).abs() < 1e-15);
        let ix = DensityMatrix::new(op(3, 0, SingleSpin::X), DensityKind::Deviation).unwrap();
        assert!(apply_gradient(&ix).matrix().norm() == 0.0);
        let diag = thermal_state(&m).unwrap();
        assert_eq!(apply_gradient(&diag), diag);
    }

    #[test]
    fn gradient_keeps_zero_quantum() {
        // I_1x I_2x + I_1y I_2y is pure zero-quantum.
        let zq = op(2, 0, SingleSpin::X) * op(2, 1, SingleSpin::X) + op(2, 0, SingleSpin::Y) * op(2, 1, SingleSpin::Y);
        let rho = DensityMatrix::new(zq, DensityKind::Deviation).unwrap();
        assert_eq!(apply_gradient(&rho), rho);
        assert_eq!(apply_gradient_with(&rho, true).matrix().norm(), 0.0);
    }

    #[test]
    fn half_coupling_delay_is_j_minus_pi() {
        let m = carbons();
        let start = DensityMatrix::new(op(3, 0, SingleSpin::X), DensityKind::Deviation).unwrap();
        let t = m.half_coupling_delay(0, 1).unwrap();
        let d = apply_pulse(&start, &PulseOp::delay(t, Some((0, 1))), &m, SimOptions::default()).unwrap();
        let j = apply_pulse(&start, &PulseOp::j(0, 1, -PI), &m, SimOptions::default()).unwrap();
        assert!(max_abs_diff(d.matrix(), j.matrix()) < 1e-12);
        // I_1x → −2 I_1y I_2z under a full 1/(2J) evolution.
        let expected = (op(3, 0, SingleSpin::Y) * op(3, 1, SingleSpin::Z)).scale(-2.0);
        assert!(max_abs_diff(d.matrix(), &expected) < 1e-12);
        let twice = apply_pulse(&d, &PulseOp::delay(t, Some((0, 1))), &m, SimOptions::default()).unwrap();
        let once = apply_pulse(&start, &PulseOp::delay(2.0 * t, Some((0, 1))), &m, SimOptions::default()).unwrap();
        assert!(max_abs_diff(twice.matrix(), once.matrix()) < 1e-12);
    }

    #[test]
    fn strict_delay_refocuses_shifts() {
        let m = carbons();
        let opts = SimOptions { strict_delays: true, ..Default::default() };
        let start = DensityMatrix::new(op(3, 2, SingleSpin::X), DensityKind::Deviation).unwrap();
        // Spin 3 is weakly coupled to spin 1, so after a very short delay the
        // large shift must have been undone.
        let out = apply_pulse(&start, &PulseOp::delay(1e-6, None), &m, opts).unwrap();
        assert!(max_abs_diff(out.matrix(), start.matrix()) < 1e-3);
        assert!((out.trace()).abs() < 1e-12 && out.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn pseudo_pure_first_step_polarizations() {
        let m = carbons();
        let p = pseudo_pure_program(&m, PseudoPureVariant::Original).unwrap();
        let steps = p.steps();
        assert_eq!(steps.len(), 4);
        let step1 = PulseProgram::with_ops(3, steps[0].clone()).unwrap();
        let rho = run_program(&thermal_state(&m).unwrap(), &step1, &m, SimOptions::default()).unwrap();
        let expected =
            op(3, 0, SingleSpin::Z) + op(3, 1, SingleSpin::Z).scale(0.5) + op(3, 2, SingleSpin::Z).scale((5.0 * PI / 12.0).cos());
        assert!(max_abs_diff(rho.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn corrected_sequence_reaches_pseudo_pure() {
        let m = carbons();
        let rho = prepare_pseudo_pure_3spin(&m, PseudoPureVariant::Corrected, SimOptions::default()).unwrap();
        let fit = fit_to_target(&rho, &pseudo_pure_target(3).unwrap()).unwrap();
        assert!(fit.relative_residual < 1e-10, "{fit:?}");
        assert!((fit.scale - 1.0).abs() < 1e-10, "{fit:?}");
    }

    #[test]
    fn original_sequence_misses_target() {
        let rho = prepare_pseudo_pure_3spin(&carbons(), PseudoPureVariant::Original, SimOptions::default()).unwrap();
        let fit = fit_to_target(&rho, &pseudo_pure_target(3).unwrap()).unwrap();
        assert!(fit.relative_residual > 1e-3, "{fit:?}");
    }

    #[test]
    fn labeled_sequence_reaches_target() {
        let m = observer();
        let p = labeled_pseudo_pure_program(&m).unwrap();
        let step1 = PulseProgram::with_ops(4, p.steps()[0].clone()).unwrap();
        let after1 = run_program(&thermal_state(&m).unwrap(), &step1, &m, SimOptions::default()).unwrap();
        assert!(max_abs_diff(after1.matrix(), &op(4, 0, SingleSpin::Z)) < 1e-12);
        let rho = p.run(&m, SimOptions::default()).unwrap();
        let fit = fit_to_target(&rho, &p.target).unwrap();
        assert!(fit.relative_residual < 1e-10 && (fit.scale - 1.0).abs() < 1e-10, "{fit:?}");
    }

    #[test]
    fn wrong_spin_counts() {
        assert!(matches!(
            pseudo_pure_program(&MoleculeSpec::alanine(), PseudoPureVariant::Original),
            Err(SpinError::WrongSpinCount { .. })
        ));
        assert!(matches!(labeled_pseudo_pure_program(&carbons()), Err(SpinError::WrongSpinCount { .. })));
    }

    #[test]
    fn run_program_checks_sizes() {
        let m = carbons();
        let rho = thermal_state(&MoleculeSpec::alanine()).unwrap();
        assert!(matches!(run_program(&rho, &PulseProgram::new(3), &m, SimOptions::default()), Err(SpinError::StateMismatch { .. })));
        let rho = thermal_state(&m).unwrap();
        assert_eq!(run_program(&rho, &PulseProgram::new(3), &m, SimOptions::default()).unwrap(), rho);
        let bad = PulseProgram::with_ops(4, [PulseOp::x(3, 1.0)]).unwrap();
        assert!(run_program(&rho, &bad, &m, SimOptions::default()).is_err());
    }

    #[test]
    fn schedule_is_single_spin() {
        let (steps, relabel) = semiclassical_schedule(&[1, 2, 3]).unwrap();
        assert_eq!(relabel, vec![2, 1, 0]);
        for s in &steps {
            let op = match s {
                ScheduledStep::Pulse(op) | ScheduledStep::Conditional { op, .. } => op,
                ScheduledStep::Measure(_) => continue,
            };
            assert_eq!(op.spins().len(), 1);
        }
        let conditionals = steps.iter().filter(|s| matches!(s, ScheduledStep::Conditional { .. })).count();
        assert_eq!(conditionals, 3);
    }
}
