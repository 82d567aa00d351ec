//! What the spectrometer sees: first-order line spectra, observer-spin
//! decoding, state tomography from readout-pulse spectra, the attenuated
//! correlation and period inference from the post-QFT support.
//!
//! A line of spin `i` sits at `ν_i + Σ_k J_ik m_k`, with `m_k = +1/2` when
//! neighbor `k` is in `|0⟩`. Its complex signal is `s = −2ρ_{(0,n),(1,n)}`,
//! the coherence between the two states that differ only in spin `i` with
//! neighbors in state `n`. The receiver phase is fixed so that a `Y(π/2)`
//! readout of thermal magnetization gives real, positive lines of height 1.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pulse::{PulseError, PulseOp};
use crate::qstate::{bit, bitstring, parse_bitstring, CMatrix, DensityKind, DensityMatrix, QStateError, C64};
use crate::spin::{apply_pulse, MoleculeSpec, SimOptions, SpinError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error(transparent)]
    State(#[from] QStateError),

    #[error(transparent)]
    Spin(#[from] SpinError),

    #[error(transparent)]
    Pulse(#[from] PulseError),

    #[error("spin {spin} out of range for {n} active spins")]
    InvalidSpin { spin: usize, n: usize },

    #[error("line positions closer than the {resolution_hz} Hz resolution: {collisions:?}")]
    Collision { resolution_hz: f64, collisions: Vec<(String, String)> },

    #[error("line at {0} Hz matches no neighbor state")]
    Unassigned(f64),

    #[error("Tr(ρ_th²) = 0; the correlation is undefined")]
    ZeroReference,

    #[error("readout set has rank {rank}, {needed} needed for full reconstruction")]
    Singular { rank: usize, needed: usize },

    #[error("states {0:?} are not one full arithmetic progression dividing N")]
    NotPeriodic(Vec<usize>),

    #[error("no states given")]
    NoStates,

    #[error("`{0}` is not a bitstring of the register width")]
    BadBitstring(String),

    #[error("output: {0}")]
    Output(String),
}

pub type ReadoutResult<T> = Result<T, ReadoutError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub frequency_hz: f64,
    /// Absorptive part; positive when the observed spin leans to `|0⟩`.
    pub amplitude: f64,
    /// Dispersive part.
    pub dispersion: f64,
    /// Neighbor state as an integer, first neighbor most significant.
    pub neighbor_state: usize,
    /// The same state as a bitstring.
    pub assignment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub observed_spin: usize,
    pub observed_label: String,
    pub center_hz: f64,
    /// Register positions of the other spins, in order.
    pub neighbors: Vec<usize>,
    pub neighbor_labels: Vec<String>,
    pub couplings_hz: Vec<f64>,
    pub lines: Vec<SpectralLine>,
}

impl Spectrum {
    /// Line position for a neighbor state.
    pub fn line_frequency(&self, neighbor_state: usize) -> f64 {
        line_frequency(self.center_hz, &self.couplings_hz, neighbor_state)
    }

    /// Lines whose absorptive height exceeds `tol` times the tallest.
    pub fn nonzero_lines(&self, tol: f64) -> Vec<&SpectralLine> {
        let max = self.lines.iter().map(|l| l.amplitude.abs()).fold(0.0, f64::max);
        self.lines.iter().filter(|l| max > 0.0 && l.amplitude.abs() > tol * max).collect()
    }
}

fn line_frequency(center: f64, couplings: &[f64], state: usize) -> f64 {
    let k = couplings.len();
    center + couplings.iter().enumerate().map(|(i, j)| if bit(state, i, k) == 0 { 0.5 * j } else { -0.5 * j }).sum::<f64>()
}

/// All `2^(p−1)` lines of `observe`, read right after `readout` (if any).
pub fn synthesize_spectrum(rho: &DensityMatrix, observe: usize, m: &MoleculeSpec, readout: Option<&PulseOp>) -> ReadoutResult<Spectrum> {
    let n = m.n_active();
    if observe >= n {
        return Err(ReadoutError::InvalidSpin { spin: observe, n });
    }
    let rho = match readout {
        Some(op) => apply_pulse(rho, op, m, SimOptions::default())?,
        None => rho.clone(),
    };
    Ok(lines_of(&rho, observe, m))
}

fn lines_of(rho: &DensityMatrix, observe: usize, m: &MoleculeSpec) -> Spectrum {
    let n = rho.n_spins();
    let neighbors: Vec<usize> = (0..n).filter(|&s| s != observe).collect();
    let couplings: Vec<f64> = neighbors.iter().map(|&k| m.coupling_hz(observe, k)).collect();
    let center = m.shift_hz(observe);
    let k = neighbors.len();
    let lines = (0..1usize << k)
        .map(|state| {
            let mut i0 = 0usize;
            for (pos, &nb) in neighbors.iter().enumerate() {
                if bit(state, pos, k) == 1 {
                    i0 |= 1 << (n - 1 - nb);
                }
            }
            let i1 = i0 | 1 << (n - 1 - observe);
            let s = rho.matrix()[(i0, i1)] * -2.0;
            SpectralLine {
                frequency_hz: line_frequency(center, &couplings, state),
                amplitude: s.re,
                dispersion: s.im,
                neighbor_state: state,
                assignment: if k == 0 { String::new() } else { bitstring(state, k) },
            }
        })
        .collect();
    Spectrum {
        observed_spin: observe,
        observed_label: m.label(observe).to_string(),
        center_hz: center,
        neighbor_labels: neighbors.iter().map(|&s| m.label(s).to_string()).collect(),
        neighbors,
        couplings_hz: couplings,
        lines,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedState {
    pub state: usize,
    pub bits: String,
    pub amplitude: f64,
}

/// Map each line to the neighbor state whose first-order position it
/// matches, keeping lines taller than `min_relative` of the tallest.
pub fn decode_observer_readout(s: &Spectrum, resolution_hz: f64, min_relative: f64) -> ReadoutResult<Vec<DecodedState>> {
    let k = s.neighbors.len();
    let table: Vec<f64> = (0..1usize << k).map(|st| s.line_frequency(st)).collect();
    let mut collisions = Vec::new();
    for a in 0..table.len() {
        for b in (a + 1)..table.len() {
            if (table[a] - table[b]).abs() < resolution_hz {
                collisions.push((bitstring(a, k.max(1)), bitstring(b, k.max(1))));
            }
        }
    }
    if !collisions.is_empty() {
        return Err(ReadoutError::Collision { resolution_hz, collisions });
    }
    let mut out = Vec::new();
    for line in s.nonzero_lines(min_relative) {
        let state = table
            .iter()
            .position(|&f| (f - line.frequency_hz).abs() < resolution_hz / 2.0)
            .ok_or(ReadoutError::Unassigned(line.frequency_hz))?;
        out.push(DecodedState { state, bits: bitstring(state, k.max(1)), amplitude: line.amplitude });
    }
    out.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude).then(a.state.cmp(&b.state)));
    Ok(out)
}

/// `Re Tr(ρ_th ρ_exp) / Tr(ρ_th²)` on the traceless parts.
pub fn attenuated_correlation(rho_th: &DensityMatrix, rho_exp: &DensityMatrix) -> ReadoutResult<f64> {
    if rho_th.dim() != rho_exp.dim() {
        return Err(QStateError::DimensionMismatch { expected: rho_th.dim(), got: rho_exp.dim() }.into());
    }
    let th = rho_th.to_deviation();
    let ex = rho_exp.to_deviation();
    let denom = (th.matrix() * th.matrix()).trace().re;
    if denom.abs() < 1e-300 {
        return Err(ReadoutError::ZeroReference);
    }
    Ok((th.matrix() * ex.matrix()).trace().re / denom)
}

/// Period from the support of a post-QFT state: the support must be one
/// complete progression `{x0, x0 + k, …}` with `k | N`, and then `r = N/k`.
/// A single state gives `k = N`, `r = 1`.
pub fn infer_period_from_indices(states: &[usize], n: usize) -> ReadoutResult<(usize, usize)> {
    let big_n = 1usize << n;
    let mut s: Vec<usize> = states.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() {
        return Err(ReadoutError::NoStates);
    }
    if let Some(&bad) = s.iter().find(|&&x| x >= big_n) {
        return Err(ReadoutError::BadBitstring(bad.to_string()));
    }
    if s.len() == 1 {
        return Ok((big_n, 1));
    }
    let k = s[1] - s[0];
    let progression = s.windows(2).all(|w| w[1] - w[0] == k);
    if !progression || !big_n.is_multiple_of(k) || s.len() != big_n / k {
        return Err(ReadoutError::NotPeriodic(s));
    }
    Ok((k, big_n / k))
}

pub fn infer_period_from_states(states: &[&str], n: usize) -> ReadoutResult<(usize, usize)> {
    let idx = states
        .iter()
        .map(|b| match parse_bitstring(b) {
            Some(x) if b.len() == n => Ok(x),
            _ => Err(ReadoutError::BadBitstring(b.to_string())),
        })
        .collect::<ReadoutResult<Vec<_>>>()?;
    infer_period_from_indices(&idx, n)
}

/// Indices whose diagonal entry stands above the smallest one. A flat
/// diagonal has full support.
pub fn support_from_diagonal(rho: &DensityMatrix, tol: f64) -> Vec<usize> {
    let d: Vec<f64> = (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re).collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min <= tol {
        return (0..d.len()).collect();
    }
    (0..d.len()).filter(|&i| d[i] - min > tol * (max - min)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomogramResult {
    pub reconstructed: DensityMatrix,
    pub readout_set: Vec<String>,
    /// `‖reconstructed − input‖_∞` over entries of the traceless parts.
    pub residual: f64,
}

/// Linear inversion from the spectra of every spin after every readout
/// setting in `{none, X(π/2), Y(π/2)}^n`.
pub struct Tomographer {
    molecule: MoleculeSpec,
    settings: Vec<Vec<PulseOp>>,
    labels: Vec<String>,
    pinv: DMatrix<f64>,
}

const SINGULAR_TOL: f64 = 1e-10;

fn hermitian_basis(dim: usize, k: usize) -> CMatrix {
    // k < dim: diagonal entries; then (Re, Im) pairs for i < j.
    let mut m = CMatrix::zeros(dim, dim);
    if k < dim {
        m[(k, k)] = C64::new(1.0, 0.0);
        return m;
    }
    let mut idx = dim;
    for i in 0..dim {
        for j in (i + 1)..dim {
            if idx == k {
                m[(i, j)] = C64::new(1.0, 0.0);
                m[(j, i)] = C64::new(1.0, 0.0);
                return m;
            }
            if idx + 1 == k {
                m[(i, j)] = C64::new(0.0, 1.0);
                m[(j, i)] = C64::new(0.0, -1.0);
                return m;
            }
            idx += 2;
        }
    }
    unreachable!("basis index out of range")
}

fn hermitian_from_params(dim: usize, p: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(p[i], 0.0);
    }
    let mut idx = dim;
    for i in 0..dim {
        for j in (i + 1)..dim {
            m[(i, j)] = C64::new(p[idx], p[idx + 1]);
            m[(j, i)] = C64::new(p[idx], -p[idx + 1]);
            idx += 2;
        }
    }
    m
}

impl Tomographer {
    pub fn new(m: &MoleculeSpec) -> ReadoutResult<Self> {
        let n = m.n_active();
        let names = ["I", "X90", "Y90"];
        let mut settings = Vec::new();
        let mut labels = Vec::new();
        for code in 0..3usize.pow(n as u32) {
            let mut ops = Vec::new();
            let mut label = Vec::new();
            let mut c = code;
            for s in 0..n {
                let pick = c % 3;
                c /= 3;
                match pick {
                    1 => ops.push(PulseOp::x(s, std::f64::consts::FRAC_PI_2)),
                    2 => ops.push(PulseOp::y(s, std::f64::consts::FRAC_PI_2)),
                    _ => {}
                }
                label.push(format!("{}:{}", m.label(s), names[pick]));
            }
            settings.push(ops);
            labels.push(label.join(" "));
        }
        let mut t = Self { molecule: m.clone(), settings, labels, pinv: DMatrix::zeros(0, 0) };
        let dim = 1usize << n;
        let params = dim * dim;
        let columns: Vec<Vec<f64>> = (0..params)
            .map(|k| t.forward(&DensityMatrix::from_parts(hermitian_basis(dim, k), DensityKind::Deviation)))
            .collect::<ReadoutResult<_>>()?;
        let rows = columns[0].len() + 1;
        let mut a = DMatrix::<f64>::zeros(rows, params);
        for (k, col) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                a[(r, k)] = *v;
            }
        }
        // Trace-zero row pins the part spectra cannot see.
        for i in 0..dim {
            a[(rows - 1, i)] = 1.0;
        }
        let gram = a.transpose() * &a;
        let eig = gram.clone().symmetric_eigen();
        let emax = eig.eigenvalues.max();
        let rank = eig.eigenvalues.iter().filter(|&&e| e > SINGULAR_TOL * SINGULAR_TOL * emax).count();
        if rank < params {
            return Err(ReadoutError::Singular { rank, needed: params });
        }
        let chol = gram.cholesky().ok_or(ReadoutError::Singular { rank, needed: params })?;
        t.pinv = chol.solve(&a.transpose());
        Ok(t)
    }

    pub fn readout_set(&self) -> &[String] {
        &self.labels
    }

    /// Re and Im of every line of every spin, setting by setting.
    pub fn forward(&self, rho: &DensityMatrix) -> ReadoutResult<Vec<f64>> {
        let m = &self.molecule;
        let mut out = Vec::new();
        for ops in &self.settings {
            let mut r = rho.clone();
            for op in ops {
                r = apply_pulse(&r, op, m, SimOptions::default())?;
            }
            for s in 0..m.n_active() {
                for line in lines_of(&r, s, m).lines {
                    out.push(line.amplitude);
                    out.push(line.dispersion);
                }
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self, data: &[f64]) -> ReadoutResult<DensityMatrix> {
        let dim = 1usize << self.molecule.n_active();
        let mut b = nalgebra::DVector::<f64>::zeros(data.len() + 1);
        for (i, v) in data.iter().enumerate() {
            b[i] = *v;
        }
        let p = &self.pinv * b;
        Ok(DensityMatrix::from_parts(hermitian_from_params(dim, p.as_slice()), DensityKind::Deviation))
    }

    pub fn tomograph(&self, rho: &DensityMatrix) -> ReadoutResult<TomogramResult> {
        if rho.n_spins() != self.molecule.n_active() {
            return Err(SpinError::StateMismatch { expected: self.molecule.n_active(), got: rho.n_spins() }.into());
        }
        let reconstructed = self.reconstruct(&self.forward(rho)?)?;
        let diff = reconstructed.matrix() - rho.to_deviation().matrix();
        let residual = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(TomogramResult { reconstructed, readout_set: self.labels.clone(), residual })
    }
}

pub fn tomograph(rho: &DensityMatrix, m: &MoleculeSpec) -> ReadoutResult<TomogramResult> {
    Tomographer::new(m)?.tomograph(rho)
}

/// Sum of Lorentzians (half width `linewidth_hz / 2`) sampled on `points`
/// frequencies across `[f_min, f_max]`; for plotting only.
pub fn render_lorentzian(s: &Spectrum, linewidth_hz: f64, f_min: f64, f_max: f64, points: usize) -> Vec<(f64, f64)> {
    let g = linewidth_hz / 2.0;
    (0..points)
        .map(|i| {
            let f = if points > 1 { f_min + (f_max - f_min) * i as f64 / (points - 1) as f64 } else { f_min };
            let y = s.lines.iter().map(|l| l.amplitude * g * g / ((f - l.frequency_hz).powi(2) + g * g)).sum();
            (f, y)
        })
        .collect()
}

/// `frequency_hz,amplitude,assignment` rows.
pub fn write_spectrum_csv<W: Write>(s: &Spectrum, writer: W) -> ReadoutResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| ReadoutError::Output(e.to_string());
    w.write_record(["frequency_hz", "amplitude", "assignment"]).map_err(err)?;
    for l in &s.lines {
        w.write_record([format!("{}", l.frequency_hz), format!("{}", l.amplitude), l.assignment.clone()]).map_err(err)?;
    }
    w.flush().map_err(|e| ReadoutError::Output(e.to_string()))
}

/// Row-major matrix as `[re, im]` pairs.
pub fn tomogram_json(rho: &DensityMatrix) -> serde_json::Value {
    let m = rho.matrix();
    let data: Vec<[f64; 2]> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| [m[(i, j)].re, m[(i, j)].im])).collect();
    serde_json::json!({ "dim": m.nrows(), "layout": "row_major_re_im", "data": data })
}
