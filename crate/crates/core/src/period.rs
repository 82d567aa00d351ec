//! Period finding: periodic functions, the `|x⟩|y⟩ → |x⟩|y ⊕ f(x)⟩` oracle,
//! register collapse, QFT sampling and classical recovery of the period.

use std::io::{Read, Write};
use std::sync::Arc;

use num_integer::Integer;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{self, check_qubits, CMatrix, QStateError, StateVector, C64, MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodError {
    #[error(transparent)]
    State(#[from] QStateError),

    #[error("function table has {got} entries; expected 2^n = {expected}")]
    TableLength { expected: usize, got: usize },

    #[error("f({x}) = {value} does not fit in {n_out} output bits")]
    Overflow { x: usize, value: u64, n_out: usize },

    #[error("f repeats a value inside its period {r} (f({a}) = f({b})), so the oracle does not isolate one offset")]
    NotInjectiveOnPeriod { r: usize, a: usize, b: usize },

    #[error("period r = {r} must satisfy 1 ≤ r ≤ {big_n}")]
    BadPeriod { r: usize, big_n: usize },

    #[error("offset x0 = {x0} must be below the period {r}")]
    BadOffset { x0: usize, r: usize },

    #[error("no outcomes to extract a period from")]
    NoOutcomes,

    #[error("outcome {c} outside 0..{big_n}")]
    OutcomeOutOfRange { c: usize, big_n: usize },

    #[error("repetitions must be at least 1")]
    ZeroRepetitions,

    #[error("oracle register of {qubits} qubits exceeds the dense capacity of {max}")]
    OracleTooLarge { qubits: usize, max: usize },

    #[error("function table: {0}")]
    Table(String),
}

pub type PeriodResult<T> = Result<T, PeriodError>;

/// Total function on `0..2^n_in`, periodic with period `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicFunction {
    n_in: usize,
    table: Vec<u64>,
    period: usize,
}

impl PeriodicFunction {
    /// Validates the table and recovers its period by exhaustive scan.
    pub fn new(n_in: usize, table: Vec<u64>) -> PeriodResult<Self> {
        check_qubits(n_in)?;
        let big_n = 1usize << n_in;
        if table.len() != big_n {
            return Err(PeriodError::TableLength { expected: big_n, got: table.len() });
        }
        let period = scan_period(&table);
        for b in 0..period {
            if let Some(a) = (0..b).find(|&a| table[a] == table[b]) {
                return Err(PeriodError::NotInjectiveOnPeriod { r: period, a, b });
            }
        }
        Ok(Self { n_in, table, period })
    }

    /// `f(x) = x mod r`.
    pub fn with_period(n_in: usize, r: usize) -> PeriodResult<Self> {
        check_qubits(n_in)?;
        let big_n = 1usize << n_in;
        if r == 0 || r > big_n {
            return Err(PeriodError::BadPeriod { r, big_n });
        }
        Self::new(n_in, (0..big_n).map(|x| (x % r) as u64).collect())
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn big_n(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    pub fn eval(&self, x: usize) -> u64 {
        self.table[x]
    }

    /// Period found when the table was built.
    pub fn period(&self) -> usize {
        self.period
    }

    /// Minimal output register: `ceil(log2(max f + 1))`, at least one bit.
    pub fn output_width(&self) -> usize {
        let max = self.table.iter().copied().max().unwrap_or(0);
        ((u64::BITS - max.leading_zeros()) as usize).max(1)
    }
}

fn scan_period(table: &[u64]) -> usize {
    let big_n = table.len();
    (1..big_n).find(|&r| (0..big_n - r).all(|x| table[x + r] == table[x])).unwrap_or(big_n)
}

/// Smallest `r` with `f(x + r) = f(x)` wherever both sides are defined.
pub fn classical_period_oracle(f: &PeriodicFunction) -> usize {
    scan_period(&f.table)
}

/// Permutation matrix of `|x⟩|y⟩ → |x⟩|y ⊕ f(x)⟩`, register 1 in the high bits.
pub fn oracle_unitary(f: &PeriodicFunction, n_out: usize) -> PeriodResult<CMatrix> {
    let qubits = f.n_in + n_out;
    if qubits > MAX_QUBITS {
        return Err(PeriodError::OracleTooLarge { qubits, max: MAX_QUBITS });
    }
    let limit = 1u64 << n_out;
    if let Some((x, &value)) = f.table.iter().enumerate().find(|(_, &v)| v >= limit) {
        return Err(PeriodError::Overflow { x, value, n_out });
    }
    let dim = 1usize << qubits;
    let mut u = CMatrix::zeros(dim, dim);
    for x in 0..f.big_n() {
        for y in 0..(1usize << n_out) {
            let from = (x << n_out) | y;
            let to = (x << n_out) | (y ^ f.table[x] as usize);
            u[(to, from)] = C64::new(1.0, 0.0);
        }
    }
    Ok(u)
}

/// `1/√K Σ_j |x0 + j·r⟩` over every term that fits in `n` qubits.
pub fn prepare_periodic_state(n: usize, r: usize, x0: usize) -> PeriodResult<StateVector> {
    check_qubits(n)?;
    let big_n = 1usize << n;
    if r == 0 || r > big_n {
        return Err(PeriodError::BadPeriod { r, big_n });
    }
    if x0 >= r {
        return Err(PeriodError::BadOffset { x0, r });
    }
    let support: Vec<usize> = (x0..big_n).step_by(r).collect();
    Ok(StateVector::uniform_over(n, &support)?)
}

/// Measure register 2 of `1/√N Σ_x |x⟩|f(x)⟩`: value `v` appears with
/// probability `|f⁻¹(v)|/N` and leaves register 1 uniform over `f⁻¹(v)`.
pub fn collapse_with_rng<R: Rng + ?Sized>(f: &PeriodicFunction, rng: &mut R) -> PeriodResult<(u64, StateVector)> {
    // A uniformly random x picks v = f(x) with exactly that probability.
    let x = rng.random_range(0..f.big_n());
    let value = f.table[x];
    let preimage: Vec<usize> = (0..f.big_n()).filter(|&y| f.table[y] == value).collect();
    Ok((value, StateVector::uniform_over(f.n_in, &preimage)?))
}

pub fn collapse_via_oracle(f: &PeriodicFunction, seed: u64) -> PeriodResult<(u64, StateVector)> {
    collapse_with_rng(f, &mut qstate::seeded_rng(seed))
}

/// Same measurement carried out on the full two-register state vector with
/// the dense oracle; only for small registers.
pub fn collapse_via_dense_oracle<R: Rng + ?Sized>(f: &PeriodicFunction, rng: &mut R) -> PeriodResult<(u64, StateVector)> {
    let n_out = f.output_width();
    let u = oracle_unitary(f, n_out)?;
    let dim = 1usize << (f.n_in + n_out);
    let amp = C64::new(1.0 / (f.big_n() as f64).sqrt(), 0.0);
    // H^{⊗n} on register 1 of |0⟩|0⟩.
    let mut start = vec![C64::new(0.0, 0.0); dim];
    for x in 0..f.big_n() {
        start[x << n_out] = amp;
    }
    let joint = StateVector::new(start)?.apply_unitary(&u)?;
    let out_dim = 1usize << n_out;
    let mut p_out = vec![0.0; out_dim];
    for (i, a) in joint.amplitudes().iter().enumerate() {
        p_out[i % out_dim] += a.norm_sqr();
    }
    let value = qstate::draw(&p_out, rng);
    let reg1: Vec<C64> = (0..f.big_n()).map(|x| joint.amplitude((x << n_out) | value)).collect();
    Ok((value as u64, StateVector::new(reg1)?.normalized()?))
}

/// QFT `F[y][x] = e^{2πixy/N}/√N` applied by FFT.
#[derive(Clone)]
pub struct FftQft {
    n: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl FftQft {
    pub fn new(n: usize) -> PeriodResult<Self> {
        check_qubits(n)?;
        let plan = FftPlanner::<f64>::new().plan_fft_inverse(1 << n);
        Ok(Self { n, plan })
    }

    pub fn apply(&self, state: &StateVector) -> PeriodResult<StateVector> {
        if state.n_qubits() != self.n {
            return Err(QStateError::DimensionMismatch { expected: 1 << self.n, got: state.dim() }.into());
        }
        let mut buf: Vec<C64> = state.amplitudes().iter().copied().collect();
        self.plan.process(&mut buf);
        let scale = 1.0 / (buf.len() as f64).sqrt();
        buf.iter_mut().for_each(|a| *a *= scale);
        Ok(StateVector::new(buf)?)
    }
}

/// How `r_hat` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    ExactReduction,
    ContinuedFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub r_hat: usize,
    pub samples_used: usize,
    pub outcomes: Vec<usize>,
    /// Fraction of outcomes that alone determine `r_hat` (λ coprime to r).
    pub confidence: f64,
    /// Every outcome was 0, so `r_hat = 1` cannot be told apart from a failure.
    pub ambiguous: bool,
    pub method: ExtractionMethod,
}

/// Denominator of `c/N` in lowest terms (`c = 0` gives 1).
pub fn reduced_denominator(c: usize, big_n: usize) -> usize {
    big_n / c.gcd(&big_n)
}

fn check_outcomes(outcomes: &[usize], big_n: usize) -> PeriodResult<()> {
    if outcomes.is_empty() {
        return Err(PeriodError::NoOutcomes);
    }
    if let Some(&c) = outcomes.iter().find(|&&c| c >= big_n) {
        return Err(PeriodError::OutcomeOutOfRange { c, big_n });
    }
    Ok(())
}

fn estimate(outcomes: &[usize], r_hat: usize, dens: &[usize], method: ExtractionMethod) -> PeriodEstimate {
    let hits = dens.iter().filter(|&&d| d == r_hat).count();
    PeriodEstimate {
        r_hat,
        samples_used: outcomes.len(),
        outcomes: outcomes.to_vec(),
        confidence: hits as f64 / outcomes.len() as f64,
        ambiguous: outcomes.iter().all(|&c| c == 0),
        method,
    }
}

/// Reduce each `c/N` to lowest terms and take the lcm of the denominators.
pub fn extract_period(outcomes: &[usize], big_n: usize) -> PeriodResult<PeriodEstimate> {
    check_outcomes(outcomes, big_n)?;
    let dens: Vec<usize> = outcomes.iter().map(|&c| reduced_denominator(c, big_n)).collect();
    let r_hat = dens.iter().fold(1usize, |acc, &d| acc.lcm(&d));
    Ok(estimate(outcomes, r_hat, &dens, ExtractionMethod::ExactReduction))
}

/// Convergent denominators `q_k` of `c/N`, in order.
pub fn convergent_denominators(c: usize, big_n: usize) -> Vec<usize> {
    let (mut num, mut den) = (c as u128, big_n as u128);
    let (mut q_prev, mut q) = (0u128, 1u128);
    let mut out = vec![1usize];
    while num != 0 {
        // c/N = a0 + 1/(…); walk the expansion of den/num.
        let a = den / num;
        (den, num) = (num, den % num);
        (q_prev, q) = (q, a * q + q_prev);
        if q > big_n as u128 {
            break;
        }
        if out.last() != Some(&(q as usize)) {
            out.push(q as usize);
        }
    }
    out
}

/// Smallest convergent denominator `q ≤ N` with `|c/N − p/q| ≤ 1/(2N)`.
pub fn best_convergent_denominator(c: usize, big_n: usize) -> usize {
    let x = c as f64 / big_n as f64;
    convergent_denominators(c, big_n)
        .into_iter()
        .find(|&q| {
            let p = (x * q as f64).round();
            (x - p / q as f64).abs() <= 0.5 / big_n as f64 + 1e-15
        })
        .unwrap_or_else(|| reduced_denominator(c, big_n))
}

/// Continued-fraction variant of [`extract_period`] for periods that need
/// not divide `N`.
pub fn extract_period_continued_fraction(outcomes: &[usize], big_n: usize) -> PeriodResult<PeriodEstimate> {
    check_outcomes(outcomes, big_n)?;
    let dens: Vec<usize> = outcomes.iter().map(|&c| best_convergent_denominator(c, big_n)).collect();
    let r_hat = dens.iter().fold(1usize, |acc, &d| acc.lcm(&d));
    Ok(estimate(outcomes, r_hat, &dens, ExtractionMethod::ContinuedFraction))
}

/// Check `f(q) = f(0)`, a single classical query.
fn consistent(f: &PeriodicFunction, q: usize) -> bool {
    q < f.big_n() && f.table[q] == f.table[0] || q == f.big_n()
}

/// Sample one QFT outcome per repetition from a freshly collapsed register,
/// then combine. The exact-reduction estimate is kept when one query
/// confirms it; otherwise continued fractions take over.
pub fn run_period_finding(f: &PeriodicFunction, repetitions: usize, seed: u64) -> PeriodResult<PeriodEstimate> {
    if repetitions == 0 {
        return Err(PeriodError::ZeroRepetitions);
    }
    let outcomes = sample_qft_outcomes(f, repetitions, seed)?;
    let exact = extract_period(&outcomes, f.big_n())?;
    if consistent(f, exact.r_hat) {
        return Ok(exact);
    }
    let cf = extract_period_continued_fraction(&outcomes, f.big_n())?;
    if consistent(f, cf.r_hat) {
        return Ok(cf);
    }
    Ok(exact)
}

/// One QFT outcome per repetition, each after its own collapse.
pub fn sample_qft_outcomes(f: &PeriodicFunction, repetitions: usize, seed: u64) -> PeriodResult<Vec<usize>> {
    let qft = FftQft::new(f.n_in)?;
    let mut rng = qstate::seeded_rng(seed);
    (0..repetitions)
        .map(|_| {
            let (_, reg1) = collapse_with_rng(f, &mut rng)?;
            let p = qstate::measure_distribution(&qft.apply(&reg1)?)?;
            Ok(qstate::draw(&p, &mut rng))
        })
        .collect()
}

/// Euler's totient.
pub fn totient(r: usize) -> usize {
    (1..=r).filter(|&k| k.gcd(&r) == 1).count()
}

/// Probability that one outcome alone reveals `r` when `r | N`.
pub fn coprime_probability(r: usize) -> f64 {
    totient(r) as f64 / r as f64
}

/// `1/log r` in base 2 and base e, for comparison with [`coprime_probability`].
pub fn inverse_log_bounds(r: usize) -> (f64, f64) {
    let r = r as f64;
    (1.0 / r.log2(), 1.0 / r.ln())
}

/// Read `x,f(x)` rows (an optional header line is skipped).
pub fn read_function_table<R: Read>(reader: R) -> PeriodResult<PeriodicFunction> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| PeriodError::Table(e.to_string()))?;
        if rec.len() != 2 {
            return Err(PeriodError::Table(format!("row {}: expected 2 fields, got {}", i + 1, rec.len())));
        }
        match (rec[0].parse::<usize>(), rec[1].parse::<u64>()) {
            (Ok(x), Ok(v)) => rows.push((x, v)),
            _ if i == 0 => continue,
            _ => return Err(PeriodError::Table(format!("row {}: `{},{}` is not a pair of integers", i + 1, &rec[0], &rec[1]))),
        }
    }
    rows.sort_unstable();
    if rows.iter().enumerate().any(|(i, &(x, _))| x != i) {
        return Err(PeriodError::Table("x column must list 0..N−1 exactly once".into()));
    }
    let len = rows.len();
    if !len.is_power_of_two() {
        return Err(QStateError::NotPowerOfTwo(len).into());
    }
    PeriodicFunction::new(len.trailing_zeros() as usize, rows.into_iter().map(|(_, v)| v).collect())
}

pub fn write_function_table<W: Write>(f: &PeriodicFunction, writer: W) -> PeriodResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| PeriodError::Table(e.to_string());
    w.write_record(["x", "f(x)"]).map_err(err)?;
    for (x, v) in f.table.iter().enumerate() {
        w.write_record([x.to_string(), v.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| PeriodError::Table(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::qft_matrix;
    use crate::qstate::max_abs_diff;

    #[test]
    fn period_two_states() {
        let even = prepare_periodic_state(3, 2, 0).unwrap();
        let odd = prepare_periodic_state(3, 2, 1).unwrap();
        for x in 0..8 {
            let e = if x % 2 == 0 { 0.5 } else { 0.0 };
            assert!((even.amplitude(x).re - e).abs() < 1e-15);
            assert!((odd.amplitude(x).re - (0.5 - e)).abs() < 1e-15);
        }
        assert_eq!(prepare_periodic_state(3, 8, 0).unwrap(), StateVector::basis(3, 0).unwrap());
        assert!(matches!(prepare_periodic_state(3, 2, 2), Err(PeriodError::BadOffset { .. })));
        assert!(matches!(prepare_periodic_state(3, 0, 0), Err(PeriodError::BadPeriod { .. })));
    }

    #[test]
    fn truncated_period_has_k_terms() {
        // N = 8, r = 3, x0 = 2: terms 2, 5 → K = 2.
        let s = prepare_periodic_state(3, 3, 2).unwrap();
        let nz: Vec<usize> = (0..8).filter(|&x| s.amplitude(x).norm() > 0.0).collect();
        assert_eq!(nz, vec![2, 5]);
    }

    #[test]
    fn oracle_examples() {
        let zero = PeriodicFunction::new(2, vec![0; 4]).unwrap();
        assert_eq!(oracle_unitary(&zero, 1).unwrap(), CMatrix::identity(8, 8));
        let id = PeriodicFunction::new(1, vec![0, 1]).unwrap();
        let cnot = oracle_unitary(&id, 1).unwrap();
        let one = C64::new(1.0, 0.0);
        let zero_c = C64::new(0.0, 0.0);
        let expected = CMatrix::from_row_slice(
            4,
            4,
            &[one, zero_c, zero_c, zero_c, zero_c, one, zero_c, zero_c, zero_c, zero_c, zero_c, one, zero_c, zero_c, one, zero_c],
        );
        assert_eq!(cnot, expected);
        let f = PeriodicFunction::with_period(2, 4).unwrap();
        assert!(matches!(oracle_unitary(&f, 1), Err(PeriodError::Overflow { x: 2, value: 2, n_out: 1 })));
    }

    #[test]
    fn oracle_squares_to_identity() {
        let f = PeriodicFunction::with_period(3, 3).unwrap();
        let u = oracle_unitary(&f, 2).unwrap();
        assert_eq!(&u * &u, CMatrix::identity(32, 32));
    }

    #[test]
    fn classical_oracle_examples() {
        assert_eq!(classical_period_oracle(&PeriodicFunction::with_period(3, 2).unwrap()), 2);
        assert_eq!(classical_period_oracle(&PeriodicFunction::new(3, vec![7; 8]).unwrap()), 1);
        assert_eq!(classical_period_oracle(&PeriodicFunction::new(3, (0..8).rev().collect()).unwrap()), 8);
    }

    #[test]
    fn non_injective_period_rejected() {
        assert!(matches!(PeriodicFunction::new(2, vec![0, 0, 1, 0]), Err(PeriodError::NotInjectiveOnPeriod { .. })));
    }

    #[test]
    fn output_width() {
        assert_eq!(PeriodicFunction::new(2, vec![0; 4]).unwrap().output_width(), 1);
        assert_eq!(PeriodicFunction::with_period(3, 4).unwrap().output_width(), 2);
        assert_eq!(PeriodicFunction::with_period(3, 5).unwrap().output_width(), 3);
        assert_eq!(PeriodicFunction::with_period(4, 8).unwrap().output_width(), 3);
    }

    #[test]
    fn extract_examples() {
        let e = extract_period(&[4], 8).unwrap();
        assert_eq!((e.r_hat, e.ambiguous), (2, false));
        assert_eq!(extract_period(&[2, 6], 8).unwrap().r_hat, 4);
        let z = extract_period(&[0, 0, 0], 8).unwrap();
        assert_eq!((z.r_hat, z.ambiguous, z.confidence), (1, true, 1.0));
        assert!(matches!(extract_period(&[], 8), Err(PeriodError::NoOutcomes)));
        assert!(matches!(extract_period(&[8], 8), Err(PeriodError::OutcomeOutOfRange { .. })));
    }

    #[test]
    fn confidence_counts_coprime_outcomes() {
        let e = extract_period(&[2, 4, 6, 0], 8).unwrap();
        assert_eq!(e.r_hat, 4);
        assert_eq!(e.confidence, 0.5);
    }

    #[test]
    fn convergents() {
        // 3/8 = [0; 2, 1, 2] → convergents 0/1, 1/2, 1/3, 3/8.
        assert_eq!(convergent_denominators(3, 8), vec![1, 2, 3, 8]);
        // r = 3 on N = 256: peaks near 85 and 171.
        assert_eq!(best_convergent_denominator(85, 256), 3);
        assert_eq!(best_convergent_denominator(171, 256), 3);
        assert_eq!(best_convergent_denominator(0, 256), 1);
    }

    #[test]
    fn fft_qft_matches_dense_matrix() {
        for n in 1..=6 {
            let amps: Vec<C64> = (0..1usize << n).map(|x| C64::from_polar(1.0, 0.3 * x as f64)).collect();
            let psi = StateVector::new(amps).unwrap().normalized().unwrap();
            let fast = FftQft::new(n).unwrap().apply(&psi).unwrap();
            let dense = psi.apply_unitary(&qft_matrix(n).unwrap()).unwrap();
            let diff = fast.amplitudes() - dense.amplitudes();
            assert!(diff.camax() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn dense_and_direct_collapse_agree() {
        let f = PeriodicFunction::with_period(3, 2).unwrap();
        let mut rng = qstate::seeded_rng(3);
        for _ in 0..20 {
            let (v, s) = collapse_via_dense_oracle(&f, &mut rng).unwrap();
            let expected = prepare_periodic_state(3, 2, v as usize).unwrap();
            assert!(max_abs_diff(&s.to_density().matrix().clone(), expected.to_density().matrix()) < 1e-12);
        }
    }

    #[test]
    fn r_one_collapses_to_uniform() {
        let f = PeriodicFunction::with_period(3, 1).unwrap();
        let (_, s) = collapse_via_oracle(&f, 9).unwrap();
        assert_eq!(s, StateVector::uniform_over(3, &(0..8).collect::<Vec<_>>()).unwrap());
        for seed in 0..10 {
            assert_eq!(run_period_finding(&f, 3, seed).unwrap().r_hat, 1);
        }
    }

    #[test]
    fn totients() {
        let t: Vec<usize> = (1..=10).map(totient).collect();
        assert_eq!(t, vec![1, 1, 2, 2, 4, 2, 6, 4, 6, 4]);
        assert_eq!(coprime_probability(4), 0.5);
    }

    #[test]
    fn csv_round_trip() {
        let f = PeriodicFunction::with_period(3, 4).unwrap();
        let mut buf = Vec::new();
        write_function_table(&f, &mut buf).unwrap();
        assert_eq!(read_function_table(buf.as_slice()).unwrap(), f);
        let headerless = "0,5\n1,6\n2,5\n3,6\n";
        assert_eq!(read_function_table(headerless.as_bytes()).unwrap().period(), 2);
        assert!(read_function_table("0,1\n1,2\n2,3\n".as_bytes()).is_err());
        assert!(read_function_table("0,1\n2,2\n".as_bytes()).is_err());
    }

    #[test]
    fn zero_repetitions_rejected() {
        let f = PeriodicFunction::with_period(3, 2).unwrap();
        assert!(matches!(run_period_finding(&f, 0, 1), Err(PeriodError::ZeroRepetitions)));
    }
}
