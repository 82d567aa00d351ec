//! Experiment drivers behind the `qftnmr` binary.
//!
//! Every run produces a [`RunReport`]: a schema-versioned JSON summary, the
//! plot-ready files that go next to it, and the invariants it checked. A
//! report with a failed invariant is still written, together with
//! `failure.json`, and the binary exits nonzero.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use qftnmr::circuits::{self, build_qft_circuit};
use qftnmr::period::{self, PeriodEstimate, PeriodicFunction};
use qftnmr::pulse::{self, compile, hadamard_pulses, qft3_reference_program, simplify, PulseOp, PulseProgram};
use qftnmr::qstate::{self, bitstring, DensityMatrix};
use qftnmr::readout::{self, Spectrum, Tomographer};
use qftnmr::spin::{self, MoleculeSpec, PseudoPureVariant, SimOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Default molecule file, read when `--molecule` is not given.
pub const MOLECULE_ENV: &str = "QFTNMR_MOLECULE";

const PREP_TOL: f64 = 1e-6;
const TOMO_TOL: f64 = 1e-8;
const CORR_TOL: f64 = 1e-6;
const RESOLUTION_HZ: f64 = 1.0;
const LINE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Full QFT on three carbons, read out by tomography.
    #[value(alias = "1")]
    FullQftTomography,
    /// Measurement-conditioned QFT read out on the observer spin.
    #[value(alias = "2")]
    ObserverSpectral,
    /// Sampled period finding on a function table or generator.
    #[value(alias = "period")]
    PeriodFinding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum QftProgram {
    /// The hand-optimized three-qubit sequence.
    #[default]
    Reference,
    /// The gate circuit compiled and simplified.
    Compiled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub molecule_path: Option<PathBuf>,
    pub n_qubits: usize,
    pub r: usize,
    pub x0: usize,
    pub shots: Option<usize>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub strict_delays: bool,
    pub diagonal_gradient: bool,
    pub original_sequence: bool,
    pub qft_program: QftProgram,
    /// Experiment 2 without Hadamards or QFT.
    pub baseline: bool,
    pub function_table: Option<PathBuf>,
    pub linewidth_hz: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::FullQftTomography,
            molecule_path: None,
            n_qubits: 3,
            r: 2,
            x0: 0,
            shots: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
            strict_delays: false,
            diagonal_gradient: false,
            original_sequence: false,
            qft_program: QftProgram::Reference,
            baseline: false,
            function_table: None,
            linewidth_hz: None,
        }
    }
}

impl RunConfig {
    pub fn sim_options(&self) -> SimOptions {
        SimOptions { strict_delays: self.strict_delays, diagonal_gradient: self.diagonal_gradient }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Invariant {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }

    fn below(name: &str, value: f64, tol: f64) -> Self {
        Self::new(name, value <= tol, format!("{value:e} <= {tol:e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub experiment: Experiment,
    /// Pretty-printed summary, newline-terminated.
    pub summary: String,
    /// Extra files, by name.
    pub artifacts: Vec<(String, String)>,
    pub invariants: Vec<Invariant>,
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    schema_version: u32,
    experiment: Experiment,
    failed: Vec<&'a Invariant>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.pass)
    }

    pub fn failures(&self) -> Vec<&Invariant> {
        self.invariants.iter().filter(|i| !i.pass).collect()
    }

    /// Write `summary.json` and the artifacts; add `failure.json` when an
    /// invariant failed, and remove a stale one otherwise.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("summary.json"), &self.summary)?;
        for (name, body) in &self.artifacts {
            fs::write(dir.join(name), body)?;
        }
        let failure = dir.join("failure.json");
        if self.passed() {
            if failure.exists() {
                fs::remove_file(&failure)?;
            }
        } else {
            let rec = FailureRecord { schema_version: SCHEMA_VERSION, experiment: self.experiment, failed: self.failures() };
            fs::write(failure, to_json(&rec)?)?;
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// `--molecule`, else the file named by `QFTNMR_MOLECULE`, else the built-in
/// alanine parameters.
pub fn load_molecule(path: Option<&Path>) -> Result<MoleculeSpec> {
    let env = std::env::var_os(MOLECULE_ENV).map(PathBuf::from);
    match path.map(Path::to_path_buf).or(env) {
        Some(p) => MoleculeSpec::from_path(&p).with_context(|| format!("loading molecule {}", p.display())),
        None => Ok(MoleculeSpec::alanine()),
    }
}

fn period_exponent(r: usize, n: usize) -> Result<usize> {
    ensure!(r >= 1 && r.is_power_of_two() && r <= 1 << n, "r = {r} must divide N = {}", 1usize << n);
    Ok(r.trailing_zeros() as usize)
}

/// Pulses taking `|0…0⟩` on `spins` to the uniform superposition over
/// `x0, x0 + r, …`: Hadamards on the high qubits and π flips on the low
/// bits of `x0`.
pub fn periodic_input_pulses(spins: &[usize], r: usize, x0: usize) -> Result<Vec<PulseOp>> {
    let n = spins.len();
    let e = period_exponent(r, n)?;
    ensure!(x0 < r, "x0 = {x0} must be below r = {r}");
    let mut ops = Vec::new();
    for &s in &spins[..n - e] {
        ops.extend(hadamard_pulses(s));
    }
    for (j, &s) in spins[n - e..].iter().enumerate() {
        if qstate::bit(x0, j, e) == 1 {
            ops.push(PulseOp::x(s, PI));
        }
    }
    Ok(ops)
}

fn support_of(state: &qstate::StateVector) -> Vec<usize> {
    (0..state.dim()).filter(|&i| state.amplitude(i).norm_sqr() > 1e-12).collect()
}

fn run_ops(rho: &DensityMatrix, ops: &[PulseOp], m: &MoleculeSpec, opts: SimOptions) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    for op in ops {
        out = spin::apply_pulse(&out, op, m, opts)?;
    }
    Ok(out)
}

fn spectrum_csv(s: &Spectrum) -> Result<String> {
    let mut buf = Vec::new();
    readout::write_spectrum_csv(s, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn lineshape_csv(s: &Spectrum, linewidth: f64) -> Result<String> {
    let lo = s.lines.iter().map(|l| l.frequency_hz).fold(f64::INFINITY, f64::min) - 10.0 * linewidth;
    let hi = s.lines.iter().map(|l| l.frequency_hz).fold(f64::NEG_INFINITY, f64::max) + 10.0 * linewidth;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frequency_hz", "intensity"])?;
    for (f, y) in readout::render_lorentzian(s, linewidth, lo, hi, 2001) {
        w.write_record([f.to_string(), y.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct PreparationSummary {
    name: String,
    scale: f64,
    relative_residual: f64,
    correlation: f64,
}

fn prepare(prog: &spin::PreparationProgram, m: &MoleculeSpec, opts: SimOptions) -> Result<(DensityMatrix, PreparationSummary)> {
    let rho = prog.run(m, opts)?;
    let fit = spin::fit_to_target(&rho, &prog.target)?;
    let correlation = readout::attenuated_correlation(&prog.target, &rho)?;
    Ok((rho, PreparationSummary { name: prog.name.clone(), scale: fit.scale, relative_residual: fit.relative_residual, correlation }))
}

#[derive(Serialize)]
struct ModeSummary {
    strict_delays: bool,
    diagonal_gradient: bool,
}

#[derive(Serialize)]
struct Exp1Summary {
    schema_version: u32,
    experiment: Experiment,
    molecule: String,
    spins: Vec<String>,
    r: usize,
    x0: usize,
    modes: ModeSummary,
    sequence: PseudoPureVariant,
    preparation: PreparationSummary,
    qft_program: QftProgram,
    qft_program_text: String,
    qft_coherent_ops: usize,
    tomography_settings: usize,
    tomography_residual: f64,
    correlation: f64,
    populations: Vec<f64>,
    support: Vec<String>,
    k: Option<usize>,
    r_inferred: Option<usize>,
    spectra: Vec<String>,
    invariants: Vec<Invariant>,
}

/// Pseudo-pure preparation, periodic input, full QFT, tomography,
/// correlation against the ideal state and the period from its support.
pub fn run_experiment_1(cfg: &RunConfig) -> Result<RunReport> {
    ensure!(cfg.n_qubits == 3, "experiment 1 runs on three qubits, not {}", cfg.n_qubits);
    let opts = cfg.sim_options();
    let m = load_molecule(cfg.molecule_path.as_deref())?.with_active(&["C'", "Ca", "Cb"])?;
    let variant = if cfg.original_sequence { PseudoPureVariant::Original } else { PseudoPureVariant::Corrected };
    let input = periodic_input_pulses(&[0, 1, 2], cfg.r, cfg.x0)?;

    let (rho0, prep) = prepare(&spin::pseudo_pure_program(&m, variant)?, &m, opts)?;
    let qft = match cfg.qft_program {
        QftProgram::Reference => qft3_reference_program(),
        QftProgram::Compiled => simplify(&compile(&build_qft_circuit(3, true)?, true)?),
    };
    let rho = spin::run_program(&run_ops(&rho0, &input, &m, opts)?, &qft, &m, opts)?;

    let ideal_state = qstate::StateVector::apply_unitary(&period::prepare_periodic_state(3, cfg.r, cfg.x0)?, &circuits::qft_matrix(3)?)?;
    let ideal = ideal_state.to_density().to_deviation();
    let tomo = Tomographer::new(&m)?.tomograph(&rho)?;
    let correlation = readout::attenuated_correlation(&ideal, &tomo.reconstructed)?;
    let populations: Vec<f64> = (0..8).map(|i| tomo.reconstructed.matrix()[(i, i)].re).collect();
    let support = readout::support_from_diagonal(&tomo.reconstructed, 1e-6);
    let inferred = readout::infer_period_from_indices(&support, 3).ok();

    let mut artifacts = vec![("tomogram.json".to_string(), to_json(&readout::tomogram_json(&tomo.reconstructed))?)];
    let mut spectra = Vec::new();
    for s in 0..3 {
        let sp = readout::synthesize_spectrum(&rho, s, &m, Some(&PulseOp::y(s, PI / 2.0)))?;
        let name = format!("spectrum_spin{}.csv", s + 1);
        artifacts.push((name.clone(), spectrum_csv(&sp)?));
        if let Some(lw) = cfg.linewidth_hz {
            artifacts.push((format!("lineshape_spin{}.csv", s + 1), lineshape_csv(&sp, lw)?));
        }
        spectra.push(format!("{name}: {}", m.label(s)));
    }

    let invariants = vec![
        Invariant::below("preparation_residual", prep.relative_residual, PREP_TOL),
        Invariant::below("tomography_residual", tomo.residual, TOMO_TOL),
        Invariant::below("correlation", (correlation - 1.0).abs(), CORR_TOL),
        Invariant::new(
            "period",
            inferred.map(|(_, r)| r) == Some(cfg.r),
            format!("support {support:?}, inferred {inferred:?}, expected r = {}", cfg.r),
        ),
    ];
    let summary = Exp1Summary {
        schema_version: SCHEMA_VERSION,
        experiment: Experiment::FullQftTomography,
        molecule: m.name.clone().unwrap_or_default(),
        spins: m.active_labels().to_vec(),
        r: cfg.r,
        x0: cfg.x0,
        modes: ModeSummary { strict_delays: cfg.strict_delays, diagonal_gradient: cfg.diagonal_gradient },
        sequence: variant,
        preparation: prep,
        qft_program: cfg.qft_program,
        qft_program_text: qft.to_text(),
        qft_coherent_ops: qft.coherent_op_count(),
        tomography_settings: tomo.readout_set.len(),
        tomography_residual: tomo.residual,
        correlation,
        populations,
        support: support.iter().map(|&i| bitstring(i, 3)).collect(),
        k: inferred.map(|(k, _)| k),
        r_inferred: inferred.map(|(_, r)| r),
        spectra,
        invariants: invariants.clone(),
    };
    Ok(RunReport { experiment: summary.experiment, summary: to_json(&summary)?, artifacts, invariants })
}

#[derive(Serialize)]
struct LineSummary {
    frequency_hz: f64,
    amplitude: f64,
    assignment: String,
}

#[derive(Serialize)]
struct Exp2Summary {
    schema_version: u32,
    experiment: Experiment,
    molecule: String,
    spins: Vec<String>,
    baseline: bool,
    r: Option<usize>,
    x0: Option<usize>,
    modes: ModeSummary,
    preparation: PreparationSummary,
    observer_lines: Vec<LineSummary>,
    decoded_states: Vec<String>,
    expected_states: Vec<String>,
    k: Option<usize>,
    r_inferred: Option<usize>,
    seed: u64,
    shots: usize,
    shot_counts: Vec<(String, usize)>,
    invariants: Vec<Invariant>,
}

const EXP2_SHOTS: usize = 1024;

/// Labeled pseudo-pure preparation, periodic input on the three
/// computational spins, measurement-conditioned QFT, then the observer
/// spectrum decoded into computational-basis states.
pub fn run_experiment_2(cfg: &RunConfig) -> Result<RunReport> {
    ensure!(cfg.n_qubits == 3, "experiment 2 runs on three computational qubits, not {}", cfg.n_qubits);
    let opts = cfg.sim_options();
    let m = load_molecule(cfg.molecule_path.as_deref())?.with_active(&["Ca", "C'", "Cb", "H"])?.with_coupling("Cb", "H", 0.0)?;
    let comp = [1, 2, 3];

    let (mut rho, prep) = prepare(&spin::labeled_pseudo_pure_program(&m)?, &m, opts)?;
    let ideal = period::prepare_periodic_state(3, cfg.r, cfg.x0)?;
    let expected = if cfg.baseline {
        vec![0]
    } else {
        rho = run_ops(&rho, &periodic_input_pulses(&comp, cfg.r, cfg.x0)?, &m, opts)?;
        rho = spin::run_semiclassical_qft_ensemble(&rho, &comp, &m, opts)?;
        support_of(&ideal.apply_unitary(&circuits::qft_matrix(3)?)?)
    };

    let sp = readout::synthesize_spectrum(&rho, 0, &m, Some(&PulseOp::y(0, PI / 2.0)))?;
    let decoded = readout::decode_observer_readout(&sp, RESOLUTION_HZ, LINE_FLOOR)?;
    let mut states: Vec<usize> = decoded.iter().map(|d| d.state).collect();
    states.sort_unstable();
    let inferred = readout::infer_period_from_indices(&states, 3).ok();

    let shots = if cfg.baseline { 0 } else { cfg.shots.unwrap_or(EXP2_SHOTS) };
    let mut counts = [0usize; 8];
    if shots > 0 {
        for y in circuits::sample_semiclassical_qft(&ideal, cfg.seed, shots)? {
            counts[y] += 1;
        }
    }

    let mut artifacts = vec![("spectrum_observer.csv".to_string(), spectrum_csv(&sp)?)];
    if let Some(lw) = cfg.linewidth_hz {
        artifacts.push(("lineshape_observer.csv".to_string(), lineshape_csv(&sp, lw)?));
    }
    let expected_r = if cfg.baseline { 1 } else { cfg.r };
    let invariants = vec![
        Invariant::below("preparation_residual", prep.relative_residual, PREP_TOL),
        Invariant::new("decoded_states", states == expected, format!("decoded {states:?}, expected {expected:?}")),
        Invariant::new("period", inferred.map(|(_, r)| r) == Some(expected_r), format!("inferred {inferred:?}, expected r = {expected_r}")),
    ];
    let summary = Exp2Summary {
        schema_version: SCHEMA_VERSION,
        experiment: Experiment::ObserverSpectral,
        molecule: m.name.clone().unwrap_or_default(),
        spins: m.active_labels().to_vec(),
        baseline: cfg.baseline,
        r: (!cfg.baseline).then_some(cfg.r),
        x0: (!cfg.baseline).then_some(cfg.x0),
        modes: ModeSummary { strict_delays: cfg.strict_delays, diagonal_gradient: cfg.diagonal_gradient },
        preparation: prep,
        observer_lines: sp
            .lines
            .iter()
            .map(|l| LineSummary { frequency_hz: l.frequency_hz, amplitude: l.amplitude, assignment: l.assignment.clone() })
            .collect(),
        decoded_states: states.iter().map(|&s| bitstring(s, 3)).collect(),
        expected_states: expected.iter().map(|&s| bitstring(s, 3)).collect(),
        k: inferred.map(|(k, _)| k),
        r_inferred: inferred.map(|(_, r)| r),
        seed: cfg.seed,
        shots,
        shot_counts: (0..8).filter(|&y| counts[y] > 0).map(|y| (bitstring(y, 3), counts[y])).collect(),
        invariants: invariants.clone(),
    };
    Ok(RunReport { experiment: summary.experiment, summary: to_json(&summary)?, artifacts, invariants })
}

#[derive(Serialize)]
struct PeriodSummary {
    schema_version: u32,
    experiment: Experiment,
    n: usize,
    big_n: usize,
    source: String,
    seed: u64,
    repetitions: usize,
    r_classical: usize,
    estimate: PeriodEstimate,
    coprime_fraction: f64,
    inverse_log_bound_base2: f64,
    inverse_log_bound_base_e: f64,
    invariants: Vec<Invariant>,
}

/// The function is `f(x) = (x + x0) mod r` unless a table is given.
pub fn run_period_finding_cli(cfg: &RunConfig) -> Result<RunReport> {
    let (f, source) = match &cfg.function_table {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let f = period::read_function_table(file).with_context(|| format!("reading {}", path.display()))?;
            let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (f, format!("table {name}"))
        }
        None => {
            period_exponent(cfg.r, cfg.n_qubits)?;
            ensure!(cfg.x0 < cfg.r, "x0 = {} must be below r = {}", cfg.x0, cfg.r);
            let table = (0..1usize << cfg.n_qubits).map(|x| ((x + cfg.x0) % cfg.r) as u64).collect();
            (PeriodicFunction::new(cfg.n_qubits, table)?, format!("(x + {}) mod {}", cfg.x0, cfg.r))
        }
    };
    let reps = cfg.shots.unwrap_or(4 * f.n_in());
    if reps == 0 {
        bail!("need at least one repetition");
    }
    let r_classical = period::classical_period_oracle(&f);
    let estimate = period::run_period_finding(&f, reps, cfg.seed)?;
    let (b2, be) = period::inverse_log_bounds(r_classical);
    let invariants =
        vec![Invariant::new("period", estimate.r_hat == r_classical, format!("r_hat {}, classical {r_classical}", estimate.r_hat))];
    let summary = PeriodSummary {
        schema_version: SCHEMA_VERSION,
        experiment: Experiment::PeriodFinding,
        n: f.n_in(),
        big_n: f.big_n(),
        source,
        seed: cfg.seed,
        repetitions: reps,
        r_classical,
        estimate,
        coprime_fraction: period::coprime_probability(r_classical),
        inverse_log_bound_base2: b2,
        inverse_log_bound_base_e: be,
        invariants: invariants.clone(),
    };
    Ok(RunReport { experiment: summary.experiment, summary: to_json(&summary)?, artifacts: Vec::new(), invariants })
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    match cfg.experiment {
        Experiment::FullQftTomography => run_experiment_1(cfg),
        Experiment::ObserverSpectral => run_experiment_2(cfg),
        Experiment::PeriodFinding => run_period_finding_cli(cfg),
    }
}

/// Compile a circuit (the `n`-qubit QFT by default) to pulse text.
pub fn compile_to_text(circuit: Option<&str>, n: usize, keep_swaps: bool, no_simplify: bool) -> Result<PulseProgram> {
    let c = match circuit {
        Some(text) => circuits::parse_circuit(text)?,
        None => build_qft_circuit(n, true)?,
    };
    let p = compile(&c, !keep_swaps)?;
    Ok(if no_simplify { p } else { simplify(&p) })
}

/// Equivalence report of a pulse program against the QFT on its spin count.
pub fn verify_against_qft(program: &PulseProgram, tolerance: f64) -> Result<pulse::EquivalenceReport> {
    let u = pulse::program_unitary(program)?;
    Ok(pulse::assert_equivalent(&u, &circuits::qft_matrix(program.n_spins())?, tolerance)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(experiment: Experiment, r: usize) -> RunConfig {
        RunConfig { experiment, r, ..RunConfig::default() }
    }

    #[test]
    fn periodic_input_matches_generator() {
        for r in [1, 2, 4, 8] {
            for x0 in 0..r {
                let ops = periodic_input_pulses(&[0, 1, 2], r, x0).unwrap();
                let p = PulseProgram::with_ops(3, ops).unwrap();
                let out = qstate::StateVector::basis(3, 0).unwrap().apply_unitary(&pulse::program_unitary(&p).unwrap()).unwrap();
                let want = period::prepare_periodic_state(3, r, x0).unwrap();
                assert!((out.overlap_sqr(&want) - 1.0).abs() < 1e-12, "r={r} x0={x0}");
            }
        }
        assert!(periodic_input_pulses(&[0, 1, 2], 3, 0).is_err());
        assert!(periodic_input_pulses(&[0, 1, 2], 2, 2).is_err());
    }

    #[test]
    fn experiment_1_periods() {
        for (r, k) in [(1, 8), (2, 4), (4, 2)] {
            let rep = run_experiment_1(&cfg(Experiment::FullQftTomography, r)).unwrap();
            assert!(rep.passed(), "{:?}", rep.failures());
            let v: serde_json::Value = serde_json::from_str(&rep.summary).unwrap();
            assert_eq!(v["k"], k);
            assert_eq!(v["r_inferred"], r);
        }
    }

    #[test]
    fn original_sequence_fails_loudly() {
        let rep = run_experiment_1(&RunConfig { original_sequence: true, ..RunConfig::default() }).unwrap();
        assert!(rep.failures().iter().any(|i| i.name == "preparation_residual"));
    }

    #[test]
    fn experiment_2_readings() {
        let base = run_experiment_2(&RunConfig { baseline: true, ..cfg(Experiment::ObserverSpectral, 2) }).unwrap();
        assert!(base.passed(), "{:?}", base.failures());
        for (r, n_states) in [(2, 2), (4, 4)] {
            let rep = run_experiment_2(&cfg(Experiment::ObserverSpectral, r)).unwrap();
            assert!(rep.passed(), "{:?}", rep.failures());
            let v: serde_json::Value = serde_json::from_str(&rep.summary).unwrap();
            assert_eq!(v["decoded_states"].as_array().unwrap().len(), n_states);
        }
    }

    #[test]
    fn period_cli_generator_and_constant() {
        let rep = run_period_finding_cli(&RunConfig { n_qubits: 3, r: 2, shots: Some(20), ..cfg(Experiment::PeriodFinding, 2) }).unwrap();
        assert!(rep.passed());
        let rep = run_period_finding_cli(&RunConfig { n_qubits: 4, r: 1, ..cfg(Experiment::PeriodFinding, 1) }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.summary).unwrap();
        assert_eq!(v["estimate"]["r_hat"], 1);
    }

    #[test]
    fn bad_configs() {
        assert!(run_experiment_1(&cfg(Experiment::FullQftTomography, 3)).is_err());
        assert!(run_experiment_1(&RunConfig { n_qubits: 4, ..RunConfig::default() }).is_err());
        assert!(run_period_finding_cli(&RunConfig { x0: 5, ..cfg(Experiment::PeriodFinding, 4) }).is_err());
    }

    #[test]
    fn compile_and_verify() {
        let p = compile_to_text(None, 3, false, false).unwrap();
        assert!(p.coherent_op_count() <= 11);
        assert!(verify_against_qft(&p, 1e-8).unwrap().pass);
        assert!(verify_against_qft(&qft3_reference_program(), 1e-8).unwrap().pass);
        let one_h = compile_to_text(Some("qubits 2\nH 1\n"), 2, false, false).unwrap();
        assert!(!verify_against_qft(&one_h, 1e-8).unwrap().pass);
    }
}
