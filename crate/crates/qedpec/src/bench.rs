//! Simulated cycle benchmarking and the twirl-with-bit-flip benchmark.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{FidelityVector, PauliChannel};
use crate::codes::{bitflip_code, encode_circuit, BITFLIP_REGISTER};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pauli::{Letter, PauliString};
use crate::propagate::conjugate_clifford;
use crate::seeding;
use crate::sim::{rotate_for_measurement, run_density, sample_counts, Circuit, DensityMatrix, Gate, Layer, NoiseSite, ReadoutModel};
use crate::twirl::{search_partial_set, twirl_kraus, TwirlSet};

/// Cycle-benchmarking depths used unless configured otherwise.
pub const DEFAULT_DEPTHS: [usize; 5] = [4, 16, 32, 64, 128];

#[derive(Clone, Debug, PartialEq)]
pub struct CbDesign {
    /// Gate under test, on qubits `[0, 1, …]` of its own register.
    pub gate: Gate,
    /// Pauli noise following every application of the gate.
    pub noise: PauliChannel,
    /// Prepared eigen-operator.
    pub basis: PauliString,
    pub depths: Vec<usize>,
    /// Random frame instances per depth.
    pub instances: usize,
    /// Shots per depth, split over instances; `None` evaluates exactly.
    pub shots: Option<u64>,
    pub readout: Option<ReadoutModel>,
}

impl CbDesign {
    pub fn validate(&self) -> Result<()> {
        let n = self.noise.num_qubits();
        if self.gate.targets != (0..n).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(format!("gate {} must act on qubits 0..{n}", self.gate)));
        }
        if self.basis.num_qubits() != n || self.basis.is_identity() || self.basis.phase_exponent() != 0 {
            return Err(Error::InvalidParameter(format!("basis {} is not a non-identity Pauli on {n} qubits", self.basis)));
        }
        if self.depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("depths must be strictly increasing".into()));
        }
        let k = gate_order(&self.gate)?;
        if let Some(m) = self.depths.iter().find(|&&m| m % k != 0) {
            return Err(Error::InvalidParameter(format!("depth {m} is not a multiple of the gate order {k}")));
        }
        if self.instances == 0 {
            return Err(Error::InvalidParameter("need at least one instance".into()));
        }
        Ok(())
    }
}

/// Smallest `k ≤ 16` with `U^k ∝ I`.
pub fn gate_order(gate: &Gate) -> Result<usize> {
    let u = gate.matrix();
    let id = CMatrix::identity(u.dim());
    let mut acc = u.clone();
    for k in 1..=16 {
        if acc.diff_up_to_phase(&id) < 1e-10 {
            return Ok(k);
        }
        acc = acc.matmul(&u);
    }
    Err(Error::InvalidParameter(format!("{gate} has no order up to 16")))
}

/// Circuit for one CB instance and the signed Pauli to measure at its end.
#[derive(Clone, Debug)]
pub struct CbCircuit {
    pub circuit: Circuit,
    pub measured: PauliString,
}

/// State preparation, `m` rounds of (random Pauli frame, gate, noise) and the
/// tracked final Pauli.
pub fn build_cb_circuit<R: Rng + ?Sized>(design: &CbDesign, depth: usize, rng: &mut R) -> Result<CbCircuit> {
    let n = design.noise.num_qubits();
    let mut c = Circuit::new(n);
    let mut prep = Vec::new();
    for q in 0..n {
        match design.basis.letter(q) {
            Letter::X => prep.push(vec![Gate::h(q)]),
            Letter::Y => prep.push(vec![Gate::h(q), Gate::s(q)]),
            _ => {}
        }
    }
    for step in 0..2 {
        let layer: Vec<Gate> = prep.iter().filter_map(|g| g.get(step).cloned()).collect();
        if !layer.is_empty() {
            c.push_layer(Layer::new(layer))?;
        }
    }
    let mut tracked = design.basis;
    for _ in 0..depth {
        let frame = PauliString::from_label(n, rng.random_range(0..1usize << (2 * n)));
        if !frame.is_identity() {
            c.push(Gate::pauli(&frame))?;
            if !frame.commutes_with(&tracked) {
                tracked = tracked.negated();
            }
        }
        tracked = conjugate_clifford(&design.gate, &tracked)?;
        c.push_layer(
            Layer::new(vec![design.gate.clone()]).with_noise(NoiseSite::pauli((0..n).collect(), design.noise.clone())),
        )?;
    }
    Ok(CbCircuit { circuit: c, measured: tracked })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbPoint {
    pub depth: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Runs every depth of a design; instances use independent seeded streams.
pub fn run_cb(design: &CbDesign, seed: u64) -> Result<Vec<CbPoint>> {
    design.validate()?;
    let n = design.noise.num_qubits();
    design
        .depths
        .par_iter()
        .map(|&m| {
            let mut values = Vec::with_capacity(design.instances);
            let mut shots_used = 0u64;
            for i in 0..design.instances {
                let mut rng = seeding::stream(seed, &format!("cb/{}/{m}", design.basis), i as u64);
                let cb = build_cb_circuit(design, m, &mut rng)?;
                let out = run_density(&cb.circuit, &DensityMatrix::zero_state(n))?;
                let (rot, mask, sign) = rotate_for_measurement(&out, &cb.measured)?;
                match design.shots {
                    None => values.push(out.expectation(&cb.measured)?),
                    Some(total) => {
                        let shots = (total / design.instances as u64).max(1);
                        let counts = sample_counts(&rot, shots, design.readout.as_ref(), &mut rng)?;
                        values.push(sign * counts.parity_expectation(mask).expect("shots > 0"));
                        shots_used += shots;
                    }
                }
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let std_error = if shots_used > 0 { ((1.0 - mean * mean).max(0.0) / shots_used as f64).sqrt() } else { 0.0 };
            Ok(CbPoint { depth: m, mean, std_error })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub f: f64,
    /// Covariance of `(ln A, ln f)`.
    pub covariance: [[f64; 2]; 2],
    /// Weighted RMS residual in log space.
    pub residual: f64,
}

/// Weighted least squares of `ln y = ln A + m ln f`.
///
/// Weights are `(y/σ)²`, or `y²` when no errors are given. `f` is clamped to 1
/// when the data rise within their error bars.
pub fn fit_exponential(points: &[CbPoint]) -> Result<ExpFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 depths, got {}", points.len())));
    }
    let residuals = || points.iter().map(|p| p.mean).collect::<Vec<_>>();
    if points.iter().any(|p| p.mean <= 0.0) {
        return Err(Error::Fit { message: "non-positive CB value".into(), residuals: residuals() });
    }
    let use_errors = points.iter().all(|p| p.std_error > 0.0);
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let w = if use_errors { (p.mean / p.std_error).powi(2) } else { p.mean * p.mean };
        let (x, y) = (p.depth as f64, p.mean.ln());
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::Fit { message: "degenerate depths".into(), residuals: residuals() });
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    let res: Vec<f64> = points.iter().map(|p| p.mean.ln() - intercept - slope * p.depth as f64).collect();
    let wrss: f64 = points
        .iter()
        .zip(&res)
        .map(|(p, r)| (if use_errors { (p.mean / p.std_error).powi(2) } else { p.mean * p.mean }) * r * r)
        .sum();
    let residual = (wrss / sw).sqrt();
    // Oscillating or non-exponential data leave large log residuals.
    if residual > 0.25 {
        return Err(Error::Fit { message: format!("poor exponential fit, rms log residual {residual:.3}"), residuals: res });
    }
    let scale = if use_errors { 1.0 } else { wrss / (points.len() as f64 - 2.0).max(1.0) };
    let covariance = [[sxx / det * scale, -sx / det * scale], [-sx / det * scale, sw / det * scale]];
    Ok(ExpFit { amplitude: intercept.exp(), f: slope.exp().min(1.0), covariance, residual })
}

/// Orbits of the non-identity Paulis under `P ↦ U P U†`, ignoring signs.
/// Orbits of length one are individually learnable.
pub fn learnability_partition(gate: &Gate, n: usize) -> Result<Vec<Vec<PauliString>>> {
    let mut seen = vec![false; 1 << (2 * n)];
    seen[0] = true;
    let mut orbits = Vec::new();
    for l in 1..1usize << (2 * n) {
        if seen[l] {
            continue;
        }
        let start = PauliString::from_label(n, l);
        let mut orbit = vec![start];
        seen[l] = true;
        let mut cur = conjugate_clifford(gate, &start)?.unsigned();
        while cur != start {
            seen[cur.label()] = true;
            orbit.push(cur);
            cur = conjugate_clifford(gate, &cur)?.unsigned();
        }
        orbits.push(orbit);
    }
    Ok(orbits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    /// One Pauli, or the orbit whose fidelities appear only as a product.
    pub labels: Vec<PauliString>,
    /// Product of the orbit's fidelities.
    pub product: f64,
    /// Equal-split value assigned to each member: `product^{1/len}`.
    pub per_pauli: f64,
    pub amplitude: f64,
    pub residual: f64,
    pub learnable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbSettings {
    pub depths: Vec<usize>,
    pub shots: Option<u64>,
    pub instances: usize,
    pub readout: Option<ReadoutModel>,
    pub seed: u64,
}

impl Default for CbSettings {
    fn default() -> Self {
        Self { depths: DEFAULT_DEPTHS.to_vec(), shots: Some(10_000), instances: 4, readout: None, seed: 0 }
    }
}

/// Cycle-benchmarks every orbit of `gate` under injected Pauli `noise`.
pub fn learn_pauli_fidelities(gate: &Gate, noise: &PauliChannel, settings: &CbSettings) -> Result<Vec<FidelityRecord>> {
    let n = noise.num_qubits();
    let orbits = learnability_partition(gate, n)?;
    orbits
        .par_iter()
        .map(|orbit| {
            let design = CbDesign {
                gate: gate.clone(),
                noise: noise.clone(),
                basis: orbit[0],
                depths: settings.depths.clone(),
                instances: settings.instances,
                shots: settings.shots,
                readout: settings.readout.clone(),
            };
            let fit = fit_exponential(&run_cb(&design, settings.seed)?)?;
            let k = orbit.len() as i32;
            Ok(FidelityRecord {
                labels: orbit.clone(),
                product: fit.f.powi(k),
                per_pauli: fit.f,
                amplitude: fit.amplitude,
                residual: fit.residual,
                learnable: k == 1,
            })
        })
        .collect()
}

/// Fidelity vector with the equal-split values; `f_I = 1`.
pub fn fidelity_vector(n: usize, records: &[FidelityRecord]) -> Result<FidelityVector> {
    let mut f = vec![1.0; 1 << (2 * n)];
    for r in records {
        for p in &r.labels {
            f[p.label()] = r.per_pauli;
        }
    }
    FidelityVector::new(n, f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlMode {
    None,
    Full,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwirlBenchConfig {
    /// Repetition counts `n`; each runs `k·n` gate layers with `U^k = I`.
    pub repetitions: Vec<usize>,
    /// Per-qubit coherent over-rotation angles after every layer.
    pub rx_angle: f64,
    pub rz_angle: f64,
    pub modes: Vec<TwirlMode>,
    /// `None` evaluates stabilizers exactly.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for TwirlBenchConfig {
    fn default() -> Self {
        Self {
            repetitions: vec![0, 1, 2, 4, 8, 16],
            rx_angle: 0.08,
            rz_angle: 0.01,
            modes: vec![TwirlMode::None, TwirlMode::Full, TwirlMode::Partial],
            shots: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwirlBenchRow {
    pub mode: TwirlMode,
    pub repetitions: usize,
    pub layers: usize,
    pub xxx: f64,
    pub izz: f64,
}

/// The benchmarked gate sequence `U = CX(1,2)·CX(0,1)` on the data qubits.
pub fn twirl_bench_gates() -> Vec<Gate> {
    vec![Gate::cx(0, 1), Gate::cx(1, 2)]
}

fn coherent_noise(rx: f64, rz: f64) -> CMatrix {
    let one = Gate::rz(0, rz).matrix().matmul(&Gate::rx(0, rx).matrix());
    one.kron(&one).kron(&one)
}

/// Twirl set over the three data qubits for a mode. The partial set is the
/// per-qubit optimum for X-type residual errors, tensored over the qubits.
pub fn twirl_bench_set(mode: TwirlMode, rx: f64, rz: f64) -> Result<TwirlSet> {
    match mode {
        TwirlMode::None => Ok(TwirlSet::trivial(3)),
        TwirlMode::Full => Ok(TwirlSet::full(3)),
        TwirlMode::Partial => {
            let one = Gate::rz(0, rz).matrix().matmul(&Gate::rx(0, rx).matrix());
            let chi = crate::twirl::chi_of_unitary(&one)?;
            let x_type = |p: &PauliString| p.z_mask() == 0;
            let pool: Vec<PauliString> = PauliString::all(1).collect();
            let (set, _) = search_partial_set(&chi, &x_type, &pool, 4)?;
            let mut members = set.members().to_vec();
            for _ in 1..3 {
                members = members.iter().flat_map(|a| set.members().iter().map(move |b| a.tensor(b))).collect();
            }
            TwirlSet::new(members)
        }
    }
}

/// GHZ₃ on the data qubits, `k·n` noisy (and twirled) layers of `U`, one
/// syndrome-and-correct round, then `⟨XXX⟩` and `⟨IZZ⟩` on the data qubits.
///
/// The twirl is averaged exactly: each layer's noise becomes the mixture
/// `{Q N Q / |S|}` over the frame images `Q ∈ U S U†`.
pub fn run_twirl_benchmark(config: &TwirlBenchConfig) -> Result<Vec<TwirlBenchRow>> {
    let gates = twirl_bench_gates();
    let mut u = Circuit::new(3);
    for g in &gates {
        u.push(g.clone())?;
    }
    let k = gate_order(&Gate::unitary("u", u.unitary(), vec![0, 1, 2])?)?;
    let code = bitflip_code();
    let noise = coherent_noise(config.rx_angle, config.rz_angle);
    let jobs: Vec<(TwirlMode, usize)> =
        config.modes.iter().flat_map(|&m| config.repetitions.iter().map(move |&r| (m, r))).collect();
    jobs.par_iter()
        .enumerate()
        .map(|(idx, &(mode, reps))| {
            let set = twirl_bench_set(mode, config.rx_angle, config.rz_angle)?;
            let images: Vec<PauliString> = set
                .members()
                .iter()
                .map(|p| gates.iter().try_fold(*p, |acc, g| conjugate_clifford(g, &acc)))
                .collect::<Result<_>>()?;
            let kraus = twirl_kraus(&[(1.0, noise.clone())], &images)?;
            let mut c = Circuit::new(BITFLIP_REGISTER);
            c.push(Gate::h(0))?;
            c.extend(&encode_circuit(&code.spec))?;
            for _ in 0..k * reps {
                for (i, g) in gates.iter().enumerate() {
                    let mut layer = Layer::new(vec![g.clone()]);
                    if i + 1 == gates.len() {
                        layer = layer.with_noise(NoiseSite::kraus(vec![0, 1, 2], kraus.clone()));
                    }
                    c.push_layer(layer)?;
                }
            }
            c.extend(&code.syndrome_circuit())?;
            c.extend(&code.correction_circuit())?;
            let out = run_density(&c, &DensityMatrix::zero_state(BITFLIP_REGISTER))?;
            let data = out.partial_trace(&[0, 1, 2])?;
            let mut rng = seeding::stream(config.seed, "twirl-bench", idx as u64);
            let mut measure = |s: &str| -> Result<f64> {
                let p: PauliString = s.parse()?;
                match config.shots {
                    None => data.expectation(&p),
                    Some(shots) => {
                        let (rot, mask, sign) = rotate_for_measurement(&data, &p)?;
                        let counts = sample_counts(&rot, shots, None, &mut rng)?;
                        Ok(sign * counts.parity_expectation(mask).expect("shots > 0"))
                    }
                }
            };
            Ok(TwirlBenchRow { mode, repetitions: reps, layers: k * reps, xxx: measure("XXX")?, izz: measure("IZZ")? })
        })
        .collect()
}
