use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{depolarizing, fidelities_from_rates, invert_pauli_channel, PauliChannel, QuasiProbability};
use crate::codes::qedc;
use crate::error::{Error, Result};
use crate::mitigate::{pec_direct, PecExecutor};
use crate::pauli::PauliString;
use crate::propagate::{accumulate_total_noise, filter_detectable, offdiagonal_bias_bound, reduce_to_pauli, FilterOutcome, Truncation};
use crate::seeding;
use crate::sim::{run_density, Circuit, DensityMatrix, Gate, ReadoutModel};

use super::h2::{h2_energy, H2Coefficients, H2Expectations};
use super::spline::{golden_section_min, NaturalSpline};

/// Data qubits of the decoded register.
const DATA: [usize; 2] = [2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    Z1,
    Z2,
    Z1Z2,
    X1X2,
}

impl Observable {
    pub const ALL: [Observable; 4] = [Observable::Z1, Observable::Z2, Observable::Z1Z2, Observable::X1X2];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Z1 => "Z1",
            Observable::Z2 => "Z2",
            Observable::Z1Z2 => "Z1Z2",
            Observable::X1X2 => "X1X2",
        }
    }

    /// Operator on the two logical qubits.
    pub fn logical(self) -> PauliString {
        let s = match self {
            Observable::Z1 => "ZI",
            Observable::Z2 => "IZ",
            Observable::Z1Z2 => "ZZ",
            Observable::X1X2 => "XX",
        };
        s.parse().expect("label")
    }

    /// Operator on the decoded four-qubit register.
    pub fn decoded(self) -> PauliString {
        PauliString::embed(4, &DATA, &self.logical())
    }

    pub fn ideal(self, theta: f64) -> f64 {
        match self {
            Observable::Z1 | Observable::Z2 => theta.cos(),
            Observable::Z1Z2 => 1.0,
            Observable::X1X2 => theta.sin(),
        }
    }

    fn pick(self, e: &H2Expectations) -> f64 {
        match self {
            Observable::Z1 => e.z1,
            Observable::Z2 => e.z2,
            Observable::Z1Z2 => e.z1z2,
            Observable::X1X2 => e.x1x2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Encoded circuit, check qubits ignored.
    Noisy,
    /// Post-selected on the check qubits.
    Qedc,
    /// Post-selection followed by direct-summation PEC with the reduced noise.
    Hybrid,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Noisy, Mode::Qedc, Mode::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Noisy => "noisy",
            Mode::Qedc => "qedc",
            Mode::Hybrid => "hybrid",
        }
    }
}

/// 13 uniform points on `[−π, π]`.
pub fn default_theta_grid() -> Vec<f64> {
    (0..13).map(|k| -PI + k as f64 * PI / 6.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    pub thetas: Vec<f64>,
    /// Two-qubit depolarizing strength after every CNOT.
    pub p: f64,
    pub shots: u64,
    pub repetitions: usize,
    pub modes: Vec<Mode>,
    pub seed: u64,
    pub floor: f64,
    pub readout: Option<ReadoutModel>,
    pub ibu_iterations: usize,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            thetas: default_theta_grid(),
            p: 0.01,
            shots: 10_000,
            repetitions: 100,
            modes: Mode::ALL.to_vec(),
            seed: 0,
            floor: crate::propagate::DEFAULT_FLOOR,
            readout: None,
            ibu_iterations: 2,
        }
    }
}

/// GHZ preparation, `exp(−iθ Z₁X₂Y₄/2)` compiled with basis changes and a
/// parity ladder `3 → 1 → 0` around `Rz(θ)` on qubit 0, then the decoder. Every CNOT is followed by two-qubit
/// depolarizing noise of strength `p`.
pub fn compiled_vqe_circuit(theta: f64, p: f64) -> Result<Circuit> {
    let noise = depolarizing(2, p)?;
    let mut c = Circuit::new(4);
    let cx = |c: &mut Circuit, a: usize, b: usize| -> Result<()> {
        if p > 0.0 {
            c.push_noisy(Gate::cx(a, b), noise.clone())
        } else {
            c.push(Gate::cx(a, b))
        }
    };
    c.push(Gate::h(0))?;
    cx(&mut c, 0, 1)?;
    cx(&mut c, 1, 2)?;
    cx(&mut c, 2, 3)?;
    c.push_layer(crate::sim::Layer::new(vec![Gate::h(1), Gate::rx(3, FRAC_PI_2)]))?;
    cx(&mut c, 3, 1)?;
    cx(&mut c, 1, 0)?;
    c.push(Gate::rz(0, theta))?;
    cx(&mut c, 1, 0)?;
    cx(&mut c, 3, 1)?;
    c.push_layer(crate::sim::Layer::new(vec![Gate::h(1), Gate::rx(3, -FRAC_PI_2)]))?;
    cx(&mut c, 2, 3)?;
    cx(&mut c, 1, 2)?;
    cx(&mut c, 0, 1)?;
    c.push(Gate::h(0))?;
    cx(&mut c, 3, 1)?;
    Ok(c)
}

/// Diagonal data-register noise after post-selection, with its acceptance.
pub fn reduced_noise(circuit: &Circuit, truncation: Truncation) -> Result<(PauliChannel, f64)> {
    let code = qedc(4)?;
    let ensemble = accumulate_total_noise(circuit, truncation)?;
    match filter_detectable(&ensemble, &code)? {
        FilterOutcome::Survived { ensemble, acceptance } => Ok((reduce_to_pauli(&ensemble)?, acceptance)),
        FilterOutcome::AllDetected => Err(Error::Consistency("every error is detected".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRow {
    pub theta: f64,
    pub observable: Observable,
    pub mode: Mode,
    pub value: f64,
    pub two_sigma: f64,
    pub ideal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub rows: Vec<ExpectationRow>,
    /// `(θ, acceptance, γ of the reduced-noise inverse)`.
    pub diagnostics: Vec<(f64, f64, f64)>,
}

impl VqeResult {
    pub fn row(&self, theta_index: usize, observable: Observable, mode: Mode) -> Option<&ExpectationRow> {
        let theta = self.diagnostics.get(theta_index)?.0;
        self.rows.iter().find(|r| r.theta == theta && r.observable == observable && r.mode == mode)
    }

    /// Largest `|mean − ideal|` over θ for one observable and mode.
    pub fn max_bias(&self, observable: Observable, mode: Mode) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.observable == observable && r.mode == mode)
            .map(|r| (r.value - r.ideal).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs every mode on the θ grid; each repetition redraws all shots.
pub fn run_vqe_experiment(config: &VqeConfig) -> Result<VqeResult> {
    if config.repetitions == 0 || config.shots == 0 {
        return Err(Error::InvalidParameter("repetitions and shots must be positive".into()));
    }
    let per_theta: Vec<(Vec<ExpectationRow>, (f64, f64, f64))> = config
        .thetas
        .par_iter()
        .enumerate()
        .map(|(ti, &theta)| run_theta(config, ti, theta))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for (r, d) in per_theta {
        rows.extend(r);
        diagnostics.push(d);
    }
    Ok(VqeResult { rows, diagnostics })
}

fn run_theta(config: &VqeConfig, ti: usize, theta: f64) -> Result<(Vec<ExpectationRow>, (f64, f64, f64))> {
    let circuit = compiled_vqe_circuit(theta, config.p)?;
    let state = run_density(&circuit, &DensityMatrix::zero_state(4))?;
    let (_, acceptance) = state.postselect_zero(&[0, 1])?;
    let inverse = if config.modes.contains(&Mode::Hybrid) {
        let (channel, _) = reduced_noise(&circuit, Truncation { floor: config.floor, ..Truncation::default() })?;
        invert_pauli_channel(&fidelities_from_rates(&channel))?
    } else {
        QuasiProbability::identity(2)
    };
    let mut rows = Vec::new();
    for &obs in &Observable::ALL {
        for &mode in &config.modes {
            let exec = PecExecutor {
                state: state.clone(),
                insertion_qubits: DATA.to_vec(),
                check_qubits: if mode == Mode::Noisy { Vec::new() } else { vec![0, 1] },
                observable: obs.decoded(),
                shots: Some(config.shots),
                readout: config.readout.clone(),
                ibu_iterations: config.ibu_iterations,
            };
            let label = format!("vqe/{ti}/{}/{}", obs.name(), mode.name());
            let values: Vec<f64> = (0..config.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let seed = seeding::derive(config.seed, &label, rep as u64);
                    match mode {
                        Mode::Hybrid => Ok(pec_direct(|j, rng| exec.measure(j, rng), &inverse, seed)?.value),
                        _ => {
                            let mut rng = seeding::stream(seed, "plain", 0);
                            exec.measure(0, &mut rng)?
                                .map(|m| m.value)
                                .ok_or_else(|| Error::InvalidParameter("no shots accepted".into()))
                        }
                    }
                })
                .collect::<Result<_>>()?;
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            rows.push(ExpectationRow { theta, observable: obs, mode, value: mean, two_sigma: 2.0 * var.sqrt(), ideal: obs.ideal(theta) });
        }
    }
    Ok((rows, (theta, acceptance, inverse.gamma())))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesRow {
    pub mode: Mode,
    pub r: f64,
    pub e_min: f64,
    pub theta_min: f64,
}

/// Splines each observable of `mode` over θ and minimizes the energy at every
/// coefficient row. `grid` is the number of dense samples before refinement.
pub fn pes_curve(rows: &[ExpectationRow], mode: Mode, table: &[H2Coefficients], grid: usize) -> Result<Vec<PesRow>> {
    let mut splines = Vec::new();
    for obs in Observable::ALL {
        let mut pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.mode == mode && r.observable == obs).map(|r| (r.theta, r.value)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        splines.push(NaturalSpline::new(&x, &y)?);
    }
    let (lo, hi) = splines[0].domain();
    let eval = |t: f64| H2Expectations {
        z1: splines[0].eval(t),
        z2: splines[1].eval(t),
        z1z2: splines[2].eval(t),
        x1x2: splines[3].eval(t),
    };
    Ok(table
        .par_iter()
        .map(|c| {
            let (theta_min, e_min) = golden_section_min(|t| h2_energy(&eval(t), c), lo, hi, grid);
            PesRow { mode, r: c.r, e_min, theta_min }
        })
        .collect())
}

/// Cross-term contribution of the filtered total noise to each observable on
/// the ideal logical state, in `Observable::ALL` order.
pub fn vqe_offdiagonal_bias(theta: f64, p: f64, truncation: Truncation) -> Result<[f64; 4]> {
    let circuit = compiled_vqe_circuit(theta, p)?;
    let code = qedc(4)?;
    let ensemble = accumulate_total_noise(&circuit, truncation)?;
    let FilterOutcome::Survived { ensemble, .. } = filter_detectable(&ensemble, &code)? else {
        return Err(Error::Consistency("every error is detected".into()));
    };
    let ideal = Gate::pauli_exp(&"YX".parse()?, theta)?;
    let mut psi = Circuit::new(2);
    psi.push(ideal)?;
    let rho = DensityMatrix::from_statevector(&psi.statevector(None))?;
    let mut out = [0.0; 4];
    for (slot, obs) in out.iter_mut().zip(Observable::ALL) {
        *slot = offdiagonal_bias_bound(&ensemble, &obs.logical(), &rho)?;
    }
    Ok(out)
}

/// Ideal-state expectations for `Observable::pick`-style lookups in tests.
pub fn ideal_expectation(obs: Observable, theta: f64) -> f64 {
    obs.pick(&H2Expectations::ideal(theta))
}
