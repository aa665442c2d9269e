//! Probabilistic error cancellation and readout unfolding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::QuasiProbability;
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::seeding;
use crate::sim::{rotate_for_measurement, sample_counts, Counts, DensityMatrix, ReadoutModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub gamma: f64,
    /// Samples or terms discarded because post-selection accepted no shots.
    pub dropped: usize,
}

impl Estimate {
    pub fn two_sigma(&self) -> f64 {
        2.0 * self.std_error
    }
}

/// One measured setting: post-selected expectation and the accepted shot count
/// (`None` for exact evaluation).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermMeasurement {
    pub value: f64,
    pub accepted: Option<u64>,
}

/// Quasi-probability sampling: `(γ/N) Σ_k s_k · m_k`, where `m_k` is the
/// measured expectation with the `k`-th sampled Pauli inserted.
///
/// `run(label, rng)` returns `None` when post-selection keeps no shots; such
/// samples are dropped and counted.
pub fn pec_sample<F>(run: F, inverse: &QuasiProbability, samples: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Option<TermMeasurement>> + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one PEC sample".into()));
    }
    let gamma = inverse.gamma();
    let sampler = inverse.sampler();
    let draws: Vec<Option<f64>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeding::stream(seed, "pec-sample", k as u64);
            let (label, sign) = sampler.sample(&mut rng);
            Ok(run(label, &mut rng)?.map(|m| gamma * sign * m.value))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = draws.iter().flatten().copied().collect();
    let dropped = samples - kept.len();
    if kept.is_empty() {
        return Err(Error::InvalidParameter("every PEC sample was rejected".into()));
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = if kept.len() > 1 { kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(Estimate { value: mean, std_error: (var / n).sqrt(), n_samples: kept.len(), gamma, dropped })
}

/// Direct summation `Σ_j η_j ⟨A⟩_j` over every Pauli of the inverse's register,
/// with variance `Σ_j η_j² (1 − ⟨A⟩_j²)/N_j`.
pub fn pec_direct<F>(run: F, inverse: &QuasiProbability, seed: u64) -> Result<Estimate>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Option<TermMeasurement>> + Sync,
{
    let eta = inverse.eta();
    let terms: Vec<Option<(f64, f64)>> = (0..eta.len())
        .into_par_iter()
        .map(|j| {
            if eta[j] == 0.0 {
                return Ok(Some((0.0, 0.0)));
            }
            let mut rng = seeding::stream(seed, "pec-direct", j as u64);
            Ok(run(j, &mut rng)?.map(|m| {
                let var = match m.accepted {
                    Some(n) => eta[j].powi(2) * (1.0 - m.value * m.value).max(0.0) / n as f64,
                    None => 0.0,
                };
                (eta[j] * m.value, var)
            }))
        })
        .collect::<Result<_>>()?;
    let dropped = terms.iter().filter(|t| t.is_none()).count();
    if dropped > 0 {
        return Err(Error::InvalidParameter(format!("{dropped} direct-summation terms accepted no shots")));
    }
    let (value, var) = terms.iter().flatten().fold((0.0, 0.0), |(v, s), (a, b)| (v + a, s + b));
    Ok(Estimate { value, std_error: var.sqrt(), n_samples: eta.len(), gamma: inverse.gamma(), dropped })
}

/// Iterative Bayesian unfolding from a uniform prior. Returns quasi-counts over
/// all `2^n` bitstrings; their sum equals the shot total.
pub fn ibu_mitigate(counts: &Counts, readout: &ReadoutModel, iterations: usize) -> Result<Vec<f64>> {
    let n = counts.num_bits();
    if readout.num_qubits() != n {
        return Err(Error::Dimension { expected: n, found: readout.num_qubits() });
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter("IBU needs at least one iteration".into()));
    }
    let d = 1usize << n;
    let total = counts.total() as f64;
    let observed: Vec<(usize, f64)> = counts.iter().map(|(b, c)| (b as usize, c as f64)).collect();
    let response: Vec<Vec<f64>> =
        observed.iter().map(|&(i, _)| (0..d).map(|j| readout.response(i as u64, j as u64)).collect()).collect();
    let mut t = vec![total / d as f64; d];
    for _ in 0..iterations {
        let mut next = vec![0.0; d];
        for ((_, c), r) in observed.iter().zip(&response) {
            let norm: f64 = r.iter().zip(&t).map(|(a, b)| a * b).sum();
            if norm <= 0.0 {
                continue;
            }
            for j in 0..d {
                next[j] += c * r[j] * t[j] / norm;
            }
        }
        t = next;
    }
    Ok(t)
}

/// Measurement back end for PEC on a precomputed noisy output state.
///
/// The inserted Pauli acts on `insertion_qubits`; the shot is kept when all
/// `check_qubits` read 0; the observable is given on the full register.
#[derive(Clone, Debug)]
pub struct PecExecutor {
    pub state: DensityMatrix,
    pub insertion_qubits: Vec<usize>,
    pub check_qubits: Vec<usize>,
    pub observable: PauliString,
    /// `None` evaluates expectations exactly.
    pub shots: Option<u64>,
    pub readout: Option<ReadoutModel>,
    pub ibu_iterations: usize,
}

impl PecExecutor {
    pub fn exact(state: DensityMatrix, observable: PauliString) -> Self {
        let n = state.num_qubits();
        Self {
            state,
            insertion_qubits: (0..n).collect(),
            check_qubits: Vec::new(),
            observable,
            shots: None,
            readout: None,
            ibu_iterations: 2,
        }
    }

    pub fn measure<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> Result<Option<TermMeasurement>> {
        let n = self.state.num_qubits();
        let k = self.insertion_qubits.len();
        if label >= 1 << (2 * k) {
            return Err(Error::InvalidParameter(format!("Pauli label {label} outside {k} qubits")));
        }
        if let Some(&q) = self.check_qubits.iter().find(|q| self.observable.letter(**q) != crate::pauli::Letter::I) {
            return Err(Error::InvalidParameter(format!("observable acts on check qubit {q}")));
        }
        let mut st = self.state.clone();
        let local = PauliString::from_label(k, label);
        st.apply_pauli(&PauliString::embed(n, &self.insertion_qubits, &local));
        let Some(shots) = self.shots else {
            return Ok(Some(self.exact_value(&st)?));
        };
        let (rot, mask, sign) = rotate_for_measurement(&st, &self.observable)?;
        let counts = sample_counts(&rot, shots, self.readout.as_ref(), rng)?;
        let dist: Vec<f64> = match &self.readout {
            Some(model) if self.ibu_iterations > 0 => ibu_mitigate(&counts, model, self.ibu_iterations)?,
            _ => {
                let mut v = vec![0.0; 1 << n];
                counts.iter().for_each(|(b, c)| v[b as usize] = c as f64);
                v
            }
        };
        let check_mask: usize = self.check_qubits.iter().map(|q| 1usize << (n - 1 - q)).sum();
        let mut acc = 0.0;
        let mut kept = 0.0;
        for (b, w) in dist.iter().enumerate() {
            if b & check_mask != 0 {
                continue;
            }
            kept += w;
            acc += if (b as u64 & mask).count_ones().is_multiple_of(2) { *w } else { -w };
        }
        let accepted = kept.round() as u64;
        if accepted == 0 {
            return Ok(None);
        }
        Ok(Some(TermMeasurement { value: sign * acc / kept, accepted: Some(accepted) }))
    }

    fn exact_value(&self, st: &DensityMatrix) -> Result<TermMeasurement> {
        if self.check_qubits.is_empty() {
            return Ok(TermMeasurement { value: st.expectation(&self.observable)?, accepted: None });
        }
        let (post, _) = st.postselect_zero(&self.check_qubits)?;
        let keep: Vec<usize> = (0..st.num_qubits()).filter(|q| !self.check_qubits.contains(q)).collect();
        let obs = self.observable.restrict(&keep).with_phase_exponent(self.observable.phase_exponent());
        Ok(TermMeasurement { value: post.expectation(&obs)?, accepted: None })
    }
}
