use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliString};

use super::density::DensityMatrix;
use super::gate::Gate;

/// Per-qubit confusion matrices, `m[observed][true]`; each column sums to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    confusion: Vec<[[f64; 2]; 2]>,
}

impl ReadoutModel {
    pub fn new(confusion: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        for (q, m) in confusion.iter().enumerate() {
            for t in 0..2 {
                let col = m[0][t] + m[1][t];
                if (col - 1.0).abs() > 1e-12 || m[0][t] < 0.0 || m[1][t] < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "confusion column {t} of qubit {q} is not a distribution"
                    )));
                }
            }
        }
        Ok(Self { confusion })
    }

    pub fn ideal(n: usize) -> Self {
        Self { confusion: vec![[[1.0, 0.0], [0.0, 1.0]]; n] }
    }

    /// Every bit flips with probability `eps`.
    pub fn symmetric(n: usize, eps: f64) -> Result<Self> {
        Self::new(vec![[[1.0 - eps, eps], [eps, 1.0 - eps]]; n])
    }

    /// `P(read 1 | 0) = p01`, `P(read 0 | 1) = p10` on every qubit.
    pub fn asymmetric(n: usize, p01: f64, p10: f64) -> Result<Self> {
        Self::new(vec![[[1.0 - p01, p10], [p01, 1.0 - p10]]; n])
    }

    pub fn num_qubits(&self) -> usize {
        self.confusion.len()
    }

    pub fn qubit(&self, q: usize) -> [[f64; 2]; 2] {
        self.confusion[q]
    }

    /// Full response matrix entry `P(observed | true)` for bitstrings of `n` qubits.
    pub fn response(&self, observed: u64, truth: u64) -> f64 {
        let n = self.confusion.len();
        (0..n)
            .map(|q| {
                let b = n - 1 - q;
                let (o, t) = ((observed >> b & 1) as usize, (truth >> b & 1) as usize);
                self.confusion[q][o][t]
            })
            .product()
    }
}

/// Histogram of measured bitstrings. Bit `n-1-q` holds qubit `q`.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    n_bits: usize,
    counts: BTreeMap<u64, u64>,
}

impl Counts {
    pub fn new(n_bits: usize) -> Self {
        Self { n_bits, counts: BTreeMap::new() }
    }

    pub fn from_pairs(n_bits: usize, pairs: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut c = Self::new(n_bits);
        for (b, k) in pairs {
            c.add(b, k);
        }
        c
    }

    pub fn num_bits(&self) -> usize {
        self.n_bits
    }

    pub fn add(&mut self, bits: u64, count: u64) {
        if count > 0 {
            *self.counts.entry(bits).or_insert(0) += count;
        }
    }

    pub fn get(&self, bits: u64) -> u64 {
        self.counts.get(&bits).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&b, &c)| (b, c))
    }

    /// Mean of `(−1)^{popcount(b & mask)}`; `None` when empty.
    pub fn parity_expectation(&self, mask: u64) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let s: i64 = self
            .iter()
            .map(|(b, c)| if (b & mask).count_ones().is_multiple_of(2) { c as i64 } else { -(c as i64) })
            .sum();
        Some(s as f64 / total as f64)
    }

    pub fn format_bits(&self, bits: u64) -> String {
        (0..self.n_bits).map(|q| if bits >> (self.n_bits - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
    }

    /// `bitstring,count` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,count\n");
        for (b, c) in self.iter() {
            out.push_str(&format!("{},{}\n", self.format_bits(b), c));
        }
        out
    }
}

/// Draws a multinomial histogram from the diagonal of `state`, then applies the
/// readout confusion to every shot independently.
pub fn sample_counts<R: Rng + ?Sized>(
    state: &DensityMatrix,
    shots: u64,
    readout: Option<&ReadoutModel>,
    rng: &mut R,
) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let probs = state.probabilities();
    let total: f64 = probs.iter().sum();
    let mut counts = Counts::new(state.num_qubits());
    let mut remaining = shots;
    let mut mass = total;
    for (b, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let frac = (p / mass).clamp(0.0, 1.0);
        let k = if frac >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, frac).expect("valid binomial").sample(rng)
        };
        counts.add(b as u64, k);
        remaining -= k;
        mass -= p;
    }
    if remaining > 0 {
        // Rounding left some mass unassigned; it belongs to the last populated outcome.
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        counts.add(last as u64, remaining);
    }
    match readout {
        Some(model) => apply_readout(&counts, model, rng),
        None => Ok(counts),
    }
}

/// Applies independent per-shot, per-qubit readout flips to a histogram.
pub fn apply_readout<R: Rng + ?Sized>(counts: &Counts, model: &ReadoutModel, rng: &mut R) -> Result<Counts> {
    let n = counts.num_bits();
    if model.num_qubits() != n {
        return Err(Error::Dimension { expected: n, found: model.num_qubits() });
    }
    let mut current = counts.clone();
    for q in 0..n {
        let bit = 1u64 << (n - 1 - q);
        let m = model.qubit(q);
        let mut next = Counts::new(n);
        for (b, c) in current.iter() {
            let t = (b & bit != 0) as usize;
            let p_flip = m[1 - t][t];
            let flips = if p_flip <= 0.0 {
                0
            } else if p_flip >= 1.0 {
                c
            } else {
                Binomial::new(c, p_flip).expect("valid binomial").sample(rng)
            };
            next.add(b ^ bit, flips);
            next.add(b, c - flips);
        }
        current = next;
    }
    Ok(current)
}

/// Gates rotating the eigenbasis of `observable` onto the computational basis,
/// and the Z-parity mask to read it from counts.
pub fn measurement_basis(observable: &PauliString) -> (Vec<Gate>, u64) {
    let n = observable.num_qubits();
    let mut gates = Vec::new();
    let mut mask = 0u64;
    for q in 0..n {
        match observable.letter(q) {
            Letter::I => continue,
            Letter::X => gates.push(Gate::h(q)),
            Letter::Y => {
                gates.push(Gate::sdg(q));
                gates.push(Gate::h(q));
            }
            Letter::Z => {}
        }
        mask |= 1 << (n - 1 - q);
    }
    (gates, mask)
}

/// State rotated into the measurement basis of `observable`, the parity mask and
/// the sign carried by the observable's phase.
pub fn rotate_for_measurement(state: &DensityMatrix, observable: &PauliString) -> Result<(DensityMatrix, u64, f64)> {
    if !observable.is_hermitian() {
        return Err(Error::InvalidParameter(format!("observable {observable} is not Hermitian")));
    }
    let (gates, mask) = measurement_basis(observable);
    let mut rotated = state.clone();
    for g in &gates {
        rotated.apply_gate(g)?;
    }
    let sign = if observable.phase_exponent() == 2 { -1.0 } else { 1.0 };
    Ok((rotated, mask, sign))
}
