//! Pushing Pauli errors through circuits and assembling the end-of-circuit noise.
//!
//! An error `E` inserted after layer `l` equals `M = U_{>l} E U_{>l}†` applied
//! after the whole circuit. Clifford layers map Paulis to Paulis; rotations
//! `exp(−iθQ/2)` split an anticommuting Pauli into `cosθ·P − i·sinθ·QP`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::PauliChannel;
use crate::codes::CodeSpec;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::pauli::{Letter, PauliString};
use crate::sim::{Circuit, DensityMatrix, Gate, Noise};

/// Coefficients below this magnitude are dropped after each propagation step.
pub const PRUNE_TOL: f64 = 1e-14;
/// Default cap on the number of terms of one propagated error.
pub const DEFAULT_TERM_CAP: usize = 1 << 14;
/// Default joint-probability floor for total-noise enumeration.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// `Σ a_r P_r` with complex `a_r` and phase-free Pauli strings `P_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedError {
    n: usize,
    terms: Vec<(Complex64, PauliString)>,
}

impl GeneralizedError {
    pub fn identity(n: usize) -> Self {
        Self { n, terms: vec![(ONE, PauliString::identity(n))] }
    }

    pub fn from_pauli(p: &PauliString) -> Self {
        Self { n: p.num_qubits(), terms: vec![(p.phase(), p.unsigned())] }
    }

    /// Builds from arbitrary terms, folding phases and merging duplicates.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Complex64, PauliString)>) -> Result<Self> {
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        for (a, p) in terms {
            if p.num_qubits() != n {
                return Err(Error::Dimension { expected: n, found: p.num_qubits() });
            }
            *acc.entry(p.label()).or_insert(ZERO) += a * p.phase();
        }
        Ok(Self::from_map(n, acc))
    }

    fn from_map(n: usize, acc: BTreeMap<usize, Complex64>) -> Self {
        let terms = acc
            .into_iter()
            .filter(|(_, a)| a.norm() > PRUNE_TOL)
            .map(|(l, a)| (a, PauliString::from_label(n, l)))
            .collect();
        Self { n, terms }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (Complex64, PauliString)> + '_ {
        self.terms.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        let q = p.unsigned();
        self.terms.iter().find(|(_, t)| *t == q).map(|(a, _)| *a * p.phase().conj()).unwrap_or(ZERO)
    }

    /// `Σ|a_r|²`.
    pub fn weight(&self) -> f64 {
        self.terms.iter().map(|(a, _)| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Self {
        let w = self.weight().sqrt();
        Self { n: self.n, terms: self.terms.iter().map(|(a, p)| (a / w, *p)).collect() }
    }

    /// Single Pauli term (with its phase) if the error is one.
    pub fn as_pauli(&self) -> Option<PauliString> {
        match self.terms.as_slice() {
            [(a, p)] if (a.norm() - 1.0).abs() < 1e-12 => snap_phase(*a).map(|k| p.with_phase_exponent(k)),
            _ => None,
        }
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &GeneralizedError) -> GeneralizedError {
        assert_eq!(self.n, other.n);
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        for (a, p) in &self.terms {
            for (b, q) in &other.terms {
                let r = p * q;
                *acc.entry(r.label()).or_insert(ZERO) += a * b * r.phase();
            }
        }
        Self::from_map(self.n, acc)
    }

    pub fn to_matrix(&self) -> CMatrix {
        let d = 1usize << self.n;
        let mut m = CMatrix::zeros(d);
        for (a, p) in &self.terms {
            m = m.add(&CMatrix::pauli(p).scale(*a));
        }
        m
    }

    /// `U E U†` for a single gate.
    pub fn conjugate(&self, gate: &Gate) -> Result<GeneralizedError> {
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        for (a, p) in &self.terms {
            for (b, q) in conjugate_gate(gate, p)?.terms {
                *acc.entry(q.label()).or_insert(ZERO) += a * b;
            }
        }
        Ok(Self::from_map(self.n, acc))
    }
}

fn snap_phase(a: Complex64) -> Option<u8> {
    let candidates = [(0u8, ONE), (1, Complex64::new(0.0, 1.0)), (2, -ONE), (3, Complex64::new(0.0, -1.0))];
    candidates.iter().find(|(_, c)| (a - c).norm() < 1e-9).map(|(k, _)| *k)
}

/// `V P V†` for a Clifford gate, as one phase-exact Pauli string.
pub fn conjugate_clifford(gate: &Gate, p: &PauliString) -> Result<PauliString> {
    if !gate.is_clifford() {
        return Err(Error::NotClifford(gate.to_string()));
    }
    let img = conjugate_dense(gate, p, true)?;
    img.as_pauli().ok_or_else(|| Error::Consistency(format!("{gate} did not map {p} to a Pauli")))
}

/// `exp(−iθQ/2) P exp(iθQ/2)` for register-wide Paulis `Q` (Hermitian) and `P`.
pub fn conjugate_rotation(generator: &PauliString, theta: f64, p: &PauliString) -> GeneralizedError {
    if generator.commutes_with(p) {
        return GeneralizedError::from_pauli(p);
    }
    let qp = generator * p;
    let (c, s) = (theta.cos(), theta.sin());
    let terms = [(Complex64::new(c, 0.0), *p), (Complex64::new(0.0, -s), qp)];
    GeneralizedError::from_terms(p.num_qubits(), terms).expect("same register")
}

/// Rotation about a single-qubit axis, e.g. `Rz(θ)` on `qubit`.
pub fn conjugate_axis_rotation(axis: Letter, qubit: usize, theta: f64, p: &PauliString) -> GeneralizedError {
    conjugate_rotation(&PauliString::single(p.num_qubits(), qubit, axis), theta, p)
}

/// `U P U†` for any gate, as a generalized error.
pub fn conjugate_gate(gate: &Gate, p: &PauliString) -> Result<GeneralizedError> {
    let n = p.num_qubits();
    if let Some(&q) = gate.targets.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidParameter(format!("{gate} targets qubit {q} of {n}")));
    }
    let local = p.restrict(&gate.targets);
    if local.is_identity() {
        return Ok(GeneralizedError::from_pauli(p));
    }
    if let Some((gen, theta)) = gate.rotation() {
        let full = PauliString::embed(n, &gate.targets, &gen);
        return Ok(conjugate_rotation(&full, theta, p));
    }
    conjugate_dense(gate, p, gate.is_clifford())
}

fn conjugate_dense(gate: &Gate, p: &PauliString, snap: bool) -> Result<GeneralizedError> {
    let n = p.num_qubits();
    let local = p.restrict(&gate.targets);
    let u = gate.matrix();
    let img = u.matmul(&CMatrix::pauli(&local)).matmul(&u.adjoint());
    let k = gate.targets.len();
    let mut terms = Vec::new();
    for l in 0..1usize << (2 * k) {
        let q = PauliString::from_label(k, l);
        let mut a = img.pauli_coefficient(&q);
        if a.norm() < 1e-12 {
            continue;
        }
        if snap {
            a = snap_phase(a).map(crate::pauli::i_pow).unwrap_or(a);
        }
        terms.push((a * p.phase(), p.unsigned().overwrite(&gate.targets, &q)));
    }
    GeneralizedError::from_terms(n, terms)
}

/// Pushes `error`, inserted after layer `layer_index`, through all later layers.
pub fn propagate_to_end(circuit: &Circuit, layer_index: usize, error: &GeneralizedError) -> Result<GeneralizedError> {
    propagate_with_cap(circuit, layer_index, error, DEFAULT_TERM_CAP)
}

pub fn propagate_with_cap(
    circuit: &Circuit,
    layer_index: usize,
    error: &GeneralizedError,
    cap: usize,
) -> Result<GeneralizedError> {
    if layer_index >= circuit.len() {
        return Err(Error::InvalidParameter(format!(
            "layer {layer_index} outside a circuit of {} layers",
            circuit.len()
        )));
    }
    let mut e = error.clone();
    for layer in &circuit.layers()[layer_index + 1..] {
        for g in &layer.gates {
            e = e.conjugate(g)?;
        }
        if e.len() > cap {
            return Err(Error::TermOverflow { count: e.len(), cap });
        }
    }
    Ok(e)
}

/// Joint distribution over composite errors at the circuit end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnsemble {
    n: usize,
    entries: Vec<(f64, GeneralizedError)>,
    /// Probability mass removed by truncation before renormalization.
    pub dropped_mass: f64,
}

impl ErrorEnsemble {
    pub fn new(n: usize, entries: Vec<(f64, GeneralizedError)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("ensemble probabilities sum to {total}")));
        }
        if let Some((_, e)) = entries.iter().find(|(_, e)| e.num_qubits() != n) {
            return Err(Error::Dimension { expected: n, found: e.num_qubits() });
        }
        Ok(Self { n, entries, dropped_mass: 0.0 })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, entries: vec![(1.0, GeneralizedError::identity(n))], dropped_mass: 0.0 }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(f64, GeneralizedError)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ p_k E_k ρ E_k†`.
    pub fn apply(&self, state: &DensityMatrix) -> Result<DensityMatrix> {
        if state.num_qubits() != self.n {
            return Err(Error::Dimension { expected: self.n, found: state.num_qubits() });
        }
        let rho = state.to_matrix();
        let mut out = CMatrix::zeros(rho.dim());
        for (p, e) in &self.entries {
            let m = e.to_matrix();
            out = out.add(&m.matmul(&rho).matmul(&m.adjoint()).scale(Complex64::new(*p, 0.0)));
        }
        DensityMatrix::from_matrix(&out)
    }

    /// `Tr(A N(ρ))` including all cross terms.
    pub fn expectation(&self, observable: &PauliString, state: &DensityMatrix) -> Result<f64> {
        Ok(self.split_expectation(observable, state)?.iter().sum())
    }

    /// Diagonal and cross-term parts of `Tr(A N(ρ))`.
    fn split_expectation(&self, observable: &PauliString, state: &DensityMatrix) -> Result<[f64; 2]> {
        if state.num_qubits() != self.n || observable.num_qubits() != self.n {
            return Err(Error::Dimension { expected: self.n, found: state.num_qubits() });
        }
        let mut diag = 0.0;
        let mut cross = ZERO;
        for (q, e) in &self.entries {
            let terms: Vec<_> = e.terms().collect();
            for (i, (ar, pr)) in terms.iter().enumerate() {
                // Tr(A P_r ρ P_r) = ±⟨A⟩.
                let s = if pr.commutes_with(observable) { 1.0 } else { -1.0 };
                diag += q * ar.norm_sqr() * s * state.expectation_complex(observable).re;
                for (j, (as_, ps)) in terms.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let w = ar * as_.conj();
                    // Tr(A P_r ρ P_s) = Tr(P_s A P_r ρ).
                    let op = &(ps * observable) * pr;
                    if w.im.abs() < 1e-15 && !op.is_hermitian() {
                        // Hermitian-conjugate partner cancels this term exactly.
                        continue;
                    }
                    cross += w * state.expectation_complex(&op) * *q;
                }
            }
        }
        if cross.im.abs() > 1e-9 {
            return Err(Error::Consistency(format!("cross terms have imaginary part {:e}", cross.im)));
        }
        Ok([diag, cross.re])
    }
}

/// Truncation and enumeration settings for [`accumulate_total_noise`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Joint-probability floor; branches that cannot reach it are dropped.
    pub floor: f64,
    /// Restrict to at most one non-identity pick over all noise sites.
    pub first_order: bool,
    pub term_cap: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { floor: DEFAULT_FLOOR, first_order: false, term_cap: DEFAULT_TERM_CAP }
    }
}

impl Truncation {
    pub fn exact() -> Self {
        Self { floor: 0.0, ..Self::default() }
    }
}

struct Site {
    /// Nonzero picks: rate and the propagated error at circuit end.
    picks: Vec<(f64, GeneralizedError)>,
    identity_rate: f64,
}

/// Enumerates the joint per-site Pauli picks of every Pauli noise site,
/// propagates each to the circuit end and multiplies them out.
pub fn accumulate_total_noise(circuit: &Circuit, truncation: Truncation) -> Result<ErrorEnsemble> {
    let n = circuit.num_qubits();
    let mut sites = Vec::new();
    for (l, layer) in circuit.layers().iter().enumerate() {
        for site in &layer.noise {
            let channel = match &site.noise {
                Noise::Pauli(c) => c,
                Noise::Kraus(_) => {
                    return Err(Error::InvalidParameter("total-noise enumeration needs Pauli noise sites".into()))
                }
            };
            sites.push(prepare_site(circuit, l, &site.qubits, channel, truncation.term_cap)?);
        }
    }
    // Largest achievable product of the remaining sites, for pruning.
    let mut suffix_max = vec![1.0; sites.len() + 1];
    for i in (0..sites.len()).rev() {
        let best = sites[i].picks.iter().map(|(c, _)| *c).fold(sites[i].identity_rate, f64::max);
        suffix_max[i] = suffix_max[i + 1] * best;
    }
    let mut swept_drop = None;
    let mut entries = if sites.is_empty() {
        vec![(1.0, GeneralizedError::identity(n))]
    } else if truncation.first_order {
        let ctx = Enum { sites: &sites, suffix_max: &suffix_max, trunc: truncation, n };
        // Split on the first site's picks for parallelism; merge in pick order.
        let first = &sites[0];
        let mut branches: Vec<(f64, Option<&GeneralizedError>, bool)> = vec![(first.identity_rate, None, false)];
        branches.extend(first.picks.iter().map(|(c, e)| (*c, Some(e), true)));
        let parts: Vec<Vec<(f64, GeneralizedError)>> = branches
            .par_iter()
            .map(|&(c, e, nontrivial)| {
                let mut out = Vec::new();
                let acc = e.cloned().unwrap_or_else(|| GeneralizedError::identity(n));
                ctx.walk(1, c, acc, nontrivial as usize, &mut out);
                out
            })
            .collect();
        parts.into_iter().flatten().collect()
    } else {
        let (entries, dropped) = sweep_sites(&sites, &suffix_max, truncation.floor, n);
        swept_drop = Some(dropped);
        entries
    };
    let kept: f64 = entries.iter().map(|(p, _)| p).sum();
    if kept <= 0.0 {
        return Err(Error::InvalidParameter("truncation floor removed every entry".into()));
    }
    entries.iter_mut().for_each(|(p, _)| *p /= kept);
    let dropped_mass = swept_drop.unwrap_or((1.0 - kept).max(0.0));
    Ok(ErrorEnsemble { n, entries, dropped_mass })
}

struct Enum<'a> {
    sites: &'a [Site],
    suffix_max: &'a [f64],
    trunc: Truncation,
    n: usize,
}

impl Enum<'_> {
    fn walk(&self, i: usize, prob: f64, acc: GeneralizedError, nontrivial: usize, out: &mut Vec<(f64, GeneralizedError)>) {
        if prob * self.suffix_max[i] < self.trunc.floor || prob == 0.0 {
            return;
        }
        if i == self.sites.len() {
            debug_assert_eq!(acc.num_qubits(), self.n);
            out.push((prob, acc));
            return;
        }
        let site = &self.sites[i];
        if !(self.trunc.first_order && nontrivial >= 1) {
            for (c, e) in &site.picks {
                // Later errors act after earlier ones: the product is later · earlier.
                self.walk(i + 1, prob * c, e.mul(&acc), nontrivial + 1, out);
            }
        }
        self.walk(i + 1, prob * site.identity_rate, acc, nontrivial, out);
    }
}

/// Site-by-site sweep that merges operators equal up to a global phase, so the
/// number of live entries stays bounded by the distinct products reached.
fn sweep_sites(sites: &[Site], suffix_max: &[f64], floor: f64, n: usize) -> (Vec<(f64, GeneralizedError)>, f64) {
    let mut live: Vec<(f64, GeneralizedError)> = vec![(1.0, GeneralizedError::identity(n))];
    let mut dropped = 0.0;
    for (i, site) in sites.iter().enumerate() {
        let reach = suffix_max[i + 1];
        let produced: Vec<(Vec<(MergeKey, f64, GeneralizedError)>, f64)> = live
            .par_iter()
            .map(|(prob, acc)| {
                let mut out = Vec::with_capacity(site.picks.len() + 1);
                let mut lost = 0.0;
                let id = prob * site.identity_rate;
                if id * reach >= floor {
                    out.push((merge_key(acc), id, acc.clone()));
                } else {
                    lost += id;
                }
                for (c, e) in &site.picks {
                    let q = prob * c;
                    if q * reach >= floor {
                        // Later errors act after earlier ones: the product is later · earlier.
                        let next = e.mul(acc);
                        out.push((merge_key(&next), q, next));
                    } else {
                        lost += q;
                    }
                }
                (out, lost)
            })
            .collect();
        let mut merged: BTreeMap<MergeKey, (f64, GeneralizedError)> = BTreeMap::new();
        for (batch, lost) in produced {
            dropped += lost;
            for (key, q, e) in batch {
                if q > 0.0 {
                    merged.entry(key).and_modify(|slot| slot.0 += q).or_insert((q, e));
                }
            }
        }
        live = merged.into_values().collect();
    }
    (live.into_iter().map(|(p, e)| (p, canonical_phase(&e))).collect(), dropped)
}

type MergeKey = Vec<(usize, i64, i64)>;

const MERGE_SCALE: f64 = 1e11;

/// Rotates the global phase so the first significant coefficient is real and
/// positive; `EρE†` is unchanged.
fn canonical_phase(e: &GeneralizedError) -> GeneralizedError {
    let Some((lead, _)) = e.terms.iter().find(|(a, _)| a.norm() > 1e-9) else {
        return e.clone();
    };
    let rot = lead.conj() / lead.norm();
    GeneralizedError { n: e.n, terms: e.terms.iter().map(|(a, p)| (a * rot, *p)).collect() }
}

fn merge_key(e: &GeneralizedError) -> MergeKey {
    canonical_phase(e)
        .terms
        .iter()
        .map(|(a, p)| (p.label(), (a.re * MERGE_SCALE).round() as i64, (a.im * MERGE_SCALE).round() as i64))
        .filter(|(_, re, im)| *re != 0 || *im != 0)
        .collect()
}

fn prepare_site(circuit: &Circuit, layer: usize, qubits: &[usize], channel: &PauliChannel, cap: usize) -> Result<Site> {
    let n = circuit.num_qubits();
    if channel.num_qubits() != qubits.len() {
        return Err(Error::Dimension { expected: qubits.len(), found: channel.num_qubits() });
    }
    let mut picks = Vec::new();
    let mut identity_rate = 0.0;
    for (local, c) in channel.terms() {
        if local.is_identity() {
            identity_rate = c;
            continue;
        }
        let full = PauliString::embed(n, qubits, &local);
        let e = propagate_with_cap(circuit, layer, &GeneralizedError::from_pauli(&full), cap)?;
        picks.push((c, e));
    }
    Ok(Site { picks, identity_rate })
}

/// Result of post-selecting an ensemble on the code's check qubits.
#[derive(Clone, Debug, PartialEq)]
pub enum FilterOutcome {
    /// Conditional ensemble on the data register and the acceptance probability
    /// implied by the diagonal of the surviving terms.
    Survived { ensemble: ErrorEnsemble, acceptance: f64 },
    /// Every term of every entry is detected.
    AllDetected,
}

impl FilterOutcome {
    pub fn ensemble(&self) -> Option<&ErrorEnsemble> {
        match self {
            FilterOutcome::Survived { ensemble, .. } => Some(ensemble),
            FilterOutcome::AllDetected => None,
        }
    }
}

/// Drops detected terms of an ensemble expressed after decoding.
///
/// A term is detected when it carries X or Y on a decoded check qubit. The
/// surviving terms act on `|0⟩` of the check qubits with their I/Z parts as
/// `+1`, so they merge by data part. Each entry keeps weight `p_k·Σ|b|²`, and
/// entries and terms are then renormalized.
pub fn filter_detectable(ensemble: &ErrorEnsemble, code: &CodeSpec) -> Result<FilterOutcome> {
    let n = ensemble.num_qubits();
    if n != code.n_physical() {
        return Err(Error::Dimension { expected: code.n_physical(), found: n });
    }
    let checks = code.decoded_check_qubits();
    let data: Vec<usize> = (0..n).filter(|q| !checks.contains(q)).collect();
    let mut entries = Vec::new();
    for (p, e) in ensemble.entries() {
        let mut kept: BTreeMap<usize, Complex64> = BTreeMap::new();
        for (a, t) in e.terms() {
            let flagged = checks.iter().any(|&q| matches!(t.letter(q), Letter::X | Letter::Y));
            if !flagged {
                *kept.entry(t.restrict(&data).label()).or_insert(ZERO) += a;
            }
        }
        let survivor = GeneralizedError::from_map(data.len(), kept);
        let w = survivor.weight();
        if survivor.is_empty() || w < 1e-300 {
            continue;
        }
        entries.push((p * w, survivor.normalized()));
    }
    let acceptance: f64 = entries.iter().map(|(p, _)| p).sum();
    if entries.is_empty() {
        return Ok(FilterOutcome::AllDetected);
    }
    entries.iter_mut().for_each(|(p, _)| *p /= acceptance);
    let mut out = ErrorEnsemble::new(data.len(), entries)?;
    out.dropped_mass = ensemble.dropped_mass;
    Ok(FilterOutcome::Survived { ensemble: out, acceptance })
}

/// Drops the off-diagonal part: `c_j = Σ_k q_k |a_{k,j}|²`, normalized.
pub fn reduce_to_pauli(ensemble: &ErrorEnsemble) -> Result<PauliChannel> {
    let n = ensemble.num_qubits();
    let mut rates = vec![0.0; 1usize << (2 * n)];
    for (q, e) in ensemble.entries() {
        for (a, p) in e.terms() {
            rates[p.label()] += q * a.norm_sqr();
        }
    }
    PauliChannel::from_weights(n, rates)
}

/// Cross-term sum `Σ_k q_k Σ_{r≠s} a_r a_s* Tr(A P_r ρ P_s)` on `state`.
pub fn offdiagonal_bias_bound(ensemble: &ErrorEnsemble, observable: &PauliString, state: &DensityMatrix) -> Result<f64> {
    Ok(ensemble.split_expectation(observable, state)?[1])
}
