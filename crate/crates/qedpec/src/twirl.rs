//! Pauli twirling: averaged channels, partial-set search and randomized
//! circuit instances.
//!
//! A gate `U` twirled by `P` runs as `P' · Λ · U · P` with `P' = U P U†`, so the
//! noise `Λ` is conjugated by the frame image `P'`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChiMatrix;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pauli::{symplectic_product, PauliString};
use crate::propagate::conjugate_clifford;
use crate::seeding;
use crate::sim::{Circuit, Gate, Layer};

/// Pool size up to which the set search enumerates every subset.
pub const EXHAUSTIVE_POOL: usize = 12;

/// Paulis on a gate's qubits, sampled uniformly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TwirlSet {
    members: Vec<PauliString>,
}

impl TwirlSet {
    /// Members are stored phase-free; duplicates are rejected.
    pub fn new(members: Vec<PauliString>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::InvalidParameter("empty twirl set".into()))?;
        let n = first.num_qubits();
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(members.len());
        for m in members {
            if m.num_qubits() != n {
                return Err(Error::Dimension { expected: n, found: m.num_qubits() });
            }
            if !seen.insert(m.label()) {
                return Err(Error::InvalidParameter(format!("duplicate twirl member {m}")));
            }
            out.push(m.unsigned());
        }
        Ok(Self { members: out })
    }

    pub fn parse(labels: &[&str]) -> Result<Self> {
        Self::new(labels.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?)
    }

    pub fn full(n: usize) -> Self {
        Self { members: PauliString::all(n).collect() }
    }

    pub fn trivial(n: usize) -> Self {
        Self { members: vec![PauliString::identity(n)] }
    }

    pub fn num_qubits(&self) -> usize {
        self.members[0].num_qubits()
    }

    pub fn members(&self) -> &[PauliString] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, p: &PauliString) -> bool {
        let q = p.unsigned();
        self.members.contains(&q)
    }

    /// The Paulis `U P U†` that conjugate the gate's noise.
    pub fn frame_images(&self, gate: &Gate) -> Result<Vec<PauliString>> {
        self.members.iter().map(|p| frame_correction(gate, p)).collect()
    }
}

/// The set `{IY, IZ, YY, YZ, ZI, ZY, ZZ}` used on every ECR of the VQE circuit.
pub fn vqe_twirl_set() -> TwirlSet {
    TwirlSet::parse(&["IY", "IZ", "YY", "YZ", "ZI", "ZY", "ZZ"]).expect("valid labels")
}

/// `U P U†` for a gate-local Pauli `P`.
pub fn frame_correction(gate: &Gate, local: &PauliString) -> Result<PauliString> {
    let k = gate.targets.len();
    if local.num_qubits() != k {
        return Err(Error::Dimension { expected: k, found: local.num_qubits() });
    }
    let relabeled = Gate { kind: gate.kind.clone(), targets: (0..k).collect() };
    conjugate_clifford(&relabeled, local)
        .map_err(|_| Error::FrameCorrection(format!("{gate} does not map {local} to a Pauli")))
}

fn parity(a: &PauliString, b: &PauliString) -> i32 {
    symplectic_product(a, b).expect("same register") as i32
}

/// `(1/|S|) Σ_P P Λ(P ρ P) P` in the chi representation:
/// `χ'_{mn} = χ_{mn} · avg_P (−1)^{⟨P,E_m⟩+⟨P,E_n⟩}`.
pub fn twirl_chi(chi: &ChiMatrix, conjugators: &[PauliString]) -> Result<ChiMatrix> {
    let n = chi.num_qubits();
    if conjugators.is_empty() {
        return Err(Error::InvalidParameter("empty twirl set".into()));
    }
    if let Some(p) = conjugators.iter().find(|p| p.num_qubits() != n) {
        return Err(Error::Dimension { expected: n, found: p.num_qubits() });
    }
    let d = chi.dim();
    // signs[k][j] = (−1)^{⟨P_j, E_k⟩}
    let signs: Vec<Vec<i32>> = (0..d)
        .map(|k| {
            let e = PauliString::from_label(n, k);
            conjugators.iter().map(|p| 1 - 2 * parity(p, &e)).collect()
        })
        .collect();
    let inv = 1.0 / conjugators.len() as f64;
    let mut out = ChiMatrix::zeros(n);
    for m in 0..d {
        for k in 0..d {
            let c = chi.get(m, k);
            if c.norm() == 0.0 {
                continue;
            }
            let avg: i32 = signs[m].iter().zip(&signs[k]).map(|(a, b)| a * b).sum();
            out.set(m, k, c * (avg as f64 * inv));
        }
    }
    Ok(out)
}

/// Kraus form of the twirl: `{(w/|S|, Q K Q)}` for every `Q` and input term.
pub fn twirl_kraus(kraus: &[(f64, CMatrix)], conjugators: &[PauliString]) -> Result<Vec<(f64, CMatrix)>> {
    if conjugators.is_empty() {
        return Err(Error::InvalidParameter("empty twirl set".into()));
    }
    let inv = 1.0 / conjugators.len() as f64;
    let mut out = Vec::with_capacity(kraus.len() * conjugators.len());
    for q in conjugators {
        let qm = CMatrix::pauli(&q.unsigned());
        if let Some((_, k)) = kraus.iter().find(|(_, k)| k.dim() != qm.dim()) {
            return Err(Error::Dimension { expected: qm.dim(), found: k.dim() });
        }
        for (w, k) in kraus {
            out.push((w * inv, qm.matmul(k).matmul(&qm)));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwirlObjectiveReport {
    /// Frobenius norm of the coherences the detectability predicate does not cover.
    pub objective: f64,
    pub offdiag_before: f64,
    pub offdiag_after: f64,
}

/// Residual of a twirled channel against noise the code tolerates.
///
/// A coherence `χ_{mn}` is harmless when the product `E_m E_n` is allowed by
/// the predicate; every other off-diagonal entry counts toward the norm.
pub fn twirl_objective(chi: &ChiMatrix, allowed: &(dyn Fn(&PauliString) -> bool + Sync)) -> f64 {
    let n = chi.num_qubits();
    let d = chi.dim();
    let mut s = 0.0;
    for m in 0..d {
        for k in 0..d {
            if m == k {
                continue;
            }
            let c = chi.get(m, k);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let prod = PauliString::from_label(n, m) * PauliString::from_label(n, k);
            if !allowed(&prod.unsigned()) {
                s += c.norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Smallest-objective subset of `pool` with at most `max_size` members.
///
/// Exhaustive up to [`EXHAUSTIVE_POOL`] candidates, otherwise greedy growth
/// followed by a single pass of one-for-one swaps. Ties prefer fewer members,
/// then the lexicographically smaller label list.
pub fn search_partial_set(
    chi: &ChiMatrix,
    allowed: &(dyn Fn(&PauliString) -> bool + Sync),
    pool: &[PauliString],
    max_size: usize,
) -> Result<(TwirlSet, TwirlObjectiveReport)> {
    if pool.is_empty() {
        return Err(Error::InvalidParameter("empty candidate pool".into()));
    }
    let n = chi.num_qubits();
    if let Some(p) = pool.iter().find(|p| p.num_qubits() != n) {
        return Err(Error::Dimension { expected: n, found: p.num_qubits() });
    }
    let mut pool: Vec<PauliString> = pool.iter().map(PauliString::unsigned).collect();
    pool.sort_by_key(PauliString::label);
    pool.dedup();
    let max_size = max_size.clamp(1, pool.len());
    let eval = |idx: &[usize]| -> f64 {
        let set: Vec<PauliString> = idx.iter().map(|&i| pool[i]).collect();
        twirl_objective(&twirl_chi(chi, &set).expect("valid set"), allowed)
    };
    let key = |obj: f64, idx: &[usize]| (quantize(obj), idx.len(), idx.iter().map(|&i| pool[i].label()).collect::<Vec<_>>());

    let best: Vec<usize> = if pool.len() <= EXHAUSTIVE_POOL {
        (1u32..1 << pool.len())
            .into_par_iter()
            .filter(|mask| mask.count_ones() as usize <= max_size)
            .map(|mask| {
                let idx: Vec<usize> = (0..pool.len()).filter(|i| mask >> i & 1 == 1).collect();
                let obj = eval(&idx);
                (key(obj, &idx), idx)
            })
            .min_by(|a, b| a.0.cmp(&b.0))
            .map(|(_, idx)| idx)
            .expect("nonempty pool")
    } else {
        greedy(pool.len(), max_size, &eval, &key)
    };
    let members: Vec<PauliString> = best.iter().map(|&i| pool[i]).collect();
    let twirled = twirl_chi(chi, &members)?;
    let report = TwirlObjectiveReport {
        objective: twirl_objective(&twirled, allowed),
        offdiag_before: chi.off_diagonal_norm(),
        offdiag_after: twirled.off_diagonal_norm(),
    };
    Ok((TwirlSet::new(members)?, report))
}

/// Objective values within 1e−12 compare equal so the size tie-break applies.
fn quantize(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

type Key = (i64, usize, Vec<usize>);

fn greedy(
    pool_len: usize,
    max_size: usize,
    eval: &(dyn Fn(&[usize]) -> f64 + Sync),
    key: &(dyn Fn(f64, &[usize]) -> Key + Sync),
) -> Vec<usize> {
    let score = |idx: &[usize]| {
        let mut s = idx.to_vec();
        s.sort_unstable();
        (key(eval(&s), &s), s)
    };
    let (mut best_key, mut current) = (0..pool_len).into_par_iter().map(|i| score(&[i])).min().expect("nonempty");
    while current.len() < max_size {
        let candidate = (0..pool_len)
            .into_par_iter()
            .filter(|i| !current.contains(i))
            .map(|i| {
                let mut s = current.clone();
                s.push(i);
                score(&s)
            })
            .min();
        match candidate {
            Some((k, s)) if k.0 < best_key.0 => {
                best_key = k;
                current = s;
            }
            _ => break,
        }
    }
    let swaps: Vec<(usize, usize)> =
        (0..current.len()).flat_map(|a| (0..pool_len).map(move |b| (a, b))).collect();
    if let Some((k, s)) = swaps
        .into_par_iter()
        .filter(|&(_, b)| !current.contains(&b))
        .map(|(a, b)| {
            let mut s = current.clone();
            s[a] = b;
            score(&s)
        })
        .min()
    {
        if k < best_key {
            current = s;
        }
    }
    current
}

/// Which gates get twirled, keyed by gate name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwirlPlan {
    pub sets: BTreeMap<String, TwirlSet>,
}

impl TwirlPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, gate_name: &str, set: TwirlSet) -> Self {
        self.sets.insert(gate_name.to_string(), set);
        self
    }

    pub fn set_for(&self, gate: &Gate) -> Option<&TwirlSet> {
        self.sets.get(&gate.name()).filter(|s| s.num_qubits() == gate.targets.len())
    }
}

/// `count` random instances of `circuit`. Each twirled gate gets a uniformly
/// drawn `P` before its layer and `U P U†` after the layer's noise.
pub fn instantiate_twirled(circuit: &Circuit, plan: &TwirlPlan, count: usize, seed: u64) -> Result<Vec<Circuit>> {
    if count == 0 {
        return Err(Error::InvalidParameter("instance count must be at least 1".into()));
    }
    // Frame corrections are resolved once per gate and member.
    let mut images: Vec<Vec<Option<Vec<PauliString>>>> = Vec::new();
    for layer in circuit.layers() {
        let mut row = Vec::new();
        for g in &layer.gates {
            row.push(match plan.set_for(g) {
                Some(set) => Some(set.frame_images(g)?),
                None => None,
            });
        }
        images.push(row);
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, "twirl-instance", i as u64);
            one_instance(circuit, plan, &images, &mut rng)
        })
        .collect()
}

fn one_instance<R: Rng>(
    circuit: &Circuit,
    plan: &TwirlPlan,
    images: &[Vec<Option<Vec<PauliString>>>],
    rng: &mut R,
) -> Result<Circuit> {
    let n = circuit.num_qubits();
    let mut out = Circuit::new(n);
    for (layer, row) in circuit.layers().iter().zip(images) {
        let mut before = Vec::new();
        let mut after = Vec::new();
        for (g, imgs) in layer.gates.iter().zip(row) {
            let (Some(set), Some(imgs)) = (plan.set_for(g), imgs) else { continue };
            let j = rng.random_range(0..set.len());
            let p = set.members()[j];
            if p.is_identity() {
                continue;
            }
            before.push(Gate::pauli(&PauliString::embed(n, &g.targets, &p)));
            after.push(Gate::pauli(&PauliString::embed(n, &g.targets, &imgs[j])));
        }
        if !before.is_empty() {
            out.push_layer(Layer::new(before))?;
        }
        out.push_layer(layer.clone())?;
        if !after.is_empty() {
            out.push_layer(Layer::new(after))?;
        }
    }
    Ok(out)
}

/// Exact average over every member choice for a single noisy gate: the noise
/// Kraus list twirled by the frame images.
pub fn twirl_gate_noise(gate: &Gate, set: &TwirlSet, kraus: &[(f64, CMatrix)]) -> Result<Vec<(f64, CMatrix)>> {
    twirl_kraus(kraus, &set.frame_images(gate)?)
}

/// `χ` of a single unitary, e.g. a coherent over-rotation.
pub fn chi_of_unitary(u: &CMatrix) -> Result<ChiMatrix> {
    let n = u.dim().trailing_zeros() as usize;
    crate::channel::chi_of_kraus(n, &[crate::channel::KrausTerm::matrix(1.0, u.clone())])
}

/// Per-qubit `Rz(ω)` acting on every one of `n` qubits.
pub fn rz_product_chi(n: usize, omega: f64) -> ChiMatrix {
    let (c, s) = ((omega / 2.0).cos(), (omega / 2.0).sin());
    let mut one = ChiMatrix::zeros(1);
    // Rz = c·I − i s·Z.
    one.set(0, 0, Complex64::new(c * c, 0.0));
    one.set(3, 3, Complex64::new(s * s, 0.0));
    one.set(0, 3, Complex64::new(0.0, c * s));
    one.set(3, 0, Complex64::new(0.0, -c * s));
    one.tensor_power(n)
}
