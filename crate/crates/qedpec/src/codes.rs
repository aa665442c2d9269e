//! The `[[n, n−2, 2]]` detection codes and the 3-qubit bit-flip code.
//!
//! Register order for the detection codes: qubit 0 is `q_x`, qubit 1 is `q_z`,
//! qubits `2..n` carry the logical inputs. The encoder takes `|0⟩|0⟩|ψ⟩`; after
//! decoding, check qubit 0 holds the `X^{⊗n}` syndrome and qubit 1 the `Z^{⊗n}`
//! syndrome, so acceptance means both read 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE};
use crate::pauli::{Letter, PauliString};
use crate::propagate::conjugate_clifford;
use crate::sim::{Circuit, Counts, Gate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Detection,
    BitFlip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub kind: CodeKind,
    pub n_physical: usize,
    pub k_logical: usize,
    pub generators: Vec<PauliString>,
    pub logical_x: Vec<PauliString>,
    pub logical_z: Vec<PauliString>,
}

impl CodeSpec {
    pub fn n_physical(&self) -> usize {
        self.n_physical
    }

    /// Qubits that must read 0 after decoding for a shot to be kept.
    pub fn decoded_check_qubits(&self) -> Vec<usize> {
        match self.kind {
            CodeKind::Detection => vec![0, 1],
            CodeKind::BitFlip => Vec::new(),
        }
    }

    /// True when `error` anticommutes with some generator.
    pub fn detects(&self, error: &PauliString) -> bool {
        self.generators.iter().any(|g| !g.commutes_with(error))
    }

    /// Checks the commutation relations of generators and logical operators.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Consistency(m));
        for (i, a) in self.generators.iter().enumerate() {
            for b in &self.generators[i + 1..] {
                if !a.commutes_with(b) {
                    return bad(format!("generators {a} and {b} anticommute"));
                }
            }
        }
        let logicals = self.logical_x.iter().chain(&self.logical_z);
        for l in logicals {
            if let Some(g) = self.generators.iter().find(|g| !g.commutes_with(l)) {
                return bad(format!("logical {l} anticommutes with generator {g}"));
            }
        }
        for (j, xj) in self.logical_x.iter().enumerate() {
            for (m, zm) in self.logical_z.iter().enumerate() {
                if xj.commutes_with(zm) == (j == m) {
                    return bad(format!("logical pair X{j}, Z{m} has the wrong commutation"));
                }
            }
            for xm in &self.logical_x {
                if !xj.commutes_with(xm) {
                    return bad(format!("logical X operators {xj} and {xm} anticommute"));
                }
            }
        }
        for (j, zj) in self.logical_z.iter().enumerate() {
            for zm in &self.logical_z[j + 1..] {
                if !zj.commutes_with(zm) {
                    return bad(format!("logical Z operators {zj} and {zm} anticommute"));
                }
            }
        }
        Ok(())
    }

    /// Stabilizer group elements, identity first.
    pub fn stabilizer_group(&self) -> Vec<PauliString> {
        let n = self.n_physical;
        let mut group = vec![PauliString::identity(n)];
        for g in &self.generators {
            let more: Vec<_> = group.iter().map(|s| s * g).collect();
            group.extend(more);
        }
        group
    }
}

/// The `[[n, n−2, 2]]` code with generators `X^{⊗n}` and `Z^{⊗n}`.
pub fn qedc(n: usize) -> Result<CodeSpec> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("detection code needs even n ≥ 4, got {n}")));
    }
    let enc = qedc_encoder(n);
    let image = |p: PauliString| -> Result<PauliString> {
        enc.gates().try_fold(p, |acc, g| conjugate_clifford(g, &acc))
    };
    let mut logical_x = Vec::new();
    let mut logical_z = Vec::new();
    for j in 2..n {
        logical_x.push(image(PauliString::single(n, j, Letter::X))?);
        logical_z.push(image(PauliString::single(n, j, Letter::Z))?);
    }
    let all = |l: Letter| PauliString::from_letters(&vec![l; n]);
    let generators = vec![all(Letter::X), all(Letter::Z)];
    if image(PauliString::single(n, 0, Letter::Z))? != generators[0]
        || image(PauliString::single(n, 1, Letter::Z))? != generators[1]
    {
        return Err(Error::Consistency("encoder does not prepare the stabilizers".into()));
    }
    let code = CodeSpec { kind: CodeKind::Detection, n_physical: n, k_logical: n - 2, generators, logical_x, logical_z };
    code.validate()?;
    Ok(code)
}

fn qedc_encoder(n: usize) -> Circuit {
    let mut c = Circuit::new(n);
    for d in (3..n).step_by(2) {
        c.push(Gate::cx(d, 1)).expect("in range");
    }
    c.push(Gate::h(0)).expect("in range");
    for q in 0..n - 1 {
        c.push(Gate::cx(q, q + 1)).expect("in range");
    }
    c
}

pub fn encode_circuit(code: &CodeSpec) -> Circuit {
    match code.kind {
        CodeKind::Detection => qedc_encoder(code.n_physical),
        CodeKind::BitFlip => {
            let mut c = Circuit::new(BITFLIP_REGISTER);
            c.push(Gate::cx(0, 1)).expect("in range");
            c.push(Gate::cx(0, 2)).expect("in range");
            c
        }
    }
}

pub fn decode_circuit(code: &CodeSpec) -> Circuit {
    encode_circuit(code).inverse()
}

/// Physical operator for a logical Pauli, reduced to minimal weight by
/// stabilizer multiplication. Ties go to the largest base-4 label.
pub fn logical_to_physical(code: &CodeSpec, logical: &PauliString) -> Result<PauliString> {
    if logical.num_qubits() != code.k_logical {
        return Err(Error::Mapping(format!(
            "{logical} acts on {} logical qubits, code has {}",
            logical.num_qubits(),
            code.k_logical
        )));
    }
    let n = code.n_physical;
    let mut phys = PauliString::identity(n).with_phase_exponent(logical.phase_exponent());
    for j in 0..code.k_logical {
        let (x, z) = (&code.logical_x[j], &code.logical_z[j]);
        phys = match logical.letter(j) {
            Letter::I => phys,
            Letter::X => &phys * x,
            Letter::Z => &phys * z,
            // Y = iXZ.
            Letter::Y => {
                let xz = x * z;
                phys * xz.with_phase_exponent((xz.phase_exponent() + 1) % 4)
            }
        };
    }
    let best = code
        .stabilizer_group()
        .iter()
        .map(|s| &phys * s)
        .min_by_key(|p| (p.weight(), std::cmp::Reverse(p.label())))
        .expect("group is nonempty");
    Ok(best)
}

/// `exp(−iθP̄/2)` implemented by the physical image of `P̄`.
pub fn encoded_exponential(code: &CodeSpec, logical: &PauliString, theta: f64) -> Result<Gate> {
    let phys = logical_to_physical(code, logical)?;
    if !phys.is_hermitian() {
        return Err(Error::Mapping(format!("{logical} maps to non-Hermitian {phys}")));
    }
    Gate::pauli_exp(&phys, theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostSelectionResult {
    /// Kept shots with the check bits removed.
    pub accepted: Counts,
    pub acceptance_rate: f64,
    pub rejected: u64,
}

/// Keeps shots whose decoded check bits are all 0 and strips those bits.
pub fn post_select(counts: &Counts, code: &CodeSpec) -> Result<PostSelectionResult> {
    let n = counts.num_bits();
    if n != code.n_physical {
        return Err(Error::Dimension { expected: code.n_physical, found: n });
    }
    let checks = code.decoded_check_qubits();
    let data: Vec<usize> = (0..n).filter(|q| !checks.contains(q)).collect();
    let check_mask: u64 = checks.iter().map(|q| 1u64 << (n - 1 - q)).sum();
    let mut accepted = Counts::new(data.len());
    let mut rejected = 0;
    for (b, c) in counts.iter() {
        if b & check_mask != 0 {
            rejected += c;
            continue;
        }
        let mut stripped = 0u64;
        for &q in &data {
            stripped = stripped << 1 | (b >> (n - 1 - q) & 1);
        }
        accepted.add(stripped, c);
    }
    let total = counts.total();
    let acceptance_rate = if total == 0 { 0.0 } else { accepted.total() as f64 / total as f64 };
    Ok(PostSelectionResult { accepted, acceptance_rate, rejected })
}

/// Data qubits 0..3 plus syndrome ancillas 3 and 4.
pub const BITFLIP_REGISTER: usize = 5;

/// The 3-qubit repetition code on qubits 0..3 of a 5-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct BitFlipCode {
    pub spec: CodeSpec,
}

pub fn bitflip_code() -> BitFlipCode {
    let p = |s: &str| -> PauliString { s.parse().expect("label") };
    let spec = CodeSpec {
        kind: CodeKind::BitFlip,
        n_physical: 3,
        k_logical: 1,
        generators: vec![p("ZZI"), p("IZZ")],
        logical_x: vec![p("XXX")],
        logical_z: vec![p("ZII")],
    };
    BitFlipCode { spec }
}

impl BitFlipCode {
    pub const ANCILLAS: [usize; 2] = [3, 4];

    /// Parities `(Z₀Z₁, Z₁Z₂)` of an X-error pattern given as a 3-bit mask
    /// (bit `2−q` for qubit `q`).
    pub fn syndrome(x_errors: u64) -> (u8, u8) {
        let bit = |q: usize| (x_errors >> (2 - q) & 1) as u8;
        (bit(0) ^ bit(1), bit(1) ^ bit(2))
    }

    /// Qubit flipped by majority correction for a syndrome.
    pub fn correction(syndrome: (u8, u8)) -> Option<usize> {
        match syndrome {
            (1, 0) => Some(0),
            (1, 1) => Some(1),
            (0, 1) => Some(2),
            _ => None,
        }
    }

    /// Copies the two parities onto the ancillas, which must start in `|0⟩`.
    pub fn syndrome_circuit(&self) -> Circuit {
        let mut c = Circuit::new(BITFLIP_REGISTER);
        for (d, a) in [(0, 3), (1, 3), (1, 4), (2, 4)] {
            c.push(Gate::cx(d, a)).expect("in range");
        }
        c
    }

    /// Ancilla-controlled X on the qubit selected by each syndrome value.
    pub fn correction_circuit(&self) -> Circuit {
        let mut c = Circuit::new(BITFLIP_REGISTER);
        for s in [(1u8, 0u8), (1, 1), (0, 1)] {
            let target = Self::correction(s).expect("nonzero syndrome");
            let gate = controlled_x_on_pattern(s).expect("unitary");
            c.push(Gate::unitary(&gate.0, gate.1, vec![3, 4, target]).expect("valid gate"))
                .expect("in range");
        }
        c
    }
}

/// `X` on the last qubit when the two controls read `pattern`.
fn controlled_x_on_pattern(pattern: (u8, u8)) -> Result<(String, CMatrix)> {
    let mut m = CMatrix::identity(8);
    let base = ((pattern.0 as usize) << 2) | ((pattern.1 as usize) << 1);
    m[(base, base)] = num_complex::Complex64::new(0.0, 0.0);
    m[(base + 1, base + 1)] = num_complex::Complex64::new(0.0, 0.0);
    m[(base, base + 1)] = ONE;
    m[(base + 1, base)] = ONE;
    Ok((format!("ccx{}{}", pattern.0, pattern.1), m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_length_rejected() {
        assert!(qedc(5).is_err());
        assert!(qedc(2).is_err());
    }

    #[test]
    fn six_qubit_code_has_four_logicals() {
        let c = qedc(6).unwrap();
        assert_eq!(c.k_logical, 4);
        assert!(c.generators.iter().all(|g| g.weight() == 6));
    }

    #[test]
    fn syndromes_locate_single_flips() {
        for q in 0..3 {
            let s = BitFlipCode::syndrome(1 << (2 - q));
            assert_eq!(BitFlipCode::correction(s), Some(q));
        }
        assert_eq!(BitFlipCode::correction(BitFlipCode::syndrome(0)), None);
    }
}
