use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::pauli::PauliString;

use super::gate::Gate;

/// Applies a `2^k × 2^k` matrix to a vector of `2^total` amplitudes.
/// `positions[j]` is the bit index of local qubit `j`, local qubit 0 being the
/// most significant bit of the matrix index.
pub(crate) fn apply_kernel(v: &mut [Complex64], total: usize, positions: &[usize], m: &CMatrix) {
    let k = positions.len();
    if k == 0 {
        let s = m[(0, 0)];
        v.iter_mut().for_each(|a| *a *= s);
        return;
    }
    let dim = 1usize << k;
    let offsets: Vec<usize> = (0..dim)
        .map(|j| {
            (0..k).fold(0, |acc, b| if j >> (k - 1 - b) & 1 == 1 { acc | 1 << positions[b] } else { acc })
        })
        .collect();
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    let mut old = vec![ZERO; dim];
    for i in 0..1usize << (total - k) {
        // Spread `i` over the non-target bits.
        let mut base = i;
        for &p in &sorted {
            let low = base & ((1 << p) - 1);
            base = ((base >> p) << (p + 1)) | low;
        }
        for j in 0..dim {
            old[j] = v[base | offsets[j]];
        }
        for r in 0..dim {
            let mut acc = ZERO;
            for (cidx, o) in old.iter().enumerate() {
                acc += m[(r, cidx)] * o;
            }
            v[base | offsets[r]] = acc;
        }
    }
}

/// Density matrix over `n` qubits, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero_state(n: usize) -> Self {
        Self::basis_state(n, 0)
    }

    pub fn basis_state(n: usize, index: usize) -> Self {
        let d = 1usize << n;
        let mut data = vec![ZERO; d * d];
        data[index * d + index] = ONE;
        Self { n, data }
    }

    pub fn from_statevector(psi: &[Complex64]) -> Result<Self> {
        let d = psi.len();
        if !d.is_power_of_two() {
            return Err(Error::InvalidParameter("statevector length must be a power of two".into()));
        }
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("statevector norm² is {norm}")));
        }
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = psi[i] * psi[j].conj();
            }
        }
        Ok(Self { n: d.trailing_zeros() as usize, data })
    }

    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        let rho = Self { n: m.dim().trailing_zeros() as usize, data: m.data().to_vec() };
        rho.validate(1e-8)?;
        Ok(rho)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            data[i * d + i] = Complex64::new(1.0 / d as f64, 0.0);
        }
        Self { n, data }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_vec(self.dim(), self.data.clone())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Checks trace and Hermiticity. Positivity is left to callers that need it.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let t = self.trace();
        if (t - ONE).norm() > tol {
            return Err(Error::Consistency(format!("density matrix trace is {t}")));
        }
        let h = self.hermiticity_error();
        if h > tol {
            return Err(Error::Consistency(format!("density matrix is not Hermitian ({h:e})")));
        }
        Ok(())
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        if let Some(&q) = targets.iter().find(|&&q| q >= self.n) {
            return Err(Error::InvalidParameter(format!("qubit {q} outside a {}-qubit register", self.n)));
        }
        Ok(())
    }

    /// `ρ ← U ρ U†` for a local matrix on `targets`.
    pub fn apply_unitary(&mut self, targets: &[usize], u: &CMatrix) -> Result<()> {
        self.check_targets(targets)?;
        if u.dim() != 1 << targets.len() {
            return Err(Error::Dimension { expected: 1 << targets.len(), found: u.dim() });
        }
        let n = self.n;
        let rows: Vec<usize> = targets.iter().map(|&q| 2 * n - 1 - q).collect();
        let cols: Vec<usize> = targets.iter().map(|&q| n - 1 - q).collect();
        apply_kernel(&mut self.data, 2 * n, &rows, u);
        apply_kernel(&mut self.data, 2 * n, &cols, &u.conj());
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        if let super::GateKind::Pauli(local) = &gate.kind {
            let full = PauliString::embed(self.n, &gate.targets, local);
            self.check_targets(&gate.targets)?;
            self.apply_pauli(&full);
            return Ok(());
        }
        self.apply_unitary(&gate.targets, &gate.matrix())
    }

    /// `ρ ← P ρ P†` for a register-wide Pauli.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        assert_eq!(p.num_qubits(), self.n);
        if p.is_identity() {
            return;
        }
        let d = self.dim();
        let q = p.unsigned();
        let w: Vec<(usize, Complex64)> =
            (0..d).map(|b| {
                let (b2, w) = q.apply_to_basis(b as u64);
                (b2 as usize, w)
            }).collect();
        let mut out = vec![ZERO; d * d];
        for r in 0..d {
            let (r2, wr) = w[r];
            for c in 0..d {
                let (c2, wc) = w[c];
                out[r2 * d + c2] = wr * self.data[r * d + c] * wc.conj();
            }
        }
        self.data = out;
    }

    /// `ρ ← Σ_j c_j P_j ρ P_j` with the channel acting on `qubits`.
    pub fn apply_pauli_channel(&mut self, qubits: &[usize], channel: &crate::channel::PauliChannel) -> Result<()> {
        self.check_targets(qubits)?;
        if channel.num_qubits() != qubits.len() {
            return Err(Error::Dimension { expected: qubits.len(), found: channel.num_qubits() });
        }
        let mut acc = vec![ZERO; self.data.len()];
        for (local, rate) in channel.terms() {
            let mut term = self.clone();
            term.apply_pauli(&PauliString::embed(self.n, qubits, &local));
            for (a, b) in acc.iter_mut().zip(&term.data) {
                *a += b * rate;
            }
        }
        self.data = acc;
        Ok(())
    }

    /// `ρ ← Σ_j p_j K_j ρ K_j†` with the Kraus operators acting on `qubits`.
    pub fn apply_kraus(&mut self, qubits: &[usize], kraus: &[(f64, CMatrix)]) -> Result<()> {
        self.check_targets(qubits)?;
        let mut acc = vec![ZERO; self.data.len()];
        let n = self.n;
        let rows: Vec<usize> = qubits.iter().map(|&q| 2 * n - 1 - q).collect();
        let cols: Vec<usize> = qubits.iter().map(|&q| n - 1 - q).collect();
        for (w, k) in kraus {
            if k.dim() != 1 << qubits.len() {
                return Err(Error::Dimension { expected: 1 << qubits.len(), found: k.dim() });
            }
            let mut term = self.data.clone();
            apply_kernel(&mut term, 2 * n, &rows, k);
            apply_kernel(&mut term, 2 * n, &cols, &k.conj());
            for (a, b) in acc.iter_mut().zip(&term) {
                *a += b * *w;
            }
        }
        self.data = acc;
        Ok(())
    }

    /// `Tr(Pρ)` including the phase of `P`.
    pub fn expectation_complex(&self, p: &PauliString) -> Complex64 {
        assert_eq!(p.num_qubits(), self.n);
        let d = self.dim();
        let mut acc = ZERO;
        for r in 0..d {
            let (r2, w) = p.apply_to_basis(r as u64);
            acc += w * self.data[r * d + r2 as usize];
        }
        acc
    }

    /// `Tr(Aρ)` for a Hermitian Pauli observable.
    pub fn expectation(&self, observable: &PauliString) -> Result<f64> {
        if observable.num_qubits() != self.n {
            return Err(Error::Dimension { expected: self.n, found: observable.num_qubits() });
        }
        if !observable.is_hermitian() {
            return Err(Error::InvalidParameter(format!("observable {observable} is not Hermitian")));
        }
        let v = self.expectation_complex(observable);
        if v.im.abs() > 1e-10 {
            return Err(Error::Consistency(format!("⟨{observable}⟩ has imaginary part {:e}", v.im)));
        }
        Ok(v.re)
    }

    /// Computational-basis probabilities, negatives from rounding clamped to zero.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re.max(0.0)).collect()
    }

    /// Reduced state on `keep`, in the given order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        self.check_targets(keep)?;
        let n = self.n;
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let k = keep.len();
        let dk = 1usize << k;
        let compose = |kept: usize, env: usize| -> usize {
            let mut idx = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                if kept >> (k - 1 - j) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            for (j, &q) in traced.iter().enumerate() {
                if env >> (traced.len() - 1 - j) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            idx
        };
        let d = self.dim();
        let mut data = vec![ZERO; dk * dk];
        for e in 0..1usize << traced.len() {
            for a in 0..dk {
                let ra = compose(a, e);
                for b in 0..dk {
                    data[a * dk + b] += self.data[ra * d + compose(b, e)];
                }
            }
        }
        Ok(DensityMatrix { n: k, data })
    }

    /// Projects `qubits` onto `|0⟩`, traces them out and renormalizes.
    /// Returns the conditional state and the acceptance probability.
    pub fn postselect_zero(&self, qubits: &[usize]) -> Result<(DensityMatrix, f64)> {
        self.check_targets(qubits)?;
        let n = self.n;
        let mask: usize = qubits.iter().fold(0, |m, &q| m | 1 << (n - 1 - q));
        let mut projected = self.clone();
        let d = self.dim();
        for r in 0..d {
            for c in 0..d {
                if r & mask != 0 || c & mask != 0 {
                    projected.data[r * d + c] = ZERO;
                }
            }
        }
        let prob = projected.trace().re;
        if prob <= 0.0 {
            return Err(Error::Consistency("post-selection accepted nothing".into()));
        }
        let keep: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
        let mut reduced = projected.partial_trace(&keep)?;
        reduced.data.iter_mut().for_each(|z| *z /= prob);
        Ok((reduced, prob))
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &[Complex64]) -> f64 {
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += psi[i].conj() * self.data[i * d + j] * psi[j];
            }
        }
        acc.re
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let m = self.to_matrix().kron(&other.to_matrix());
        DensityMatrix { n: self.n + other.n, data: m.data().to_vec() }
    }
}

/// Applies a gate to a statevector in place.
pub fn apply_gate_to_state(psi: &mut [Complex64], n: usize, gate: &Gate) {
    let positions: Vec<usize> = gate.targets.iter().map(|&q| n - 1 - q).collect();
    apply_kernel(psi, n, &positions, &gate.matrix());
}
