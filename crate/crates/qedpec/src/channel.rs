//! Pauli channels, their fidelity (PTM diagonal) and chi-matrix views,
//! Walsh–Hadamard transforms and quasi-probability inverses.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::pauli::PauliString;
use crate::propagate::GeneralizedError;

/// Tolerance on `Σc = 1` and on negative rates.
pub const RATE_TOL: f64 = 1e-12;
/// Fidelities smaller than this in magnitude make a channel non-invertible.
pub const SINGULAR_TOL: f64 = 1e-6;

fn size(n: usize) -> usize {
    1usize << (2 * n)
}

/// In-place transform `v_k ← Σ_j (−1)^{⟨P_j,P_k⟩} v_j` over base-4 labels.
///
/// The single-qubit kernel in I,X,Y,Z order is
/// `[[1,1,1,1],[1,1,-1,-1],[1,-1,1,-1],[1,-1,-1,1]]`; the full transform is
/// its n-fold tensor power, applied one digit at a time.
pub fn walsh_hadamard(v: &mut [f64]) {
    let len = v.len();
    assert!(len.is_power_of_two() && len.trailing_zeros().is_multiple_of(2), "length must be 4^n");
    let mut stride = 1;
    while stride < len {
        for block in (0..len).step_by(4 * stride) {
            for off in 0..stride {
                let i = block + off;
                let (a, b, c, d) = (v[i], v[i + stride], v[i + 2 * stride], v[i + 3 * stride]);
                v[i] = a + b + c + d;
                v[i + stride] = a + b - c - d;
                v[i + 2 * stride] = a - b + c - d;
                v[i + 3 * stride] = a - b - c + d;
            }
        }
        stride *= 4;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    n: usize,
    rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityVector {
    n: usize,
    f: Vec<f64>,
}

impl PauliChannel {
    pub fn new(n: usize, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != size(n) {
            return Err(Error::Dimension { expected: size(n), found: rates.len() });
        }
        if let Some((k, &c)) = rates.iter().enumerate().find(|(_, &c)| c < -RATE_TOL || !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate {c} for {} is not a probability",
                PauliString::from_label(n, k)
            )));
        }
        let total: f64 = rates.iter().sum();
        if (total - 1.0).abs() > RATE_TOL * (rates.len() as f64).max(1.0) {
            return Err(Error::InvalidParameter(format!("rates sum to {total}, not 1")));
        }
        Ok(Self { n, rates })
    }

    /// Normalizes nonnegative weights into a channel.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Self::new(n, weights.into_iter().map(|w| w.max(0.0) / total).collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut rates = vec![0.0; size(n)];
        rates[0] = 1.0;
        Self { n, rates }
    }

    /// Channel applying `p` with probability `prob` and the identity otherwise.
    pub fn single_pauli(p: &PauliString, prob: f64) -> Result<Self> {
        let n = p.num_qubits();
        let mut rates = vec![0.0; size(n)];
        rates[0] += 1.0 - prob;
        rates[p.label()] += prob;
        Self::new(n, rates)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, p: &PauliString) -> f64 {
        self.rates[p.label()]
    }

    /// Nonzero rates as `(Pauli, rate)` pairs in label order.
    pub fn terms(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        self.rates
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(move |(k, &c)| (PauliString::from_label(self.n, k), c))
    }

    pub fn tensor(&self, other: &PauliChannel) -> PauliChannel {
        let mut rates = Vec::with_capacity(self.rates.len() * other.rates.len());
        for a in &self.rates {
            for b in &other.rates {
                rates.push(a * b);
            }
        }
        PauliChannel { n: self.n + other.n, rates }
    }

    /// Channel whose rates are relabeled by a Pauli map, e.g. conjugation by a Clifford.
    pub fn relabel(&self, map: impl Fn(&PauliString) -> PauliString) -> Result<PauliChannel> {
        let mut rates = vec![0.0; self.rates.len()];
        for (p, c) in self.terms() {
            let q = map(&p);
            if q.num_qubits() != self.n {
                return Err(Error::Dimension { expected: self.n, found: q.num_qubits() });
            }
            rates[q.label()] += c;
        }
        PauliChannel::new(self.n, rates)
    }
}

impl FidelityVector {
    pub fn new(n: usize, f: Vec<f64>) -> Result<Self> {
        if f.len() != size(n) {
            return Err(Error::Dimension { expected: size(n), found: f.len() });
        }
        if (f[0] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("identity fidelity is {}, not 1", f[0])));
        }
        Ok(Self { n, f })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn get(&self, p: &PauliString) -> f64 {
        self.f[p.label()]
    }
}

pub fn fidelities_from_rates(c: &PauliChannel) -> FidelityVector {
    let mut f = c.rates.clone();
    walsh_hadamard(&mut f);
    // Σc = 1 up to roundoff.
    f[0] = 1.0;
    FidelityVector { n: c.n, f }
}

pub fn rates_from_fidelities(f: &FidelityVector) -> Result<PauliChannel> {
    let mut c = f.f.clone();
    walsh_hadamard(&mut c);
    let scale = size(f.n) as f64;
    c.iter_mut().for_each(|x| *x /= scale);
    PauliChannel::new(f.n, c)
}

/// Signed coefficients `η` over Pauli labels with `γ = Σ|η|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiProbability {
    n: usize,
    eta: Vec<f64>,
}

impl QuasiProbability {
    pub fn new(n: usize, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != size(n) {
            return Err(Error::Dimension { expected: size(n), found: eta.len() });
        }
        let total: f64 = eta.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("quasi-probabilities sum to {total}")));
        }
        Ok(Self { n, eta })
    }

    pub fn identity(n: usize) -> Self {
        let mut eta = vec![0.0; size(n)];
        eta[0] = 1.0;
        Self { n, eta }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.eta.iter().map(|x| x.abs()).sum()
    }

    /// Sampling distribution `|η| / γ`.
    pub fn probabilities(&self) -> Vec<f64> {
        let g = self.gamma();
        self.eta.iter().map(|x| x.abs() / g).collect()
    }

    pub fn sign(&self, label: usize) -> f64 {
        if self.eta[label] < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn sampler(&self) -> QuasiSampler {
        let dist = WeightedIndex::new(self.eta.iter().map(|x| x.abs())).expect("nonzero quasi-probability");
        QuasiSampler { dist, signs: (0..self.eta.len()).map(|k| self.sign(k)).collect() }
    }
}

pub struct QuasiSampler {
    dist: WeightedIndex<f64>,
    signs: Vec<f64>,
}

impl QuasiSampler {
    /// Draws a Pauli label and its sign.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let k = self.dist.sample(rng);
        (k, self.signs[k])
    }
}

/// Quasi-probability inverse `η = 4^{-n} W (1/f)`.
pub fn invert_pauli_channel(f: &FidelityVector) -> Result<QuasiProbability> {
    let n = f.n;
    let mut inv = Vec::with_capacity(f.f.len());
    for (k, &x) in f.f.iter().enumerate() {
        if x.abs() < SINGULAR_TOL {
            return Err(Error::SingularChannel {
                label: PauliString::from_label(n, k).to_string(),
                value: x.abs(),
            });
        }
        inv.push(1.0 / x);
    }
    walsh_hadamard(&mut inv);
    let scale = size(n) as f64;
    inv.iter_mut().for_each(|x| *x /= scale);
    QuasiProbability::new(n, inv)
}

/// `second ∘ first`: fidelities multiply elementwise.
pub fn compose(first: &PauliChannel, second: &PauliChannel) -> Result<PauliChannel> {
    if first.n != second.n {
        return Err(Error::Dimension { expected: first.n, found: second.n });
    }
    let f1 = fidelities_from_rates(first);
    let f2 = fidelities_from_rates(second);
    let f = f1.f.iter().zip(&f2.f).map(|(a, b)| a * b).collect();
    rates_from_fidelities(&FidelityVector { n: first.n, f })
}

/// Rate-space composition: group convolution over phase-free Pauli labels.
pub fn convolve_rates(first: &PauliChannel, second: &PauliChannel) -> Result<PauliChannel> {
    if first.n != second.n {
        return Err(Error::Dimension { expected: first.n, found: second.n });
    }
    let mut out = vec![0.0; first.rates.len()];
    for (a, ca) in first.terms() {
        for (b, cb) in second.terms() {
            out[(a * b).label()] += ca * cb;
        }
    }
    PauliChannel::new(first.n, out)
}

/// `ρ → (1−p)ρ + p·I/2^n`.
pub fn depolarizing(n: usize, p: f64) -> Result<PauliChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("depolarizing rate {p} outside [0, 1]")));
    }
    let d = size(n);
    let mut rates = vec![p / d as f64; d];
    rates[0] = 1.0 - p + p / d as f64;
    PauliChannel::new(n, rates)
}

/// Process matrix over the phase-free Pauli basis: `E(ρ) = Σ χ_{mk} E_m ρ E_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ChiMatrix {
    pub fn zeros(n: usize) -> Self {
        let d = size(n);
        Self { n, data: vec![ZERO; d * d] }
    }

    pub fn from_pauli_channel(c: &PauliChannel) -> Self {
        let mut chi = Self::zeros(c.n);
        for (k, &r) in c.rates.iter().enumerate() {
            chi.set(k, k, Complex64::new(r, 0.0));
        }
        chi
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        size(self.n)
    }

    pub fn get(&self, m: usize, k: usize) -> Complex64 {
        self.data[m * self.dim() + k]
    }

    pub fn set(&mut self, m: usize, k: usize, v: Complex64) {
        let d = self.dim();
        self.data[m * d + k] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.get(k, k).re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for m in 0..d {
            for k in m..d {
                worst = worst.max((self.get(m, k) - self.get(k, m).conj()).norm());
            }
        }
        worst
    }

    /// Frobenius norm of the entries off the diagonal.
    pub fn off_diagonal_norm(&self) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for m in 0..d {
            for k in 0..d {
                if m != k {
                    s += self.get(m, k).norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// PTM diagonal; only the chi diagonal contributes to it.
    pub fn fidelities(&self) -> FidelityVector {
        let mut f = self.diagonal();
        walsh_hadamard(&mut f);
        FidelityVector { n: self.n, f }
    }

    /// Stochastic channel from the diagonal (off-diagonal terms dropped).
    pub fn diagonal_channel(&self) -> Result<PauliChannel> {
        PauliChannel::from_weights(self.n, self.diagonal())
    }

    pub fn tensor(&self, other: &ChiMatrix) -> ChiMatrix {
        let (da, db) = (self.dim(), other.dim());
        let mut out = ChiMatrix::zeros(self.n + other.n);
        for m1 in 0..da {
            for k1 in 0..da {
                let a = self.get(m1, k1);
                if a == ZERO {
                    continue;
                }
                for m2 in 0..db {
                    for k2 in 0..db {
                        out.set(m1 * db + m2, k1 * db + k2, a * other.get(m2, k2));
                    }
                }
            }
        }
        out
    }

    pub fn tensor_power(&self, copies: usize) -> ChiMatrix {
        assert!(copies >= 1);
        let mut out = self.clone();
        for _ in 1..copies {
            out = out.tensor(self);
        }
        out
    }

    /// Dense action on a `2^n × 2^n` operator.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim();
        let basis: Vec<CMatrix> = (0..d).map(|k| CMatrix::pauli(&PauliString::from_label(self.n, k))).collect();
        let mut out = CMatrix::zeros(rho.dim());
        for m in 0..d {
            let left = &basis[m] * rho;
            for k in 0..d {
                let c = self.get(m, k);
                if c.norm() < 1e-300 {
                    continue;
                }
                out = out.add(&(&left * &basis[k]).scale(c));
            }
        }
        out
    }
}

/// Kraus operator given either densely or as a Pauli expansion.
#[derive(Clone, Debug)]
pub enum KrausOperator {
    Matrix(CMatrix),
    Pauli(GeneralizedError),
}

/// A mixture weight `p ≥ 0` and its Kraus operator: the channel is `Σ p K ρ K†`.
#[derive(Clone, Debug)]
pub struct KrausTerm {
    pub weight: f64,
    pub operator: KrausOperator,
}

impl KrausTerm {
    pub fn matrix(weight: f64, m: CMatrix) -> Self {
        Self { weight, operator: KrausOperator::Matrix(m) }
    }

    pub fn pauli(weight: f64, e: GeneralizedError) -> Self {
        Self { weight, operator: KrausOperator::Pauli(e) }
    }
}

fn pauli_amplitudes(n: usize, op: &KrausOperator) -> Result<Vec<Complex64>> {
    let d = size(n);
    let mut a = vec![ZERO; d];
    match op {
        KrausOperator::Matrix(m) => {
            if m.dim() != 1 << n {
                return Err(Error::Dimension { expected: 1 << n, found: m.dim() });
            }
            for (k, slot) in a.iter_mut().enumerate() {
                *slot = m.pauli_coefficient(&PauliString::from_label(n, k));
            }
        }
        KrausOperator::Pauli(e) => {
            if e.num_qubits() != n {
                return Err(Error::Dimension { expected: n, found: e.num_qubits() });
            }
            for (c, p) in e.terms() {
                a[p.label()] += c * p.phase();
            }
        }
    }
    Ok(a)
}

/// Chi matrix of `ρ → Σ_j p_j K_j ρ K_j†`.
pub fn chi_of_kraus(n: usize, terms: &[KrausTerm]) -> Result<ChiMatrix> {
    let d = size(n);
    let mut chi = ChiMatrix::zeros(n);
    for t in terms {
        if t.weight < 0.0 {
            return Err(Error::InvalidParameter(format!("negative Kraus weight {}", t.weight)));
        }
        let a = pauli_amplitudes(n, &t.operator)?;
        let nz: Vec<usize> = (0..d).filter(|&k| a[k].norm() > 0.0).collect();
        for &m in &nz {
            for &k in &nz {
                let v = chi.get(m, k) + a[m] * a[k].conj() * t.weight;
                chi.set(m, k, v);
            }
        }
    }
    let dev = trace_preservation_error(&chi);
    if dev > 1e-10 {
        return Err(Error::NotTracePreserving(dev));
    }
    Ok(chi)
}

/// Largest deviation of `Σ χ_{mk} E_k E_m` from the identity, over Pauli coefficients.
pub fn trace_preservation_error(chi: &ChiMatrix) -> f64 {
    let n = chi.n;
    let d = chi.dim();
    let mut acc = vec![ZERO; d];
    for m in 0..d {
        let em = PauliString::from_label(n, m);
        for k in 0..d {
            let c = chi.get(m, k);
            if c == ZERO {
                continue;
            }
            let prod = PauliString::from_label(n, k) * em;
            acc[prod.label()] += c * prod.phase();
        }
    }
    acc[0] -= Complex64::new(1.0, 0.0);
    acc.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
