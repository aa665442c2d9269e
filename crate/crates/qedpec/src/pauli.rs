//! Symplectic Pauli strings.
//!
//! Qubit 0 is the leftmost letter of the text form and the most significant
//! tensor factor. The masks use the same order as computational basis indices:
//! qubit `q` of an `n`-qubit string lives at bit `n - 1 - q`, so `"XI"` has
//! `x_mask = 0b10`.
//!
//! The phase multiplies the letter product literally, so `Y` is the usual
//! Pauli-Y matrix and `Y = iXZ`.
//!
//! Labels index phase-free strings in base 4 with digits I=0, X=1, Y=2, Z=3,
//! qubit 0 being the most significant digit.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn digit(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// An `n`-qubit Pauli operator `i^k · P_0 ⊗ … ⊗ P_{n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    k: u8,
}

fn width_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits supported");
        Self { n, x: 0, z: 0, k: 0 }
    }

    /// Builds a string from masks in basis-index order (see module docs).
    pub fn from_masks(n: usize, x_mask: u64, z_mask: u64, phase_exponent: u8) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits supported");
        let m = width_mask(n);
        Self { n, x: x_mask & m, z: z_mask & m, k: phase_exponent % 4 }
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Self::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set_letter(q, l);
        }
        p
    }

    pub fn single(n: usize, qubit: usize, letter: Letter) -> Self {
        let mut p = Self::identity(n);
        p.set_letter(qubit, letter);
        p
    }

    /// Phase-free string with the given label.
    pub fn from_label(n: usize, label: usize) -> Self {
        debug_assert!(n < 32 && label < 1usize << (2 * n));
        let mut p = Self::identity(n);
        let mut rest = label;
        for q in (0..n).rev() {
            p.set_letter(q, Letter::ALL[rest & 3]);
            rest >>= 2;
        }
        p
    }

    /// Iterates over all `4^n` phase-free strings in label order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        (0..1usize << (2 * n)).map(move |l| PauliString::from_label(n, l))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    fn bit(&self, qubit: usize) -> u64 {
        1u64 << (self.n - 1 - qubit)
    }

    pub fn letter(&self, qubit: usize) -> Letter {
        assert!(qubit < self.n, "qubit {qubit} out of range for {} qubits", self.n);
        let b = self.bit(qubit);
        Letter::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn set_letter(&mut self, qubit: usize, letter: Letter) {
        assert!(qubit < self.n, "qubit {qubit} out of range for {} qubits", self.n);
        let b = self.bit(qubit);
        let (x, z) = letter.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n).map(|q| self.letter(q)).collect()
    }

    /// Exponent `k` of the phase `i^k`.
    pub fn phase_exponent(&self) -> u8 {
        self.k
    }

    pub fn phase(&self) -> Complex64 {
        i_pow(self.k)
    }

    pub fn with_phase_exponent(mut self, k: u8) -> Self {
        self.k = k % 4;
        self
    }

    /// Same letters with phase `+1`.
    pub fn unsigned(&self) -> Self {
        Self { k: 0, ..*self }
    }

    pub fn negated(&self) -> Self {
        Self { k: (self.k + 2) % 4, ..*self }
    }

    pub fn is_hermitian(&self) -> bool {
        self.k.is_multiple_of(2)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.letter(q) != Letter::I).collect()
    }

    pub fn label(&self) -> usize {
        (0..self.n).fold(0, |acc, q| (acc << 2) | self.letter(q).digit())
    }

    pub fn count_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// True when the two strings commute. Panics on mismatched sizes.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        assert_eq!(self.n, other.n, "Pauli strings act on different registers");
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Letters at `qubits`, in that order, with phase `+1`.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let letters: Vec<Letter> = qubits.iter().map(|&q| self.letter(q)).collect();
        PauliString::from_letters(&letters)
    }

    /// Places `local` on `qubits` of an `n`-qubit register. The phase of `local` is kept.
    pub fn embed(n: usize, qubits: &[usize], local: &PauliString) -> PauliString {
        assert_eq!(qubits.len(), local.n, "embedding size mismatch");
        let mut p = PauliString::identity(n);
        for (i, &q) in qubits.iter().enumerate() {
            p.set_letter(q, local.letter(i));
        }
        p.with_phase_exponent(local.k)
    }

    /// Overwrites the letters on `qubits` with those of `local`, ignoring its phase.
    pub fn overwrite(&self, qubits: &[usize], local: &PauliString) -> PauliString {
        let mut p = *self;
        for (i, &q) in qubits.iter().enumerate() {
            p.set_letter(q, local.letter(i));
        }
        p
    }

    pub fn tensor(&self, other: &PauliString) -> PauliString {
        let n = self.n + other.n;
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits supported");
        PauliString {
            n,
            x: (self.x << other.n) | other.x,
            z: (self.z << other.n) | other.z,
            k: (self.k + other.k) % 4,
        }
    }

    /// Image of the basis state `|b⟩`: returns `(b', w)` with `P|b⟩ = w|b'⟩`.
    pub fn apply_to_basis(&self, b: u64) -> (u64, Complex64) {
        let sign = (b & self.z).count_ones() % 2;
        let e = (self.k as u32 + self.count_y() + 2 * sign) % 4;
        (b ^ self.x, i_pow(e as u8))
    }

    /// Dense row-major `2^n × 2^n` matrix.
    pub fn to_matrix(&self) -> Vec<Complex64> {
        let d = 1usize << self.n;
        let mut m = vec![Complex64::new(0.0, 0.0); d * d];
        for col in 0..d {
            let (row, w) = self.apply_to_basis(col as u64);
            m[row as usize * d + col] = w;
        }
        m
    }
}

pub(crate) fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn check_len(p: &PauliString, q: &PauliString) -> Result<()> {
    if p.n != q.n {
        return Err(Error::Dimension { expected: p.n, found: q.n });
    }
    Ok(())
}

/// 0 when `p` and `q` commute, 1 when they anticommute.
pub fn symplectic_product(p: &PauliString, q: &PauliString) -> Result<u8> {
    check_len(p, q)?;
    Ok(if p.commutes_with(q) { 0 } else { 1 })
}

/// Matrix product `p · q` with exact phase.
pub fn multiply(p: &PauliString, q: &PauliString) -> Result<PauliString> {
    check_len(p, q)?;
    // Per-qubit phase contributions of a letter product, as in Aaronson-Gottesman.
    let mut e: i32 = p.k as i32 + q.k as i32;
    let mut bits = (p.x | p.z) & (q.x | q.z);
    while bits != 0 {
        let b = bits & bits.wrapping_neg();
        bits ^= b;
        let (x1, z1) = ((p.x & b != 0) as i32, (p.z & b != 0) as i32);
        let (x2, z2) = ((q.x & b != 0) as i32, (q.z & b != 0) as i32);
        e += match (x1, z1) {
            (1, 1) => z2 - x2,
            (1, 0) => z2 * (2 * x2 - 1),
            (0, 1) => x2 * (1 - 2 * z2),
            _ => 0,
        };
    }
    Ok(PauliString { n: p.n, x: p.x ^ q.x, z: p.z ^ q.z, k: e.rem_euclid(4) as u8 })
}

impl Mul for &PauliString {
    type Output = PauliString;

    /// Panics on mismatched sizes; use [`multiply`] for a fallible product.
    fn mul(self, rhs: &PauliString) -> PauliString {
        multiply(self, rhs).expect("Pauli strings act on different registers")
    }
}

impl Mul for PauliString {
    type Output = PauliString;

    fn mul(self, rhs: PauliString) -> PauliString {
        multiply(&self, &rhs).expect("Pauli strings act on different registers")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.k {
            0 => "",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().collect();
        let mut pos = 0;
        let mut k = 0u8;
        if let Some(&c) = chars.first() {
            if c == '+' || c == '-' {
                if c == '-' {
                    k = 2;
                }
                pos += 1;
            }
        }
        if chars.get(pos) == Some(&'i') {
            k = (k + 1) % 4;
            pos += 1;
        }
        let mut letters = Vec::with_capacity(chars.len().saturating_sub(pos));
        for (i, &c) in chars.iter().enumerate().skip(pos) {
            let l = match c {
                'I' => Letter::I,
                'X' => Letter::X,
                'Y' => Letter::Y,
                'Z' => Letter::Z,
                other => {
                    return Err(Error::Parse {
                        position: i,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            };
            letters.push(l);
        }
        if letters.is_empty() {
            return Err(Error::Parse { position: chars.len(), message: "no Pauli letters".into() });
        }
        if letters.len() > MAX_QUBITS {
            return Err(Error::Parse {
                position: MAX_QUBITS,
                message: format!("more than {MAX_QUBITS} qubits"),
            });
        }
        Ok(PauliString::from_letters(&letters).with_phase_exponent(k))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
