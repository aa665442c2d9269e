use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::pauli::PauliString;

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    H,
    S,
    Sdg,
    X,
    Y,
    Z,
    /// Control is the first target.
    CX,
    CZ,
    /// `(XI − YX)/√2` with the first target carrying the left factor.
    Ecr,
    ISwap,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    /// `exp(−iθP/2)` with `P` given over the gate targets.
    PauliExp { pauli: PauliString, theta: f64 },
    /// A Pauli string over the gate targets.
    Pauli(PauliString),
    Unitary { name: String, matrix: CMatrix },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn is_quarter_turn(theta: f64) -> bool {
    let r = theta / FRAC_PI_2;
    (r - r.round()).abs() < 1e-12
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Result<Self> {
        let g = Self { kind, targets };
        let arity = g.arity();
        if g.targets.len() != arity {
            return Err(Error::InvalidParameter(format!(
                "{} expects {arity} targets, got {}",
                g.name(),
                g.targets.len()
            )));
        }
        let mut seen = g.targets.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != g.targets.len() {
            return Err(Error::InvalidParameter(format!("{} has repeated targets", g.name())));
        }
        if let GateKind::PauliExp { pauli, .. } = &g.kind {
            if !pauli.is_hermitian() {
                return Err(Error::InvalidParameter(format!("exponent {pauli} is not Hermitian")));
            }
        }
        if let GateKind::Unitary { matrix, name } = &g.kind {
            if matrix.unitarity_error() > 1e-10 {
                return Err(Error::InvalidParameter(format!("matrix for {name} is not unitary")));
            }
        }
        Ok(g)
    }

    fn fixed(kind: GateKind, targets: Vec<usize>) -> Self {
        Self::new(kind, targets).expect("valid gate")
    }

    pub fn h(q: usize) -> Self {
        Self::fixed(GateKind::H, vec![q])
    }
    pub fn s(q: usize) -> Self {
        Self::fixed(GateKind::S, vec![q])
    }
    pub fn sdg(q: usize) -> Self {
        Self::fixed(GateKind::Sdg, vec![q])
    }
    pub fn x(q: usize) -> Self {
        Self::fixed(GateKind::X, vec![q])
    }
    pub fn y(q: usize) -> Self {
        Self::fixed(GateKind::Y, vec![q])
    }
    pub fn z(q: usize) -> Self {
        Self::fixed(GateKind::Z, vec![q])
    }
    pub fn cx(control: usize, target: usize) -> Self {
        Self::fixed(GateKind::CX, vec![control, target])
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::fixed(GateKind::CZ, vec![a, b])
    }
    pub fn ecr(a: usize, b: usize) -> Self {
        Self::fixed(GateKind::Ecr, vec![a, b])
    }
    pub fn iswap(a: usize, b: usize) -> Self {
        Self::fixed(GateKind::ISwap, vec![a, b])
    }
    pub fn rx(q: usize, theta: f64) -> Self {
        Self::fixed(GateKind::Rx(theta), vec![q])
    }
    pub fn ry(q: usize, theta: f64) -> Self {
        Self::fixed(GateKind::Ry(theta), vec![q])
    }
    pub fn rz(q: usize, theta: f64) -> Self {
        Self::fixed(GateKind::Rz(theta), vec![q])
    }

    /// `exp(−iθP/2)` for a register-wide Hermitian `P`, acting on its support.
    pub fn pauli_exp(p: &PauliString, theta: f64) -> Result<Self> {
        let support = p.support();
        let local = p.restrict(&support).with_phase_exponent(p.phase_exponent());
        Self::new(GateKind::PauliExp { pauli: local, theta }, support)
    }

    /// The Pauli `p` (register-wide) applied as a gate on its support.
    pub fn pauli(p: &PauliString) -> Self {
        let support = p.support();
        let local = p.restrict(&support).with_phase_exponent(p.phase_exponent());
        Self::fixed(GateKind::Pauli(local), support)
    }

    pub fn unitary(name: &str, matrix: CMatrix, targets: Vec<usize>) -> Result<Self> {
        Self::new(GateKind::Unitary { name: name.to_string(), matrix }, targets)
    }

    pub fn arity(&self) -> usize {
        match &self.kind {
            GateKind::H | GateKind::S | GateKind::Sdg | GateKind::X | GateKind::Y | GateKind::Z => 1,
            GateKind::Rx(_) | GateKind::Ry(_) | GateKind::Rz(_) => 1,
            GateKind::CX | GateKind::CZ | GateKind::Ecr | GateKind::ISwap => 2,
            GateKind::PauliExp { pauli, .. } | GateKind::Pauli(pauli) => {
                if pauli.num_qubits() == 0 {
                    0
                } else {
                    pauli.num_qubits()
                }
            }
            GateKind::Unitary { matrix, .. } => matrix.dim().trailing_zeros() as usize,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            GateKind::H => "h".into(),
            GateKind::S => "s".into(),
            GateKind::Sdg => "sdg".into(),
            GateKind::X => "x".into(),
            GateKind::Y => "y".into(),
            GateKind::Z => "z".into(),
            GateKind::CX => "cx".into(),
            GateKind::CZ => "cz".into(),
            GateKind::Ecr => "ecr".into(),
            GateKind::ISwap => "iswap".into(),
            GateKind::Rx(_) => "rx".into(),
            GateKind::Ry(_) => "ry".into(),
            GateKind::Rz(_) => "rz".into(),
            GateKind::PauliExp { .. } => "pauli_exp".into(),
            GateKind::Pauli(_) => "pauli".into(),
            GateKind::Unitary { name, .. } => name.clone(),
        }
    }

    pub fn is_clifford(&self) -> bool {
        match &self.kind {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) => is_quarter_turn(*t),
            GateKind::PauliExp { theta, .. } => is_quarter_turn(*theta),
            GateKind::Unitary { .. } => false,
            _ => true,
        }
    }

    /// Rotation generator and angle when the gate is `exp(−iθQ/2)` for a Pauli `Q`,
    /// with `Q` given over the gate targets.
    pub fn rotation(&self) -> Option<(PauliString, f64)> {
        let axis = |s: &str| -> PauliString { s.parse().expect("axis") };
        match &self.kind {
            GateKind::Rx(t) => Some((axis("X"), *t)),
            GateKind::Ry(t) => Some((axis("Y"), *t)),
            GateKind::Rz(t) => Some((axis("Z"), *t)),
            GateKind::PauliExp { pauli, theta } => Some((*pauli, *theta)),
            _ => None,
        }
    }

    /// Local `2^k × 2^k` matrix; the first target is the most significant factor.
    pub fn matrix(&self) -> CMatrix {
        let h = FRAC_1_SQRT_2;
        match &self.kind {
            GateKind::H => CMatrix::from_real(2, &[h, h, h, -h]),
            GateKind::S => CMatrix::from_vec(2, vec![ONE, ZERO, ZERO, c(0.0, 1.0)]),
            GateKind::Sdg => CMatrix::from_vec(2, vec![ONE, ZERO, ZERO, c(0.0, -1.0)]),
            GateKind::X => CMatrix::pauli(&"X".parse().unwrap()),
            GateKind::Y => CMatrix::pauli(&"Y".parse().unwrap()),
            GateKind::Z => CMatrix::pauli(&"Z".parse().unwrap()),
            GateKind::CX => CMatrix::from_real(
                4,
                &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
            ),
            GateKind::CZ => CMatrix::from_real(
                4,
                &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1.],
            ),
            GateKind::Ecr => {
                let xi = CMatrix::pauli(&"XI".parse().unwrap());
                let yx = CMatrix::pauli(&"YX".parse().unwrap());
                xi.sub(&yx).scale(c(h, 0.0))
            }
            GateKind::ISwap => {
                let mut m = CMatrix::zeros(4);
                m[(0, 0)] = ONE;
                m[(1, 2)] = c(0.0, 1.0);
                m[(2, 1)] = c(0.0, 1.0);
                m[(3, 3)] = ONE;
                m
            }
            GateKind::Rx(_) | GateKind::Ry(_) | GateKind::Rz(_) | GateKind::PauliExp { .. } => {
                let (p, theta) = self.rotation().expect("rotation gate");
                let d = 1 << p.num_qubits();
                CMatrix::identity(d)
                    .scale(c((theta / 2.0).cos(), 0.0))
                    .add(&CMatrix::pauli(&p).scale(c(0.0, -(theta / 2.0).sin())))
            }
            GateKind::Pauli(p) => CMatrix::pauli(p),
            GateKind::Unitary { matrix, .. } => matrix.clone(),
        }
    }

    pub fn inverse(&self) -> Gate {
        let kind = match &self.kind {
            GateKind::S => GateKind::Sdg,
            GateKind::Sdg => GateKind::S,
            GateKind::Rx(t) => GateKind::Rx(-t),
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Rz(t) => GateKind::Rz(-t),
            GateKind::PauliExp { pauli, theta } => GateKind::PauliExp { pauli: *pauli, theta: -theta },
            GateKind::Pauli(p) => {
                let k = (4 - p.phase_exponent()) % 4;
                GateKind::Pauli(p.with_phase_exponent(k))
            }
            GateKind::ISwap => GateKind::Unitary { name: "iswap_dg".into(), matrix: self.matrix().adjoint() },
            GateKind::Unitary { name, matrix } => {
                GateKind::Unitary { name: format!("{name}_dg"), matrix: matrix.adjoint() }
            }
            other => other.clone(),
        };
        Gate { kind, targets: self.targets.clone() }
    }

    pub fn theta(&self) -> Option<f64> {
        self.rotation().map(|(_, t)| t)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        match &self.kind {
            GateKind::PauliExp { pauli, theta } => write!(f, "[{pauli}, {theta}]")?,
            GateKind::Pauli(p) => write!(f, "[{p}]")?,
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) => write!(f, "({t})")?,
            _ => {}
        }
        write!(f, " {:?}", self.targets)
    }
}
