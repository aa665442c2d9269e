use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::PauliChannel;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::pauli::PauliString;

use super::density::{apply_gate_to_state, DensityMatrix};
use super::gate::{Gate, GateKind};

#[derive(Clone, Debug, PartialEq)]
pub enum Noise {
    Pauli(PauliChannel),
    /// Mixture weights and Kraus matrices: `Σ p K ρ K†`.
    Kraus(Vec<(f64, CMatrix)>),
}

/// A noise channel attached to a subset of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSite {
    pub qubits: Vec<usize>,
    pub noise: Noise,
}

impl NoiseSite {
    pub fn pauli(qubits: Vec<usize>, channel: PauliChannel) -> Self {
        Self { qubits, noise: Noise::Pauli(channel) }
    }

    pub fn kraus(qubits: Vec<usize>, ops: Vec<(f64, CMatrix)>) -> Self {
        Self { qubits, noise: Noise::Kraus(ops) }
    }

    pub fn as_pauli(&self) -> Option<&PauliChannel> {
        match &self.noise {
            Noise::Pauli(c) => Some(c),
            Noise::Kraus(_) => None,
        }
    }
}

/// Gates with disjoint targets, followed by the noise attached to the layer.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Layer {
    pub gates: Vec<Gate>,
    pub noise: Vec<NoiseSite>,
}

impl Layer {
    pub fn new(gates: Vec<Gate>) -> Self {
        Self { gates, noise: Vec::new() }
    }

    pub fn with_noise(mut self, site: NoiseSite) -> Self {
        self.noise.push(site);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n: usize,
    layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self { n, layers: Vec::new() }
    }

    pub fn from_layers(n: usize, layers: Vec<Layer>) -> Result<Self> {
        let c = Self { n, layers };
        c.validate()?;
        Ok(c)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn push_layer(&mut self, layer: Layer) -> Result<()> {
        check_layer(self.n, &layer)?;
        self.layers.push(layer);
        Ok(())
    }

    /// Appends a single-gate layer.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        self.push_layer(Layer::new(vec![gate]))
    }

    /// Appends a single-gate layer with a noise site on the gate's targets.
    pub fn push_noisy(&mut self, gate: Gate, channel: PauliChannel) -> Result<()> {
        let site = NoiseSite::pauli(gate.targets.clone(), channel);
        self.push_layer(Layer::new(vec![gate]).with_noise(site))
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Dimension { expected: self.n, found: other.n });
        }
        self.layers.extend(other.layers.iter().cloned());
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.layers.iter().try_for_each(|l| check_layer(self.n, l))
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flat_map(|l| l.gates.iter())
    }

    pub fn count_gates(&self, name: &str) -> usize {
        self.gates().filter(|g| g.name() == name).count()
    }

    /// Same gates without any noise.
    pub fn noiseless(&self) -> Circuit {
        Circuit {
            n: self.n,
            layers: self.layers.iter().map(|l| Layer::new(l.gates.clone())).collect(),
        }
    }

    /// Inverse unitary circuit; noise is dropped.
    pub fn inverse(&self) -> Circuit {
        let layers = self
            .layers
            .iter()
            .rev()
            .map(|l| Layer::new(l.gates.iter().rev().map(Gate::inverse).collect()))
            .collect();
        Circuit { n: self.n, layers }
    }

    /// Dense unitary of the noiseless circuit.
    pub fn unitary(&self) -> CMatrix {
        let d = 1usize << self.n;
        let mut u = CMatrix::zeros(d);
        let gates: Vec<&Gate> = self.gates().collect();
        for col in 0..d {
            let mut psi = vec![ZERO; d];
            psi[col] = ONE;
            for g in &gates {
                apply_gate_to_state(&mut psi, self.n, g);
            }
            for (row, a) in psi.iter().enumerate() {
                u[(row, col)] = *a;
            }
        }
        u
    }

    /// Statevector produced from `|0…0⟩` by the noiseless circuit.
    pub fn statevector(&self, input: Option<&[Complex64]>) -> Vec<Complex64> {
        let d = 1usize << self.n;
        let mut psi = match input {
            Some(v) => v.to_vec(),
            None => {
                let mut v = vec![ZERO; d];
                v[0] = ONE;
                v
            }
        };
        for g in self.gates() {
            apply_gate_to_state(&mut psi, self.n, g);
        }
        psi
    }

    pub fn to_spec(&self) -> Result<CircuitSpec> {
        let layers = self
            .layers
            .iter()
            .map(|l| l.gates.iter().map(GateSpec::from_gate).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(CircuitSpec { n_qubits: self.n, layers })
    }
}

fn check_layer(n: usize, layer: &Layer) -> Result<()> {
    let mut used = vec![false; n];
    for g in &layer.gates {
        for &q in &g.targets {
            if q >= n {
                return Err(Error::InvalidParameter(format!("{} targets qubit {q} of {n}", g.name())));
            }
            if used[q] {
                return Err(Error::InvalidParameter(format!("qubit {q} used twice in one layer")));
            }
            used[q] = true;
        }
    }
    for site in &layer.noise {
        if let Some(&q) = site.qubits.iter().find(|&&q| q >= n) {
            return Err(Error::InvalidParameter(format!("noise targets qubit {q} of {n}")));
        }
    }
    Ok(())
}

/// Applies each layer's gates and then its noise, exactly.
pub fn run_density(circuit: &Circuit, input: &DensityMatrix) -> Result<DensityMatrix> {
    if input.num_qubits() != circuit.n {
        return Err(Error::Dimension { expected: circuit.n, found: input.num_qubits() });
    }
    let mut rho = input.clone();
    for layer in &circuit.layers {
        for g in &layer.gates {
            rho.apply_gate(g)?;
        }
        for site in &layer.noise {
            match &site.noise {
                Noise::Pauli(c) => rho.apply_pauli_channel(&site.qubits, c)?,
                Noise::Kraus(k) => rho.apply_kraus(&site.qubits, k)?,
            }
        }
        debug_assert!(rho.validate(1e-9).is_ok(), "layer broke trace or Hermiticity");
    }
    Ok(rho)
}

/// Serialized gate: `{kind, targets, theta?, pauli?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: String,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<PauliString>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub layers: Vec<Vec<GateSpec>>,
}

impl GateSpec {
    pub fn from_gate(g: &Gate) -> Result<Self> {
        let (theta, pauli) = match &g.kind {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) => (Some(*t), None),
            GateKind::PauliExp { pauli, theta } => (Some(*theta), Some(*pauli)),
            GateKind::Pauli(p) => (None, Some(*p)),
            GateKind::Unitary { name, .. } => {
                return Err(Error::InvalidParameter(format!("custom unitary {name} has no text form")))
            }
            _ => (None, None),
        };
        Ok(Self { kind: g.name(), targets: g.targets.clone(), theta, pauli })
    }

    pub fn to_gate(&self) -> Result<Gate> {
        let theta = || {
            self.theta.ok_or_else(|| Error::InvalidParameter(format!("{} needs theta", self.kind)))
        };
        let pauli = || {
            self.pauli.ok_or_else(|| Error::InvalidParameter(format!("{} needs pauli", self.kind)))
        };
        let kind = match self.kind.as_str() {
            "h" => GateKind::H,
            "s" => GateKind::S,
            "sdg" => GateKind::Sdg,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "cx" | "cnot" => GateKind::CX,
            "cz" => GateKind::CZ,
            "ecr" => GateKind::Ecr,
            "iswap" => GateKind::ISwap,
            "rx" => GateKind::Rx(theta()?),
            "ry" => GateKind::Ry(theta()?),
            "rz" => GateKind::Rz(theta()?),
            "pauli_exp" => GateKind::PauliExp { pauli: pauli()?, theta: theta()? },
            "pauli" => GateKind::Pauli(pauli()?),
            other => return Err(Error::InvalidParameter(format!("unknown gate kind {other:?}"))),
        };
        Gate::new(kind, self.targets.clone())
    }
}

impl CircuitSpec {
    pub fn to_circuit(&self) -> Result<Circuit> {
        let layers = self
            .layers
            .iter()
            .map(|gs| Ok(Layer::new(gs.iter().map(GateSpec::to_gate).collect::<Result<Vec<_>>>()?)))
            .collect::<Result<Vec<_>>>()?;
        Circuit::from_layers(self.n_qubits, layers)
    }
}
