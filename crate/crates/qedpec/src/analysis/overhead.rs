use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{depolarizing, fidelities_from_rates, invert_pauli_channel, rates_from_fidelities, FidelityVector, PauliChannel};
use crate::codes::{decode_circuit, qedc, CodeSpec};
use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliString};
use crate::propagate::conjugate_clifford;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadConfig {
    pub n_unencoded: usize,
    pub n_encoded: usize,
    pub layers: Vec<usize>,
    pub p_values: Vec<f64>,
}

impl Default for OverheadConfig {
    fn default() -> Self {
        Self {
            n_unencoded: 4,
            n_encoded: 6,
            layers: (1..=10).collect(),
            p_values: (1..=20).map(|k| k as f64 * 0.001).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub p: f64,
    pub layers: usize,
    pub gamma2_layer: f64,
    pub gamma2_end: f64,
    pub gamma2_hybrid: f64,
    /// Post-selection acceptance of the encoded circuit.
    pub acceptance: f64,
}

fn gamma(f: &FidelityVector) -> Result<f64> {
    Ok(invert_pauli_channel(f)?.gamma())
}

fn power(c: &PauliChannel, layers: usize) -> Result<FidelityVector> {
    let f = fidelities_from_rates(c);
    FidelityVector::new(c.num_qubits(), f.values().iter().map(|v| v.powi(layers as i32)).collect())
}

/// Label of `D P D†` for every Pauli `P`, with `D` the decoder.
fn decoder_relabel(code: &CodeSpec) -> Result<Vec<usize>> {
    let n = code.n_physical;
    let dec = decode_circuit(code);
    (0..1usize << (2 * n))
        .into_par_iter()
        .map(|l| {
            let img = dec.gates().try_fold(PauliString::from_label(n, l), |acc, g| conjugate_clifford(g, &acc))?;
            Ok(img.label())
        })
        .collect()
}

/// Conditional data-register channel after decoding and post-selecting on the
/// check qubits, and the acceptance probability. `relabel` maps encoded-frame
/// labels to decoded-frame labels.
pub fn hybrid_data_channel(code: &CodeSpec, channel: &PauliChannel, relabel: &[usize]) -> Result<(PauliChannel, f64)> {
    let n = code.n_physical;
    if channel.num_qubits() != n {
        return Err(Error::Dimension { expected: n, found: channel.num_qubits() });
    }
    let checks = code.decoded_check_qubits();
    let data: Vec<usize> = (0..n).filter(|q| !checks.contains(q)).collect();
    let mut rates = vec![0.0; 1usize << (2 * data.len())];
    let mut accepted = 0.0;
    for (l, &r) in channel.rates().iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let e = PauliString::from_label(n, relabel[l]);
        if checks.iter().any(|&q| matches!(e.letter(q), Letter::X | Letter::Y)) {
            continue;
        }
        rates[e.restrict(&data).label()] += r;
        accepted += r;
    }
    Ok((PauliChannel::from_weights(data.len(), rates)?, accepted))
}

/// γ² of per-layer PEC, end-of-circuit PEC and post-selected PEC on the
/// encoded register, for `L` layers of depolarizing noise at strength `p`.
pub fn overhead_study(config: &OverheadConfig) -> Result<Vec<OverheadRow>> {
    if config.n_encoded != config.n_unencoded + 2 {
        return Err(Error::InvalidParameter("encoded register must add exactly two check qubits".into()));
    }
    let code = qedc(config.n_encoded)?;
    let relabel = decoder_relabel(&code)?;
    let cells: Vec<(f64, usize)> =
        config.p_values.iter().flat_map(|&p| config.layers.iter().map(move |&l| (p, l))).collect();
    cells
        .par_iter()
        .map(|&(p, layers)| {
            if layers == 0 {
                return Err(Error::InvalidParameter("layer count must be at least 1".into()));
            }
            let bare = depolarizing(config.n_unencoded, p)?;
            let g1 = gamma(&fidelities_from_rates(&bare))?;
            let g_end = gamma(&power(&bare, layers)?)?;
            let enc = depolarizing(config.n_encoded, p)?;
            let composed = rates_from_fidelities(&power(&enc, layers)?)?;
            let (data, acceptance) = hybrid_data_channel(&code, &composed, &relabel)?;
            let g_hyb = gamma(&fidelities_from_rates(&data))?;
            Ok(OverheadRow {
                p,
                layers,
                gamma2_layer: g1.powi(2 * layers as i32),
                gamma2_end: g_end * g_end,
                gamma2_hybrid: g_hyb * g_hyb,
                acceptance,
            })
        })
        .collect()
}
