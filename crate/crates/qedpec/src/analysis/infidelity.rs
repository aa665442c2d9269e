use serde::{Deserialize, Serialize};

use crate::channel::{trace_preservation_error, ChiMatrix};
use crate::codes::CodeSpec;
use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliString};
use crate::twirl::{rz_product_chi, twirl_chi, TwirlSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfidelityMode {
    Untwirled,
    Full,
    /// Per-qubit twirl over `{I, X, Z}`.
    Partial,
}

impl InfidelityMode {
    pub const ALL: [InfidelityMode; 3] = [InfidelityMode::Untwirled, InfidelityMode::Full, InfidelityMode::Partial];

    pub fn twirl_set(self) -> TwirlSet {
        match self {
            InfidelityMode::Untwirled => TwirlSet::trivial(1),
            InfidelityMode::Full => TwirlSet::full(1),
            InfidelityMode::Partial => TwirlSet::parse(&["I", "X", "Z"]).expect("labels"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InfidelityMode::Untwirled => "untwirled",
            InfidelityMode::Full => "full",
            InfidelityMode::Partial => "partial",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalErrorStats {
    pub p_c: f64,
    pub p_u: f64,
    pub r_bar: f64,
}

/// `(p_c, p_u, r̄)` for a single-qubit channel applied to every physical qubit.
///
/// The detectable set is the weight-1 Paulis. The cross-term correction runs
/// over unordered pairs of them with equal syndrome whose product lies in the
/// stabilizer group extended by the logical operators of `gauge` qubits, i.e.
/// pairs acting identically on the remaining logical qubits.
pub fn logical_error_stats(
    code: &CodeSpec,
    per_qubit: &ChiMatrix,
    twirl: &TwirlSet,
    gauge: &[usize],
) -> Result<LogicalErrorStats> {
    if per_qubit.num_qubits() != 1 {
        return Err(Error::Dimension { expected: 1, found: per_qubit.num_qubits() });
    }
    let dev = trace_preservation_error(per_qubit);
    if dev > 1e-10 {
        return Err(Error::NotTracePreserving(dev));
    }
    if let Some(&g) = gauge.iter().find(|&&g| g >= code.k_logical) {
        return Err(Error::InvalidParameter(format!("gauge qubit {g} outside {} logical qubits", code.k_logical)));
    }
    let n = code.n_physical;
    let chi = twirl_chi(per_qubit, twirl.members())?.tensor_power(n);
    let detectable: Vec<PauliString> = (0..n)
        .flat_map(|q| [Letter::X, Letter::Y, Letter::Z].into_iter().map(move |l| PauliString::single(n, q, l)))
        .collect();
    let p_c: f64 = detectable.iter().map(|e| chi.get(e.label(), e.label()).re).sum();
    let p_u = 1.0 - p_c;

    let mut group = code.stabilizer_group();
    for &g in gauge {
        for l in [code.logical_x[g], code.logical_z[g]] {
            let more: Vec<_> = group.iter().map(|s| s * &l).collect();
            group.extend(more);
        }
    }
    let group: std::collections::BTreeSet<usize> = group.iter().map(|p| p.label()).collect();
    let syndrome = |e: &PauliString| -> Vec<bool> { code.generators.iter().map(|g| g.commutes_with(e)).collect() };
    let mut cross = 0.0;
    for (i, e) in detectable.iter().enumerate() {
        for f in &detectable[i + 1..] {
            if syndrome(e) == syndrome(f) && group.contains(&(e * f).label()) {
                cross += chi.get(e.label(), f.label()).re;
            }
        }
    }
    Ok(LogicalErrorStats { p_c, p_u, r_bar: p_u - cross })
}

/// The three printed expressions, evaluated as written.
pub fn closed_form_infidelity(omega: f64, mode: InfidelityMode) -> f64 {
    let (c, s) = ((omega / 2.0).cos(), (omega / 2.0).sin());
    let x = c.powi(6) * s * s;
    match mode {
        InfidelityMode::Untwirled => 1.0 - 6.0 * x,
        InfidelityMode::Full => 1.0 - 4.0 * x,
        InfidelityMode::Partial if s.abs() < 1e-8 => 1.0 - 38.0 / 9.0 * x,
        InfidelityMode::Partial => 1.0 - 4.0 * x - omega.sin().powi(6) / (288.0 * s.powi(4)),
    }
}

/// `(ω, χ-numeric r̄, printed value)` for per-qubit `Rz(ω)` noise on `code`.
pub fn infidelity_curve(code: &CodeSpec, mode: InfidelityMode, omegas: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    omegas
        .iter()
        .map(|&w| {
            let stats = logical_error_stats(code, &rz_product_chi(1, w), &mode.twirl_set(), &[0])?;
            Ok((w, stats.r_bar, closed_form_infidelity(w, mode)))
        })
        .collect()
}
