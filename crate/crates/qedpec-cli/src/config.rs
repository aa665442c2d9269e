//! Experiment configuration files: TOML, with JSON accepted as a fallback.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qedpec::analysis::{InfidelityMode, Mode};
use qedpec::bench::{TwirlMode, DEFAULT_DEPTHS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Vqe,
    Overhead,
    Infidelity,
    Cb,
    TwirlBench,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Vqe => "vqe",
            Experiment::Overhead => "overhead",
            Experiment::Infidelity => "infidelity",
            Experiment::Cb => "cb",
            Experiment::TwirlBench => "twirl-bench",
        }
    }

    fn needs_shots(self) -> bool {
        matches!(self, Experiment::Vqe | Experiment::Cb)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    /// Shots per measured setting. Required for `vqe` and `cb`; `twirl-bench`
    /// evaluates exactly without it.
    #[serde(default)]
    pub shots: Option<u64>,
    /// Output directory; relative paths resolve against the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub vqe: VqeSection,
    #[serde(default)]
    pub overhead: OverheadSection,
    #[serde(default)]
    pub infidelity: InfidelitySection,
    #[serde(default)]
    pub cb: CbSection,
    #[serde(default, rename = "twirl-bench", alias = "twirl_bench")]
    pub twirl_bench: TwirlBenchSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeSection {
    /// Depolarizing strength after every CNOT.
    pub p: f64,
    pub repetitions: usize,
    /// Defaults to 13 uniform points on `[−π, π]`.
    pub thetas: Option<Vec<f64>>,
    pub modes: Vec<Mode>,
    pub floor: f64,
    /// Symmetric per-qubit readout flip probability; unset means ideal readout.
    pub readout_error: Option<f64>,
    pub ibu_iterations: usize,
    /// Dense samples before golden-section refinement of the PES.
    pub pes_grid: usize,
}

impl Default for VqeSection {
    fn default() -> Self {
        Self {
            p: 0.01,
            repetitions: 100,
            thetas: None,
            modes: Mode::ALL.to_vec(),
            floor: qedpec::propagate::DEFAULT_FLOOR,
            readout_error: None,
            ibu_iterations: 2,
            pes_grid: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadSection {
    pub n_unencoded: usize,
    pub n_encoded: usize,
    pub layers: Vec<usize>,
    pub p_values: Vec<f64>,
}

impl Default for OverheadSection {
    fn default() -> Self {
        let d = qedpec::analysis::OverheadConfig::default();
        Self { n_unencoded: d.n_unencoded, n_encoded: d.n_encoded, layers: d.layers, p_values: d.p_values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfidelitySection {
    pub points: usize,
    pub omega_max: f64,
    pub modes: Vec<InfidelityMode>,
}

impl Default for InfidelitySection {
    fn default() -> Self {
        Self { points: 50, omega_max: std::f64::consts::FRAC_PI_2, modes: InfidelityMode::ALL.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbSection {
    /// `ecr` or `cx` on two qubits.
    pub gate: String,
    pub depths: Vec<usize>,
    pub instances: usize,
    /// Injected Pauli rates keyed by label; the identity takes the remainder.
    /// When empty, two-qubit depolarizing noise of strength `depolarizing` is used.
    pub rates: std::collections::BTreeMap<String, f64>,
    pub depolarizing: f64,
}

impl Default for CbSection {
    fn default() -> Self {
        Self { gate: "ecr".into(), depths: DEFAULT_DEPTHS.to_vec(), instances: 4, rates: Default::default(), depolarizing: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwirlBenchSection {
    pub repetitions: Vec<usize>,
    pub rx_angle: f64,
    pub rz_angle: f64,
    pub modes: Vec<TwirlMode>,
}

impl Default for TwirlBenchSection {
    fn default() -> Self {
        let d = qedpec::bench::TwirlBenchConfig::default();
        Self { repetitions: d.repetitions, rx_angle: d.rx_angle, rz_angle: d.rz_angle, modes: d.modes }
    }
}

/// A parsed config and the directory it was read from.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = parse(&text, path.extension().and_then(|e| e.to_str()) == Some("json"))
        .with_context(|| format!("invalid config {}", path.display()))?;
    validate(&config)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base_dir })
}

/// TOML first, JSON when the file is `.json` or TOML parsing fails on
/// something that looks like JSON.
pub fn parse(text: &str, json_hint: bool) -> Result<ExperimentConfig> {
    if json_hint {
        return Ok(serde_json::from_str(text)?);
    }
    match toml::from_str(text) {
        Ok(c) => Ok(c),
        Err(e) if text.trim_start().starts_with('{') => {
            serde_json::from_str(text).map_err(|je| anyhow::anyhow!("not TOML ({e}) and not JSON ({je})"))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn validate(c: &ExperimentConfig) -> Result<()> {
    let exp = c.experiment.name();
    if c.experiment.needs_shots() && c.shots.is_none() {
        bail!("missing field `shots` (required for experiment {exp})");
    }
    if c.shots == Some(0) {
        bail!("field `shots` must be positive");
    }
    match c.experiment {
        Experiment::Vqe => {
            let v = &c.vqe;
            if !(0.0..=1.0).contains(&v.p) {
                bail!("field `vqe.p` must lie in [0, 1], got {}", v.p);
            }
            if v.repetitions == 0 {
                bail!("field `vqe.repetitions` must be positive");
            }
            if v.modes.is_empty() {
                bail!("field `vqe.modes` must not be empty");
            }
            if let Some(t) = &v.thetas {
                if t.len() < 4 {
                    bail!("field `vqe.thetas` needs at least 4 points for the spline, got {}", t.len());
                }
                if t.windows(2).any(|w| w[1] <= w[0]) {
                    bail!("field `vqe.thetas` must be strictly increasing");
                }
            }
            if let Some(e) = v.readout_error {
                if !(0.0..0.5).contains(&e) {
                    bail!("field `vqe.readout_error` must lie in [0, 0.5), got {e}");
                }
            }
        }
        Experiment::Overhead => {
            let o = &c.overhead;
            if o.layers.is_empty() || o.layers.contains(&0) {
                bail!("field `overhead.layers` must list positive layer counts");
            }
            if o.p_values.is_empty() || o.p_values.iter().any(|p| !(0.0..1.0).contains(p)) {
                bail!("field `overhead.p_values` must list probabilities in [0, 1)");
            }
        }
        Experiment::Infidelity => {
            if c.infidelity.points < 2 {
                bail!("field `infidelity.points` must be at least 2");
            }
            if c.infidelity.modes.is_empty() {
                bail!("field `infidelity.modes` must not be empty");
            }
        }
        Experiment::Cb => {
            let b = &c.cb;
            if !matches!(b.gate.as_str(), "ecr" | "cx") {
                bail!("field `cb.gate` must be \"ecr\" or \"cx\", got {:?}", b.gate);
            }
            if b.depths.is_empty() {
                bail!("field `cb.depths` must not be empty");
            }
            if b.instances == 0 {
                bail!("field `cb.instances` must be positive");
            }
        }
        Experiment::TwirlBench => {
            if c.twirl_bench.repetitions.is_empty() || c.twirl_bench.modes.is_empty() {
                bail!("fields `twirl-bench.repetitions` and `twirl-bench.modes` must not be empty");
            }
        }
    }
    Ok(())
}

/// SHA-256 of the canonical JSON form of the effective config.
pub fn config_hash(c: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(c).expect("config serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}
