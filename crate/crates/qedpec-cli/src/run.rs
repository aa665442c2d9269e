//! Experiment execution and artifact writing.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use qedpec::analysis::{self, InfidelityMode, OverheadConfig, VqeConfig};
use qedpec::bench::{self, CbDesign, TwirlBenchConfig};
use qedpec::channel::{depolarizing, PauliChannel};
use qedpec::codes::qedc;
use qedpec::pauli::PauliString;
use qedpec::sim::{Gate, ReadoutModel};

use crate::config::{config_hash, Experiment, ExperimentConfig};

/// One output file, rendered in memory before anything is written.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn csv_artifact<T: Serialize>(name: &str, rows: &[T]) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(Artifact { name: name.into(), bytes: w.into_inner()? })
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> Result<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.into(), bytes })
}

pub fn execute(c: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let out = match c.experiment {
        Experiment::Vqe => vqe(c),
        Experiment::Overhead => overhead(c),
        Experiment::Infidelity => infidelity(c),
        Experiment::Cb => cb(c),
        Experiment::TwirlBench => twirl_bench(c),
    };
    out.with_context(|| format!("{} experiment failed", c.experiment.name()))
}

#[derive(Serialize)]
struct ExpectationCsv {
    theta: f64,
    observable: &'static str,
    mode: &'static str,
    value: f64,
    two_sigma: f64,
    ideal: f64,
}

#[derive(Serialize)]
struct PesCsv {
    mode: &'static str,
    r: f64,
    e_min: f64,
    theta_min: f64,
}

#[derive(Serialize)]
struct DiagnosticCsv {
    theta: f64,
    acceptance: f64,
    gamma: f64,
}

fn vqe(c: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let v = &c.vqe;
    let readout = v.readout_error.map(|e| ReadoutModel::symmetric(4, e)).transpose()?;
    let cfg = VqeConfig {
        thetas: v.thetas.clone().unwrap_or_else(analysis::default_theta_grid),
        p: v.p,
        shots: c.shots.expect("validated"),
        repetitions: v.repetitions,
        modes: v.modes.clone(),
        seed: c.seed,
        floor: v.floor,
        readout,
        ibu_iterations: v.ibu_iterations,
    };
    let res = analysis::run_vqe_experiment(&cfg)?;
    let rows: Vec<ExpectationCsv> = res
        .rows
        .iter()
        .map(|r| ExpectationCsv {
            theta: r.theta,
            observable: r.observable.name(),
            mode: r.mode.name(),
            value: r.value,
            two_sigma: r.two_sigma,
            ideal: r.ideal,
        })
        .collect();
    let table = analysis::table_s1();
    let mut pes = Vec::new();
    for &mode in &v.modes {
        for p in analysis::pes_curve(&res.rows, mode, &table, v.pes_grid)? {
            pes.push(PesCsv { mode: mode.name(), r: p.r, e_min: p.e_min, theta_min: p.theta_min });
        }
    }
    let diag: Vec<DiagnosticCsv> =
        res.diagnostics.iter().map(|&(theta, acceptance, gamma)| DiagnosticCsv { theta, acceptance, gamma }).collect();
    Ok(vec![
        csv_artifact("expectations.csv", &rows)?,
        csv_artifact("pes.csv", &pes)?,
        csv_artifact("diagnostics.csv", &diag)?,
    ])
}

fn overhead(c: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let o = &c.overhead;
    let rows = analysis::overhead_study(&OverheadConfig {
        n_unencoded: o.n_unencoded,
        n_encoded: o.n_encoded,
        layers: o.layers.clone(),
        p_values: o.p_values.clone(),
    })?;
    Ok(vec![csv_artifact("overhead.csv", &rows)?])
}

#[derive(Serialize)]
struct InfidelityCsv {
    mode: &'static str,
    omega: f64,
    chi_numeric: f64,
    closed_form: f64,
}

fn infidelity(c: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let s = &c.infidelity;
    let code = qedc(4)?;
    let omegas: Vec<f64> = (0..s.points).map(|i| i as f64 * s.omega_max / (s.points - 1) as f64).collect();
    let mut rows = Vec::new();
    for &mode in &s.modes {
        for (omega, chi_numeric, closed_form) in analysis::infidelity_curve(&code, mode, &omegas)? {
            rows.push(InfidelityCsv { mode: InfidelityMode::name(mode), omega, chi_numeric, closed_form });
        }
    }
    Ok(vec![csv_artifact("infidelity.csv", &rows)?])
}

#[derive(Serialize)]
struct CbCsv {
    basis: String,
    depth: usize,
    mean: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct FidelityReport {
    gate: String,
    injected: Vec<(String, f64)>,
    records: Vec<bench::FidelityRecord>,
}

fn injected_noise(c: &ExperimentConfig) -> Result<PauliChannel> {
    let b = &c.cb;
    if b.rates.is_empty() {
        return Ok(depolarizing(2, b.depolarizing)?);
    }
    let mut rates = vec![0.0; 16];
    for (label, &r) in &b.rates {
        let p: PauliString = label.parse().with_context(|| format!("field `cb.rates`: bad label {label:?}"))?;
        if p.num_qubits() != 2 || p.is_identity() {
            bail!("field `cb.rates`: {label:?} is not a non-identity two-qubit Pauli");
        }
        rates[p.label()] = r;
    }
    rates[0] = 1.0 - rates.iter().sum::<f64>();
    PauliChannel::new(2, rates).context("field `cb.rates`")
}

fn cb(c: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let b = &c.cb;
    let gate = if b.gate == "cx" { Gate::cx(0, 1) } else { Gate::ecr(0, 1) };
    let noise = injected_noise(c)?;
    let orbits = bench::learnability_partition(&gate, 2)?;
    let mut points = Vec::new();
    let mut records = Vec::new();
    for orbit in &orbits {
        let design = CbDesign {
            gate: gate.clone(),
            noise: noise.clone(),
            basis: orbit[0],
            depths: b.depths.clone(),
            instances: b.instances,
            shots: c.shots,
            readout: None,
        };
        let pts = bench::run_cb(&design, c.seed)?;
        let fit = bench::fit_exponential(&pts)?;
        let k = orbit.len() as i32;
        records.push(bench::FidelityRecord {
            labels: orbit.clone(),
            product: fit.f.powi(k),
            per_pauli: fit.f,
            amplitude: fit.amplitude,
            residual: fit.residual,
            learnable: k == 1,
        });
        points.extend(pts.iter().map(|p| CbCsv { basis: orbit[0].to_string(), depth: p.depth, mean: p.mean, stderr: p.std_error }));
    }
    let injected = noise.terms().filter(|(_, r)| *r > 0.0).map(|(p, r)| (p.to_string(), r)).collect();
    Ok(vec![
        csv_artifact("cb.csv", &points)?,
        json_artifact("fidelities.json", &FidelityReport { gate: b.gate.clone(), injected, records })?,
    ])
}

#[derive(Serialize)]
struct TwirlCsv {
    mode: &'static str,
    repetitions: usize,
    layers: usize,
    xxx: f64,
    izz: f64,
}

fn twirl_bench(c: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let t = &c.twirl_bench;
    let rows = bench::run_twirl_benchmark(&TwirlBenchConfig {
        repetitions: t.repetitions.clone(),
        rx_angle: t.rx_angle,
        rz_angle: t.rz_angle,
        modes: t.modes.clone(),
        shots: c.shots,
        seed: c.seed,
    })?;
    let rows: Vec<TwirlCsv> = rows
        .iter()
        .map(|r| TwirlCsv {
            mode: match r.mode {
                bench::TwirlMode::None => "none",
                bench::TwirlMode::Full => "full",
                bench::TwirlMode::Partial => "partial",
            },
            repetitions: r.repetitions,
            layers: r.layers,
            xxx: r.xxx,
            izz: r.izz,
        })
        .collect();
    Ok(vec![csv_artifact("twirl_bench.csv", &rows)?])
}

#[derive(Serialize)]
struct Manifest {
    experiment: &'static str,
    seed: u64,
    config_sha256: String,
    config: ExperimentConfig,
    versions: Versions,
    files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct Versions {
    qedpec: &'static str,
    cli: &'static str,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
    bytes: usize,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes every artifact plus `manifest.json` into `dir`. Returns the paths written.
pub fn write_artifacts(dir: &Path, c: &ExperimentConfig, artifacts: Vec<Artifact>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files = artifacts
        .iter()
        .map(|a| FileEntry { name: a.name.clone(), sha256: hex_digest(&a.bytes), bytes: a.bytes.len() })
        .collect();
    let manifest = Manifest {
        experiment: c.experiment.name(),
        seed: c.seed,
        config_sha256: config_hash(c),
        config: c.clone(),
        versions: Versions { qedpec: qedpec::VERSION, cli: env!("CARGO_PKG_VERSION") },
        files,
    };
    let mut all = artifacts;
    all.push(json_artifact("manifest.json", &manifest)?);
    let mut written = Vec::new();
    for a in all {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
