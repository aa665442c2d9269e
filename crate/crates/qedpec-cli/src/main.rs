mod config;
mod run;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use qedpec::analysis::{compiled_vqe_circuit, table_s1};
use qedpec::channel::depolarizing;
use qedpec::codes::qedc;
use qedpec::propagate::{accumulate_total_noise, filter_detectable, reduce_to_pauli, ErrorEnsemble, FilterOutcome, Truncation};
use qedpec::sim::{Circuit, CircuitSpec, NoiseSite};

#[derive(Parser)]
#[command(name = "qedpec", version, about = "Error detection + twirling + PEC experiments")]
struct Cli {
    /// Worker threads for the parallel sections (defaults to all cores).
    #[arg(long, global = true, env = "QEDPEC_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV/JSON artifacts.
    Run {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config against the schema without running it.
    Validate { config: PathBuf },
    /// Dump the total and post-selected reduced noise of a circuit as JSON.
    NoiseReport {
        /// Circuit JSON (`{n_qubits, layers}`); defaults to the compiled VQE circuit.
        #[arg(long)]
        circuit: Option<PathBuf>,
        /// VQE angle when no circuit is given.
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        theta: f64,
        /// Two-qubit depolarizing strength after every two-qubit gate.
        #[arg(long, default_value_t = 0.01)]
        p: f64,
        #[arg(long, default_value_t = qedpec::propagate::DEFAULT_FLOOR)]
        floor: f64,
        /// Keep only single-fault terms.
        #[arg(long)]
        first_order: bool,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print rows of the H2 coefficient table as CSV.
    Table {
        /// Smallest distance (Å) to print.
        #[arg(long)]
        from: Option<f64>,
        /// Largest distance (Å) to print.
        #[arg(long)]
        to: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("QEDPEC_WORKERS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker pool")?;
    }
    match cli.command {
        Command::Run { config, seed, output } => {
            let mut loaded = config::load(&config)?;
            if let Some(s) = seed {
                loaded.config.seed = s;
            }
            let dir = match output.or_else(|| loaded.config.output.clone()) {
                Some(d) if d.is_absolute() => d,
                Some(d) => loaded.base_dir.join(d),
                None => loaded.base_dir.join("out").join(loaded.config.experiment.name()),
            };
            let artifacts = run::execute(&loaded.config)?;
            for path in run::write_artifacts(&dir, &loaded.config, artifacts)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let loaded = config::load(&config)?;
            println!("ok: {} (config sha256 {})", loaded.config.experiment.name(), config::config_hash(&loaded.config));
            Ok(())
        }
        Command::NoiseReport { circuit, theta, p, floor, first_order, output } => {
            let report = noise_report(circuit, theta, p, Truncation { floor, first_order, ..Truncation::default() })?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            match output {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Table { from, to } => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(["r", "g1", "g2", "g3", "g4", "g5"])?;
            for c in table_s1() {
                if from.is_some_and(|f| c.r < f - 1e-12) || to.is_some_and(|t| c.r > t + 1e-12) {
                    continue;
                }
                w.serialize((c.r, c.g1, c.g2, c.g3, c.g4, c.g5))?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct NoiseReport {
    circuit: String,
    n_qubits: usize,
    p: f64,
    truncation: Truncation,
    total: ErrorEnsemble,
    /// Post-selected data-register channel, present for `[[n, n−2, 2]]`-sized registers.
    reduced: Option<Reduced>,
}

#[derive(Serialize)]
struct Reduced {
    acceptance: f64,
    rates: BTreeMap<String, f64>,
}

fn noise_report(path: Option<PathBuf>, theta: f64, p: f64, truncation: Truncation) -> Result<NoiseReport> {
    let (name, circuit) = match path {
        None => (format!("vqe(theta={theta})"), compiled_vqe_circuit(theta, p)?),
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let spec: CircuitSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            (path.display().to_string(), with_two_qubit_noise(&spec.to_circuit()?, p)?)
        }
    };
    let n = circuit.num_qubits();
    let total = accumulate_total_noise(&circuit, truncation)?;
    let reduced = if n >= 4 && n % 2 == 0 {
        match filter_detectable(&total, &qedc(n)?)? {
            FilterOutcome::Survived { ensemble, acceptance } => {
                let channel = reduce_to_pauli(&ensemble)?;
                let rates = channel.terms().filter(|(_, r)| *r > 0.0).map(|(q, r)| (q.to_string(), r)).collect();
                Some(Reduced { acceptance, rates })
            }
            FilterOutcome::AllDetected => None,
        }
    } else {
        None
    };
    Ok(NoiseReport { circuit: name, n_qubits: n, p, truncation, total, reduced })
}

fn with_two_qubit_noise(c: &Circuit, p: f64) -> Result<Circuit> {
    let noise = depolarizing(2, p)?;
    let mut out = c.clone();
    if p > 0.0 {
        for layer in out.layers_mut() {
            let sites: Vec<NoiseSite> = layer
                .gates
                .iter()
                .filter(|g| g.targets.len() == 2)
                .map(|g| NoiseSite::pauli(g.targets.clone(), noise.clone()))
                .collect();
            layer.noise.extend(sites);
        }
    }
    Ok(out)
}
