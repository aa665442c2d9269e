//! End-to-end acceptance suite: one PASS/FAIL line per criterion, nonzero exit
//! on any failure.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use rand::Rng;

use qedpec::analysis::*;
use qedpec::bench::*;
use qedpec::channel::*;
use qedpec::codes::{decode_circuit, encode_circuit, encoded_exponential, qedc};
use qedpec::linalg::CMatrix;
use qedpec::mitigate::*;
use qedpec::pauli::{Letter, PauliString};
use qedpec::propagate::Truncation;
use qedpec::seeding;
use qedpec::sim::{run_density, Circuit, DensityMatrix, Gate};
use qedpec::twirl::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn p(s: &str) -> PauliString {
    s.parse().expect("label")
}

fn simulate_ideal(theta: f64) -> DensityMatrix {
    let c = compiled_vqe_circuit(theta, 0.0).expect("circuit");
    let out = run_density(&c, &DensityMatrix::zero_state(4)).expect("run");
    out.postselect_zero(&[0, 1]).expect("accepted").0
}

fn h2_ground_energy() -> Outcome {
    let table = table_s1();
    let c = H2Coefficients::at(0.75).map_err(|e| e.to_string())?;
    let oracle = c.g1 + c.g4 - ((c.g2 + c.g3).powi(2) + c.g5.powi(2)).sqrt();

    // Analytic path: simulate at the minimizing angle.
    let theta_star = (-c.g5).atan2(-(c.g2 + c.g3));
    let rho = simulate_ideal(theta_star);
    let ex = |o: Observable| rho.expectation(&o.logical()).expect("expectation");
    let e = H2Expectations { z1: ex(Observable::Z1), z2: ex(Observable::Z2), z1z2: ex(Observable::Z1Z2), x1x2: ex(Observable::X1X2) };
    let analytic = h2_energy(&e, &c);

    // Spline path: 13 simulated points, spline, minimize per row.
    let mut rows = Vec::new();
    for theta in default_theta_grid() {
        let rho = simulate_ideal(theta);
        for obs in Observable::ALL {
            let value = rho.expectation(&obs.logical()).expect("expectation");
            rows.push(ExpectationRow { theta, observable: obs, mode: Mode::Hybrid, value, two_sigma: 0.0, ideal: obs.ideal(theta) });
        }
    }
    let pes = pes_curve(&rows, Mode::Hybrid, &table, 2000).map_err(|e| e.to_string())?;
    let best = pes.iter().min_by(|a, b| a.e_min.total_cmp(&b.e_min)).expect("rows");
    let worst_row = pes
        .iter()
        .zip(&table)
        .map(|(r, c)| (r.e_min - (c.g1 + c.g4 - ((c.g2 + c.g3).powi(2) + c.g5.powi(2)).sqrt())).abs())
        .fold(0.0, f64::max);
    check(
        (analytic - oracle).abs() < 1e-9
            && (oracle - -1.137).abs() < 1e-3
            && best.r == 0.75
            && (best.e_min - oracle).abs() < 1e-3
            && worst_row < 1e-3,
        format!(
            "oracle {oracle:.6} Ha, simulated analytic {analytic:.9} Ha, spline min {:.6} Ha at R={} (max row error {worst_row:.1e})",
            best.e_min, best.r
        ),
    )
}

fn hybrid_recovery() -> Outcome {
    let res = run_vqe_experiment(&VqeConfig { seed: 2024, ..VqeConfig::default() }).map_err(|e| e.to_string())?;
    let outside: Vec<String> = res
        .rows
        .iter()
        .filter(|r| r.mode == Mode::Hybrid && (r.value - r.ideal).abs() > r.two_sigma)
        .map(|r| format!("{}@{:.3}", r.observable.name(), r.theta))
        .collect();
    let linf = |m| Observable::ALL.iter().map(|&o| res.max_bias(o, m)).fold(0.0, f64::max);
    let (h, q, n) = (linf(Mode::Hybrid), linf(Mode::Qedc), linf(Mode::Noisy));
    let per_obs = Observable::ALL.iter().all(|&o| res.max_bias(o, Mode::Hybrid) <= res.max_bias(o, Mode::Qedc));
    check(
        outside.is_empty() && h <= q && q <= n && per_obs,
        format!("ℓ∞ bias hybrid {h:.4} ≤ qedc {q:.4} ≤ noisy {n:.4}; hybrid points outside 2σ: {outside:?}"),
    )
}

fn offdiagonal_bias() -> Outcome {
    let mut worst = [0.0f64; 4];
    for theta in default_theta_grid() {
        let b = vqe_offdiagonal_bias(theta, 0.01, Truncation::default()).map_err(|e| e.to_string())?;
        for (w, v) in worst.iter_mut().zip(b) {
            *w = w.max(v.abs());
        }
    }
    check(
        worst[0] <= 2e-3 && worst[1] <= 2e-3 && worst[3] <= 2e-3 && worst[2] <= 1e-4,
        format!("max |bias| Z1 {:.2e}, Z2 {:.2e}, Z1Z2 {:.2e}, X1X2 {:.2e}", worst[0], worst[1], worst[2], worst[3]),
    )
}

fn overhead_ordering() -> Outcome {
    let cfg = OverheadConfig::default();
    let rows = overhead_study(&cfg).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    for r in &rows {
        let ordered = r.gamma2_hybrid <= r.gamma2_end && r.gamma2_end <= r.gamma2_layer;
        let strict = r.gamma2_hybrid < r.gamma2_end && r.gamma2_end < r.gamma2_layer;
        if !ordered || (r.p >= 0.005 - 1e-12 && r.layers >= 2 && !strict) {
            bad.push(format!("p={} L={}", r.p, r.layers));
        }
    }
    let at = |p: f64, l: usize| rows.iter().find(|r| (r.p - p).abs() < 1e-12 && r.layers == l).expect("cell");
    let mono = |a: &OverheadRow, b: &OverheadRow| {
        b.gamma2_layer >= a.gamma2_layer && b.gamma2_end >= a.gamma2_end && b.gamma2_hybrid >= a.gamma2_hybrid
    };
    for &pv in &cfg.p_values {
        for l in 2..=10 {
            if !mono(at(pv, l - 1), at(pv, l)) {
                bad.push(format!("L-monotone p={pv} L={l}"));
            }
        }
    }
    for w in cfg.p_values.windows(2) {
        for l in 1..=10 {
            if !mono(at(w[0], l), at(w[1], l)) {
                bad.push(format!("p-monotone p={} L={l}", w[1]));
            }
        }
    }
    let r = at(0.01, 10);
    check(
        bad.is_empty(),
        format!(
            "{} cells; p=0.01 L=10: hybrid {:.3} < end {:.3} < layer {:.3}; violations {bad:?}",
            rows.len(),
            r.gamma2_hybrid,
            r.gamma2_end,
            r.gamma2_layer
        ),
    )
}

fn infidelity_forms() -> Outcome {
    let code = qedc(4).map_err(|e| e.to_string())?;
    let omegas: Vec<f64> = (0..50).map(|i| i as f64 * FRAC_PI_2 / 49.0).collect();
    let mut report = Vec::new();
    let mut ok = true;
    for mode in InfidelityMode::ALL {
        let curve = infidelity_curve(&code, mode, &omegas).map_err(|e| e.to_string())?;
        let direct = curve.iter().map(|(_, n, f)| (n - f).abs()).fold(0.0, f64::max);
        let complement = curve.iter().map(|(_, n, f)| (n - (1.0 - f)).abs()).fold(0.0, f64::max);
        let err = direct.min(complement);
        ok &= err < 1e-9;
        report.push(format!("{} {} {err:.1e}", mode.name(), if direct <= complement { "expr" } else { "1−expr" }));
    }
    let identity = omegas.iter().skip(1).all(|&w| {
        let (c, s) = ((w / 2.0).cos(), (w / 2.0).sin());
        (closed_form_infidelity(w, InfidelityMode::Partial) - (1.0 - 38.0 / 9.0 * c.powi(6) * s * s)).abs() < 1e-12
    });
    let ordering = omegas.iter().skip(1).all(|&w| {
        let f = |m| closed_form_infidelity(w, m);
        f(InfidelityMode::Untwirled) <= f(InfidelityMode::Partial) && f(InfidelityMode::Partial) <= f(InfidelityMode::Full)
    });
    check(ok && identity && ordering, format!("{}; 38/9 identity {identity}; ordering {ordering}", report.join(", ")))
}

fn code_properties() -> Outcome {
    let mut missed = 0;
    for n in [4, 6] {
        let c = qedc(n).map_err(|e| e.to_string())?;
        for q in 0..n {
            for l in [Letter::X, Letter::Y, Letter::Z] {
                missed += usize::from(!c.detects(&PauliString::single(n, q, l)));
            }
        }
    }
    let c = qedc(4).map_err(|e| e.to_string())?;
    let block = |g: &Gate| -> CMatrix {
        let mut circ = encode_circuit(&c);
        circ.push(g.clone()).expect("push");
        circ.extend(&decode_circuit(&c)).expect("extend");
        let u = circ.unitary();
        let mut b = CMatrix::zeros(4);
        for r in 0..4 {
            for k in 0..4 {
                b[(r, k)] = u[(r, k)];
            }
        }
        b
    };
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let theta = -PI + k as f64 * 2.0 * PI / 19.0;
        let g = encoded_exponential(&c, &p("YX"), theta).map_err(|e| e.to_string())?;
        let want = Gate::pauli_exp(&p("YX"), theta).map_err(|e| e.to_string())?.matrix();
        worst = worst.max(block(&g).max_abs_diff(&want));
    }
    let mut h_accept: f64 = 0.0;
    for q in 0..4 {
        let mut circ = encode_circuit(&c);
        circ.push(Gate::h(q)).expect("push");
        circ.extend(&decode_circuit(&c)).expect("extend");
        let out = run_density(&circ, &DensityMatrix::zero_state(4)).map_err(|e| e.to_string())?;
        let accepted: f64 = out.probabilities().iter().enumerate().filter(|(b, _)| b & 0b1100 == 0).map(|(_, v)| v).sum();
        h_accept = h_accept.max(accepted);
    }
    check(
        missed == 0 && worst < 1e-10 && h_accept < 1e-12,
        format!("undetected weight-1 errors {missed}/30; exponential error {worst:.1e}; Hadamard acceptance {h_accept:.1e}"),
    )
}

fn noise_learning() -> Outcome {
    let mut rates = vec![0.0; 16];
    for (l, r) in [("IX", 0.004), ("XI", 0.003), ("ZZ", 0.006), ("YI", 0.002), ("IZ", 0.005), ("XY", 0.001), ("ZX", 0.002)] {
        rates[p(l).label()] = r;
    }
    rates[0] = 1.0 - rates.iter().sum::<f64>();
    let noise = PauliChannel::new(2, rates).map_err(|e| e.to_string())?;
    let truth = fidelities_from_rates(&noise);
    let ecr = Gate::ecr(0, 1);
    let records = learn_pauli_fidelities(&ecr, &noise, &CbSettings::default()).map_err(|e| e.to_string())?;
    let (mut learn_err, mut pair_err): (f64, f64) = (0.0, 0.0);
    for r in &records {
        let want: f64 = r.labels.iter().map(|q| truth.get(q)).product();
        let e = (r.product - want).abs();
        if r.learnable {
            learn_err = learn_err.max(e);
        } else {
            pair_err = pair_err.max(e);
        }
    }
    let orbits = learnability_partition(&ecr, 2).map_err(|e| e.to_string())?;
    let mut learnable: Vec<String> = orbits.iter().filter(|o| o.len() == 1).map(|o| o[0].to_string()).collect();
    learnable.sort();
    let mut pairs: Vec<Vec<String>> = orbits
        .iter()
        .filter(|o| o.len() == 2)
        .map(|o| {
            let mut v: Vec<String> = o.iter().map(|q| q.to_string()).collect();
            v.sort();
            v
        })
        .collect();
    pairs.sort();
    let partition_ok = learnable == ["IX", "XY", "XZ", "YY", "YZ", "ZI", "ZX"]
        && pairs == [["IY", "ZZ"], ["IZ", "ZY"], ["XI", "YX"], ["XX", "YI"]];
    check(
        learn_err < 1e-2 && pair_err < 2e-2 && partition_ok,
        format!("learnable max error {learn_err:.1e}, pair-product max error {pair_err:.1e}, partition reproduced {partition_ok}"),
    )
}

fn twirl_properties() -> Outcome {
    // Full twirl of random mixed-unitary channels on 1 and 2 qubits.
    let mut rng = seeding::stream(8, "acceptance-twirl", 0);
    let mut diag_worst: f64 = 0.0;
    for n in [1usize, 2] {
        for _ in 0..25 {
            let mut terms = Vec::new();
            let w: f64 = rng.random();
            for weight in [w, 1.0 - w] {
                let mut c = Circuit::new(n);
                for q in 0..n {
                    c.push(Gate::rx(q, rng.random_range(-PI..PI))).expect("push");
                    c.push(Gate::rz(q, rng.random_range(-PI..PI))).expect("push");
                }
                if n == 2 {
                    c.push(Gate::cx(0, 1)).expect("push");
                    c.push(Gate::ry(1, rng.random_range(-PI..PI))).expect("push");
                }
                terms.push(KrausTerm::matrix(weight, c.unitary()));
            }
            let chi = chi_of_kraus(n, &terms).map_err(|e| e.to_string())?;
            let full: Vec<PauliString> = PauliString::all(n).collect();
            diag_worst = diag_worst.max(twirl_chi(&chi, &full).map_err(|e| e.to_string())?.off_diagonal_norm());
        }
    }
    // {I,X,Z} on Rz(ω).
    let xz = TwirlSet::parse(&["I", "X", "Z"]).map_err(|e| e.to_string())?;
    let reduces = (1..20).all(|k| {
        let chi = rz_product_chi(1, k as f64 * 0.15);
        twirl_chi(&chi, xz.members()).expect("twirl").off_diagonal_norm() < chi.off_diagonal_norm()
    });
    // Twirled instances against the bare circuit.
    let mut bare = Circuit::new(3);
    for g in [Gate::h(0), Gate::cx(0, 1), Gate::ecr(1, 2), Gate::rz(2, 0.37), Gate::cx(2, 0), Gate::ecr(0, 1)] {
        bare.push(g).expect("push");
    }
    let plan = TwirlPlan::new().with("cx", TwirlSet::full(2)).with("ecr", vqe_twirl_set());
    let u = bare.unitary();
    let instances = instantiate_twirled(&bare, &plan, 50, 3).map_err(|e| e.to_string())?;
    let inst_worst = instances.iter().map(|c| c.unitary().diff_up_to_phase(&u)).fold(0.0, f64::max);
    // Bit-flip benchmark under X-biased coherent noise.
    let rows = run_twirl_benchmark(&TwirlBenchConfig::default()).map_err(|e| e.to_string())?;
    let find = |m, n| rows.iter().find(|r| r.mode == m && r.repetitions == n).expect("row");
    let cfg = TwirlBenchConfig::default();
    let bench_ok = cfg.repetitions.iter().all(|&n| {
        let (a, b) = (find(TwirlMode::Partial, n), find(TwirlMode::None, n));
        a.xxx >= b.xxx - 1e-12 && a.izz >= b.izz - 1e-12
    });
    let last = *cfg.repetitions.last().expect("depths");
    check(
        diag_worst < 1e-12 && reduces && inst_worst < 1e-12 && bench_ok,
        format!(
            "full-twirl off-diagonal {diag_worst:.1e}; {{I,X,Z}} reduces Rz coherence {reduces}; instance error {inst_worst:.1e}; \
             partial ≥ untwirled at all depths {bench_ok} (⟨XXX⟩ at {} layers: partial {:.4}, none {:.4})",
            find(TwirlMode::Partial, last).layers,
            find(TwirlMode::Partial, last).xxx,
            find(TwirlMode::None, last).xxx
        ),
    )
}

fn pec_correctness() -> Outcome {
    let cases: Vec<(usize, PauliChannel, &str)> = vec![
        (1, PauliChannel::new(1, vec![0.9, 0.05, 0.02, 0.03]).expect("channel"), "Z"),
        (
            2,
            PauliChannel::new(1, vec![0.95, 0.01, 0.01, 0.03]).expect("channel").tensor(&depolarizing(1, 0.04).expect("channel")),
            "ZZ",
        ),
    ];
    let mut report = Vec::new();
    let mut ok = true;
    for (n, channel, obs) in cases {
        let mut ideal = DensityMatrix::zero_state(n);
        ideal.apply_gate(&Gate::ry(0, 0.7)).expect("gate");
        if n == 2 {
            ideal.apply_gate(&Gate::cx(0, 1)).expect("gate");
            ideal.apply_gate(&Gate::rx(1, -0.4)).expect("gate");
        }
        let truth = ideal.expectation(&p(obs)).expect("expectation");
        let mut noisy = ideal.clone();
        noisy.apply_pauli_channel(&(0..n).collect::<Vec<_>>(), &channel).expect("noise");
        let inv = invert_pauli_channel(&fidelities_from_rates(&channel)).map_err(|e| e.to_string())?;
        let mut exec = PecExecutor::exact(noisy, p(obs));
        exec.shots = Some(2000);
        let (mut num_s, mut den_s, mut num_d, mut den_d, mut worst_pair) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
        for s in 0..20u64 {
            let d = pec_direct(|j, rng| exec.measure(j, rng), &inv, seeding::derive(1, "direct", s)).map_err(|e| e.to_string())?;
            let q = pec_sample(|j, rng| exec.measure(j, rng), &inv, 400, seeding::derive(1, "sample", s)).map_err(|e| e.to_string())?;
            num_d += d.value - truth;
            den_d += d.std_error.powi(2);
            num_s += q.value - truth;
            den_s += q.std_error.powi(2);
            worst_pair = worst_pair.max((d.value - q.value).abs() / (d.std_error.powi(2) + q.std_error.powi(2)).sqrt());
        }
        let (zd, zs) = (num_d / den_d.sqrt(), num_s / den_s.sqrt());
        ok &= zd.abs() < 3.0 && zs.abs() < 3.0 && worst_pair < 4.0;
        report.push(format!("{n}q ⟨{obs}⟩ z_direct {zd:+.2} z_sample {zs:+.2} max pair deviation {worst_pair:.2}σ"));
    }
    check(ok, report.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("H2 ground energy", h2_ground_energy),
        ("hybrid recovery", hybrid_recovery),
        ("off-diagonal bias bound", offdiagonal_bias),
        ("overhead ordering", overhead_ordering),
        ("infidelity closed forms", infidelity_forms),
        ("code properties", code_properties),
        ("noise-learning loop closure", noise_learning),
        ("twirl properties", twirl_properties),
        ("PEC correctness", pec_correctness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
