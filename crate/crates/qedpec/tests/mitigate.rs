use qedpec::channel::{depolarizing, fidelities_from_rates, invert_pauli_channel, PauliChannel};
use qedpec::mitigate::*;
use qedpec::pauli::PauliString;
use qedpec::seeding;
use qedpec::sim::{sample_counts, Counts, DensityMatrix, Gate, ReadoutModel};

fn p(s: &str) -> PauliString {
    s.parse().unwrap()
}

fn ideal_state(n: usize) -> DensityMatrix {
    let mut st = DensityMatrix::zero_state(n);
    st.apply_gate(&Gate::ry(0, 0.7)).unwrap();
    if n > 1 {
        st.apply_gate(&Gate::cx(0, 1)).unwrap();
        st.apply_gate(&Gate::rx(1, -0.4)).unwrap();
    }
    st
}

fn biased_noise(n: usize) -> PauliChannel {
    if n == 1 {
        PauliChannel::new(1, vec![0.9, 0.05, 0.02, 0.03]).unwrap()
    } else {
        let skew = PauliChannel::new(1, vec![0.95, 0.01, 0.01, 0.03]).unwrap();
        skew.tensor(&depolarizing(1, 0.04).unwrap())
    }
}

fn noisy(n: usize) -> (DensityMatrix, PauliChannel) {
    let c = biased_noise(n);
    let mut st = ideal_state(n);
    st.apply_pauli_channel(&(0..n).collect::<Vec<_>>(), &c).unwrap();
    (st, c)
}

#[test]
fn direct_summation_is_exact_without_shots() {
    for (n, obs) in [(1, "Z"), (1, "X"), (2, "ZZ"), (2, "XY"), (2, "IZ")] {
        let (st, c) = noisy(n);
        let inv = invert_pauli_channel(&fidelities_from_rates(&c)).unwrap();
        let exec = PecExecutor::exact(st.clone(), p(obs));
        let want = ideal_state(n).expectation(&p(obs)).unwrap();
        let got = pec_direct(|j, rng| exec.measure(j, rng), &inv, 1).unwrap();
        assert!((got.value - want).abs() < 1e-12, "{obs}: {} vs {want}", got.value);
        assert_eq!(got.std_error, 0.0);
        assert!(got.gamma > 1.0);
        let raw = st.expectation(&p(obs)).unwrap();
        assert!(want == 0.0 || (raw - want).abs() > 1e-3);
    }
}

/// Combined z-score of independent estimates against a known value.
fn combined_z(estimates: &[Estimate], truth: f64) -> f64 {
    let num: f64 = estimates.iter().map(|e| e.value - truth).sum();
    let den: f64 = estimates.iter().map(|e| e.std_error.powi(2)).sum::<f64>().sqrt();
    num / den
}

#[test]
fn quasi_probability_sampling_is_unbiased() {
    for (n, obs) in [(1, "Z"), (2, "ZZ"), (2, "YZ")] {
        let (st, c) = noisy(n);
        let inv = invert_pauli_channel(&fidelities_from_rates(&c)).unwrap();
        let want = ideal_state(n).expectation(&p(obs)).unwrap();
        let exec = PecExecutor::exact(st, p(obs));
        let runs: Vec<Estimate> = (0..20)
            .map(|s| pec_sample(|j, rng| exec.measure(j, rng), &inv, 4000, seeding::derive(11, obs, s)).unwrap())
            .collect();
        let z = combined_z(&runs, want);
        assert!(z.abs() < 3.0, "{obs}: z = {z}");
        assert!(runs.iter().all(|e| e.dropped == 0 && e.n_samples == 4000));
    }
}

#[test]
fn shot_limited_direct_summation_is_unbiased() {
    let (st, c) = noisy(2);
    let inv = invert_pauli_channel(&fidelities_from_rates(&c)).unwrap();
    let obs = p("ZZ");
    let want = ideal_state(2).expectation(&obs).unwrap();
    let mut exec = PecExecutor::exact(st, obs);
    exec.shots = Some(5000);
    let runs: Vec<Estimate> = (0..20).map(|s| pec_direct(|j, rng| exec.measure(j, rng), &inv, s).unwrap()).collect();
    let z = combined_z(&runs, want);
    assert!(z.abs() < 3.0, "z = {z}");
    let within = runs.iter().filter(|e| (e.value - want).abs() < e.two_sigma()).count();
    assert!(within >= 15, "{within}/20 within 2σ");
}

#[test]
fn executor_post_selects_on_check_qubits() {
    // Check qubit 0 holds a superposition; data qubit 1 is entangled with it.
    let mut st = DensityMatrix::zero_state(2);
    st.apply_gate(&Gate::ry(0, 1.0)).unwrap();
    st.apply_gate(&Gate::cx(0, 1)).unwrap();
    st.apply_gate(&Gate::ry(1, 0.5)).unwrap();
    let (post, acc) = st.postselect_zero(&[0]).unwrap();
    assert!(acc < 1.0);
    let want = post.expectation(&p("Z")).unwrap();

    let mut exec = PecExecutor::exact(st, p("IZ"));
    exec.check_qubits = vec![0];
    exec.insertion_qubits = vec![1];
    let mut rng = seeding::stream(3, "t", 0);
    let m = exec.measure(0, &mut rng).unwrap().unwrap();
    assert!((m.value - want).abs() < 1e-12);
    assert_eq!(m.accepted, None);

    exec.shots = Some(200_000);
    let m = exec.measure(0, &mut rng).unwrap().unwrap();
    let n = m.accepted.unwrap() as f64;
    assert!((n / 200_000.0 - acc).abs() < 5e-3);
    assert!((m.value - want).abs() < 5.0 / n.sqrt());

    assert!(exec.measure(16, &mut rng).is_err());
    exec.observable = p("ZZ");
    assert!(exec.measure(0, &mut rng).is_err());
}

#[test]
fn sampler_rejects_zero_samples() {
    let inv = invert_pauli_channel(&fidelities_from_rates(&depolarizing(1, 0.1).unwrap())).unwrap();
    let exec = PecExecutor::exact(DensityMatrix::zero_state(1), p("Z"));
    assert!(pec_sample(|j, rng| exec.measure(j, rng), &inv, 0, 0).is_err());
}

#[test]
fn ibu_recovers_a_known_distribution() {
    let truth = [0.5, 0.1, 0.15, 0.25];
    let readout = ReadoutModel::asymmetric(2, 0.04, 0.08).unwrap();
    let shots = 1_000_000u64;
    // Noise-free expected counts pushed through the confusion matrix.
    let mut counts = Counts::new(2);
    for o in 0..4u64 {
        let v: f64 = (0..4u64).map(|t| readout.response(o, t) * truth[t as usize]).sum();
        counts.add(o, (v * shots as f64).round() as u64);
    }
    let out = ibu_mitigate(&counts, &readout, 200).unwrap();
    let total = counts.total() as f64;
    assert!((out.iter().sum::<f64>() - total).abs() < 1e-6);
    for (o, t) in out.iter().zip(truth) {
        assert!((o / total - t).abs() < 1e-3, "{} vs {t}", o / total);
    }
    let two = ibu_mitigate(&counts, &readout, 2).unwrap();
    let err = |v: &[f64]| v.iter().zip(truth).map(|(o, t)| (o / total - t).abs()).sum::<f64>();
    let raw: Vec<f64> = (0..4).map(|b| counts.get(b) as f64).collect();
    assert!(err(&two) < err(&raw));
    assert!(ibu_mitigate(&counts, &readout, 0).is_err());
    assert!(ibu_mitigate(&counts, &ReadoutModel::ideal(3), 2).is_err());
}

#[test]
fn readout_mitigated_executor_tracks_exact_value() {
    let st = ideal_state(2);
    let want = st.expectation(&p("ZZ")).unwrap();
    let mut exec = PecExecutor::exact(st.clone(), p("ZZ"));
    exec.shots = Some(400_000);
    exec.readout = Some(ReadoutModel::symmetric(2, 0.03).unwrap());
    exec.ibu_iterations = 50;
    let mut rng = seeding::stream(5, "ro", 0);
    let m = exec.measure(0, &mut rng).unwrap().unwrap();
    assert!((m.value - want).abs() < 1e-2, "{} vs {want}", m.value);

    exec.ibu_iterations = 0;
    let raw = exec.measure(0, &mut rng).unwrap().unwrap();
    assert!((raw.value - want * 0.94f64.powi(2)).abs() < 1e-2);

    let counts = sample_counts(&st, 1000, None, &mut rng).unwrap();
    assert_eq!(counts.total(), 1000);
}

#[test]
fn direct_and_sampled_estimators_agree() {
    for (n, obs) in [(1, "Z"), (2, "ZZ"), (2, "YY")] {
        let (st, c) = noisy(n);
        let inv = invert_pauli_channel(&fidelities_from_rates(&c)).unwrap();
        let mut exec = PecExecutor::exact(st, p(obs));
        exec.shots = Some(2000);
        for s in 0..20 {
            let d = pec_direct(|j, rng| exec.measure(j, rng), &inv, s).unwrap();
            let q = pec_sample(|j, rng| exec.measure(j, rng), &inv, 400, s + 100).unwrap();
            let sigma = (d.std_error.powi(2) + q.std_error.powi(2)).sqrt();
            assert!((d.value - q.value).abs() < 4.0 * sigma, "{obs} seed {s}: {} vs {}", d.value, q.value);
        }
    }
}
