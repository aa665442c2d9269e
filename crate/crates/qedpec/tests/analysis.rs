use std::f64::consts::{FRAC_PI_2, PI};

use qedpec::analysis::*;
use qedpec::channel::{chi_of_kraus, KrausTerm};
use qedpec::codes::qedc;
use qedpec::linalg::CMatrix;
use qedpec::sim::{run_density, Circuit, DensityMatrix, Gate};
use qedpec::twirl::TwirlSet;

#[test]
fn coefficient_table_checksum() {
    let t = table_s1();
    assert_eq!(t.len(), 45);
    assert!(t.windows(2).all(|w| w[1].r > w[0].r));
    assert_eq!((t[0].r, t[44].r), (0.05, 3.95));
    assert!(t.iter().all(|c| (c.r - 0.6).abs() > 1e-9));
    let sum = |f: fn(&H2Coefficients) -> f64| t.iter().map(f).sum::<f64>();
    let want = [81.5, 3.117604, -12.085031, -12.085031, 0.239159, 10.733962];
    let got = [sum(|c| c.r), sum(|c| c.g1), sum(|c| c.g2), sum(|c| c.g3), sum(|c| c.g4), sum(|c| c.g5)];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-6, "{g} vs {w}");
    }
    let last = H2Coefficients::at(3.95).unwrap();
    assert_eq!((last.g1, last.g2, last.g3, last.g4, last.g5), (-0.612846, -0.00160393, -0.00160392, 1.425e-06, 0.32032));
    assert!(H2Coefficients::at(0.6).is_err());
}

#[test]
fn energy_examples() {
    let c = H2Coefficients::at(0.75).unwrap();
    let e0 = h2_energy(&H2Expectations::ideal(0.0), &c);
    assert!((e0 - -1.116152).abs() < 1e-6);
    let zero = H2Expectations { z1: 0.0, z2: 0.0, z1z2: 0.0, x1x2: 0.0 };
    assert_eq!(h2_energy(&zero, &c), c.g1);
    let min = analytic_minimum(&c);
    assert!((min - -1.1371).abs() < 1e-4, "{min}");
    // Dense scan of the ansatz never goes below the closed form.
    let scan = (0..20001).map(|k| -PI + k as f64 * 2.0 * PI / 20000.0).map(|t| h2_energy(&H2Expectations::ideal(t), &c));
    let scan_min = scan.fold(f64::INFINITY, f64::min);
    assert!(scan_min >= min - 1e-12 && scan_min - min < 1e-7);
}

#[test]
fn ucc_state_identity() {
    for theta in default_theta_grid() {
        let mut c = Circuit::new(2);
        c.push(Gate::pauli_exp(&"YX".parse().unwrap(), theta).unwrap()).unwrap();
        let rho = DensityMatrix::from_statevector(&c.statevector(None)).unwrap();
        for obs in Observable::ALL {
            let v = rho.expectation(&obs.logical()).unwrap();
            assert!((v - obs.ideal(theta)).abs() < 1e-12);
            assert!((v - ideal_expectation(obs, theta)).abs() < 1e-12);
        }
    }
}

fn ideal_rows() -> Vec<ExpectationRow> {
    default_theta_grid()
        .into_iter()
        .flat_map(|theta| {
            Observable::ALL.into_iter().map(move |observable| ExpectationRow {
                theta,
                observable,
                mode: Mode::Hybrid,
                value: observable.ideal(theta),
                two_sigma: 0.0,
                ideal: observable.ideal(theta),
            })
        })
        .collect()
}

#[test]
fn spline_pes_tracks_analytic_curve() {
    let table = table_s1();
    let pes = pes_curve(&ideal_rows(), Mode::Hybrid, &table, 2000).unwrap();
    assert_eq!(pes.len(), 45);
    for (row, c) in pes.iter().zip(&table) {
        assert!((row.e_min - analytic_minimum(c)).abs() < 1e-3, "R={}: {} vs {}", c.r, row.e_min, analytic_minimum(c));
    }
    let best = pes.iter().min_by(|a, b| a.e_min.total_cmp(&b.e_min)).unwrap();
    assert_eq!(best.r, 0.75);
    assert!((best.e_min - -1.137).abs() < 1e-3);
    assert!(pes_curve(&ideal_rows(), Mode::Noisy, &table, 2000).is_err());
}

#[test]
fn constant_expectations_give_flat_energy() {
    let rows: Vec<ExpectationRow> = ideal_rows()
        .into_iter()
        .map(|mut r| {
            r.value = 0.3;
            r
        })
        .collect();
    let c = H2Coefficients::at(1.25).unwrap();
    let pes = pes_curve(&rows, Mode::Hybrid, &[c], 200).unwrap();
    let e = h2_energy(&H2Expectations { z1: 0.3, z2: 0.3, z1z2: 0.3, x1x2: 0.3 }, &c);
    assert!((pes[0].e_min - e).abs() < 1e-12);
}

#[test]
fn spline_basics() {
    let x: Vec<f64> = (0..7).map(|k| k as f64 * 0.5).collect();
    let line: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
    let s = NaturalSpline::new(&x, &line).unwrap();
    for t in [0.1, 0.77, 2.9] {
        assert!((s.eval(t) - (2.0 * t - 1.0)).abs() < 1e-12);
    }
    assert_eq!(s.eval(-5.0), -1.0);
    assert!(NaturalSpline::new(&x[..3], &line[..3]).is_err());
    assert!(NaturalSpline::new(&[0.0, 1.0, 1.0, 2.0], &[0.0; 4]).is_err());
    let (t, v) = golden_section_min(|t| (t - 0.3).powi(2) + 2.0, -1.0, 1.0, 50);
    assert!((t - 0.3).abs() < 1e-6 && (v - 2.0).abs() < 1e-12);
}

fn omegas(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64 * FRAC_PI_2 / (k - 1) as f64).collect()
}

#[test]
fn chi_numeric_matches_printed_forms() {
    let code = qedc(4).unwrap();
    for mode in InfidelityMode::ALL {
        for (w, numeric, printed) in infidelity_curve(&code, mode, &omegas(50)).unwrap() {
            assert!((numeric - printed).abs() < 1e-9, "{} ω={w}: {numeric} vs {printed}", mode.name());
            assert!((0.0..=1.0).contains(&numeric));
        }
    }
}

#[test]
fn partial_form_simplifies() {
    for w in omegas(50).into_iter().skip(1) {
        let (c, s) = ((w / 2.0).cos(), (w / 2.0).sin());
        let simple = 1.0 - 38.0 / 9.0 * c.powi(6) * s * s;
        assert!((closed_form_infidelity(w, InfidelityMode::Partial) - simple).abs() < 1e-12);
    }
}

#[test]
fn printed_form_examples_and_ordering() {
    for mode in InfidelityMode::ALL {
        assert_eq!(closed_form_infidelity(0.0, mode), 1.0);
    }
    let v = |m| closed_form_infidelity(FRAC_PI_2, m);
    assert!((v(InfidelityMode::Untwirled) - 0.625).abs() < 1e-12);
    assert!((v(InfidelityMode::Full) - 0.75).abs() < 1e-12);
    assert!((v(InfidelityMode::Partial) - (0.75 - 1.0 / 72.0)).abs() < 1e-12);
    for w in omegas(50).into_iter().skip(1) {
        let (u, p, f) = (
            closed_form_infidelity(w, InfidelityMode::Untwirled),
            closed_form_infidelity(w, InfidelityMode::Partial),
            closed_form_infidelity(w, InfidelityMode::Full),
        );
        assert!(u <= p && p <= f, "ω={w}");
    }
}

#[test]
fn identity_channel_is_the_complement_of_the_trivial_case() {
    // With weight-1 errors as the detectable set, a noiseless channel puts all
    // weight on the identity: p_c = 0 and r̄ = 1, the printed forms' ω = 0 value.
    let code = qedc(4).unwrap();
    let chi = chi_of_kraus(1, &[KrausTerm::matrix(1.0, CMatrix::identity(2))]).unwrap();
    let s = logical_error_stats(&code, &chi, &TwirlSet::trivial(1), &[0]).unwrap();
    assert_eq!(s.p_c, 0.0);
    assert_eq!(s.p_u, 1.0);
    assert_eq!(s.r_bar, 1.0);

    let lossy = chi_of_kraus(1, &[KrausTerm::matrix(1.0, CMatrix::from_real(2, &[1.0, 0.0, 0.0, 0.5]))]);
    assert!(lossy.is_err());
    let two = chi_of_kraus(2, &[KrausTerm::matrix(1.0, CMatrix::identity(4))]).unwrap();
    assert!(logical_error_stats(&code, &two, &TwirlSet::trivial(1), &[0]).is_err());
    assert!(logical_error_stats(&code, &chi, &TwirlSet::trivial(1), &[2]).is_err());
}

#[test]
fn overhead_ordering_and_monotonicity() {
    let cfg = OverheadConfig::default();
    let rows = overhead_study(&cfg).unwrap();
    assert_eq!(rows.len(), 200);
    for r in &rows {
        assert!(r.gamma2_hybrid <= r.gamma2_end + 1e-12 && r.gamma2_end <= r.gamma2_layer + 1e-12, "{r:?}");
        if r.p >= 0.005 - 1e-12 && r.layers >= 2 {
            assert!(r.gamma2_hybrid < r.gamma2_end && r.gamma2_end < r.gamma2_layer, "{r:?}");
        }
        if r.layers == 1 {
            assert!((r.gamma2_layer - r.gamma2_end).abs() < 1e-12);
        }
        assert!(r.acceptance < 1.0 && r.acceptance > 0.5);
    }
    let at = |p: f64, l: usize| rows.iter().find(|r| (r.p - p).abs() < 1e-12 && r.layers == l).unwrap();
    for &p in &cfg.p_values {
        for l in 2..=10 {
            let (a, b) = (at(p, l - 1), at(p, l));
            assert!(b.gamma2_layer >= a.gamma2_layer && b.gamma2_end >= a.gamma2_end && b.gamma2_hybrid >= a.gamma2_hybrid);
        }
    }
    for w in cfg.p_values.windows(2) {
        for l in 1..=10 {
            let (a, b) = (at(w[0], l), at(w[1], l));
            assert!(b.gamma2_layer >= a.gamma2_layer && b.gamma2_end >= a.gamma2_end && b.gamma2_hybrid >= a.gamma2_hybrid);
        }
    }
    let tiny = overhead_study(&OverheadConfig { p_values: vec![1e-9], layers: vec![1, 5], ..cfg.clone() }).unwrap();
    assert!(tiny.iter().all(|r| (r.gamma2_layer - 1.0).abs() < 1e-6 && (r.gamma2_hybrid - 1.0).abs() < 1e-6));
    assert!(overhead_study(&OverheadConfig { n_encoded: 5, ..cfg }).is_err());
}

#[test]
fn noiseless_encoded_pipeline_matches_logical_circuit() {
    for k in 0..20 {
        let theta = -PI + k as f64 * 2.0 * PI / 19.0;
        let circuit = compiled_vqe_circuit(theta, 0.0).unwrap();
        let out = run_density(&circuit, &DensityMatrix::zero_state(4)).unwrap();
        let (data, acc) = out.postselect_zero(&[0, 1]).unwrap();
        assert!((acc - 1.0).abs() < 1e-10);
        for obs in Observable::ALL {
            assert!((out.expectation(&obs.decoded()).unwrap() - obs.ideal(theta)).abs() < 1e-10);
            assert!((data.expectation(&obs.logical()).unwrap() - obs.ideal(theta)).abs() < 1e-10);
        }
    }
    let noisy = compiled_vqe_circuit(0.3, 0.01).unwrap();
    assert_eq!(noisy.count_gates("cx"), 11);
}

#[test]
fn noiseless_modes_agree_with_ideal() {
    let cfg = VqeConfig { p: 0.0, shots: 4000, repetitions: 5, thetas: vec![-2.0, 0.0, FRAC_PI_2], ..VqeConfig::default() };
    let res = run_vqe_experiment(&cfg).unwrap();
    assert_eq!(res.rows.len(), 3 * 4 * 3);
    for r in &res.rows {
        // 5 repetitions of 4000 shots: standard error below 0.008.
        assert!((r.value - r.ideal).abs() < 0.03, "{r:?}");
    }
    assert!(res.diagnostics.iter().all(|d| (d.1 - 1.0).abs() < 1e-12 && (d.2 - 1.0).abs() < 1e-12));
    assert_eq!(res, run_vqe_experiment(&cfg).unwrap());
}

#[test]
fn noisy_run_orders_the_modes() {
    let cfg = VqeConfig { repetitions: 10, shots: 10_000, thetas: vec![FRAC_PI_2], seed: 4, ..VqeConfig::default() };
    let res = run_vqe_experiment(&cfg).unwrap();
    let (_, acceptance, gamma) = res.diagnostics[0];
    assert!(acceptance < 1.0 && acceptance > 0.8);
    assert!(gamma > 1.0);
    let bias = |m| (0..4).map(|i| Observable::ALL[i]).map(|o| res.max_bias(o, m)).fold(0.0, f64::max);
    assert!(bias(Mode::Noisy) > bias(Mode::Hybrid));
    assert!(bias(Mode::Qedc) > bias(Mode::Hybrid));
    for o in Observable::ALL {
        let r = res.row(0, o, Mode::Hybrid).unwrap();
        assert!((r.value - r.ideal).abs() <= r.two_sigma, "{r:?}");
    }
}

#[test]
fn offdiagonal_bias_is_small_at_one_percent() {
    let grid = default_theta_grid();
    let mut worst = [0.0f64; 4];
    for &t in &grid {
        let b = vqe_offdiagonal_bias(t, 0.01, qedpec::propagate::Truncation::default()).unwrap();
        for i in 0..4 {
            worst[i] = worst[i].max(b[i].abs());
        }
    }
    assert!(worst[0] <= 2e-3 && worst[1] <= 2e-3 && worst[3] <= 2e-3, "{worst:?}");
    assert!(worst[2] <= 1e-4, "{worst:?}");
    let zero = vqe_offdiagonal_bias(0.0, 0.01, qedpec::propagate::Truncation::default()).unwrap();
    assert!(zero.iter().all(|b| b.abs() < 1e-12), "{zero:?}");
}
