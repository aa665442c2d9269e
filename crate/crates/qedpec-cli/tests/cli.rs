use std::path::Path;
use std::process::{Command, Output};

fn qedpec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qedpec")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

const SMALL_VQE: &str = r#"
experiment = "vqe"
seed = 11
shots = 1000
output = "vqe-out"

[vqe]
repetitions = 3
"#;

#[test]
fn vqe_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vqe.toml", SMALL_VQE);
    let first = qedpec(&["run", &cfg], dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let out = dir.path().join("vqe-out");
    let snapshot: Vec<Vec<u8>> =
        ["expectations.csv", "pes.csv", "diagnostics.csv", "manifest.json"].iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect();
    let second = Command::new(env!("CARGO_BIN_EXE_qedpec"))
        .args(["run", &cfg])
        .env("QEDPEC_WORKERS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(second.status.success());
    for (f, before) in ["expectations.csv", "pes.csv", "diagnostics.csv", "manifest.json"].iter().zip(snapshot) {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), before, "{f} changed");
    }
    let csv = read(out.join("expectations.csv"));
    assert!(csv.starts_with("theta,observable,mode,value,two_sigma,ideal\n"));
    assert_eq!(csv.lines().count(), 1 + 13 * 4 * 3);
    assert_eq!(read(out.join("pes.csv")).lines().count(), 1 + 45 * 3);
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vqe.toml", SMALL_VQE);
    assert!(qedpec(&["run", &cfg, "--output", "a"], dir.path()).status.success());
    assert!(qedpec(&["run", &cfg, "--output", "b", "--seed", "12"], dir.path()).status.success());
    let a: serde_json::Value = serde_json::from_str(&read(dir.path().join("a/manifest.json"))).unwrap();
    let b: serde_json::Value = serde_json::from_str(&read(dir.path().join("b/manifest.json"))).unwrap();
    assert_eq!(a["seed"], 11);
    assert_eq!(b["seed"], 12);
    assert_ne!(a["config_sha256"], b["config_sha256"]);
    assert_eq!(a["config_sha256"].as_str().unwrap().len(), 64);
    assert_ne!(read(dir.path().join("a/expectations.csv")), read(dir.path().join("b/expectations.csv")));
    let files = a["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
}

#[test]
fn missing_shots_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "experiment = \"vqe\"\nseed = 1\n");
    for sub in ["run", "validate"] {
        let out = qedpec(&[sub, &cfg], dir.path());
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("`shots`"));
    }
    assert!(!dir.path().join("out").exists());
}

#[test]
fn schema_errors_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("nosseed.toml", "experiment = \"overhead\"\n", "seed"),
        ("typo.toml", "experiment = \"overhead\"\nseed = 1\n[overhead]\nlayer = [1]\n", "layer"),
        ("kind.toml", "experiment = \"magic\"\nseed = 1\n", "magic"),
        ("range.toml", "experiment = \"vqe\"\nseed = 1\nshots = 10\n[vqe]\np = 2.0\n", "vqe.p"),
    ];
    for (name, text, field) in cases {
        let cfg = write(dir.path(), name, text);
        let out = qedpec(&["validate", &cfg], dir.path());
        assert!(!out.status.success(), "{name}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{name}: {err}");
    }
}

#[test]
fn overhead_rows_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "overhead.toml", "experiment = \"overhead\"\nseed = 0\n");
    assert!(qedpec(&["run", &cfg], dir.path()).status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("out/overhead/overhead.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers, vec!["p", "layers", "gamma2_layer", "gamma2_end", "gamma2_hybrid", "acceptance"]);
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v = |i: usize| rec[i].parse::<f64>().unwrap();
        assert!(v(4) <= v(3) && v(3) <= v(2), "{rec:?}");
        n += 1;
    }
    assert_eq!(n, 200);
}

#[test]
fn json_configs_and_other_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let cb = write(dir.path(), "cb.json", r#"{"experiment":"cb","seed":3,"shots":2000,"cb":{"depths":[4,16,32],"instances":2}}"#);
    let out = qedpec(&["run", &cb], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cb_csv = read(dir.path().join("out/cb/cb.csv"));
    assert!(cb_csv.starts_with("basis,depth,mean,stderr\n"));
    assert_eq!(cb_csv.lines().count(), 1 + 11 * 3);
    let fid: serde_json::Value = serde_json::from_str(&read(dir.path().join("out/cb/fidelities.json"))).unwrap();
    assert_eq!(fid["records"].as_array().unwrap().len(), 11);

    let inf = write(dir.path(), "inf.toml", "experiment = \"infidelity\"\nseed = 0\n[infidelity]\npoints = 5\n");
    assert!(qedpec(&["run", &inf], dir.path()).status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("out/infidelity/infidelity.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert!((rec[2].parse::<f64>().unwrap() - rec[3].parse::<f64>().unwrap()).abs() < 1e-9);
    }

    let tb = write(dir.path(), "tb.toml", "experiment = \"twirl-bench\"\nseed = 0\n[twirl-bench]\nrepetitions = [0, 4]\n");
    assert!(qedpec(&["run", &tb], dir.path()).status.success());
    assert_eq!(read(dir.path().join("out/twirl-bench/twirl_bench.csv")).lines().count(), 1 + 2 * 3);
}

#[test]
fn table_prints_a_slice() {
    let dir = tempfile::tempdir().unwrap();
    let out = qedpec(&["table", "--from", "0.7", "--to", "0.8"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "r,g1,g2,g3,g4,g5\n0.75,-0.349833,-0.388748,-0.388748,0.0111772,0.181771\n");
    let all = qedpec(&["table"], dir.path());
    assert_eq!(String::from_utf8(all.stdout).unwrap().lines().count(), 46);
}

#[test]
fn noise_report_dumps_total_and_reduced_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out = qedpec(&["noise-report", "--theta", "-0.4", "--output", "n.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(dir.path().join("n.json"))).unwrap();
    assert_eq!(v["n_qubits"], 4);
    let total: f64 = v["total"]["entries"].as_array().unwrap().iter().map(|e| e[0].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let reduced = &v["reduced"];
    let acc = reduced["acceptance"].as_f64().unwrap();
    assert!(acc > 0.8 && acc < 1.0);
    let rates: f64 = reduced["rates"].as_object().unwrap().values().map(|r| r.as_f64().unwrap()).sum();
    assert!((rates - 1.0).abs() < 1e-9);

    let circuit = write(
        dir.path(),
        "bell.json",
        r#"{"n_qubits":2,"layers":[[{"kind":"h","targets":[0]}],[{"kind":"cx","targets":[0,1]}]]}"#,
    );
    let out = qedpec(&["noise-report", "--circuit", &circuit, "--p", "0.02", "--first-order"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["total"]["entries"].as_array().unwrap().len(), 16);
    assert!(v["reduced"].is_null());

    let bad = write(dir.path(), "bad.json", r#"{"n_qubits":2,"layers":[[{"kind":"warp","targets":[0]}]]}"#);
    let out = qedpec(&["noise-report", "--circuit", &bad], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp"));
}
