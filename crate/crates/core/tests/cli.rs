use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn rkl(dir: &Path, config: &str, extra: &[&str]) -> std::process::Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    let out_dir = format!("output.dir=\"{}\"", dir.join("out").display());
    Command::new(env!("CARGO_BIN_EXE_rkl"))
        .arg(&path)
        .args(["--set", &out_dir])
        .args(extra.iter().flat_map(|e| ["--set", e]))
        .output()
        .unwrap()
}

fn result(dir: &Path, stem: &str) -> Value {
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join("out").join(format!("{stem}.json"))).unwrap()).unwrap();
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    v["result"].clone()
}

#[test]
fn determinant_of_rank_one_at_zero_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = rkl(dir.path(), "command = \"determinant\"\n[kernel]\nid = \"rank1\"\n", &["params.lambda=0.0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = result(dir.path(), "determinant");
    assert_eq!(r["determinant"]["re"].as_f64().unwrap(), 1.0);
    assert_eq!(r["determinant"]["im"].as_f64().unwrap(), 0.0);
}

#[test]
fn determinant_scan_writes_plot_with_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = \"determinant\"\n[kernel]\nid = \"rank1\"\n[params]\nlambda_scan = { re = [-1.0, 1.0], count = 11 }\n";
    let out = rkl(dir.path(), cfg, &[]);
    assert!(out.status.success());
    let json: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/determinant.json")).unwrap()).unwrap();
    let svg = fs::read_to_string(dir.path().join("out/determinant.svg")).unwrap();
    assert!(svg.contains(json["config_hash"].as_str().unwrap()));
    let csv = fs::read_to_string(dir.path().join("out/determinant-scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.starts_with("lambda_re,lambda_im,abs_det,log_abs_det"));
}

#[test]
fn solve_at_characteristic_value_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"command = "solve"
[kernel]
id = "finite_rank_hermitian"
params = { mu1 = 0.8, mu2 = 0.3 }
[params]
lambda = 1.25
g = { shape = "gaussian", center = 0.0, width = 1.0, amp = 1.0 }
"#;
    let out = rkl(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("characteristic value") && err.contains("|D|"), "{err}");
}

#[test]
fn manufactured_solve_recovers_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"command = "solve"
[kernel]
id = "gauss_bump"
params = { sigma = 1.0 }
[params]
lambda = 0.6
manufactured = { shape = "poly_bump", center = 0.5, radius = 2.0, amp = 1.0 }
route = "resolvent_formula"
"#;
    let out = rkl(dir.path(), cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = result(dir.path(), "solve");
    assert!(r["residual"].as_f64().unwrap() < 1e-8);
    assert!(r["manufactured_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn classify_characteristic_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"command = "classify"
[kernel]
id = "finite_rank_hermitian"
params = { mu1 = 0.8, mu2 = 0.3 }
[params]
lambda = 1.25
"#;
    let out = rkl(dir.path(), cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(result(dir.path(), "classify")["verdict"], "characteristic");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let base = "command = \"determinant\"\n[kernel]\nid = \"rank1\"\n";
    assert_eq!(rkl(dir.path(), base, &["params.unknown=1"]).status.code(), Some(2));
    assert_eq!(rkl(dir.path(), "command = \"determinant\"\n[kernel]\nid = \"nope\"\n", &[]).status.code(), Some(2));
    assert_eq!(rkl(dir.path(), base, &["command=resolvent"]).status.code(), Some(2));
    let missing = Command::new(env!("CARGO_BIN_EXE_rkl"))
        .arg(dir.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"command = "converge"
[kernel]
id = "gauss_bump"
params = { sigma = 1.0 }
[params]
study = "resolvent"
lambda = [0.3, 0.1]
n_list = [1, 2, 3]
"#;
    let names = ["converge.csv", "converge.json", "converge.svg"];
    assert!(rkl(dir.path(), cfg, &[]).status.success());
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(dir.path().join("out").join(n)).unwrap()).collect();
    let out = Command::new(env!("CARGO_BIN_EXE_rkl"))
        .env("RKL_THREADS", "1")
        .arg(dir.path().join("run.toml"))
        .args(["--set", &format!("output.dir=\"{}\"", dir.path().join("out").display())])
        .output()
        .unwrap();
    assert!(out.status.success());
    for (n, old) in names.iter().zip(&first) {
        assert_eq!(&fs::read(dir.path().join("out").join(n)).unwrap(), old, "{n}");
    }
}

#[test]
fn override_changes_hash_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let base = "command = \"determinant\"\n[kernel]\nid = \"rank1\"\n";
    rkl(dir.path(), base, &["params.lambda=0.1"]);
    let a: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/determinant.json")).unwrap()).unwrap();
    rkl(dir.path(), base, &["params.lambda=0.2"]);
    let b: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/determinant.json")).unwrap()).unwrap();
    assert_ne!(a["config_hash"], b["config_hash"]);
    let c = (std::f64::consts::PI / 2.0).sqrt();
    let d = b["result"]["determinant"]["re"].as_f64().unwrap();
    assert!((d - (1.0 - 0.2 * c)).abs() < 1e-10);
}

#[test]
fn every_command_runs() {
    let dir = tempfile::tempdir().unwrap();
    let frh = "[kernel]\nid = \"finite_rank_hermitian\"\nparams = { mu1 = 0.8, mu2 = 0.3 }\n[quadrature]\nn = 2\nreference_n = 3\n";
    let cases: [(&str, &str); 7] = [
        ("eval", "[params]\ns = [0.0, 1.0]\nt = [0.0, -1.0, 2.0]\n"),
        ("resolvent", "[params]\nlambda = 0.5\nmethod = \"neumann\"\nterms = 80\n"),
        (
            "region",
            "[params]\nsearch_box = { re = [0.0, 2.0], im = [0.0, 0.5] }\ngrid = [5, 2]\nprobe_set = [1, 2]\n",
        ),
        ("spectral", "[params]\nwindow = [0.5, 1.0]\nn_list = [1, 2]\n"),
        ("converge", "[params]\nstudy = \"tail\"\nn_list = [1, 2]\n"),
        (
            "converge",
            "[params]\nstudy = \"compactness\"\nlambda = 0.5\nn_list = [1, 2]\nbeta_power = 2.0\n",
        ),
        ("converge", "[params]\nstudy = \"moebius\"\nlambdas = [0.2, 0.3]\nn_list = [1, 2]\nbeta_power = 2.0\n"),
    ];
    for (k, (cmd, params)) in cases.iter().enumerate() {
        let cfg = format!("command = \"{cmd}\"\n{frh}{params}[output]\nstem = \"case{k}\"\n");
        let out = rkl(dir.path(), &cfg, &[]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(format!("out/case{k}.csv")).exists());
        assert!(dir.path().join(format!("out/case{k}.json")).exists());
    }
    let eval = fs::read_to_string(dir.path().join("out/case0.csv")).unwrap();
    assert_eq!(eval.lines().count(), 7);
}
