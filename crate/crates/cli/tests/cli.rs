use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nbpeel::TannerGraph;

const CODE: &str = r#""lambda":{"2":0.5,"3":0.5},"rho":{"5":1.0},"p":3"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbpeel")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{not json");
    let out = run(&["threshold", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let out = run(&["threshold", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_distribution_exits_2() {
    let out = run(&["threshold", "--lambda", r#"{"2":0.7}"#, "--rho", r#"{"5":1.0}"#, "--p", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_design_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "design.json",
        r#"{"anchor_lambda":{"2":0.71,"4":0.23,"5":0.03,"8":0.01,"12":0.02},
            "anchor_rho":{"5":0.32,"6":0.68},"R0":0.5,"eps0":0.45,
            "gamma0":0.5,"gammaL":1e-6,"N":3334,"p":3,"budget":2}"#,
    );
    let out = run(&["design", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_construction_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "graph.json", &format!("{{{CODE},\"n\":0}}"));
    let out = run(&["construct", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn construct_output_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "graph.json", &format!("{{{CODE},\"n\":120}}"));
    let path = dir.path().join("g.txt");
    let out = run(&[
        "construct",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read(&path).unwrap();
    let graph = TannerGraph::read_text(text.as_slice()).unwrap();
    assert_eq!(graph.n_vars(), 120);
    assert_eq!(graph.p(), 3);
    assert_eq!(graph.seed(), 9);
    let mut again = Vec::new();
    graph.write_text(&mut again).unwrap();
    assert_eq!(again, text);
}

#[test]
fn csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let sim = write(
        dir.path(),
        "sim.json",
        &format!(r#"{{{CODE},"n_bits":600,"eps0":[0.1,0.3],"trials":3}}"#),
    );
    let out = run(&["simulate", "--config", sim.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("eps0,trials,ber,ser,success_rate,mean_iters,mean_ops_per_iter,ci95_ber")
    );
    assert_eq!(lines.count(), 2);

    let de = write(dir.path(), "de.json", &format!(r#"{{{CODE},"eps0":0.3}}"#));
    let out = run(&["de-run", "--config", de.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next(), Some("iter,gamma,bit_eps"));

    let design = write(
        dir.path(),
        "design.json",
        r#"{"anchor_lambda":{"2":0.71,"4":0.23,"5":0.03,"8":0.01,"12":0.02},
            "anchor_rho":{"5":0.32,"6":0.68},"R0":0.5,"eps0":0.3,
            "gamma0":0.6,"gammaL":3e-7,"N":3334,"p":3,"budget":1}"#,
    );
    let out = run(&["design", "--config", design.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next(), Some("outer_iter,g,L,feasible"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let de = write(dir.path(), "de.json", &format!(r#"{{{CODE},"eps0":0.3}}"#));
    let base = run(&["de-run", "--config", de.to_str().unwrap()]);
    let over = run(&["de-run", "--config", de.to_str().unwrap(), "--eps0", "0.1"]);
    assert!(base.status.success() && over.status.success());
    let first_eps = |o: &Output| -> f64 {
        let out = stdout(o);
        out.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!((first_eps(&base) - 0.3).abs() < 1e-12);
    assert!((first_eps(&over) - 0.1).abs() < 1e-12);
}

#[test]
fn field_info_is_json() {
    let out = run(&["field-info", "--p", "3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.is_object());
}
