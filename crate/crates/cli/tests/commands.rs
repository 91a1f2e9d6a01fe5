use std::process::{Command, Output};

fn alfeld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alfeld")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn local_div_reports_small_residuals() {
    let o = alfeld(&["local-div", "--d", "2", "--k", "1", "--trials", "100"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["max_relative_residual"].as_f64().unwrap() <= 1e-10);
    assert!(alfeld(&["local-div", "--d", "4", "--k", "2", "--trials", "3"]).status.success());
}

#[test]
fn zero_degree_is_a_usage_error() {
    let o = alfeld(&["local-div", "--d", "2", "--k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn infsup_csv_has_one_row_per_level() {
    let o = alfeld(&["infsup", "--pair", "cor5.2", "--mesh", "square2", "--levels", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pair,d,k,level,n_u,n_p,beta_h"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let beta: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(beta > 0.0);
    }
}

#[test]
fn locked_certified_run_fails_with_failure_list() {
    // P1 with broken P0 on the split mesh is not certified, so no failure
    assert!(alfeld(&["infsup", "--pair", "pk-pk-1r", "--k", "1", "--mesh", "square4"]).status.success());
    // an unmet rate expectation is reported
    let o = alfeld(&["convergence", "--pair", "cor5.2", "--mesh", "square2", "--levels", "3", "--expect-rate", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn unisolvence_vr_in_3d() {
    let o = alfeld(&["unisolvence", "--space", "VR", "--d", "3", "--trials", "100"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["nonsingular"], 100);
    assert_eq!(v["dofs"], 38);
}

#[test]
fn identical_config_gives_identical_output() {
    let args = ["unisolvence", "--space", "MF", "--d", "2", "--trials", "5", "--seed", "7"];
    assert_eq!(alfeld(&args).stdout, alfeld(&args).stdout);
    let args = ["local-div", "--d", "3", "--k", "2", "--trials", "5", "--random-cell", "--seed", "9"];
    assert_eq!(alfeld(&args).stdout, alfeld(&args).stdout);
}

#[test]
fn exports_and_dumps_files() {
    let dir = tempfile::tempdir().unwrap();
    let ops = dir.path().join("ops");
    let o = alfeld(&["infsup", "--pair", "vr-wr", "--mesh", "square2", "--export-ops", ops.to_str().unwrap()]);
    assert!(o.status.success());
    for m in ["A", "B", "Mp"] {
        let text = std::fs::read_to_string(ops.join(format!("vr-wr_k1_level0_{m}.mtx"))).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"));
    }
    let dump = dir.path().join("bubbles.json");
    assert!(alfeld(&["bubbles", "--d", "3", "--dump", dump.to_str().unwrap()]).status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(v["bubbles"].as_array().unwrap().len(), 4);
    let out = dir.path().join("fine.mesh");
    assert!(alfeld(&["refine", "--mesh", "tet1", "--out", out.to_str().unwrap()]).status.success());
    assert!(std::fs::read_to_string(&out).unwrap().contains("cells 4"));
}

#[test]
fn solve_and_equivalence_reports() {
    let o = alfeld(&["solve", "--pair", "cor6.8", "--mesh", "square4"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["divergence_l2"].as_f64().unwrap() < 1e-10);
    let o = alfeld(&["equivalence", "--mesh", "square2", "--k", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["agree"], true);
}

#[test]
fn unknown_pair_is_an_error() {
    let o = alfeld(&["infsup", "--pair", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
