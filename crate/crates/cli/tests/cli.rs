use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmo-scope"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Top-level keys of a pretty-printed JSON object, in output order.
fn top_keys(json: &str) -> Vec<String> {
    json.lines()
        .filter(|l| l.starts_with("  \"") && !l.starts_with("   "))
        .map(|l| l.trim().split('"').nth(1).unwrap().to_string())
        .collect()
}

#[test]
fn geometry_field_order() {
    let out = stdout(&run(&["geometry", "--system", "koper", "--k", "-4.5", "--lambda", "0"]));
    assert_eq!(
        top_keys(&out),
        [
            "fold_line_minus",
            "fold_line_plus",
            "q_minus",
            "q_plus",
            "m2_fold_points",
            "m1_branches",
            "m2_branches",
            "fold_point_side",
            "relative_config"
        ]
    );
}

#[test]
fn boundaries_leave_undefined_cells_empty() {
    let out = stdout(&run(&[
        "boundaries",
        "--k-min",
        "-4.2",
        "--k-max",
        "-2.6",
        "--k-step",
        "0.4",
    ]));
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "k,lambda_sh_minus,lambda_sh_plus,lambda_r_minus,lambda_r_plus");
    assert_eq!(rows.len(), 6);
    // lambda_r only exists below k = -4
    assert!(rows[1].split(',').all(|c| !c.is_empty()));
    assert!(rows[5].ends_with(",,"), "{}", rows[5]);
}

#[test]
fn simulate_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let csv_s = csv.to_str().unwrap();
    stdout(&run(&["simulate", "--lambda", "3", "--t-end", "300", "--out", csv_s]));
    let out = stdout(&run(&["classify", "--lambda", "3", "--input", csv_s]));
    assert_eq!(top_keys(&out), ["regime", "farey", "segments", "ambiguity_flags"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["regime"], "SteadyState");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# koper point\nsystem = koper\nk = -3.5\nlambda = 0\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let rel = |args: &[&str]| -> String {
        let v: serde_json::Value = serde_json::from_str(&stdout(&run(args))).unwrap();
        v["relative_config"]["kind"].as_str().unwrap().to_string()
    };
    let from_file = rel(&["--config", cfg, "geometry"]);
    let overridden = rel(&["--config", cfg, "geometry", "--k", "-4.5"]);
    assert_ne!(from_file, overridden);
    assert_eq!(
        overridden,
        rel(&["geometry", "--system", "koper", "--k", "-4.5", "--lambda", "0"])
    );
}

#[test]
fn verify_selected_criteria() {
    let o = run(&["verify", "--only", "1,2"]);
    let out = stdout(&o);
    assert!(out.contains("2/2 criteria passed"), "{out}");
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(run(&["geometry", "--k", "banana"]).status.code(), Some(2));
    assert_eq!(
        run(&["geometry", "--system", "koper", "--k", "1"]).status.code(),
        Some(2)
    );
    let missing = Path::new("/nonexistent/run.cfg");
    assert_eq!(
        run(&["--config", missing.to_str().unwrap(), "geometry"]).status.code(),
        Some(2)
    );
}
