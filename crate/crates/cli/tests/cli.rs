use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn levelflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelflow"))
        .args(args)
        .env_remove("LEVELFLOW_TOLERANCE_SCALE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV, skipping comment lines and the header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn trailing_json(text: &str) -> Vec<Value> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# json: "))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn sweep_two_level_example() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.json");
    let o = levelflow(&[
        "sweep",
        "--model",
        "two_level_hermitian",
        "--range",
        "-1:3",
        "--steps",
        "401",
        "--events",
        events.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# levelflow "));
    assert!(text.lines().nth(1) == Some("lambda,E_0,E_1"));
    let data = rows(&text);
    assert_eq!(data.len(), 401);
    for r in &data {
        let lam = num(&r[0]);
        let exact = ((lam - 1.0).powi(2) + 1.0).sqrt();
        assert!((num(&r[1]) + exact).abs() <= 1e-12 && (num(&r[2]) - exact).abs() <= 1e-12);
        assert!(num(&r[2]) - num(&r[1]) >= 2.0 - 1e-12, "branches touch at {lam}");
    }
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&events).unwrap()).unwrap();
    let list = doc["events"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["classification"], "avoided");
    assert!((list[0]["lambda_star"].as_f64().unwrap() - 1.0).abs() <= 1e-8);
    assert!((list[0]["gap_min"].as_f64().unwrap() - 2.0).abs() <= 1e-8);
}

#[test]
fn pt_example_reports_both_boundaries() {
    let o = levelflow(&["pt", "--model", "two_level_pt", "--range", "-2:2", "--steps", "801"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let docs = trailing_json(&text);
    let b: Vec<f64> = docs[0]["boundaries"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(b.len(), 2);
    assert!((b[0] + 1.0).abs() <= 1e-9 && (b[1] - 1.0).abs() <= 1e-9, "{b:?}");
    let data = rows(&text);
    assert_eq!(data.len(), 801);
    let phase_at = |g: f64| data.iter().find(|r| (num(&r[0]) - g).abs() < 1e-12).unwrap()[1].clone();
    assert_eq!(phase_at(0.0), "unbroken");
    assert_eq!(phase_at(1.5), "broken");
    assert_eq!(phase_at(1.0), "boundary");
}

#[test]
fn check_passes_on_builtins() {
    for args in [
        vec!["check", "--model", "two_level_hermitian"],
        vec!["check", "--model", "two_level_pt"],
        vec!["check", "--model", "oscillator_2d", "--param", "k=1", "--param", "N=4"],
    ] {
        let o = levelflow(&args);
        assert_eq!(o.status.code(), Some(0), "{args:?}\n{}\n{}", stdout(&o), stderr(&o));
        assert!(!stdout(&o).contains(",fail"));
    }
}

#[test]
fn violated_check_exits_one() {
    let o = Command::new(env!("CARGO_BIN_EXE_levelflow"))
        .args(["check", "--model", "two_level_hermitian"])
        .env("LEVELFLOW_TOLERANCE_SCALE", "1e-9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let docs = trailing_json(&stdout(&o));
    assert_eq!(docs[0]["passed"], false);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &["sweep", "--model", "oscillator_2d", "--param", "k=1", "--param", "N=4", "--range", "0.5:2", "--steps", "61"],
        &["hf", "--model", "two_level_hermitian", "--range", "-1:3", "--steps", "41"],
        &["surface", "--model", "two_level_pt", "--x-range", "-2:2", "--y-range", "-1:1", "--nx", "9", "--ny", "5"],
        &["ep", "--model", "two_level_pt", "--seed", "0.9,0.1"],
    ];
    for args in cases {
        let a = levelflow(args);
        let b = levelflow(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn every_subcommand_starts_with_provenance() {
    let cases: [&[&str]; 7] = [
        &["sweep", "--model", "two_level_hermitian", "--range", "-1:3", "--steps", "5"],
        &["hf", "--model", "two_level_hermitian", "--range", "-1:3", "--steps", "5"],
        &["osc", "--k", "1", "--n-max", "4", "--range", "0.5:2", "--steps", "3"],
        &["ep", "--model", "two_level_pt", "--seed", "-0.9,0"],
        &["pt", "--model", "two_level_pt", "--range", "-2:2", "--steps", "5"],
        &["surface", "--model", "two_level_pt", "--x-range", "-1:1", "--y-range", "-1:1", "--nx", "2", "--ny", "2"],
        &["check", "--model", "two_level_pt"],
    ];
    for args in cases {
        let o = levelflow(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let first = stdout(&o).lines().next().unwrap().to_string();
        assert_eq!(first, format!("# levelflow {}: levelflow {}", env!("CARGO_PKG_VERSION"), args.join(" ")));
    }
}

#[test]
fn files_and_gnuplot_script() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flow.csv");
    let json = dir.path().join("flow.json");
    let gp = dir.path().join("flow.gp");
    let o = levelflow(&[
        "sweep",
        "--model",
        "two_level_hermitian",
        "--range",
        "-1:3",
        "--steps",
        "11",
        "--out",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--gnuplot",
        gp.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(trailing_json(&text).is_empty());
    assert_eq!(rows(&text).len(), 11);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["events"].as_array().unwrap().len(), 1);
    let script = std::fs::read_to_string(&gp).unwrap();
    assert!(script.contains(csv.to_str().unwrap()));
    assert!(script.contains("plot for [i=2:3]"));
}

#[test]
fn hf_emits_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("hf.jsonl");
    let o = levelflow(&[
        "hf",
        "--model",
        "two_level_hermitian",
        "--range",
        "-1:3",
        "--steps",
        "9",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<Value> = std::fs::read_to_string(&json)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 10);
    for r in &lines[..9] {
        assert!(r["residual"].as_f64().unwrap() <= 1e-7);
    }
    let max = &lines[9]["element_maximum"];
    assert!((max["lambda"].as_f64().unwrap() - 1.0).abs() <= 1e-8);
    assert!((max["value"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    // |⟨ψ₀|H′|ψ₁⟩| = 1/√(1 + (λ−1)²) for the two-level family.
    for r in rows(&stdout(&o)) {
        let lam = num(&r[0]);
        assert!((num(&r[3]) - 1.0 / (1.0 + (lam - 1.0).powi(2)).sqrt()).abs() <= 1e-12);
    }
}

#[test]
fn osc_matches_exact_levels_at_reference_stiffness() {
    let o = levelflow(&["osc", "--k", "1", "--n-max", "6", "--range", "0.5:1.5", "--steps", "3", "--levels", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let at_ref = rows(&text).into_iter().find(|r| num(&r[0]) == 1.0).unwrap();
    for pair in at_ref[1..].chunks(2) {
        assert!((num(&pair[0]) - num(&pair[1])).abs() <= 1e-12, "{pair:?}");
    }
    let doc = &trailing_json(&text)[0];
    for row in doc["degeneracy_table"].as_array().unwrap() {
        assert_eq!(row["expected"], row["numeric"]);
    }
    for rule in doc["selection_rule"].as_array().unwrap() {
        assert!(rule["max_cross_symmetry"].as_f64().unwrap() <= 1e-12);
    }
}

#[test]
fn model_file_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(
        &path,
        r#"{"kind": "polynomial", "dim": 2, "hermitian_on_real_axis": true, "coeffs": [[[0, 0], [0, 0]], [[1, 0], [0, -1]]]}"#,
    )
    .unwrap();
    let o = levelflow(&["sweep", "--model-file", path.to_str().unwrap(), "--range", "-1:1", "--steps", "21"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let docs = trailing_json(&stdout(&o));
    let ev = &docs[0]["events"][0];
    assert_eq!(ev["classification"], "crossing");
    assert!(ev["lambda_star"].as_f64().unwrap().abs() <= 1e-10);
    // Branches keep their identity through the crossing.
    let data = rows(&stdout(&o));
    assert_eq!(num(&data[0][1]), -1.0);
    assert_eq!(num(&data[20][1]), 1.0);
}

#[test]
fn usage_errors_exit_two() {
    let cases: [&[&str]; 6] = [
        &["sweep", "--model", "two_level_hermitian", "--range", "-1:3", "--steps", "5", "--bogus"],
        &["frobnicate"],
        &["sweep", "--model", "two_level_hermitian", "--range", "-1:3"],
        &["sweep", "--model", "two_level_hermitian", "--range", "3:-1", "--steps", "5"],
        &["sweep", "--model", "no_such_model", "--range", "-1:3", "--steps", "5"],
        &["sweep", "--model", "two_level_pt", "--range", "-1:3", "--steps", "5"],
    ];
    for args in cases {
        let o = levelflow(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains("error"), "{args:?}");
    }
    let o = levelflow(&["sweep", "--bogus"]);
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn missing_model_file_names_the_path() {
    let o = levelflow(&["sweep", "--model-file", "/nonexistent/dir/model.json", "--range", "0:1", "--steps", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/dir/model.json"));
    assert!(!Path::new("/nonexistent/dir/model.json").exists());
}

#[test]
fn failed_search_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("constant.json");
    std::fs::write(&path, r#"{"kind": "polynomial", "dim": 2, "coeffs": [[[0, 0], [0, 1]]]}"#).unwrap();
    let o = levelflow(&["ep", "--model-file", path.to_str().unwrap(), "--seed", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
}
