use std::fs;

use fractalyze::cli::run;
use fractalyze::specio::{parse_spec, spec_to_json};
use fractalyze_core::{builtin, BUILTINS};
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<&str> = std::iter::once("fractalyze").chain(args.iter().copied()).collect();
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn info_reports_dimensions() {
    let (code, out, _) = call(&["info", "--builtin", "sg"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["n_letters"], 3);
    assert!((v["d_S"].as_f64().unwrap() - 2.0 * 3f64.ln() / 5f64.ln()).abs() < 1e-11);
    assert_eq!(v["a1"], true);
    assert!(v["harmonic_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn usage_and_validation_errors_exit_one() {
    assert_eq!(call(&["info", "--builtin", "nope"]).0, 1);
    assert_eq!(call(&["frobnicate"]).0, 1);
    assert_eq!(call(&["info"]).0, 1);
    assert_eq!(call(&["classify", "--builtin", "sg", "--sigma", "9", "--k", "1"]).0, 1);
    assert_eq!(call(&["resistance", "--builtin", "sg", "--m", "2", "--x", "999"]).0, 1);
    assert_eq!(call(&["--help"]).0, 0);
    assert_eq!(call(&["--version"]).0, 0);
}

#[test]
fn numeric_failures_exit_two() {
    // σ above the range the ladder of H_0 can resolve
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.csv");
    let (code, out, _) = call(&["export", "--builtin", "interval", "--m", "8"]);
    assert_eq!(code, 0);
    let n = out.lines().count() - 1;
    let mut csv = String::from("vertex_id,value\n");
    for id in 0..n {
        csv.push_str(&format!("{id},0\n"));
    }
    fs::write(&input, csv).unwrap();
    let (code, _, err) = call(&[
        "tangent", "--builtin", "interval", "--k", "1", "--sigma", "5", "--omega", "|1", "--m", "8", "--input",
        input.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{err}");
    assert!(!err.is_empty());
}

#[test]
fn criticals_table() {
    let (code, out, _) = call(&["criticals", "--builtin", "sg", "--k", "1"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("sigma,addresses"));
    let rows: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    let r = 3f64.ln() / 5f64.ln();
    for (got, want) in rows.iter().zip([r, 2.0 - r, 2.0 + r]) {
        assert!((got - want).abs() < 1e-11);
    }
}

#[test]
fn output_is_deterministic() {
    for args in [
        vec!["info", "--builtin", "vicsek"],
        vec!["spectrum", "--builtin", "hexagasket", "--k", "2"],
        vec!["criticals", "--builtin", "sg3", "--k", "2"],
        vec!["interp", "--builtin", "sg", "--from", "H0:3", "--to", "H0:0", "--scan", "6"],
    ] {
        let a = call(&args);
        let b = call(&args);
        assert_eq!(a.0, 0, "{args:?}: {}", a.2);
        assert_eq!(a.1, b.1);
    }
}

#[test]
fn spec_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let text = spec_to_json(&spec);
        let back = parse_spec(&text).unwrap();
        assert_eq!(back.n_letters(), spec.n_letters());
        assert_eq!(back.r(), spec.r());
        let path = dir.path().join(format!("{name}.json"));
        fs::write(&path, &text).unwrap();
        let from_file = call(&["criticals", "--spec", path.to_str().unwrap(), "--k", "1"]);
        let from_name = call(&["criticals", "--builtin", name, "--k", "1"]);
        assert_eq!(from_file.0, 0, "{name}: {}", from_file.2);
        assert_eq!(from_file.1, from_name.1);
    }
}

#[test]
fn malformed_specs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut v = json(&spec_to_json(&builtin("sg").unwrap()));
    v["r"] = Value::String("seven".into());
    fs::write(&path, v.to_string()).unwrap();
    let (code, _, err) = call(&["info", "--spec", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("r"), "{err}");
    fs::write(&path, "{").unwrap();
    assert_eq!(call(&["info", "--spec", path.to_str().unwrap()]).0, 1);
    assert_eq!(call(&["info", "--spec", dir.path().join("missing.json").to_str().unwrap()]).0, 1);
}

#[test]
fn verify_a_builtin() {
    let (code, out, _) = call(&["verify", "--builtin", "interval"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("5 passed"), "{out}");
}

#[test]
fn tangent_of_an_exported_jet() {
    let dir = tempfile::tempdir().unwrap();
    let jet = dir.path().join("jet.json");
    // x² - x on the interval
    fs::write(&jet, r#"{"k":1,"boundary_labels":["p1","p2"],"rows":[[0,0],[2,2]]}"#).unwrap();
    let samples = dir.path().join("f.csv");
    let (code, _, err) =
        call(&["export", "--builtin", "interval", "--m", "10", "--jet", jet.to_str().unwrap(), "--out", samples.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = call(&[
        "tangent", "--builtin", "interval", "--k", "2", "--sigma", "2", "--omega", "|1", "--m", "10", "--input",
        samples.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    // l = 1 keeps the affine part f(0) + f'(0) x = -x
    assert_eq!(v["l"], 1);
    let rows = &v["jet"]["rows"];
    assert!((rows[0][0].as_f64().unwrap()).abs() < 1e-8, "{v}");
    assert!((rows[0][1].as_f64().unwrap() + 1.0).abs() < 1e-8, "{v}");
    // the remainder x² decays like 4^{-n}
    assert!((v["slope"].as_f64().unwrap() - 0.25f64.ln()).abs() < 1e-6);
}

#[test]
fn classify_with_a_jet() {
    let dir = tempfile::tempdir().unwrap();
    let jet = dir.path().join("h.json");
    fs::write(&jet, r#"{"k":0,"boundary_labels":["p1","p2","p3"],"rows":[[1,0,0]]}"#).unwrap();
    let (code, out, err) = call(&["classify", "--builtin", "sg", "--sigma", "1", "--k", "1", "--jet", jet.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    assert_eq!(v["member"], false);
    assert_eq!(v["violations"].as_array().unwrap().len(), 1);
}

#[test]
fn resistance_and_interp() {
    let (code, out, _) = call(&["resistance", "--builtin", "sg", "--m", "3", "--x", "0", "--y", "1"]);
    assert_eq!(code, 0);
    let r: f64 = json(&out)["resistance"].as_f64().unwrap();
    assert!((r - 2.0 / 3.0).abs() < 1e-11);
    let (code, out, _) = call(&["interp", "--builtin", "sg", "--from", "H:2", "--to", "H:-2", "--theta", "0.5"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["name"], "L2");
    assert_eq!(call(&["interp", "--builtin", "sg", "--from", "H0:1", "--to", "H:2", "--theta", "0.5"]).0, 1);
}
