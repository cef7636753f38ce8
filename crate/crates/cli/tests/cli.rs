use std::path::Path;
use std::process::{Command, Output};

use dyadic_young::charge::io::read_charge;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadic-young"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn one_dimensional_density() {
    let r = json(&["integrate", "--d", "1", "--field", "x", "--charge", "density:2*x", "--gamma", "0.9"]);
    let v = r["result"]["value"].as_f64().unwrap();
    let bound = r["result"]["discretizationBound"].as_f64().unwrap()
        + r["result"]["truncationBound"].as_f64().unwrap();
    assert!((v - 2.0 / 3.0).abs() < 1e-4, "{v}");
    assert!((v - 2.0 / 3.0).abs() <= bound);
    assert_eq!(r["config"]["d"], 1);
    assert_eq!(r["config"]["gamma"], 0.9);
    assert_eq!(r["config"]["command"]["name"], "integrate");
}

#[test]
fn lebesgue_against_linear_field() {
    let r = json(&["integrate", "--d", "2", "--field", "x+y", "--charge", "lebesgue", "--gamma", "0.95"]);
    let v = r["result"]["value"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 1e-12, "{v}");
    let table = r["result"]["riemannTable"].as_array().unwrap();
    assert_eq!(table.len(), 7);
}

#[test]
fn constant_field_gives_total_of_file_charge() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.hchg");
    let synth = json(&["synth", "--charge", "random", "--seed", "5", "--out", s(&path)]);
    let total = synth["result"]["total"].as_f64().unwrap();
    assert!(path.with_extension("hchg.json").exists());

    let r = json(&["integrate", "--field", "1", "--charge", s(&path)]);
    let v = r["result"]["value"].as_f64().unwrap();
    assert!((v - total).abs() < 1e-12, "{v} vs {total}");
    assert_eq!(r["config"]["depth"], 6);
}

#[test]
fn synth_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.hchg");
    let b = dir.path().join("b.hchg");
    json(&["synth", "--d", "3", "--depth", "3", "--charge", "lacunary:0.1", "--out", s(&a)]);
    json(&["synth", "--charge", s(&a), "--out", s(&b)]);
    let (wa, wb) = (read_charge(&a).unwrap(), read_charge(&b).unwrap());
    assert_eq!(wa.dim(), 3);
    assert_eq!(wa.leaves(), wb.leaves());

    // A shallower depth coarsens the file.
    let r = json(&["analyze", "--charge", s(&a), "--depth", "1"]);
    assert_eq!(r["config"]["depth"], 1);
    assert!((r["result"]["total"].as_f64().unwrap() - wa.total()).abs() < 1e-12);
}

#[test]
fn wedge_identity_and_swap() {
    let dir = tempfile::tempdir().unwrap();
    let id = dir.path().join("id.hchg");
    let sw = dir.path().join("sw.hchg");
    let r = json(&["wedge", "--g", "x", "--g", "y", "--depth", "4", "--out", s(&id)]);
    json(&["wedge", "--g", "y", "--g", "x", "--depth", "4", "--out", s(&sw)]);
    let (a, b) = (read_charge(&id).unwrap(), read_charge(&sw).unwrap());
    for (x, y) in a.leaves().iter().zip(b.leaves()) {
        assert!((x - 1.0 / 256.0).abs() < 1e-15);
        assert!((x + y).abs() < 1e-15);
    }
    let dev = r["result"]["diagnostics"]["jacobianOracle"]["maxLeafDeviation"]
        .as_f64()
        .unwrap();
    assert!(dev < 1e-15);
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(id.with_extension("hchg.json")).unwrap()).unwrap();
    assert!(side["provenance"]["diagnostics"]["holderProfile"].is_object());
}

#[test]
fn fbm_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |p: &Path| {
        vec!["fbm", "--hurst", "0.7,0.8", "--depth", "4", "--trials", "120", "--seed", "9", "--out"]
            .into_iter()
            .map(String::from)
            .chain([s(p).to_string()])
            .collect::<Vec<_>>()
    };
    for p in [&a, &b] {
        let v = args(p);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        assert_eq!(code(&refs), 0);
    }
    for f in ["sample.json", "charge.hchg", "trials.csv", "variance.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let variance = std::fs::read_to_string(a.join("variance.csv")).unwrap();
    assert_eq!(variance.lines().count(), 6);
    let trials = std::fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 120 * 5);
}

#[test]
fn fbm_warns_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fbm", "--hurst", "0.3,0.4", "--depth", "3", "--trials", "2", "--out", s(dir.path())]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn bracket_matches_young_for_smooth_field() {
    let r = json(&["bracket", "--field", "x*y", "--charge", "random", "--seed", "2"]);
    let b = r["result"]["bracket"]["value"].as_f64().unwrap();
    let y = r["result"]["young"]["value"].as_f64().unwrap();
    assert!((b - y).abs() < 1e-12, "{b} vs {y}");
    assert!(r["result"]["bracket"]["value"].as_f64().unwrap().abs() <= r["result"]["bracket"]["bound"].as_f64().unwrap());
}

#[test]
fn convergence_and_csv() {
    let out = run(&[
        "convergence", "--field", "sin(3*x)", "--charge", "random", "--from", "1", "--to", "5", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "depth,value,truncationBound,discretizationBound,change");
    assert_eq!(lines.len(), 6);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("config: "));
}

#[test]
fn report_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&["analyze", "--charge", "haar:1:2:3", "--report", s(&path)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["result"]["total"], 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.hchg");
    std::fs::write(&bad, b"not a charge").unwrap();
    assert_eq!(code(&["analyze", "--charge", s(&bad)]), 2);
    let missing = dir.path().join("missing.hchg");
    assert_eq!(code(&["analyze", "--charge", s(&missing)]), 3);
    assert_eq!(code(&["integrate", "--field", "x+", "--charge", "lebesgue"]), 2);
    assert_eq!(code(&["integrate", "--field", "x", "--charge", "lebesgue", "--gamma", "0.3"]), 2);
    assert_eq!(code(&["integrate", "--d", "1", "--field", "y", "--charge", "lebesgue"]), 2);
    assert_eq!(code(&["integrate", "--field", "x", "--charge", "nonsense"]), 2);
    assert_eq!(code(&["analyze", "--charge", "lebesgue", "--depth", "6", "--resolution", "4"]), 2);
    assert_eq!(code(&["wedge", "--g", "x", "--g", "y", "--g", "z", "--g", "x", "--out", s(&dir.path().join("w"))]), 2);
    assert_eq!(code(&["analyze", "--charge", "lebesgue", "--threads", "0"]), 2);
    let unwritable = dir.path().join("no/such/dir/out.hchg");
    assert_eq!(code(&["synth", "--charge", "lebesgue", "--out", s(&unwritable)]), 3);
}

#[test]
fn numerical_failure_exits_with_four() {
    // ln of a negative number has no finite samples.
    assert_eq!(code(&["integrate", "--d", "1", "--field", "ln(x-1)", "--charge", "lebesgue"]), 4);
}
