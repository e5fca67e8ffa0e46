use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn banmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_banmod")).args(args).output().expect("binary runs")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn write_instance(dir: &tempfile::TempDir, name: &str, v: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.display().to_string()
}

#[test]
fn kernel_audit_passes() {
    let o = banmod(&["audit", "--construction", "kernel", "--trials", "100", "--seed", "7", "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["trials"], 100);
    assert_eq!(r["passed"], true);
    assert!(r.get("wall_time_ms").is_none());
}

#[test]
fn unknown_construction_is_a_usage_error() {
    let o = banmod(&["audit", "--construction", "tensor", "--trials", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown construction"));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(code(&banmod(&["audit", "--construction", "kernel", "--trials", "0"])), 2);
    assert_eq!(code(&banmod(&["audit", "--construction", "kernel", "--tol", "-1"])), 2);
    assert_eq!(code(&banmod(&["audit", "--construction", "kernel", "--seed", "x"])), 2);
    assert_eq!(code(&banmod(&["demo", "--name", "nope"])), 2);
    assert_eq!(code(&banmod(&["demo", "--name", "inverse-cokernel", "--levels", "1"])), 2);
    assert_eq!(code(&banmod(&["frobnicate"])), 2);
}

#[test]
fn audit_reports_are_byte_identical() {
    let args = ["audit", "--construction", "product", "--trials", "1", "--seed", "0", "--quiet"];
    let a = banmod(&args);
    let b = banmod(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let args = ["audit", "--construction", "pushout", "--trials", "24", "--seed", "3", "--quiet"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_banmod")).args(args).env("BANMOD_THREADS", threads).output().unwrap()
    };
    let one = run("1");
    let many = run("64");
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let o = banmod(&["audit", "--construction", "coproduct", "--trials", "2", "--out", path.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["construction"], "coproduct");
}

#[test]
fn inverse_trivial_demo_counts_up() {
    let r = json(&banmod(&["demo", "--name", "inverse-trivial", "--levels", "8", "--quiet"]));
    let values: Vec<f64> = r["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 8);
    for (n, v) in values.iter().enumerate() {
        assert!((v - (n + 1) as f64).abs() < 1e-12, "level {}: {v}", n + 1);
    }
}

#[test]
fn not_balanced_demo_at_one_level() {
    let r = json(&banmod(&["demo", "--name", "not-balanced", "--levels", "1", "--quiet"]));
    assert!((r["values"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn direct_kernel_demo_has_unit_kernels() {
    let r = json(&banmod(&["demo", "--name", "direct-kernel", "--levels", "3", "--quiet"]));
    assert_eq!(r["values"], serde_json::json!([1.0, 1.0, 1.0]));
}

#[test]
fn bundled_pullback_checks_out() {
    let o = banmod(&["check", "--in", &data("pullback_two_atoms.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["passed"], true);
    assert_eq!(r["audit"]["uniqueness_certified"], true);
}

#[test]
fn norm_violation_names_the_atom() {
    let o = banmod(&["check", "--in", &data("norm_violation.json")]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("morphism g") && err.contains("atom b"), "{err}");
    let r = json(&o);
    let g = r["morphisms"].as_array().unwrap().iter().find(|m| m["name"] == "g").unwrap().clone();
    assert_eq!(g["ok"], false);
    assert_eq!(g["atom"], "b");
}

#[test]
fn truncated_json_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("pullback_two_atoms.json")).unwrap();
    let p = dir.path().join("cut.json");
    std::fs::write(&p, &text[..text.len() / 2]).unwrap();
    let o = banmod(&["check", "--in", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&banmod(&["check", "--in", "/nonexistent/instance.json"])), 2);
}

fn base_instance() -> Value {
    serde_json::from_str(&std::fs::read_to_string(data("pullback_two_atoms.json")).unwrap()).unwrap()
}

#[test]
fn wrong_matrix_shape_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_instance();
    v["morphisms"]["f"]["mats"][0] = serde_json::json!([[1.0]]);
    let o = banmod(&["check", "--in", &write_instance(&dir, "shape.json", &v)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("atom a"));
}

#[test]
fn named_constructions_from_instances() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("kernel", serde_json::json!(["f"])),
        ("cokernel", serde_json::json!(["g"])),
        ("product", serde_json::json!(["Left", "Right", "Base"])),
        ("coproduct", serde_json::json!(["Left", "Base"])),
    ];
    for (construction, args) in cases {
        let mut v = base_instance();
        v["construction"] = construction.into();
        v["args"] = args;
        let o = banmod(&["check", "--in", &write_instance(&dir, "c.json", &v), "--quiet"]);
        assert_eq!(code(&o), 0, "{construction}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn engine_limit_over_a_custom_diagram() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_instance();
    v["construction"] = "colimit".into();
    v["diagram"] = serde_json::json!({
        "index": {
            "objects": ["x", "y", "z"],
            "arrows": [{"name": "p", "dom": "x", "cod": "z"}, {"name": "q", "dom": "y", "cod": "z"}]
        },
        "objects": {"x": "Left", "y": "Right", "z": "Base"},
        "arrows": {"p": "f", "q": "g"}
    });
    let o = banmod(&["check", "--in", &write_instance(&dir, "d.json", &v), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    v["construction"] = "limit".into();
    let o = banmod(&["check", "--in", &write_instance(&dir, "d.json", &v), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    v["diagram"]["arrows"] = serde_json::json!({"p": "f"});
    assert_eq!(code(&banmod(&["check", "--in", &write_instance(&dir, "d.json", &v)])), 2);
}

#[test]
fn pushout_needs_a_common_source() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_instance();
    v["construction"] = "pushout".into();
    let o = banmod(&["check", "--in", &write_instance(&dir, "p.json", &v)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}
