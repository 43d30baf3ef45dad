use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn rompc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rompc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let s = String::from_utf8_lossy(&o.stderr);
    let line = s.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no error JSON in {s}"));
    serde_json::from_str(line).unwrap()
}

/// The surrogate preset, shortened so each test runs in seconds.
fn surrogate() -> Value {
    let o = rompc(&["init", "surrogate"]);
    assert_eq!(code(&o), 0);
    let mut cfg: Value = serde_json::from_slice(&o.stdout).unwrap();
    cfg["synthesis"]["tau"] = json!(40);
    cfg["sim"]["k0"] = json!(80);
    cfg["sim"]["steps"] = json!(100);
    cfg["runs"] = json!(6);
    cfg["logged_runs"] = json!(2);
    cfg
}

fn write_cfg(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run_in(dir: &Path, cfg: &Value, out: &str, extra: &[&str]) -> Output {
    let p = write_cfg(dir, &format!("{out}.json"), cfg);
    let out = dir.join(out);
    let mut args = vec!["run", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    rompc(&args)
}

fn read(p: PathBuf) -> Vec<u8> {
    fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn cert(dir: &Path, out: &str) -> Value {
    serde_json::from_slice(&read(dir.join(out).join("certificate.json"))).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn full_run_writes_every_artifact_and_repeats_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let cfg = surrogate();
    for out in ["a", "b"] {
        let o = run_in(tmp.path(), &cfg, out, &["--workers", "1"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = tmp.path().join("a");
    for f in ["model/A.mtx", "model/Bw.mtx", "rom/V.mtx", "rom/W.mtx", "rom.json", "synthesis.json", "certificate.json", "audit.json"] {
        assert_eq!(read(a.join(f)), read(tmp.path().join("b").join(f)), "{f}");
    }
    let runs: Vec<_> = fs::read_dir(a.join("runs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(runs.len(), 2);
    for r in &runs {
        assert_eq!(read(a.join("runs").join(r)), read(tmp.path().join("b/runs").join(r)));
    }
    let audit: Value = serde_json::from_slice(&read(a.join("audit.json"))).unwrap();
    assert_eq!(audit["summary"]["runs"], 6);
    assert_eq!(audit["summary"]["violations"], 0);
    assert!(!a.join("error.json").exists());

    // The report is a pure function of the artifacts.
    let r1 = rompc(&["report", "--out", a.to_str().unwrap()]);
    let r2 = rompc(&["report", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&r1), 0);
    assert_eq!(r1.stdout, r2.stdout);
    let report = String::from_utf8(read(a.join("report.md"))).unwrap();
    let c = cert(tmp.path(), "a");
    for key in c.as_object().unwrap().keys() {
        assert!(report.contains(key.as_str()), "report lacks {key}");
    }
    assert!(!report.contains("CONSERVATIVE"));
}

#[test]
fn stages_run_separately_and_detect_stale_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = surrogate();
    let p = write_cfg(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("out");
    let (p, out) = (p.to_str().unwrap(), out.to_str().unwrap());

    let early = rompc(&["certify", "--config", p, "--out", out]);
    assert_eq!(code(&early), 2);
    assert!(stderr_json(&early)["message"].as_str().unwrap().contains("rompc reduce"));

    assert_eq!(code(&rompc(&["reduce", "--config", p, "--out", out])), 0);
    assert_eq!(code(&rompc(&["certify", "--out", out])), 0);
    assert_eq!(code(&rompc(&["simulate", "--out", out, "--seed", "9"])), 0);
    let audit: Value = serde_json::from_slice(&read(Path::new(out).join("audit.json"))).unwrap();
    assert_eq!(audit["runs"][0]["seed"], 9);

    let mut other = cfg.clone();
    other["synthesis"]["order"] = json!(3);
    let q = write_cfg(tmp.path(), "d.json", &other);
    let stale = rompc(&["certify", "--config", q.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&stale), 2);
    let err = stderr_json(&stale);
    assert!(err["message"].as_str().unwrap().contains("different settings"), "{err}");
    assert!(Path::new(out).join("error.json").exists());
}

#[test]
fn validation_errors_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = surrogate();
    // k₀ = 80 is below 2τ = 100.
    let o = run_in(tmp.path(), &cfg, "tau", &["--tau", "50"]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["kind"], "invalid-argument");

    let o = run_in(tmp.path(), &cfg, "tol", &["--tol", "no_such_tolerance=1e-3"]);
    assert_eq!(code(&o), 2);
    let o = run_in(tmp.path(), &cfg, "workers", &["--workers", "0"]);
    assert_eq!(code(&o), 2);

    let mut bad = cfg.clone();
    bad["schema_version"] = json!(99);
    assert_eq!(code(&run_in(tmp.path(), &bad, "schema", &[])), 2);

    let mut missing = cfg;
    missing["system"] = json!({"family": "file",
        "paths": {"a": "nope/A.mtx", "b": "nope/B.mtx", "bw": "nope/Bw.mtx", "c": "nope/C.mtx", "h": "nope/H.mtx"},
        "sets": {"z": 1.0, "u": 1.0, "w": 0.1, "v": 0.1}});
    let o = run_in(tmp.path(), &missing, "missing", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("does not exist"));
}

fn file_system(dir: &str) -> Value {
    let m = |f: &str| format!("{dir}/model/{f}.mtx");
    json!({"family": "file",
        "paths": {"a": m("A"), "b": m("B"), "bw": m("Bw"), "c": m("C"), "h": m("H")},
        "sets": {"z": 50.0, "u": 20.0, "w": 0.05, "v": 0.01}})
}

#[test]
fn unstable_plant_is_refused_with_a_hint() {
    let tmp = TempDir::new().unwrap();
    let cfg = surrogate();
    let p = write_cfg(tmp.path(), "c.json", &cfg);
    let out = tmp.path().join("gen");
    assert_eq!(code(&rompc(&["reduce", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);

    // Scale A so its spectral radius exceeds one.
    let a = out.join("model/A.mtx");
    let text = fs::read_to_string(&a).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    for l in lines.iter_mut().skip(2) {
        *l = format!("{:e}", 3.0 * l.trim().parse::<f64>().unwrap());
    }
    fs::write(&a, lines.join("\n") + "\n").unwrap();

    let mut unstable = cfg;
    unstable["system"] = file_system("gen");
    let o = run_in(tmp.path(), &unstable, "u", &[]);
    assert_eq!(code(&o), 3);
    let err = stderr_json(&o);
    assert_eq!(err["kind"], "assumption");
    assert!(err["message"].as_str().unwrap().contains("allow_unstable"));
}

#[test]
fn oversized_disturbances_reject_the_certificate() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = surrogate();
    cfg["sets"]["w"] = json!({"kind": "box", "radius": 5.0});
    let o = run_in(tmp.path(), &cfg, "big", &[]);
    assert_eq!(code(&o), 3);
    let err = stderr_json(&o);
    assert_eq!(err["kind"], "rejected");
    assert_eq!(err["stage"], "certify");
}

#[test]
fn start_outside_the_certified_premise_is_refused() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = surrogate();
    cfg["sim"]["initial"] = json!({"kind": "fixed", "x": [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]});
    let o = run_in(tmp.path(), &cfg, "eta", &["--eta-start", "0"]);
    assert_eq!(code(&o), 3);
    let err = stderr_json(&o);
    assert_eq!(err["kind"], "assumption");
    assert_eq!(err["stage"], "simulate");
    assert!(!tmp.path().join("eta/audit.json").exists());
}

#[test]
fn exact_undisturbed_model_needs_no_tightening() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = surrogate();
    cfg["synthesis"]["order"] = json!(6);
    let zero = json!({"kind": "bounds", "lower": [0.0], "upper": [0.0]});
    cfg["sets"]["v"] = zero;
    cfg["sets"]["w"] = json!({"kind": "bounds", "lower": vec![0.0; 6], "upper": vec![0.0; 6]});
    let o = run_in(tmp.path(), &cfg, "exact", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = cert(tmp.path(), "exact");
    for d in floats(&c["delta_z"]).into_iter().chain(floats(&c["delta_u"])) {
        assert!(d.abs() < 1e-9, "{d}");
    }
}

#[test]
fn larger_disturbances_never_shrink_the_tightening() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = surrogate();
    cfg["sets"]["w"] = json!({"kind": "box", "radius": 0.05});
    assert_eq!(code(&run_in(tmp.path(), &cfg, "w1", &[])), 0);
    cfg["sets"]["w"] = json!({"kind": "box", "radius": 0.1});
    assert_eq!(code(&run_in(tmp.path(), &cfg, "w2", &[])), 0);
    let (a, b) = (cert(tmp.path(), "w1"), cert(tmp.path(), "w2"));
    for key in ["delta_z", "delta_u"] {
        for (x, y) in floats(&a[key]).iter().zip(floats(&b[key])) {
            assert!(y >= *x - 1e-12, "{key}: {x} -> {y}");
        }
    }
}

#[test]
fn quiet_runs_keep_at_least_the_disturbed_margin() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = surrogate();
    assert_eq!(code(&run_in(tmp.path(), &cfg, "loud", &[])), 0);
    cfg["sim"]["policy"] = json!({"kind": "zero"});
    assert_eq!(code(&run_in(tmp.path(), &cfg, "quiet", &[])), 0);
    let slack = |out: &str| {
        let a: Value = serde_json::from_slice(&read(tmp.path().join(out).join("audit.json"))).unwrap();
        a["summary"]["min_slack"]["z"].as_f64().unwrap()
    };
    assert!(slack("quiet") >= slack("loud"));
}

#[test]
fn saved_model_files_reproduce_the_generated_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = surrogate();
    assert_eq!(code(&run_in(tmp.path(), &cfg, "gen", &[])), 0);
    let mut file = cfg.clone();
    // Relative to the config file's directory.
    file["system"] = file_system("gen");
    let o = run_in(tmp.path(), &file, "file", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (a, b) = (cert(tmp.path(), "gen"), cert(tmp.path(), "file"));
    assert_eq!(a["delta_z"], b["delta_z"]);
    assert_eq!(a["delta_u"], b["delta_u"]);
}

#[test]
fn init_prints_valid_presets() {
    for name in ["mass-spring", "heat", "surrogate"] {
        let o = rompc(&["init", name]);
        assert_eq!(code(&o), 0);
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["schema_version"], 1);
    }
    assert_ne!(code(&rompc(&["init", "nope"])), 0);
}
