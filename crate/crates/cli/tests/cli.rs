use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resolvent-lab"));
    c.env_remove("RESOLVENT_LAB_SEED");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn identities_checkerboard_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_in(tmp.path(), &["run", "identities_checkerboard.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["inputs_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["versions"]["resolvent-lab-core"].is_string());
    let table = fs::read_to_string(out.join("01-identities-identities.csv")).unwrap();
    assert!(table.starts_with("trial,identity,deviation,limit"));
    for id in ["resolvent-chain", "reference-independence", "duality", "spectral-reflection", "backend-equivalence"] {
        assert!(table.contains(id), "{id} missing from\n{table}");
    }
}

#[test]
fn empty_task_list_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let f = write(tmp.path(), "s.json", r#"{"schema":1,"name":"e","problem":{"kind":"dense","n":2},"tasks":[]}"#);
    let o = run_in(tmp.path(), &["run", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty task list"));
}

#[test]
fn unknown_task_and_bad_schema_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let f = write(
        tmp.path(),
        "a.json",
        r#"{"schema":1,"name":"e","problem":{"kind":"dense","n":2},"tasks":[{"task":"nosuch"}]}"#,
    );
    assert_eq!(run_in(tmp.path(), &["run", &f]).status.code(), Some(2));
    let f = write(
        tmp.path(),
        "b.json",
        r#"{"schema":9,"name":"e","problem":{"kind":"dense","n":2},"tasks":[{"task":"solve","z0":1}]}"#,
    );
    assert_eq!(run_in(tmp.path(), &["run", &f]).status.code(), Some(2));
    assert_eq!(run_in(tmp.path(), &["run", "no_such_scenario"]).status.code(), Some(2));
}

#[test]
fn z0_on_an_eigenvalue_is_a_singularity() {
    // B = diag(1, 2, 3, 4) with Γ₁ = I has spectrum {1, 2, 3, 4}.
    let tmp = TempDir::new().unwrap();
    let f = write(
        tmp.path(),
        "sing.json",
        r#"{"schema":1,"name":"sing","problem":{"kind":"dense","n":4,
            "b":[[1,0,0,0],[0,2,0,0],[0,0,3,0],[0,0,0,4]],
            "projector":[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]},
            "tasks":[{"task":"solve","z0":2.0,"method":"dense"}]}"#,
    );
    let o = run_in(tmp.path(), &["run", &f, "--out", "o"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("singular"), "{}", stderr(&o));
    let manifest = fs::read_to_string(tmp.path().join("o/manifest.json")).unwrap();
    assert!(manifest.contains("\"singular\""));
}

#[test]
fn failed_assertion_exits_3_and_names_the_invariant() {
    let tmp = TempDir::new().unwrap();
    let f = write(
        tmp.path(),
        "strict.json",
        r#"{"schema":1,"name":"strict","seed":3,"problem":{"kind":"dense","n":6,"rank":3,"scale":0.2},
            "tasks":[{"task":"resolvent-sweep","z0s":[3.0],"max_deviation":0.0}]}"#,
    );
    let o = run_in(tmp.path(), &["run", &f, "--out", "o"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("resolvent-chain"));
}

#[test]
fn missing_raster_is_a_config_error_and_present_raster_is_used() {
    let tmp = TempDir::new().unwrap();
    let text = r#"{"schema":1,"name":"r","problem":{"kind":"grid","dims":2,"n":4,"projector":"conductivity",
        "medium":{"kind":"two-phase","phases":{"pattern":"raster","path":"chi.bin"},
        "b1":[[1,0],[0,1]],"b2":[[0,0],[0,0]]}},
        "tasks":[{"task":"identities","z0":3.0,"checks":["reflection"]}]}"#;
    let f = write(tmp.path(), "r.json", text);
    assert_eq!(run_in(tmp.path(), &["run", &f, "--out", "o"]).status.code(), Some(2));
    let chi: Vec<u8> = (0..16).map(|i| (i % 5 == 0) as u8).collect();
    let mut buf = Vec::new();
    resolvent_lab::io::write_raster(&mut buf, 2, 4, &chi).unwrap();
    fs::write(tmp.path().join("chi.bin"), buf).unwrap();
    let o = run_in(tmp.path(), &["run", &f, "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn runs_are_byte_identical_and_seed_can_be_overridden() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &str, threads: &str, seed: Option<&str>| {
        let mut c = bin();
        c.current_dir(tmp.path()).args(["run", "zstar_hermitian", "--out", dir, "--parallel-sweeps", threads]);
        if let Some(s) = seed {
            c.env("RESOLVENT_LAB_SEED", s);
        }
        let o = c.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    run("a", "1", None);
    run("b", "3", None);
    run("c", "1", Some("99"));
    let files = |d: &str| {
        let mut v: Vec<_> = fs::read_dir(tmp.path().join(d))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "manifest.json")
            .collect();
        v.sort();
        v
    };
    assert_eq!(files("a"), files("b"));
    assert!(!files("a").is_empty());
    for f in files("a") {
        assert_eq!(
            fs::read(tmp.path().join("a").join(&f)).unwrap(),
            fs::read(tmp.path().join("b").join(&f)).unwrap(),
            "{f}"
        );
    }
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("c/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 99);
    let a = fs::read(tmp.path().join("a/01-zstar.json")).unwrap();
    let c = fs::read(tmp.path().join("c/01-zstar.json")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn solve_writes_field_binaries() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(tmp.path(), &["run", "solve_checkerboard", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = fs::read(tmp.path().join("o/01-solve-trial0-e.rlab")).unwrap();
    let e = resolvent_lab::io::read_field(&mut bytes.as_slice(), 1.0).unwrap();
    assert_eq!(e.components, 2);
    assert_eq!(e.points(), 256);
}

#[test]
fn list_and_describe() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(tmp.path(), &["list-scenarios"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().count() >= 8);
    let o = run_in(tmp.path(), &["describe", "stieltjes"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("epsilon") && text.contains("1e-3") && text.contains("{4ε, 2ε, ε}"));
    let o = run_in(tmp.path(), &["describe", "nosuch"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("known tasks: solve"));
}
