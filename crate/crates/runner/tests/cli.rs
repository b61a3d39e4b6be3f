use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
name = "cli"

[graph]
family = "ring"
n = 40

[walk]
kind = "quantum"

[run]
horizon = 2000
transient = 100

[analysis]
m = [0.0, 2.0]
record_series = true
"#;

fn qxe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qxe")).args(args).current_dir(cwd).env_remove("QXE_OUT").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("c.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qxe(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(qxe(&["preset", "table9"], dir.path()).status.code(), Some(2));
    let missing = qxe(&["run-quantum", "--config", "absent.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.toml"));
    let bad = write_config(dir.path(), "name = \"x\"\n[graph]\nfamily = \"ring\"\nn = 1\n[walk]\nkind = \"quantum\"\n");
    let out = qxe(&["run-quantum", "--config", &bad], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid config"));
    let cfg = write_config(dir.path(), CONFIG);
    assert_eq!(qxe(&["run-classical", "--config", &cfg], dir.path()).status.code(), Some(1));
}

#[test]
fn run_quantum_is_deterministic_and_analyze_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    for out in ["a", "b"] {
        let o = qxe(&["run-quantum", "--config", &cfg, "--seed", "7", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.len() >= 6);
    for name in &names {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        if name == "manifest.json" {
            let strip = |bytes: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v.as_object_mut().unwrap().remove("wall_time_s");
                v
            };
            assert_eq!(strip(&a), strip(&b));
        } else {
            assert_eq!(a, b, "{name:?}");
        }
    }

    let o = qxe(&["analyze", "--series", "a/series.csv", "--m", "0", "--m", "2", "--out", "an"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ee = std::fs::read_to_string(dir.path().join("an/ee.csv")).unwrap();
    assert_eq!(ee.lines().next(), Some("v,k,q,count,F,m"));
    let original = std::fs::read_to_string(dir.path().join("a/ee.csv")).unwrap();
    let sorted = |s: &str| {
        let mut lines: Vec<String> = s.lines().skip(1).map(str::to_string).collect();
        lines.sort();
        lines
    };
    assert_eq!(sorted(&ee), sorted(&original));
}

#[test]
fn graph_and_spectral_commands_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = qxe(&["graph", "--family", "scale-free", "--n", "50", "--out", "g"], dir.path());
    assert!(o.status.success());
    let degrees = std::fs::read_to_string(dir.path().join("g/degrees.csv")).unwrap();
    let total: usize = degrees.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 50);

    let cfg = write_config(dir.path(), &CONFIG.replace("n = 40", "n = 12"));
    let o = qxe(&["spectral", "--config", &cfg, "--out", "s", "--bins", "16"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["eigenphases.csv", "spacing.csv", "limit.csv", "signal.csv"] {
        assert!(dir.path().join("s").join(name).exists(), "{name}");
    }
}

#[test]
fn out_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qxe"))
        .args(["graph", "--family", "ring", "--n", "9"])
        .current_dir(dir.path())
        .env("QXE_OUT", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from-env/graph.edges").exists());
}

#[test]
fn preset_table2_writes_lattice_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = qxe(&["preset", "table2", "--out", "t2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for d in 1..=3 {
        for suffix in ["", "_crw"] {
            let name = format!("ee_lattice_{d}d{suffix}.csv");
            assert!(dir.path().join("t2").join(&name).exists(), "{name}");
        }
    }
    assert!(dir.path().join("t2/table2.csv").exists());
}
