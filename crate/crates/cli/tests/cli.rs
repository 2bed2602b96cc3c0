use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn eflab(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eflab")).current_dir(cwd).args(args).output().expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) -> Output {
    let out = eflab(cwd, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn gen_writes_requested_rows() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["gen", "--family", "gaussian", "--lambda", "uniform", "--d", "2", "--n", "1000", "--seed", "7", "--output-dir", "g"]);
    let csv = std::fs::read_to_string(tmp.path().join("g/data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    assert_eq!(csv.lines().next().unwrap(), "x1,x2,y");
    let side = json(&tmp.path().join("g/data.json"));
    assert_eq!(side["family"], "gaussian");
    let m = json(&tmp.path().join("g/manifest.json"));
    assert_eq!(m["command"], "gen");
    assert_eq!(m["outputs"].as_object().unwrap().len(), 2);
}

#[test]
fn bernoulli_responses_are_binary() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["gen", "--family", "bernoulli", "--target", "constant:0", "--n", "500", "--output-dir", "b"]);
    let csv = std::fs::read_to_string(tmp.path().join("b/data.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let y = line.rsplit(',').next().unwrap();
        assert!(y == "0.0" || y == "1.0", "{y}");
    }
}

#[test]
fn config_errors_exit_two_and_name_the_flag() {
    let tmp = TempDir::new().unwrap();
    let out = eflab(tmp.path(), &["gen", "--family", "gamma"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--family"), "{}", stderr(&out));

    let out = eflab(tmp.path(), &["train", "--data", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--data"));

    let out = eflab(tmp.path(), &["approx", "--eta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("0.25"), "{}", stderr(&out));

    std::fs::write(tmp.path().join("bad.toml"), "unknown_key = 3\n").unwrap();
    assert_eq!(eflab(tmp.path(), &["dim", "--config", "bad.toml"]).status.code(), Some(2));
    assert_eq!(eflab(tmp.path(), &["sweep", "--bogus-flag"]).status.code(), Some(2));
    // nothing was written for failed runs
    assert!(!tmp.path().join("eflab-out").exists());
}

#[test]
fn auto_size_is_recorded_and_replay_is_identical() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "--d", "2", "--n", "1024", "--seed", "3", "--output-dir", "data"]);
    ok(dir, &["train", "--data", "data/data.csv", "--auto-size", "--beta", "1", "--epochs", "3", "--output-dir", "fit"]);
    let m = json(&dir.join("fit/manifest.json"));
    assert_eq!(m["derived"]["depth"], 7);
    assert_eq!(m["derived"]["weight_budget"], 222);
    assert_eq!(m["inputs"].as_object().unwrap().len(), 2);

    let out = ok(dir, &["replay", "--manifest", "fit/manifest.json", "--output-dir", "again"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("identical trace.csv"));
    let again = json(&dir.join("again/manifest.json"));
    assert_eq!(again["outputs"]["trace.csv"], m["outputs"]["trace.csv"]);
    assert_eq!(again["outputs"]["model.json"], m["outputs"]["model.json"]);
}

#[test]
fn replay_reports_differences() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "--n", "50", "--output-dir", "g"]);
    let path = dir.join("g/manifest.json");
    let mut m = json(&path);
    m["outputs"]["data.csv"] = Value::from("0".repeat(64));
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let out = eflab(dir, &["replay", "--manifest", "g/manifest.json", "--output-dir", "r"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("DIFFERS"));

    // a changed input is refused
    ok(dir, &["train", "--data", "g/data.csv", "--epochs", "2", "--output-dir", "t"]);
    std::fs::write(dir.join("g/data.csv"), "x1,x2,y\n0.5,0.5,1.0\n").unwrap();
    let out = eflab(dir, &["replay", "--manifest", "t/manifest.json", "--output-dir", "t2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("changed"));
}

#[test]
fn train_without_sidecar_needs_a_family() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("d.csv"), "x1,y\n0.1,0\n0.5,1\n0.9,1\n0.3,0\n").unwrap();
    assert_eq!(eflab(dir, &["train", "--data", "d.csv", "--epochs", "2"]).status.code(), Some(2));
    ok(dir, &["train", "--data", "d.csv", "--family", "bernoulli", "--epochs", "2", "--depth", "2", "--weights", "20", "--output-dir", "o"]);
    let m = json(&dir.join("o/manifest.json"));
    assert_eq!(m["derived"]["clamp"], Value::Null);
}

#[test]
fn approx_certificate_holds_for_both_norms() {
    let tmp = TempDir::new().unwrap();
    for p in ["1", "2"] {
        let out_dir = format!("a{p}");
        ok(tmp.path(), &["approx", "--target", "bump", "--beta", "1", "--d", "1", "--eta", "0.1", "--p", p, "--mc-points", "5000", "--output-dir", &out_dir]);
        let cert = json(&tmp.path().join(&out_dir).join("cert.json"));
        assert!(cert["measured_error"].as_f64().unwrap() <= cert["bound"].as_f64().unwrap());
        assert_eq!(cert["p"].as_f64().unwrap(), p.parse::<f64>().unwrap());
        assert!(tmp.path().join(&out_dir).join("model.json").exists());
    }
}

fn dim_slope(dir: &Path, args: &[&str]) -> f64 {
    ok(dir, args);
    let out = args.iter().position(|a| *a == "--output-dir").map(|i| args[i + 1]).unwrap();
    json(&dir.join(out).join("estimate.json"))["estimate"]["slope"].as_f64().unwrap()
}

#[test]
fn dimension_estimates() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let s = dim_slope(dir, &["dim", "--lambda", "uniform", "--d", "2", "--n", "100000", "--output-dir", "u"]);
    assert!((s - 2.0).abs() < 0.15, "{s}");
    let s = dim_slope(dir, &["dim", "--lambda", "curve", "--d", "3", "--n", "100000", "--output-dir", "c"]);
    assert!((s - 1.0).abs() < 0.15, "{s}");
    std::fs::write(dir.join("one.csv"), "x1,x2,y\n0.25,0.75,0.0\n").unwrap();
    assert_eq!(dim_slope(dir, &["dim", "--data", "one.csv", "--output-dir", "p"]), 0.0);
    let profile = std::fs::read_to_string(dir.join("p/profile.csv")).unwrap();
    assert!(profile.starts_with("j,epsilon,count"));
}

#[test]
fn sweep_outputs_do_not_depend_on_jobs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("s.toml"),
        "n_grid = [64, 128, 256, 512]\nseeds_per_n = 3\nepochs = 50\nmc_points = 1000\nseed = 4\noutput_dir = \"from-toml\"\n",
    )
    .unwrap();
    ok(dir, &["sweep", "--config", "s.toml", "--jobs", "1"]);
    ok(dir, &["sweep", "--config", "s.toml", "--jobs", "3", "--output-dir", "three"]);
    let a = json(&dir.join("from-toml/manifest.json"));
    let b = json(&dir.join("three/manifest.json"));
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(a["config"]["epochs"], 50);
    let cells = std::fs::read_to_string(dir.join("three/cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 4 * 3);
    let summary = json(&dir.join("three/summary.json"));
    assert_eq!(summary["ambient_exponent"].as_f64().unwrap(), -0.5);
    assert!(std::fs::read_to_string(dir.join("three/slope.dat")).unwrap().contains("ln_n"));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("g.toml"), "n = 30\nd = 3\nseed = 5\n").unwrap();
    ok(dir, &["gen", "--config", "g.toml", "--n", "12", "--output-dir", "o"]);
    let m = json(&dir.join("o/manifest.json"));
    assert_eq!(m["config"]["n"], 12);
    assert_eq!(m["config"]["d"], 3);
    assert_eq!(m["config"]["seed"], 5);
}

#[test]
fn writes_stay_inside_the_output_dir() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "--n", "100", "--output-dir", "only"]);
    ok(dir, &["dim", "--data", "only/data.csv", "--output-dir", "only"]);
    ok(dir, &["approx", "--eta", "0.2", "--mc-points", "1000", "--output-dir", "only"]);
    let top: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(top, vec![std::ffi::OsString::from("only")]);
}

#[test]
fn help_lists_defaults() {
    let tmp = TempDir::new().unwrap();
    for cmd in ["gen", "train", "approx", "dim", "sweep"] {
        let out = ok(tmp.path(), &[cmd, "--help"]);
        let text = String::from_utf8_lossy(&out.stdout);
        // an option's help may wrap onto following lines
        let mut blocks: Vec<String> = Vec::new();
        for line in text.lines() {
            let t = line.trim_start();
            if t.starts_with("--") || t.starts_with("-h") {
                blocks.push(t.to_string());
            } else if let Some(b) = blocks.last_mut() {
                b.push(' ');
                b.push_str(t);
            }
        }
        for b in blocks.iter().filter(|b| !b.starts_with("-h") && !b.starts_with("--config")) {
            assert!(b.contains("[default:") || b.contains("[required]"), "{cmd}: {b}");
        }
    }
}
