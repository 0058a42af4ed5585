use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn amvf(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_amvf"));
    cmd.args(args).env_remove("AMVF_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const DIRICHLET_ONES: &str = r#"
kind = "dirichlet"
[params]
d = 1
p = 3.0
eps = 0.4
[geometry.domain]
shape = "box"
lo = [-1.0]
hi = [1.0]
[data.u0]
kind = "constant"
value = 1.0
[data.g]
kind = "constant"
value = 1.0
[run]
horizon = 0.3
"#;

const EXPANSION: &str = r#"
kind = "expansion"
[params]
d = 1
p = 3.0
eps_ladder = [0.4, 0.3, 0.2, 0.15, 0.1]
[data.phi]
kind = "exp"
direction = [1.0]
[run]
point = [0.0]
"#;

const GAME: &str = r#"
kind = "game_value"
[params]
d = 1
p = 3.0
eps = 0.4
[geometry.domain]
shape = "box"
lo = [-1.0]
hi = [1.0]
[data.u0]
kind = "gaussian"
center = [0.0]
sigma = 0.5
[data.g]
kind = "gaussian"
center = [0.0]
sigma = 0.5
[run]
horizon = 0.3
seed = 11
n_episodes = 100
n_c = 16
"#;

#[test]
fn lists_registered_functions() {
    let out = amvf(&["list-test-functions"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["constant", "affine", "quadratic", "exp", "neg_power", "pos_power", "bump", "gaussian"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn validation_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write(tmp.path(), "ok.toml", DIRICHLET_ONES);
    assert_eq!(amvf(&["validate", &ok], &[]).status.code(), Some(0));

    let unknown = write(tmp.path(), "unknown.toml", &DIRICHLET_ONES.replacen("kind = \"constant\"", "kind = \"sinc\"", 1));
    let out = amvf(&["validate", &unknown], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sinc"));

    let ladder = write(tmp.path(), "ladder.toml", &EXPANSION.replace("[0.4, 0.3, 0.2, 0.15, 0.1]", "[0.3, 0.4, 0.2]"));
    assert_eq!(amvf(&["validate", &ladder], &[]).status.code(), Some(2));

    let coarse = amvf(&["validate", &ok, "--h", "5.0"], &[]);
    assert_eq!(coarse.status.code(), Some(2));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(amvf(&["run", missing.to_str().unwrap()], &[]).status.code(), Some(2));
}

#[test]
fn unwritable_output_dir_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", DIRICHLET_ONES);
    let blocker = write(tmp.path(), "file", "");
    let out = amvf(&["run", &cfg, "--output-dir", &format!("{blocker}/sub")], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overflowing_data_is_a_numerical_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let text = DIRICHLET_ONES.replacen("kind = \"constant\"\nvalue = 1.0", "kind = \"exp\"\ndirection = [800.0]", 1);
    let cfg = write(tmp.path(), "c.toml", &text);
    let out = amvf(&["run", &cfg, "--output-dir", tmp.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn constant_dirichlet_run_keeps_unit_norms() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", DIRICHLET_ONES);
    let out = amvf(&["run", &cfg], &[("AMVF_OUTPUT_ROOT", tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = String::from_utf8(out.stdout).unwrap().trim().to_string();
    assert!(dir.starts_with(tmp.path().to_str().unwrap()));
    let csv = fs::read_to_string(Path::new(&dir).join("sup_norms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,time,sup_norm"));
    let norms: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(norms.len(), 5);
    assert!(norms.iter().all(|&n| n == 1.0));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&dir).join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&dir).join("dpp_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"].as_str(), Some(hash));
    assert_eq!(summary["probe"]["value"].as_f64(), Some(1.0));
}

#[test]
fn expansion_report_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.toml", EXPANSION);
    let out_dir = tmp.path().join("out");
    let out = amvf(&["run", &cfg, "--output-dir", out_dir.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("expansion_report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "eps,abs_error");
    let footer: Vec<f64> = lines[6].split(',').map(|v| v.parse().unwrap()).collect();
    assert!(footer[0] > 0.0);
    assert!((footer[1] - 0.4).abs() < 1e-12);
}

#[test]
fn game_value_is_reproducible_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.toml", GAME);
    let run = |name: &str, extra: &[&str]| {
        let dir = tmp.path().join(name);
        let mut args = vec!["run", cfg.as_str(), "--output-dir", dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = amvf(&args, &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.join("game_value.json")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &["--threads", "1"]);
    assert_eq!(a, b);
    let c = run("c", &["--seed", "12", "--n-episodes", "50"]);
    let v: serde_json::Value = serde_json::from_slice(&c).unwrap();
    assert_eq!(v["estimate"]["n"].as_u64(), Some(50));
    assert_eq!(v["estimate"]["seed"].as_u64(), Some(12));
    assert_eq!(v["strategy_i"].as_str(), Some("greedy"));
    let gap = (v["estimate"]["mean"].as_f64().unwrap() - v["dpp_value"].as_f64().unwrap()).abs();
    assert!(gap < 0.2, "{gap}");
}
