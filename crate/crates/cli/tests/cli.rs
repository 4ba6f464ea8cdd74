use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use thinjulia_core::params::PlanPolicy;
use thinjulia_core::{build_sequence, ParameterSequence};

fn thinjulia(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinjulia"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn thinjulia")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn plan_prints_minimal_exponents_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = thinjulia(dir.path(), &["plan"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let ms: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(3).unwrap())
        .collect();
    assert_eq!(ms, ["5", "6", "6"]);

    let plan: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/plan.json")).unwrap()).unwrap();
    let seq: ParameterSequence = serde_json::from_value(plan["sequence"].clone()).unwrap();
    let m: Vec<Option<u32>> = seq.exponents().iter().map(|&m| Some(m)).collect();
    let rebuilt = build_sequence(seq.b_values(), &PlanPolicy::explicit(m)).unwrap();
    assert_eq!(rebuilt, seq);
    assert_eq!(plan["stages"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_stage_value_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = thinjulia(dir.path(), &["--b=-5", "plan"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn explicit_exponent_below_minimum_is_rejected_without_override() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&thinjulia(dir.path(), &["--m", "3,6,6", "plan"])), 2);
}

#[test]
fn verify_default_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = thinjulia(dir.path(), &["verify"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/verify.json")).unwrap()).unwrap();
    assert!(json.as_array().unwrap().iter().all(|r| r["status"] == "pass"));
    let csv = fs::read_to_string(dir.path().join("out/verify.csv")).unwrap();
    assert!(csv.starts_with("name,status,margin,samples\n"));
}

#[test]
fn verify_fails_on_undersized_block() {
    let dir = tempfile::tempdir().unwrap();
    let o = thinjulia(dir.path(), &["--m", "3,6,6", "--allow-invalid-overrides", "verify", "--only", "contracting"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("contracting[k=1]"));
}

#[test]
fn verify_only_selects_one_family() {
    let dir = tempfile::tempdir().unwrap();
    let o = thinjulia(dir.path(), &["verify", "--only", "radii"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("out/verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(code(&thinjulia(dir.path(), &["verify", "--only", "nonsense"])), 2);
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "b = [-7.0]\ncolour = \"red\"\n").unwrap();
    assert_eq!(code(&thinjulia(dir.path(), &["--config", "run.toml", "plan"])), 2);
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "b = [-8.0, -11.0]\nout = \"from_file\"\n").unwrap();
    let o = thinjulia(dir.path(), &["--config", "run.toml", "--out", "from_flag", "plan"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("from_flag/plan.json").exists());
    assert!(!dir.path().join("from_file").exists());
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn render_writes_image_samples_and_annuli() {
    let dir = tempfile::tempdir().unwrap();
    let o = thinjulia(dir.path(), &["render", "--time", "5", "--overlay", "A:1", "--res", "64x48"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let ppm = fs::read(out.join("render_m5.ppm")).unwrap();
    let header = b"P6\n64 48\n255\n";
    assert!(ppm.starts_with(header));
    assert_eq!(ppm.len(), header.len() + 64 * 48 * 3);
    assert!(fs::read_to_string(out.join("julia_m5.csv")).unwrap().starts_with("re,im,stage\n"));
    assert!(fs::read_to_string(out.join("annuli.csv"))
        .unwrap()
        .starts_with("time,stage,code,boundary,index,re,im\n"));
}

#[test]
fn render_rejects_bad_windows_and_overlays() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&thinjulia(dir.path(), &["render", "--window", "0,0,0,1", "--res", "8x8"])), 2);
    assert_eq!(code(&thinjulia(dir.path(), &["render", "--overlay", "A:1", "--res", "8x8"])), 2);
    assert_eq!(code(&thinjulia(dir.path(), &["render", "--res", "1x8"])), 2);
}

fn probe(dir: &Path, args: &[&str]) -> serde_json::Value {
    let mut full = vec!["probe"];
    full.extend_from_slice(args);
    let o = thinjulia(dir, &full);
    assert_eq!(code(&o), 0);
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn probe_reports_itineraries_and_annuli() {
    let dir = tempfile::tempdir().unwrap();
    let origin = probe(dir.path(), &["--point", "0,0"]);
    assert_eq!(origin["itinerary"], "H,H,H");
    assert_eq!(origin["class"]["class"], "all_h");
    assert_eq!(origin["joining_stage"], 0);
    assert!(origin["annuli"].as_array().unwrap().is_empty());

    let root7 = 7f64.sqrt().to_string();
    let g = probe(dir.path(), &["--point", &format!("{root7},0"), "--time", "5"]);
    assert_eq!(g["itinerary"], "G,H,H");
    assert_eq!(g["joining_stage"], 1);
    assert_eq!(g["annuli"][0]["stage"], 1);

    let far = probe(dir.path(), &["--point", "10,0"]);
    assert_eq!(far["status"]["status"], "escaped");
    assert_eq!(far["status"]["stage"], 1);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "verify", "--only", "block_invariance"];
    let render = ["render", "--time", "5", "--time", "6", "--overlay", "B:2:*", "--res", "48x48"];
    let mut runs = Vec::new();
    for out in ["a", "b"] {
        let mut v = vec!["--out", out];
        v.extend_from_slice(&args);
        assert_eq!(code(&thinjulia(dir.path(), &v)), 0);
        let mut r = vec!["--out", out];
        r.extend_from_slice(&render);
        assert_eq!(code(&thinjulia(dir.path(), &r)), 0);
        let base = dir.path().join(out);
        let mut names: Vec<_> = fs::read_dir(&base).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        runs.push(names.iter().map(|n| (n.clone(), fs::read(base.join(n)).unwrap())).collect::<Vec<_>>());
    }
    assert_eq!(runs[0].len(), 7);
    assert_eq!(runs[0], runs[1]);
}
