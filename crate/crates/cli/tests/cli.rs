use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = include_str!("../../../configs/synthetic.toml");

fn ddp(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ddp"));
    c.args(args).env_remove("DDP_CACHE_DIR");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("ddp runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic corpus and a config pointing at it.
fn setup(dir: &Path) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus");
    let out = run(&mut ddp(&["synth", "--out", s(&corpus), "--n-videos", "10"]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let config = dir.join("synthetic.toml");
    fs::write(&config, CONFIG).unwrap();
    (config, corpus.join("manifest.jsonl"))
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&mut ddp(&["train", "--bogus"]))), 1);
    assert_eq!(code(&run(&mut ddp(&["frobnicate"]))), 1);
    assert_eq!(code(&run(&mut ddp(&["--help"]))), 0);

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, CONFIG.replace("kind = \"mnb\"", "kind = \"lstm\"")).unwrap();
    let out = run(&mut ddp(&["run", "--config", s(&config)]));
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_modality_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let out = run(&mut ddp(&[
        "features",
        "--config",
        s(&config),
        "--manifest",
        s(&manifest),
        "--out",
        s(&dir.path().join("out")),
        "--modality",
        "olfactory",
    ]));
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, CONFIG).unwrap();
    let out = run(&mut ddp(&[
        "ingest",
        "--config",
        s(&config),
        "--manifest",
        s(&dir.path().join("nope.jsonl")),
        "--out",
        s(&dir.path().join("out")),
    ]));
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stages_match_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let staged = dir.path().join("staged");
    let whole = dir.path().join("whole");
    let common = |out: &Path| vec!["--config".to_string(), s(&config).into(), "--manifest".into(), s(&manifest).into(), "--out".into(), s(out).into()];

    for stage in ["ingest", "features", "train", "eval", "fuse", "report"] {
        let mut args = vec![stage.to_string()];
        args.extend(common(&staged));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = run(&mut ddp(&args));
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(staged.join("fused.jsonl").exists());

    let mut args = vec!["run".to_string()];
    args.extend(common(&whole));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(&mut ddp(&args));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fused hard_majority"));

    let a = fs::read(staged.join("report.json")).unwrap();
    let b = fs::read(whole.join("report.json")).unwrap();
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["seed"], 1);
    assert!(report["config"].get("out_dir").is_none());

    // one modality at a time
    let out = run(&mut ddp(&[
        "eval",
        "--config",
        s(&config),
        "--manifest",
        s(&manifest),
        "--out",
        s(&staged),
        "--modality",
        "lexical",
    ]));
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("lexical:"));
}

#[test]
fn eval_before_train_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let out = run(&mut ddp(&[
        "eval",
        "--config",
        s(&config),
        "--manifest",
        s(&manifest),
        "--out",
        s(&dir.path().join("out")),
        "--modality",
        "acoustic",
    ]));
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cache_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let cache = dir.path().join("elsewhere");
    let out_dir = dir.path().join("out");
    let out = run(ddp(&["ingest", "--config", s(&config), "--manifest", s(&manifest), "--out", s(&out_dir)])
        .env("DDP_CACHE_DIR", &cache));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(cache.join("syn000").join("ingest.key").exists());
    assert!(!out_dir.join("cache").exists());
}

#[test]
fn seed_flag_changes_split() {
    let dir = tempfile::tempdir().unwrap();
    let (config, manifest) = setup(dir.path());
    let mut splits = Vec::new();
    for seed in ["1", "2"] {
        let out_dir = dir.path().join(seed);
        let out = run(&mut ddp(&[
            "ingest",
            "--config",
            s(&config),
            "--manifest",
            s(&manifest),
            "--out",
            s(&out_dir),
            "--seed",
            seed,
        ]));
        assert_eq!(code(&out), 0);
        splits.push(fs::read_to_string(out_dir.join("split.json")).unwrap());
    }
    assert_ne!(splits[0], splits[1]);
}
