use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

use sceneforge_core::synth::{write_fixture_tree, FixtureSpec};

fn sceneforge<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sceneforge"))
        .args(args)
        .env_remove("SCENEFORGE_DATA_ROOT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// Fixture assets plus a catalog config next to them.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_fixture_tree(&dir.path().join("assets"), &FixtureSpec::default()).unwrap();
        let mut value = serde_json::to_value(&cfg).unwrap();
        for e in value["entries"].as_array_mut().unwrap() {
            let root = e["root"].as_str().unwrap().to_owned();
            e["root"] = format!("assets/{root}").into();
        }
        fs::write(dir.path().join("catalog.json"), value.to_string()).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn scan(&self, out: &str) -> PathBuf {
        let o = sceneforge(&[
            "scan",
            "--config",
            s(&self.path("catalog.json")),
            "--out",
            s(&self.path(out)),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        self.path(out).join("catalog.jsonl")
    }

    fn plan(&self, catalog: &Path, out: &str, extra: &[&str]) -> PathBuf {
        let out_dir = self.path(out);
        let mut args = vec!["plan", "--catalog", s(catalog), "--out", s(&out_dir)];
        args.extend_from_slice(extra);
        let o = sceneforge(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        self.path(out).join("manifest.jsonl")
    }
}

fn hash_tree(dir: &Path, skip: &[&str]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            if skip.contains(&rel.as_str()) {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(rel, format!("{:x}", Sha256::digest(fs::read(&p).unwrap())));
            }
        }
    }
    out
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn scan_is_stable_and_counts_items() {
    let ws = Workspace::new();
    let a = ws.scan("scan1");
    let b = ws.scan("scan2");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let summary = read_json(&ws.path("scan1/scan_report.json"));
    assert_eq!(summary["speech"], 20);
    assert_eq!(summary["noise"], 4);
    assert_eq!(summary["brirs"], 29);
    assert!(ws.path("scan1/run_config.json").is_file());
}

#[test]
fn config_errors_exit_2_and_empty_corpora_exit_3() {
    let ws = Workspace::new();
    let mut cfg = read_json(&ws.path("catalog.json"));
    cfg["entries"][0]["include"] = serde_json::json!(["[unclosed"]);
    fs::write(ws.path("bad.json"), cfg.to_string()).unwrap();
    let o = sceneforge(&["scan", "--config", s(&ws.path("bad.json")), "--out", s(&ws.path("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("glob"));

    cfg["entries"][0]["include"] = serde_json::json!(["**/*.flac"]);
    fs::write(ws.path("empty.json"), cfg.to_string()).unwrap();
    let o = sceneforge(&["scan", "--config", s(&ws.path("empty.json")), "--out", s(&ws.path("o"))]);
    assert_eq!(code(&o), 3);

    assert_eq!(code(&sceneforge::<&str>(&[])), 2);
    assert_eq!(code(&sceneforge(&["plan", "--hours", "1"])), 2);
}

#[test]
fn data_root_env_overrides_config_location() {
    let ws = Workspace::new();
    let cfg = read_json(&ws.path("catalog.json"));
    let elsewhere = tempfile::tempdir().unwrap();
    fs::write(elsewhere.path().join("catalog.json"), cfg.to_string()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sceneforge"))
        .args([
            "scan",
            "--config",
            s(&elsewhere.path().join("catalog.json")),
            "--out",
            s(&ws.path("o")),
        ])
        .env("SCENEFORGE_DATA_ROOT", ws.dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn plan_meets_target_and_splits_differ() {
    let ws = Workspace::new();
    let catalog = ws.scan("scan");
    ws.plan(&catalog, "test", &["--hours", "0.5", "--split", "test"]);
    let summary = read_json(&ws.path("test/plan_summary.json"));
    assert!(summary["total_duration_s"].as_f64().unwrap() >= 1800.0);
    assert_eq!(summary["split"], "test");

    let train = ws.plan(&catalog, "train", &["--hours", "0.005", "--seed", "4"]);
    let val = ws.plan(&catalog, "val", &["--hours", "0.005", "--seed", "4", "--split", "val"]);
    assert_ne!(fs::read(&train).unwrap(), fs::read(&val).unwrap());
    let header: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&val).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["corpus_weighting"], "uniform");
}

#[test]
fn render_is_reproducible_across_workers_and_replay() {
    let ws = Workspace::new();
    let catalog = ws.scan("scan");
    let manifest = ws.plan(
        &catalog,
        "plan",
        &["--hours", "0.004", "--seed", "9", "--snr-min", "-2"],
    );
    let render = |out: &str, workers: &str| {
        let o = sceneforge(&[
            "render",
            "--manifest",
            s(&manifest),
            "--catalog",
            s(&catalog),
            "--workers",
            workers,
            "--verify",
            "--out",
            s(&ws.path(out)),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    render("r1", "1");
    render("r4", "4");
    let skip = ["run_config.json"];
    let a = hash_tree(&ws.path("r1"), &skip);
    assert_eq!(a, hash_tree(&ws.path("r4"), &skip));
    assert!(read_json(&ws.path("r1/verify.json"))["flagged"]
        .as_array()
        .unwrap()
        .is_empty());

    let o = sceneforge(&[
        "--replay",
        s(&ws.path("r1/run_config.json")),
        "--out",
        s(&ws.path("replayed")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(a, hash_tree(&ws.path("replayed"), &skip));

    let o = sceneforge(&[
        "--replay",
        s(&ws.path("plan/run_config.json")),
        "--out",
        s(&ws.path("plan2")),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(&manifest).unwrap(),
        fs::read(ws.path("plan2/manifest.jsonl")).unwrap()
    );
}

#[test]
fn eval_passthrough_and_missing_files() {
    let ws = Workspace::new();
    let catalog = ws.scan("scan");
    let manifest = ws.plan(&catalog, "plan", &["--hours", "0.002"]);
    let o = sceneforge(&[
        "render",
        "--manifest",
        s(&manifest),
        "--catalog",
        s(&catalog),
        "--out",
        s(&ws.path("ds")),
    ]);
    assert_eq!(code(&o), 0);
    let enhanced = ws.path("enh");
    fs::create_dir_all(&enhanced).unwrap();
    let mixtures: Vec<PathBuf> = fs::read_dir(ws.path("ds/audio"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with("_mixture.wav"))
        .collect();
    for p in &mixtures[1..] {
        fs::copy(p, enhanced.join(p.file_name().unwrap())).unwrap();
    }
    let eval = |out: &str, extra: &[&str]| {
        let (ds, out_dir) = (ws.path("ds"), ws.path(out));
        let mut args = vec![
            "eval",
            "--dataset",
            s(&ds),
            "--enhanced",
            s(&enhanced),
            "--out",
            s(&out_dir),
        ];
        args.extend_from_slice(extra);
        sceneforge(&args)
    };
    let o = eval("m1", &[]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing enhanced file"));
    let o = eval("m2", &["--allow-missing", "--csv", "--svg"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&ws.path("m2/metrics.json"));
    assert_eq!(report["aggregate"]["scene_count"], mixtures.len() - 1);
    assert_eq!(report["aggregate"]["delta_snr_db"]["mean"], 0.0);
    assert_eq!(report["aggregate"]["delta_estoi"]["mean"], 0.0);
    assert!(ws.path("m2/metrics.csv").is_file());
    assert!(fs::read_to_string(ws.path("m2/metrics.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn stats_on_reference_catalog() {
    let ws = Workspace::new();
    let o = sceneforge(&["scan", "--reference", "--out", s(&ws.path("ref"))]);
    assert_eq!(code(&o), 0);
    let catalog = ws.path("ref/catalog.jsonl");
    let manifest = ws.plan(&catalog, "plan", &["--hours", "300", "--seed", "2"]);
    let o = sceneforge(&[
        "stats",
        "--catalog",
        s(&catalog),
        "--manifest",
        s(&manifest),
        "--prefix-hours",
        "3,10",
        "--out",
        s(&ws.path("stats")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&ws.path("stats/stats.json"));
    assert_eq!(r["corpora"]["timit"]["utterances"], 6300);
    let rows = r["repetition"].as_array().unwrap();
    let three = rows[0]["total_percent"].as_f64().unwrap();
    let ten = rows[1]["total_percent"].as_f64().unwrap();
    let full = rows[2]["total_percent"].as_f64().unwrap();
    assert!((three - 5.0).abs() < 3.0, "{three}");
    assert!((ten - 15.0).abs() < 3.0, "{ten}");
    assert!((full - 83.0).abs() <= 3.0, "{full}");
}

#[test]
fn schedule_prints_epochs() {
    let o = sceneforge(&["schedule", "--hours", "3,10,30,100,300"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let epochs: Vec<u64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["epochs"].as_u64().unwrap())
        .collect();
    assert_eq!(epochs, [1000, 300, 100, 30, 10]);
    let o = sceneforge(&["schedule", "--hours", "20", "--budget", "1000"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["epochs"], 50);
    assert_eq!(code(&sceneforge(&["schedule", "--hours", "0"])), 2);
}
